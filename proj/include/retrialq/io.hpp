#pragma once

#include <cstdio>
#include <string>

namespace retrialq {

/// Formats a double with enough digits to round-trip exactly (at least 15
/// significant digits). Used by every text serializer in the library so that
/// identical runs produce byte-identical files.
[[nodiscard]] inline std::string format_number(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

}  // namespace retrialq
