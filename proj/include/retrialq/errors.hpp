#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace retrialq {

/// The requested operation is only defined in a different ergodicity regime.
class RegimeError : public std::runtime_error {
 public:
  explicit RegimeError(const std::string& what) : std::runtime_error(what) {}
};

/// Probability mass reached the truncation edge, so the result would be
/// unreliable. `suggested_truncation` is a level expected to be large enough.
class TruncationError : public std::runtime_error {
 public:
  TruncationError(const std::string& what, std::int64_t suggested)
      : std::runtime_error(what), suggested_truncation(suggested) {}
  std::int64_t suggested_truncation;
};

/// A numerical procedure failed to reach its target accuracy.
class ConvergenceError : public std::runtime_error {
 public:
  explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

/// A certified bound cannot be evaluated trustworthily at this truncation
/// (its truncated remainder is not negligible).
class UnreliableBoundError : public std::runtime_error {
 public:
  explicit UnreliableBoundError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace retrialq
