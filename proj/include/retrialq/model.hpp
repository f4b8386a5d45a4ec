#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "retrialq/errors.hpp"
#include "retrialq/io.hpp"

namespace retrialq {

using StateIndex = std::int64_t;

/// Arrival, service and retrial rate of the queue. All three must be positive
/// and finite; everything downstream assumes that.
struct SystemParams {
  double lambda;  ///< Poisson arrival rate
  double mu;      ///< exponential service rate
  double mu0;     ///< constant retrial rate out of a non-empty orbit

  SystemParams(double lambda_, double mu_, double mu0_)
      : lambda(lambda_), mu(mu_), mu0(mu0_) {
    if (!(std::isfinite(lambda) && lambda > 0.0 && std::isfinite(mu) && mu > 0.0 &&
          std::isfinite(mu0) && mu0 > 0.0)) {
      throw std::invalid_argument("SystemParams: all rates must be positive and finite");
    }
  }
};

/// (server occupancy, orbit size): server is 0 or 1, orbit >= 0.
struct QueueState {
  int server = 0;
  StateIndex orbit = 0;
  friend bool operator==(const QueueState&, const QueueState&) = default;
};

/// 1-based linear index of a state: (0, n) -> 2n+1, (1, n) -> 2n+2.
/// Odd indices are idle-server states, even indices busy-server states, and
/// each orbit level occupies one adjacent (idle, busy) pair.
[[nodiscard]] inline StateIndex state_to_index(const QueueState& s) {
  if ((s.server != 0 && s.server != 1) || s.orbit < 0) {
    throw std::invalid_argument("state_to_index: server must be 0 or 1 and orbit >= 0");
  }
  return 2 * s.orbit + 1 + s.server;
}

[[nodiscard]] inline QueueState index_to_state(StateIndex i) {
  if (i < 1) throw std::invalid_argument("index_to_state: index must be >= 1");
  return QueueState{i % 2 == 0 ? 1 : 0, (i - 1) / 2};
}

struct Transition {
  StateIndex target = 0;
  double rate = 0.0;
  friend bool operator==(const Transition&, const Transition&) = default;
};

/// Outgoing transitions of state i, sorted by target index. The empty idle
/// state only sees arrivals; any other idle state races a retrial (orbit
/// head grabs the server) against an arrival; a busy state races a service
/// completion against an arrival (which joins the orbit).
[[nodiscard]] inline std::vector<Transition> transition_rates(const SystemParams& p, StateIndex i) {
  if (i < 1) throw std::invalid_argument("transition_rates: index must be >= 1");
  if (i == 1) return {{2, p.lambda}};
  if (i % 2 == 0) return {{i - 1, p.mu}, {i + 2, p.lambda}};
  return {{i - 1, p.mu0}, {i + 1, p.lambda}};
}

/// Upper bound on the l1 operator norm of the transposed generator, valid
/// uniformly over all truncation levels: twice the arrival rate plus twice
/// the larger of the service and retrial rates.
[[nodiscard]] inline double generator_norm_bound(const SystemParams& p) {
  return 2.0 * p.lambda + 2.0 * std::max(p.mu, p.mu0);
}

/// Which matrix a TruncatedGenerator holds.
///  Q: the truncated generator itself (row convention),
///  A: its transpose, the matrix of the forward equations dp/dt = A p,
///  B: the reduction of A to difference coordinates (column 1 folded into
///     the others), one dimension smaller.
enum class GeneratorKind { Q, A, B };

[[nodiscard]] inline const char* to_string(GeneratorKind k) {
  switch (k) {
    case GeneratorKind::Q: return "Q";
    case GeneratorKind::A: return "A";
    case GeneratorKind::B: return "B";
  }
  throw std::invalid_argument("to_string: bad GeneratorKind");
}

struct MatrixEntry {
  StateIndex row = 0;  ///< 1-based
  StateIndex col = 0;  ///< 1-based
  double value = 0.0;
  friend bool operator==(const MatrixEntry&, const MatrixEntry&) = default;
};

/// Sparse coordinate-format matrix. Entries are sorted by (row, col), hold no
/// explicit zeros, and use 1-based indices. For kind B the dimension is one
/// less than the truncation level it was built from.
struct TruncatedGenerator {
  GeneratorKind kind = GeneratorKind::Q;
  StateIndex size = 0;
  std::vector<MatrixEntry> entries;

  /// O(log nnz) lookup; absent coordinates read as zero.
  [[nodiscard]] double entry(StateIndex row, StateIndex col) const {
    const MatrixEntry probe{row, col, 0.0};
    auto it = std::lower_bound(entries.begin(), entries.end(), probe,
                               [](const MatrixEntry& x, const MatrixEntry& y) {
                                 return x.row != y.row ? x.row < y.row : x.col < y.col;
                               });
    return (it != entries.end() && it->row == row && it->col == col) ? it->value : 0.0;
  }
};

/// Builds the level-m truncation of the generator (or its transpose, or the
/// reduced transpose). The top orbit level (the two highest states) stops
/// accepting arrivals, so every retained row still sums to zero and the
/// truncated chain stays a proper Markov chain on 1..m.
[[nodiscard]] inline TruncatedGenerator build_generator(const SystemParams& p, StateIndex m,
                                                        GeneratorKind kind) {
  if (m < 4) throw std::invalid_argument("build_generator: truncation level must be >= 4");

  // Off-diagonal rates of the truncated Q plus the zero-row-sum diagonal.
  std::vector<MatrixEntry> off;
  off.reserve(static_cast<std::size_t>(2 * m));
  std::vector<double> diag(static_cast<std::size_t>(m) + 1, 0.0);
  for (StateIndex i = 1; i <= m; ++i) {
    for (const Transition& tr : transition_rates(p, i)) {
      const bool is_arrival = tr.target > i;
      if (tr.target > m || (is_arrival && i >= m - 1)) continue;
      off.push_back({i, tr.target, tr.rate});
      diag[static_cast<std::size_t>(i)] -= tr.rate;
    }
  }

  TruncatedGenerator gen;
  gen.kind = kind;
  std::vector<MatrixEntry>& out = gen.entries;
  if (kind == GeneratorKind::Q || kind == GeneratorKind::A) {
    gen.size = m;
    out.reserve(off.size() + static_cast<std::size_t>(m));
    for (const MatrixEntry& e : off) {
      out.push_back(kind == GeneratorKind::Q ? e : MatrixEntry{e.col, e.row, e.value});
    }
    for (StateIndex i = 1; i <= m; ++i) {
      out.push_back({i, i, diag[static_cast<std::size_t>(i)]});
    }
  } else {
    gen.size = m - 1;
    out.reserve(off.size() + static_cast<std::size_t>(2 * m));
    // In A = Q^T, column 1 holds q_{1*}: only a_11 = -lambda and a_21 = lambda
    // are nonzero. Folding column 1 into the others (b_ij = a_ij - a_i1 on
    // full indices 2..m) therefore only rewrites full row 2, which becomes
    // dense: b_2j = a_2j - lambda.
    std::vector<double> a_row2(static_cast<std::size_t>(m) + 1, 0.0);
    a_row2[2] = diag[2];
    for (const MatrixEntry& e : off) {
      if (e.col == 2 && e.row >= 2) a_row2[static_cast<std::size_t>(e.row)] = e.value;
    }
    for (StateIndex j = 2; j <= m; ++j) {
      const double v = a_row2[static_cast<std::size_t>(j)] - p.lambda;
      if (v != 0.0) out.push_back({1, j - 1, v});
    }
    // Rows 3..m of A are untouched by the fold; shift both indices by one.
    for (const MatrixEntry& e : off) {
      if (e.col >= 3) out.push_back({e.col - 1, e.row - 1, e.value});
    }
    for (StateIndex i = 3; i <= m; ++i) {
      out.push_back({i - 1, i - 1, diag[static_cast<std::size_t>(i)]});
    }
  }
  std::sort(out.begin(), out.end(), [](const MatrixEntry& x, const MatrixEntry& y) {
    return x.row != y.row ? x.row < y.row : x.col < y.col;
  });
  return gen;
}

/// Plain-text coordinate serialization: a header line "kind size" followed by
/// one "row col value" line per entry, row-major sorted, 1-based, with
/// round-trip-exact number formatting.
[[nodiscard]] inline std::string to_coordinate_text(const TruncatedGenerator& g) {
  std::string out = std::string(to_string(g.kind)) + " " + std::to_string(g.size) + "\n";
  for (const MatrixEntry& e : g.entries) {
    out += std::to_string(e.row);
    out += " ";
    out += std::to_string(e.col);
    out += " ";
    out += format_number(e.value);
    out += "\n";
  }
  return out;
}

[[nodiscard]] inline TruncatedGenerator from_coordinate_text(const std::string& text) {
  std::istringstream in(text);
  std::string kind_token;
  StateIndex size = 0;
  if (!(in >> kind_token >> size) || size < 1) {
    throw std::invalid_argument("from_coordinate_text: malformed header");
  }
  TruncatedGenerator g;
  if (kind_token == "Q") g.kind = GeneratorKind::Q;
  else if (kind_token == "A") g.kind = GeneratorKind::A;
  else if (kind_token == "B") g.kind = GeneratorKind::B;
  else throw std::invalid_argument("from_coordinate_text: unknown kind '" + kind_token + "'");
  g.size = size;
  StateIndex r = 0;
  StateIndex c = 0;
  double v = 0.0;
  while (in >> r >> c >> v) {
    if (r < 1 || r > size || c < 1 || c > size) {
      throw std::invalid_argument("from_coordinate_text: entry out of range");
    }
    g.entries.push_back({r, c, v});
  }
  if (!in.eof()) throw std::invalid_argument("from_coordinate_text: malformed entry line");
  std::sort(g.entries.begin(), g.entries.end(), [](const MatrixEntry& x, const MatrixEntry& y) {
    return x.row != y.row ? x.row < y.row : x.col < y.col;
  });
  return g;
}

}  // namespace retrialq
