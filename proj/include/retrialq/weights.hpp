#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "retrialq/model.hpp"

namespace retrialq {

/// Decreasing geometric weight ladder used in the null ergodic (transient)
/// regime: delta_1 = 1, delta_{2k+1} = (ab)^k, delta_{2k} = a^{k-1} b^k with
/// 0 < a < 1 and 0 < b < 1. Kept in log space so deep indices neither
/// underflow nor lose relative precision.
class NullWeights {
 public:
  NullWeights(double a, double b) {
    if (!(std::isfinite(a) && std::isfinite(b) && a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0)) {
      throw std::domain_error("NullWeights: need 0 < a < 1 and 0 < b < 1");
    }
    a_ = a;
    b_ = b;
    log_a_ = std::log(a);
    log_b_ = std::log(b);
  }

  [[nodiscard]] double a() const { return a_; }
  [[nodiscard]] double b() const { return b_; }

  /// log delta_k for k >= 1.
  [[nodiscard]] double log_delta(StateIndex k) const {
    if (k < 1) throw std::domain_error("NullWeights::log_delta: index must be >= 1");
    if (k % 2 == 1) {
      return static_cast<double>((k - 1) / 2) * (log_a_ + log_b_);
    }
    const double j = static_cast<double>(k / 2);
    return (j - 1.0) * log_a_ + j * log_b_;
  }

  [[nodiscard]] double delta(StateIndex k) const { return std::exp(log_delta(k)); }

 private:
  double a_ = 0.0, b_ = 0.0, log_a_ = 0.0, log_b_ = 0.0;
};

/// Increasing weight ladder used in the exponentially ergodic regime:
/// d_2 = 1, d_{2k+1} = b d_{2k}, d_{2k+2} = a d_{2k+1}, with a, b > 0 and
/// ab > 1 (each orbit level scales the pair by ab, so the ladder grows).
class ErgWeights {
 public:
  ErgWeights(double a, double b) {
    if (!(std::isfinite(a) && std::isfinite(b) && a > 0.0 && b > 0.0 && a * b > 1.0)) {
      throw std::domain_error("ErgWeights: need a > 0, b > 0 and ab > 1");
    }
    a_ = a;
    b_ = b;
    log_a_ = std::log(a);
    log_b_ = std::log(b);
  }

  [[nodiscard]] double a() const { return a_; }
  [[nodiscard]] double b() const { return b_; }

  /// log d_i for i >= 2.
  [[nodiscard]] double log_d(StateIndex i) const {
    if (i < 2) throw std::domain_error("ErgWeights::log_d: index must be >= 2");
    // number of b-steps (odd rungs 3, 5, ..) and a-steps (even rungs 4, 6, ..)
    // climbed on the way from 2 up to i
    const double nb = static_cast<double>((i - 1) / 2);
    const double na = static_cast<double>((i - 2) / 2);
    return na * log_a_ + nb * log_b_;
  }

  [[nodiscard]] double d(StateIndex i) const { return std::exp(log_d(i)); }

  /// g_i = sum_{n=2}^{i} d_n, the cumulative weights entering the ergodic
  /// bound. Linear scan; fine for the index ranges used here.
  [[nodiscard]] double g(StateIndex i) const {
    if (i < 2) throw std::domain_error("ErgWeights::g: index must be >= 2");
    double acc = 0.0;
    for (StateIndex n = 2; n <= i; ++n) acc += std::exp(log_d(n));
    return acc;
  }

 private:
  double a_ = 0.0, b_ = 0.0, log_a_ = 0.0, log_b_ = 0.0;
};

/// Logarithmic norm of the transposed generator in the delta-weighted l1
/// norm, in closed form. Independent of the truncation level; negative
/// exactly when (a, b) sits inside the feasible region.
[[nodiscard]] inline double lognorm_null_analytic(const SystemParams& p, double a, double b) {
  NullWeights validated(a, b);
  (void)validated;
  const double even_cols = p.lambda * (1.0 - a * b) - p.mu * (1.0 / b - 1.0);
  const double odd_cols = p.lambda * (1.0 - b) - p.mu0 * (1.0 / a - 1.0);
  return -std::min(even_cols, odd_cols);
}

/// The three column-class decay rates of the d-weighted reduced matrix.
/// `first_column` exceeds `even` by mu0/a, so the overall rate never binds
/// there; it is exposed for diagnostics only.
struct ErgRateTerms {
  double first_column = 0.0;
  double odd = 0.0;
  double even = 0.0;
};

[[nodiscard]] inline ErgRateTerms erg_rate_terms(const SystemParams& p, double a, double b) {
  ErgWeights validated(a, b);
  (void)validated;
  const double even = p.lambda + p.mu - p.lambda * (b + a * b) - p.mu0 / a;
  return {even + p.mu0 / a, p.lambda + p.mu0 - p.mu / b, even};
}

/// Logarithmic norm of the reduced matrix in the d-weighted norm, in closed
/// form: the negative of the smaller of the odd/even column rates.
[[nodiscard]] inline double lognorm_erg_analytic(const SystemParams& p, double a, double b) {
  const ErgRateTerms t = erg_rate_terms(p, a, b);
  return -std::min(t.odd, t.even);
}

namespace detail {

inline void require_lognorm_size(const TruncatedGenerator& gen) {
  if (gen.size < 8) {
    throw std::domain_error("lognorm_numeric: matrix too small (need size >= 8)");
  }
}

}  // namespace detail

/// Unweighted l1 logarithmic norm, evaluated column by column as
/// diagonal + sum |off-diagonal| and maximized over the interior columns.
/// The last three columns are skipped: the truncation edge alters their
/// outflow pattern, and the interior already realizes the supremum.
[[nodiscard]] inline double lognorm_numeric(const TruncatedGenerator& gen) {
  detail::require_lognorm_size(gen);
  const StateIndex cols = gen.size - 3;
  std::vector<double> acc(static_cast<std::size_t>(cols) + 1, 0.0);
  for (const MatrixEntry& e : gen.entries) {
    if (e.col > cols) continue;
    acc[static_cast<std::size_t>(e.col)] += e.row == e.col ? e.value : std::abs(e.value);
  }
  return *std::max_element(acc.begin() + 1, acc.end());
}

/// delta-weighted l1 logarithmic norm of a kind-A generator: the similarity
/// diag(delta) A diag(delta)^{-1} applied entrywise via log-space weight
/// ratios, then the column rule over the interior columns.
[[nodiscard]] inline double lognorm_numeric(const TruncatedGenerator& gen, const NullWeights& w) {
  if (gen.kind != GeneratorKind::A) {
    throw std::domain_error("lognorm_numeric: decreasing weights apply to a kind-A generator");
  }
  detail::require_lognorm_size(gen);
  const StateIndex cols = gen.size - 3;
  std::vector<double> acc(static_cast<std::size_t>(cols) + 1, 0.0);
  for (const MatrixEntry& e : gen.entries) {
    if (e.col > cols) continue;
    if (e.row == e.col) {
      acc[static_cast<std::size_t>(e.col)] += e.value;
    } else {
      acc[static_cast<std::size_t>(e.col)] +=
          std::exp(w.log_delta(e.row) - w.log_delta(e.col)) * std::abs(e.value);
    }
  }
  return *std::max_element(acc.begin() + 1, acc.end());
}

/// d-weighted l1 logarithmic norm of a kind-B reduced matrix. The norm is
/// induced by the triangular map (Dv)_i = d_{i+1} sum_{k>=i} v_k, so the
/// similarity D B D^{-1} is materialized column by column: suffix sums down
/// each column (the all-ones factor), the difference with the previous
/// column (its inverse is bidiagonal), then log-space weight ratios. Suffix
/// sums of structurally zero tails stay exactly zero, and the decreasing
/// upward weight ratios damp the roundoff above the band, so the column
/// metric is numerically faithful.
[[nodiscard]] inline double lognorm_numeric(const TruncatedGenerator& gen, const ErgWeights& w) {
  if (gen.kind != GeneratorKind::B) {
    throw std::domain_error("lognorm_numeric: increasing weights apply to a kind-B reduced matrix");
  }
  detail::require_lognorm_size(gen);
  const std::size_t n = static_cast<std::size_t>(gen.size);
  const StateIndex cols = gen.size - 3;

  std::vector<std::vector<std::pair<StateIndex, double>>> bycol(n + 1);
  for (const MatrixEntry& e : gen.entries) {
    bycol[static_cast<std::size_t>(e.col)].push_back({e.row, e.value});
  }
  // reduced index r carries the weight of full state r + 1
  std::vector<double> logd(n + 1, 0.0);
  for (std::size_t i = 1; i <= n; ++i) logd[i] = w.log_d(static_cast<StateIndex>(i) + 1);

  std::vector<double> prev(n + 2, 0.0), cur(n + 2, 0.0);
  double best = -std::numeric_limits<double>::infinity();
  for (StateIndex j = 1; j <= cols; ++j) {
    std::fill(cur.begin(), cur.end(), 0.0);
    for (const auto& [r, v] : bycol[static_cast<std::size_t>(j)]) {
      cur[static_cast<std::size_t>(r)] = v;
    }
    for (std::size_t i = n; i >= 1; --i) cur[i] += cur[i + 1];
    double metric = 0.0;
    const std::size_t uj = static_cast<std::size_t>(j);
    for (std::size_t i = 1; i <= n; ++i) {
      const double s = cur[i] - prev[i];
      if (s == 0.0) continue;
      const double c = std::exp(logd[i] - logd[uj]) * s;
      metric += i == uj ? c : std::abs(c);
    }
    best = std::max(best, metric);
    std::swap(prev, cur);
  }
  return best;
}

}  // namespace retrialq
