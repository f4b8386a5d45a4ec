#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <lapacke.h>

#include "retrialq/ergodicity.hpp"
#include "retrialq/errors.hpp"
#include "retrialq/io.hpp"
#include "retrialq/model.hpp"

namespace retrialq {

/// Probability vector over states 1..size at one point in time. `leak` is the
/// mass sitting on the four highest states — the truncation's buffer zone.
/// For the stationary distribution `t` is +infinity.
struct DistributionSnapshot {
  double t = 0.0;
  std::vector<double> probs;
  double leak = 0.0;
};

[[nodiscard]] inline double l1_distance(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("l1_distance: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += std::abs(x[i] - y[i]);
  return acc;
}

namespace detail {

// Triplet-form y = A x; entries are row-major sorted, so writes stay local.
struct SparseApply {
  StateIndex n = 0;
  std::vector<StateIndex> row, col;
  std::vector<double> val;

  explicit SparseApply(const TruncatedGenerator& g) : n(g.size) {
    row.reserve(g.entries.size());
    col.reserve(g.entries.size());
    val.reserve(g.entries.size());
    for (const MatrixEntry& e : g.entries) {
      row.push_back(e.row - 1);
      col.push_back(e.col - 1);
      val.push_back(e.value);
    }
  }

  void operator()(const std::vector<double>& x, std::vector<double>& y) const {
    std::fill(y.begin(), y.end(), 0.0);
    for (std::size_t k = 0; k < val.size(); ++k) {
      y[static_cast<std::size_t>(row[k])] += val[k] * x[static_cast<std::size_t>(col[k])];
    }
  }
};

// Classical RK4 with step-doubling error control: each step is taken once
// whole and once as two halves; if the Richardson estimate |whole - halves|/15
// exceeds the tolerance the step recursively splits.
class Rk4Stepper {
 public:
  Rk4Stepper(const TruncatedGenerator& gen, double tol)
      : apply_(gen), tol_(tol), n_(static_cast<std::size_t>(gen.size)) {
    for (std::vector<double>* v : {&k1_, &k2_, &k3_, &k4_, &stage_, &whole_, &half_}) {
      v->assign(n_, 0.0);
    }
  }

  void advance(std::vector<double>& y, double h) { controlled(y, h, 0); }

 private:
  void rk4(const std::vector<double>& y, double h, std::vector<double>& out) {
    apply_(y, k1_);
    for (std::size_t i = 0; i < n_; ++i) stage_[i] = y[i] + 0.5 * h * k1_[i];
    apply_(stage_, k2_);
    for (std::size_t i = 0; i < n_; ++i) stage_[i] = y[i] + 0.5 * h * k2_[i];
    apply_(stage_, k3_);
    for (std::size_t i = 0; i < n_; ++i) stage_[i] = y[i] + h * k3_[i];
    apply_(stage_, k4_);
    out.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      out[i] = y[i] + h / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
    }
  }

  void controlled(std::vector<double>& y, double h, int depth) {
    rk4(y, h, whole_);
    rk4(y, 0.5 * h, half_);
    std::vector<double> fine;
    rk4(half_, 0.5 * h, fine);
    double err = 0.0;
    for (std::size_t i = 0; i < n_; ++i) err += std::abs(whole_[i] - fine[i]);
    err /= 15.0;
    if (err <= tol_) {
      y = std::move(fine);
      return;
    }
    if (depth >= 30) {
      throw ConvergenceError("transient: step size underflow without meeting the local tolerance");
    }
    controlled(y, 0.5 * h, depth + 1);
    controlled(y, 0.5 * h, depth + 1);
  }

  SparseApply apply_;
  double tol_ = 0.0;
  std::size_t n_ = 0;
  std::vector<double> k1_, k2_, k3_, k4_, stage_, whole_, half_;
};

// Clip roundoff-scale negatives, renormalize, attach the edge-zone mass.
[[nodiscard]] inline DistributionSnapshot finish_snapshot(double t, std::vector<double> probs) {
  double sum = 0.0;
  for (double& v : probs) {
    if (v < 0.0) {
      if (v <= -1e-12) {
        throw ConvergenceError("snapshot: negative probability beyond roundoff scale");
      }
      v = 0.0;
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-8) {
    throw ConvergenceError("snapshot: probability mass not conserved");
  }
  for (double& v : probs) v /= sum;
  double leak = 0.0;
  for (std::size_t i = probs.size() - 4; i < probs.size(); ++i) leak += probs[i];
  return {t, std::move(probs), leak};
}

}  // namespace detail

/// Integrates the forward equations dp/dt = A p at truncation level m,
/// starting from p0 (the distribution at times.front()), and reports a
/// snapshot at every requested time. Classical RK4 with the base step tied to
/// the generator norm and step-doubling local error control at tolerance
/// `tol`. If more than 1e-6 of mass accumulates in the four edge states the
/// window is declared too small and a doubled level is suggested.
[[nodiscard]] inline std::vector<DistributionSnapshot> transient(const SystemParams& p,
                                                                 std::span<const double> p0,
                                                                 std::span<const double> times,
                                                                 StateIndex m, double tol) {
  if (m < 8) throw std::invalid_argument("transient: truncation level must be >= 8");
  if (static_cast<StateIndex>(p0.size()) != m) {
    throw std::invalid_argument("transient: initial distribution must have length m");
  }
  if (!(tol > 0.0) || !std::isfinite(tol)) throw std::invalid_argument("transient: bad tolerance");
  if (times.empty()) throw std::invalid_argument("transient: no output times");
  if (!(times.front() >= 0.0)) throw std::invalid_argument("transient: times must be >= 0");
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) {
      throw std::invalid_argument("transient: times must be strictly increasing");
    }
  }
  double sum = 0.0;
  StateIndex support = 0;
  for (std::size_t i = 0; i < p0.size(); ++i) {
    if (!(p0[i] >= 0.0)) {
      throw std::invalid_argument("transient: initial probabilities must be >= 0");
    }
    if (p0[i] > 0.0) support = static_cast<StateIndex>(i) + 1;
    sum += p0[i];
  }
  if (std::abs(sum - 1.0) > 1e-8) {
    throw std::invalid_argument("transient: initial distribution must sum to 1");
  }
  if (2 * support > m) {
    throw std::invalid_argument(
        "transient: initial support must sit in the lower half of the window");
  }

  const TruncatedGenerator gen = build_generator(p, m, GeneratorKind::A);
  detail::Rk4Stepper stepper(gen, tol);
  const double h_base = 0.1 / generator_norm_bound(p);

  std::vector<DistributionSnapshot> out;
  out.reserve(times.size());
  std::vector<double> y(p0.begin(), p0.end());

  // the first snapshot is the initial distribution itself, untouched
  out.push_back({times.front(), y, 0.0});
  for (std::size_t i = y.size() - 4; i < y.size(); ++i) out.back().leak += y[i];

  for (std::size_t k = 1; k < times.size(); ++k) {
    const double span = times[k] - times[k - 1];
    const auto steps = static_cast<std::int64_t>(std::ceil(span / h_base - 1e-12));
    const double h = span / static_cast<double>(std::max<std::int64_t>(steps, 1));
    for (std::int64_t s = 0; s < std::max<std::int64_t>(steps, 1); ++s) stepper.advance(y, h);
    out.push_back(detail::finish_snapshot(times[k], y));
    if (out.back().leak > 1e-6) {
      throw TruncationError("transient: probability mass reached the truncation edge", 2 * m);
    }
  }
  return out;
}

namespace detail {

// Stationary distribution at one fixed level: pin pi_1 = 1, solve the
// remaining balance equations A[2..m, 2..m] x = -A[2..m, 1] as a banded
// system (two sub-, one superdiagonal), prepend the pin and normalize.
// Unlike eliminating a balance row in favor of the normalization equation,
// the pinned solve keeps componentwise *relative* accuracy deep into the
// geometric tail, which the weighted bounds downstream depend on.
[[nodiscard]] inline std::vector<double> stationary_at_level(const SystemParams& p, StateIndex m,
                                                             double tol) {
  const TruncatedGenerator gen = build_generator(p, m, GeneratorKind::A);
  const lapack_int n = static_cast<lapack_int>(m - 1);
  const lapack_int kl = 2, ku = 1, ldab = 2 * kl + ku + 1;
  std::vector<double> band(static_cast<std::size_t>(ldab) * static_cast<std::size_t>(n), 0.0);
  std::vector<double> rhs(static_cast<std::size_t>(n), 0.0);
  for (const MatrixEntry& e : gen.entries) {
    if (e.col == 1) {
      if (e.row >= 2) rhs[static_cast<std::size_t>(e.row - 2)] -= e.value;
      continue;
    }
    if (e.row == 1) continue;  // the dropped balance row is implied by the others
    const auto i = static_cast<lapack_int>(e.row - 2);
    const auto j = static_cast<lapack_int>(e.col - 2);
    band[static_cast<std::size_t>(kl + ku + i - j) +
         static_cast<std::size_t>(j) * static_cast<std::size_t>(ldab)] = e.value;
  }
  std::vector<lapack_int> ipiv(static_cast<std::size_t>(n));
  const lapack_int info = LAPACKE_dgbsv(LAPACK_COL_MAJOR, n, kl, ku, 1, band.data(), ldab,
                                        ipiv.data(), rhs.data(), n);
  if (info != 0) {
    throw ConvergenceError("stationary: banded solve failed (info " + std::to_string(info) + ")");
  }

  std::vector<double> pi(static_cast<std::size_t>(m), 0.0);
  pi[0] = 1.0;
  double sum = 1.0;
  for (std::size_t i = 0; i < rhs.size(); ++i) {
    if (rhs[i] < 0.0) {
      if (rhs[i] <= -1e-12) {
        throw ConvergenceError("stationary: solve produced a negative probability");
      }
      rhs[i] = 0.0;
    }
    pi[i + 1] = rhs[i];
    sum += rhs[i];
  }
  for (double& v : pi) v /= sum;

  const SparseApply apply(gen);
  std::vector<double> residual(pi.size(), 0.0);
  apply(pi, residual);
  double res = 0.0;
  for (double v : residual) res += std::abs(v);
  if (res > tol) {
    throw ConvergenceError("stationary: balance residual " + format_number(res) +
                           " exceeds the tolerance");
  }
  return pi;
}

}  // namespace detail

/// Stationary distribution, starting at truncation level m and doubling the
/// level until the four edge states carry at most 1e-10 of mass (capped at
/// 25600). Only exists in the exponentially ergodic regime. The returned
/// snapshot has t = +infinity and the edge mass as `leak`.
[[nodiscard]] inline DistributionSnapshot stationary(const SystemParams& p, StateIndex m,
                                                     double tol) {
  if (classify(p) != Regime::ExponentiallyErgodic) {
    throw RegimeError("stationary: a stationary distribution exists only in the exponentially "
                      "ergodic regime");
  }
  if (m < 8) throw std::invalid_argument("stationary: truncation level must be >= 8");
  if (!(tol > 0.0) || !std::isfinite(tol)) throw std::invalid_argument("stationary: bad tolerance");

  constexpr StateIndex cap = 25600;
  for (StateIndex level = m;; level *= 2) {
    std::vector<double> pi = detail::stationary_at_level(p, level, tol);
    double tail = 0.0;
    for (std::size_t i = pi.size() - 4; i < pi.size(); ++i) tail += pi[i];
    if (tail <= 1e-10) {
      return {std::numeric_limits<double>::infinity(), std::move(pi), tail};
    }
    if (2 * level > cap) {
      throw ConvergenceError(
          "stationary: tail mass stays above 1e-10 up to the truncation cap of 25600");
    }
  }
}

/// CSV serialization of snapshots: header "t,leak,p1,...,pM", one row per
/// snapshot, round-trip-exact numbers.
[[nodiscard]] inline std::string snapshots_to_csv(std::span<const DistributionSnapshot> snaps) {
  if (snaps.empty()) throw std::invalid_argument("snapshots_to_csv: nothing to serialize");
  const std::size_t m = snaps.front().probs.size();
  std::string out = "t,leak";
  for (std::size_t i = 1; i <= m; ++i) {
    out += ",p";
    out += std::to_string(i);
  }
  out += "\n";
  for (const DistributionSnapshot& s : snaps) {
    if (s.probs.size() != m) {
      throw std::invalid_argument("snapshots_to_csv: snapshots have inconsistent lengths");
    }
    out += format_number(s.t);
    out += ",";
    out += format_number(s.leak);
    for (double v : s.probs) {
      out += ",";
      out += format_number(v);
    }
    out += "\n";
  }
  return out;
}

}  // namespace retrialq
