#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "retrialq/errors.hpp"
#include "retrialq/model.hpp"
#include "retrialq/weights.hpp"

namespace retrialq {

enum class Regime { NullErgodic, ExponentiallyErgodic, Critical };

[[nodiscard]] inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::NullErgodic: return "null-ergodic";
    case Regime::ExponentiallyErgodic: return "exponentially-ergodic";
    case Regime::Critical: return "critical";
  }
  throw std::invalid_argument("to_string: bad Regime");
}

/// The sign of mu*mu0 - lambda*(lambda + mu0) decides the regime. The
/// comparison is exact on purpose: the boundary is a legitimate input and
/// maps to Critical, not to whichever side an epsilon would favor.
[[nodiscard]] inline Regime classify(const SystemParams& p) {
  const double retrial_side = p.mu * p.mu0;
  const double arrival_side = p.lambda * (p.lambda + p.mu0);
  if (retrial_side > arrival_side) return Regime::ExponentiallyErgodic;
  if (retrial_side < arrival_side) return Regime::NullErgodic;
  return Regime::Critical;
}

/// Open interval (lo, hi).
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  [[nodiscard]] double width() const { return hi - lo; }
  [[nodiscard]] double midpoint() const { return 0.5 * (lo + hi); }
  [[nodiscard]] bool contains(double x) const { return lo < x && x < hi; }
};

/// Feasible b for a null-regime certificate: (b*, 1) with
/// b* = mu (lambda + mu0) / (lambda (lambda + mu + mu0)). The interval is
/// nonempty exactly in the null ergodic regime.
[[nodiscard]] inline Interval null_b_interval(const SystemParams& p) {
  if (classify(p) != Regime::NullErgodic) {
    throw RegimeError("null_b_interval: parameters are not null ergodic");
  }
  const double bstar = p.mu * (p.lambda + p.mu0) / (p.lambda * (p.lambda + p.mu + p.mu0));
  return {bstar, 1.0};
}

/// Feasible a given b: both decay terms of the weighted norm are positive
/// exactly on ( mu0 / (lambda (1-b) + mu0), (lambda - mu (1/b - 1)) / (lambda b) ).
[[nodiscard]] inline Interval null_a_interval(const SystemParams& p, double b) {
  const Interval bs = null_b_interval(p);
  if (!bs.contains(b)) {
    throw std::domain_error("null_a_interval: b is outside the feasible interval");
  }
  const double lo = p.mu0 / (p.lambda * (1.0 - b) + p.mu0);
  const double hi = (p.lambda - p.mu * (1.0 / b - 1.0)) / (p.lambda * b);
  return {lo, hi};
}

/// Feasible product x = ab for an ergodic-regime certificate: (1, x*) with
/// x* = mu mu0 / (lambda (lambda + mu0)) — the stability margin itself.
[[nodiscard]] inline Interval erg_x_interval(const SystemParams& p) {
  if (classify(p) != Regime::ExponentiallyErgodic) {
    throw RegimeError("erg_x_interval: parameters are not exponentially ergodic");
  }
  return {1.0, p.mu * p.mu0 / (p.lambda * (p.lambda + p.mu0))};
}

/// Feasible b given x = ab: both decay terms are positive exactly on
/// ( mu / (lambda + mu0), (lambda + mu - x lambda) / (lambda + mu0 / x) ).
[[nodiscard]] inline Interval erg_b_interval(const SystemParams& p, double x) {
  const Interval xs = erg_x_interval(p);
  if (!xs.contains(x)) {
    throw std::domain_error("erg_b_interval: x is outside the feasible interval");
  }
  return {p.mu / (p.lambda + p.mu0),
          (p.lambda + p.mu - x * p.lambda) / (p.lambda + p.mu0 / x)};
}

/// A certified exponential rate. In the null ergodic regime `rate` bounds the
/// decay of weighted transition probabilities (escape to infinity); in the
/// exponentially ergodic regime it bounds the convergence speed towards the
/// stationary distribution. `margin` is the distance from the optimizing
/// parameters to the boundary of the search region.
struct RateCertificate {
  Regime regime = Regime::Critical;
  double a = 0.0;
  double b = 0.0;
  double rate = 0.0;
  double margin = 0.0;
  friend bool operator==(const RateCertificate&, const RateCertificate&) = default;
};

inline void to_json(nlohmann::json& j, const RateCertificate& c) {
  j = nlohmann::json{
      {"regime", to_string(c.regime)}, {"a", c.a}, {"b", c.b}, {"rate", c.rate}, {"margin", c.margin}};
}

inline void from_json(const nlohmann::json& j, RateCertificate& c) {
  const std::string regime = j.at("regime").get<std::string>();
  if (regime == to_string(Regime::NullErgodic)) c.regime = Regime::NullErgodic;
  else if (regime == to_string(Regime::ExponentiallyErgodic)) c.regime = Regime::ExponentiallyErgodic;
  else if (regime == to_string(Regime::Critical)) c.regime = Regime::Critical;
  else throw std::invalid_argument("RateCertificate: unknown regime '" + regime + "'");
  j.at("a").get_to(c.a);
  j.at("b").get_to(c.b);
  j.at("rate").get_to(c.rate);
  j.at("margin").get_to(c.margin);
}

namespace detail {

// Golden-section maximization of a unimodal function on [lo, hi]. The fixed
// iteration count shrinks the bracket below machine resolution and keeps the
// result deterministic.
template <class F>
[[nodiscard]] double golden_max(F&& f, double lo, double hi) {
  constexpr double inv_phi = 0.6180339887498949;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = f(x1);
  double f2 = f(x2);
  for (int iter = 0; iter < 120; ++iter) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = f(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = f(x1);
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Maximizes the certified rate over the feasible weight region for the
/// regime of `p` with a nested golden-section search. The nesting is what
/// makes this correct: the objective is a min of two terms, and coordinate
/// alternation stalls on the ridge where they cross. Along the inner
/// coordinate the two terms are strictly monotone in opposite directions, so
/// every slice is unimodal; and both terms are concave in (log a, log b)
/// (each is a sum of -exp(linear) terms), so the partial max the outer
/// search sees is concave in the log coordinate, hence unimodal.
/// Deterministic — fixed iteration counts, no randomness. Throws RegimeError
/// on the critical surface, where no certificate exists.
[[nodiscard]] inline RateCertificate optimize_rate(const SystemParams& p) {
  const Regime regime = classify(p);
  if (regime == Regime::Critical) {
    throw RegimeError("optimize_rate: no rate certificate exists on the critical surface");
  }

  constexpr double wall = 1e-9;  // hold-off from the open boundaries

  if (regime == Regime::NullErgodic) {
    const Interval bs = null_b_interval(p);
    const auto zeta = [&p](double a, double b) {
      return std::min(p.lambda * (1.0 - a * b) - p.mu * (1.0 / b - 1.0),
                      p.lambda * (1.0 - b) - p.mu0 * (1.0 / a - 1.0));
    };
    const auto a_range = [&p](double b) {
      Interval as = null_a_interval(p, b);
      as.hi = std::min(as.hi, 1.0);  // the weights themselves must stay below 1
      return as;
    };
    const auto best_a = [&](double b) {
      const Interval as = a_range(b);
      return detail::golden_max([&](double a) { return zeta(a, b); }, as.lo, as.hi);
    };

    double b = detail::golden_max([&](double bb) { return zeta(best_a(bb), bb); }, bs.lo, bs.hi);
    double a = best_a(b);
    b = std::clamp(b, bs.lo + wall, bs.hi - wall);
    const Interval as = a_range(b);
    a = std::clamp(a, as.lo + wall, as.hi - wall);
    const double margin = std::min(std::min(b - bs.lo, bs.hi - b), std::min(a - as.lo, as.hi - a));
    return {regime, a, b, zeta(a, b), margin};
  }

  const Interval xs = erg_x_interval(p);
  // objective in (x, b) coordinates with a = x/b, so ab > 1 by construction
  const auto alpha = [&p](double x, double b) {
    return std::min(p.lambda + p.mu0 - p.mu / b,
                    p.lambda + p.mu - p.lambda * (b + x) - p.mu0 * b / x);
  };
  const auto best_b = [&](double x) {
    const Interval bsx = erg_b_interval(p, x);
    return detail::golden_max([&](double b) { return alpha(x, b); }, bsx.lo, bsx.hi);
  };

  double x = detail::golden_max([&](double xx) { return alpha(xx, best_b(xx)); }, xs.lo, xs.hi);
  double b = best_b(x);
  x = std::clamp(x, xs.lo + wall, xs.hi - wall);
  const Interval bsx = erg_b_interval(p, x);
  b = std::clamp(b, bsx.lo + wall, bsx.hi - wall);
  const double margin = std::min(std::min(x - xs.lo, xs.hi - x), std::min(b - bsx.lo, bsx.hi - b));
  return {regime, x / b, b, alpha(x, b), margin};
}

/// Certified transition-probability bound for the null ergodic regime:
/// starting from state k, the probability of being in state n at time t is
/// at most (delta_k / delta_n) exp(-rate t). Evaluated in log space, so the
/// deep-index weight ratios stay exact.
[[nodiscard]] inline double null_bound(const SystemParams& p, const RateCertificate& cert,
                                       StateIndex k, StateIndex n, double t) {
  if (cert.regime != Regime::NullErgodic) {
    throw RegimeError("null_bound: certificate does not cover the null ergodic regime");
  }
  if (classify(p) != Regime::NullErgodic) {
    throw RegimeError("null_bound: parameters are not null ergodic");
  }
  if (k < 1 || n < 1) throw std::domain_error("null_bound: state indices must be >= 1");
  if (!(t >= 0.0)) throw std::domain_error("null_bound: time must be >= 0");
  const NullWeights w(cert.a, cert.b);
  return std::exp(w.log_delta(k) - w.log_delta(n) - cert.rate * t);
}

/// Value of the certified convergence bound together with a geometric
/// estimate of the weighted sum's truncated remainder.
struct ErgBound {
  double value = 0.0;
  double tail_residual = 0.0;
};

namespace detail {

[[nodiscard]] inline double log_add_exp(double x, double y) {
  if (x < y) std::swap(x, y);
  if (y == -std::numeric_limits<double>::infinity()) return x;
  return x + std::log1p(std::exp(y - x));
}

}  // namespace detail

/// Certified l1 convergence bound for the exponentially ergodic regime:
/// 4 exp(-rate t) sum_{i>=2} g_i |p0_i - pi_i|. The weighted sum runs over
/// the common truncation; if the edge summands are not negligible (>= 1e-12)
/// the truncated remainder could be material and the bound is refused.
[[nodiscard]] inline ErgBound erg_bound(const SystemParams& p, const RateCertificate& cert,
                                        std::span<const double> p0, std::span<const double> pi,
                                        double t) {
  if (cert.regime != Regime::ExponentiallyErgodic) {
    throw RegimeError("erg_bound: certificate does not cover the exponentially ergodic regime");
  }
  if (classify(p) != Regime::ExponentiallyErgodic) {
    throw RegimeError("erg_bound: parameters are not exponentially ergodic");
  }
  if (p0.size() != pi.size()) {
    throw std::invalid_argument("erg_bound: distributions must share one truncation");
  }
  if (p0.size() < 8) throw std::invalid_argument("erg_bound: truncation too small");
  if (!(t >= 0.0)) throw std::domain_error("erg_bound: time must be >= 0");
  for (std::span<const double> v : {p0, pi}) {
    double sum = 0.0;
    for (double x : v) sum += x;
    if (std::abs(sum - 1.0) > 1e-6) {
      throw std::invalid_argument("erg_bound: inputs must be probability vectors");
    }
  }

  const ErgWeights w(cert.a, cert.b);
  const std::size_t m = p0.size();
  // summands in log space: the cumulative weights overflow double far before
  // the products g_i |p0_i - pi_i| stop being negligible
  double log_g = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  std::array<double, 3> last{0.0, 0.0, 0.0};  // summands at m-2, m-1, m
  for (std::size_t i = 2; i <= m; ++i) {
    log_g = detail::log_add_exp(log_g, w.log_d(static_cast<StateIndex>(i)));
    const double diff = std::abs(p0[i - 1] - pi[i - 1]);
    const double summand = diff > 0.0 ? std::exp(log_g + std::log(diff)) : 0.0;
    sum += summand;
    last = {last[1], last[2], summand};
  }
  if (std::max(last[1], last[2]) >= 1e-12) {
    throw UnreliableBoundError(
        "erg_bound: weighted summands at the truncation edge are not negligible; "
        "increase the truncation level");
  }
  double tail = 0.0;
  if (last[2] > 0.0) {
    const double ratio = last[0] > 0.0 ? last[2] / last[0] : 1.0;  // two steps = one orbit level
    tail = ratio < 1.0 ? (last[1] + last[2]) * ratio / (1.0 - ratio)
                       : std::numeric_limits<double>::infinity();
  }
  return {4.0 * std::exp(-cert.rate * t) * sum, tail};
}

}  // namespace retrialq
