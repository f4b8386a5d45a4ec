#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "retrialq/ergodicity.hpp"
#include "retrialq/weights.hpp"

namespace rq = retrialq;

TEST_CASE("decreasing weights follow their recurrence", "[weights]") {
  const rq::NullWeights w(0.5, 0.5);
  CHECK(w.delta(1) == 1.0);  // log-space representation keeps the anchor exact
  CHECK(w.delta(2) == Catch::Approx(0.5).epsilon(1e-14));     // delta_2 = b
  CHECK(w.delta(3) == Catch::Approx(0.25).epsilon(1e-14));    // delta_3 = ab
  CHECK(w.delta(4) == Catch::Approx(0.125).epsilon(1e-14));   // delta_4 = a b^2
  CHECK(w.delta(5) == Catch::Approx(0.0625).epsilon(1e-14));  // delta_5 = (ab)^2

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.05, 0.95);
  for (int rep = 0; rep < 20; ++rep) {
    const double a = unit(rng), b = unit(rng);
    const rq::NullWeights ww(a, b);
    for (rq::StateIndex k = 1; k <= 500; ++k) {
      // delta_{2k} = b delta_{2k-1}, delta_{2k+1} = a delta_{2k}
      const double rb = std::exp(ww.log_delta(2 * k) - ww.log_delta(2 * k - 1));
      const double ra = std::exp(ww.log_delta(2 * k + 1) - ww.log_delta(2 * k));
      if (std::abs(rb - b) > 1e-12 * b) FAIL("b-step ratio off at k = " << k);
      if (std::abs(ra - a) > 1e-12 * a) FAIL("a-step ratio off at k = " << k);
    }
  }

  CHECK_THROWS_AS(rq::NullWeights(1.0, 0.5), std::domain_error);
  CHECK_THROWS_AS(rq::NullWeights(0.5, 0.0), std::domain_error);
  CHECK_THROWS_AS(rq::NullWeights(-0.1, 0.5), std::domain_error);
  CHECK_THROWS_AS(rq::NullWeights(0.5, 0.5).log_delta(0), std::domain_error);
}

TEST_CASE("increasing weights follow their recurrence", "[weights]") {
  const rq::ErgWeights w(1.5, 1.2);
  CHECK(w.d(2) == 1.0);
  CHECK(w.d(3) == Catch::Approx(1.2).epsilon(1e-14));          // d_3 = b
  CHECK(w.d(4) == Catch::Approx(1.8).epsilon(1e-14));          // d_4 = ab
  CHECK(w.d(5) == Catch::Approx(2.16).epsilon(1e-14));         // d_5 = a b^2
  CHECK(w.d(6) == Catch::Approx(3.24).epsilon(1e-14));         // d_6 = (ab)^2
  CHECK(w.g(5) == Catch::Approx(1.0 + 1.2 + 1.8 + 2.16).epsilon(1e-14));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.3, 3.0);
  for (int rep = 0; rep < 40; ++rep) {
    const double a = unit(rng), b = unit(rng);
    if (a * b <= 1.0) continue;
    const rq::ErgWeights ww(a, b);
    for (rq::StateIndex k = 1; k <= 500; ++k) {
      const double rb = std::exp(ww.log_d(2 * k + 1) - ww.log_d(2 * k));
      const double ra = std::exp(ww.log_d(2 * k + 2) - ww.log_d(2 * k + 1));
      if (std::abs(rb - b) > 1e-12 * b) FAIL("b-step ratio off at k = " << k);
      if (std::abs(ra - a) > 1e-12 * a) FAIL("a-step ratio off at k = " << k);
    }
  }

  CHECK_THROWS_AS(rq::ErgWeights(2.0, 0.5), std::domain_error);  // ab = 1
  CHECK_THROWS_AS(rq::ErgWeights(0.9, 1.0), std::domain_error);
  CHECK_THROWS_AS(rq::ErgWeights(-1.5, -1.5), std::domain_error);
  CHECK_THROWS_AS(rq::ErgWeights(1.5, 1.2).log_d(1), std::domain_error);
  CHECK_THROWS_AS(rq::ErgWeights(1.5, 1.2).g(1), std::domain_error);
}

TEST_CASE("closed-form decay rates at pinned points", "[weights]") {
  const rq::SystemParams p(2.0, 1.0, 1.0);
  // even columns: 2 (1 - 0.375) - 1 (1/0.5 - 1) = 0.25
  // odd columns:  2 (1 - 0.5)   - 1 (1/0.75 - 1) = 2/3
  CHECK(rq::lognorm_null_analytic(p, 0.75, 0.5) == Catch::Approx(-0.25).margin(1e-14));
  // at a = b = 0.5 the odd-column term vanishes
  CHECK(rq::lognorm_null_analytic(p, 0.5, 0.5) == Catch::Approx(0.0).margin(1e-14));

  const rq::SystemParams q(1.0, 3.0, 2.0);
  // odd columns: 1 + 2 - 3/1.05 = 1/7;  even: 4 - 1.05 (1 + 10/7) - 2/(10/7) = 0.05
  CHECK(rq::lognorm_erg_analytic(q, 10.0 / 7.0, 1.05) == Catch::Approx(-0.05).margin(1e-12));

  const rq::ErgRateTerms terms = rq::erg_rate_terms(q, 10.0 / 7.0, 1.05);
  CHECK(terms.even == Catch::Approx(0.05).margin(1e-12));
  CHECK(terms.odd == Catch::Approx(1.0 / 7.0).margin(1e-12));
  // the dense first column always decays faster than the even class, by mu0/a
  CHECK(terms.first_column - terms.even == Catch::Approx(2.0 / (10.0 / 7.0)).epsilon(1e-12));

  CHECK_THROWS_AS(rq::lognorm_null_analytic(p, 1.2, 0.5), std::domain_error);
  CHECK_THROWS_AS(rq::lognorm_erg_analytic(q, 1.0, 0.9), std::domain_error);
}

TEST_CASE("numeric log norm of the plain transpose vanishes", "[weights]") {
  // every interior column of the transposed generator sums to zero, and the
  // diagonal is minus the off-diagonal column mass
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> rate(0.2, 5.0);
  for (int rep = 0; rep < 10; ++rep) {
    const rq::SystemParams p(rate(rng), rate(rng), rate(rng));
    const rq::TruncatedGenerator a = rq::build_generator(p, 60, rq::GeneratorKind::A);
    CHECK(rq::lognorm_numeric(a) == Catch::Approx(0.0).margin(1e-13));
  }
}

TEST_CASE("numeric and closed-form log norms agree in the null regime", "[weights]") {
  const rq::SystemParams p(2.0, 1.0, 1.0);
  const rq::TruncatedGenerator a = rq::build_generator(p, 400, rq::GeneratorKind::A);
  CHECK(std::abs(rq::lognorm_numeric(a, rq::NullWeights(0.75, 0.5)) - (-0.25)) <= 1e-10);
  CHECK(std::abs(rq::lognorm_numeric(a, rq::NullWeights(0.5, 0.5)) - 0.0) <= 1e-10);

  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> rate(0.2, 5.0);
  std::uniform_real_distribution<double> unit(0.1, 0.9);
  int done = 0;
  while (done < 5) {
    const rq::SystemParams pr(rate(rng), rate(rng), rate(rng));
    if (rq::classify(pr) != rq::Regime::NullErgodic) continue;
    const rq::Interval bs = rq::null_b_interval(pr);
    const double b = bs.lo + unit(rng) * bs.width();
    rq::Interval as = rq::null_a_interval(pr, b);
    as.hi = std::min(as.hi, 1.0);
    const double a_w = as.lo + unit(rng) * as.width();
    const rq::TruncatedGenerator gen = rq::build_generator(pr, 200, rq::GeneratorKind::A);
    const double numeric = rq::lognorm_numeric(gen, rq::NullWeights(a_w, b));
    const double analytic = rq::lognorm_null_analytic(pr, a_w, b);
    if (std::abs(numeric - analytic) > 1e-10) {
      FAIL("null route mismatch: " << numeric << " vs " << analytic);
    }
    ++done;
  }
}

TEST_CASE("numeric and closed-form log norms agree in the ergodic regime", "[weights]") {
  const rq::SystemParams p(1.0, 3.0, 2.0);
  const rq::TruncatedGenerator b400 = rq::build_generator(p, 400, rq::GeneratorKind::B);
  CHECK(std::abs(rq::lognorm_numeric(b400, rq::ErgWeights(10.0 / 7.0, 1.05)) - (-0.05)) <= 1e-10);

  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> rate(0.2, 5.0);
  std::uniform_real_distribution<double> unit(0.1, 0.9);
  int done = 0;
  while (done < 5) {
    const rq::SystemParams pr(rate(rng), rate(rng), rate(rng));
    if (rq::classify(pr) != rq::Regime::ExponentiallyErgodic) continue;
    const rq::Interval xs = rq::erg_x_interval(pr);
    const double x = xs.lo + unit(rng) * xs.width();
    const rq::Interval bsx = rq::erg_b_interval(pr, x);
    const double bw = bsx.lo + unit(rng) * bsx.width();
    const rq::TruncatedGenerator gen = rq::build_generator(pr, 200, rq::GeneratorKind::B);
    const double numeric = rq::lognorm_numeric(gen, rq::ErgWeights(x / bw, bw));
    const double analytic = rq::lognorm_erg_analytic(pr, x / bw, bw);
    if (std::abs(numeric - analytic) > 1e-10) {
      FAIL("ergodic route mismatch: " << numeric << " vs " << analytic);
    }
    ++done;
  }
}

TEST_CASE("numeric log norm rejects mismatched inputs", "[weights]") {
  const rq::SystemParams p(1.0, 3.0, 2.0);
  const rq::TruncatedGenerator q = rq::build_generator(p, 20, rq::GeneratorKind::Q);
  const rq::TruncatedGenerator a = rq::build_generator(p, 20, rq::GeneratorKind::A);
  const rq::TruncatedGenerator b = rq::build_generator(p, 20, rq::GeneratorKind::B);
  const rq::NullWeights null_w(0.5, 0.5);
  const rq::ErgWeights erg_w(1.4, 1.05);

  CHECK_THROWS_AS(rq::lognorm_numeric(q, null_w), std::domain_error);
  CHECK_THROWS_AS(rq::lognorm_numeric(b, null_w), std::domain_error);
  CHECK_THROWS_AS(rq::lognorm_numeric(q, erg_w), std::domain_error);
  CHECK_THROWS_AS(rq::lognorm_numeric(a, erg_w), std::domain_error);

  const rq::TruncatedGenerator tiny = rq::build_generator(p, 6, rq::GeneratorKind::A);
  CHECK_THROWS_AS(rq::lognorm_numeric(tiny), std::domain_error);
  CHECK_THROWS_AS(rq::lognorm_numeric(tiny, null_w), std::domain_error);
}
