#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "retrialq/kolmogorov.hpp"

namespace rq = retrialq;

namespace {

std::vector<double> unit_vector(std::size_t m, std::size_t state) {
  std::vector<double> v(m, 0.0);
  v.at(state - 1) = 1.0;
  return v;
}

}  // namespace

TEST_CASE("transient reports the initial distribution verbatim", "[kolmogorov]") {
  const rq::SystemParams p(1.0, 3.0, 2.0);
  const std::vector<double> p0 = unit_vector(64, 1);
  const std::vector<double> times{0.0, 1.0, 2.0};
  const auto snaps = rq::transient(p, p0, times, 64, 1e-10);

  REQUIRE(snaps.size() == 3);
  CHECK(snaps[0].t == 0.0);
  CHECK(std::equal(snaps[0].probs.begin(), snaps[0].probs.end(), p0.begin()));
  CHECK(snaps[0].leak == 0.0);
  for (const auto& s : snaps) {
    double sum = 0.0;
    double low = 0.0;
    for (double v : s.probs) {
      sum += v;
      low = std::min(low, v);
    }
    CHECK(sum == Catch::Approx(1.0).margin(1e-8));
    CHECK(low >= 0.0);
  }
  // mass has actually moved off the starting state
  CHECK(snaps[2].probs[0] < 1.0);
  CHECK(snaps[2].probs[1] > 0.0);
}

TEST_CASE("transient rejects malformed input", "[kolmogorov]") {
  const rq::SystemParams p(1.0, 3.0, 2.0);
  const std::vector<double> times{0.0, 1.0};
  const std::vector<double> p0 = unit_vector(16, 1);

  CHECK_THROWS_AS(rq::transient(p, unit_vector(7, 1), times, 7, 1e-8), std::invalid_argument);
  CHECK_THROWS_AS(rq::transient(p, p0, times, 32, 1e-8), std::invalid_argument);
  CHECK_THROWS_AS(rq::transient(p, p0, times, 16, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(rq::transient(p, p0, {}, 16, 1e-8), std::invalid_argument);
  CHECK_THROWS_AS(rq::transient(p, p0, std::vector<double>{-1.0, 1.0}, 16, 1e-8),
                  std::invalid_argument);
  CHECK_THROWS_AS(rq::transient(p, p0, std::vector<double>{0.0, 2.0, 1.0}, 16, 1e-8),
                  std::invalid_argument);

  std::vector<double> negative = unit_vector(16, 1);
  negative[3] = -0.25;
  negative[0] = 1.25;
  CHECK_THROWS_AS(rq::transient(p, negative, times, 16, 1e-8), std::invalid_argument);

  std::vector<double> short_mass(16, 0.0);
  short_mass[0] = 0.5;
  CHECK_THROWS_AS(rq::transient(p, short_mass, times, 16, 1e-8), std::invalid_argument);

  // initial support must leave headroom below the truncation edge
  CHECK_THROWS_AS(rq::transient(p, unit_vector(16, 9), times, 16, 1e-8), std::invalid_argument);
}

TEST_CASE("escaping mass triggers a truncation error with a doubled suggestion",
          "[kolmogorov]") {
  // null ergodic parameters push mass towards high orbit levels; an 8-state
  // window cannot hold it for 5 time units
  const rq::SystemParams p(2.0, 1.0, 1.0);
  const std::vector<double> p0 = unit_vector(8, 1);
  const std::vector<double> times{0.0, 5.0};
  try {
    (void)rq::transient(p, p0, times, 8, 1e-8);
    FAIL("expected TruncationError");
  } catch (const rq::TruncationError& e) {
    CHECK(e.suggested_truncation == 16);
  }
}

TEST_CASE("tightening the tolerance does not move the solution", "[kolmogorov]") {
  const rq::SystemParams p(1.0, 3.0, 2.0);
  const std::vector<double> p0 = unit_vector(100, 1);
  const std::vector<double> times{0.0, 2.0};
  const auto coarse = rq::transient(p, p0, times, 100, 1e-8);
  const auto fine = rq::transient(p, p0, times, 100, 1e-11);
  CHECK(rq::l1_distance(coarse[1].probs, fine[1].probs) <= 1e-5);
}

TEST_CASE("stationary distribution satisfies balance and decays geometrically",
          "[kolmogorov]") {
  const rq::SystemParams p(1.0, 3.0, 2.0);
  const rq::DistributionSnapshot pi = rq::stationary(p, 400, 1e-12);

  REQUIRE(pi.probs.size() == 400);
  CHECK(std::isinf(pi.t));
  CHECK(pi.leak <= 1e-10);

  double sum = 0.0;
  for (double v : pi.probs) {
    CHECK(v >= 0.0);
    sum += v;
  }
  CHECK(sum == Catch::Approx(1.0).margin(1e-12));

  // independent residual check: ||A pi||_1 against a fresh generator
  const rq::TruncatedGenerator gen = rq::build_generator(p, 400, rq::GeneratorKind::A);
  std::vector<double> residual(400, 0.0);
  for (const rq::MatrixEntry& e : gen.entries) {
    residual[static_cast<std::size_t>(e.row - 1)] +=
        e.value * pi.probs[static_cast<std::size_t>(e.col - 1)];
  }
  double res = 0.0;
  for (double v : residual) res += std::abs(v);
  CHECK(res <= 1e-12);

  // two indices ahead = one orbit level deeper; deep in the tail the ratio is
  // the reciprocal stability margin, here exactly 1/2
  for (std::size_t i = 200; i <= 210; ++i) {
    CHECK(pi.probs[i + 2] / pi.probs[i] == Catch::Approx(0.5).margin(1e-9));
  }

  // cut balance across orbit levels: lambda pi(1, n) = mu0 pi(0, n+1)
  for (std::size_t n = 10; n <= 20; ++n) {
    const double busy = pi.probs[2 * n + 1];     // state {1, n}
    const double idle_up = pi.probs[2 * n + 2];  // state {0, n+1}
    CHECK(p.lambda * busy == Catch::Approx(p.mu0 * idle_up).epsilon(1e-10));
  }
}

TEST_CASE("stationary solver doubles the window until the tail is resolved", "[kolmogorov]") {
  const rq::SystemParams p(1.0, 3.0, 2.0);
  const rq::DistributionSnapshot pi = rq::stationary(p, 8, 1e-12);
  // mass halves per orbit level, so 1e-10 of tail needs 64 levels = 128 states
  CHECK(pi.probs.size() == 128);
  CHECK(pi.leak <= 1e-10);
}

TEST_CASE("stationary distribution exists only in the ergodic regime", "[kolmogorov]") {
  CHECK_THROWS_AS(rq::stationary({2.0, 1.0, 1.0}, 64, 1e-10), rq::RegimeError);
  CHECK_THROWS_AS(rq::stationary({1.0, 2.0, 1.0}, 64, 1e-10), rq::RegimeError);
  CHECK_THROWS_AS(rq::stationary({1.0, 3.0, 2.0}, 4, 1e-10), std::invalid_argument);
  CHECK_THROWS_AS(rq::stationary({1.0, 3.0, 2.0}, 64, 0.0), std::invalid_argument);
}

TEST_CASE("stationary distribution matches a dense null-space oracle", "[kolmogorov]") {
  const rq::SystemParams p(1.0, 3.0, 2.0);
  constexpr rq::StateIndex m = 200;
  const rq::DistributionSnapshot pi = rq::stationary(p, m, 1e-12);
  REQUIRE(pi.probs.size() == static_cast<std::size_t>(m));

  const rq::TruncatedGenerator gen = rq::build_generator(p, m, rq::GeneratorKind::A);
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(m, m);
  for (const rq::MatrixEntry& e : gen.entries) {
    dense(e.row - 1, e.col - 1) = e.value;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(dense);
  lu.setThreshold(1e-8);
  REQUIRE(lu.dimensionOfKernel() == 1);
  Eigen::VectorXd kernel = lu.kernel().col(0);
  kernel /= kernel.sum();

  double diff = 0.0;
  for (std::size_t i = 0; i < pi.probs.size(); ++i) {
    diff += std::abs(pi.probs[i] - kernel(static_cast<Eigen::Index>(i)));
  }
  CHECK(diff <= 1e-8);
}

TEST_CASE("long-horizon transient lands on the stationary distribution", "[kolmogorov]") {
  const rq::SystemParams p(1.0, 3.0, 2.0);
  const rq::DistributionSnapshot pi = rq::stationary(p, 400, 1e-12);
  const std::vector<double> p0 = unit_vector(400, 1);
  const std::vector<double> times{0.0, 200.0};
  const auto snaps = rq::transient(p, p0, times, 400, 1e-10);
  CHECK(rq::l1_distance(snaps[1].probs, pi.probs) <= 1e-6);
}

TEST_CASE("distance to the stationary distribution decays monotonically", "[kolmogorov]") {
  const rq::SystemParams p(1.0, 3.0, 2.0);
  const rq::DistributionSnapshot pi = rq::stationary(p, 200, 1e-12);
  const std::vector<double> p0 = unit_vector(200, 1);
  std::vector<double> times;
  for (int k = 0; k <= 30; ++k) times.push_back(static_cast<double>(k));
  const auto snaps = rq::transient(p, p0, times, 200, 1e-10);
  double prev = rq::l1_distance(snaps[0].probs, pi.probs);
  for (std::size_t k = 1; k < snaps.size(); ++k) {
    const double cur = rq::l1_distance(snaps[k].probs, pi.probs);
    CHECK(cur <= prev + 1e-10);
    prev = cur;
  }
}

TEST_CASE("snapshot serialization is round-trip exact", "[kolmogorov]") {
  const rq::DistributionSnapshot snap{1.5, {0.5, 0.25, 0.125, 0.125}, 0.25};
  CHECK(rq::snapshots_to_csv({&snap, 1}) ==
        "t,leak,p1,p2,p3,p4\n"
        "1.5,0.25,0.5,0.25,0.125,0.125\n");

  const rq::DistributionSnapshot other{2.0, {1.0, 0.0, 0.0}, 0.0};
  const std::vector<rq::DistributionSnapshot> mixed{snap, other};
  CHECK_THROWS_AS(rq::snapshots_to_csv(mixed), std::invalid_argument);
  CHECK_THROWS_AS(rq::snapshots_to_csv({}), std::invalid_argument);
}

TEST_CASE("l1 distance", "[kolmogorov]") {
  const std::vector<double> x{1.0, 2.0, 3.0};
  const std::vector<double> y{0.0, 2.0, 5.0};
  CHECK(rq::l1_distance(x, y) == 3.0);
  CHECK(rq::l1_distance(x, x) == 0.0);
  CHECK_THROWS_AS(rq::l1_distance(x, std::vector<double>{1.0}), std::invalid_argument);
}
