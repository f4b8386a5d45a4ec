// Walkthrough: classify two parameter sets, optimize a rate certificate for
// each, and check the certified bounds against the truncated forward
// equations on a short time grid.

#include <cstdio>
#include <vector>

#include "retrialq/retrialq.hpp"

namespace rq = retrialq;

namespace {

void demo_ergodic() {
  const rq::SystemParams p(1.0, 3.0, 2.0);
  const rq::RateCertificate cert = rq::optimize_rate(p);
  std::printf("(lambda, mu, mu0) = (1, 3, 2): %s\n", rq::to_string(rq::classify(p)));
  std::printf("  certificate: a = %.6f, b = %.6f, rate = %.6f\n", cert.a, cert.b, cert.rate);

  const rq::StateIndex m = 400;
  const rq::DistributionSnapshot pi = rq::stationary(p, m, 1e-12);
  std::vector<double> p0(static_cast<std::size_t>(m), 0.0);
  p0[0] = 1.0;  // empty system
  const std::vector<double> times{0.0, 5.0, 10.0, 20.0, 40.0};
  const auto snaps = rq::transient(p, p0, times, m, 1e-10);
  std::printf("  %8s %14s %14s\n", "t", "l1 to pi", "certified");
  for (const auto& s : snaps) {
    const double observed = rq::l1_distance(s.probs, pi.probs);
    const rq::ErgBound bound = rq::erg_bound(p, cert, p0, pi.probs, s.t);
    std::printf("  %8.1f %14.6e %14.6e\n", s.t, observed, bound.value);
  }
}

void demo_null() {
  const rq::SystemParams p(2.0, 1.0, 1.0);
  const rq::RateCertificate cert = rq::optimize_rate(p);
  std::printf("(lambda, mu, mu0) = (2, 1, 1): %s\n", rq::to_string(rq::classify(p)));
  std::printf("  certificate: a = %.6f, b = %.6f, rate = %.6f\n", cert.a, cert.b, cert.rate);

  const rq::StateIndex m = 400, k = 21, n = 9;
  std::vector<double> p0(static_cast<std::size_t>(m), 0.0);
  p0[k - 1] = 1.0;
  const std::vector<double> times{0.0, 5.0, 10.0, 20.0};
  const auto snaps = rq::transient(p, p0, times, m, 1e-10);
  std::printf("  occupancy of state %lld from state %lld:\n",
              static_cast<long long>(n), static_cast<long long>(k));
  std::printf("  %8s %14s %14s\n", "t", "observed", "certified");
  for (const auto& s : snaps) {
    std::printf("  %8.1f %14.6e %14.6e\n", s.t, s.probs[n - 1],
                rq::null_bound(p, cert, k, n, s.t));
  }
}

}  // namespace

int main() {
  demo_ergodic();
  std::printf("\n");
  demo_null();
  return 0;
}
