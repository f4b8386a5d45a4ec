// Command-line front end: regime classification, optimized rate certificates,
// bound verification against the truncated forward equations, transient and
// stationary solves, and Monte Carlo simulation.
//
// Exit codes: 0 success; 1 internal/IO failure; 2 usage or domain error;
// 3 operation undefined in this regime; 4 truncation/convergence failure;
// 5 a verified bound was violated beyond tolerance.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "retrialq/retrialq.hpp"

namespace rq = retrialq;
using nlohmann::json;

namespace {

struct OutputOpts {
  std::string format = "csv";
  std::string path;  // empty: stdout
};

std::string utc_timestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Writes the product to stdout or to --out; with --out, a sidecar
// <out>.manifest.json records what produced the file.
void emit(const OutputOpts& out, const std::string& data, const std::string& command,
          const json& parameters) {
  if (out.path.empty()) {
    std::cout << data;
    return;
  }
  {
    std::ofstream f(out.path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open output file: " + out.path);
    f << data;
    f.flush();
    if (!f) throw std::runtime_error("failed writing output file: " + out.path);
  }
  const json manifest = {
      {"command", command},
      {"parameters", parameters},
      {"seed", parameters.contains("seed") ? parameters.at("seed") : json(nullptr)},
      {"truncation",
       parameters.contains("truncation") ? parameters.at("truncation") : json(nullptr)},
      {"tool_version", rq::version_string},
      {"created_utc", utc_timestamp()},
  };
  std::ofstream f(out.path + ".manifest.json", std::ios::binary);
  if (!f) throw std::runtime_error("cannot open manifest file next to: " + out.path);
  f << manifest.dump(2) << "\n";
}

std::vector<double> time_grid(double t_max, double t_step) {
  if (!(t_step > 0.0) || !(t_max >= 0.0)) {
    throw std::invalid_argument("time grid: need --t-step > 0 and --t-max >= 0");
  }
  std::vector<double> ts;
  for (std::int64_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * t_step;
    if (t > t_max + 1e-9 * std::max(1.0, t_max)) break;
    ts.push_back(t);
  }
  return ts;
}

std::vector<double> unit_vector(rq::StateIndex index, rq::StateIndex size) {
  if (index < 1 || index > size) {
    throw std::invalid_argument("initial state index must lie in 1..truncation");
  }
  std::vector<double> p0(static_cast<std::size_t>(size), 0.0);
  p0[static_cast<std::size_t>(index - 1)] = 1.0;
  return p0;
}

struct CommonArgs {
  double lambda = 0.0, mu = 0.0, mu0 = 0.0;
  OutputOpts out;
  [[nodiscard]] rq::SystemParams params() const { return {lambda, mu, mu0}; }
  [[nodiscard]] json base_manifest() const {
    return {{"lambda", lambda}, {"mu", mu}, {"mu0", mu0}, {"format", out.format}};
  }
};

void run_classify(const CommonArgs& c) {
  const rq::SystemParams p = c.params();
  const rq::Regime regime = rq::classify(p);
  const double retrial_side = p.mu * p.mu0;
  const double arrival_side = p.lambda * (p.lambda + p.mu0);
  std::string data;
  if (c.out.format == "json") {
    data = json{{"regime", rq::to_string(regime)},
                {"retrial_side", retrial_side},
                {"arrival_side", arrival_side}}
               .dump(2) +
           "\n";
  } else {
    data = "regime,retrial_side,arrival_side\n";
    data += std::string(rq::to_string(regime)) + "," + rq::format_number(retrial_side) + "," +
            rq::format_number(arrival_side) + "\n";
  }
  emit(c.out, data, "classify", c.base_manifest());
}

void run_rate(const CommonArgs& c) {
  const rq::SystemParams p = c.params();
  const rq::RateCertificate cert = rq::optimize_rate(p);
  std::string data;
  if (c.out.format == "json") {
    json feasible;
    if (cert.regime == rq::Regime::NullErgodic) {
      const rq::Interval bs = rq::null_b_interval(p);
      const rq::Interval as = rq::null_a_interval(p, cert.b);
      feasible = {{"b", {bs.lo, bs.hi}}, {"a_at_b", {as.lo, as.hi}}};
    } else {
      const rq::Interval xs = rq::erg_x_interval(p);
      const rq::Interval bsx = rq::erg_b_interval(p, cert.a * cert.b);
      feasible = {{"x", {xs.lo, xs.hi}}, {"b_at_x", {bsx.lo, bsx.hi}}};
    }
    data = json{{"certificate", cert}, {"feasible", feasible}}.dump(2) + "\n";
  } else {
    data = "regime,a,b,rate,margin\n";
    data += std::string(rq::to_string(cert.regime)) + "," + rq::format_number(cert.a) + "," +
            rq::format_number(cert.b) + "," + rq::format_number(cert.rate) + "," +
            rq::format_number(cert.margin) + "\n";
  }
  emit(c.out, data, "rate", c.base_manifest());
}

struct VerifyArgs {
  rq::StateIndex truncation = 400;
  double t_max = 10.0, t_step = 1.0, tol = 1e-10;
  rq::StateIndex k = 1;
  std::vector<rq::StateIndex> levels;  // --N; states whose occupancy is bounded
};

// Returns the smallest observed (bound - value) slack; the caller turns a
// slack below -1e-9 into exit code 5.
double run_verify(const CommonArgs& c, const VerifyArgs& v) {
  const rq::SystemParams p = c.params();
  const rq::RateCertificate cert = rq::optimize_rate(p);
  const std::vector<double> times = time_grid(v.t_max, v.t_step);
  double min_slack = std::numeric_limits<double>::infinity();
  std::string csv;
  json rows = json::array();

  json parameters = c.base_manifest();
  parameters["k"] = v.k;
  parameters["t_max"] = v.t_max;
  parameters["t_step"] = v.t_step;
  parameters["truncation"] = v.truncation;
  parameters["tol"] = v.tol;

  if (cert.regime == rq::Regime::ExponentiallyErgodic) {
    const rq::DistributionSnapshot pi = rq::stationary(p, v.truncation, v.tol);
    const auto m = static_cast<rq::StateIndex>(pi.probs.size());
    const std::vector<double> p0 = unit_vector(v.k, m);
    const std::vector<rq::DistributionSnapshot> snaps = rq::transient(p, p0, times, m, v.tol);
    csv = "t,observed,bound,tail_residual,slack\n";
    for (const rq::DistributionSnapshot& s : snaps) {
      const double observed = rq::l1_distance(s.probs, pi.probs);
      const rq::ErgBound bound = rq::erg_bound(p, cert, p0, pi.probs, s.t);
      const double slack = bound.value - observed;
      min_slack = std::min(min_slack, slack);
      csv += rq::format_number(s.t) + "," + rq::format_number(observed) + "," +
             rq::format_number(bound.value) + "," + rq::format_number(bound.tail_residual) +
             "," + rq::format_number(slack) + "\n";
      rows.push_back({{"t", s.t},
                      {"observed", observed},
                      {"bound", bound.value},
                      {"tail_residual", bound.tail_residual},
                      {"slack", slack}});
    }
  } else {
    std::vector<rq::StateIndex> levels = v.levels.empty()
                                             ? std::vector<rq::StateIndex>{10}
                                             : v.levels;
    for (rq::StateIndex n : levels) {
      if (n < 1 || n > v.truncation) {
        throw std::invalid_argument("verify: every --N must lie in 1..truncation");
      }
    }
    const std::vector<double> p0 = unit_vector(v.k, v.truncation);
    const std::vector<rq::DistributionSnapshot> snaps =
        rq::transient(p, p0, times, v.truncation, v.tol);
    json jlevels = json::array();
    for (rq::StateIndex n : levels) jlevels.push_back(n);
    parameters["N"] = jlevels;
    csv = "n,t,observed,bound,slack\n";
    for (rq::StateIndex n : levels) {
      for (const rq::DistributionSnapshot& s : snaps) {
        const double observed = s.probs[static_cast<std::size_t>(n - 1)];
        const double bound = rq::null_bound(p, cert, v.k, n, s.t);
        const double slack = bound - observed;
        min_slack = std::min(min_slack, slack);
        csv += std::to_string(n) + "," + rq::format_number(s.t) + "," +
               rq::format_number(observed) + "," + rq::format_number(bound) + "," +
               rq::format_number(slack) + "\n";
        rows.push_back({{"n", n},
                        {"t", s.t},
                        {"observed", observed},
                        {"bound", bound},
                        {"slack", slack}});
      }
    }
  }

  const std::string data =
      c.out.format == "json" ? rows.dump(2) + "\n" : csv;
  emit(c.out, data, "verify", parameters);
  return min_slack;
}

struct TransientArgs {
  rq::StateIndex truncation = 400;
  double t_max = 10.0, t_step = 1.0, tol = 1e-10;
  rq::StateIndex init = 1;
};

void run_transient(const CommonArgs& c, const TransientArgs& a) {
  const rq::SystemParams p = c.params();
  const std::vector<double> times = time_grid(a.t_max, a.t_step);
  const std::vector<double> p0 = unit_vector(a.init, a.truncation);
  const std::vector<rq::DistributionSnapshot> snaps =
      rq::transient(p, p0, times, a.truncation, a.tol);
  std::string data;
  if (c.out.format == "json") {
    json arr = json::array();
    for (const rq::DistributionSnapshot& s : snaps) {
      arr.push_back({{"t", s.t}, {"leak", s.leak}, {"probs", s.probs}});
    }
    data = arr.dump(2) + "\n";
  } else {
    data = rq::snapshots_to_csv(snaps);
  }
  json parameters = c.base_manifest();
  parameters["init"] = a.init;
  parameters["t_max"] = a.t_max;
  parameters["t_step"] = a.t_step;
  parameters["truncation"] = a.truncation;
  parameters["tol"] = a.tol;
  emit(c.out, data, "transient", parameters);
}

struct StationaryArgs {
  rq::StateIndex truncation = 400;
  double tol = 1e-12;
};

void run_stationary(const CommonArgs& c, const StationaryArgs& a) {
  const rq::SystemParams p = c.params();
  const rq::DistributionSnapshot snap = rq::stationary(p, a.truncation, a.tol);
  std::string data;
  if (c.out.format == "json") {
    // t is +infinity, which JSON cannot carry; make it explicit
    data = json{{"t", nullptr}, {"leak", snap.leak}, {"probs", snap.probs}}.dump(2) + "\n";
  } else {
    data = rq::snapshots_to_csv({&snap, 1});
  }
  json parameters = c.base_manifest();
  parameters["truncation"] = a.truncation;
  parameters["tol"] = a.tol;
  emit(c.out, data, "stationary", parameters);
}

struct SimulateArgs {
  double t_max = 10.0, t_step = 1.0;
  std::int64_t paths = 1000;
  std::uint64_t seed = 1;
  rq::StateIndex init = 1;
};

void run_simulate(const CommonArgs& c, const SimulateArgs& a) {
  const rq::SystemParams p = c.params();
  const std::vector<double> times = time_grid(a.t_max, a.t_step);
  const rq::SimConfig cfg{a.t_max, a.paths, a.seed, rq::index_to_state(a.init)};
  const std::vector<rq::EmpiricalSnapshot> snaps = rq::simulate_paths(p, cfg, times);
  std::string data;
  if (c.out.format == "json") {
    json arr = json::array();
    for (const rq::EmpiricalSnapshot& s : snaps) {
      json cells = json::array();
      for (const rq::EmpiricalCell& cell : s.cells) {
        cells.push_back({{"server", cell.state.server},
                         {"orbit", cell.state.orbit},
                         {"count", cell.count},
                         {"probability", cell.probability},
                         {"stderr", cell.std_error}});
      }
      arr.push_back({{"t", s.t}, {"paths", s.paths}, {"cells", cells}});
    }
    data = arr.dump(2) + "\n";
  } else {
    data = rq::empirical_to_csv(snaps);
  }
  json parameters = c.base_manifest();
  parameters["init"] = a.init;
  parameters["t_max"] = a.t_max;
  parameters["t_step"] = a.t_step;
  parameters["paths"] = a.paths;
  parameters["seed"] = a.seed;
  emit(c.out, data, "simulate", parameters);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"constant-retrial-rate queue: regime certificates, convergence bounds, "
               "forward-equation solvers and Monte Carlo simulation"};
  app.require_subcommand(1);

  CommonArgs common;
  VerifyArgs verify_args;
  TransientArgs transient_args;
  StationaryArgs stationary_args;
  SimulateArgs simulate_args;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--lambda", common.lambda, "arrival rate")->required();
    sub->add_option("--mu", common.mu, "service rate")->required();
    sub->add_option("--mu0", common.mu0, "retrial rate")->required();
    sub->add_option("--format", common.out.format, "output format (csv or json)")
        ->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--out", common.out.path,
                    "write output to this file plus a .manifest.json sidecar");
  };

  CLI::App* c_classify = app.add_subcommand("classify", "decide the ergodicity regime");
  add_common(c_classify);

  CLI::App* c_rate = app.add_subcommand("rate", "optimize a convergence-rate certificate");
  add_common(c_rate);

  CLI::App* c_verify = app.add_subcommand(
      "verify", "check the certified bounds against the truncated forward equations");
  add_common(c_verify);
  c_verify->add_option("--truncation", verify_args.truncation, "truncation level");
  c_verify->add_option("--t-max", verify_args.t_max, "last grid time");
  c_verify->add_option("--t-step", verify_args.t_step, "grid spacing");
  c_verify->add_option("--tol", verify_args.tol, "integration tolerance");
  c_verify->add_option("--k", verify_args.k, "initial state index");
  c_verify->add_option("--N", verify_args.levels,
                       "state indices whose occupancy is bounded (null regime; repeatable)");

  CLI::App* c_transient = app.add_subcommand("transient", "integrate the forward equations");
  add_common(c_transient);
  c_transient->add_option("--truncation", transient_args.truncation, "truncation level");
  c_transient->add_option("--t-max", transient_args.t_max, "last grid time");
  c_transient->add_option("--t-step", transient_args.t_step, "grid spacing");
  c_transient->add_option("--tol", transient_args.tol, "integration tolerance");
  c_transient->add_option("--init", transient_args.init, "initial state index");

  CLI::App* c_stationary = app.add_subcommand("stationary", "solve for the stationary distribution");
  add_common(c_stationary);
  c_stationary->add_option("--truncation", stationary_args.truncation, "starting truncation level");
  c_stationary->add_option("--tol", stationary_args.tol, "balance residual tolerance");

  CLI::App* c_simulate = app.add_subcommand("simulate", "Monte Carlo paths of the queue");
  add_common(c_simulate);
  c_simulate->add_option("--t-max", simulate_args.t_max, "horizon");
  c_simulate->add_option("--t-step", simulate_args.t_step, "observation spacing");
  c_simulate->add_option("--paths", simulate_args.paths, "number of paths");
  c_simulate->add_option("--seed", simulate_args.seed, "run seed");
  c_simulate->add_option("--init", simulate_args.init, "initial state index");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (c_classify->parsed()) {
      run_classify(common);
    } else if (c_rate->parsed()) {
      run_rate(common);
    } else if (c_verify->parsed()) {
      const double min_slack = run_verify(common, verify_args);
      if (min_slack < -1e-9) {
        std::cerr << "verify: bound violated (worst slack " << rq::format_number(min_slack)
                  << ")\n";
        return 5;
      }
    } else if (c_transient->parsed()) {
      run_transient(common, transient_args);
    } else if (c_stationary->parsed()) {
      run_stationary(common, stationary_args);
    } else if (c_simulate->parsed()) {
      run_simulate(common, simulate_args);
    }
    return 0;
  } catch (const rq::RegimeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const rq::TruncationError& e) {
    std::cerr << "error: " << e.what()
              << " (suggested truncation: " << e.suggested_truncation << ")\n";
    return 4;
  } catch (const rq::ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const rq::UnreliableBoundError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
