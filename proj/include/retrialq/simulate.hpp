#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "retrialq/io.hpp"
#include "retrialq/model.hpp"

namespace retrialq {

/// Monte Carlo run configuration: every path starts in `initial` and runs to
/// `horizon`; `seed` controls the whole run.
struct SimConfig {
  double horizon = 0.0;
  std::int64_t paths = 0;
  std::uint64_t seed = 0;
  QueueState initial{};
};

/// Jump distribution out of a state — the same rates the generator rows are
/// built from, expressed on states instead of indices.
[[nodiscard]] inline std::vector<std::pair<QueueState, double>> step_distribution(
    const QueueState& s, const SystemParams& p) {
  std::vector<std::pair<QueueState, double>> out;
  for (const Transition& tr : transition_rates(p, state_to_index(s))) {
    out.push_back({index_to_state(tr.target), tr.rate});
  }
  return out;
}

namespace detail {

// 53 random bits mapped to (0, 1]; safe under log.
[[nodiscard]] inline double uniform_open_closed(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
}

// 53 random bits mapped to [0, 1).
[[nodiscard]] inline double uniform_closed_open(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace detail

/// Stream seed for one path: the path_index-th output of a splitmix64 stream
/// seeded with the run seed. Decorrelates paths from each other and keeps a
/// path's stream independent of how many paths run.
[[nodiscard]] inline std::uint64_t path_seed(std::uint64_t seed, std::int64_t path_index) {
  if (path_index < 0) throw std::invalid_argument("path_seed: path index must be >= 0");
  std::uint64_t z = seed + (static_cast<std::uint64_t>(path_index) + 1) * 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Runs one continuous-time path from `initial` up to `horizon`, invoking
/// on_event(t, from, to) at every jump, and returns the state the path
/// occupies at the horizon. Waiting times come from the inverse CDF of the
/// exponential on a (0, 1] uniform and the two-way races from one more
/// uniform — all on top of mt19937_64, whose output sequence the standard
/// fully specifies, so a given (params, initial, horizon, stream_seed)
/// reproduces bit-identically on any platform.
template <class OnEvent>
inline QueueState simulate_path(const SystemParams& p, QueueState state, double horizon,
                                std::uint64_t stream_seed, OnEvent&& on_event) {
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) {
    throw std::invalid_argument("simulate_path: horizon must be finite and >= 0");
  }
  (void)state_to_index(state);  // validates the state
  std::mt19937_64 rng(stream_seed);
  double t = 0.0;
  for (;;) {
    const std::vector<Transition> moves = transition_rates(p, state_to_index(state));
    double total = 0.0;
    for (const Transition& mv : moves) total += mv.rate;
    t += -std::log(detail::uniform_open_closed(rng)) / total;
    if (t > horizon) break;
    StateIndex target = moves.front().target;
    if (moves.size() == 2 &&
        detail::uniform_closed_open(rng) * total >= moves.front().rate) {
      target = moves.back().target;
    }
    const QueueState next = index_to_state(target);
    on_event(t, state, next);
    state = next;
  }
  return state;
}

/// One observed state at one observation time: how many paths sat in `state`,
/// the empirical frequency, and its binomial standard error
/// sqrt(p(1-p)/paths).
struct EmpiricalCell {
  QueueState state{};
  std::int64_t count = 0;
  double probability = 0.0;
  double std_error = 0.0;
};

/// Empirical distribution across paths at one observation time; cells are
/// sorted by state index and only observed states appear.
struct EmpiricalSnapshot {
  double t = 0.0;
  std::int64_t paths = 0;
  std::vector<EmpiricalCell> cells;
};

/// Runs cfg.paths independent paths and tabulates the state distribution at
/// each observation time (state just after the last jump at or before the
/// time). Paths are aggregated by path index, so the result is independent
/// of execution order, and reruns with equal inputs are byte-identical.
[[nodiscard]] inline std::vector<EmpiricalSnapshot> simulate_paths(
    const SystemParams& p, const SimConfig& cfg, std::span<const double> observe_at) {
  if (!(cfg.horizon > 0.0) || !std::isfinite(cfg.horizon)) {
    throw std::invalid_argument("simulate_paths: horizon must be positive and finite");
  }
  if (cfg.paths < 1) throw std::invalid_argument("simulate_paths: need at least one path");
  if (observe_at.empty()) throw std::invalid_argument("simulate_paths: no observation times");
  for (std::size_t k = 0; k < observe_at.size(); ++k) {
    if (!(observe_at[k] >= 0.0) || observe_at[k] > cfg.horizon) {
      throw std::invalid_argument("simulate_paths: observation times must lie in [0, horizon]");
    }
    if (k > 0 && !(observe_at[k] > observe_at[k - 1])) {
      throw std::invalid_argument("simulate_paths: observation times must be strictly increasing");
    }
  }
  (void)state_to_index(cfg.initial);

  const std::size_t nt = observe_at.size();
  std::vector<std::map<StateIndex, std::int64_t>> counts(nt);
  for (std::int64_t path = 0; path < cfg.paths; ++path) {
    std::size_t k = 0;
    const QueueState last = simulate_path(
        p, cfg.initial, cfg.horizon, path_seed(cfg.seed, path),
        [&](double t, const QueueState& from, const QueueState& to) {
          (void)to;
          while (k < nt && observe_at[k] < t) {
            ++counts[k][state_to_index(from)];
            ++k;
          }
        });
    for (; k < nt; ++k) ++counts[k][state_to_index(last)];
  }

  std::vector<EmpiricalSnapshot> out(nt);
  for (std::size_t k = 0; k < nt; ++k) {
    out[k].t = observe_at[k];
    out[k].paths = cfg.paths;
    out[k].cells.reserve(counts[k].size());
    for (const auto& [index, count] : counts[k]) {
      const double prob = static_cast<double>(count) / static_cast<double>(cfg.paths);
      out[k].cells.push_back({index_to_state(index), count, prob,
                              std::sqrt(prob * (1.0 - prob) / static_cast<double>(cfg.paths))});
    }
  }
  return out;
}

/// CSV serialization: header "t,server,orbit,count,probability,stderr", one
/// row per (time, observed state), round-trip-exact numbers.
[[nodiscard]] inline std::string empirical_to_csv(std::span<const EmpiricalSnapshot> snaps) {
  if (snaps.empty()) throw std::invalid_argument("empirical_to_csv: nothing to serialize");
  std::string out = "t,server,orbit,count,probability,stderr\n";
  for (const EmpiricalSnapshot& s : snaps) {
    for (const EmpiricalCell& c : s.cells) {
      out += format_number(s.t);
      out += ",";
      out += std::to_string(c.state.server);
      out += ",";
      out += std::to_string(c.state.orbit);
      out += ",";
      out += std::to_string(c.count);
      out += ",";
      out += format_number(c.probability);
      out += ",";
      out += format_number(c.std_error);
      out += "\n";
    }
  }
  return out;
}

}  // namespace retrialq
