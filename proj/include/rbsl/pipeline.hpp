#pragma once

// Dataset transformations: mixing, hindsight relabeling, the two-step filter
// (successful, then cost-touching) and cost shaping for the recovery set.

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "rbsl/dataset.hpp"

namespace rbsl {

/// Expert/random mixture with exactly floor(expert_fraction * total) expert trajectories.
inline Dataset mix(const Dataset& expert, const Dataset& random, double expert_fraction, std::size_t total,
                   std::uint64_t seed) {
  if (!(expert_fraction >= 0.0 && expert_fraction <= 1.0))
    throw ConfigError("mix: expert_fraction must lie in [0,1]");
  if (!same_environment(expert.env, random.env)) throw ConfigError("mix: datasets come from different env configs");
  const auto n_expert = static_cast<std::size_t>(std::floor(expert_fraction * static_cast<double>(total) + 1e-9));
  const std::size_t n_random = total - n_expert;
  if (n_expert > expert.size() || n_random > random.size()) {
    throw ConfigError("mix: fraction " + std::to_string(expert_fraction) + " of " + std::to_string(total) +
                      " needs " + std::to_string(n_expert) + " expert and " + std::to_string(n_random) +
                      " random trajectories, have " + std::to_string(expert.size()) + " and " +
                      std::to_string(random.size()));
  }

  Rng rng = make_rng(seed, 0x313);
  auto pick = [&](const Dataset& pool, std::size_t n, std::vector<Trajectory>& out) {
    std::vector<std::size_t> idx(pool.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < n; ++i) out.push_back(pool.trajectories[idx[i]]);
  };
  Dataset out;
  out.env = expert.env;
  out.trajectories.reserve(total);
  pick(expert, n_expert, out.trajectories);
  pick(random, n_random, out.trajectories);
  std::shuffle(out.trajectories.begin(), out.trajectories.end(), rng);
  return out;
}

struct RelabeledSample {
  Observation state;
  Action action;
  Vec2 relabeled_goal;
  int relabeled_reward = 0;
  Observation next_state;
  int horizon_gap = 0;  ///< t' - t
  int cost = 0;
  bool terminal = false;  ///< last step of its trajectory
  bool relabeled = false;
};

struct RelabelOptions {
  double p_relabel = 0.8;
};

/// Hindsight relabeling of step t. Trajectories whose final state lies inside the
/// inflated box keep their original goal and reward.
inline RelabeledSample relabel_sample(const Trajectory& traj, int t, Rng& rng, const RelabelOptions& opts = {}) {
  const int horizon = traj.length();
  if (t < 0 || t >= horizon) throw ShapeError("relabel_sample: t out of range");
  RelabeledSample s;
  s.state = traj.states[t];
  s.action = traj.actions[t];
  s.next_state = traj.states[t + 1];
  s.cost = traj.costs[t];
  s.terminal = t == horizon - 1;

  const bool ends_safe = !traj.obstacle.contains(phi(traj.states[horizon]));
  if (ends_safe && uniform(rng, 0.0, 1.0) < opts.p_relabel) {
    const int future = std::uniform_int_distribution<int>(t, horizon)(rng);
    s.relabeled_goal = phi(traj.states[future]);
    s.relabeled_reward = reward_of(phi(s.next_state), s.relabeled_goal, traj.goal.tolerance);
    s.horizon_gap = future - t;
    s.relabeled = true;
  } else {
    // The original goal is treated as due at the end of the episode.
    s.relabeled_goal = traj.goal.target;
    s.relabeled_reward = traj.rewards[t];
    s.horizon_gap = horizon - t;
  }
  return s;
}

/// Keeps trajectories with discounted return R(tau) > 0.
inline Dataset filter_expert(const Dataset& d, double gamma = kDefaultGamma,
                             std::vector<std::string>* warnings = nullptr) {
  Dataset out;
  out.env = d.env;
  for (const auto& t : d.trajectories)
    if (t.discounted_return(gamma) > 0.0) out.trajectories.push_back(t);
  if (out.empty() && warnings) warnings->push_back("filter_expert: no trajectory has positive return");
  return out;
}

/// Keeps trajectories with discounted cost return C(tau) > 0.
inline Dataset filter_recovery(const Dataset& d_e, double gamma = kDefaultGamma,
                               std::vector<std::string>* warnings = nullptr) {
  Dataset out;
  out.env = d_e.env;
  for (const auto& t : d_e.trajectories)
    if (t.discounted_cost(gamma) > 0.0) out.trajectories.push_back(t);
  if (out.empty() && warnings) warnings->push_back("filter_recovery: no successful trajectory touches the obstacle");
  return out;
}

/// c'_t = 0 for the last violating step before a safe successor. The final step has no
/// successor and keeps its cost.
inline std::vector<int> shape_costs(std::span<const int> costs) {
  std::vector<int> out(costs.begin(), costs.end());
  for (std::size_t t = 0; t + 1 < costs.size(); ++t)
    if (costs[t] == 1 && costs[t + 1] == 0) out[t] = 0;
  return out;
}

inline Trajectory shape_costs(const Trajectory& traj) {
  Trajectory out = traj;
  out.costs = shape_costs(std::span<const int>(traj.costs));
  return out;
}

inline Dataset shape_costs(const Dataset& d) {
  Dataset out;
  out.env = d.env;
  out.trajectories.reserve(d.size());
  for (const auto& t : d.trajectories) out.trajectories.push_back(shape_costs(t));
  return out;
}

}  // namespace rbsl
