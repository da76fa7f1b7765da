#pragma once

#include <numeric>
#include <string>
#include <vector>

#include "rbsl/env.hpp"

namespace rbsl {

/// Discount used for R(tau), C(tau) and every trainer unless overridden.
inline constexpr double kDefaultGamma = 0.98;

enum class Provenance { Expert, Random };

inline std::string to_string(Provenance p) { return p == Provenance::Expert ? "expert" : "random"; }

struct Transition {
  Observation state;
  Action action;
  int reward = 0;
  int cost = 0;
  Observation next_state;
};

/// One fixed-horizon episode. states holds s_0..s_T; actions/rewards/costs hold steps 0..T-1,
/// where reward and cost at step t are evaluated on s_{t+1}.
struct Trajectory {
  std::vector<Observation> states;
  std::vector<Action> actions;
  std::vector<int> rewards;
  std::vector<int> costs;
  Goal goal;
  ObstacleBox obstacle;
  Provenance provenance = Provenance::Random;

  int length() const { return static_cast<int>(actions.size()); }

  Transition transition(int t) const {
    return {states[t], actions[t], rewards[t], costs[t], states[t + 1]};
  }

  double discounted_return(double gamma = kDefaultGamma) const {
    return discounted_sum(std::span<const int>(rewards), gamma);
  }
  double discounted_cost(double gamma = kDefaultGamma) const {
    return discounted_sum(std::span<const int>(costs), gamma);
  }
  int cost_return() const { return std::accumulate(costs.begin(), costs.end(), 0); }

  /// Final-step reward, the success criterion.
  bool succeeded() const { return !rewards.empty() && rewards.back() == 1; }

  bool operator==(const Trajectory&) const = default;
};

struct Dataset {
  EnvConfig env;
  std::vector<Trajectory> trajectories;

  std::size_t size() const { return trajectories.size(); }
  bool empty() const { return trajectories.empty(); }
  std::size_t transition_count() const {
    std::size_t n = 0;
    for (const auto& t : trajectories) n += static_cast<std::size_t>(t.length());
    return n;
  }

  bool operator==(const Dataset&) const = default;
};

struct DatasetStats {
  std::size_t trajectories = 0;
  std::size_t transitions = 0;
  double mean_return = 0.0;       ///< mean discounted R(tau)
  double mean_cost_return = 0.0;  ///< mean discounted C(tau)
  double expert_fraction = 0.0;
  double success_rate = 0.0;      ///< fraction with final-step reward 1
  std::vector<std::string> warnings;
};

inline DatasetStats compute_stats(const Dataset& d, double gamma = kDefaultGamma) {
  DatasetStats s;
  s.trajectories = d.size();
  s.transitions = d.transition_count();
  if (d.empty()) return s;
  std::size_t experts = 0;
  std::size_t successes = 0;
  for (const auto& t : d.trajectories) {
    s.mean_return += t.discounted_return(gamma);
    s.mean_cost_return += t.discounted_cost(gamma);
    experts += t.provenance == Provenance::Expert;
    successes += t.succeeded();
  }
  const double n = static_cast<double>(d.size());
  s.mean_return /= n;
  s.mean_cost_return /= n;
  s.expert_fraction = static_cast<double>(experts) / n;
  s.success_rate = static_cast<double>(successes) / n;
  return s;
}

}  // namespace rbsl
