#pragma once

// The composed agent: the goal policy acts unless the cost critic, queried at the goal
// policy's proposed action, exceeds the switching limit, in which case the recovery
// policy acts. Plus episode evaluation and paired run comparison.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "rbsl/features.hpp"
#include "rbsl/rollout.hpp"

namespace rbsl {

enum class Decision { Goal, Recovery };

inline std::string to_string(Decision d) { return d == Decision::Goal ? "goal" : "recovery"; }

struct RbslAgent {
  Network goal_policy;
  Network recovery_policy;
  Network cost_q;
  double limit = 0.5;
  bool switching = true;
  double action_max = 0.05;
};

struct ActResult {
  Action action;  ///< world units
  Decision decision = Decision::Goal;
  double goal_cost_q = 0.0;  ///< Q_C(s, a_g, g); NaN when switching is off
};

inline ActResult act(const RbslAgent& agent, const Observation& obs, const Vec2& goal) {
  const Vector x = state_goal_features(obs, goal);
  const Vector a_goal = agent.goal_policy.forward(x);
  ActResult out;
  out.goal_cost_q = std::numeric_limits<double>::quiet_NaN();
  out.action = a_goal * agent.action_max;
  if (!agent.switching) return out;

  Vector critic_in(kCriticInputDim);
  critic_in << x, a_goal;
  out.goal_cost_q = agent.cost_q.forward(critic_in)(0);
  if (out.goal_cost_q > agent.limit) {
    out.decision = Decision::Recovery;
    out.action = agent.recovery_policy.forward(x) * agent.action_max;
  }
  return out;
}

struct EpisodeRecord {
  std::uint64_t reset_seed = 0;
  Vec2 goal;
  std::vector<Observation> observations;  ///< s_0..s_{T-1}, where each decision was taken
  std::vector<Action> actions;
  std::vector<int> rewards;
  std::vector<int> costs;
  std::vector<Decision> decisions;
  std::vector<double> goal_cost_q;
  double final_distance = 0.0;
};

struct RunMetrics {
  std::uint64_t seed = 0;
  int episodes = 0;
  double success_rate = 0.0;
  double discounted_return = 0.0;
  double cost_return = 0.0;  ///< undiscounted, mean over episodes
  double cost_return_discounted = 0.0;
  double recovery_activation_rate = 0.0;
};

struct EvaluationResult {
  RunMetrics metrics;
  std::vector<EpisodeRecord> records;
};

/// Reset seed for evaluation episode `index`; disjoint from data-collection streams.
inline std::uint64_t eval_episode_seed(std::uint64_t seed, std::uint64_t index) {
  return episode_seed(seed, index + (std::uint64_t{1} << 40));
}

/// Aggregates per-episode records into run metrics.
inline RunMetrics summarize(const std::vector<EpisodeRecord>& records, std::uint64_t seed, double gamma) {
  RunMetrics m;
  m.seed = seed;
  m.episodes = static_cast<int>(records.size());
  if (records.empty()) return m;
  std::size_t steps = 0;
  std::size_t recovery_steps = 0;
  for (const auto& r : records) {
    m.success_rate += (!r.rewards.empty() && r.rewards.back() == 1) ? 1.0 : 0.0;
    m.discounted_return += discounted_sum(std::span<const int>(r.rewards), gamma);
    m.cost_return += std::accumulate(r.costs.begin(), r.costs.end(), 0);
    m.cost_return_discounted += discounted_sum(std::span<const int>(r.costs), gamma);
    steps += r.decisions.size();
    for (Decision d : r.decisions) recovery_steps += d == Decision::Recovery;
  }
  const double n = static_cast<double>(records.size());
  m.success_rate /= n;
  m.discounted_return /= n;
  m.cost_return /= n;
  m.cost_return_discounted /= n;
  m.recovery_activation_rate = steps ? static_cast<double>(recovery_steps) / static_cast<double>(steps) : 0.0;
  return m;
}

/// Runs one fixed-horizon episode with `policy(obs, goal) -> ActResult`.
template <typename Policy>
EpisodeRecord run_episode(const Environment& env, std::uint64_t reset_seed, Policy&& policy) {
  auto [state, goal] = env.reset(reset_seed);
  EpisodeRecord rec;
  rec.reset_seed = reset_seed;
  rec.goal = goal.target;
  for (int t = 0; t < env.config().horizon; ++t) {
    const Observation obs = state.observation();
    const ActResult a = policy(obs, goal.target);
    const StepResult r = env.step(state, a.action, goal);
    rec.observations.push_back(obs);
    rec.actions.push_back(env.clip_action(a.action));
    rec.rewards.push_back(r.reward);
    rec.costs.push_back(r.cost);
    rec.decisions.push_back(a.decision);
    rec.goal_cost_q.push_back(a.goal_cost_q);
    state = r.state;
  }
  rec.final_distance = (env.phi(state) - goal.target).norm();
  return rec;
}

inline EvaluationResult evaluate(const RbslAgent& agent, const EnvConfig& env_config, int episodes,
                                 std::uint64_t seed, double gamma = kDefaultGamma) {
  if (episodes < 1) throw ConfigError("evaluate: episodes must be >= 1");
  const Environment env(env_config);
  EvaluationResult out;
  out.records.reserve(episodes);
  for (int i = 0; i < episodes; ++i) {
    out.records.push_back(run_episode(env, eval_episode_seed(seed, i),
                                      [&](const Observation& o, const Vec2& g) { return act(agent, o, g); }));
  }
  out.metrics = summarize(out.records, seed, gamma);
  return out;
}

// ---- paired comparison ---------------------------------------------------------

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  ///< sample standard deviation; 0 for a single value
};

inline MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd r;
  if (xs.empty()) return r;
  for (double x : xs) r.mean += x;
  r.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return r;
}

struct PairedRow {
  std::uint64_t seed = 0;
  double success_diff = 0.0;  ///< a - b
  double cost_diff = 0.0;     ///< a - b
};

struct ComparisonReport {
  std::vector<PairedRow> rows;
  MeanStd success_diff;
  MeanStd cost_diff;
};

inline ComparisonReport compare_runs(const std::vector<RunMetrics>& a, const std::vector<RunMetrics>& b) {
  if (a.size() != b.size()) throw ConfigError("compare_runs: runs have different seed counts");
  ComparisonReport r;
  std::vector<double> ds;
  std::vector<double> dc;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].seed != b[i].seed)
      throw ConfigError("compare_runs: seed mismatch at row " + std::to_string(i) + " (" + std::to_string(a[i].seed) +
                        " vs " + std::to_string(b[i].seed) + ")");
    PairedRow row{a[i].seed, a[i].success_rate - b[i].success_rate, a[i].cost_return - b[i].cost_return};
    ds.push_back(row.success_diff);
    dc.push_back(row.cost_diff);
    r.rows.push_back(row);
  }
  r.success_diff = mean_std(ds);
  r.cost_diff = mean_std(dc);
  return r;
}

}  // namespace rbsl
