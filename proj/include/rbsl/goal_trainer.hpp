#pragma once

// Goal-conditioned policy training: TD learning of Q_g on relabeled samples, advantage
// weights, and the weighted-regression + normalized-Q policy step.

#include <functional>
#include <vector>

#include "rbsl/objectives.hpp"
#include "rbsl/optim.hpp"
#include "rbsl/sampler.hpp"

namespace rbsl {

struct GoalTrainConfig {
  double gamma = kDefaultGamma;
  double adv_clip = 10.0;
  double eps_weight = 0.05;
  double percentile_k = 80.0;
  double alpha = 2.5;
  int batch_size = 256;
  int epochs = 100;
  int steps_per_epoch = 100;
  std::uint64_t seed = 0;
  double p_relabel = 0.8;
  std::vector<int> hidden{256, 256};
  AdamConfig adam;
  double polyak = 0.995;

  WeightConfig weights() const { return {gamma, adv_clip, eps_weight, percentile_k}; }

  void validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("goal.gamma must lie in (0,1)");
    if (!(adv_clip > 0.0)) throw ConfigError("goal.adv_clip must be > 0");
    if (!(eps_weight > 0.0 && eps_weight < 1.0)) throw ConfigError("goal.eps_weight must lie in (0,1)");
    if (!(percentile_k > 0.0 && percentile_k < 100.0)) throw ConfigError("goal.percentile_k must lie in (0,100)");
    if (!(alpha >= 0.0)) throw ConfigError("goal.alpha must be >= 0");
    if (batch_size < 1 || epochs < 0 || steps_per_epoch < 1) throw ConfigError("goal: invalid batch/epoch sizes");
    if (!(p_relabel >= 0.0 && p_relabel <= 1.0)) throw ConfigError("goal.p_relabel must lie in [0,1]");
    if (!(polyak >= 0.0 && polyak <= 1.0)) throw ConfigError("goal.polyak must lie in [0,1]");
    if (!(adam.lr > 0.0)) throw ConfigError("goal.adam.lr must be > 0");
  }

  bool operator==(const GoalTrainConfig&) const = default;
};

inline std::vector<int> layer_sizes(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

inline Network make_policy(const std::vector<int>& hidden, Rng& rng) {
  return Network(layer_sizes(kPolicyInputDim, hidden, kActionDim), Activation::Relu, Activation::Tanh, rng);
}

inline Network make_critic(const std::vector<int>& hidden, Rng& rng) {
  return Network(layer_sizes(kCriticInputDim, hidden, 1), Activation::Relu, Activation::Identity, rng);
}

inline void require_finite(const Network& net, std::int64_t batch_index, const char* what) {
  if (!net.all_finite()) throw NonFiniteError(batch_index, std::string(what) + " parameters");
}

struct GoalModels {
  Network policy;
  Network q;
  TargetTracker<double> q_target;
  AdamState<double> policy_opt;
  AdamState<double> q_opt;
};

inline GoalModels init_goal_models(const GoalTrainConfig& cfg) {
  Rng rng = make_rng(cfg.seed, 0x9001);
  GoalModels m;
  m.policy = make_policy(cfg.hidden, rng);
  m.q = make_critic(cfg.hidden, rng);
  m.q_target = TargetTracker<double>(m.q, cfg.polyak);
  m.policy_opt = AdamState<double>(m.policy, cfg.adam);
  m.q_opt = AdamState<double>(m.q, cfg.adam);
  return m;
}

/// One optimizer step of Q_g on the TD error; returns the pre-step loss.
inline double q_g_update(Network& q, AdamState<double>& opt, const Network& q_target, const Network& policy,
                         const FeatureBatch& b, double gamma, std::int64_t batch_index = 0) {
  const Vector y = goal_td_targets(q_target, policy, b, gamma);
  const GradResult<double> r = critic_regression(q, b.state_goal, b.actions, y, batch_index);
  adam_step(q, r.grads, opt);
  require_finite(q, batch_index, "Q_g");
  return r.loss;
}

/// One optimizer step of the goal policy; returns the pre-step loss.
inline double goal_policy_update(Network& policy, AdamState<double>& opt, const Network& q, const FeatureBatch& b,
                                 const Vector& weights, double alpha, std::int64_t batch_index = 0) {
  const PolicyLoss l = goal_policy_loss(policy, q, b, weights, alpha, batch_index);
  adam_step(policy, l.result.grads, opt);
  require_finite(policy, batch_index, "goal policy");
  return l.result.loss;
}

struct GoalStepStats {
  double q_loss = 0.0;
  double policy_loss = 0.0;
  double mean_weight = 0.0;
  double threshold = 0.0;
};

inline GoalStepStats goal_train_step(GoalModels& m, const FeatureBatch& b, const GoalTrainConfig& cfg,
                                     std::int64_t batch_index = 0) {
  GoalStepStats s;
  s.q_loss = q_g_update(m.q, m.q_opt, m.q_target.shadow, m.policy, b, cfg.gamma, batch_index);
  const AdvantageBatch w = wgcsl_weights(advantages(m.q, m.policy, b, cfg.gamma), b.gaps, cfg.weights());
  s.policy_loss = goal_policy_update(m.policy, m.policy_opt, m.q, b, w.weights, cfg.alpha, batch_index);
  s.mean_weight = w.weights.mean();
  s.threshold = w.threshold;
  polyak_update(m.q_target, m.q);
  return s;
}

struct GoalEpochMetrics {
  int epoch = 0;
  double q_loss = 0.0;
  double policy_loss = 0.0;
  double mean_weight = 0.0;
  double threshold = 0.0;  ///< mean per-batch percentile threshold
  double success_rate = std::numeric_limits<double>::quiet_NaN();
  double discounted_return = std::numeric_limits<double>::quiet_NaN();
  double cost_return = std::numeric_limits<double>::quiet_NaN();
};

struct GoalTrainResult {
  GoalModels models;
  std::vector<GoalEpochMetrics> metrics;
};

/// Called after each epoch; may fill in the evaluation columns.
using GoalEpochHook = std::function<void(const GoalModels&, GoalEpochMetrics&)>;

inline GoalTrainResult train_goal_policy(const Dataset& data, const GoalTrainConfig& cfg,
                                         const GoalEpochHook& hook = {}) {
  cfg.validate();
  if (data.empty()) throw ConfigError("train_goal_policy: empty dataset");
  GoalTrainResult out{init_goal_models(cfg), {}};
  const TransitionSampler sampler(data, RelabelOptions{cfg.p_relabel});
  Rng rng = make_rng(cfg.seed, 0x60a1);
  std::int64_t batch_index = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    GoalEpochMetrics em;
    em.epoch = epoch;
    for (int k = 0; k < cfg.steps_per_epoch; ++k, ++batch_index) {
      const FeatureBatch b = sampler.sample(cfg.batch_size, rng);
      const GoalStepStats s = goal_train_step(out.models, b, cfg, batch_index);
      em.q_loss += s.q_loss;
      em.policy_loss += s.policy_loss;
      em.mean_weight += s.mean_weight;
      em.threshold += s.threshold;
    }
    const double steps = cfg.steps_per_epoch;
    em.q_loss /= steps;
    em.policy_loss /= steps;
    em.mean_weight /= steps;
    em.threshold /= steps;
    if (hook) hook(out.models, em);
    out.metrics.push_back(em);
  }
  return out;
}

}  // namespace rbsl
