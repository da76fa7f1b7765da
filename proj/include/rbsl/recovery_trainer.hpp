#pragma once

// Recovery training on the filtered, cost-shaped dataset: cost critic Q_C, recovery
// critic Q_r with zero-target negative actions, and the Lagrangian recovery policy.

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rbsl/goal_trainer.hpp"

namespace rbsl {

struct PidGains {
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;

  bool operator==(const PidGains&) const = default;
};

struct RecoveryTrainConfig {
  double gamma = kDefaultGamma;
  double lambda = 10.0;
  /// Q_C level the recovery policy is held below; also the PID set-point.
  double limit = 0.5;
  int negatives = 10;             ///< M_neg candidates per sample
  double temperature = 1.0;       ///< softmax temperature over Q_r
  double beta = 0.5;              ///< negative-action penalty weight
  double exclusion_radius = 0.2;  ///< in normalized action units (0.1 of the [-1,1] range)
  int batch_size = 256;
  int epochs = 100;
  int steps_per_epoch = 100;
  std::uint64_t seed = 0;
  double p_relabel = 0.8;
  std::vector<int> hidden{256, 256};
  AdamConfig adam;
  double polyak = 0.995;
  std::optional<PidGains> pid;
  bool shape_costs = true;
  /// Start pi_r from the goal policy's weights instead of a fresh initialization.
  bool warm_start = true;

  void validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("recovery.gamma must lie in (0,1)");
    if (!(lambda >= 0.0)) throw ConfigError("recovery.lambda must be >= 0");
    if (!(limit > 0.0)) throw ConfigError("recovery.limit must be > 0");
    if (negatives < 1) throw ConfigError("recovery.negatives must be >= 1");
    if (!(temperature > 0.0)) throw ConfigError("recovery.temperature must be > 0");
    if (!(beta >= 0.0)) throw ConfigError("recovery.beta must be >= 0");
    if (!(exclusion_radius >= 0.0)) throw ConfigError("recovery.exclusion_radius must be >= 0");
    if (batch_size < 1 || epochs < 0 || steps_per_epoch < 1) throw ConfigError("recovery: invalid batch/epoch sizes");
    if (!(p_relabel >= 0.0 && p_relabel <= 1.0)) throw ConfigError("recovery.p_relabel must lie in [0,1]");
    if (!(polyak >= 0.0 && polyak <= 1.0)) throw ConfigError("recovery.polyak must lie in [0,1]");
    if (!(adam.lr > 0.0)) throw ConfigError("recovery.adam.lr must be > 0");
  }

  bool operator==(const RecoveryTrainConfig&) const = default;
};

// ---- negative actions -----------------------------------------------------------

struct NegativeSamplingConfig {
  int candidates = 10;
  double temperature = 1.0;
  double exclusion_radius = 0.2;
  int max_retries = 10;
};

struct NegativeActionBatch {
  Matrix candidates;  ///< 2 x (N * M); columns [i*M, (i+1)*M) belong to sample i
  std::vector<std::vector<double>> probabilities;  ///< softmax over surviving candidates
  std::vector<std::vector<int>> survivors;         ///< candidate indices that passed exclusion
  Matrix chosen;                                   ///< 2 x N
};

/// Softmax of q / temperature, shifted by the max for stability.
inline std::vector<double> softmax(const std::vector<double>& q, double temperature) {
  std::vector<double> p(q.size());
  if (q.empty()) return p;
  const double top = *std::max_element(q.begin(), q.end());
  double z = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) z += p[i] = std::exp((q[i] - top) / temperature);
  for (double& x : p) x /= z;
  return p;
}

/// For each sample: M uniform candidates in [-1,1]^2, candidates within the exclusion
/// radius of the dataset action are redrawn (up to max_retries times) or dropped, then one
/// survivor is drawn with probability proportional to exp(Q_r / temperature). If nothing
/// survives, the candidate farthest from the dataset action is used.
inline NegativeActionBatch sample_negative_actions(const Network& q_r, const Matrix& state_goal,
                                                   const Matrix& dataset_actions, const NegativeSamplingConfig& cfg,
                                                   Rng& rng) {
  const Eigen::Index n = state_goal.cols();
  const int m = cfg.candidates;
  NegativeActionBatch out;
  out.candidates.resize(kActionDim, n * m);
  out.survivors.resize(n);
  out.probabilities.resize(n);
  out.chosen.resize(kActionDim, n);
  std::uniform_real_distribution<double> box(-1.0, 1.0);

  std::vector<Eigen::Vector2d> fallback(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double farthest = -1.0;
    for (int k = 0; k < m; ++k) {
      Eigen::Vector2d c;
      for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
        c = {box(rng), box(rng)};
        const double d = (c - dataset_actions.col(i)).norm();
        if (d > farthest) {
          farthest = d;
          fallback[i] = c;
        }
        if (d > cfg.exclusion_radius) {
          out.survivors[i].push_back(k);
          break;
        }
      }
      out.candidates.col(i * m + k) = c;
    }
  }

  Matrix repeated(state_goal.rows(), n * m);
  for (Eigen::Index i = 0; i < n; ++i) repeated.middleCols(i * m, m) = state_goal.col(i).replicate(1, m);
  const Vector q = evaluate_q(q_r, repeated, out.candidates);

  for (Eigen::Index i = 0; i < n; ++i) {
    if (out.survivors[i].empty()) {
      out.chosen.col(i) = fallback[i];
      continue;
    }
    std::vector<double> qs;
    for (int k : out.survivors[i]) qs.push_back(q(i * m + k));
    out.probabilities[i] = softmax(qs, cfg.temperature);
    std::discrete_distribution<int> pick(out.probabilities[i].begin(), out.probabilities[i].end());
    out.chosen.col(i) = out.candidates.col(i * m + out.survivors[i][pick(rng)]);
  }
  return out;
}

/// Single-sample form.
inline Eigen::Vector2d sample_negative_action(const Network& q_r, const Vector& state_goal,
                                              const Eigen::Vector2d& dataset_action, const NegativeSamplingConfig& cfg,
                                              Rng& rng) {
  const NegativeActionBatch b = sample_negative_actions(q_r, Matrix(state_goal), Matrix(dataset_action), cfg, rng);
  return b.chosen.col(0);
}

// ---- updates -------------------------------------------------------------------

inline double q_c_update(Network& q_c, AdamState<double>& opt, const Network& qc_target,
                         const Network& bootstrap_policy, const FeatureBatch& b, double gamma,
                         std::int64_t batch_index = 0) {
  const Vector y = cost_td_targets(qc_target, bootstrap_policy, b, gamma);
  const GradResult<double> r = critic_regression(q_c, b.state_goal, b.actions, y, batch_index);
  adam_step(q_c, r.grads, opt);
  require_finite(q_c, batch_index, "Q_C");
  return r.loss;
}

inline double q_r_update(Network& q_r, AdamState<double>& opt, const Network& qr_target,
                         const Network& recovery_policy, const FeatureBatch& b, const Matrix& negatives, double gamma,
                         double beta, std::int64_t batch_index = 0) {
  const Vector y = recovery_td_targets(qr_target, recovery_policy, b, gamma);
  const GradResult<double> r = recovery_critic_loss(q_r, b, y, negatives, beta, batch_index);
  adam_step(q_r, r.grads, opt);
  require_finite(q_r, batch_index, "Q_r");
  return r.loss;
}

inline double recovery_policy_update(Network& policy, AdamState<double>& opt, const Network& q_r,
                                     const Network& q_c, const Matrix& state_goal, double lambda,
                                     std::int64_t batch_index = 0) {
  const GradResult<double> r = recovery_policy_loss(policy, q_r, q_c, state_goal, lambda, batch_index);
  adam_step(policy, r.grads, opt);
  require_finite(policy, batch_index, "recovery policy");
  return r.loss;
}

struct PidState {
  double prev_error = 0.0;
  double prev_prev_error = 0.0;

  bool operator==(const PidState&) const = default;
};

/// Incremental PID on e = mean Q_C - limit:
///   lambda <- max(0, lambda + kp*de + ki*e + kd*d2e)
inline double update_lambda_pid(double lambda, double mean_qc, double limit, PidState& pid, const PidGains& gains) {
  const double e = mean_qc - limit;
  const double de = e - pid.prev_error;
  const double d2e = e - 2.0 * pid.prev_error + pid.prev_prev_error;
  pid.prev_prev_error = pid.prev_error;
  pid.prev_error = e;
  return std::max(0.0, lambda + gains.kp * de + gains.ki * e + gains.kd * d2e);
}

// ---- training loop -------------------------------------------------------------

struct RecoveryModels {
  Network policy;
  Network q_r;
  Network q_c;
  TargetTracker<double> qr_target;
  TargetTracker<double> qc_target;
  AdamState<double> policy_opt;
  AdamState<double> qr_opt;
  AdamState<double> qc_opt;
  double lambda = 10.0;
  PidState pid;
};

inline RecoveryModels init_recovery_models(const RecoveryTrainConfig& cfg) {
  Rng rng = make_rng(cfg.seed, 0x9002);
  RecoveryModels m;
  m.policy = make_policy(cfg.hidden, rng);
  m.q_r = make_critic(cfg.hidden, rng);
  m.q_c = make_critic(cfg.hidden, rng);
  m.qr_target = TargetTracker<double>(m.q_r, cfg.polyak);
  m.qc_target = TargetTracker<double>(m.q_c, cfg.polyak);
  m.policy_opt = AdamState<double>(m.policy, cfg.adam);
  m.qr_opt = AdamState<double>(m.q_r, cfg.adam);
  m.qc_opt = AdamState<double>(m.q_c, cfg.adam);
  m.lambda = cfg.lambda;
  return m;
}

struct RecoveryStepStats {
  double qc_loss = 0.0;
  double qr_loss = 0.0;
  double policy_loss = 0.0;
  double mean_qc = 0.0;
  double fraction_above_limit = 0.0;
};

/// Minibatch is expected to come from the cost-shaped recovery set.
inline RecoveryStepStats recovery_train_step(RecoveryModels& m, const Network& goal_policy, const FeatureBatch& b,
                                             const RecoveryTrainConfig& cfg, Rng& rng, std::int64_t batch_index = 0) {
  RecoveryStepStats s;
  const NegativeSamplingConfig neg_cfg{cfg.negatives, cfg.temperature, cfg.exclusion_radius, 10};
  const NegativeActionBatch neg = sample_negative_actions(m.q_r, b.state_goal, b.actions, neg_cfg, rng);
  s.qr_loss = q_r_update(m.q_r, m.qr_opt, m.qr_target.shadow, m.policy, b, neg.chosen, cfg.gamma, cfg.beta, batch_index);
  s.qc_loss = q_c_update(m.q_c, m.qc_opt, m.qc_target.shadow, goal_policy, b, cfg.gamma, batch_index);
  s.policy_loss = recovery_policy_update(m.policy, m.policy_opt, m.q_r, m.q_c, b.state_goal, m.lambda, batch_index);

  const Vector qc = evaluate_q(m.q_c, b.state_goal, m.policy.forward(b.state_goal));
  s.mean_qc = qc.mean();
  s.fraction_above_limit = (qc.array() > cfg.limit).cast<double>().mean();
  if (cfg.pid) m.lambda = update_lambda_pid(m.lambda, s.mean_qc, cfg.limit, m.pid, *cfg.pid);

  polyak_update(m.qr_target, m.q_r);
  polyak_update(m.qc_target, m.q_c);
  return s;
}

struct RecoveryEpochMetrics {
  int epoch = 0;
  double qc_loss = 0.0;
  double qr_loss = 0.0;
  double recovery_policy_loss = 0.0;
  double lambda = 0.0;
  double mean_qc = 0.0;
  double fraction_batch_above_l = 0.0;
};

struct RecoveryTrainResult {
  RecoveryModels models;
  std::vector<RecoveryEpochMetrics> metrics;
  bool trained = false;
  std::vector<std::string> warnings;
};

using RecoveryEpochHook = std::function<void(const RecoveryModels&, RecoveryEpochMetrics&)>;

/// `recovery_set` is D_rec before shaping; costs are shaped here on a copy.
inline RecoveryTrainResult train_recovery(const Dataset& recovery_set, const Network& goal_policy,
                                          const RecoveryTrainConfig& cfg, const RecoveryEpochHook& hook = {}) {
  cfg.validate();
  RecoveryTrainResult out{init_recovery_models(cfg), {}, false, {}};
  if (cfg.warm_start) {
    if (!goal_policy.same_shape(out.models.policy))
      throw ShapeError("warm start needs the goal and recovery policies to share an architecture");
    out.models.policy = goal_policy;
    out.models.policy_opt = AdamState<double>(out.models.policy, cfg.adam);
  }
  if (recovery_set.empty()) {
    out.warnings.push_back("recovery set is empty; returning the untrained recovery policy (switching should be disabled)");
    return out;
  }
  const Dataset shaped = cfg.shape_costs ? shape_costs(recovery_set) : recovery_set;
  const TransitionSampler sampler(shaped, RelabelOptions{cfg.p_relabel});
  Rng rng = make_rng(cfg.seed, 0x7ec0);
  std::int64_t batch_index = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    RecoveryEpochMetrics em;
    em.epoch = epoch;
    for (int k = 0; k < cfg.steps_per_epoch; ++k, ++batch_index) {
      const FeatureBatch b = sampler.sample(cfg.batch_size, rng);
      const RecoveryStepStats s = recovery_train_step(out.models, goal_policy, b, cfg, rng, batch_index);
      em.qc_loss += s.qc_loss;
      em.qr_loss += s.qr_loss;
      em.recovery_policy_loss += s.policy_loss;
      em.mean_qc += s.mean_qc;
      em.fraction_batch_above_l += s.fraction_above_limit;
    }
    const double steps = cfg.steps_per_epoch;
    em.qc_loss /= steps;
    em.qr_loss /= steps;
    em.recovery_policy_loss /= steps;
    em.mean_qc /= steps;
    em.fraction_batch_above_l /= steps;
    em.lambda = out.models.lambda;
    if (hook) hook(out.models, em);
    out.metrics.push_back(em);
  }
  out.trained = true;
  return out;
}

}  // namespace rbsl
