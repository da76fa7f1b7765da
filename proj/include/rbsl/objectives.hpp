#pragma once

// Training objectives for the goal policy, the cost critic and the recovery policy.
// Each objective returns its loss together with the gradient for the single network
// it trains; every other network is treated as frozen.

#include <algorithm>
#include <cmath>
#include <vector>

#include "rbsl/dataset.hpp"
#include "rbsl/features.hpp"

namespace rbsl {

/// Q values and dQ/d(action) for every column of `actions`.
struct ActionGradient {
  Vector q;
  Matrix d_action;
};

inline Vector evaluate_q(const Network& q, const Matrix& state_goal, const Matrix& actions) {
  return q.forward(critic_input(state_goal, actions)).row(0).transpose();
}

inline ActionGradient q_action_gradient(const Network& q, const Matrix& state_goal, const Matrix& actions) {
  Network::Tape tape;
  const Matrix out = q.forward(critic_input(state_goal, actions), tape);
  const Matrix d_in = q.backward(tape, Matrix::Ones(1, out.cols()), nullptr);
  return {out.row(0).transpose(), d_in.bottomRows(actions.rows())};
}

/// MSE regression of Q(s, a, g) onto fixed targets.
inline GradResult<double> critic_regression(const Network& q, const Matrix& state_goal, const Matrix& actions,
                                            const Vector& targets, std::int64_t batch_index = 0) {
  return grad(
      q, critic_input(state_goal, actions),
      [&](const Matrix& out) { return mean_squared_error<double>(out, targets.transpose()); }, batch_index);
}

// ---- goal policy -----------------------------------------------------------------

/// y = r + gamma (1 - r) Q_target(s', pi(s', g'), g'); success is absorbing.
inline Vector goal_td_targets(const Network& q_target, const Network& policy, const FeatureBatch& b, double gamma) {
  const Matrix next_actions = policy.forward(b.next_state_goal);
  const Vector q_next = evaluate_q(q_target, b.next_state_goal, next_actions);
  return b.rewards.array() + gamma * (1.0 - b.rewards.array()) * q_next.array();
}

/// A = r + gamma (1 - r) Q(s', pi(s', g'), g') - Q(s, pi(s, g'), g')
inline Vector advantages(const Network& q, const Network& policy, const FeatureBatch& b, double gamma) {
  const Vector bootstrap = goal_td_targets(q, policy, b, gamma);
  const Vector baseline = evaluate_q(q, b.state_goal, policy.forward(b.state_goal));
  return bootstrap - baseline;
}

/// Linear-interpolation percentile (numpy's default), k in [0,100].
inline double percentile(std::vector<double> xs, double k) {
  if (xs.empty()) throw ShapeError("percentile of an empty batch");
  std::sort(xs.begin(), xs.end());
  const double pos = k / 100.0 * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

struct WeightConfig {
  double gamma = kDefaultGamma;
  double adv_clip = 10.0;       ///< M
  double eps_weight = 0.05;     ///< epsilon_w
  double percentile_k = 80.0;   ///< K
};

struct AdvantageBatch {
  Vector advantages;
  Vector weights;
  double threshold = 0.0;  ///< K-th percentile of the advantages
};

/// w = gamma^gap * min(exp(A), M) * (A > A_hat ? 1 : eps_w)
inline double wgcsl_weight(double advantage, int gap, double threshold, const WeightConfig& cfg) {
  const double discount = std::pow(cfg.gamma, gap);
  const double clipped = std::min(std::exp(advantage), cfg.adv_clip);
  const double indicator = advantage > threshold ? 1.0 : cfg.eps_weight;
  return discount * clipped * indicator;
}

inline AdvantageBatch wgcsl_weights(const Vector& adv, const Vector& gaps, const WeightConfig& cfg) {
  if (adv.size() == 0) throw ShapeError("wgcsl_weights: empty batch");
  if (gaps.size() != adv.size()) throw ShapeError("wgcsl_weights: gaps and advantages differ in length");
  AdvantageBatch out;
  out.advantages = adv;
  out.threshold = percentile(std::vector<double>(adv.data(), adv.data() + adv.size()), cfg.percentile_k);
  out.weights.resize(adv.size());
  for (Eigen::Index i = 0; i < adv.size(); ++i)
    out.weights(i) = wgcsl_weight(adv(i), static_cast<int>(gaps(i)), out.threshold, cfg);
  return out;
}

struct PolicyLoss {
  GradResult<double> result;
  double alpha_prime = 0.0;
  double regression = 0.0;  ///< mean w * ||pi - a||^2
  double q_term = 0.0;      ///< mean Q(s, pi(s, g'), g')
};

/// Weighted regression plus normalized Q maximization:
///   L = mean[w ||pi(s,g') - a||^2] - alpha' mean[Q(s, pi(s,g'), g')],
///   alpha' = alpha / mean|Q(s, a, g')| over dataset actions.
/// The normalizer falls back to pure regression when it drops below 1e-6.
inline PolicyLoss goal_policy_loss(const Network& policy, const Network& q, const FeatureBatch& b,
                                   const Vector& weights, double alpha, std::int64_t batch_index = 0) {
  PolicyLoss out;
  const double n = static_cast<double>(b.size());
  if (alpha > 0.0) {
    const double scale = evaluate_q(q, b.state_goal, b.actions).cwiseAbs().mean();
    out.alpha_prime = scale < 1e-6 ? 0.0 : alpha / scale;
  }
  out.result = grad(
      policy, b.state_goal,
      [&](const Matrix& actions) {
        const Matrix diff = actions - b.actions;
        const Vector sq = diff.colwise().squaredNorm().transpose();
        out.regression = weights.dot(sq) / n;
        LossAndGrad<double> l;
        l.d_output = (2.0 / n) * diff * weights.asDiagonal();
        l.value = out.regression;
        if (out.alpha_prime > 0.0) {
          const ActionGradient qa = q_action_gradient(q, b.state_goal, actions);
          out.q_term = qa.q.mean();
          l.value -= out.alpha_prime * out.q_term;
          l.d_output -= (out.alpha_prime / n) * qa.d_action;
        }
        return l;
      },
      batch_index);
  return out;
}

// ---- cost critic and recovery ----------------------------------------------------------

/// y = c' + (1 - c') gamma Q_C_target(s', pi_g(s', g), g); y = c' on terminal steps.
inline Vector cost_td_targets(const Network& qc_target, const Network& bootstrap_policy, const FeatureBatch& b,
                              double gamma) {
  const Matrix next_actions = bootstrap_policy.forward(b.next_state_goal);
  const Vector q_next = evaluate_q(qc_target, b.next_state_goal, next_actions);
  return b.costs.array() + (1.0 - b.costs.array()) * (1.0 - b.terminal.array()) * gamma * q_next.array();
}

/// y = r + gamma (1 - r) Q_r_target(s', pi_r(s', g), g)
inline Vector recovery_td_targets(const Network& qr_target, const Network& recovery_policy, const FeatureBatch& b,
                                  double gamma) {
  return goal_td_targets(qr_target, recovery_policy, b, gamma);
}

/// mean (Q_r(s,a,g) - y)^2 + beta * mean Q_r(s,a',g)^2 over one negative a' per sample.
inline GradResult<double> recovery_critic_loss(const Network& q, const FeatureBatch& b, const Vector& targets,
                                               const Matrix& negatives, double beta, std::int64_t batch_index = 0) {
  const Eigen::Index n = b.size();
  Matrix x(kCriticInputDim, 2 * n);
  x.leftCols(n) = critic_input(b.state_goal, b.actions);
  x.rightCols(n) = critic_input(b.state_goal, negatives);
  return grad(
      q, x,
      [&](const Matrix& out) {
        const double dn = static_cast<double>(n);
        const Vector td = out.leftCols(n).row(0).transpose() - targets;
        const Vector neg = out.rightCols(n).row(0).transpose();
        LossAndGrad<double> l;
        l.value = td.squaredNorm() / dn + beta * neg.squaredNorm() / dn;
        l.d_output.resize(1, 2 * n);
        l.d_output.leftCols(n) = (2.0 / dn) * td.transpose();
        l.d_output.rightCols(n) = (2.0 * beta / dn) * neg.transpose();
        return l;
      },
      batch_index);
}

/// L = -mean[Q_r(s, pi_r(s,g), g) - lambda Q_C(s, pi_r(s,g), g)]; the lambda*l term is constant.
inline GradResult<double> recovery_policy_loss(const Network& policy, const Network& q_r, const Network& q_c,
                                               const Matrix& state_goal, double lambda, std::int64_t batch_index = 0) {
  return grad(
      policy, state_goal,
      [&](const Matrix& actions) {
        const double n = static_cast<double>(actions.cols());
        const ActionGradient r = q_action_gradient(q_r, state_goal, actions);
        LossAndGrad<double> l;
        l.value = -r.q.mean();
        l.d_output = -(1.0 / n) * r.d_action;
        if (lambda != 0.0) {
          const ActionGradient c = q_action_gradient(q_c, state_goal, actions);
          l.value += lambda * c.q.mean();
          l.d_output += (lambda / n) * c.d_action;
        }
        return l;
      },
      batch_index);
}

}  // namespace rbsl
