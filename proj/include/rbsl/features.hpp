#pragma once

// Network input encoding.
//   policy input (18): [obs(10), goal(2), k(goal - phi)(2), k(center - phi)(2), k(|phi - center| - half)(2)]
//   critic input (20): [policy input(18), action / action_max (2)]
// with k = kRelativeScale, so one step of motion is O(1) in the relative features.
// Policies emit normalized actions in [-1,1]; world actions are that times action_max.

#include <cmath>
#include <vector>

#include "rbsl/env.hpp"
#include "rbsl/nn.hpp"

namespace rbsl {

inline constexpr int kPolicyInputDim = kObsDim + 8;
inline constexpr int kActionDim = 2;
inline constexpr int kCriticInputDim = kPolicyInputDim + kActionDim;
inline constexpr double kRelativeScale = 10.0;

inline void encode_state_goal(const Observation& obs, const Vec2& goal, double* out) {
  for (int i = 0; i < kObsDim; ++i) out[i] = obs[i];
  const Vec2 p = phi(obs);
  out[kObsDim + 0] = goal.x();
  out[kObsDim + 1] = goal.y();
  const double k = kRelativeScale;
  out[kObsDim + 2] = k * (goal.x() - p.x());
  out[kObsDim + 3] = k * (goal.y() - p.y());
  out[kObsDim + 4] = k * (obs[6] - p.x());
  out[kObsDim + 5] = k * (obs[7] - p.y());
  out[kObsDim + 6] = k * (std::abs(p.x() - obs[6]) - obs[8]);
  out[kObsDim + 7] = k * (std::abs(p.y() - obs[7]) - obs[9]);
}

inline Vector state_goal_features(const Observation& obs, const Vec2& goal) {
  Vector v(kPolicyInputDim);
  encode_state_goal(obs, goal, v.data());
  return v;
}

/// Stacks state-goal features (rows) over actions (rows) column by column.
inline Matrix critic_input(const Matrix& state_goal, const Matrix& actions) {
  if (state_goal.cols() != actions.cols()) throw ShapeError("critic_input: column counts differ");
  Matrix x(state_goal.rows() + actions.rows(), state_goal.cols());
  x.topRows(state_goal.rows()) = state_goal;
  x.bottomRows(actions.rows()) = actions;
  return x;
}

/// Training batch already in feature space. Columns are samples.
struct FeatureBatch {
  Matrix state_goal;       ///< features of (s_t, g)
  Matrix next_state_goal;  ///< features of (s_{t+1}, g)
  Matrix actions;          ///< normalized dataset actions
  Vector rewards;
  Vector costs;
  Vector terminal;  ///< 1 on the last step of a trajectory
  Vector gaps;      ///< relabeling horizon gap t' - t

  Eigen::Index size() const { return state_goal.cols(); }

  void resize(Eigen::Index feature_dim, Eigen::Index n) {
    state_goal.resize(feature_dim, n);
    next_state_goal.resize(feature_dim, n);
    actions.resize(kActionDim, n);
    rewards.resize(n);
    costs.resize(n);
    terminal.resize(n);
    gaps.resize(n);
  }
};

}  // namespace rbsl
