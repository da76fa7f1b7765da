#pragma once

#include <utility>
#include <vector>

#include "rbsl/features.hpp"
#include "rbsl/pipeline.hpp"

namespace rbsl {

/// Uniform minibatches over all transitions of a dataset, relabeled on the fly.
class TransitionSampler {
 public:
  TransitionSampler(const Dataset& data, RelabelOptions relabel) : data_(&data), relabel_(relabel) {
    for (std::size_t i = 0; i < data.size(); ++i)
      for (int t = 0; t < data.trajectories[i].length(); ++t) index_.emplace_back(i, t);
  }

  std::size_t transition_count() const { return index_.size(); }

  RelabeledSample draw(Rng& rng) const {
    const auto k = std::uniform_int_distribution<std::size_t>(0, index_.size() - 1)(rng);
    const auto [traj, t] = index_[k];
    return relabel_sample(data_->trajectories[traj], t, rng, relabel_);
  }

  FeatureBatch sample(int n, Rng& rng) const {
    if (index_.empty()) throw ConfigError("cannot sample from an empty dataset");
    const double action_max = data_->env.action_max;
    FeatureBatch b;
    b.resize(kPolicyInputDim, n);
    for (int i = 0; i < n; ++i) {
      const RelabeledSample s = draw(rng);
      encode_state_goal(s.state, s.relabeled_goal, b.state_goal.col(i).data());
      encode_state_goal(s.next_state, s.relabeled_goal, b.next_state_goal.col(i).data());
      b.actions.col(i) = s.action / action_max;
      b.rewards(i) = s.relabeled_reward;
      b.costs(i) = s.cost;
      b.terminal(i) = s.terminal ? 1.0 : 0.0;
      b.gaps(i) = s.horizon_gap;
    }
    return b;
  }

 private:
  const Dataset* data_;
  RelabelOptions relabel_;
  std::vector<std::pair<std::size_t, int>> index_;
};

}  // namespace rbsl
