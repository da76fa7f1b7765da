#include <gtest/gtest.h>

#include <cmath>

#include "rbsl/goal_trainer.hpp"
#include "rbsl/rollout.hpp"

using namespace rbsl;

namespace {

// Network that always outputs `value` (scalar) regardless of input.
Network constant_net(int in, Vector value, Activation act = Activation::Identity) {
  const Eigen::Index out = value.size();
  return Network({Layer<double>{Matrix::Zero(out, in), std::move(value), act}});
}

Network constant_policy(double ax, double ay) {
  return constant_net(kPolicyInputDim, Vector{{std::atanh(ax), std::atanh(ay)}}, Activation::Tanh);
}

Network constant_critic(double q) { return constant_net(kCriticInputDim, Vector::Constant(1, q)); }

FeatureBatch random_batch(int n, Rng& rng) {
  FeatureBatch b;
  b.resize(kPolicyInputDim, n);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < n; ++i) {
    for (int r = 0; r < kPolicyInputDim; ++r) {
      b.state_goal(r, i) = u(rng);
      b.next_state_goal(r, i) = u(rng);
    }
    b.actions(0, i) = u(rng);
    b.actions(1, i) = u(rng);
    b.rewards(i) = u(rng) > 0.6 ? 1.0 : 0.0;
    b.costs(i) = 0.0;
    b.terminal(i) = 0.0;
    b.gaps(i) = static_cast<double>(i % 5);
  }
  return b;
}

// Five-state chain 0 -> 1 -> 2 -> 3 -> 4 where entering state 4 achieves the goal.
FeatureBatch chain_batch(double action) {
  FeatureBatch b;
  b.resize(kPolicyInputDim, 4);
  b.state_goal.setZero();
  b.next_state_goal.setZero();
  for (int s = 0; s < 4; ++s) {
    b.state_goal(s, s) = 1.0;
    b.next_state_goal(s + 1, s) = 1.0;
    b.actions.col(s) = Vec2(action, 0.0);
    b.rewards(s) = s + 1 == 4 ? 1.0 : 0.0;
    b.costs(s) = 0.0;
    b.terminal(s) = 0.0;
    b.gaps(s) = 1.0;
  }
  return b;
}

Dataset small_dataset() {
  EnvConfig cfg;
  Dataset d;
  d.env = cfg;
  d.trajectories = rollout_expert(cfg, 6, 0.01, 5);
  const auto random = rollout_random(cfg, 6, 6);
  d.trajectories.insert(d.trajectories.end(), random.begin(), random.end());
  return d;
}

GoalTrainConfig tiny_config() {
  GoalTrainConfig cfg;
  cfg.hidden = {16, 16};
  cfg.batch_size = 32;
  cfg.epochs = 2;
  cfg.steps_per_epoch = 5;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST(GoalTargets, SuccessIsAbsorbing) {
  Rng rng = make_rng(1);
  FeatureBatch b = random_batch(32, rng);
  b.rewards.setOnes();
  const Vector y = goal_td_targets(constant_critic(7.0), constant_policy(0.1, 0.2), b, 0.98);
  for (Eigen::Index i = 0; i < y.size(); ++i) EXPECT_EQ(y(i), 1.0);
}

TEST(GoalTargets, ZeroDiscountGivesRewards) {
  Rng rng = make_rng(2);
  const FeatureBatch b = random_batch(32, rng);
  Rng init = make_rng(3);
  const Network q = make_critic({8}, init);
  const Network pi = make_policy({8}, init);
  const Vector y = goal_td_targets(q, pi, b, 0.0);
  for (Eigen::Index i = 0; i < y.size(); ++i) EXPECT_EQ(y(i), b.rewards(i));
}

TEST(GoalTargets, BootstrapHandValue) {
  Rng rng = make_rng(4);
  FeatureBatch b = random_batch(4, rng);
  b.rewards.setZero();
  const Vector y = goal_td_targets(constant_critic(0.5), constant_policy(0.0, 0.0), b, 0.9);
  for (Eigen::Index i = 0; i < y.size(); ++i) EXPECT_NEAR(y(i), 0.45, 1e-15);
}

TEST(GoalCritic, ChainMatchesValueIteration) {
  const double gamma = 0.9;
  const Network pi = constant_policy(0.9, 0.0);
  const FeatureBatch b = chain_batch(0.9);
  Rng rng = make_rng(5);
  Network q = make_critic({64, 64}, rng);
  AdamConfig adam;
  AdamState<double> opt(q, adam);
  TargetTracker<double> target(q, 0.95);
  for (int i = 0; i < 4000; ++i) {
    q_g_update(q, opt, target.shadow, pi, b, gamma, i);
    polyak_update(target, q);
  }
  const Vector fitted = evaluate_q(q, b.state_goal, b.actions);
  // Value iteration: Q(s) = gamma^(3 - s) for the four non-goal states.
  for (int s = 0; s < 4; ++s) EXPECT_NEAR(fitted(s), std::pow(gamma, 3 - s), 1e-2) << "state " << s;
}

TEST(Advantages, SuccessfulTransitionsRankHigher) {
  Rng rng = make_rng(6);
  FeatureBatch b = random_batch(10, rng);
  for (int i = 0; i < 10; ++i) b.rewards(i) = i % 2;
  const Vector a = advantages(constant_critic(0.4), constant_policy(0.3, -0.3), b, 0.98);
  for (int i = 0; i < 10; ++i) {
    if (b.rewards(i) == 1.0)
      EXPECT_NEAR(a(i), 0.6, 1e-12);
    else
      EXPECT_NEAR(a(i), 0.98 * 0.4 - 0.4, 1e-12);
  }
}

TEST(Weights, HandValue) {
  WeightConfig cfg;
  cfg.gamma = 0.98;
  // 0.98^2 * exp(0.3) with the indicator on
  EXPECT_NEAR(wgcsl_weight(0.3, 2, 0.1, cfg), 1.29640, 1e-4);
}

TEST(Weights, TieUsesEpsilon) {
  WeightConfig cfg;
  cfg.gamma = 0.98;
  EXPECT_NEAR(wgcsl_weight(0.3, 2, 0.3, cfg), 0.05 * 0.9604 * std::exp(0.3), 1e-12);
}

TEST(Weights, ClipsAtM) {
  WeightConfig cfg;
  EXPECT_EQ(wgcsl_weight(5.0, 0, 0.0, cfg), 10.0);
  EXPECT_EQ(wgcsl_weight(50.0, 0, 0.0, cfg), 10.0);
}

TEST(Weights, PercentileMatchesNumpyLinear) {
  EXPECT_EQ(percentile({1, 2, 3, 4, 5}, 80.0), 4.2);
  EXPECT_EQ(percentile({3.0}, 80.0), 3.0);
  EXPECT_NEAR(percentile({0, 10}, 25.0), 2.5, 1e-15);
  EXPECT_THROW(percentile({}, 80.0), ShapeError);
}

TEST(Weights, TopFifthGetsFullWeight) {
  Rng rng = make_rng(7);
  Vector adv(100);
  for (int i = 0; i < 100; ++i) adv(i) = 0.01 * i - 0.3;
  std::shuffle(adv.data(), adv.data() + adv.size(), rng);
  const AdvantageBatch w = wgcsl_weights(adv, Vector::Zero(100), WeightConfig{});
  int full = 0;
  for (int i = 0; i < 100; ++i) full += adv(i) > w.threshold;
  EXPECT_EQ(full, 20);
  for (int i = 0; i < 100; ++i) {
    const double base = std::min(std::exp(adv(i)), 10.0);
    EXPECT_NEAR(w.weights(i), adv(i) > w.threshold ? base : 0.05 * base, 1e-12);
  }
}

TEST(PolicyLoss, NormalizedAlpha) {
  Rng rng = make_rng(8);
  const FeatureBatch b = random_batch(16, rng);
  const Network pi = make_policy({8}, rng);
  const PolicyLoss pos = goal_policy_loss(pi, constant_critic(2.0), b, Vector::Ones(16), 2.5);
  EXPECT_NEAR(pos.alpha_prime, 1.25, 1e-12);
  const PolicyLoss neg = goal_policy_loss(pi, constant_critic(-2.0), b, Vector::Ones(16), 2.5);
  EXPECT_NEAR(neg.alpha_prime, 1.25, 1e-12);
  const PolicyLoss off = goal_policy_loss(pi, constant_critic(2.0), b, Vector::Ones(16), 0.0);
  EXPECT_EQ(off.alpha_prime, 0.0);
  EXPECT_EQ(off.q_term, 0.0);
}

TEST(PolicyLoss, ZeroCriticFallsBackToRegression) {
  Rng rng = make_rng(9);
  const FeatureBatch b = random_batch(16, rng);
  const Network pi = make_policy({8}, rng);
  const PolicyLoss l = goal_policy_loss(pi, constant_critic(0.0), b, Vector::Ones(16), 2.5);
  EXPECT_EQ(l.alpha_prime, 0.0);
  EXPECT_NEAR(l.result.loss, l.regression, 1e-15);
}

TEST(PolicyLoss, QTermInvariantToCriticScale) {
  Rng rng = make_rng(10);
  const FeatureBatch b = random_batch(32, rng);
  const Network pi = make_policy({16}, rng);
  const Network q = make_critic({16}, rng);
  Network q_scaled = q;
  for (Eigen::Index i = q_scaled.parameter_count() - 17; i < q_scaled.parameter_count(); ++i)
    q_scaled.parameter(i) *= 37.0;
  const Vector zero_w = Vector::Zero(32);
  const PolicyLoss a = goal_policy_loss(pi, q, b, zero_w, 2.5);
  const PolicyLoss c = goal_policy_loss(pi, q_scaled, b, zero_w, 2.5);
  EXPECT_NEAR(a.result.loss, c.result.loss, 1e-10);
  EXPECT_LE((a.result.grads.flatten() - c.result.grads.flatten()).norm(), 1e-9 * a.result.grads.flatten().norm());
}

TEST(PolicyLoss, RegressionGradientMatchesFiniteDifferences) {
  Rng rng = make_rng(11);
  const FeatureBatch b = random_batch(8, rng);
  Network pi = make_policy({6}, rng);
  const Network q = make_critic({6}, rng);
  Vector w(8);
  for (int i = 0; i < 8; ++i) w(i) = 0.1 + 0.2 * i;
  const PolicyLoss l = goal_policy_loss(pi, q, b, w, 2.5);
  const Vector analytic = l.result.grads.flatten();
  const double h = 1e-5;
  double err = 0.0, norm = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double p = pi.parameter(i);
    pi.parameter(i) = p + h;
    const double up = goal_policy_loss(pi, q, b, w, 2.5).result.loss;
    pi.parameter(i) = p - h;
    const double down = goal_policy_loss(pi, q, b, w, 2.5).result.loss;
    pi.parameter(i) = p;
    const double fd = (up - down) / (2 * h);
    err += (fd - analytic(i)) * (fd - analytic(i));
    norm += fd * fd + analytic(i) * analytic(i);
  }
  // alpha' depends only on dataset actions, so it is constant in the policy parameters.
  EXPECT_LE(std::sqrt(err / norm), 1e-4);
}

TEST(Training, ZeroEpochsReturnsInitialNetworks) {
  GoalTrainConfig cfg = tiny_config();
  cfg.epochs = 0;
  const GoalTrainResult r = train_goal_policy(small_dataset(), cfg);
  const GoalModels init = init_goal_models(cfg);
  EXPECT_EQ(r.models.policy, init.policy);
  EXPECT_EQ(r.models.q, init.q);
  EXPECT_TRUE(r.metrics.empty());
}

TEST(Training, DeterministicGivenSeed) {
  const Dataset d = small_dataset();
  const GoalTrainResult a = train_goal_policy(d, tiny_config());
  const GoalTrainResult b = train_goal_policy(d, tiny_config());
  EXPECT_EQ(a.models.policy, b.models.policy);
  EXPECT_EQ(a.models.q, b.models.q);
  ASSERT_EQ(a.metrics.size(), 2u);
  EXPECT_EQ(a.metrics[1].q_loss, b.metrics[1].q_loss);
  GoalTrainConfig other = tiny_config();
  other.seed = 4;
  EXPECT_NE(train_goal_policy(d, other).models.policy, a.models.policy);
}

TEST(Training, HookSeesEveryEpoch) {
  std::vector<int> seen;
  const GoalTrainResult r = train_goal_policy(small_dataset(), tiny_config(), [&](const GoalModels& m, GoalEpochMetrics& em) {
    seen.push_back(em.epoch);
    EXPECT_TRUE(m.policy.all_finite());
    em.success_rate = 0.5;
  });
  EXPECT_EQ(seen, (std::vector<int>{1, 2}));
  EXPECT_EQ(r.metrics[0].success_rate, 0.5);
  EXPECT_GT(r.metrics[0].mean_weight, 0.0);
}

TEST(Training, RejectsBadInput) {
  EXPECT_THROW(train_goal_policy(Dataset{}, tiny_config()), ConfigError);
  GoalTrainConfig cfg = tiny_config();
  cfg.gamma = 1.0;
  EXPECT_THROW(train_goal_policy(small_dataset(), cfg), ConfigError);
}
