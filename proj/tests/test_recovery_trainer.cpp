#include <gtest/gtest.h>

#include <cmath>

#include "rbsl/recovery_trainer.hpp"
#include "rbsl/rollout.hpp"

using namespace rbsl;

namespace {

Network constant_net(int in, Vector value, Activation act = Activation::Identity) {
  const Eigen::Index out = value.size();
  return Network({Layer<double>{Matrix::Zero(out, in), std::move(value), act}});
}

Network constant_policy(double ax, double ay) {
  return constant_net(kPolicyInputDim, Vector{{std::atanh(ax), std::atanh(ay)}}, Activation::Tanh);
}

Network constant_critic(double q) { return constant_net(kCriticInputDim, Vector::Constant(1, q)); }

// Q(s, a) = first action component.
Network action_x_critic() {
  Matrix w = Matrix::Zero(1, kCriticInputDim);
  w(0, kPolicyInputDim) = 1.0;
  return Network({Layer<double>{w, Vector::Zero(1), Activation::Identity}});
}

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
    b.rewards(i) = u(rng) > 0.5 ? 1.0 : 0.0;
    b.costs(i) = u(rng) > 0.5 ? 1.0 : 0.0;
    b.terminal(i) = 0.0;
    b.gaps(i) = 1.0;
  }
  return b;
}

double cosine(const Vector& a, const Vector& b) { return a.dot(b) / (a.norm() * b.norm()); }

Dataset recovery_dataset() {
  EnvConfig cfg;
  Dataset d;
  d.env = cfg;
  d.trajectories = rollout_expert(cfg, 20, 0.01, 9, 0.0);
  return filter_recovery(filter_expert(d));
}

RecoveryTrainConfig tiny_config() {
  RecoveryTrainConfig cfg;
  cfg.hidden = {16, 16};
  cfg.batch_size = 32;
  cfg.epochs = 2;
  cfg.steps_per_epoch = 5;
  cfg.seed = 3;
  return cfg;
}

Network tiny_goal_policy() {
  Rng rng = make_rng(77);
  return make_policy({16, 16}, rng);
}

}  // namespace

TEST(CostTargets, ViolationIsAbsorbing) {
  Rng rng = make_rng(1);
  FeatureBatch b = random_batch(16, rng);
  b.costs.setOnes();
  const Vector y = cost_td_targets(constant_critic(0.3), constant_policy(0.1, 0.1), b, 0.98);
  for (Eigen::Index i = 0; i < y.size(); ++i) EXPECT_EQ(y(i), 1.0);
}

TEST(CostTargets, HandValue) {
  Rng rng = make_rng(2);
  FeatureBatch b = random_batch(4, rng);
  b.costs.setZero();
  const Vector y = cost_td_targets(constant_critic(0.5), constant_policy(0.0, 0.0), b, 0.9);
  for (Eigen::Index i = 0; i < y.size(); ++i) EXPECT_NEAR(y(i), 0.45, 1e-15);
}

TEST(CostTargets, TerminalStepsDoNotBootstrap) {
  Rng rng = make_rng(3);
  FeatureBatch b = random_batch(8, rng);
  b.terminal.setOnes();
  const Vector y = cost_td_targets(constant_critic(0.5), constant_policy(0.0, 0.0), b, 0.9);
  for (Eigen::Index i = 0; i < y.size(); ++i) EXPECT_EQ(y(i), b.costs(i));
}

TEST(CostCritic, ChainMatchesDynamicProgramming) {
  // States 0..4 on a line, state 2 unsafe. Actions: right (+0.9) or left (-0.9), clamped
  // at the ends. Cost is paid on entering state 2. Bootstrap policy: always right.
  const double gamma = 0.9;
  auto next = [](int s, int a) { return std::clamp(s + (a == 0 ? 1 : -1), 0, 4); };
  auto cost = [](int s) { return s == 2 ? 1.0 : 0.0; };
  double q[5][2] = {};
  for (int it = 0; it < 200; ++it) {
    double n[5][2];
    for (int s = 0; s < 5; ++s)
      for (int a = 0; a < 2; ++a) {
        const int sp = next(s, a);
        n[s][a] = cost(sp) + (1.0 - cost(sp)) * gamma * q[sp][0];
      }
    std::copy(&n[0][0], &n[0][0] + 10, &q[0][0]);
  }
  EXPECT_NEAR(q[1][0], 1.0, 1e-15);
  EXPECT_NEAR(q[0][0], gamma, 1e-15);
  EXPECT_NEAR(q[0][1], gamma * gamma, 1e-15);
  EXPECT_EQ(q[2][0], 0.0);

  FeatureBatch b;
  b.resize(kPolicyInputDim, 10);
  b.state_goal.setZero();
  b.next_state_goal.setZero();
  for (int s = 0; s < 5; ++s)
    for (int a = 0; a < 2; ++a) {
      const int i = 2 * s + a;
      const int sp = next(s, a);
      b.state_goal(s, i) = 1.0;
      b.next_state_goal(sp, i) = 1.0;
      b.actions.col(i) = Vec2(a == 0 ? 0.9 : -0.9, 0.0);
      b.costs(i) = cost(sp);
      b.rewards(i) = 0.0;
      b.terminal(i) = 0.0;
      b.gaps(i) = 1.0;
    }
  const Network right = constant_policy(0.9, 0.0);
  Rng rng = make_rng(4);
  Network qc = make_critic({64, 64}, rng);
  AdamState<double> opt(qc, AdamConfig{});
  TargetTracker<double> target(qc, 0.9);
  for (int i = 0; i < 6000; ++i) {
    q_c_update(qc, opt, target.shadow, right, b, gamma, i);
    polyak_update(target, qc);
  }
  const Vector fitted = evaluate_q(qc, b.state_goal, b.actions);
  for (int s = 0; s < 5; ++s)
    for (int a = 0; a < 2; ++a) EXPECT_NEAR(fitted(2 * s + a), q[s][a], 1e-3) << "state " << s << " action " << a;
}

TEST(Negatives, SoftmaxHandValue) {
  const std::vector<double> p = softmax({0.0, 1.0}, 1.0);
  EXPECT_NEAR(p[0], 0.268941, 1e-6);
  EXPECT_NEAR(p[1], 0.731059, 1e-6);
  const std::vector<double> big = softmax({1000.0, 1001.0}, 1.0);
  EXPECT_NEAR(big[1], 0.731059, 1e-6);
  const std::vector<double> sharp = softmax({0.0, 1.0}, 0.01);
  EXPECT_EQ(sharp[1], 1.0);
  EXPECT_LT(sharp[0], 1e-40);
}

TEST(Negatives, RespectExclusionRadius) {
  Rng rng = make_rng(5);
  Rng init = make_rng(6);
  const Network q = make_critic({8}, init);
  const FeatureBatch b = random_batch(1000, rng);
  const NegativeSamplingConfig cfg{10, 1.0, 0.2, 10};
  const NegativeActionBatch neg = sample_negative_actions(q, b.state_goal, b.actions, cfg, rng);
  for (Eigen::Index i = 0; i < 1000; ++i) {
    ASSERT_FALSE(neg.survivors[i].empty());
    EXPECT_GT((neg.chosen.col(i) - b.actions.col(i)).norm(), 0.2);
    EXPECT_LE(neg.chosen.col(i).cwiseAbs().maxCoeff(), 1.0);
    double total = 0.0;
    for (double p : neg.probabilities[i]) total += p;
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Negatives, CoveringRadiusFallsBackToFarthest) {
  Rng rng = make_rng(7);
  const FeatureBatch b = random_batch(20, rng);
  const NegativeSamplingConfig cfg{4, 1.0, 10.0, 2};
  const NegativeActionBatch neg = sample_negative_actions(constant_critic(0.0), b.state_goal, b.actions, cfg, rng);
  for (Eigen::Index i = 0; i < 20; ++i) {
    EXPECT_TRUE(neg.survivors[i].empty());
    for (int k = 0; k < 4; ++k)
      EXPECT_GE((neg.chosen.col(i) - b.actions.col(i)).norm() + 1e-15,
                (neg.candidates.col(i * 4 + k) - b.actions.col(i)).norm());
  }
}

TEST(Negatives, LowTemperaturePicksHighestQ) {
  Rng rng = make_rng(8);
  const FeatureBatch b = random_batch(200, rng);
  const NegativeSamplingConfig cfg{10, 1e-6, 0.2, 10};
  const NegativeActionBatch neg = sample_negative_actions(action_x_critic(), b.state_goal, b.actions, cfg, rng);
  for (Eigen::Index i = 0; i < 200; ++i) {
    double best = -2.0;
    for (int k : neg.survivors[i]) best = std::max(best, neg.candidates(0, i * 10 + k));
    EXPECT_EQ(neg.chosen(0, i), best);
  }
}

TEST(RecoveryCritic, ZeroBetaIsPlainTd) {
  Rng rng = make_rng(9);
  const FeatureBatch b = random_batch(16, rng);
  const Network q = make_critic({8}, rng);
  const Vector y = Vector::Random(16);
  const Matrix negatives = Matrix::Random(2, 16);
  const GradResult<double> with_neg = recovery_critic_loss(q, b, y, negatives, 0.0);
  const GradResult<double> plain = critic_regression(q, b.state_goal, b.actions, y);
  EXPECT_NEAR(with_neg.loss, plain.loss, 1e-14);
  EXPECT_LE((with_neg.grads.flatten() - plain.grads.flatten()).norm(), 1e-12);
}

TEST(RecoveryCritic, PenaltyPushesNegativesToZero) {
  Rng rng = make_rng(10);
  const FeatureBatch b = random_batch(16, rng);
  Network q = constant_critic(0.5);
  const GradResult<double> r = recovery_critic_loss(q, b, Vector::Constant(16, 0.5), Matrix::Random(2, 16), 1.0);
  // TD error is zero, so the loss is beta * 0.25 and the bias gradient is 2 * 0.5.
  EXPECT_NEAR(r.loss, 0.25, 1e-14);
  EXPECT_NEAR(r.grads.b[0](0), 1.0, 1e-14);
}

TEST(RecoveryPolicy, LargeLambdaFollowsCostCritic) {
  Rng rng = make_rng(11);
  const FeatureBatch b = random_batch(32, rng);
  const Network pi = make_policy({16}, rng);
  const Network q_r = make_critic({16}, rng);
  const Network q_c = make_critic({16}, rng);
  const GradResult<double> mixed = recovery_policy_loss(pi, q_r, q_c, b.state_goal, 1e6);
  const GradResult<double> cost_only = recovery_policy_loss(pi, constant_critic(0.0), q_c, b.state_goal, 1e6);
  EXPECT_GT(cosine(mixed.grads.flatten(), cost_only.grads.flatten()), 0.99);
}

TEST(RecoveryPolicy, ZeroLambdaIgnoresCostCritic) {
  Rng rng = make_rng(12);
  const FeatureBatch b = random_batch(32, rng);
  const Network pi = make_policy({16}, rng);
  const Network q_r = make_critic({16}, rng);
  const GradResult<double> a = recovery_policy_loss(pi, q_r, make_critic({16}, rng), b.state_goal, 0.0);
  const GradResult<double> c = recovery_policy_loss(pi, q_r, make_critic({16}, rng), b.state_goal, 0.0);
  EXPECT_EQ(a.grads.flatten(), c.grads.flatten());
}

TEST(RecoveryPolicy, GradientMatchesFiniteDifferences) {
  Rng rng = make_rng(13);
  const FeatureBatch b = random_batch(8, rng);
  Network pi = make_policy({6}, rng);
  const Network q_r = make_critic({6}, rng);
  const Network q_c = make_critic({6}, rng);
  const Vector analytic = recovery_policy_loss(pi, q_r, q_c, b.state_goal, 3.0).grads.flatten();
  const double h = 1e-5;
  double err = 0.0, norm = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double p = pi.parameter(i);
    pi.parameter(i) = p + h;
    const double up = recovery_policy_loss(pi, q_r, q_c, b.state_goal, 3.0).loss;
    pi.parameter(i) = p - h;
    const double down = recovery_policy_loss(pi, q_r, q_c, b.state_goal, 3.0).loss;
    pi.parameter(i) = p;
    const double fd = (up - down) / (2 * h);
    err += (fd - analytic(i)) * (fd - analytic(i));
    norm += fd * fd + analytic(i) * analytic(i);
  }
  EXPECT_LE(std::sqrt(err / norm), 1e-4);
}

TEST(Pid, ZeroGainsKeepLambda) {
  PidState s;
  EXPECT_EQ(update_lambda_pid(3.0, 0.9, 0.5, s, PidGains{}), 3.0);
}

TEST(Pid, IntegralStep) {
  PidState s;
  EXPECT_NEAR(update_lambda_pid(1.0, 0.7, 0.5, s, PidGains{0.0, 1.0, 0.0}), 1.2, 1e-15);
  EXPECT_NEAR(s.prev_error, 0.2, 1e-15);
}

TEST(Pid, ClampsAtZero) {
  PidState s;
  EXPECT_EQ(update_lambda_pid(0.1, 0.0, 0.5, s, PidGains{0.0, 1.0, 0.0}), 0.0);
}

TEST(Pid, ProportionalAndDerivativeTerms) {
  PidState s;
  // errors 0.2 then 0.5: de = 0.3, d2e = 0.5 - 0.4 + 0 = 0.1
  double lambda = update_lambda_pid(1.0, 0.7, 0.5, s, PidGains{1.0, 0.0, 0.0});
  EXPECT_NEAR(lambda, 1.2, 1e-15);
  lambda = update_lambda_pid(lambda, 1.0, 0.5, s, PidGains{1.0, 0.0, 2.0});
  EXPECT_NEAR(lambda, 1.2 + 0.3 + 0.2, 1e-14);
}

TEST(Training, EmptyRecoverySetWarns) {
  const RecoveryTrainResult r = train_recovery(Dataset{}, tiny_goal_policy(), tiny_config());
  EXPECT_FALSE(r.trained);
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_NE(r.warnings[0].find("empty"), std::string::npos);
  EXPECT_TRUE(r.metrics.empty());
}

TEST(Training, WarmStartCopiesGoalPolicy) {
  RecoveryTrainConfig cfg = tiny_config();
  cfg.epochs = 0;
  const Network goal = tiny_goal_policy();
  const Dataset d = recovery_dataset();
  ASSERT_FALSE(d.empty());
  EXPECT_EQ(train_recovery(d, goal, cfg).models.policy, goal);
  cfg.warm_start = false;
  EXPECT_EQ(train_recovery(d, goal, cfg).models.policy, init_recovery_models(cfg).policy);
  cfg.warm_start = true;
  cfg.hidden = {8};
  EXPECT_THROW(train_recovery(d, goal, cfg), ShapeError);
}

TEST(Training, DeterministicGivenSeed) {
  const Dataset d = recovery_dataset();
  const Network goal = tiny_goal_policy();
  const RecoveryTrainResult a = train_recovery(d, goal, tiny_config());
  const RecoveryTrainResult b = train_recovery(d, goal, tiny_config());
  EXPECT_TRUE(a.trained);
  EXPECT_EQ(a.models.policy, b.models.policy);
  EXPECT_EQ(a.models.q_c, b.models.q_c);
  EXPECT_EQ(a.models.q_r, b.models.q_r);
  ASSERT_EQ(a.metrics.size(), 2u);
  EXPECT_EQ(a.metrics[1].qc_loss, b.metrics[1].qc_loss);
  EXPECT_EQ(a.metrics[1].lambda, 10.0);
}

TEST(Training, PidMovesLambda) {
  RecoveryTrainConfig cfg = tiny_config();
  cfg.limit = 1e-6;
  cfg.pid = PidGains{0.0, 0.5, 0.0};
  const RecoveryTrainResult r = train_recovery(recovery_dataset(), tiny_goal_policy(), cfg);
  EXPECT_NE(r.metrics.back().lambda, cfg.lambda);
  for (const auto& m : r.metrics) {
    EXPECT_GE(m.fraction_batch_above_l, 0.0);
    EXPECT_LE(m.fraction_batch_above_l, 1.0);
  }
}
