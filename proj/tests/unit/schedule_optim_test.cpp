#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dialogkit/train/control.hpp"
#include "dialogkit/train/lora.hpp"
#include "dialogkit/train/loss.hpp"
#include "dialogkit/train/optim.hpp"
#include "dialogkit/train/schedule.hpp"

using namespace dialogkit;
using namespace dialogkit::train;

TEST(Schedule, WarmupExampleValues) {
  const auto s = LrSchedule::warmup_linear(3000);
  EXPECT_EQ(lr_at(s, 0), 0.0);
  EXPECT_EQ(lr_at(s, 500), 2e-5);
  EXPECT_DOUBLE_EQ(lr_at(s, 250), 1e-5);
  EXPECT_EQ(lr_at(s, 3000), 0.0);
}

TEST(Schedule, DynamicExampleValues) {
  const auto s = LrSchedule::dynamic(5000);
  EXPECT_EQ(lr_at(s, 0), 2e-5);
  EXPECT_EQ(lr_at(s, 1000), 5e-5);
  EXPECT_EQ(lr_at(s, 5000), 1e-6);
}

TEST(Schedule, OutOfRangeStepThrows) {
  const auto s = LrSchedule::warmup_linear(100, 1e-3, 10);
  EXPECT_THROW(lr_at(s, -1), ArgumentError);
  EXPECT_THROW(lr_at(s, 101), ArgumentError);
}

TEST(Schedule, InvalidFieldsRejected) {
  EXPECT_THROW(LrSchedule::warmup_linear(100, 1e-3, 101).validate(), ArgumentError);
  EXPECT_THROW(LrSchedule::dynamic(1000).validate(), ArgumentError);  // ramp == total
  EXPECT_THROW(LrSchedule::warmup_linear(0).validate(), ArgumentError);
  EXPECT_NO_THROW(LrSchedule::constant_rate(10, 0.0).validate());
}

TEST(Schedule, ZeroWarmupStartsAtBase) {
  const auto s = LrSchedule::warmup_linear(10, 1e-3, 0);
  EXPECT_EQ(lr_at(s, 0), 1e-3);
  EXPECT_EQ(lr_at(s, 10), 0.0);
}

TEST(Schedule, ContinuityProperty) {
  for (const auto& s : {LrSchedule::warmup_linear(3000), LrSchedule::dynamic(5000), LrSchedule::warmup_linear(777, 3e-4, 13),
                        LrSchedule::dynamic(1200, 1e-4, 1e-3, 1, 1e-5)}) {
    const double slope = s.max_slope();
    for (std::int64_t k = 0; k < s.total_steps; ++k)
      ASSERT_LE(std::abs(lr_at(s, k + 1) - lr_at(s, k)), slope * (1 + 1e-9)) << "step " << k;
  }
}

TEST(Clip, ScalesToMaxNorm) {
  Gradients g{Matrix(1, 2)};
  g[0] << 3.0, 4.0;
  const auto r = clip_gradients(g, 1.0);
  EXPECT_DOUBLE_EQ(r.global_norm, 5.0);
  EXPECT_DOUBLE_EQ(g[0](0, 0), 0.6);
  EXPECT_DOUBLE_EQ(g[0](0, 1), 0.8);
}

TEST(Clip, SmallNormUnchanged) {
  Gradients g{Matrix(1, 2)};
  g[0] << 0.3, 0.4;
  const Matrix before = g[0];
  EXPECT_FALSE(clip_gradients(g, 1.0).overflow);
  EXPECT_EQ(g[0], before);
}

TEST(Clip, NonFiniteSignalsOverflowAndLeavesGradients) {
  Gradients g{Matrix(1, 2)};
  g[0] << 1.0, std::numeric_limits<double>::infinity();
  const auto r = clip_gradients(g, 1.0);
  EXPECT_TRUE(r.overflow);
  EXPECT_EQ(g[0](0, 0), 1.0);
}

TEST(Clip, PostNormIsMinOfPreAndMaxAcrossGroups) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.05, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    Gradients g{Matrix(3, 2), Matrix(4, 1)};
    for (auto& m : g)
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng) * u(rng);
    double pre = 0;
    for (auto& m : g) pre += m.squaredNorm();
    pre = std::sqrt(pre);
    const double max_norm = u(rng);
    clip_gradients(g, max_norm);
    double post = 0;
    for (auto& m : g) post += m.squaredNorm();
    post = std::sqrt(post);
    EXPECT_LE(post, pre + 1e-12);
    EXPECT_NEAR(post, std::min(pre, max_norm), 1e-12);
  }
}

// Independent scalar evaluation of -sum q ln p.
static double scalar_lsce(double p0, double p1, int target, double eps) {
  const double q0 = (target == 0 ? 1.0 - eps : 0.0) + eps / 2.0;
  const double q1 = (target == 1 ? 1.0 - eps : 0.0) + eps / 2.0;
  return -(q0 * std::log(p0) + q1 * std::log(p1));
}

TEST(LabelSmoothing, TwoClassExample) {
  Vector p(2);
  p << 0.95, 0.05;
  const auto r = label_smoothed_ce(p, 0, 0.1);
  EXPECT_NEAR(r.loss, scalar_lsce(0.95, 0.05, 0, 0.1), 1e-15);
  EXPECT_NEAR(r.loss, 0.198515, 1e-6);
  EXPECT_NEAR(r.grad_logits[0], 0.0, 1e-15);
}

TEST(LabelSmoothing, ZeroEpsilonIsCrossEntropy) {
  Vector p(3);
  p << 0.2, 0.5, 0.3;
  EXPECT_DOUBLE_EQ(label_smoothed_ce(p, 1, 0.0).loss, -std::log(0.5));
}

TEST(LabelSmoothing, ZeroProbabilityFlagsInfinity) {
  Vector p(2);
  p << 1.0, 0.0;
  const auto r = label_smoothed_ce(p, 0, 0.1);
  EXPECT_TRUE(r.infinite);
  EXPECT_TRUE(std::isinf(r.loss));
}

TEST(LabelSmoothing, MinimizedAtSmoothedTarget) {
  const int k = 6;
  const double eps = 0.1;
  const Vector q = smoothed_target(k, 2, eps);
  const double at_q = label_smoothed_ce(q, 2, eps).loss;
  double entropy = 0;
  for (int i = 0; i < k; ++i) entropy -= q[i] * std::log(q[i]);
  EXPECT_NEAR(at_q, entropy, 1e-14);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int d = 0; d < 100; ++d) {
    Vector dir(k);
    for (int i = 0; i < k; ++i) dir[i] = n(rng);
    dir.array() -= dir.mean();  // stay on the simplex
    dir /= dir.norm();
    for (double t : {1e-3, 1e-2}) {
      const Vector p = q + t * dir;
      if ((p.array() <= 0).any()) continue;
      EXPECT_GT(label_smoothed_ce(p, 2, eps).loss, at_q) << "direction " << d;
    }
  }
}

TEST(LabelSmoothing, SoftmaxSumsToOne) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 20.0);
  for (int t = 0; t < 200; ++t) {
    Vector z(9);
    for (int i = 0; i < 9; ++i) z[i] = n(rng);
    EXPECT_NEAR(softmax(z).sum(), 1.0, 1e-9);
  }
}

TEST(Adam, FirstStepIsLearningRateTimesSign) {
  Parameters p{{"w", "g", false, Matrix::Zero(1, 1)}};
  Gradients g{Matrix::Constant(1, 1, 0.5)};
  AdamState s;
  adam_step(s, p, g, 0.1, 0.0);
  // m_hat = 0.5, v_hat = 0.25 -> delta = 0.1 * 0.5 / (0.5 + 1e-8)
  EXPECT_NEAR(p[0].value(0, 0), -0.1 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_NEAR(p[0].value(0, 0), -0.1, 1e-6);
  EXPECT_EQ(s.t[0], 1);
}

TEST(Adam, ZeroGradientNoDecayLeavesParameters) {
  Parameters p{{"w", "g", false, Matrix::Constant(2, 2, 1.5)}};
  Gradients g{Matrix::Zero(2, 2)};
  AdamState s;
  for (int i = 0; i < 5; ++i) adam_step(s, p, g, 0.1, 0.0);
  EXPECT_EQ(p[0].value, Matrix::Constant(2, 2, 1.5));
}

TEST(Adam, FrozenGroupUntouchedAndDecaySkipsBias) {
  Parameters p{{"w", "input", false, Matrix::Constant(2, 1, 1.0)},
               {"v", "output", false, Matrix::Constant(2, 1, 1.0)},
               {"b", "output", true, Matrix::Constant(2, 1, 1.0)}};
  Gradients g{Matrix::Constant(2, 1, 0.3), Matrix::Zero(2, 1), Matrix::Zero(2, 1)};
  AdamState s;
  adam_step(s, p, g, 0.1, 0.5, {"input"});
  EXPECT_EQ(p[0].value, Matrix::Constant(2, 1, 1.0));
  EXPECT_DOUBLE_EQ(p[1].value(0, 0), 1.0 * (1 - 0.1 * 0.5));
  EXPECT_EQ(p[2].value, Matrix::Constant(2, 1, 1.0));
  EXPECT_EQ(s.t[0], 0);
}

TEST(Adam, ShapeMismatchThrows) {
  Parameters p{{"w", "g", false, Matrix::Zero(2, 2)}};
  Gradients g{Matrix::Zero(2, 1)};
  AdamState s;
  EXPECT_THROW(adam_step(s, p, g, 0.1, 0.0), ArgumentError);
}

TEST(Accumulate, IdenticalAndAlternatingSets) {
  Gradients g{Matrix::Constant(2, 3, 0.7)};
  Gradients neg{-g[0]};
  EXPECT_TRUE(accumulate({g, g, g, g}, 4)[0].isApprox(g[0], 1e-15));
  EXPECT_EQ(accumulate({g, neg, g, neg}, 4)[0], Matrix::Zero(2, 3));
  EXPECT_THROW(accumulate({g, g, g}, 4), ArgumentError);
}

static Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

TEST(Lora, FreshAdapterIsExactNoOp) {
  std::mt19937_64 rng(1);
  const Matrix w = random_matrix(6, 5, rng);
  const auto ad = LoraAdapter::init(6, 5, 8, 32.0, 9);
  EXPECT_EQ(ad.b, Matrix::Zero(6, 8));
  for (int t = 0; t < 20; ++t) {
    const Vector x = random_matrix(5, 1, rng);
    EXPECT_LE((lora_forward(w, ad, x) - w * x).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Lora, MatchesDenseMaterialization) {
  std::mt19937_64 rng(2);
  LoraAdapter ad;
  ad.rank = 2;
  ad.alpha = 32.0;
  ad.a = random_matrix(2, 4, rng);
  ad.b = random_matrix(4, 2, rng);
  const Matrix w = random_matrix(4, 4, rng);
  const Vector x = random_matrix(4, 1, rng);
  Matrix dense = w;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 2; ++k) dense(i, j) += 16.0 * ad.b(i, k) * ad.a(k, j);
  EXPECT_LE((lora_forward(w, ad, x) - dense * x).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Lora, FullRankIdentity) {
  std::mt19937_64 rng(4);
  LoraAdapter ad;
  ad.rank = 3;
  ad.alpha = 3.0;
  ad.a = Matrix::Identity(3, 3);
  ad.b = random_matrix(3, 3, rng);  // B A = delta
  const Matrix w = random_matrix(3, 3, rng);
  const Vector x = random_matrix(3, 1, rng);
  EXPECT_LE((lora_forward(w, ad, x) - (w + ad.b) * x).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Lora, MergeMatchesForwardAndGuardsDoubleMerge) {
  std::mt19937_64 rng(8);
  LoraAdapter ad = LoraAdapter::init(7, 5, 8, 32.0, 3);
  ad.b = random_matrix(7, 8, rng);
  const Matrix w = random_matrix(7, 5, rng);
  const Matrix merged = merge_lora(w, ad);
  for (int t = 0; t < 100; ++t) {
    const Vector x = random_matrix(5, 1, rng);
    EXPECT_LT((merged * x - lora_forward(w, ad, x)).cwiseAbs().maxCoeff(), 1e-9);
  }
  EXPECT_THROW(merge_lora(w, ad), ArgumentError);
}

TEST(Lora, ShapeMismatchThrows) {
  const auto ad = LoraAdapter::init(4, 3, 2, 4.0, 1);
  EXPECT_THROW(lora_forward(Matrix::Zero(4, 4), ad, Vector::Zero(4)), ArgumentError);
}

TEST(EarlyStopping, CraftedTraceStopsAfterThirdNonImprovement) {
  EarlyStopping es(3);
  const double seq[] = {5.0, 4.0, 4.1, 4.2, 4.3};
  std::vector<bool> stops;
  StopDecision d;
  for (int i = 0; i < 5; ++i) stops.push_back((d = es.update(seq[i], i)).stop);
  EXPECT_EQ(stops, (std::vector<bool>{false, false, false, false, true}));
  EXPECT_EQ(d.best_metric, 4.0);
  EXPECT_EQ(d.best_step, 1);
}

TEST(EarlyStopping, StrictlyDecreasingNeverStopsAndEqualIsNotImprovement) {
  EarlyStopping es(1);
  for (int i = 0; i < 50; ++i) EXPECT_FALSE(es.update(100.0 - i, i).stop);
  EarlyStopping eq(2);
  eq.update(3.0, 0);
  EXPECT_FALSE(eq.update(3.0, 1).stop);
  EXPECT_TRUE(eq.update(3.0, 2).stop);
  EXPECT_THROW(eq.update(std::nan(""), 3), ArgumentError);
}

TEST(LossScaler, HalvesAndDoubles) {
  LossScaler s;
  EXPECT_TRUE(s.update(true));
  EXPECT_EQ(s.scale, 16384.0);
  for (int i = 0; i < 1999; ++i) EXPECT_FALSE(s.update(false));
  EXPECT_EQ(s.scale, 16384.0);
  s.update(false);
  EXPECT_EQ(s.scale, 32768.0);
}

TEST(LossScaler, AlternatingOverflowDecaysMonotonically) {
  LossScaler s;
  double prev = s.scale;
  for (int c = 0; c < 10; ++c) {
    s.update(true);
    s.update(false);
    EXPECT_LT(s.scale, prev);
    prev = s.scale;
  }
  EXPECT_EQ(s.scale, 32768.0 / 1024.0);
}

TEST(UnfreezePlan, StagedDefaultAndValidation) {
  const auto p = UnfreezePlan::staged(3);
  ASSERT_EQ(p.stages().size(), 2u);
  EXPECT_EQ(p.stages()[0].epochs, 2);
  EXPECT_EQ(p.stages()[0].trainable, (GroupSet{"output"}));
  EXPECT_EQ(p.frozen_at(1, {"input", "output"}), (GroupSet{"input"}));
  EXPECT_TRUE(p.frozen_at(2, {"input", "output"}).empty());
  EXPECT_THROW(p.trainable_at(3), ArgumentError);
  EXPECT_THROW(UnfreezePlan({{1, {"input", "output"}}, {1, {"output"}}}), ArgumentError);
  EXPECT_THROW(UnfreezePlan({{0, {"output"}}}), ArgumentError);
}
