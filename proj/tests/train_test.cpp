#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "mulab/dataset.hpp"
#include "mulab/model.hpp"
#include "mulab/train.hpp"

using namespace mulab;

namespace {

ArchDescriptor small_mlp(int classes = 3, int size = 16) {
  ArchDescriptor d;
  d.kind = Arch::MLP;
  d.in_channels = 1;
  d.image_size = size;
  d.num_classes = classes;
  return d;
}

std::vector<std::vector<float>> snapshot(const Model<float>& m) {
  std::vector<std::vector<float>> s;
  for (const auto& p : m.parameters()) s.push_back(p.tensor.vec());
  return s;
}

}  // namespace

TEST(Sgd, MatchesClosedFormWithMomentumAndDecay) {
  ArchDescriptor d = small_mlp(2, 4);
  d.hidden = {};  // single linear layer keeps the bookkeeping small
  auto m = build_model<float>(d, 5);
  const double mu = 0.5, wd = 0.1, lr = 0.2;
  SgdOptimizer<float> opt(*m, mu, wd);

  // Reference trajectory with unit gradients, tracked per coordinate.
  std::vector<std::vector<double>> theta, vel;
  for (const auto& p : m->parameters()) {
    theta.emplace_back(p.tensor.vec().begin(), p.tensor.vec().end());
    vel.emplace_back(p.tensor.size(), 0.0);
  }

  for (int step = 0; step < 3; ++step) {
    for (auto& p : m->parameters()) {
      p.tensor.zero_grad();
      auto& g = p.tensor.grad();
      std::fill(g.begin(), g.end(), 1.0f);
    }
    opt.step(lr);
    for (std::size_t pi = 0; pi < theta.size(); ++pi)
      for (std::size_t i = 0; i < theta[pi].size(); ++i) {
        // float math inside the optimizer, so replay it in float too
        float v = static_cast<float>(mu) * static_cast<float>(vel[pi][i]) +
                  (1.0f + static_cast<float>(wd) * static_cast<float>(theta[pi][i]));
        vel[pi][i] = v;
        theta[pi][i] = static_cast<float>(theta[pi][i]) - static_cast<float>(lr) * v;
      }
  }
  for (std::size_t pi = 0; pi < theta.size(); ++pi)
    for (std::size_t i = 0; i < theta[pi].size(); ++i)
      ASSERT_FLOAT_EQ(m->parameters()[pi].tensor[static_cast<std::int64_t>(i)],
                      static_cast<float>(theta[pi][i]));
}

TEST(Sgd, ZeroMaskFreezesParametersBitwise) {
  auto m = build_model<float>(small_mlp(), 9);
  auto before = snapshot(*m);
  std::vector<std::vector<float>> mask;
  for (const auto& p : m->parameters())
    mask.emplace_back(static_cast<std::size_t>(p.tensor.size()), 0.0f);
  SgdOptimizer<float> opt(*m, 0.9, 5e-4, &mask);
  for (auto& p : m->parameters()) {
    auto& g = p.tensor.grad();
    std::fill(g.begin(), g.end(), 2.0f);
  }
  opt.step(0.1);
  EXPECT_EQ(snapshot(*m), before);
}

TEST(Schedule, CosineEndpointsAndConstant) {
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.learning_rate = 0.4;
  cfg.schedule = LrSchedule::Cosine;
  EXPECT_DOUBLE_EQ(schedule_lr(cfg, 0), 0.4);
  EXPECT_NEAR(schedule_lr(cfg, 5), 0.2, 1e-12);
  EXPECT_LT(schedule_lr(cfg, 9), schedule_lr(cfg, 1));
  cfg.schedule = LrSchedule::Constant;
  for (int e : {0, 3, 9}) EXPECT_DOUBLE_EQ(schedule_lr(cfg, e), 0.4);
}

TEST(Train, ZeroEpochsLeavesParametersUntouched) {
  DatasetTriple t = generate_synthetic(3, 10, 16, 0.05, 1);
  auto m = build_model<float>(small_mlp(), 2);
  auto before = snapshot(*m);
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 3;
  TrainResult r = train(*m, t.train, cfg);
  EXPECT_TRUE(r.epoch_loss.empty());
  EXPECT_EQ(snapshot(*m), before);
}

TEST(Train, LearnsSeparableSyntheticToFullAccuracy) {
  DatasetTriple t = generate_synthetic(3, 30, 16, 0.02, 11);
  auto m = build_model<float>(small_mlp(), 12);
  TrainConfig cfg;
  cfg.epochs = 15;
  cfg.learning_rate = 0.1;
  cfg.batch_size = 32;
  cfg.seed = 13;
  TrainResult r = train(*m, t.train, cfg);
  ASSERT_EQ(r.epoch_loss.size(), 15u);
  EXPECT_LT(r.epoch_loss.back(), r.epoch_loss.front());
  EXPECT_DOUBLE_EQ(evaluate(*m, t.train), 100.0);
  EXPECT_GE(evaluate(*m, t.test), 99.0);
}

TEST(Train, SameSeedReproducesBitwise) {
  DatasetTriple t = generate_synthetic(3, 12, 16, 0.05, 21);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 16;
  cfg.seed = 22;
  cfg.augmentation.kind = AugScenario::Default;

  auto a = build_model<float>(small_mlp(), 23);
  auto b = build_model<float>(small_mlp(), 23);
  train(*a, t.train, cfg);
  train(*b, t.train, cfg);
  EXPECT_EQ(snapshot(*a), snapshot(*b));

  auto c = build_model<float>(small_mlp(), 23);
  cfg.seed = 24;  // different shuffle/augmentation stream
  train(*c, t.train, cfg);
  EXPECT_NE(snapshot(*a), snapshot(*c));
}

TEST(Train, DivergenceIsReportedWithLocation) {
  DatasetTriple t = generate_synthetic(3, 10, 16, 0.05, 31);
  auto m = build_model<float>(small_mlp(), 32);
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.learning_rate = 1e12;
  cfg.schedule = LrSchedule::Constant;
  cfg.seed = 33;
  try {
    train(*m, t.train, cfg);
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
  }
}

TEST(Train, RejectsBadInputs) {
  auto m = build_model<float>(small_mlp(), 1);
  Dataset empty;
  empty.images = Tensorf();
  TrainConfig cfg;
  EXPECT_THROW(train(*m, empty, cfg), ContractError);

  DatasetTriple t = generate_synthetic(3, 5, 16, 0.0, 2);
  t.train.labels[0] = 5;
  EXPECT_THROW(train(*m, t.train, cfg), ContractError);

  TrainConfig bad;
  bad.epochs = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = TrainConfig{};
  bad.learning_rate = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(MakeBatch, AugmentationIndependentOfBatchPosition) {
  DatasetTriple t = generate_synthetic(3, 8, 16, 0.05, 41);
  AugmentationConfig aug;
  aug.kind = AugScenario::DefaultRA;
  std::vector<int> order_a = {5, 2, 9, 0}, order_b = {9};
  std::vector<int> la, lb;
  // Sample 9 is third in one batch and alone in another; its augmented
  // pixels depend only on (seed, epoch, index).
  Tensorf big = make_batch(t.train, order_a, 0, 4, aug, 7, 3, &la);
  Tensorf solo = make_batch(t.train, order_b, 0, 1, aug, 7, 3, &lb);
  const std::int64_t sz = 16 * 16;
  for (std::int64_t i = 0; i < sz; ++i) ASSERT_EQ(big[2 * sz + i], solo[i]);
  EXPECT_EQ(la[2], lb[0]);

  // Different epoch, different stream.
  Tensorf other = make_batch(t.train, order_b, 0, 1, aug, 7, 4, &lb);
  bool differs = false;
  for (std::int64_t i = 0; i < sz && !differs; ++i) differs = other[i] != solo[i];
  EXPECT_TRUE(differs);
}

TEST(Evaluate, BatchSizeInvariantAndTieBreak) {
  DatasetTriple t = generate_synthetic(3, 10, 16, 0.05, 51);
  auto m = build_model<float>(small_mlp(), 52);
  double a = evaluate(*m, t.test, 1);
  double b = evaluate(*m, t.test, 7);
  double c = evaluate(*m, t.test, 256);
  EXPECT_DOUBLE_EQ(a, b);
  EXPECT_DOUBLE_EQ(b, c);

  // All-zero parameters give constant logits; ties resolve to class 0,
  // so accuracy equals the class-0 share exactly.
  for (auto& p : m->parameters())
    std::fill(p.tensor.vec().begin(), p.tensor.vec().end(), 0.0f);
  int zeros = 0;
  for (int l : t.test.labels) zeros += l == 0;
  EXPECT_DOUBLE_EQ(evaluate(*m, t.test), 100.0 * zeros / t.test.n());

  Dataset empty;
  EXPECT_THROW(evaluate(*m, empty), ContractError);
}
