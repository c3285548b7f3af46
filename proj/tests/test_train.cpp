#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "kcr/train.hpp"
#include "test_util.hpp"

using namespace kcr;

namespace {

std::vector<MetricsRow> history_of(const std::vector<double>& val_losses) {
  std::vector<MetricsRow> h;
  for (std::size_t i = 0; i < val_losses.size(); ++i) {
    MetricsRow r;
    r.epoch = i + 1;
    r.val_loss = val_losses[i];
    h.push_back(r);
  }
  return h;
}

// Two classes told apart by brightness of the left half, plus noise.
Dataset toy_set(std::size_t per_class, std::uint64_t seed, std::size_t side = 12) {
  Rng rng(seed);
  Dataset d;
  d.class_names = {"dark", "light"};
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < per_class; ++i) {
      Image img(Shape{side, side, 1});
      for (std::size_t y = 0; y < side; ++y)
        for (std::size_t x = 0; x < side; ++x) {
          const double base = (x < side / 2) == (c == 0) ? 60 : 190;
          img.at(y, x, 0) = static_cast<std::uint8_t>(std::clamp(base + 40 * rng.normal(), 0.0, 255.0));
        }
      d.samples.push_back(Sample{img, c, ""});
    }
  return d;
}

ModelConfig toy_config(std::size_t side = 12, double dropout = 0.0) {
  return conv_stack_config(Shape{side, side, 1}, 2, {4, 8}, 16, dropout);
}

TrainConfig quiet(std::size_t epochs) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = 4;
  cfg.augment.enabled = false;
  cfg.seed = 11;
  cfg.record_time = false;
  return cfg;
}

}  // namespace

TEST(EarlyStop, StopsAfterPatienceWithoutImprovement) {
  const auto h = history_of({1.0, 0.9, 0.91, 0.92, 0.93});
  const auto d = early_stop_check(h, 3, 0.0);
  EXPECT_TRUE(d.stop);
  EXPECT_EQ(d.best_epoch, 2u);
  EXPECT_FALSE(early_stop_check(std::span(h).first(4), 3, 0.0).stop);
}

TEST(EarlyStop, FlatLossAndMinDelta) {
  const auto flat = history_of({0.5, 0.5});
  const auto d = early_stop_check(flat, 1, 0.0);
  EXPECT_TRUE(d.stop);
  EXPECT_EQ(d.best_epoch, 1u);
  const auto creeping = history_of({1.0, 0.999, 0.998});
  EXPECT_TRUE(early_stop_check(creeping, 2, 0.01).stop);
  EXPECT_FALSE(early_stop_check(creeping, 2, 0.0).stop);
  EXPECT_THROW(early_stop_check(flat, 0, 0.0), InvalidArgument);
}

TEST(Train, OneEpochGivesOneRow) {
  auto model = SequentialModel<float>::build(toy_config(), 1);
  const auto tr = toy_set(6, 1), va = toy_set(2, 2);
  const auto result = train(model, tr, va, quiet(1));
  ASSERT_EQ(result.history.size(), 1u);
  EXPECT_EQ(result.history[0].epoch, 1u);
  EXPECT_EQ(result.history[0].seconds, 0.0);
  EXPECT_EQ(result.best_epoch, 1u);
}

TEST(Train, RejectsBadSettings) {
  auto model = SequentialModel<float>::build(toy_config(), 1);
  const auto tr = toy_set(4, 1);
  EXPECT_THROW(train(model, tr, tr, quiet(0)), InvalidArgument);
  auto cfg = quiet(1);
  cfg.batch_size = 0;
  EXPECT_THROW(train(model, tr, tr, cfg), InvalidArgument);
  EXPECT_THROW(train(model, tr, Dataset{}, quiet(1)), InvalidArgument);
  const auto wrong = toy_set(4, 1, 8);
  EXPECT_THROW(train(model, wrong, wrong, quiet(1)), ShapeError);
}

TEST(Train, OverfitsEightSamples) {
  auto model = SequentialModel<float>::build(toy_config(), 3);
  const auto tr = toy_set(4, 5);
  const auto result = train(model, tr, tr, quiet(200));
  bool reached = false;
  for (const auto& r : result.history) reached |= r.train_acc >= 0.99;
  EXPECT_TRUE(reached);
  EXPECT_LT(result.history.back().train_loss, result.history.front().train_loss);
  for (std::size_t e = 20; e < result.history.size(); ++e) {
    EXPECT_LE(result.history[e].train_loss, result.history[e - 1].train_loss + 0.05) << "epoch " << e + 1;
  }
}

TEST(Train, EqualSeedsGiveEqualWeights) {
  const auto tr = toy_set(8, 1), va = toy_set(2, 2);
  auto a = SequentialModel<float>::build(toy_config(), 7), b = SequentialModel<float>::build(toy_config(), 7);
  const auto ra = train(a, tr, va, quiet(3));
  const auto rb = train(b, tr, va, quiet(3));
  EXPECT_EQ(a.snapshot(), b.snapshot());
  EXPECT_EQ(metrics_csv(ra.history), metrics_csv(rb.history));
}

TEST(Train, DropoutAndAugmentationAreSeeded) {
  const auto tr = toy_set(8, 1), va = toy_set(2, 2);
  auto cfg = quiet(2);
  cfg.augment.enabled = true;
  auto a = SequentialModel<float>::build(toy_config(12, 0.3), 7), b = SequentialModel<float>::build(toy_config(12, 0.3), 7);
  train(a, tr, va, cfg);
  train(b, tr, va, cfg);
  EXPECT_EQ(a.snapshot(), b.snapshot());
}

TEST(Train, CheckpointHoldsBestEpoch) {
  test::TempDir dir;
  const auto tr = toy_set(8, 1), va = toy_set(3, 9);
  auto model = SequentialModel<float>::build(toy_config(), 2);
  auto cfg = quiet(6);
  cfg.checkpoint_path = dir / "best.kcr";
  cfg.adam.lr = 0.02;
  const auto result = train(model, tr, va, cfg);
  ASSERT_GE(result.best_epoch, 1u);
  double best = result.history[0].val_loss;
  for (const auto& r : result.history) best = std::min(best, r.val_loss);
  EXPECT_EQ(result.history[result.best_epoch - 1].val_loss, best);
  const auto loaded = load_checkpoint<float>(cfg.checkpoint_path);
  EXPECT_NEAR(evaluate_loss(loaded, va).loss, best, 1e-6);
}

TEST(Train, EarlyStoppingRestoresBestWeights) {
  const auto tr = toy_set(8, 1), va = toy_set(3, 9);
  auto model = SequentialModel<float>::build(toy_config(), 2);
  auto cfg = quiet(40);
  cfg.adam.lr = 0.05;
  cfg.early_stopping = EarlyStopping{true, 2, 0.0, true};
  const auto result = train(model, tr, va, cfg);
  double best = result.history[0].val_loss;
  for (const auto& r : result.history) best = std::min(best, r.val_loss);
  EXPECT_NEAR(evaluate_loss(model, va).loss, best, 1e-9);
  if (result.stopped_early) {
    EXPECT_LT(result.history.size(), 40u);
  }
}

TEST(Train, EpochCallbackAndCsv) {
  const auto tr = toy_set(4, 1), va = toy_set(2, 2);
  auto model = SequentialModel<float>::build(toy_config(), 2);
  auto cfg = quiet(2);
  std::size_t calls = 0;
  cfg.on_epoch = [&](const MetricsRow& r) { EXPECT_EQ(r.epoch, ++calls); };
  const auto result = train(model, tr, va, cfg);
  EXPECT_EQ(calls, 2u);
  const std::string csv = metrics_csv(result.history);
  EXPECT_EQ(csv.rfind("epoch,train_loss,train_acc,val_loss,val_acc,seconds\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_NE(csv.find(",0.000\n"), std::string::npos);
}
