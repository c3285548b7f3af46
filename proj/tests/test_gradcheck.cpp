#include <gtest/gtest.h>

#include <memory>

#include "gradcheck.hpp"
#include "kcr/layers.hpp"
#include "kcr/loss.hpp"
#include "kcr/model.hpp"
#include "test_util.hpp"

using namespace kcr;
using test::numeric_gradient;
using test::relative_error;
using test::weighted_sum;

namespace {

constexpr double kTolerance = 1e-4;
const std::uint64_t kSeeds[] = {1, 2, 3, 4, 5};

// Checks dL/dx and every parameter gradient of `layer` for L = sum(w * y).
void check_layer(Layer<double>& layer, Tensor<double> x, Rng& rng) {
  Rng fixed(0);
  const Tensor<double> y0 = layer.infer(x);
  const auto w = test::random_tensor<double>(y0.shape(), rng);
  auto loss = [&] { return weighted_sum(layer.infer(x), w); };

  for (Param<double>* p : layer.params()) p->grad.fill(0.0);
  layer.forward(x, Mode::Train, fixed);
  const Tensor<double> dx = layer.backward(w);

  EXPECT_LE(relative_error(dx, numeric_gradient(loss, x)), kTolerance) << kind_name(layer.kind()) << " input";
  for (Param<double>* p : layer.params()) {
    EXPECT_LE(relative_error(p->grad, numeric_gradient(loss, p->value)), kTolerance)
        << kind_name(layer.kind()) << " parameter";
  }
}

}  // namespace

TEST(GradCheck, Conv2DSame) {
  for (auto seed : kSeeds) {
    Rng rng(seed);
    Conv2D<double> conv(3, 3, 2, 3);
    conv.initialize(rng);
    conv.bias().value = test::random_tensor<double>(Shape{3}, rng);
    check_layer(conv, test::random_tensor<double>(Shape{2, 5, 6, 2}, rng), rng);
  }
}

TEST(GradCheck, Conv2DValidStrided) {
  for (auto seed : kSeeds) {
    Rng rng(seed);
    Conv2D<double> conv(3, 2, 2, 2, 2, Padding::Valid);
    conv.initialize(rng);
    check_layer(conv, test::random_tensor<double>(Shape{2, 7, 6, 2}, rng), rng);
  }
}

TEST(GradCheck, Dense) {
  for (auto seed : kSeeds) {
    Rng rng(seed);
    Dense<double> dense(6, 4);
    dense.initialize(rng);
    dense.bias().value = test::random_tensor<double>(Shape{4}, rng);
    check_layer(dense, test::random_tensor<double>(Shape{3, 6}, rng), rng);
  }
}

TEST(GradCheck, ReLU) {
  for (auto seed : kSeeds) {
    Rng rng(seed);
    ReLU<double> relu;
    // Keep inputs away from the kink so central differences are exact.
    auto x = test::random_tensor<double>(Shape{2, 10}, rng);
    for (double& v : x.data()) v += v >= 0 ? 0.1 : -0.1;
    check_layer(relu, x, rng);
  }
}

TEST(GradCheck, MaxPool) {
  for (auto seed : kSeeds) {
    Rng rng(seed);
    MaxPool2D<double> pool;
    // Distinct values spaced well beyond the step so no argmax flips.
    Tensor<double> x(Shape{2, 5, 4, 2});
    std::vector<std::size_t> order(x.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.01 * static_cast<double>(order[i]);
    check_layer(pool, x, rng);
  }
}

TEST(GradCheck, FlattenRescalingSoftmax) {
  for (auto seed : kSeeds) {
    Rng rng(seed);
    Flatten<double> flat;
    check_layer(flat, test::random_tensor<double>(Shape{2, 3, 2, 2}, rng), rng);
    Rescaling<double> rescale(1.0 / 255.0);
    check_layer(rescale, test::random_tensor<double>(Shape{2, 3, 2, 1}, rng, 0, 255), rng);
    Softmax<double> sm;
    check_layer(sm, test::random_tensor<double>(Shape{3, 5}, rng, -3, 3), rng);
  }
}

TEST(GradCheck, DropoutWithFixedMask) {
  for (auto seed : kSeeds) {
    Rng rng(seed);
    Dropout<double> drop(0.3);
    const auto x = test::random_tensor<double>(Shape{2, 20}, rng);
    const auto w = test::random_tensor<double>(Shape{2, 20}, rng);
    Rng mask_rng(seed + 100);
    const auto y = drop.forward(x, Mode::Train, mask_rng);
    const auto dx = drop.backward(w);
    // y = x * mask / (1 - rate); recover the scaled mask from y / x.
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(dx[i], w[i] * (y[i] / x[i]), 1e-12);
  }
}

TEST(GradCheck, FusedLogitGradientMatchesDifferences) {
  for (auto seed : kSeeds) {
    Rng rng(seed);
    auto logits = test::random_tensor<double>(Shape{4, 5}, rng, -2, 2);
    const std::vector<std::size_t> labels{0, 3, 4, 1};
    auto loss = [&] { return sparse_cce(softmax(logits), labels).value; };
    const auto analytic = sparse_cce_grad_logits(softmax(logits), labels);
    EXPECT_LE(relative_error(analytic, numeric_gradient(loss, logits)), 1e-6);
  }
}

TEST(GradCheck, TinyModelEndToEnd) {
  ModelConfig cfg;
  cfg.input_shape = Shape{8, 8, 1};
  cfg.num_classes = 3;
  cfg.layers = {LayerSpec::conv(2), LayerSpec::relu(), LayerSpec::maxpool(), LayerSpec::flatten(),
                LayerSpec::dense(3), LayerSpec::softmax()};
  for (auto seed : kSeeds) {
    auto model = SequentialModel<double>::build(cfg, seed);
    Rng rng(seed);
    const auto x = test::random_tensor<double>(Shape{2, 8, 8, 1}, rng);
    const std::vector<std::size_t> labels{2, 0};
    model.zero_grad();
    model.forward(x, Mode::Train, rng);
    model.backward(labels);
    auto loss = [&] { return sparse_cce(model.predict(x), labels).value; };
    for (Param<double>* p : model.params()) {
      const Tensor<double> analytic = p->grad;
      EXPECT_LE(relative_error(analytic, numeric_gradient(loss, p->value)), kTolerance) << "seed " << seed;
    }
  }
}

TEST(GradCheck, ModelBackwardThroughSoftmaxJacobian) {
  ModelConfig cfg;
  cfg.input_shape = Shape{4, 4, 1};
  cfg.num_classes = 2;
  cfg.layers = {LayerSpec::flatten(), LayerSpec::dense(2), LayerSpec::softmax()};
  for (auto seed : kSeeds) {
    auto model = SequentialModel<double>::build(cfg, seed);
    Rng rng(seed);
    const auto x = test::random_tensor<double>(Shape{3, 4, 4, 1}, rng);
    const auto w = test::random_tensor<double>(Shape{3, 2}, rng);
    model.zero_grad();
    model.forward(x, Mode::Train, rng);
    model.backward_from_probs(w);
    auto loss = [&] { return weighted_sum(model.predict(x), w); };
    for (Param<double>* p : model.params()) {
      const Tensor<double> analytic = p->grad;
      EXPECT_LE(relative_error(analytic, numeric_gradient(loss, p->value)), kTolerance);
    }
  }
}
