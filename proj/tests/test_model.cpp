#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "kcr/model.hpp"
#include "test_util.hpp"

using namespace kcr;

TEST(Model, CanonicalShapesAtFullResolution) {
  const auto model = SequentialModel<float>::build(canonical_config(Shape{180, 180, 3}, 35), 1);
  const std::vector<Shape> expected_blocks{Shape{180, 180, 8}, Shape{90, 90, 8},   Shape{90, 90, 16},
                                           Shape{45, 45, 16},  Shape{45, 45, 32},  Shape{22, 22, 32},
                                           Shape{22, 22, 64},  Shape{11, 11, 64}};
  std::vector<Shape> conv_and_pool;
  std::vector<std::size_t> conv_params;
  for (std::size_t i = 0; i < model.size(); ++i) {
    const auto k = model.layer(i).kind();
    if (k == LayerKind::Conv2D || k == LayerKind::MaxPool2D) conv_and_pool.push_back(model.output_shapes()[i]);
    if (k == LayerKind::Conv2D) conv_params.push_back(model.layer(i).param_count());
  }
  EXPECT_EQ(conv_and_pool, expected_blocks);
  EXPECT_EQ(conv_params, (std::vector<std::size_t>{224, 1168, 4640, 18496}));
  EXPECT_EQ(model.output_shapes().back(), Shape{35});
}

TEST(Model, LayerNamesFollowKerasConvention) {
  const auto model = SequentialModel<float>::build(canonical_config(Shape{32, 32, 1}, 4, 16), 1);
  const auto& names = model.layer_names();
  EXPECT_EQ(names.front(), "rescaling");
  EXPECT_EQ(names[1], "conv2d");
  EXPECT_EQ(names[4], "conv2d_1");
  EXPECT_EQ(names[3], "max_pooling2d");
  EXPECT_EQ(names.back(), "softmax");
  const std::string s = model.summary();
  EXPECT_NE(s.find("conv2d_3 (Conv2D)"), std::string::npos);
  EXPECT_NE(s.find("(None, 32, 32, 8)"), std::string::npos);
  EXPECT_NE(s.find("max_pooling2d (MaxPooling2D)"), std::string::npos);
  EXPECT_NE(s.find("Total params: "), std::string::npos);
}

TEST(Model, TotalParamsIsSumOfLayers) {
  const auto model = SequentialModel<float>::build(canonical_config(Shape{32, 32, 1}, 10, 64), 1);
  // convs 80 + 1168 + 4640 + 18496, dense 256*64 + 64, head 64*10 + 10
  EXPECT_EQ(model.total_params(), 80u + 1168 + 4640 + 18496 + 16448 + 650);
}

TEST(Model, RejectsInvalidConfigs) {
  EXPECT_THROW(SequentialModel<float>::build(canonical_config(Shape{2, 2, 1}, 10), 1), ShapeError);
  EXPECT_THROW(SequentialModel<float>::build(canonical_config(Shape{32, 32, 1}, 1), 1), InvalidArgument);
  auto no_head = canonical_config(Shape{32, 32, 1}, 3);
  no_head.layers.pop_back();
  EXPECT_THROW(SequentialModel<float>::build(no_head, 1), InvalidArgument);
  auto names = canonical_config(Shape{32, 32, 1}, 3);
  names.class_names = {"a", "b"};
  EXPECT_THROW(SequentialModel<float>::build(names, 1), InvalidArgument);
}

TEST(Model, SeedDeterminesWeights) {
  const auto cfg = canonical_config(Shape{16, 16, 1}, 3, 8);
  auto a = SequentialModel<float>::build(cfg, 5), b = SequentialModel<float>::build(cfg, 5),
       c = SequentialModel<float>::build(cfg, 6);
  EXPECT_EQ(a.snapshot(), b.snapshot());
  EXPECT_NE(a.snapshot(), c.snapshot());
}

TEST(Model, FreshModelIsNearUniform) {
  const auto model = SequentialModel<float>::build(canonical_config(Shape{32, 32, 1}, 10), 3);
  Rng rng(1);
  const auto x = test::random_tensor<float>(Shape{4, 32, 32, 1}, rng, 0, 255);
  const auto p = model.predict(x);
  ASSERT_EQ(p.shape(), (Shape{4, 10}));
  for (std::size_t r = 0; r < 4; ++r) {
    double s = 0;
    for (std::size_t k = 0; k < 10; ++k) {
      s += p.at(r, k);
      EXPECT_GT(p.at(r, k), 0.02);
      EXPECT_LT(p.at(r, k), 0.5);
    }
    EXPECT_NEAR(s, 1.0, 1e-5);
  }
}

TEST(Model, PredictMatchesInferenceForward) {
  auto model = SequentialModel<float>::build(canonical_config(Shape{16, 16, 1}, 3, 8, 0.5), 2);
  Rng rng(2);
  const auto x = test::random_tensor<float>(Shape{3, 16, 16, 1}, rng, 0, 255);
  EXPECT_EQ(model.predict(x), model.forward(x, Mode::Infer, rng));
  EXPECT_THROW(model.predict(Tensor<float>(Shape{1, 8, 8, 1})), ShapeError);
}

TEST(Model, BackwardRequiresForward) {
  auto model = SequentialModel<float>::build(canonical_config(Shape{16, 16, 1}, 3, 8), 2);
  EXPECT_THROW(model.backward(std::vector<std::size_t>{0}), StateError);
}

namespace {

std::vector<Tensor<double>> gradients(SequentialModel<double>& m, const Tensor<double>& x,
                                      const std::vector<std::size_t>& labels) {
  Rng rng(0);
  m.zero_grad();
  m.forward(x, Mode::Infer, rng);
  m.backward(labels);
  std::vector<Tensor<double>> out;
  for (auto* p : m.params()) out.push_back(p->grad);
  return out;
}

}  // namespace

TEST(Model, MeanGradientOfDuplicatedBatchEqualsSingle) {
  auto model = SequentialModel<double>::build(canonical_config(Shape{16, 16, 1}, 3, 6, 0.0), 4);
  Rng rng(4);
  const auto x = test::random_tensor<double>(Shape{1, 16, 16, 1}, rng, 0, 255);
  Tensor<double> xx(Shape{2, 16, 16, 1});
  for (std::size_t i = 0; i < x.size(); ++i) xx[i] = xx[i + x.size()] = x[i];
  const auto one = gradients(model, x, {1});
  const auto two = gradients(model, xx, {1, 1});
  for (std::size_t p = 0; p < one.size(); ++p)
    for (std::size_t i = 0; i < one[p].size(); ++i) EXPECT_NEAR(one[p][i], two[p][i], 1e-10);
}

TEST(Model, GradientInvariantToBatchOrder) {
  auto model = SequentialModel<double>::build(canonical_config(Shape{16, 16, 1}, 3, 6, 0.0), 4);
  Rng rng(5);
  const auto x = test::random_tensor<double>(Shape{3, 16, 16, 1}, rng, 0, 255);
  Tensor<double> rev(x.shape());
  const std::size_t per = 256;
  for (std::size_t n = 0; n < 3; ++n)
    for (std::size_t i = 0; i < per; ++i) rev[(2 - n) * per + i] = x[n * per + i];
  const auto a = gradients(model, x, {0, 1, 2});
  const auto b = gradients(model, rev, {2, 1, 0});
  for (std::size_t p = 0; p < a.size(); ++p)
    for (std::size_t i = 0; i < a[p].size(); ++i) EXPECT_NEAR(a[p][i], b[p][i], 1e-10);
}

TEST(Model, SnapshotRestoreRoundTrip) {
  auto model = SequentialModel<float>::build(canonical_config(Shape{16, 16, 1}, 2, 4), 9);
  const auto saved = model.snapshot();
  for (auto* p : model.params()) p->value.fill(0.0f);
  model.restore(saved);
  EXPECT_EQ(model.snapshot(), saved);
}
