#include <gtest/gtest.h>

#include <numeric>
#include <vector>

#include "kcr/eval.hpp"
#include "test_util.hpp"

using namespace kcr;

namespace {

// Images carry their label in pixel 0; the classifier reads it back.
Dataset tagged(const std::vector<std::size_t>& per_class) {
  Dataset d;
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    d.class_names.push_back("k" + std::to_string(c));
    for (std::size_t i = 0; i < per_class[c]; ++i) {
      Image img(Shape{2, 2, 1}, static_cast<std::uint8_t>(i % 200));
      img[0] = static_cast<std::uint8_t>(c);
      d.samples.push_back(Sample{img, c, ""});
    }
  }
  return d;
}

struct ConstantClassifier {
  std::size_t k, answer;
  Tensor<float> predict(const Tensor<float>& batch) const {
    Tensor<float> p(Shape{batch.shape()[0], k}, 0.0f);
    for (std::size_t n = 0; n < batch.shape()[0]; ++n) p.at(n, answer) = 1.0f;
    return p;
  }
};

struct OracleClassifier {
  std::size_t k;
  Tensor<float> predict(const Tensor<float>& batch) const {
    const std::size_t stride = batch.size() / batch.shape()[0];
    Tensor<float> p(Shape{batch.shape()[0], k}, 0.0f);
    for (std::size_t n = 0; n < batch.shape()[0]; ++n) p.at(n, static_cast<std::size_t>(batch[n * stride])) = 1.0f;
    return p;
  }
};

// Deterministic but arbitrary: class from a hash of the pixels.
struct HashClassifier {
  std::size_t k;
  Tensor<float> predict(const Tensor<float>& batch) const {
    const std::size_t stride = batch.size() / batch.shape()[0];
    Tensor<float> p(Shape{batch.shape()[0], k}, 0.0f);
    for (std::size_t n = 0; n < batch.shape()[0]; ++n) {
      std::size_t h = 0;
      for (std::size_t i = 0; i < stride; ++i) h = h * 31 + static_cast<std::size_t>(batch[n * stride + i]);
      p.at(n, (h >> 3) % k) = 1.0f;
    }
    return p;
  }
};

static_assert(Classifier<ConstantClassifier>);

}  // namespace

TEST(Evaluate, AlwaysFirstClass) {
  const Dataset d = tagged({5, 5, 5, 5});
  const ConstantClassifier model{4, 0};
  const auto r = evaluate(model, d, 1);
  EXPECT_DOUBLE_EQ(r.overall_accuracy, 0.25);
  EXPECT_EQ(r.num_wrong, 15u);
  const auto pc = per_class_accuracy(model, d);
  std::vector<double> accs;
  for (const auto& c : pc) accs.push_back(c.accuracy);
  EXPECT_EQ(accs, (std::vector<double>{1, 0, 0, 0}));
  const auto cm = confusion(model, d);
  for (std::size_t t = 0; t < 4; ++t) EXPECT_EQ(cm.at(t, 0), 5u);
}

TEST(Evaluate, PerfectOracle) {
  const Dataset d = tagged({3, 4, 5});
  const auto r = evaluate(OracleClassifier{3}, d, 2);
  EXPECT_DOUBLE_EQ(r.overall_accuracy, 1.0);
  EXPECT_EQ(r.num_wrong, 0u);
  EXPECT_TRUE(r.top_pairs.empty());
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t p = 0; p < 3; ++p) EXPECT_EQ(r.confusion.at(t, p), t == p ? d.class_counts()[t] : 0u);
}

TEST(Evaluate, ShuffleSeedDoesNotMatter) {
  const Dataset d = tagged({7, 9, 4, 11, 6});
  const HashClassifier model{5};
  const auto a = evaluate(model, d, 1), b = evaluate(model, d, 999);
  EXPECT_EQ(a, b);
  EXPECT_EQ(report_json(a).dump(), report_json(b).dump());
}

TEST(Evaluate, ReportIsInternallyConsistent) {
  const Dataset d = tagged({7, 9, 4, 11, 6});
  const auto r = evaluate(HashClassifier{5}, d, 3);
  const auto& cm = r.confusion;
  EXPECT_EQ(cm.total(), d.size());
  EXPECT_EQ(cm.trace() + r.num_wrong, cm.total());
  EXPECT_NEAR(double(cm.trace()) / double(cm.total()), r.overall_accuracy, 1e-12);
  double weighted = 0;
  for (std::size_t c = 0; c < 5; ++c) {
    EXPECT_EQ(cm.row_sum(c), d.class_counts()[c]);
    weighted += r.per_class[c].accuracy * double(r.per_class[c].n);
  }
  EXPECT_NEAR(weighted / double(d.size()), r.overall_accuracy, 1e-9);
  std::size_t pair_total = 0;
  for (const auto& p : r.top_pairs) pair_total += p.count;
  EXPECT_LE(pair_total, r.num_wrong);
}

TEST(PerClass, WeightedExample) {
  ConfusionMatrix cm({"a", "b"});
  cm.add(0, 0, 5);
  cm.add(0, 1, 5);
  cm.add(1, 1, 30);
  const auto pc = per_class_from(cm, true);
  EXPECT_DOUBLE_EQ(pc[0].accuracy, 0.5);
  EXPECT_DOUBLE_EQ(pc[1].accuracy, 1.0);
  EXPECT_DOUBLE_EQ(report_from(cm, 5).overall_accuracy, 0.875);
}

TEST(PerClass, MissingClassIsAnError) {
  ConfusionMatrix cm({"a", "b"});
  cm.add(0, 0);
  EXPECT_THROW(per_class_from(cm, true), DataError);
  EXPECT_EQ(per_class_from(cm, false)[1].accuracy, 0.0);
}

TEST(TopPairs, RanksAndBreaksTies) {
  ConfusionMatrix cm(std::vector<std::string>(8, "x"));
  cm.add(2, 3, 88);
  cm.add(5, 6, 61);
  cm.add(1, 1, 500);
  EXPECT_EQ(top_misclassified_pairs(cm, 10), (std::vector<PairCount>{{2, 3, 88}, {5, 6, 61}}));

  ConfusionMatrix tie(std::vector<std::string>(3, "y"));
  tie.add(2, 0, 4);
  tie.add(0, 2, 4);
  EXPECT_EQ(top_misclassified_pairs(tie, 1), (std::vector<PairCount>{{0, 2, 4}}));

  ConfusionMatrix diag(std::vector<std::string>(3, "z"));
  diag.add(1, 1, 9);
  EXPECT_TRUE(top_misclassified_pairs(diag, 3).empty());
  EXPECT_THROW(top_misclassified_pairs(diag, 0), InvalidArgument);
}

TEST(Emit, JsonKeysAndCsvLayout) {
  ConfusionMatrix cm({"ح", "چ", "a,b"});
  cm.add(0, 1, 2);
  cm.add(1, 1, 3);
  cm.add(2, 2, 1);
  const auto j = report_json(report_from(cm, 10));
  for (const char* key : {"overall_accuracy", "per_class", "top_pairs", "num_wrong", "confusion"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["top_pairs"][0]["true"], "ح");
  EXPECT_EQ(j["top_pairs"][0]["predicted"], "چ");
  EXPECT_EQ(j["num_wrong"], 2);
  EXPECT_EQ(confusion_csv(cm), "true\\predicted,ح,چ,\"a,b\"\nح,0,2,0\nچ,0,3,0\n\"a,b\",0,0,1\n");
}

TEST(Evaluate, EmptySetIsRejected) {
  Dataset empty;
  empty.class_names = {"a", "b"};
  EXPECT_THROW(evaluate(ConstantClassifier{2, 0}, empty, 0), InvalidArgument);
}
