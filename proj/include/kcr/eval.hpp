#ifndef KCR_EVAL_HPP
#define KCR_EVAL_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kcr/dataset.hpp"
#include "kcr/error.hpp"
#include "kcr/rng.hpp"
#include "kcr/tensor.hpp"

namespace kcr {

/// Anything that maps an image batch to class-probability rows.
template <typename C>
concept Classifier = requires(const C& c, const Tensor<float>& batch) {
  { c.predict(batch) } -> std::convertible_to<Tensor<float>>;
};

/// K x K counts; rows are true classes, columns predictions.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::vector<std::string> class_names)
      : names_(std::move(class_names)), counts_(names_.size() * names_.size(), 0) {}

  std::size_t num_classes() const { return names_.size(); }
  const std::vector<std::string>& class_names() const { return names_; }

  std::size_t at(std::size_t truth, std::size_t predicted) const { return counts_.at(index(truth, predicted)); }
  void add(std::size_t truth, std::size_t predicted, std::size_t n = 1) { counts_.at(index(truth, predicted)) += n; }

  std::size_t row_sum(std::size_t truth) const {
    std::size_t s = 0;
    for (std::size_t p = 0; p < num_classes(); ++p) s += at(truth, p);
    return s;
  }
  std::size_t total() const {
    std::size_t s = 0;
    for (std::size_t v : counts_) s += v;
    return s;
  }
  std::size_t trace() const {
    std::size_t s = 0;
    for (std::size_t c = 0; c < num_classes(); ++c) s += at(c, c);
    return s;
  }
  double accuracy() const {
    const std::size_t n = total();
    return n == 0 ? 0.0 : static_cast<double>(trace()) / static_cast<double>(n);
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t index(std::size_t t, std::size_t p) const {
    if (t >= num_classes() || p >= num_classes()) throw InvalidArgument("confusion: class index out of range");
    return t * num_classes() + p;
  }

  std::vector<std::string> names_;
  std::vector<std::size_t> counts_;
};

struct ClassAccuracy {
  std::string name;
  std::size_t n = 0, correct = 0;
  double accuracy = 0;

  friend bool operator==(const ClassAccuracy&, const ClassAccuracy&) = default;
};

struct PairCount {
  std::size_t true_class = 0, predicted_class = 0, count = 0;

  friend bool operator==(const PairCount&, const PairCount&) = default;
};

struct EvalReport {
  double overall_accuracy = 0;
  std::vector<ClassAccuracy> per_class;
  std::vector<PairCount> top_pairs;
  std::size_t num_wrong = 0;
  ConfusionMatrix confusion;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Predicted class per sample, visiting samples in `order`; result is
/// indexed by sample, not by visit position.
template <Classifier C>
std::vector<std::size_t> predict_labels(const C& model, const Dataset& d, std::span<const std::size_t> order,
                                        std::size_t batch_size = 64) {
  std::vector<std::size_t> pred(d.size(), 0);
  for (std::size_t lo = 0; lo < order.size(); lo += batch_size) {
    const auto idx = order.subspan(lo, std::min(batch_size, order.size() - lo));
    const Batch<float> b = make_batch<float>(d, idx);
    const auto arg = argmax_last_axis(model.predict(b.images));
    for (std::size_t i = 0; i < idx.size(); ++i) pred[idx[i]] = arg[i];
  }
  return pred;
}

inline ConfusionMatrix confusion_from(const Dataset& d, std::span<const std::size_t> predictions) {
  if (predictions.size() != d.size()) throw InvalidArgument("confusion: one prediction per sample required");
  ConfusionMatrix cm(d.class_names);
  for (std::size_t i = 0; i < d.size(); ++i) cm.add(d.samples[i].label, predictions[i]);
  return cm;
}

template <Classifier C>
ConfusionMatrix confusion(const C& model, const Dataset& d) {
  if (d.empty()) throw InvalidArgument("confusion: empty test set");
  std::vector<std::size_t> order(d.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  return confusion_from(d, predict_labels(model, d, order));
}

/// Off-diagonal cells with a non-zero count, largest first (ties in
/// row-major order), at most k of them.
inline std::vector<PairCount> top_misclassified_pairs(const ConfusionMatrix& cm, std::size_t k) {
  if (k == 0) throw InvalidArgument("top_misclassified_pairs: k must be >= 1");
  std::vector<PairCount> pairs;
  for (std::size_t t = 0; t < cm.num_classes(); ++t) {
    for (std::size_t p = 0; p < cm.num_classes(); ++p) {
      if (t != p && cm.at(t, p) > 0) pairs.push_back({t, p, cm.at(t, p)});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const PairCount& a, const PairCount& b) { return a.count > b.count; });
  if (pairs.size() > k) pairs.resize(k);
  return pairs;
}

/// Per-class rows from a confusion matrix. Classes with no samples get
/// accuracy 0 unless `require_all` is set, in which case they are an error.
inline std::vector<ClassAccuracy> per_class_from(const ConfusionMatrix& cm, bool require_all) {
  std::vector<ClassAccuracy> out;
  for (std::size_t c = 0; c < cm.num_classes(); ++c) {
    ClassAccuracy a{cm.class_names()[c], cm.row_sum(c), cm.at(c, c), 0.0};
    if (a.n == 0) {
      if (require_all) throw DataError("class '" + a.name + "' has no test samples");
    } else {
      a.accuracy = static_cast<double>(a.correct) / static_cast<double>(a.n);
    }
    out.push_back(std::move(a));
  }
  return out;
}

template <Classifier C>
std::vector<ClassAccuracy> per_class_accuracy(const C& model, const Dataset& d) {
  return per_class_from(confusion(model, d), true);
}

inline EvalReport report_from(ConfusionMatrix cm, std::size_t top_k) {
  EvalReport r;
  r.overall_accuracy = cm.accuracy();
  r.per_class = per_class_from(cm, false);
  r.num_wrong = cm.total() - cm.trace();
  r.top_pairs = top_misclassified_pairs(cm, top_k);
  r.confusion = std::move(cm);
  return r;
}

/// Whole-set evaluation, visiting samples in an order shuffled by
/// `shuffle_seed`. Every reported figure is a function of the confusion
/// counts only, so the report does not depend on that order.
template <Classifier C>
EvalReport evaluate(const C& model, const Dataset& d, std::uint64_t shuffle_seed, std::size_t top_k = 10) {
  if (d.empty()) throw InvalidArgument("evaluate: empty test set");
  std::vector<std::size_t> order(d.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(shuffle_seed);
  rng.shuffle(std::span<std::size_t>(order));
  return report_from(confusion_from(d, predict_labels(model, d, order)), top_k);
}

inline nlohmann::json report_json(const EvalReport& r) {
  using nlohmann::json;
  json j;
  j["overall_accuracy"] = r.overall_accuracy;
  j["num_wrong"] = r.num_wrong;
  j["per_class"] = json::array();
  for (const auto& c : r.per_class) {
    j["per_class"].push_back({{"class", c.name}, {"n", c.n}, {"correct", c.correct}, {"accuracy", c.accuracy}});
  }
  const auto& names = r.confusion.class_names();
  j["top_pairs"] = json::array();
  for (const auto& p : r.top_pairs) {
    j["top_pairs"].push_back({{"true", names.at(p.true_class)},
                              {"predicted", names.at(p.predicted_class)},
                              {"true_index", p.true_class},
                              {"predicted_index", p.predicted_class},
                              {"count", p.count}});
  }
  json rows = json::array();
  for (std::size_t t = 0; t < names.size(); ++t) {
    json row = json::array();
    for (std::size_t p = 0; p < names.size(); ++p) row.push_back(r.confusion.at(t, p));
    rows.push_back(std::move(row));
  }
  j["confusion"] = {{"classes", names}, {"counts", std::move(rows)}};
  return j;
}

namespace detail {
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}
}  // namespace detail

/// Header row and first column carry class names; cells are counts.
inline std::string confusion_csv(const ConfusionMatrix& cm) {
  std::ostringstream os;
  os << "true\\predicted";
  for (const auto& n : cm.class_names()) os << ',' << detail::csv_field(n);
  os << '\n';
  for (std::size_t t = 0; t < cm.num_classes(); ++t) {
    os << detail::csv_field(cm.class_names()[t]);
    for (std::size_t p = 0; p < cm.num_classes(); ++p) os << ',' << cm.at(t, p);
    os << '\n';
  }
  return os.str();
}

}  // namespace kcr

#endif  // KCR_EVAL_HPP
