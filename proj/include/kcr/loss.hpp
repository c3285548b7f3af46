#ifndef KCR_LOSS_HPP
#define KCR_LOSS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "kcr/error.hpp"
#include "kcr/tensor.hpp"

namespace kcr {

/// Integer class ids, one per batch row.
using LabelBatch = std::vector<std::size_t>;

struct LossValue {
  double value = 0.0;
  std::size_t batch_size = 0;
};

inline constexpr double kProbabilityFloor = 1e-7;

namespace detail {
template <typename T>
void check_probs(const Tensor<T>& probs, std::span<const std::size_t> labels, const char* who) {
  if (probs.shape().rank() != 2) throw ShapeError(std::string(who) + ": probabilities must be [N, K]");
  const std::size_t n = probs.shape()[0], k = probs.shape()[1];
  if (labels.size() != n) {
    throw ShapeError(std::string(who) + ": " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(n) + " rows");
  }
  for (std::size_t r = 0; r < n; ++r) {
    if (labels[r] >= k) {
      throw InvalidArgument(std::string(who) + ": label " + std::to_string(labels[r]) + " out of range for " +
                            std::to_string(k) + " classes");
    }
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) total += static_cast<double>(probs[r * k + j]);
    if (!(std::abs(total - 1.0) <= 1e-4)) {
      throw InvalidArgument(std::string(who) + ": row " + std::to_string(r) + " sums to " +
                            std::to_string(total) + ", not 1");
    }
  }
}
}  // namespace detail

/// Mean sparse categorical cross-entropy over rows of softmax output.
template <typename T>
LossValue sparse_cce(const Tensor<T>& probs, std::span<const std::size_t> labels) {
  detail::check_probs(probs, labels, "sparse_cce");
  const std::size_t n = probs.shape()[0], k = probs.shape()[1];
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double p = std::clamp(static_cast<double>(probs[r * k + labels[r]]), kProbabilityFloor, 1.0);
    total -= std::log(p);
  }
  const double value = total / static_cast<double>(n);
  if (!std::isfinite(value)) throw NumericError("sparse_cce: non-finite loss");
  return {value, n};
}

/// Gradient of the mean loss with respect to the logits feeding the
/// softmax: (p - onehot) / N.
template <typename T>
Tensor<T> sparse_cce_grad_logits(const Tensor<T>& probs, std::span<const std::size_t> labels) {
  detail::check_probs(probs, labels, "sparse_cce_grad_logits");
  const std::size_t n = probs.shape()[0], k = probs.shape()[1];
  const T inv_n = T{1} / static_cast<T>(n);
  Tensor<T> g(probs.shape());
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < k; ++j) {
      const T onehot = j == labels[r] ? T{1} : T{0};
      g[r * k + j] = (probs[r * k + j] - onehot) * inv_n;
    }
  }
  return g;
}

/// Fraction of rows whose argmax (ties to the smaller index) is the label.
template <typename T>
double accuracy(const Tensor<T>& probs, std::span<const std::size_t> labels) {
  if (probs.empty() || probs.shape()[0] == 0) throw InvalidArgument("accuracy: empty batch");
  if (labels.size() != probs.shape()[0]) throw ShapeError("accuracy: label count does not match rows");
  const auto pred = argmax_last_axis(probs);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < pred.size(); ++r) hits += pred[r] == labels[r];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

}  // namespace kcr

#endif  // KCR_LOSS_HPP
