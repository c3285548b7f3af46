#ifndef KCR_TESTS_GRADCHECK_HPP
#define KCR_TESTS_GRADCHECK_HPP

// Central finite differences, kept apart from the analytic backward code it
// is used to check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>

#include "kcr/tensor.hpp"

namespace kcr::test {

inline constexpr double kFdStep = 1e-5;

/// d loss / d x[i] for every element, perturbing x in place and restoring it.
inline Tensor<double> numeric_gradient(const std::function<double()>& loss, Tensor<double>& x,
                                       double h = kFdStep) {
  Tensor<double> g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = loss();
    x[i] = saved - h;
    const double down = loss();
    x[i] = saved;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

/// ||a - b|| / (||a|| + ||b||), 0 when both vanish.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(na) + std::sqrt(nb);
  return denom == 0 ? 0.0 : std::sqrt(diff) / denom;
}

inline double relative_error(const Tensor<double>& a, const Tensor<double>& b) {
  return relative_error(a.data(), b.data());
}

/// Weighted sum of a layer output, the scalar loss used for layer checks:
/// its gradient with respect to the output is simply `weights`.
inline double weighted_sum(const Tensor<double>& y, const Tensor<double>& weights) {
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * weights[i];
  return s;
}

}  // namespace kcr::test

#endif  // KCR_TESTS_GRADCHECK_HPP
