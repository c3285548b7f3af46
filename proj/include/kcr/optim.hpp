#ifndef KCR_OPTIM_HPP
#define KCR_OPTIM_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "kcr/error.hpp"
#include "kcr/layers.hpp"

namespace kcr {

struct AdamSettings {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-7;
};

namespace detail {
template <typename T>
void check_gradients(std::span<Param<T>* const> params, const char* who) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Param<T>& p = *params[i];
    if (p.grad.shape() != p.value.shape()) {
      throw StateError(std::string(who) + ": parameter " + std::to_string(i) + " has no gradient");
    }
    if (!p.grad.all_finite()) {
      throw NumericError(std::string(who) + ": non-finite gradient in parameter " + std::to_string(i));
    }
  }
}

template <typename T>
void zero_gradients(std::span<Param<T>* const> params) {
  for (Param<T>* p : params) p->grad.fill(T{0});
}
}  // namespace detail

/// Adam with bias-corrected moments; eps is added outside the square root.
/// Moment buffers are allocated on the first step and bound to the
/// parameter list by position.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamSettings settings = {}) : s_(settings) {
    if (!(s_.lr > 0.0) || !(s_.beta1 > 0.0 && s_.beta1 < 1.0) || !(s_.beta2 > 0.0 && s_.beta2 < 1.0) ||
        !(s_.eps > 0.0)) {
      throw InvalidArgument("Adam: lr > 0, beta1/beta2 in (0, 1) and eps > 0 required");
    }
  }

  const AdamSettings& settings() const { return s_; }
  std::size_t steps() const { return t_; }
  const std::vector<Tensor<T>>& first_moments() const { return m_; }
  const std::vector<Tensor<T>>& second_moments() const { return v_; }

  void step(std::span<Param<T>* const> params) {
    detail::check_gradients(params, "adam_step");
    if (m_.empty()) {
      for (Param<T>* p : params) {
        m_.emplace_back(p->value.shape());
        v_.emplace_back(p->value.shape());
      }
    } else if (m_.size() != params.size()) {
      throw StateError("adam_step: parameter list changed between steps");
    }
    ++t_;
    const double c1 = 1.0 - std::pow(s_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(s_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto value = params[i]->value.data();
      auto grad = params[i]->grad.data();
      auto m = m_[i].data();
      auto v = v_[i].data();
      for (std::size_t j = 0; j < value.size(); ++j) {
        const double g = grad[j];
        const double mj = s_.beta1 * m[j] + (1.0 - s_.beta1) * g;
        const double vj = s_.beta2 * v[j] + (1.0 - s_.beta2) * g * g;
        m[j] = static_cast<T>(mj);
        v[j] = static_cast<T>(vj);
        const double m_hat = mj / c1;
        const double v_hat = vj / c2;
        value[j] = static_cast<T>(value[j] - s_.lr * m_hat / (std::sqrt(v_hat) + s_.eps));
      }
    }
    detail::zero_gradients(params);
  }

 private:
  AdamSettings s_;
  std::size_t t_ = 0;
  std::vector<Tensor<T>> m_, v_;
};

template <typename T>
void sgd_step(std::span<Param<T>* const> params, double lr) {
  detail::check_gradients(params, "sgd_step");
  for (Param<T>* p : params) {
    auto value = p->value.data();
    auto grad = p->grad.data();
    for (std::size_t j = 0; j < value.size(); ++j) value[j] = static_cast<T>(value[j] - lr * grad[j]);
  }
  detail::zero_gradients(params);
}

}  // namespace kcr

#endif  // KCR_OPTIM_HPP
