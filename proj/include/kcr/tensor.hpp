#ifndef KCR_TENSOR_HPP
#define KCR_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "kcr/error.hpp"
#include "kcr/parallel.hpp"

namespace kcr {

/// Ordered list of positive extents. A default-constructed Shape has rank 0
/// and denotes "no tensor" (element count 0).
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims) : Shape(std::vector<std::size_t>(dims)) {}
  explicit Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
    std::size_t n = 1;
    for (std::size_t d : dims_) {
      if (d == 0) throw ShapeError("shape " + str() + " has a zero extent");
      if (n > std::numeric_limits<std::size_t>::max() / d) {
        throw ShapeError("shape " + str() + " overflows the element count");
      }
      n *= d;
    }
    count_ = dims_.empty() ? 0 : n;
  }

  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t count() const noexcept { return count_; }
  std::size_t operator[](std::size_t i) const { return dims_.at(i); }
  const std::vector<std::size_t>& dims() const noexcept { return dims_; }

  /// Shape without the leading axis (per-sample shape of a batch).
  Shape tail() const {
    if (dims_.size() < 2) throw ShapeError("cannot drop the leading axis of " + str());
    return Shape(std::vector<std::size_t>(dims_.begin() + 1, dims_.end()));
  }

  /// Shape with `n` prepended.
  Shape batched(std::size_t n) const {
    std::vector<std::size_t> d;
    d.reserve(dims_.size() + 1);
    d.push_back(n);
    d.insert(d.end(), dims_.begin(), dims_.end());
    return Shape(std::move(d));
  }

  /// "(180, 180, 8)"
  std::string str() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < dims_.size(); ++i) os << (i ? ", " : "") << dims_[i];
    os << ')';
    return os.str();
  }

  friend bool operator==(const Shape&, const Shape&) = default;

 private:
  std::vector<std::size_t> dims_;
  std::size_t count_ = 0;
};

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{}) : shape_(std::move(shape)), data_(shape_.count(), fill) {
    require_nonempty();
  }
  Tensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)), data_(std::move(values)) {
    require_nonempty();
    if (data_.size() != shape_.count()) {
      throw ShapeError("value list of length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_.str());
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  /// Row-major multi-index access, bounds-checked per axis.
  template <typename... I>
  T& at(I... idx) {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <typename... I>
  const T& at(I... idx) const {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  /// Same data under a new shape with equal element count.
  Tensor reshaped(Shape s) const& {
    Tensor out = *this;
    out.reshape(std::move(s));
    return out;
  }
  Tensor reshaped(Shape s) && {
    reshape(std::move(s));
    return std::move(*this);
  }
  void reshape(Shape s) {
    if (s.count() != data_.size()) {
      throw ShapeError("cannot reshape " + shape_.str() + " to " + s.str());
    }
    shape_ = std::move(s);
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> v(data_.size());
    std::transform(data_.begin(), data_.end(), v.begin(), [](T x) { return static_cast<U>(x); });
    return Tensor<U>(shape_, std::move(v));
  }

  bool all_finite() const {
    if constexpr (std::is_floating_point_v<T>) {
      return std::all_of(data_.begin(), data_.end(), [](T x) { return std::isfinite(x); });
    } else {
      return true;
    }
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  void require_nonempty() const {
    if (shape_.rank() == 0) throw ShapeError("tensor shape must have at least one axis");
  }

  std::size_t offset(std::initializer_list<std::size_t> idx) const {
    if (idx.size() != shape_.rank()) {
      throw ShapeError("index rank " + std::to_string(idx.size()) + " for shape " + shape_.str());
    }
    std::size_t off = 0, axis = 0;
    for (std::size_t i : idx) {
      if (i >= shape_[axis]) throw ShapeError("index out of range for shape " + shape_.str());
      off = off * shape_[axis] + i;
      ++axis;
    }
    return off;
  }

  Shape shape_;
  std::vector<T> data_;
};

template <typename T>
void require_finite(const Tensor<T>& t, const char* where) {
  if (!t.all_finite()) throw NumericError(std::string(where) + ": non-finite value");
}

// ---------------------------------------------------------------------------
// Raw GEMM kernels on row-major spans. Every output element accumulates its
// K terms in increasing k, starting from 0 (or from the existing value when
// accumulating), so results are reproducible bit for bit. Work is split over
// output rows only.

namespace gemm {

/// C[M,N] (+)= A[M,K] * B[K,N]
template <typename T>
void nn(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, T* C, bool accumulate) {
  parallel_rows(M, N * K, [=](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      T* c = C + i * N;
      if (!accumulate) std::fill(c, c + N, T{0});
      const T* a = A + i * K;
      for (std::size_t k = 0; k < K; ++k) {
        const T av = a[k];
        const T* b = B + k * N;
        for (std::size_t j = 0; j < N; ++j) c[j] += av * b[j];
      }
    }
  });
}

/// C[M,N] (+)= A[K,M]^T * B[K,N]
template <typename T>
void tn(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, T* C, bool accumulate) {
  parallel_rows(M, N * K, [=](std::size_t lo, std::size_t hi) {
    if (!accumulate) std::fill(C + lo * N, C + hi * N, T{0});
    for (std::size_t k = 0; k < K; ++k) {
      const T* a = A + k * M;
      const T* b = B + k * N;
      for (std::size_t i = lo; i < hi; ++i) {
        const T av = a[i];
        T* c = C + i * N;
        for (std::size_t j = 0; j < N; ++j) c[j] += av * b[j];
      }
    }
  });
}

/// C[M,N] (+)= A[M,K] * B[N,K]^T
template <typename T>
void nt(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, T* C, bool accumulate) {
  parallel_rows(M, N * K, [=](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const T* a = A + i * K;
      for (std::size_t j = 0; j < N; ++j) {
        const T* b = B + j * K;
        T acc = accumulate ? C[i * N + j] : T{0};
        for (std::size_t k = 0; k < K; ++k) acc += a[k] * b[k];
        C[i * N + j] = acc;
      }
    }
  });
}

}  // namespace gemm

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape().rank() != 2 || b.shape().rank() != 2 || a.shape()[1] != b.shape()[0]) {
    throw ShapeError("matmul: cannot multiply " + a.shape().str() + " by " + b.shape().str());
  }
  const std::size_t M = a.shape()[0], K = a.shape()[1], N = b.shape()[1];
  Tensor<T> c(Shape{M, N});
  gemm::nn(M, N, K, a.data().data(), b.data().data(), c.data().data(), false);
  require_finite(c, "matmul");
  return c;
}

// ---------------------------------------------------------------------------
// Pointwise arithmetic.

namespace detail {
template <typename T, typename Op>
Tensor<T> zip(const Tensor<T>& a, const Tensor<T>& b, const char* name, Op op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(name) + ": shape " + a.shape().str() + " vs " + b.shape().str());
  }
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = op(a[i], b[i]);
  require_finite(out, name);
  return out;
}

template <typename T, typename Op>
Tensor<T> map(const Tensor<T>& a, const char* name, Op op) {
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = op(a[i]);
  require_finite(out, name);
  return out;
}
}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::zip(a, b, "add", [](T x, T y) { return x + y; });
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::zip(a, b, "sub", [](T x, T y) { return x - y; });
}
template <typename T>
Tensor<T> hadamard(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::zip(a, b, "hadamard", [](T x, T y) { return x * y; });
}
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  return detail::map(a, "scale", [s](T x) { return x * s; });
}
template <typename T>
Tensor<T> clamp_low(const Tensor<T>& a, T floor) {
  return detail::map(a, "clamp_low", [floor](T x) { return x < floor ? floor : x; });
}

// ---------------------------------------------------------------------------
// Reductions, left to right in index order.

template <typename T>
T sum(const Tensor<T>& a) {
  if (a.empty()) throw ShapeError("sum of an empty tensor");
  T acc{0};
  for (T x : a.data()) acc += x;
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(acc)) throw NumericError("sum: non-finite result");
  }
  return acc;
}

template <typename T>
T mean(const Tensor<T>& a) {
  return sum(a) / static_cast<T>(a.size());
}

/// Per leading index, position of the maximum along the last axis; ties
/// resolve to the smallest index.
template <typename T>
std::vector<std::size_t> argmax_last_axis(const Tensor<T>& a) {
  if (a.empty()) throw ShapeError("argmax of an empty tensor");
  const std::size_t width = a.shape()[a.shape().rank() - 1];
  const std::size_t rows = a.size() / width;
  std::vector<std::size_t> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = a.data().data() + r * width;
    std::size_t best = 0;
    for (std::size_t j = 1; j < width; ++j) {
      if (row[j] > row[best]) best = j;
    }
    out[r] = best;
  }
  return out;
}

}  // namespace kcr

#endif  // KCR_TENSOR_HPP
