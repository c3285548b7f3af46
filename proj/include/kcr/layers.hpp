#ifndef KCR_LAYERS_HPP
#define KCR_LAYERS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "kcr/error.hpp"
#include "kcr/rng.hpp"
#include "kcr/tensor.hpp"

namespace kcr {

enum class Mode { Train, Infer };

enum class Padding { Same, Valid };

enum class LayerKind { Rescaling, Conv2D, MaxPool2D, ReLU, Flatten, Dense, Dropout, Softmax };

inline const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Rescaling: return "Rescaling";
    case LayerKind::Conv2D: return "Conv2D";
    case LayerKind::MaxPool2D: return "MaxPooling2D";
    case LayerKind::ReLU: return "ReLU";
    case LayerKind::Flatten: return "Flatten";
    case LayerKind::Dense: return "Dense";
    case LayerKind::Dropout: return "Dropout";
    case LayerKind::Softmax: return "Softmax";
  }
  return "?";
}

/// A learnable tensor and its gradient buffer (same shape).
template <typename T>
struct Param {
  Tensor<T> value;
  Tensor<T> grad;

  explicit Param(Shape s) : value(s), grad(std::move(s)) {}
};

/// Glorot-uniform fill, limit sqrt(6 / (fan_in + fan_out)).
template <typename T>
void glorot_uniform(Tensor<T>& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (T& v : w.data()) v = static_cast<T>(rng.uniform(-limit, limit));
}

/// One stage of a sequential network. Tensors flowing through forward and
/// backward carry a leading batch axis; output_shape works on per-sample
/// shapes. Layers keep the forward inputs they need for backward, so an
/// instance is confined to one thread while training.
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  virtual Shape output_shape(const Shape& in) const = 0;
  virtual Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng& rng) = 0;
  /// Inference-mode forward that touches no caches; safe to call
  /// concurrently on a layer nobody is training.
  virtual Tensor<T> infer(const Tensor<T>& x) const = 0;
  /// Returns dL/dx and accumulates parameter gradients.
  virtual Tensor<T> backward(const Tensor<T>& upstream) = 0;

  virtual std::vector<Param<T>*> params() { return {}; }
  virtual std::size_t param_count() const { return 0; }
  virtual void initialize(Rng&) {}
};

namespace detail {
inline void require_rank(const Shape& s, std::size_t rank, const char* who) {
  if (s.rank() != rank) {
    throw ShapeError(std::string(who) + ": expected rank " + std::to_string(rank) + ", got " + s.str());
  }
}

template <typename T>
void require_cache(const Tensor<T>& cache, const char* who) {
  if (cache.empty()) throw StateError(std::string(who) + ": backward called without a forward pass");
}

inline void require_same(const Shape& got, const Shape& want, const char* who) {
  if (got != want) throw ShapeError(std::string(who) + ": upstream " + got.str() + ", expected " + want.str());
}
}  // namespace detail

// ---------------------------------------------------------------------------

template <typename T>
class Rescaling final : public Layer<T> {
 public:
  explicit Rescaling(T factor) : factor_(factor) {}

  LayerKind kind() const override { return LayerKind::Rescaling; }
  Shape output_shape(const Shape& in) const override { return in; }
  T factor() const { return factor_; }

  Tensor<T> infer(const Tensor<T>& x) const override { return scale(x, factor_); }
  Tensor<T> forward(const Tensor<T>& x, Mode, Rng&) override {
    input_shape_ = x.shape();
    return infer(x);
  }
  Tensor<T> backward(const Tensor<T>& upstream) override {
    if (input_shape_.rank() == 0) throw StateError("Rescaling: backward called without a forward pass");
    detail::require_same(upstream.shape(), input_shape_, "Rescaling");
    return scale(upstream, factor_);
  }

 private:
  T factor_;
  Shape input_shape_;
};

// ---------------------------------------------------------------------------

/// Spatial geometry shared by forward and backward. "Same" padding follows
/// the usual convention: output = ceil(in / stride), total padding split
/// with the smaller half before (floor(k/2) per side for odd k, stride 1).
struct ConvGeometry {
  std::size_t in_h, in_w, out_h, out_w, pad_top, pad_left;

  static ConvGeometry make(std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
                           std::size_t stride, Padding padding) {
    ConvGeometry g{h, w, 0, 0, 0, 0};
    if (padding == Padding::Same) {
      g.out_h = (h + stride - 1) / stride;
      g.out_w = (w + stride - 1) / stride;
      const std::size_t need_h = (g.out_h - 1) * stride + kh;
      const std::size_t need_w = (g.out_w - 1) * stride + kw;
      const std::size_t pad_h = need_h > h ? need_h - h : 0;
      const std::size_t pad_w = need_w > w ? need_w - w : 0;
      if (kh > h + pad_h || kw > w + pad_w) throw ShapeError("Conv2D: kernel larger than padded input");
      g.pad_top = pad_h / 2;
      g.pad_left = pad_w / 2;
    } else {
      if (kh > h || kw > w) throw ShapeError("Conv2D: kernel larger than input");
      g.out_h = (h - kh) / stride + 1;
      g.out_w = (w - kw) / stride + 1;
    }
    return g;
  }
};

/// 2-D convolution, channels-last. Kernel layout [kh, kw, Cin, Cout], which
/// row-major is exactly the [kh*kw*Cin, Cout] matrix the im2col product
/// needs.
template <typename T>
class Conv2D final : public Layer<T> {
 public:
  Conv2D(std::size_t kernel_h, std::size_t kernel_w, std::size_t in_channels, std::size_t filters,
         std::size_t stride = 1, Padding padding = Padding::Same)
      : kh_(kernel_h),
        kw_(kernel_w),
        cin_(in_channels),
        cout_(filters),
        stride_(stride),
        padding_(padding),
        kernel_(Shape{kernel_h, kernel_w, in_channels, filters}),
        bias_(Shape{filters}) {
    if (stride == 0) throw InvalidArgument("Conv2D: stride must be positive");
  }

  LayerKind kind() const override { return LayerKind::Conv2D; }

  Shape output_shape(const Shape& in) const override {
    detail::require_rank(in, 3, "Conv2D");
    if (in[2] != cin_) {
      throw ShapeError("Conv2D: input has " + std::to_string(in[2]) + " channels, kernel expects " +
                       std::to_string(cin_));
    }
    const auto g = ConvGeometry::make(in[0], in[1], kh_, kw_, stride_, padding_);
    return Shape{g.out_h, g.out_w, cout_};
  }

  std::size_t param_count() const override { return (kh_ * kw_ * cin_ + 1) * cout_; }
  std::vector<Param<T>*> params() override { return {&kernel_, &bias_}; }
  Param<T>& kernel() { return kernel_; }
  Param<T>& bias() { return bias_; }
  std::size_t filters() const { return cout_; }
  std::size_t kernel_h() const { return kh_; }
  std::size_t kernel_w() const { return kw_; }
  std::size_t stride() const { return stride_; }
  Padding padding() const { return padding_; }

  void initialize(Rng& rng) override {
    glorot_uniform(kernel_.value, kh_ * kw_ * cin_, kh_ * kw_ * cout_, rng);
    bias_.value.fill(T{0});
  }

  Tensor<T> forward(const Tensor<T>& x, Mode, Rng&) override {
    Tensor<T> y = infer(x);
    input_ = x;
    return y;
  }

  Tensor<T> infer(const Tensor<T>& x) const override {
    detail::require_rank(x.shape(), 4, "Conv2D");
    const Shape out_sample = output_shape(x.shape().tail());
    const std::size_t n = x.shape()[0];
    const auto g = geometry(x.shape());
    const std::size_t rows = g.out_h * g.out_w, depth = kh_ * kw_ * cin_;
    Tensor<T> y(out_sample.batched(n));
    std::vector<T> col(rows * depth);
    const std::size_t in_stride = g.in_h * g.in_w * cin_;
    for (std::size_t s = 0; s < n; ++s) {
      im2col(x.data().data() + s * in_stride, g, col.data());
      T* out = y.data().data() + s * rows * cout_;
      for (std::size_t r = 0; r < rows; ++r) std::copy_n(bias_.value.data().data(), cout_, out + r * cout_);
      gemm::nn(rows, cout_, depth, col.data(), kernel_.value.data().data(), out, true);
    }
    require_finite(y, "Conv2D forward");
    return y;
  }

  Tensor<T> backward(const Tensor<T>& upstream) override {
    detail::require_cache(input_, "Conv2D");
    const auto g = geometry(input_.shape());
    const std::size_t n = input_.shape()[0];
    detail::require_same(upstream.shape(), Shape{n, g.out_h, g.out_w, cout_}, "Conv2D");
    const std::size_t rows = g.out_h * g.out_w, depth = kh_ * kw_ * cin_;
    const std::size_t in_stride = g.in_h * g.in_w * cin_;
    Tensor<T> dx(input_.shape());
    std::vector<T> col(rows * depth), dcol(rows * depth);
    T* gk = kernel_.grad.data().data();
    T* gb = bias_.grad.data().data();
    for (std::size_t s = 0; s < n; ++s) {
      const T* up = upstream.data().data() + s * rows * cout_;
      im2col(input_.data().data() + s * in_stride, g, col.data());
      gemm::tn(depth, cout_, rows, col.data(), up, gk, true);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cout_; ++c) gb[c] += up[r * cout_ + c];
      }
      gemm::nt(rows, depth, cout_, up, kernel_.value.data().data(), dcol.data(), false);
      col2im(dcol.data(), g, dx.data().data() + s * in_stride);
    }
    require_finite(dx, "Conv2D backward");
    return dx;
  }

 private:
  ConvGeometry geometry(const Shape& batch) const {
    return ConvGeometry::make(batch[1], batch[2], kh_, kw_, stride_, padding_);
  }

  // col[(oh*out_w + ow), (dh*kw + dw)*cin + ci] = x[oh*s + dh - pt, ow*s + dw - pl, ci]
  void im2col(const T* x, const ConvGeometry& g, T* col) const {
    const std::size_t depth = kh_ * kw_ * cin_;
    for (std::size_t oh = 0; oh < g.out_h; ++oh) {
      for (std::size_t ow = 0; ow < g.out_w; ++ow) {
        T* row = col + (oh * g.out_w + ow) * depth;
        for (std::size_t dh = 0; dh < kh_; ++dh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * stride_ + dh) -
                                    static_cast<std::ptrdiff_t>(g.pad_top);
          for (std::size_t dw = 0; dw < kw_; ++dw) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * stride_ + dw) -
                                      static_cast<std::ptrdiff_t>(g.pad_left);
            T* dst = row + (dh * kw_ + dw) * cin_;
            if (ih < 0 || iw < 0 || ih >= static_cast<std::ptrdiff_t>(g.in_h) ||
                iw >= static_cast<std::ptrdiff_t>(g.in_w)) {
              std::fill_n(dst, cin_, T{0});
            } else {
              std::copy_n(x + (static_cast<std::size_t>(ih) * g.in_w + static_cast<std::size_t>(iw)) * cin_,
                          cin_, dst);
            }
          }
        }
      }
    }
  }

  void col2im(const T* col, const ConvGeometry& g, T* dx) const {
    const std::size_t depth = kh_ * kw_ * cin_;
    for (std::size_t oh = 0; oh < g.out_h; ++oh) {
      for (std::size_t ow = 0; ow < g.out_w; ++ow) {
        const T* row = col + (oh * g.out_w + ow) * depth;
        for (std::size_t dh = 0; dh < kh_; ++dh) {
          const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * stride_ + dh) -
                                    static_cast<std::ptrdiff_t>(g.pad_top);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
          for (std::size_t dw = 0; dw < kw_; ++dw) {
            const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * stride_ + dw) -
                                      static_cast<std::ptrdiff_t>(g.pad_left);
            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
            const T* src = row + (dh * kw_ + dw) * cin_;
            T* dst = dx + (static_cast<std::size_t>(ih) * g.in_w + static_cast<std::size_t>(iw)) * cin_;
            for (std::size_t c = 0; c < cin_; ++c) dst[c] += src[c];
          }
        }
      }
    }
  }

  std::size_t kh_, kw_, cin_, cout_, stride_;
  Padding padding_;
  Param<T> kernel_, bias_;
  Tensor<T> input_;
};

// ---------------------------------------------------------------------------

template <typename T>
class ReLU final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::ReLU; }
  Shape output_shape(const Shape& in) const override { return in; }

  Tensor<T> infer(const Tensor<T>& x) const override { return clamp_low(x, T{0}); }
  Tensor<T> forward(const Tensor<T>& x, Mode, Rng&) override {
    input_ = x;
    return infer(x);
  }

  // Subgradient at exactly 0 is 0.
  Tensor<T> backward(const Tensor<T>& upstream) override {
    detail::require_cache(input_, "ReLU");
    detail::require_same(upstream.shape(), input_.shape(), "ReLU");
    Tensor<T> dx(upstream.shape());
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = input_[i] > T{0} ? upstream[i] : T{0};
    return dx;
  }

 private:
  Tensor<T> input_;
};

// ---------------------------------------------------------------------------

/// Max pooling with floor output extents: a trailing row/column that does
/// not fill a window is dropped (45 -> 22 for 2x2/2).
template <typename T>
class MaxPool2D final : public Layer<T> {
 public:
  explicit MaxPool2D(std::size_t pool = 2, std::size_t stride = 2) : pool_(pool), stride_(stride) {
    if (pool == 0 || stride == 0) throw InvalidArgument("MaxPool2D: pool and stride must be positive");
  }

  LayerKind kind() const override { return LayerKind::MaxPool2D; }
  std::size_t pool() const { return pool_; }
  std::size_t stride() const { return stride_; }

  Shape output_shape(const Shape& in) const override {
    detail::require_rank(in, 3, "MaxPool2D");
    if (in[0] < pool_ || in[1] < pool_) {
      throw ShapeError("MaxPool2D: input " + in.str() + " smaller than the " + std::to_string(pool_) + "x" +
                       std::to_string(pool_) + " window");
    }
    return Shape{(in[0] - pool_) / stride_ + 1, (in[1] - pool_) / stride_ + 1, in[2]};
  }

  Tensor<T> forward(const Tensor<T>& x, Mode, Rng&) override {
    Tensor<T> y = run_pool(x, &argmax_);
    input_shape_ = x.shape();
    output_shape_ = y.shape();
    return y;
  }

  Tensor<T> infer(const Tensor<T>& x) const override { return run_pool(x, nullptr); }

  Tensor<T> backward(const Tensor<T>& upstream) override {
    if (input_shape_.rank() == 0) throw StateError("MaxPool2D: backward called without a forward pass");
    detail::require_same(upstream.shape(), output_shape_, "MaxPool2D");
    Tensor<T> dx(input_shape_);
    for (std::size_t o = 0; o < upstream.size(); ++o) dx[argmax_[o]] += upstream[o];
    return dx;
  }

  /// Flat input offsets chosen by the last forward pass, one per output.
  const std::vector<std::size_t>& argmax() const { return argmax_; }

 private:
  // Ties go to the first element in row-major window order.
  Tensor<T> run_pool(const Tensor<T>& x, std::vector<std::size_t>* argmax) const {
    detail::require_rank(x.shape(), 4, "MaxPool2D");
    const Shape out_sample = output_shape(x.shape().tail());
    const std::size_t n = x.shape()[0], h = x.shape()[1], w = x.shape()[2], c = x.shape()[3];
    const std::size_t oh = out_sample[0], ow = out_sample[1];
    Tensor<T> y(out_sample.batched(n));
    if (argmax) argmax->assign(y.size(), 0);
    std::size_t o = 0;
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t base = s * h * w * c;
      for (std::size_t i = 0; i < oh; ++i) {
        for (std::size_t j = 0; j < ow; ++j) {
          for (std::size_t ch = 0; ch < c; ++ch, ++o) {
            std::size_t best = base + ((i * stride_) * w + j * stride_) * c + ch;
            for (std::size_t di = 0; di < pool_; ++di) {
              for (std::size_t dj = 0; dj < pool_; ++dj) {
                const std::size_t at = base + ((i * stride_ + di) * w + (j * stride_ + dj)) * c + ch;
                if (x[at] > x[best]) best = at;
              }
            }
            y[o] = x[best];
            if (argmax) (*argmax)[o] = best;
          }
        }
      }
    }
    return y;
  }

  std::size_t pool_, stride_;
  std::vector<std::size_t> argmax_;
  Shape input_shape_, output_shape_;
};

// ---------------------------------------------------------------------------

template <typename T>
class Flatten final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::Flatten; }
  Shape output_shape(const Shape& in) const override { return Shape{in.count()}; }

  Tensor<T> infer(const Tensor<T>& x) const override {
    if (x.shape().rank() < 2) throw ShapeError("Flatten: input needs a batch axis");
    return x.reshaped(Shape{x.shape()[0], x.size() / x.shape()[0]});
  }
  Tensor<T> forward(const Tensor<T>& x, Mode, Rng&) override {
    input_shape_ = x.shape();
    return infer(x);
  }
  Tensor<T> backward(const Tensor<T>& upstream) override {
    if (input_shape_.rank() == 0) throw StateError("Flatten: backward called without a forward pass");
    return upstream.reshaped(input_shape_);
  }

 private:
  Shape input_shape_;
};

// ---------------------------------------------------------------------------

/// y = x W + b with W stored [in, out].
template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(std::size_t in, std::size_t out) : in_(in), out_(out), weights_(Shape{in, out}), bias_(Shape{out}) {}

  LayerKind kind() const override { return LayerKind::Dense; }
  std::size_t units() const { return out_; }

  Shape output_shape(const Shape& in) const override {
    detail::require_rank(in, 1, "Dense");
    if (in[0] != in_) {
      throw ShapeError("Dense: input width " + std::to_string(in[0]) + ", expected " + std::to_string(in_));
    }
    return Shape{out_};
  }

  std::size_t param_count() const override { return (in_ + 1) * out_; }
  std::vector<Param<T>*> params() override { return {&weights_, &bias_}; }
  Param<T>& weights() { return weights_; }
  Param<T>& bias() { return bias_; }

  void initialize(Rng& rng) override {
    glorot_uniform(weights_.value, in_, out_, rng);
    bias_.value.fill(T{0});
  }

  Tensor<T> forward(const Tensor<T>& x, Mode, Rng&) override {
    Tensor<T> y = infer(x);
    input_ = x;
    return y;
  }

  Tensor<T> infer(const Tensor<T>& x) const override {
    detail::require_rank(x.shape(), 2, "Dense");
    output_shape(x.shape().tail());
    const std::size_t n = x.shape()[0];
    Tensor<T> y(Shape{n, out_});
    for (std::size_t s = 0; s < n; ++s) std::copy_n(bias_.value.data().data(), out_, y.data().data() + s * out_);
    gemm::nn(n, out_, in_, x.data().data(), weights_.value.data().data(), y.data().data(), true);
    require_finite(y, "Dense forward");
    return y;
  }

  Tensor<T> backward(const Tensor<T>& upstream) override {
    detail::require_cache(input_, "Dense");
    const std::size_t n = input_.shape()[0];
    detail::require_same(upstream.shape(), Shape{n, out_}, "Dense");
    gemm::tn(in_, out_, n, input_.data().data(), upstream.data().data(), weights_.grad.data().data(), true);
    T* gb = bias_.grad.data().data();
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t j = 0; j < out_; ++j) gb[j] += upstream[s * out_ + j];
    }
    Tensor<T> dx(input_.shape());
    gemm::nt(n, in_, out_, upstream.data().data(), weights_.value.data().data(), dx.data().data(), false);
    require_finite(dx, "Dense backward");
    return dx;
  }

 private:
  std::size_t in_, out_;
  Param<T> weights_, bias_;
  Tensor<T> input_;
};

// ---------------------------------------------------------------------------

/// Inverted dropout: in training each unit survives with probability
/// 1 - rate and is scaled by 1 / (1 - rate); inference is the identity.
template <typename T>
class Dropout final : public Layer<T> {
 public:
  explicit Dropout(double rate) : rate_(rate) {
    if (!(rate >= 0.0 && rate < 1.0)) throw InvalidArgument("Dropout: rate must lie in [0, 1)");
  }

  LayerKind kind() const override { return LayerKind::Dropout; }
  Shape output_shape(const Shape& in) const override { return in; }
  double rate() const { return rate_; }

  Tensor<T> infer(const Tensor<T>& x) const override { return x; }

  Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng& rng) override {
    input_shape_ = x.shape();
    if (mode == Mode::Infer || rate_ == 0.0) {
      mask_ = Tensor<T>();
      return x;
    }
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate_));
    mask_ = Tensor<T>(x.shape());
    Tensor<T> y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
      mask_[i] = rng.bernoulli(rate_) ? T{0} : keep_scale;
      y[i] = x[i] * mask_[i];
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& upstream) override {
    if (input_shape_.rank() == 0) throw StateError("Dropout: backward called without a forward pass");
    detail::require_same(upstream.shape(), input_shape_, "Dropout");
    if (mask_.empty()) return upstream;
    return hadamard(upstream, mask_);
  }

 private:
  double rate_;
  Tensor<T> mask_;
  Shape input_shape_;
};

// ---------------------------------------------------------------------------

/// Row-wise softmax over the last axis, max-shifted before exponentiation.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x) {
  require_finite(x, "softmax input");
  if (x.empty()) throw ShapeError("softmax of an empty tensor");
  const std::size_t k = x.shape()[x.shape().rank() - 1];
  Tensor<T> p(x.shape());
  for (std::size_t r = 0; r < x.size() / k; ++r) {
    const T* in = x.data().data() + r * k;
    T* out = p.data().data() + r * k;
    const T hi = *std::max_element(in, in + k);
    T total{0};
    for (std::size_t j = 0; j < k; ++j) {
      out[j] = std::exp(in[j] - hi);
      total += out[j];
    }
    for (std::size_t j = 0; j < k; ++j) out[j] /= total;
  }
  return p;
}

template <typename T>
class Softmax final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::Softmax; }
  Shape output_shape(const Shape& in) const override {
    detail::require_rank(in, 1, "Softmax");
    return in;
  }

  Tensor<T> infer(const Tensor<T>& x) const override {
    detail::require_rank(x.shape(), 2, "Softmax");
    return softmax(x);
  }
  Tensor<T> forward(const Tensor<T>& x, Mode, Rng&) override {
    output_ = infer(x);
    return output_;
  }

  /// Full Jacobian-vector product: dx = p * (g - <g, p>) per row.
  Tensor<T> backward(const Tensor<T>& upstream) override {
    detail::require_cache(output_, "Softmax");
    detail::require_same(upstream.shape(), output_.shape(), "Softmax");
    const std::size_t k = output_.shape()[1];
    Tensor<T> dx(output_.shape());
    for (std::size_t r = 0; r < output_.shape()[0]; ++r) {
      T dot{0};
      for (std::size_t j = 0; j < k; ++j) dot += upstream[r * k + j] * output_[r * k + j];
      for (std::size_t j = 0; j < k; ++j) dx[r * k + j] = output_[r * k + j] * (upstream[r * k + j] - dot);
    }
    return dx;
  }

 private:
  Tensor<T> output_;
};

}  // namespace kcr

#endif  // KCR_LAYERS_HPP
