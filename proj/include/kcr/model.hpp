#ifndef KCR_MODEL_HPP
#define KCR_MODEL_HPP

#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "kcr/error.hpp"
#include "kcr/layers.hpp"
#include "kcr/loss.hpp"
#include "kcr/rng.hpp"
#include "kcr/tensor.hpp"

namespace kcr {

/// Declarative description of one layer. Only the fields relevant to
/// `kind` are read.
struct LayerSpec {
  LayerKind kind = LayerKind::ReLU;
  std::size_t filters = 0;  // Conv2D
  std::size_t kernel = 3;   // Conv2D (square)
  std::size_t stride = 1;   // Conv2D, MaxPool2D
  Padding padding = Padding::Same;
  std::size_t pool = 2;     // MaxPool2D
  std::size_t units = 0;    // Dense
  double rate = 0.0;        // Dropout
  double scale = 1.0 / 255.0;  // Rescaling

  static LayerSpec rescaling(double factor = 1.0 / 255.0) {
    LayerSpec s;
    s.kind = LayerKind::Rescaling;
    s.scale = factor;
    return s;
  }
  static LayerSpec conv(std::size_t filters, std::size_t kernel = 3, std::size_t stride = 1,
                        Padding padding = Padding::Same) {
    LayerSpec s;
    s.kind = LayerKind::Conv2D;
    s.filters = filters;
    s.kernel = kernel;
    s.stride = stride;
    s.padding = padding;
    return s;
  }
  static LayerSpec maxpool(std::size_t pool = 2, std::size_t stride = 2) {
    LayerSpec s;
    s.kind = LayerKind::MaxPool2D;
    s.pool = pool;
    s.stride = stride;
    return s;
  }
  static LayerSpec relu() { return LayerSpec{}; }
  static LayerSpec flatten() {
    LayerSpec s;
    s.kind = LayerKind::Flatten;
    return s;
  }
  static LayerSpec dense(std::size_t units) {
    LayerSpec s;
    s.kind = LayerKind::Dense;
    s.units = units;
    return s;
  }
  static LayerSpec dropout(double rate) {
    LayerSpec s;
    s.kind = LayerKind::Dropout;
    s.rate = rate;
    return s;
  }
  static LayerSpec softmax() {
    LayerSpec s;
    s.kind = LayerKind::Softmax;
    return s;
  }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct ModelConfig {
  Shape input_shape;  // [H, W, C]
  std::vector<LayerSpec> layers;
  std::size_t num_classes = 0;
  /// Optional display names, one per class when present.
  std::vector<std::string> class_names;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Rescaling(1/255), then per filter count Conv2D(3x3, same) + ReLU +
/// MaxPool(2x2), Flatten, Dense(dense_units) + ReLU, Dropout, Dense(K),
/// Softmax.
inline ModelConfig conv_stack_config(Shape input, std::size_t num_classes, const std::vector<std::size_t>& filters,
                                     std::size_t dense_units = 512, double dropout = 0.2) {
  ModelConfig c;
  c.input_shape = std::move(input);
  c.num_classes = num_classes;
  c.layers.push_back(LayerSpec::rescaling());
  for (std::size_t f : filters) {
    c.layers.push_back(LayerSpec::conv(f));
    c.layers.push_back(LayerSpec::relu());
    c.layers.push_back(LayerSpec::maxpool());
  }
  c.layers.push_back(LayerSpec::flatten());
  c.layers.push_back(LayerSpec::dense(dense_units));
  c.layers.push_back(LayerSpec::relu());
  c.layers.push_back(LayerSpec::dropout(dropout));
  c.layers.push_back(LayerSpec::dense(num_classes));
  c.layers.push_back(LayerSpec::softmax());
  return c;
}

/// Four conv blocks of 8/16/32/64 filters (the reference model summary).
inline ModelConfig canonical_config(Shape input, std::size_t num_classes, std::size_t dense_units = 512,
                                    double dropout = 0.2) {
  return conv_stack_config(std::move(input), num_classes, {8, 16, 32, 64}, dense_units, dropout);
}

/// Three conv blocks of 16/32/64 filters.
inline ModelConfig three_block_config(Shape input, std::size_t num_classes, std::size_t dense_units = 512,
                                      double dropout = 0.2) {
  return conv_stack_config(std::move(input), num_classes, {16, 32, 64}, dense_units, dropout);
}

template <typename T>
class SequentialModel {
 public:
  /// Validates the config, infers every layer's output shape and draws
  /// Glorot-uniform weights from `seed` (biases zero).
  static SequentialModel build(const ModelConfig& config, std::uint64_t seed) {
    SequentialModel m(config);
    Rng rng(seed);
    for (auto& layer : m.layers_) layer->initialize(rng);
    return m;
  }

  SequentialModel(SequentialModel&&) noexcept = default;
  SequentialModel& operator=(SequentialModel&&) noexcept = default;

  const ModelConfig& config() const { return config_; }
  std::size_t num_classes() const { return config_.num_classes; }
  std::size_t size() const { return layers_.size(); }
  Layer<T>& layer(std::size_t i) { return *layers_.at(i); }
  const Layer<T>& layer(std::size_t i) const { return *layers_.at(i); }
  const std::vector<Shape>& output_shapes() const { return shapes_; }
  const std::vector<std::string>& layer_names() const { return names_; }

  std::size_t total_params() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l->param_count();
    return n;
  }

  /// Every learnable tensor, layer order, kernel/weights before bias.
  std::vector<Param<T>*> params() {
    std::vector<Param<T>*> out;
    for (auto& l : layers_) {
      for (Param<T>* p : l->params()) out.push_back(p);
    }
    return out;
  }

  void zero_grad() {
    for (Param<T>* p : params()) p->grad.fill(T{0});
  }

  std::vector<Tensor<T>> snapshot() {
    std::vector<Tensor<T>> out;
    for (Param<T>* p : params()) out.push_back(p->value);
    return out;
  }

  void restore(const std::vector<Tensor<T>>& values) {
    auto ps = params();
    if (values.size() != ps.size()) throw StateError("restore: parameter count mismatch");
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (values[i].shape() != ps[i]->value.shape()) throw StateError("restore: parameter shape mismatch");
      ps[i]->value = values[i];
    }
  }

  /// Class probabilities [N, K] for a batch [N, H, W, C]. Caches what
  /// backward needs.
  Tensor<T> forward(const Tensor<T>& batch, Mode mode, Rng& rng) {
    check_batch(batch);
    Tensor<T> x = batch;
    for (auto& l : layers_) {
      x = l->forward(x, mode, rng);
      require_finite(x, "forward");
    }
    probs_ = x;
    return x;
  }

  /// Inference without touching caches; concurrent calls are safe as long
  /// as nobody trains this instance at the same time.
  Tensor<T> predict(const Tensor<T>& batch) const {
    check_batch(batch);
    Tensor<T> x = batch;
    for (const auto& l : layers_) {
      x = l->infer(x);
      require_finite(x, "predict");
    }
    return x;
  }

  /// Backpropagates the mean sparse cross-entropy of the last forward pass.
  /// The softmax head is skipped using the fused (p - onehot) / N logit
  /// gradient.
  void backward(std::span<const std::size_t> labels) {
    if (probs_.empty()) throw StateError("backward: no cached forward pass");
    Tensor<T> g = sparse_cce_grad_logits(probs_, labels);
    propagate(std::move(g), layers_.size() - 1);
  }

  /// Backpropagates an arbitrary gradient with respect to the output
  /// probabilities, through the softmax Jacobian.
  void backward_from_probs(const Tensor<T>& prob_grad) {
    if (probs_.empty()) throw StateError("backward: no cached forward pass");
    propagate(prob_grad, layers_.size());
  }

  /// Keras-style text table: name (type), output shape, param count.
  std::string summary() const {
    std::vector<std::string> col1, col2, col3;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      col1.push_back(names_[i] + " (" + kind_name(layers_[i]->kind()) + ")");
      col2.push_back(batched_shape(shapes_[i]));
      col3.push_back(std::to_string(layers_[i]->param_count()));
    }
    std::size_t w1 = 12, w2 = 12;
    for (const auto& s : col1) w1 = std::max(w1, s.size());
    for (const auto& s : col2) w2 = std::max(w2, s.size());
    w1 += 3;
    w2 += 3;
    const std::size_t width = w1 + w2 + 10;
    std::ostringstream os;
    os << "Model: \"sequential\"\n" << std::string(width, '_') << '\n';
    os << std::left << std::setw(static_cast<int>(w1)) << "Layer (type)" << std::setw(static_cast<int>(w2))
       << "Output Shape" << "Param #\n";
    os << std::string(width, '=') << '\n';
    for (std::size_t i = 0; i < col1.size(); ++i) {
      os << std::left << std::setw(static_cast<int>(w1)) << col1[i] << std::setw(static_cast<int>(w2)) << col2[i]
         << col3[i] << '\n';
      os << std::string(width, i + 1 == col1.size() ? '=' : '_') << '\n';
    }
    const std::string total = thousands(total_params());
    os << "Total params: " << total << '\n';
    os << "Trainable params: " << total << '\n';
    os << "Non-trainable params: 0\n";
    os << std::string(width, '_') << '\n';
    return os.str();
  }

 private:
  explicit SequentialModel(const ModelConfig& config) : config_(config) {
    if (config_.input_shape.rank() != 3) throw InvalidArgument("model input shape must be [H, W, C]");
    if (config_.num_classes < 2) throw InvalidArgument("model needs at least 2 classes");
    if (!config_.class_names.empty() && config_.class_names.size() != config_.num_classes) {
      throw InvalidArgument("class name list does not match the class count");
    }
    if (config_.layers.empty() || config_.layers.back().kind != LayerKind::Softmax) {
      throw InvalidArgument("the final layer must be Softmax");
    }
    std::map<std::string, int> seen;
    Shape shape = config_.input_shape;
    for (const LayerSpec& spec : config_.layers) {
      auto layer = make_layer(spec, shape);
      shape = layer->output_shape(shape);
      shapes_.push_back(shape);
      const std::string base = base_name(spec.kind);
      const int n = seen[base]++;
      names_.push_back(n == 0 ? base : base + "_" + std::to_string(n));
      layers_.push_back(std::move(layer));
    }
    if (shape != Shape{config_.num_classes}) {
      throw ShapeError("model output " + shape.str() + " does not match " + std::to_string(config_.num_classes) +
                       " classes");
    }
  }

  static std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, const Shape& in) {
    switch (spec.kind) {
      case LayerKind::Rescaling:
        return std::make_unique<Rescaling<T>>(static_cast<T>(spec.scale));
      case LayerKind::Conv2D:
        if (in.rank() != 3) throw ShapeError("Conv2D needs a [H, W, C] input, got " + in.str());
        if (spec.filters == 0 || spec.kernel == 0) throw InvalidArgument("Conv2D needs filters and kernel >= 1");
        return std::make_unique<Conv2D<T>>(spec.kernel, spec.kernel, in[2], spec.filters, spec.stride,
                                           spec.padding);
      case LayerKind::MaxPool2D:
        return std::make_unique<MaxPool2D<T>>(spec.pool, spec.stride);
      case LayerKind::ReLU:
        return std::make_unique<ReLU<T>>();
      case LayerKind::Flatten:
        return std::make_unique<Flatten<T>>();
      case LayerKind::Dense:
        if (in.rank() != 1) throw ShapeError("Dense needs a flat input, got " + in.str());
        if (spec.units == 0) throw InvalidArgument("Dense needs units >= 1");
        return std::make_unique<Dense<T>>(in[0], spec.units);
      case LayerKind::Dropout:
        return std::make_unique<Dropout<T>>(spec.rate);
      case LayerKind::Softmax:
        return std::make_unique<Softmax<T>>();
    }
    throw InvalidArgument("unknown layer kind");
  }

  static std::string base_name(LayerKind k) {
    switch (k) {
      case LayerKind::Rescaling: return "rescaling";
      case LayerKind::Conv2D: return "conv2d";
      case LayerKind::MaxPool2D: return "max_pooling2d";
      case LayerKind::ReLU: return "re_lu";
      case LayerKind::Flatten: return "flatten";
      case LayerKind::Dense: return "dense";
      case LayerKind::Dropout: return "dropout";
      case LayerKind::Softmax: return "softmax";
    }
    return "layer";
  }

  static std::string batched_shape(const Shape& s) {
    std::string out = "(None";
    for (std::size_t d : s.dims()) out += ", " + std::to_string(d);
    return out + ")";
  }

  static std::string thousands(std::size_t n) {
    std::string digits = std::to_string(n), out;
    for (std::size_t i = 0; i < digits.size(); ++i) {
      if (i && (digits.size() - i) % 3 == 0) out += ',';
      out += digits[i];
    }
    return out;
  }

  void check_batch(const Tensor<T>& batch) const {
    if (batch.shape().rank() != 4 || batch.shape().tail() != config_.input_shape) {
      throw ShapeError("batch " + batch.shape().str() + " does not match model input " +
                       config_.input_shape.str());
    }
  }

  // Runs backward through layers [0, end) starting from gradient g.
  void propagate(Tensor<T> g, std::size_t end) {
    for (std::size_t i = end; i-- > 0;) g = layers_[i]->backward(g);
  }

  ModelConfig config_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
  std::vector<Shape> shapes_;
  std::vector<std::string> names_;
  Tensor<T> probs_;
};

}  // namespace kcr

#endif  // KCR_MODEL_HPP
