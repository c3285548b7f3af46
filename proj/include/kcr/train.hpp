#ifndef KCR_TRAIN_HPP
#define KCR_TRAIN_HPP

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kcr/augment.hpp"
#include "kcr/checkpoint.hpp"
#include "kcr/dataset.hpp"
#include "kcr/error.hpp"
#include "kcr/loss.hpp"
#include "kcr/model.hpp"
#include "kcr/optim.hpp"

namespace kcr {

struct EarlyStopping {
  bool enabled = false;
  std::size_t patience = 5;
  double min_delta = 0.0;
  bool restore_best = true;
};

struct MetricsRow {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0, train_acc = 0, val_loss = 0, val_acc = 0;
  double seconds = 0;
};

struct TrainConfig {
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  AdamSettings adam;
  AugmentParams augment;
  std::uint64_t seed = 0;
  EarlyStopping early_stopping;
  /// Best-validation-loss weights are written here when non-empty.
  std::filesystem::path checkpoint_path;
  /// When false the seconds column is written as 0 (byte-reproducible logs).
  bool record_time = true;
  std::function<void(const MetricsRow&)> on_epoch;
};

struct TrainResult {
  std::vector<MetricsRow> history;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

struct StopDecision {
  bool stop = false;
  std::size_t best_epoch = 0;  // 1-based, earliest minimum of val_loss
};

/// Stop once val_loss has gone `patience` consecutive epochs without
/// beating the best value so far by more than `min_delta`.
inline StopDecision early_stop_check(std::span<const MetricsRow> history, std::size_t patience, double min_delta) {
  if (history.empty()) throw InvalidArgument("early_stop_check: empty history");
  if (patience == 0) throw InvalidArgument("early_stop_check: patience must be >= 1");
  StopDecision d;
  double reference = history[0].val_loss, best = history[0].val_loss;
  std::size_t since = 0;
  d.best_epoch = history[0].epoch;
  for (std::size_t i = 1; i < history.size(); ++i) {
    const double v = history[i].val_loss;
    if (reference - v > min_delta) {
      reference = v;
      since = 0;
    } else {
      ++since;
    }
    if (v < best) {
      best = v;
      d.best_epoch = history[i].epoch;
    }
  }
  d.stop = since >= patience;
  return d;
}

struct LossAccuracy {
  double loss = 0, accuracy = 0;
};

/// Mean loss and accuracy over a dataset in inference mode.
template <typename T>
LossAccuracy evaluate_loss(const SequentialModel<T>& model, const Dataset& d, std::size_t batch_size = 64) {
  Rng unused(0);
  double loss = 0;
  std::size_t correct = 0;
  for (const auto& idx : batch_indices(d.size(), batch_size, false, unused)) {
    const Batch<T> b = make_batch<T>(d, idx);
    const Tensor<T> probs = model.predict(b.images);
    loss += sparse_cce(probs, b.labels).value * static_cast<double>(idx.size());
    const auto pred = argmax_last_axis(probs);
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == b.labels[i];
  }
  return {loss / static_cast<double>(d.size()), static_cast<double>(correct) / static_cast<double>(d.size())};
}

/// Trains with Adam on mean sparse cross-entropy. Each epoch reshuffles
/// with a stream derived from (seed, epoch); augmentation and dropout draw
/// from the same stream. Train metrics are sample-weighted means over the
/// epoch's batches; validation runs in inference mode, never augmented.
template <typename T>
TrainResult train(SequentialModel<T>& model, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& cfg) {
  if (cfg.epochs == 0) throw InvalidArgument("train: epochs must be >= 1");
  if (cfg.batch_size == 0) throw InvalidArgument("train: batch size must be >= 1");
  if (train_set.empty() || val_set.empty()) throw InvalidArgument("train: training and validation sets must be non-empty");
  if (cfg.early_stopping.enabled && cfg.early_stopping.patience == 0) {
    throw InvalidArgument("train: patience must be >= 1");
  }
  for (const Dataset* d : {&train_set, &val_set}) {
    if (d->samples.front().image.shape() != model.config().input_shape) {
      throw ShapeError("train: images " + d->samples.front().image.shape().str() + " do not match model input " +
                       model.config().input_shape.str());
    }
  }
  if (cfg.augment.enabled) cfg.augment.validate();

  Adam<T> adam(cfg.adam);
  TrainResult result;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<Tensor<T>> best_weights;
  model.zero_grad();

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    Rng rng(Rng::mix(cfg.seed, epoch));
    const auto groups = batch_indices(train_set.size(), cfg.batch_size, true, rng);
    double loss_sum = 0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < groups.size(); ++b) {
      const Batch<T> batch = make_batch<T>(train_set, groups[b], [&](const Image& img) {
        return cfg.augment.enabled ? augment(img, cfg.augment, rng) : img;
      });
      try {
        const Tensor<T> probs = model.forward(batch.images, Mode::Train, rng);
        const LossValue loss = sparse_cce(probs, batch.labels);
        loss_sum += loss.value * static_cast<double>(groups[b].size());
        const auto pred = argmax_last_axis(probs);
        for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == batch.labels[i];
        model.backward(batch.labels);
        auto params = model.params();
        adam.step(params);
      } catch (const NumericError& e) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b + 1) + ": " + e.what());
      }
    }
    MetricsRow row;
    row.epoch = epoch;
    row.train_loss = loss_sum / static_cast<double>(train_set.size());
    row.train_acc = static_cast<double>(correct) / static_cast<double>(train_set.size());
    const LossAccuracy val = evaluate_loss(model, val_set);
    row.val_loss = val.loss;
    row.val_acc = val.accuracy;
    if (cfg.record_time) {
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    }
    result.history.push_back(row);

    if (row.val_loss < best_val) {
      best_val = row.val_loss;
      result.best_epoch = epoch;
      best_weights = model.snapshot();
      if (!cfg.checkpoint_path.empty()) save_checkpoint(model, cfg.checkpoint_path);
    }
    if (cfg.on_epoch) cfg.on_epoch(row);

    if (cfg.early_stopping.enabled) {
      const auto d = early_stop_check(result.history, cfg.early_stopping.patience, cfg.early_stopping.min_delta);
      if (d.stop) {
        result.stopped_early = true;
        break;
      }
    }
  }
  if (cfg.early_stopping.enabled && cfg.early_stopping.restore_best && !best_weights.empty()) {
    model.restore(best_weights);
  }
  return result;
}

inline std::string metrics_csv(std::span<const MetricsRow> rows) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << "epoch,train_loss,train_acc,val_loss,val_acc,seconds\n";
  os << std::fixed;
  for (const MetricsRow& r : rows) {
    os << r.epoch << ',' << std::setprecision(6) << r.train_loss << ',' << r.train_acc << ',' << r.val_loss << ','
       << r.val_acc << ',' << std::setprecision(3) << r.seconds << '\n';
  }
  return os.str();
}

inline void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRow> rows) {
  const std::string text = metrics_csv(rows);
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace kcr

#endif  // KCR_TRAIN_HPP
