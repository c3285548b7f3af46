#ifndef KCR_TOOLS_CLI_HPP
#define KCR_TOOLS_CLI_HPP

// Command-line front end: synth, train, eval, predict, summary.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime or
// numerical error.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <optional>
#include <regex>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "kcr/kcr.hpp"

namespace kcr::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kRuntime = 3 };

class UsageError : public Error {
 public:
  using Error::Error;
};

/// "32x32" -> {32, 32}; "180x180x3" -> {180, 180, 3}.
inline std::vector<std::size_t> parse_dims(const std::string& text, std::size_t count, const char* flag) {
  std::vector<std::size_t> dims;
  std::size_t start = 0;
  while (true) {
    const std::size_t x = text.find('x', start);
    const std::string part = text.substr(start, x == std::string::npos ? std::string::npos : x - start);
    if (part.empty() || part.find_first_not_of("0123456789") != std::string::npos || part.size() > 6) {
      throw UsageError(std::string(flag) + ": expected dimensions like " + (count == 2 ? "32x32" : "32x32x1") +
                       ", got '" + text + "'");
    }
    dims.push_back(std::stoul(part));
    if (dims.back() == 0) throw UsageError(std::string(flag) + ": dimensions must be positive");
    if (x == std::string::npos) break;
    start = x + 1;
  }
  if (dims.size() != count) {
    throw UsageError(std::string(flag) + ": expected " + std::to_string(count) + " dimensions, got '" + text + "'");
  }
  return dims;
}

inline bool parse_switch(const std::string& v, const char* flag) {
  if (v == "on") return true;
  if (v == "off") return false;
  throw UsageError(std::string(flag) + ": expected on|off, got '" + v + "'");
}

inline unsigned default_threads() {
  if (const char* env = std::getenv("KCR_THREADS")) {
    try {
      const long n = std::stol(env);
      if (n >= 1) return static_cast<unsigned>(n);
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Either DIR/{train,val,test} as given, or DIR split 60/20/20 by `seed`.
inline Splits load_splits(const std::filesystem::path& dir, const Shape& input, std::uint64_t seed) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (fs::is_directory(dir / "train", ec) && fs::is_directory(dir / "val", ec) && fs::is_directory(dir / "test", ec)) {
    Splits s{load_directory(dir / "train", input), load_directory(dir / "val", input),
             load_directory(dir / "test", input)};
    if (s.val.class_names != s.train.class_names || s.test.class_names != s.train.class_names) {
      throw DataError(dir.string() + ": train/val/test class directories differ");
    }
    return s;
  }
  SplitSpec spec;
  spec.seed = seed;
  return split_stratified(load_directory(dir, input), spec);
}

struct TrainOptions {
  std::string data, input = "180x180x3", out, metrics, arch = "canonical";
  std::size_t epochs = 5, batch = 32, patience = 5, dense = 512;
  double lr = 1e-3, dropout = 0.2, min_delta = 0.0;
  std::uint64_t seed = 42;
  std::string augment = "on", early_stop = "off", timing = "on";
};

inline int cmd_train(const TrainOptions& o, std::ostream& out) {
  const auto dims = parse_dims(o.input, 3, "--input");
  if (dims[2] != 1 && dims[2] != 3) throw UsageError("--input: channel count must be 1 or 3");
  if (o.epochs == 0) throw UsageError("--epochs must be at least 1");
  if (o.batch == 0) throw UsageError("--batch must be at least 1");
  if (!(o.lr > 0)) throw UsageError("--lr must be positive");
  if (o.patience == 0) throw UsageError("--patience must be at least 1");
  if (!(o.dropout >= 0 && o.dropout < 1)) throw UsageError("--dropout must lie in [0, 1)");
  const bool augment_on = parse_switch(o.augment, "--augment");
  const bool early = parse_switch(o.early_stop, "--early-stop");
  const bool timing = parse_switch(o.timing, "--timing");
  const Shape input{dims[0], dims[1], dims[2]};

  Splits s = load_splits(o.data, input, o.seed);
  ModelConfig cfg;
  if (o.arch == "canonical") {
    cfg = canonical_config(input, s.train.num_classes(), o.dense, o.dropout);
  } else if (o.arch == "three-block") {
    cfg = three_block_config(input, s.train.num_classes(), o.dense, o.dropout);
  } else {
    throw UsageError("--arch: expected canonical|three-block, got '" + o.arch + "'");
  }
  cfg.class_names = s.train.class_names;
  SequentialModel<float> model = [&] {
    try {
      return SequentialModel<float>::build(cfg, o.seed);
    } catch (const ShapeError& e) {
      throw UsageError(std::string("--input too small for --arch ") + o.arch + ": " + e.what());
    }
  }();

  TrainConfig tc;
  tc.epochs = o.epochs;
  tc.batch_size = o.batch;
  tc.adam.lr = o.lr;
  tc.augment.enabled = augment_on;
  tc.seed = o.seed;
  tc.early_stopping.enabled = early;
  tc.early_stopping.patience = o.patience;
  tc.early_stopping.min_delta = o.min_delta;
  tc.checkpoint_path = o.out;
  tc.record_time = timing;
  tc.on_epoch = [&out](const MetricsRow& r) {
    char line[160];
    std::snprintf(line, sizeof line, "epoch %zu  loss %.4f  acc %.4f  val_loss %.4f  val_acc %.4f\n", r.epoch,
                  r.train_loss, r.train_acc, r.val_loss, r.val_acc);
    out << line << std::flush;
  };
  out << "train " << s.train.size() << ", val " << s.val.size() << ", test " << s.test.size() << " samples, "
      << s.train.num_classes() << " classes\n";
  const TrainResult r = train(model, s.train, s.val, tc);
  if (!o.metrics.empty()) write_metrics_csv(o.metrics, r.history);
  out << "best epoch " << r.best_epoch << (r.stopped_early ? " (stopped early)" : "") << ", checkpoint " << o.out
      << '\n';
  return kOk;
}

struct EvalOptions {
  std::string model, data, report, confusion;
  std::size_t top = 10;
  std::uint64_t seed = 42, shuffle_seed = 0;
};

inline void write_text(const std::string& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline int cmd_eval(const EvalOptions& o, std::ostream& out) {
  if (o.top == 0) throw UsageError("--top must be at least 1");
  SequentialModel<float> model = load_checkpoint(o.model);
  Dataset test = load_splits(o.data, model.config().input_shape, o.seed).test;
  const auto& names = model.config().class_names;
  if (test.num_classes() != model.num_classes() || (!names.empty() && names != test.class_names)) {
    throw DataError("classes in " + o.data + " do not match the model's classes");
  }
  const EvalReport r = evaluate(model, test, o.shuffle_seed, o.top);
  if (!o.report.empty()) write_text(o.report, report_json(r).dump(2) + "\n");
  if (!o.confusion.empty()) write_text(o.confusion, confusion_csv(r.confusion));
  char line[128];
  std::snprintf(line, sizeof line, "accuracy %.4f (%zu of %zu wrong)\n", r.overall_accuracy, r.num_wrong,
                r.confusion.total());
  out << line;
  for (const auto& p : r.top_pairs) {
    out << "  " << test.class_names[p.true_class] << " -> " << test.class_names[p.predicted_class] << ": " << p.count
        << '\n';
  }
  return kOk;
}

inline int cmd_predict(const std::string& model_path, const std::string& image, std::size_t top, std::ostream& out) {
  if (top == 0) throw UsageError("--top must be at least 1");
  SequentialModel<float> model = load_checkpoint(model_path);
  const Shape& in = model.config().input_shape;
  const Image img = fit_image(read_pnm(image), in);
  const Tensor<float> probs = model.predict(img.cast<float>().reshaped(in.batched(1)));
  std::vector<std::size_t> order(model.num_classes());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  const auto& names = model.config().class_names;
  for (std::size_t i = 0; i < std::min(top, order.size()); ++i) {
    const std::size_t c = order[i];
    char p[32];
    std::snprintf(p, sizeof p, "%.9f", static_cast<double>(probs[c]));
    out << (names.empty() ? std::to_string(c) : names[c]) << '\t' << p << '\n';
  }
  return kOk;
}

struct SynthOptions {
  std::size_t classes = 10, per_class = 50;
  std::string size = "32x32", out;
  std::uint64_t seed = 42;
};

inline int cmd_synth(const SynthOptions& o, std::ostream& out) {
  const auto dims = parse_dims(o.size, 2, "--size");
  if (o.classes < 2 || o.classes > kMaxSynthClasses) throw UsageError("--classes must lie in [2, 35]");
  if (o.per_class < 3) throw UsageError("--per-class must be at least 3");
  if (dims[0] < 8 || dims[1] < 8) throw UsageError("--size must be at least 8x8");
  const std::size_t n = synth_generate(o.classes, o.per_class, dims[0], dims[1], o.seed, o.out);
  out << "wrote " << n << " images to " << o.out << '\n';
  return kOk;
}

/// Parses argv and runs one subcommand. Never throws.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Isolated handwritten character recognition with a small CNN", "kcr"};
  app.require_subcommand(1);
  app.fallthrough();
  unsigned threads = default_threads();
  app.add_option("--threads", threads, "Worker threads (default $KCR_THREADS or all cores); 1 = reference path")
      ->check(CLI::PositiveNumber);

  SynthOptions so;
  auto* synth = app.add_subcommand("synth", "Write a synthetic glyph corpus (PGM, one directory per class)");
  synth->add_option("--classes", so.classes, "Number of classes (2-35)")->capture_default_str();
  synth->add_option("--per-class", so.per_class, "Images per class")->capture_default_str();
  synth->add_option("--size", so.size, "Image size HxW")->capture_default_str();
  synth->add_option("--seed", so.seed, "Random seed")->capture_default_str();
  synth->add_option("--out", so.out, "Output directory")->required();

  TrainOptions to;
  auto* tr = app.add_subcommand("train", "Train a model and write the best checkpoint");
  tr->add_option("--data", to.data, "Class-per-directory tree, or a directory holding train/ val/ test/")
      ->required();
  tr->add_option("--input", to.input, "Model input HxWxC")->capture_default_str();
  tr->add_option("--epochs", to.epochs, "Epochs")->capture_default_str();
  tr->add_option("--batch", to.batch, "Batch size")->capture_default_str();
  tr->add_option("--lr", to.lr, "Adam learning rate")->capture_default_str();
  tr->add_option("--seed", to.seed, "Seed for init, split, shuffling, augmentation and dropout")
      ->capture_default_str();
  tr->add_option("--augment", to.augment, "on|off")->capture_default_str();
  tr->add_option("--early-stop", to.early_stop, "on|off")->capture_default_str();
  tr->add_option("--patience", to.patience, "Early-stopping patience in epochs")->capture_default_str();
  tr->add_option("--min-delta", to.min_delta, "Minimum val-loss improvement")->capture_default_str();
  tr->add_option("--arch", to.arch, "canonical|three-block")->capture_default_str();
  tr->add_option("--dense", to.dense, "Units in the hidden dense layer")->capture_default_str();
  tr->add_option("--dropout", to.dropout, "Dropout rate after the hidden dense layer")->capture_default_str();
  tr->add_option("--timing", to.timing, "on|off; off writes 0 in the seconds column")->capture_default_str();
  tr->add_option("--out", to.out, "Checkpoint path (.kcm)")->required();
  tr->add_option("--metrics", to.metrics, "Per-epoch metrics CSV");

  EvalOptions eo;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  ev->add_option("--model", eo.model, "Checkpoint (.kcm)")->required();
  ev->add_option("--data", eo.data, "Same layout as for train")->required();
  ev->add_option("--report", eo.report, "JSON report path");
  ev->add_option("--confusion", eo.confusion, "Confusion matrix CSV path");
  ev->add_option("--top", eo.top, "Number of misclassification pairs to list")->capture_default_str();
  ev->add_option("--seed", eo.seed, "Split seed (must match training)")->capture_default_str();
  ev->add_option("--shuffle-seed", eo.shuffle_seed, "Order in which test samples are visited")
      ->capture_default_str();

  std::string pm, pi;
  std::size_t ptop = 5;
  auto* pr = app.add_subcommand("predict", "Print the top-K classes for one image");
  pr->add_option("--model", pm, "Checkpoint (.kcm)")->required();
  pr->add_option("--image", pi, "PGM/PPM image")->required();
  pr->add_option("--top", ptop, "How many classes to print")->capture_default_str();

  std::string sm;
  auto* su = app.add_subcommand("summary", "Print the layer table of a checkpoint");
  su->add_option("--model", sm, "Checkpoint (.kcm)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  try {
    set_num_threads(threads);
    if (*synth) return cmd_synth(so, out);
    if (*tr) return cmd_train(to, out);
    if (*ev) return cmd_eval(eo, out);
    if (*pr) return cmd_predict(pm, pi, ptop, out);
    if (*su) {
      out << load_checkpoint(sm).summary();
      return kOk;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const InvalidArgument& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}

}  // namespace kcr::cli

#endif  // KCR_TOOLS_CLI_HPP
