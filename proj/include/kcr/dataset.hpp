#ifndef KCR_DATASET_HPP
#define KCR_DATASET_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "kcr/error.hpp"
#include "kcr/loss.hpp"
#include "kcr/pnm.hpp"
#include "kcr/rng.hpp"
#include "kcr/tensor.hpp"

namespace kcr {

struct Sample {
  Image image;  // [H, W, C]
  std::size_t label = 0;
  std::string source;
};

struct Dataset {
  std::vector<std::string> class_names;
  std::vector<Sample> samples;

  std::size_t num_classes() const { return class_names.size(); }
  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> n(class_names.size(), 0);
    for (const Sample& s : samples) n.at(s.label) += 1;
    return n;
  }
};

/// Bilinear resize with half-pixel centers; equal sizes are an exact copy.
inline Image resize_bilinear(const Image& src, std::size_t out_h, std::size_t out_w) {
  const std::size_t in_h = src.shape()[0], in_w = src.shape()[1], c = src.shape()[2];
  if (in_h == out_h && in_w == out_w) return src;
  Image out(Shape{out_h, out_w, c});
  const double sy = static_cast<double>(in_h) / static_cast<double>(out_h);
  const double sx = static_cast<double>(in_w) / static_cast<double>(out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(in_h - 1));
    const std::size_t y0 = static_cast<std::size_t>(fy), y1 = std::min(y0 + 1, in_h - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(in_w - 1));
      const std::size_t x0 = static_cast<std::size_t>(fx), x1 = std::min(x0 + 1, in_w - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double top = (1 - wx) * src.at(y0, x0, ch) + wx * src.at(y0, x1, ch);
        const double bot = (1 - wx) * src.at(y1, x0, ch) + wx * src.at(y1, x1, ch);
        out.at(y, x, ch) = static_cast<std::uint8_t>(std::clamp(std::lround((1 - wy) * top + wy * bot), 0L, 255L));
      }
    }
  }
  return out;
}

/// 1 -> 3 replicates gray; 3 -> 1 takes Rec.601 luma.
inline Image convert_channels(const Image& src, std::size_t channels) {
  const std::size_t c = src.shape()[2];
  if (c == channels) return src;
  const std::size_t h = src.shape()[0], w = src.shape()[1];
  Image out(Shape{h, w, channels});
  if (c == 1 && channels == 3) {
    for (std::size_t i = 0; i < h * w; ++i) out[3 * i] = out[3 * i + 1] = out[3 * i + 2] = src[i];
  } else if (c == 3 && channels == 1) {
    for (std::size_t i = 0; i < h * w; ++i) {
      out[i] = static_cast<std::uint8_t>(
          std::lround(0.299 * src[3 * i] + 0.587 * src[3 * i + 1] + 0.114 * src[3 * i + 2]));
    }
  } else {
    throw ShapeError("cannot convert " + std::to_string(c) + " channels to " + std::to_string(channels));
  }
  return out;
}

inline Image fit_image(const Image& img, const Shape& target) {
  return convert_channels(resize_bilinear(img, target[0], target[1]), target[2]);
}

struct LoadOptions {
  bool skip_undecodable = false;
};

/// Reads a directory-per-class tree. Classes are the subdirectory names in
/// byte (code point) order; files inside a class are read in name order;
/// hidden entries are ignored. Every image is fitted to `target` [H, W, C].
inline Dataset load_directory(const std::filesystem::path& root, const Shape& target, LoadOptions opts = {}) {
  namespace fs = std::filesystem;
  if (target.rank() != 3 || (target[2] != 1 && target[2] != 3)) {
    throw InvalidArgument("target shape must be [H, W, 1] or [H, W, 3], got " + target.str());
  }
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw DataError(root.string() + " is not a directory");
  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_directory() && !name.empty() && name[0] != '.') class_dirs.push_back(entry.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  if (class_dirs.size() < 2) {
    throw DataError(root.string() + ": need at least 2 class directories, found " + std::to_string(class_dirs.size()));
  }
  Dataset d;
  for (std::size_t label = 0; label < class_dirs.size(); ++label) {
    d.class_names.push_back(class_dirs[label].filename().string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(class_dirs[label])) {
      const std::string name = entry.path().filename().string();
      if (entry.is_regular_file() && !name.empty() && name[0] != '.') files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    std::size_t loaded = 0;
    for (const auto& f : files) {
      Image img;
      try {
        img = read_pnm(f);
      } catch (const DataError&) {
        if (opts.skip_undecodable) continue;
        throw;
      }
      d.samples.push_back(Sample{fit_image(img, target), label, f.string()});
      ++loaded;
    }
    if (loaded == 0) throw DataError(class_dirs[label].string() + ": class directory has no readable images");
  }
  return d;
}

struct SplitSpec {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
  std::uint64_t seed = 0;
};

struct Splits {
  Dataset train, val, test;
};

/// Per class: shuffle with the seed, then cut at floor(n*train) and
/// floor(n*(train+val)).
inline Splits split_stratified(const Dataset& d, const SplitSpec& s) {
  if (!(s.train > 0 && s.val > 0 && s.test > 0) || std::abs(s.train + s.val + s.test - 1.0) > 1e-9) {
    throw InvalidArgument("split fractions must be positive and sum to 1");
  }
  Splits out;
  out.train.class_names = out.val.class_names = out.test.class_names = d.class_names;
  std::vector<std::vector<std::size_t>> by_class(d.num_classes());
  for (std::size_t i = 0; i < d.samples.size(); ++i) by_class.at(d.samples[i].label).push_back(i);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    const std::size_t n = idx.size();
    // The epsilon keeps exact products such as 10 * 0.6 from landing a hair below the integer.
    const auto cut1 = static_cast<std::size_t>(std::floor(static_cast<double>(n) * s.train + 1e-9));
    const auto cut2 = static_cast<std::size_t>(std::floor(static_cast<double>(n) * (s.train + s.val) + 1e-9));
    if (cut1 == 0 || cut2 == cut1 || cut2 >= n) {
      throw DataError("class '" + d.class_names[c] + "' has " + std::to_string(n) +
                      " samples, too few to appear in every split");
    }
    Rng rng(Rng::mix(s.seed, c));
    rng.shuffle(std::span<std::size_t>(idx));
    for (std::size_t k = 0; k < n; ++k) {
      Dataset& dst = k < cut1 ? out.train : (k < cut2 ? out.val : out.test);
      dst.samples.push_back(d.samples[idx[k]]);
    }
  }
  return out;
}

template <typename T>
struct Batch {
  Tensor<T> images;  // [N, H, W, C], raw 0..255 values
  LabelBatch labels;
};

/// Index groups covering [0, n) once each; the last group may be short.
inline std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size, bool shuffle,
                                                           Rng& rng) {
  if (batch_size == 0) throw InvalidArgument("batch size must be at least 1");
  if (n == 0) throw InvalidArgument("cannot batch an empty dataset");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  if (shuffle) rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t lo = 0; lo < n; lo += batch_size) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(lo),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, lo + batch_size)));
  }
  return out;
}

/// Stacks the given samples. `transform`, when set, is applied per image.
template <typename T, typename Transform>
Batch<T> make_batch(const Dataset& d, std::span<const std::size_t> indices, Transform&& transform) {
  if (indices.empty()) throw InvalidArgument("empty batch");
  const Shape sample_shape = d.samples.at(indices[0]).image.shape();
  Batch<T> b{Tensor<T>(sample_shape.batched(indices.size())), {}};
  const std::size_t stride = sample_shape.count();
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const Sample& s = d.samples.at(indices[k]);
    if (s.image.shape() != sample_shape) throw ShapeError("dataset mixes image shapes");
    const Image img = transform(s.image);
    std::transform(img.data().begin(), img.data().end(), b.images.data().begin() + static_cast<std::ptrdiff_t>(k * stride),
                   [](std::uint8_t v) { return static_cast<T>(v); });
    b.labels.push_back(s.label);
  }
  return b;
}

template <typename T>
Batch<T> make_batch(const Dataset& d, std::span<const std::size_t> indices) {
  return make_batch<T>(d, indices, [](const Image& img) -> const Image& { return img; });
}

/// Whole epoch of batches at once; convenient for small sets.
template <typename T = float>
std::vector<Batch<T>> batches(const Dataset& d, std::size_t batch_size, bool shuffle, Rng& rng) {
  std::vector<Batch<T>> out;
  for (const auto& idx : batch_indices(d.size(), batch_size, shuffle, rng)) out.push_back(make_batch<T>(d, idx));
  return out;
}

}  // namespace kcr

#endif  // KCR_DATASET_HPP
