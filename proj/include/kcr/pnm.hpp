#ifndef KCR_PNM_HPP
#define KCR_PNM_HPP

#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "kcr/error.hpp"
#include "kcr/tensor.hpp"

namespace kcr {

/// 8-bit image, [H, W, C], values in [0, 255].
using Image = Tensor<std::uint8_t>;

namespace detail {

class PnmHeaderReader {
 public:
  explicit PnmHeaderReader(std::span<const std::uint8_t> bytes) : b_(bytes) {}

  std::size_t number(const char* what) {
    skip_space_and_comments();
    if (pos_ >= b_.size()) throw DataError(std::string("PNM: truncated header (missing ") + what + ")");
    if (!std::isdigit(b_[pos_])) throw DataError(std::string("PNM: malformed header (bad ") + what + ")");
    std::size_t v = 0;
    while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
      v = v * 10 + static_cast<std::size_t>(b_[pos_] - '0');
      if (v > (1u << 24)) throw DataError(std::string("PNM: malformed header (") + what + " too large)");
      ++pos_;
    }
    return v;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_start() {
    if (pos_ >= b_.size()) throw DataError("PNM: truncated header");
    if (!std::isspace(b_[pos_])) throw DataError("PNM: malformed header (no separator before raster)");
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      if (std::isspace(b_[pos_])) {
        ++pos_;
      } else if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n' && b_[pos_] != '\r') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 2;
};

}  // namespace detail

/// Decodes binary PGM (P5, one channel) or PPM (P6, three channels).
/// Samples are rescaled to [0, 255] when maxval is below 255.
inline Image decode_pnm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P') throw DataError("PNM: bad magic");
  std::size_t channels = 0;
  if (bytes[1] == '5') {
    channels = 1;
  } else if (bytes[1] == '6') {
    channels = 3;
  } else {
    throw DataError(std::string("PNM: unsupported format P") + static_cast<char>(bytes[1]) +
                    " (only binary P5/P6 are read)");
  }
  detail::PnmHeaderReader rd(bytes);
  const std::size_t w = rd.number("width");
  const std::size_t h = rd.number("height");
  const std::size_t maxval = rd.number("maxval");
  if (w == 0 || h == 0) throw DataError("PNM: malformed header (zero extent)");
  if (maxval == 0) throw DataError("PNM: malformed header (maxval 0)");
  if (maxval > 255) throw DataError("PNM: maxval " + std::to_string(maxval) + " > 255 is not supported");
  const std::size_t start = rd.raster_start();
  const std::size_t n = w * h * channels;
  if (bytes.size() - start < n) throw DataError("PNM: truncated payload");
  std::vector<std::uint8_t> px(bytes.begin() + static_cast<std::ptrdiff_t>(start),
                               bytes.begin() + static_cast<std::ptrdiff_t>(start + n));
  if (maxval != 255) {
    for (auto& v : px) {
      if (v > maxval) throw DataError("PNM: sample exceeds maxval");
      v = static_cast<std::uint8_t>(std::lround(v * 255.0 / static_cast<double>(maxval)));
    }
  }
  return Image(Shape{h, w, channels}, std::move(px));
}

/// P5 for one channel, P6 for three.
inline std::vector<std::uint8_t> encode_pnm(const Image& img) {
  if (img.shape().rank() != 3 || (img.shape()[2] != 1 && img.shape()[2] != 3)) {
    throw ShapeError("encode_pnm: need [H, W, 1] or [H, W, 3], got " + img.shape().str());
  }
  const std::string header = std::string(img.shape()[2] == 1 ? "P5\n" : "P6\n") + std::to_string(img.shape()[1]) +
                             " " + std::to_string(img.shape()[0]) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.data().begin(), img.data().end());
  return out;
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read " + path.string());
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw DataError("failed writing " + path.string());
}

inline Image read_pnm(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_pnm(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace kcr

#endif  // KCR_PNM_HPP
