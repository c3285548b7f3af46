#ifndef KCR_AUGMENT_HPP
#define KCR_AUGMENT_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "kcr/error.hpp"
#include "kcr/pnm.hpp"
#include "kcr/rng.hpp"

namespace kcr {

/// Random affine jitter. There is deliberately no mirroring: glyph
/// handedness and dot placement carry the label.
struct AugmentParams {
  double max_rotation_deg = 10.0;
  double max_translate_frac = 0.1;
  double zoom_lo = 0.9;
  double zoom_hi = 1.1;
  bool enabled = true;

  void validate() const {
    if (max_rotation_deg < 0 || max_translate_frac < 0) throw InvalidArgument("augment magnitudes must be >= 0");
    if (!(zoom_lo <= 1.0 && 1.0 <= zoom_hi) || zoom_lo <= 0) throw InvalidArgument("zoom range must satisfy 0 < lo <= 1 <= hi");
  }
};

/// Per-channel median of the four corner pixels (mean of the middle two).
inline std::vector<std::uint8_t> corner_background(const Image& img) {
  const std::size_t h = img.shape()[0], w = img.shape()[1], c = img.shape()[2];
  std::vector<std::uint8_t> bg(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    std::array<int, 4> v{img.at(0, 0, ch), img.at(0, w - 1, ch), img.at(h - 1, 0, ch), img.at(h - 1, w - 1, ch)};
    std::sort(v.begin(), v.end());
    bg[ch] = static_cast<std::uint8_t>((v[1] + v[2] + 1) / 2);
  }
  return bg;
}

/// One random rotation/translation/zoom about the image center, nearest
/// neighbour resampling, uncovered pixels set to the corner background.
/// Always consumes four draws (angle, dx, dy, zoom) when enabled.
inline Image augment(const Image& img, const AugmentParams& p, Rng& rng) {
  if (!p.enabled) return img;
  p.validate();
  const std::size_t h = img.shape()[0], w = img.shape()[1], c = img.shape()[2];
  const double angle = rng.uniform(-p.max_rotation_deg, p.max_rotation_deg) * std::numbers::pi / 180.0;
  const double tx = rng.uniform(-p.max_translate_frac, p.max_translate_frac) * static_cast<double>(w);
  const double ty = rng.uniform(-p.max_translate_frac, p.max_translate_frac) * static_cast<double>(h);
  const double zoom = rng.uniform(p.zoom_lo, p.zoom_hi);
  const double cx = (static_cast<double>(w) - 1) / 2, cy = (static_cast<double>(h) - 1) / 2;
  const double cs = std::cos(angle), sn = std::sin(angle);
  const auto bg = corner_background(img);
  Image out(img.shape());
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      // Inverse map: source = c + R(-angle) (dst - c - t) / zoom
      const double dx = (static_cast<double>(x) - cx - tx) / zoom;
      const double dy = (static_cast<double>(y) - cy - ty) / zoom;
      const double sx = std::floor(cx + cs * dx + sn * dy + 0.5);
      const double sy = std::floor(cy - sn * dx + cs * dy + 0.5);
      const bool inside = sx >= 0 && sy >= 0 && sx < static_cast<double>(w) && sy < static_cast<double>(h);
      for (std::size_t ch = 0; ch < c; ++ch) {
        out.at(y, x, ch) = inside ? img.at(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx), ch) : bg[ch];
      }
    }
  }
  return out;
}

}  // namespace kcr

#endif  // KCR_AUGMENT_HPP
