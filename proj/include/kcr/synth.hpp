#ifndef KCR_SYNTH_HPP
#define KCR_SYNTH_HPP

// Procedural stand-in for a handwritten isolated-character corpus.
//
// Classes come in pairs that share one stroke template and differ only in
// their dots (none vs one, one vs two, above vs below), the same kind of
// near-duplicate that dominates confusion lists for dotted scripts. Class c
// uses template c / 2 and dot variant c % 2.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "kcr/error.hpp"
#include "kcr/pnm.hpp"
#include "kcr/rng.hpp"

namespace kcr {

inline constexpr std::size_t kMaxSynthClasses = 35;

struct Point2 {
  double x = 0, y = 0;  // unit square, y down
};

struct GlyphTemplate {
  std::vector<std::vector<Point2>> strokes;  // polylines
  double dot_x = 0.5;
  int dot_scheme = 0;  // 0: none|one above, 1: one|two above, 2: above|below
};

inline std::size_t synth_template_of(std::size_t cls) { return cls / 2; }

/// Stroke template t. Independent of any user seed so class identities
/// are stable across generated corpora.
inline GlyphTemplate glyph_template(std::size_t t) {
  Rng rng(Rng::mix(0x4B435253594E54ULL, t));
  GlyphTemplate g;
  auto body_point = [&rng] { return Point2{rng.uniform(0.2, 0.8), rng.uniform(0.32, 0.75)}; };
  const std::size_t strokes = 2 + static_cast<std::size_t>(rng.below(2));
  for (std::size_t s = 0; s < strokes; ++s) {
    std::vector<Point2> line;
    switch (rng.below(3)) {
      case 0: {  // straight segment
        const Point2 a = body_point(), b = body_point();
        for (int i = 0; i <= 4; ++i) {
          const double u = i / 4.0;
          line.push_back({a.x + u * (b.x - a.x), a.y + u * (b.y - a.y)});
        }
        break;
      }
      case 1: {  // circular arc
        const Point2 c{rng.uniform(0.38, 0.62), rng.uniform(0.45, 0.6)};
        const double r = rng.uniform(0.13, 0.25);
        const double start = rng.uniform(0, 2 * std::numbers::pi);
        const double sweep = rng.uniform(0.6, 1.5) * std::numbers::pi * (rng.bernoulli(0.5) ? 1 : -1);
        for (int i = 0; i <= 12; ++i) {
          const double a = start + sweep * i / 12.0;
          line.push_back({c.x + r * std::cos(a), c.y + r * std::sin(a)});
        }
        break;
      }
      default: {  // quadratic curve
        const Point2 a = body_point(), m = body_point(), b = body_point();
        for (int i = 0; i <= 10; ++i) {
          const double u = i / 10.0, v = 1 - u;
          line.push_back({v * v * a.x + 2 * u * v * m.x + u * u * b.x, v * v * a.y + 2 * u * v * m.y + u * u * b.y});
        }
        break;
      }
    }
    g.strokes.push_back(std::move(line));
  }
  g.dot_x = rng.uniform(0.38, 0.62);
  g.dot_scheme = static_cast<int>(t % 3);
  return g;
}

/// Dot centers (unit coordinates) for a class.
inline std::vector<Point2> glyph_dots(const GlyphTemplate& g, std::size_t variant) {
  const Point2 above{g.dot_x, 0.17}, below{g.dot_x, 0.87};
  switch (g.dot_scheme) {
    case 0:
      if (variant == 0) return {};
      return {above};
    case 1:
      if (variant == 0) return {above};
      return {{g.dot_x - 0.09, 0.17}, {g.dot_x + 0.09, 0.17}};
    default:
      if (variant == 0) return {above};
      return {below};
  }
}

namespace detail {
inline double segment_distance(double px, double py, Point2 a, Point2 b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double u = len2 > 0 ? ((px - a.x) * vx + (py - a.y) * vy) / len2 : 0.0;
  u = std::clamp(u, 0.0, 1.0);
  const double dx = px - (a.x + u * vx), dy = py - (a.y + u * vy);
  return std::sqrt(dx * dx + dy * dy);
}
}  // namespace detail

/// One grayscale sample of class `cls`: dark ink on light paper, with
/// per-sample jitter (pose, control points, stroke width, pixel noise).
inline Image render_glyph(std::size_t cls, std::size_t h, std::size_t w, Rng& rng) {
  const GlyphTemplate g = glyph_template(synth_template_of(cls));
  const auto dots = glyph_dots(g, cls % 2);

  const double angle = rng.uniform(-5.0, 5.0) * std::numbers::pi / 180.0;
  const double zoom = rng.uniform(0.9, 1.1);
  const double shift_x = rng.uniform(-0.04, 0.04), shift_y = rng.uniform(-0.04, 0.04);
  const double cs = std::cos(angle), sn = std::sin(angle);
  const double size = static_cast<double>(std::min(h, w));
  // unit square -> pixel coordinates
  auto place = [&](Point2 p) {
    const double ux = p.x - 0.5, uy = p.y - 0.5;
    return Point2{(0.5 + shift_x + zoom * (cs * ux - sn * uy)) * static_cast<double>(w),
                  (0.5 + shift_y + zoom * (sn * ux + cs * uy)) * static_cast<double>(h)};
  };

  std::vector<std::vector<Point2>> strokes;
  for (const auto& s : g.strokes) {
    std::vector<Point2> line;
    for (Point2 p : s) line.push_back(place({p.x + 0.012 * rng.normal(), p.y + 0.012 * rng.normal()}));
    strokes.push_back(std::move(line));
  }
  std::vector<Point2> dot_px;
  for (Point2 d : dots) dot_px.push_back(place({d.x + 0.03 * rng.normal(), d.y + 0.03 * rng.normal()}));
  // Stray specks, about as large as a dot, land anywhere on the page.
  const std::size_t specks = rng.bernoulli(0.35) ? 1 + rng.below(2) : 0;
  for (std::size_t i = 0; i < specks; ++i) dot_px.push_back(place({rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)}));

  const double half_width = rng.uniform(0.035, 0.055) * size;
  const double dot_radius = rng.uniform(0.04, 0.06) * size;
  const double paper = rng.uniform(215, 250), ink = rng.uniform(10, 60);

  Image img(Shape{h, w, 1});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
      double coverage = 0;
      for (const auto& line : strokes) {
        for (std::size_t i = 0; i + 1 < line.size(); ++i) {
          const double d = detail::segment_distance(px, py, line[i], line[i + 1]);
          coverage = std::max(coverage, std::clamp(half_width + 0.5 - d, 0.0, 1.0));
        }
      }
      for (Point2 d : dot_px) {
        const double dist = std::hypot(px - d.x, py - d.y);
        coverage = std::max(coverage, std::clamp(dot_radius + 0.5 - dist, 0.0, 1.0));
      }
      const double v = paper * (1 - coverage) + ink * coverage + 14.0 * rng.normal();
      img.at(y, x, 0) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  return img;
}

inline std::string synth_class_name(std::size_t cls) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "class_%02zu", cls);
  return buf;
}

/// Writes out_dir/class_NN/IIII.pgm for every class and sample. Returns
/// the number of files written. Output depends only on the arguments.
inline std::size_t synth_generate(std::size_t num_classes, std::size_t per_class, std::size_t h, std::size_t w,
                                  std::uint64_t seed, const std::filesystem::path& out_dir) {
  if (num_classes < 2 || num_classes > kMaxSynthClasses) {
    throw InvalidArgument("synth: class count must lie in [2, " + std::to_string(kMaxSynthClasses) + "]");
  }
  if (per_class < 3) throw InvalidArgument("synth: need at least 3 samples per class");
  if (h < 8 || w < 8) throw InvalidArgument("synth: images must be at least 8x8");
  std::size_t written = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const auto dir = out_dir / synth_class_name(c);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("synth: cannot create " + dir.string() + ": " + ec.message());
    for (std::size_t i = 0; i < per_class; ++i) {
      Rng rng(Rng::mix(Rng::mix(seed, c), i));
      char name[32];
      std::snprintf(name, sizeof name, "%04zu.pgm", i);
      write_file(dir / name, encode_pnm(render_glyph(c, h, w, rng)));
      ++written;
    }
  }
  return written;
}

}  // namespace kcr

#endif  // KCR_SYNTH_HPP
