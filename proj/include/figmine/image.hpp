#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "figmine/error.hpp"

namespace figmine {

/// Axis-aligned pixel rectangle, half-open: covers [x, x+w) × [y, y+h).
struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  constexpr int right() const { return x + w; }
  constexpr int bottom() const { return y + h; }
  constexpr long long area() const { return static_cast<long long>(w) * h; }
  constexpr bool empty() const { return w <= 0 || h <= 0; }

  constexpr bool contains(const Rect& o) const {
    return o.x >= x && o.y >= y && o.right() <= right() && o.bottom() <= bottom();
  }

  friend constexpr bool operator==(const Rect&, const Rect&) = default;
};

constexpr Rect intersection(const Rect& a, const Rect& b) {
  const int x0 = std::max(a.x, b.x);
  const int y0 = std::max(a.y, b.y);
  const int x1 = std::min(a.right(), b.right());
  const int y1 = std::min(a.bottom(), b.bottom());
  if (x1 <= x0 || y1 <= y0) return Rect{x0, y0, 0, 0};
  return Rect{x0, y0, x1 - x0, y1 - y0};
}

/// Smallest rectangle containing both; an empty operand is ignored.
constexpr Rect bounding_union(const Rect& a, const Rect& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  const int x0 = std::min(a.x, b.x);
  const int y0 = std::min(a.y, b.y);
  const int x1 = std::max(a.right(), b.right());
  const int y1 = std::max(a.bottom(), b.bottom());
  return Rect{x0, y0, x1 - x0, y1 - y0};
}

constexpr bool overlaps(const Rect& a, const Rect& b) { return !intersection(a, b).empty(); }

inline double iou(const Rect& a, const Rect& b) {
  const double inter = static_cast<double>(intersection(a, b).area());
  const double uni = static_cast<double>(a.area() + b.area()) - inter;
  return uni > 0 ? inter / uni : 0.0;
}

/// Single-channel image with luminance in [0,1]; 1 is white.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;  // row-major

  GrayImage() = default;
  GrayImage(int w, int h, float fill = 1.0f)
      : width(w), height(h), pixels(static_cast<std::size_t>(std::max(w, 0)) * std::max(h, 0), fill) {}

  bool empty() const { return width <= 0 || height <= 0; }
  Rect bounds() const { return Rect{0, 0, width, height}; }

  float& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * width + col]; }
  float at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * width + col]; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

inline GrayImage crop(const GrayImage& img, const Rect& r) {
  if (!img.bounds().contains(r) || r.empty()) fail(ErrorCode::InvalidRegion, "crop rectangle outside image");
  GrayImage out(r.w, r.h);
  for (int row = 0; row < r.h; ++row)
    std::copy_n(&img.pixels[static_cast<std::size_t>(r.y + row) * img.width + r.x], r.w,
                &out.pixels[static_cast<std::size_t>(row) * r.w]);
  return out;
}

inline void fill_rect(GrayImage& img, const Rect& r, float value) {
  const Rect c = intersection(r, img.bounds());
  for (int row = c.y; row < c.bottom(); ++row)
    std::fill_n(&img.pixels[static_cast<std::size_t>(row) * img.width + c.x], c.w, value);
}

inline void paste(GrayImage& dst, const GrayImage& src, int x, int y) {
  for (int row = 0; row < src.height; ++row) {
    const int dr = y + row;
    if (dr < 0 || dr >= dst.height) continue;
    for (int col = 0; col < src.width; ++col) {
      const int dc = x + col;
      if (dc < 0 || dc >= dst.width) continue;
      dst.at(dr, dc) = src.at(row, col);
    }
  }
}

/// Area-coverage resampling. Each destination pixel is the coverage-weighted
/// mean of the source pixels under its footprint, so downscaling averages and
/// upscaling replicates.
inline GrayImage resample_area(const GrayImage& src, int new_w, int new_h) {
  if (src.empty() || new_w <= 0 || new_h <= 0) fail(ErrorCode::InvalidImage, "resample of empty image");
  if (new_w == src.width && new_h == src.height) return src;

  // Per-axis weight tables: for each destination index, the list of
  // (source index, coverage) pairs.
  struct Tap {
    int index;
    double weight;
  };
  auto build = [](int src_n, int dst_n) {
    std::vector<std::vector<Tap>> taps(dst_n);
    const double scale = static_cast<double>(src_n) / dst_n;
    for (int d = 0; d < dst_n; ++d) {
      const double lo = d * scale;
      const double hi = (d + 1) * scale;
      double total = 0.0;
      for (int s = static_cast<int>(std::floor(lo)); s < std::min(src_n, static_cast<int>(std::ceil(hi))); ++s) {
        const double cover = std::min<double>(hi, s + 1) - std::max<double>(lo, s);
        if (cover <= 0) continue;
        taps[d].push_back({s, cover});
        total += cover;
      }
      for (auto& t : taps[d]) t.weight /= total;
    }
    return taps;
  };
  const auto col_taps = build(src.width, new_w);
  const auto row_taps = build(src.height, new_h);

  std::vector<double> horiz(static_cast<std::size_t>(src.height) * new_w, 0.0);
  for (int r = 0; r < src.height; ++r)
    for (int c = 0; c < new_w; ++c) {
      double acc = 0.0;
      for (const auto& t : col_taps[c]) acc += t.weight * src.at(r, t.index);
      horiz[static_cast<std::size_t>(r) * new_w + c] = acc;
    }

  GrayImage out(new_w, new_h);
  for (int r = 0; r < new_h; ++r)
    for (int c = 0; c < new_w; ++c) {
      double acc = 0.0;
      for (const auto& t : row_taps[r]) acc += t.weight * horiz[static_cast<std::size_t>(t.index) * new_w + c];
      out.at(r, c) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
    }
  return out;
}

}  // namespace figmine
