#pragma once

// Background-gutter splitting of figure images into a fragment tree.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "figmine/image.hpp"

namespace figmine::layout {

/// Where the background luminance is read from. The border frame fails
/// when panels run to the image edge (their outlines dominate the frame),
/// so the whole-image mode is the default.
enum class BackgroundSource { whole_image, border };

struct SplitConfig {
  int min_gutter = 8;          // minimum background band thickness, px
  int min_fragment = 24;       // no cuts across an extent shorter than this
  float bg_tolerance = 0.05f;  // luminance distance to the modal background
  double bg_row_fraction = 0.99;
  BackgroundSource background = BackgroundSource::whole_image;
};

namespace detail {

using LuminanceHistogram = std::array<long, 256>;

inline void bump(LuminanceHistogram& hist, float v) {
  ++hist[static_cast<std::size_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f))];
}

/// Ties between bins go to the lighter value.
inline float histogram_mode(const LuminanceHistogram& hist) {
  std::size_t mode = 255;
  for (std::size_t v = 256; v-- > 0;)
    if (hist[v] > hist[mode]) mode = v;
  return static_cast<float>(mode) / 255.0f;
}

}  // namespace detail

/// Modal luminance of the 1-pixel image frame, quantized to 8 bits.
inline float modal_border_luminance(const GrayImage& img) {
  if (img.empty()) fail(ErrorCode::InvalidImage, "zero-area image");
  detail::LuminanceHistogram hist{};
  for (int c = 0; c < img.width; ++c) {
    detail::bump(hist, img.at(0, c));
    if (img.height > 1) detail::bump(hist, img.at(img.height - 1, c));
  }
  for (int r = 1; r + 1 < img.height; ++r) {
    detail::bump(hist, img.at(r, 0));
    if (img.width > 1) detail::bump(hist, img.at(r, img.width - 1));
  }
  return detail::histogram_mode(hist);
}

/// Modal luminance over every pixel, quantized to 8 bits.
inline float modal_luminance(const GrayImage& img) {
  if (img.empty()) fail(ErrorCode::InvalidImage, "zero-area image");
  detail::LuminanceHistogram hist{};
  for (float v : img.pixels) detail::bump(hist, v);
  return detail::histogram_mode(hist);
}

inline float background_luminance(const GrayImage& img, BackgroundSource src) {
  return src == BackgroundSource::border ? modal_border_luminance(img) : modal_luminance(img);
}

/// Content mask (1 = not background) with a 2-D prefix sum for O(1)
/// rectangle counts.
class ContentMap {
 public:
  ContentMap(const GrayImage& img, float background, float tolerance) : width_(img.width), height_(img.height) {
    sums_.assign(static_cast<std::size_t>(width_ + 1) * (height_ + 1), 0);
    for (int r = 0; r < height_; ++r) {
      long row_acc = 0;
      for (int c = 0; c < width_; ++c) {
        row_acc += std::fabs(img.at(r, c) - background) > tolerance ? 1 : 0;
        sum_at(r + 1, c + 1) = sum_at(r, c + 1) + row_acc;
      }
    }
  }

  /// Content pixels inside r (clipped to the image).
  long count(const Rect& r) const {
    const Rect c = intersection(r, Rect{0, 0, width_, height_});
    if (c.empty()) return 0;
    return sum(c.bottom(), c.right()) - sum(c.y, c.right()) - sum(c.bottom(), c.x) + sum(c.y, c.x);
  }

  /// Minimal rectangle inside `region` holding every content pixel; empty
  /// when the region has none.
  Rect trim(const Rect& region) const {
    if (count(region) == 0) return Rect{region.x, region.y, 0, 0};
    int top = region.y, bottom = region.bottom(), left = region.x, right = region.right();
    while (count(Rect{region.x, top, region.w, 1}) == 0) ++top;
    while (count(Rect{region.x, bottom - 1, region.w, 1}) == 0) --bottom;
    while (count(Rect{left, top, 1, bottom - top}) == 0) ++left;
    while (count(Rect{right - 1, top, 1, bottom - top}) == 0) --right;
    return Rect{left, top, right - left, bottom - top};
  }

  int width() const { return width_; }
  int height() const { return height_; }

 private:
  long& sum_at(int r, int c) { return sums_[static_cast<std::size_t>(r) * (width_ + 1) + c]; }
  long sum(int r, int c) const { return sums_[static_cast<std::size_t>(r) * (width_ + 1) + c]; }

  int width_;
  int height_;
  std::vector<long> sums_;
};

/// Orientation of the cut lines at a node: `horizontal` cuts stack the
/// children vertically, `vertical` cuts place them side by side.
enum class SplitAxis { horizontal, vertical, leaf };

struct FragmentNode {
  Rect bbox;
  SplitAxis split_axis = SplitAxis::leaf;
  std::vector<FragmentNode> children;

  bool is_leaf() const { return children.empty(); }
};

/// Maximal background runs strictly inside [0, length) whose thickness is at
/// least min_gutter. `is_bg(i)` tests line i.
template <class Pred>
std::vector<std::pair<int, int>> find_bands(int length, int min_gutter, Pred&& is_bg) {
  std::vector<std::pair<int, int>> bands;
  int i = 0;
  while (i < length) {
    if (!is_bg(i)) {
      ++i;
      continue;
    }
    int j = i;
    while (j < length && is_bg(j)) ++j;
    if (i > 0 && j < length && j - i >= min_gutter) bands.emplace_back(i, j);
    i = j;
  }
  return bands;
}

namespace detail {

inline void split_node(const ContentMap& map, FragmentNode& node, SplitAxis preferred, const SplitConfig& cfg) {
  const Rect b = node.bbox;
  const bool can_cut_rows = b.h >= cfg.min_fragment;
  const bool can_cut_cols = b.w >= cfg.min_fragment;
  if (!can_cut_rows && !can_cut_cols) return;

  const auto row_bg = [&](int i) {
    return static_cast<double>(map.count(Rect{b.x, b.y + i, b.w, 1})) <= (1.0 - cfg.bg_row_fraction) * b.w;
  };
  const auto col_bg = [&](int i) {
    return static_cast<double>(map.count(Rect{b.x + i, b.y, 1, b.h})) <= (1.0 - cfg.bg_row_fraction) * b.h;
  };
  const auto row_bands = can_cut_rows ? find_bands(b.h, cfg.min_gutter, row_bg) : std::vector<std::pair<int, int>>{};
  const auto col_bands = can_cut_cols ? find_bands(b.w, cfg.min_gutter, col_bg) : std::vector<std::pair<int, int>>{};
  if (row_bands.empty() && col_bands.empty()) return;

  SplitAxis axis;
  if (row_bands.size() != col_bands.size())
    axis = row_bands.size() > col_bands.size() ? SplitAxis::horizontal : SplitAxis::vertical;
  else
    axis = preferred;
  const auto& bands = axis == SplitAxis::horizontal ? row_bands : col_bands;

  std::vector<int> cuts;
  for (const auto& [lo, hi] : bands) cuts.push_back((lo + hi) / 2);
  int start = 0;
  const int extent = axis == SplitAxis::horizontal ? b.h : b.w;
  cuts.push_back(extent);
  for (int cut : cuts) {
    const Rect segment = axis == SplitAxis::horizontal ? Rect{b.x, b.y + start, b.w, cut - start}
                                                       : Rect{b.x + start, b.y, cut - start, b.h};
    start = cut;
    const Rect content = map.trim(segment);
    if (content.empty()) continue;
    node.children.push_back(FragmentNode{content, SplitAxis::leaf, {}});
  }
  if (node.children.size() < 2) {
    node.children.clear();
    return;
  }
  node.split_axis = axis;
  const SplitAxis next = axis == SplitAxis::horizontal ? SplitAxis::vertical : SplitAxis::horizontal;
  for (auto& child : node.children) split_node(map, child, next, cfg);
}

}  // namespace detail

/// Recursive gutter splitting. The root covers the whole image; every child
/// is trimmed to its content. At each node the axis with more qualifying
/// bands is cut (ties alternate with the parent), cutting at band centres.
inline FragmentNode split(const GrayImage& img, const SplitConfig& cfg = {}) {
  if (img.empty()) fail(ErrorCode::InvalidImage, "zero-area image");
  const ContentMap map(img, background_luminance(img, cfg.background), cfg.bg_tolerance);
  FragmentNode root{img.bounds(), SplitAxis::leaf, {}};
  const Rect content = map.trim(root.bbox);
  if (content.empty()) return root;

  // Split the content box, then hang its children off the full-image root.
  FragmentNode work{content, SplitAxis::leaf, {}};
  detail::split_node(map, work, SplitAxis::horizontal, cfg);
  root.split_axis = work.split_axis;
  root.children = std::move(work.children);
  return root;
}

inline void collect_leaves(const FragmentNode& node, std::vector<Rect>& out) {
  if (node.is_leaf()) {
    out.push_back(node.bbox);
    return;
  }
  for (const auto& c : node.children) collect_leaves(c, out);
}

inline std::vector<Rect> leaves(const FragmentNode& root) {
  std::vector<Rect> out;
  collect_leaves(root, out);
  return out;
}

/// Minimal rectangle of pixels darker than `threshold` inside region.
inline Rect content_bbox(const GrayImage& img, const Rect& region, float threshold) {
  const Rect r = intersection(region, img.bounds());
  int top = r.bottom(), bottom = r.y, left = r.right(), right = r.x;
  for (int y = r.y; y < r.bottom(); ++y)
    for (int x = r.x; x < r.right(); ++x)
      if (img.at(y, x) < threshold) {
        top = std::min(top, y);
        bottom = std::max(bottom, y + 1);
        left = std::min(left, x);
        right = std::max(right, x + 1);
      }
  if (bottom <= top) return Rect{r.x, r.y, 0, 0};
  return Rect{left, top, right - left, bottom - top};
}

}  // namespace figmine::layout
