#pragma once

// Multi-chart pre-classifier: effective figure regions (EFR) from the
// splitter, an n x n EFR density map, and the size-ratio + density feature.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "figmine/image.hpp"
#include "figmine/layout.hpp"
#include "figmine/svm.hpp"

namespace figmine::gate {

inline constexpr int kGridSize = 10;
inline constexpr int kFeatureSize = 2 + kGridSize * kGridSize;
/// Pixels darker than this count as content when marking EFRs.
inline constexpr float kContentThreshold = 0.95f;

enum class GateLabel { singleton = 0, multichart = 1 };

inline std::string to_string(GateLabel l) { return l == GateLabel::multichart ? "multichart" : "singleton"; }

struct EfrDensityMap {
  int n = kGridSize;
  std::vector<double> densities;  // row-major n x n

  double at(int row, int col) const { return densities[static_cast<std::size_t>(row) * n + col]; }
};

/// Height/width averages over the training images, frozen with the model.
struct CorpusStats {
  double height_avg = 1.0;
  double width_avg = 1.0;
};

inline CorpusStats corpus_stats(std::span<const GrayImage> images) {
  if (images.empty()) fail(ErrorCode::InsufficientData, "corpus stats need at least one image");
  double h = 0, w = 0;
  for (const auto& img : images) {
    h += img.height;
    w += img.width;
  }
  return {h / static_cast<double>(images.size()), w / static_cast<double>(images.size())};
}

/// One rectangle per split block: the tight box of its content pixels.
inline std::vector<Rect> compute_efr_mask(const GrayImage& img, const layout::SplitConfig& cfg = {},
                                          float threshold = kContentThreshold) {
  std::vector<Rect> regions;
  for (const Rect& block : layout::leaves(layout::split(img, cfg))) {
    const Rect r = layout::content_bbox(img, block, threshold);
    if (!r.empty()) regions.push_back(r);
  }
  return regions;
}

/// Block boundaries along one axis: floor(length / n) per block, the
/// remainder going to the last block.
inline std::vector<int> block_edges(int length, int n) {
  std::vector<int> edges(static_cast<std::size_t>(n) + 1);
  const int step = length / n;
  for (int i = 0; i < n; ++i) edges[i] = i * step;
  edges[n] = length;
  return edges;
}

/// Fraction of each block covered by the union of `regions`. Zero-area
/// blocks (images smaller than n) report 0.
inline EfrDensityMap efr_density_map(std::span<const Rect> regions, int width, int height, int n = kGridSize) {
  if (width <= 0 || height <= 0) fail(ErrorCode::InvalidImage, "zero-area image");
  if (n < 1) fail(ErrorCode::InvalidParameter, "grid size must be >= 1");
  const Rect bounds{0, 0, width, height};
  std::vector<std::uint8_t> covered(static_cast<std::size_t>(width) * height, 0);
  for (const Rect& r : regions) {
    if (r.empty()) continue;
    if (!bounds.contains(r)) fail(ErrorCode::InvalidRegion, "region outside image bounds");
    for (int y = r.y; y < r.bottom(); ++y)
      std::fill_n(&covered[static_cast<std::size_t>(y) * width + r.x], r.w, 1);
  }
  // Row-wise prefix sums make each block sum O(block rows).
  std::vector<long> prefix(static_cast<std::size_t>(width + 1) * height, 0);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      prefix[static_cast<std::size_t>(y) * (width + 1) + x + 1] =
          prefix[static_cast<std::size_t>(y) * (width + 1) + x] + covered[static_cast<std::size_t>(y) * width + x];

  const auto xs = block_edges(width, n);
  const auto ys = block_edges(height, n);
  EfrDensityMap map{n, std::vector<double>(static_cast<std::size_t>(n) * n, 0.0)};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const long area = static_cast<long>(xs[j + 1] - xs[j]) * (ys[i + 1] - ys[i]);
      if (area == 0) continue;
      long hit = 0;
      for (int y = ys[i]; y < ys[i + 1]; ++y)
        hit += prefix[static_cast<std::size_t>(y) * (width + 1) + xs[j + 1]] - prefix[static_cast<std::size_t>(y) * (width + 1) + xs[j]];
      map.densities[static_cast<std::size_t>(i) * n + j] = static_cast<double>(hit) / area;
    }
  return map;
}

/// [height/height_avg, width/width_avg, density map...]
inline std::vector<double> gate_feature(int width, int height, const EfrDensityMap& density, const CorpusStats& stats) {
  std::vector<double> f;
  f.reserve(2 + density.densities.size());
  f.push_back(height / stats.height_avg);
  f.push_back(width / stats.width_avg);
  f.insert(f.end(), density.densities.begin(), density.densities.end());
  return f;
}

inline std::vector<double> gate_feature(const GrayImage& img, const CorpusStats& stats, const layout::SplitConfig& cfg = {}) {
  const auto regions = compute_efr_mask(img, cfg);
  return gate_feature(img.width, img.height, efr_density_map(regions, img.width, img.height), stats);
}

struct GateModel {
  svm::SvmModel model;
  CorpusStats stats;
  layout::SplitConfig split;
};

struct GateDecision {
  GateLabel label = GateLabel::singleton;
  double probability = 0.0;  // probability of `label`
};

inline GateDecision classify_gate(const GrayImage& img, const GateModel& gate) {
  const auto f = gate_feature(img, gate.stats, gate.split);
  const auto p = svm::predict(gate.model, f);
  const auto label = static_cast<GateLabel>(p.label);
  const std::size_t idx = static_cast<std::size_t>(std::find(gate.model.classes.begin(), gate.model.classes.end(), p.label) -
                                                   gate.model.classes.begin());
  return {label, p.class_probs[idx]};
}

/// Training helper: features for a labeled image set, with stats computed
/// from that same set.
inline GateModel train_gate(std::span<const GrayImage> images, const std::vector<int>& labels,
                            const svm::SvmParams& params = {}, const layout::SplitConfig& cfg = {}) {
  GateModel g;
  g.stats = corpus_stats(images);
  g.split = cfg;
  svm::Matrix x(static_cast<Eigen::Index>(images.size()), kFeatureSize);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto f = gate_feature(images[i], g.stats, cfg);
    for (int k = 0; k < kFeatureSize; ++k) x(static_cast<Eigen::Index>(i), k) = f[k];
  }
  g.model = svm::train(x, labels, params);
  return g;
}

inline std::vector<std::uint8_t> serialize(const GateModel& g) {
  svm::SvmModel m = g.model;
  m.metadata = nlohmann::json{{"kind", "gate"},
                              {"height_avg", g.stats.height_avg},
                              {"width_avg", g.stats.width_avg},
                              {"min_gutter", g.split.min_gutter},
                              {"min_fragment", g.split.min_fragment},
                              {"background", g.split.background == layout::BackgroundSource::border ? "border" : "whole_image"}}
                   .dump();
  return svm::serialize(m);
}

inline GateModel deserialize_gate(std::span<const std::uint8_t> bytes) {
  GateModel g;
  g.model = svm::deserialize_model(bytes);
  const auto meta = nlohmann::json::parse(g.model.metadata.empty() ? "{}" : g.model.metadata);
  if (!meta.contains("height_avg") || !meta.contains("width_avg"))
    fail(ErrorCode::ParseError, "gate model lacks corpus stats");
  g.stats = {meta.at("height_avg").get<double>(), meta.at("width_avg").get<double>()};
  g.split.min_gutter = meta.value("min_gutter", g.split.min_gutter);
  g.split.min_fragment = meta.value("min_fragment", g.split.min_fragment);
  if (meta.value("background", std::string("whole_image")) == "border") g.split.background = layout::BackgroundSource::border;
  return g;
}

}  // namespace figmine::gate
