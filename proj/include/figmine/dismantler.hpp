#pragma once

// Compound-figure dismantling: split into fragments, label each fragment as
// a standalone chart or an auxiliary piece (tick labels, legends, axis
// titles), then attach every auxiliary piece to a neighbouring chart.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "figmine/gate.hpp"
#include "figmine/image.hpp"
#include "figmine/layout.hpp"
#include "figmine/svm.hpp"

namespace figmine::dismantler {

enum class FragmentKind { standalone = 0, auxiliary = 1 };

inline std::string to_string(FragmentKind k) { return k == FragmentKind::auxiliary ? "auxiliary" : "standalone"; }

enum class SubFigureKind { standalone_derived, merged };

struct SubFigure {
  Rect bbox;
  std::vector<Rect> members;  // leaf fragments
  SubFigureKind kind = SubFigureKind::standalone_derived;
};

struct MergeWeights {
  double gap = 1.0;
  double alignment = 1.0;
  double aspect = 0.5;
};

struct MergeResult {
  std::vector<SubFigure> subfigures;
  bool degenerate = false;  // no standalone fragment: whole image returned
};

// ---------------------------------------------------------------------------
// Fragment features and classifier

/// Size ratios against the fragment training set plus the n x n fraction of
/// content pixels (luminance below the gate threshold) in each block.
inline std::vector<double> fragment_feature(const GrayImage& frag, const gate::CorpusStats& stats) {
  if (frag.empty()) fail(ErrorCode::InvalidImage, "zero-area fragment");
  const int n = gate::kGridSize;
  const auto xs = gate::block_edges(frag.width, n);
  const auto ys = gate::block_edges(frag.height, n);
  std::vector<double> f;
  f.reserve(gate::kFeatureSize);
  f.push_back(frag.height / stats.height_avg);
  f.push_back(frag.width / stats.width_avg);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const long area = static_cast<long>(xs[j + 1] - xs[j]) * (ys[i + 1] - ys[i]);
      long hit = 0;
      for (int y = ys[i]; y < ys[i + 1]; ++y)
        for (int x = xs[j]; x < xs[j + 1]; ++x) hit += frag.at(y, x) < gate::kContentThreshold ? 1 : 0;
      f.push_back(area > 0 ? static_cast<double>(hit) / area : 0.0);
    }
  return f;
}

struct FragmentClassifier {
  svm::SvmModel model;
  gate::CorpusStats stats;
};

struct FragmentDecision {
  FragmentKind kind = FragmentKind::standalone;
  double probability = 1.0;
};

inline FragmentDecision classify_fragment(const GrayImage& frag, const FragmentClassifier& clf) {
  const auto p = svm::predict(clf.model, fragment_feature(frag, clf.stats));
  const std::size_t idx =
      static_cast<std::size_t>(std::find(clf.model.classes.begin(), clf.model.classes.end(), p.label) - clf.model.classes.begin());
  return {static_cast<FragmentKind>(p.label), p.class_probs[idx]};
}

inline FragmentClassifier train_fragment_classifier(std::span<const GrayImage> fragments, const std::vector<int>& labels,
                                                    const svm::SvmParams& params = {}) {
  FragmentClassifier clf;
  clf.stats = gate::corpus_stats(fragments);
  svm::Matrix x(static_cast<Eigen::Index>(fragments.size()), gate::kFeatureSize);
  for (std::size_t i = 0; i < fragments.size(); ++i) {
    const auto f = fragment_feature(fragments[i], clf.stats);
    for (int k = 0; k < gate::kFeatureSize; ++k) x(static_cast<Eigen::Index>(i), k) = f[k];
  }
  clf.model = svm::train(x, labels, params);
  return clf;
}

inline std::vector<std::uint8_t> serialize(const FragmentClassifier& clf) {
  svm::SvmModel m = clf.model;
  m.metadata = nlohmann::json{{"kind", "fragment"}, {"height_avg", clf.stats.height_avg}, {"width_avg", clf.stats.width_avg}}.dump();
  return svm::serialize(m);
}

inline FragmentClassifier deserialize_fragment_classifier(std::span<const std::uint8_t> bytes) {
  FragmentClassifier clf;
  clf.model = svm::deserialize_model(bytes);
  const auto meta = nlohmann::json::parse(clf.model.metadata.empty() ? "{}" : clf.model.metadata);
  if (!meta.contains("height_avg") || !meta.contains("width_avg"))
    fail(ErrorCode::ParseError, "fragment model lacks corpus stats");
  clf.stats = {meta.at("height_avg").get<double>(), meta.at("width_avg").get<double>()};
  return clf;
}

// ---------------------------------------------------------------------------
// Merge

/// Gap between two rectangles along x plus gap along y (0 when touching or
/// overlapping on that axis).
inline int edge_gap(const Rect& a, const Rect& b) {
  const int dx = std::max({0, b.x - a.right(), a.x - b.right()});
  const int dy = std::max({0, b.y - a.bottom(), a.y - b.bottom()});
  return dx + dy;
}

/// How much of the auxiliary piece `a` lines up with `s`: the larger of the
/// row-overlap fraction and the column-overlap fraction of a.
inline double alignment_overlap(const Rect& a, const Rect& s) {
  const double oy = std::max(0, std::min(a.bottom(), s.bottom()) - std::max(a.y, s.y));
  const double ox = std::max(0, std::min(a.right(), s.right()) - std::max(a.x, s.x));
  return std::max(a.h > 0 ? oy / a.h : 0.0, a.w > 0 ? ox / a.w : 0.0);
}

/// Elongation beyond 2:1, as |ln(w/h)| - ln 2 clamped at 0. Ordinary chart
/// shapes cost nothing, so the gap term decides between plausible merges.
inline constexpr double kFreeAspect = 2.0;

inline double aspect_penalty(const Rect& r) {
  if (r.empty()) return 0.0;
  return std::max(0.0, std::fabs(std::log(static_cast<double>(r.w) / r.h)) - std::log(kFreeAspect));
}

inline double merge_score(const Rect& aux, const Rect& group, const MergeWeights& w = {}) {
  const double gap = std::max(1, edge_gap(aux, group));
  return w.gap / gap + w.alignment * alignment_overlap(aux, group) - w.aspect * aspect_penalty(bounding_union(aux, group));
}

/// Attach each auxiliary leaf to the standalone group that maximizes the
/// merge score. Groups are scanned left-to-right then top-to-bottom and
/// only a strictly better score replaces the incumbent, so ties go to the
/// left/top neighbour. Candidates whose union would overlap another group
/// are skipped while a non-overlapping one exists; any overlap left at the
/// end is resolved by fusing the overlapping groups.
inline MergeResult merge(std::span<const Rect> leaves, std::span<const FragmentKind> labels, const Rect& image_bounds,
                         const MergeWeights& weights = {}) {
  if (leaves.size() != labels.size()) fail(ErrorCode::InvalidParameter, "every leaf needs a label");
  MergeResult out;
  std::vector<std::size_t> aux;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    if (labels[i] == FragmentKind::standalone)
      out.subfigures.push_back(SubFigure{leaves[i], {leaves[i]}, SubFigureKind::standalone_derived});
    else
      aux.push_back(i);
  }
  if (out.subfigures.empty()) {
    out.degenerate = true;
    SubFigure whole{image_bounds, {leaves.begin(), leaves.end()}, SubFigureKind::merged};
    out.subfigures.push_back(std::move(whole));
    return out;
  }
  auto by_position = [](const SubFigure& a, const SubFigure& b) {
    return std::pair(a.bbox.x, a.bbox.y) < std::pair(b.bbox.x, b.bbox.y);
  };
  std::sort(out.subfigures.begin(), out.subfigures.end(), by_position);

  constexpr double kTieEps = 1e-12;
  for (std::size_t ai : aux) {
    const Rect& a = leaves[ai];
    std::optional<std::size_t> best_clean, best_any;
    double clean_score = 0.0, any_score = 0.0;
    for (std::size_t g = 0; g < out.subfigures.size(); ++g) {
      const double s = merge_score(a, out.subfigures[g].bbox, weights);
      if (!best_any || s > any_score + kTieEps) {
        best_any = g;
        any_score = s;
      }
      const Rect u = bounding_union(a, out.subfigures[g].bbox);
      bool clean = true;
      for (std::size_t h = 0; h < out.subfigures.size() && clean; ++h)
        if (h != g && overlaps(u, out.subfigures[h].bbox)) clean = false;
      if (clean && (!best_clean || s > clean_score + kTieEps)) {
        best_clean = g;
        clean_score = s;
      }
    }
    SubFigure& target = out.subfigures[best_clean ? *best_clean : *best_any];
    target.bbox = bounding_union(target.bbox, a);
    target.members.push_back(a);
    target.kind = SubFigureKind::merged;
  }

  // Fuse overlapping groups until the output is pairwise disjoint.
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t i = 0; i < out.subfigures.size() && !changed; ++i)
      for (std::size_t j = i + 1; j < out.subfigures.size() && !changed; ++j)
        if (overlaps(out.subfigures[i].bbox, out.subfigures[j].bbox)) {
          SubFigure& keep = out.subfigures[i];
          keep.bbox = bounding_union(keep.bbox, out.subfigures[j].bbox);
          keep.members.insert(keep.members.end(), out.subfigures[j].members.begin(), out.subfigures[j].members.end());
          keep.kind = SubFigureKind::merged;
          out.subfigures.erase(out.subfigures.begin() + static_cast<std::ptrdiff_t>(j));
          changed = true;
        }
  }
  std::sort(out.subfigures.begin(), out.subfigures.end(), [](const SubFigure& a, const SubFigure& b) {
    return std::pair(a.bbox.y, a.bbox.x) < std::pair(b.bbox.y, b.bbox.x);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline

struct DismantleResult {
  layout::FragmentNode tree;
  std::vector<Rect> leaves;
  std::vector<FragmentKind> leaf_labels;
  std::vector<SubFigure> subfigures;
  bool degenerate = false;
};

struct DismantleConfig {
  layout::SplitConfig split;
  MergeWeights weights;
};

/// Fragments below the minimum size are auxiliary without consulting the
/// classifier.
inline FragmentKind label_fragment(const GrayImage& img, const Rect& leaf, const FragmentClassifier& clf,
                                   const layout::SplitConfig& cfg) {
  if (leaf.w < cfg.min_fragment || leaf.h < cfg.min_fragment) return FragmentKind::auxiliary;
  return classify_fragment(crop(img, leaf), clf).kind;
}

/// split -> classify -> merge. Crops are taken by the caller from
/// `subfigures[i].bbox`.
inline DismantleResult dismantle(const GrayImage& img, const FragmentClassifier& clf, const DismantleConfig& cfg = {}) {
  DismantleResult res;
  res.tree = layout::split(img, cfg.split);
  res.leaves = layout::leaves(res.tree);
  if (res.tree.is_leaf()) {
    // Nothing to dismantle: one sub-figure, the whole image.
    res.leaf_labels = {FragmentKind::standalone};
    res.subfigures = {SubFigure{img.bounds(), {img.bounds()}, SubFigureKind::standalone_derived}};
    return res;
  }
  for (const Rect& leaf : res.leaves) res.leaf_labels.push_back(label_fragment(img, leaf, clf, cfg.split));
  MergeResult m = merge(res.leaves, res.leaf_labels, img.bounds(), cfg.weights);
  res.subfigures = std::move(m.subfigures);
  res.degenerate = m.degenerate;
  return res;
}

/// Gate first: a singleton comes back as one full-image sub-figure.
inline DismantleResult dismantle(const GrayImage& img, const gate::GateModel& gate_model, const FragmentClassifier& clf,
                                 const DismantleConfig& cfg = {}) {
  if (gate::classify_gate(img, gate_model).label == gate::GateLabel::singleton) {
    DismantleResult res;
    res.tree = layout::FragmentNode{img.bounds(), layout::SplitAxis::leaf, {}};
    res.leaves = {img.bounds()};
    res.leaf_labels = {FragmentKind::standalone};
    res.subfigures = {SubFigure{img.bounds(), {img.bounds()}, SubFigureKind::standalone_derived}};
    return res;
  }
  return dismantle(img, clf, cfg);
}

}  // namespace figmine::dismantler
