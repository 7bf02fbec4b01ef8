#pragma once

// Figure-density analyses: per-paper densities and proportions, impact
// binning with tie-aware boundaries, binned correlation, the confusion-matrix
// relabeling experiment, the dismantling-error metric and the classifier
// bias audit.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "figmine/error.hpp"
#include "figmine/records.hpp"
#include "figmine/stats.hpp"
#include "figmine/svm.hpp"
#include "figmine/util.hpp"

namespace figmine::analysis {

/// Types that enter density analyses; equations are excluded because a
/// single image can hold any number of them.
inline constexpr std::array<FigureLabel, 4> kDensityTypes{FigureLabel::diagram, FigureLabel::photo, FigureLabel::plot,
                                                          FigureLabel::table};

inline constexpr std::size_t density_slot(FigureLabel l) {
  switch (l) {
    case FigureLabel::diagram: return 0;
    case FigureLabel::photo: return 1;
    case FigureLabel::plot: return 2;
    case FigureLabel::table: return 3;
    default: return 4;
  }
}

inline constexpr double kTieThreshold = 1e-12;

// ---------------------------------------------------------------------------
// Density profile

struct DensityProfile {
  std::string paper_id;
  int page_count = 1;
  std::array<long, 4> counts{};
  std::array<double, 4> density{};     // count / page_count
  std::array<double, 4> proportion{};  // count / total counted figures
  bool proportions_undefined = true;   // paper has no counted figure

  double density_of(FigureLabel l) const { return density.at(density_slot(l)); }
  double proportion_of(FigureLabel l) const { return proportion.at(density_slot(l)); }
  long total() const { return counts[0] + counts[1] + counts[2] + counts[3]; }
};

inline DensityProfile profile_from_counts(const std::string& paper_id, int page_count, const std::array<long, 4>& counts) {
  if (page_count < 1) fail(ErrorCode::InvalidParameter, paper_id + ": page_count must be >= 1");
  DensityProfile p;
  p.paper_id = paper_id;
  p.page_count = page_count;
  p.counts = counts;
  const long total = p.total();
  p.proportions_undefined = total == 0;
  for (std::size_t k = 0; k < 4; ++k) {
    p.density[k] = static_cast<double>(counts[k]) / page_count;
    p.proportion[k] = total > 0 ? static_cast<double>(counts[k]) / total : 0.0;
  }
  return p;
}

/// Counts the paper's figures of the four density types. Equations,
/// multichart parents and unclassified images do not count.
inline DensityProfile density_profile(const PaperRecord& paper, std::span<const FigureRecord> figures) {
  std::array<long, 4> counts{};
  for (const auto& f : figures) {
    if (f.paper_id != paper.paper_id) continue;
    const std::size_t slot = density_slot(f.label);
    if (slot < 4) ++counts[slot];
  }
  return profile_from_counts(paper.paper_id, paper.page_count, counts);
}

// ---------------------------------------------------------------------------
// Impact bins

enum class BinScheme { fixed_boundaries, half_percentile, fixed_count };

struct ScoredId {
  std::string id;
  double score = 0.0;
};

struct ImpactBins {
  std::vector<std::vector<std::string>> bins;  // highest scores first
  std::vector<double> boundaries;              // cut positions as fraction of papers above the cut
};

/// Sorted descending by score, ids ascending among equal scores.
inline std::vector<ScoredId> sort_by_score(std::span<const ScoredId> items) {
  std::vector<ScoredId> v(items.begin(), items.end());
  std::sort(v.begin(), v.end(), [](const ScoredId& a, const ScoredId& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  return v;
}

/// For each position in a descending-sorted list, the first position of its
/// tie run (consecutive differences below the tie threshold).
inline std::vector<std::size_t> tie_run_starts(std::span<const ScoredId> sorted) {
  std::vector<std::size_t> start(sorted.size(), 0);
  for (std::size_t i = 1; i < sorted.size(); ++i)
    start[i] = (sorted[i - 1].score - sorted[i].score) < kTieThreshold ? start[i - 1] : i;
  return start;
}

/// Splits the sorted list at the target positions after moving each cut up
/// to the start of the tie run it would otherwise split. Empty bins vanish.
inline ImpactBins cut_at(std::span<const ScoredId> sorted, std::vector<std::size_t> targets) {
  const std::size_t n = sorted.size();
  const auto starts = tie_run_starts(sorted);
  std::set<std::size_t> cuts;
  for (std::size_t t : targets) {
    if (t == 0 || t >= n) continue;
    const std::size_t c = starts[t];
    if (c > 0) cuts.insert(c);
  }
  ImpactBins out;
  std::size_t begin = 0;
  auto emit = [&](std::size_t end) {
    std::vector<std::string> bin;
    for (std::size_t i = begin; i < end; ++i) bin.push_back(sorted[i].id);
    out.bins.push_back(std::move(bin));
    begin = end;
  };
  for (std::size_t c : cuts) {
    emit(c);
    out.boundaries.push_back(static_cast<double>(c) / static_cast<double>(n));
  }
  emit(n);
  return out;
}

/// fixed_boundaries: cuts at the top 5%, 25% and 50%.
/// half_percentile: a cut every `param` fraction of papers (default 0.005).
/// fixed_count: a cut every `param` papers.
inline ImpactBins impact_bins(std::span<const ScoredId> papers, BinScheme scheme, double param = 0.0) {
  if (papers.empty()) fail(ErrorCode::EmptyInput, "no papers to bin");
  const auto sorted = sort_by_score(papers);
  const std::size_t n = sorted.size();
  std::vector<std::size_t> targets;
  switch (scheme) {
    case BinScheme::fixed_boundaries:
      for (double f : {0.05, 0.25, 0.50}) targets.push_back(static_cast<std::size_t>(std::llround(f * n)));
      break;
    case BinScheme::half_percentile: {
      const double frac = param > 0.0 ? param : 0.005;
      if (frac >= 1.0) fail(ErrorCode::InvalidParameter, "bin fraction must be < 1");
      for (std::size_t k = 1; static_cast<double>(k) * frac < 1.0; ++k)
        targets.push_back(static_cast<std::size_t>(std::llround(static_cast<double>(k) * frac * n)));
      break;
    }
    case BinScheme::fixed_count: {
      const auto count = static_cast<std::size_t>(param);
      if (count < 1) fail(ErrorCode::InvalidParameter, "fixed-count bins need a positive size");
      for (std::size_t c = count; c < n; c += count) targets.push_back(c);
      break;
    }
  }
  return cut_at(sorted, std::move(targets));
}

// ---------------------------------------------------------------------------
// Binned correlation

enum class Target { density, proportion };

struct ScoredPaper {
  std::string paper_id;
  std::string journal;
  double score = 0.0;
  DensityProfile profile;
};

struct BinnedCorrelation {
  FigureLabel figure_type = FigureLabel::diagram;
  Target target = Target::density;
  std::size_t bins = 0;
  std::size_t papers = 0;
  stats::Correlation pearson;   // per-bin means
  stats::Correlation spearman;  // per-bin means; robustness figure only
  std::vector<double> bin_score_means;
  std::vector<double> bin_metric_means;
};

inline std::vector<ScoredPaper> exclude_journals(std::span<const ScoredPaper> papers, const std::set<std::string>& journals) {
  std::vector<ScoredPaper> out;
  for (const auto& p : papers)
    if (!journals.contains(p.journal)) out.push_back(p);
  return out;
}

/// Groups papers into tie-aware bins of `bin_fraction` of the corpus, then
/// correlates the per-bin mean metric with the per-bin mean score.
inline BinnedCorrelation binned_correlation(std::span<const ScoredPaper> all, FigureLabel type, Target target,
                                            double bin_fraction = 0.005, const std::set<std::string>& excluded = {}) {
  if (density_slot(type) >= 4) fail(ErrorCode::InvalidParameter, "figure type has no density");
  const auto papers = exclude_journals(all, excluded);
  BinnedCorrelation out;
  out.figure_type = type;
  out.target = target;
  out.papers = papers.size();
  if (papers.empty()) fail(ErrorCode::InsufficientBins, "no papers left after exclusion");

  std::map<std::string, const ScoredPaper*> by_id;
  std::vector<ScoredId> ids;
  for (const auto& p : papers) {
    by_id.emplace(p.paper_id, &p);
    ids.push_back({p.paper_id, p.score});
  }
  const ImpactBins bins = impact_bins(ids, BinScheme::half_percentile, bin_fraction);
  for (const auto& bin : bins.bins) {
    double s = 0.0, m = 0.0;
    std::size_t n_metric = 0;
    for (const auto& id : bin) {
      const ScoredPaper& p = *by_id.at(id);
      s += p.score;
      if (target == Target::proportion && p.profile.proportions_undefined) continue;
      m += target == Target::density ? p.profile.density_of(type) : p.profile.proportion_of(type);
      ++n_metric;
    }
    if (n_metric == 0) continue;
    out.bin_score_means.push_back(s / static_cast<double>(bin.size()));
    out.bin_metric_means.push_back(m / static_cast<double>(n_metric));
  }
  out.bins = out.bin_score_means.size();
  if (out.bins < 3) fail(ErrorCode::InsufficientBins, "need at least 3 bins, got " + std::to_string(out.bins));
  out.pearson = stats::pearson(out.bin_metric_means, out.bin_score_means);
  out.spearman = stats::spearman(out.bin_metric_means, out.bin_score_means);
  return out;
}

// ---------------------------------------------------------------------------
// Calibration experiment

struct CalibrationFigure {
  std::size_t paper = 0;  // index into the paper arrays
  FigureLabel predicted = FigureLabel::diagram;
};

struct CalibrationInput {
  std::vector<double> paper_scores;
  std::vector<int> paper_pages;
  std::vector<CalibrationFigure> figures;
};

struct CalibrationResult {
  FigureLabel figure_type = FigureLabel::diagram;
  int trials = 0;
  double raw_coefficient = 0.0;
  std::vector<double> coefficients;
  double mean = 0.0;
  double standard_error = 0.0;
  double fail_rate = 0.0;  // share of trials whose correlation is not significant
};

/// Column-conditional relabeling table: for predicted class j, the
/// cumulative distribution of the true class, M(i,j) / sum_i M(i,j).
class RelabelTable {
 public:
  explicit RelabelTable(const svm::ConfusionMatrix& m) : classes_(m.classes()) {
    const std::size_t n = m.size();
    cdf_.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t j = 0; j < n; ++j) {
      const long col = m.col_sum(j);
      if (col <= 0) fail(ErrorCode::InvalidConfusionMatrix, "predicted class " + std::to_string(classes_[j]) + " has an empty column");
      long acc = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (m.at(i, j) < 0) fail(ErrorCode::InvalidConfusionMatrix, "negative confusion count");
        acc += m.at(i, j);
        cdf_[j][i] = static_cast<double>(acc) / static_cast<double>(col);
      }
      cdf_[j][n - 1] = 1.0;
    }
  }

  /// Draw a true class for a figure predicted as `predicted`. Classes not in
  /// the matrix keep their label.
  int sample(int predicted, Rng& rng) const {
    const auto it = std::find(classes_.begin(), classes_.end(), predicted);
    if (it == classes_.end()) return predicted;
    const auto& cdf = cdf_[static_cast<std::size_t>(it - classes_.begin())];
    const double u = uniform01(rng);
    for (std::size_t i = 0; i < cdf.size(); ++i)
      if (u < cdf[i]) return classes_[i];
    return classes_.back();
  }

  /// P(true = truth | predicted).
  double probability(int truth, int predicted) const {
    const auto pj = std::find(classes_.begin(), classes_.end(), predicted) - classes_.begin();
    const auto ti = std::find(classes_.begin(), classes_.end(), truth) - classes_.begin();
    const auto& cdf = cdf_[static_cast<std::size_t>(pj)];
    return cdf[static_cast<std::size_t>(ti)] - (ti > 0 ? cdf[static_cast<std::size_t>(ti - 1)] : 0.0);
  }

 private:
  std::vector<int> classes_;
  std::vector<std::vector<double>> cdf_;
};

namespace detail {

/// Unbinned correlation between each paper's density of every type and its
/// score, for one label assignment.
inline std::array<stats::Correlation, 4> density_correlations(const CalibrationInput& in, std::span<const FigureLabel> labels) {
  const std::size_t np = in.paper_scores.size();
  std::vector<std::array<double, 4>> counts(np, std::array<double, 4>{});
  for (std::size_t f = 0; f < labels.size(); ++f) {
    const std::size_t slot = density_slot(labels[f]);
    if (slot < 4) counts[in.figures[f].paper][slot] += 1.0;
  }
  std::array<stats::Correlation, 4> out;
  std::vector<double> dens(np);
  for (std::size_t k = 0; k < 4; ++k) {
    for (std::size_t p = 0; p < np; ++p) dens[p] = counts[p][k] / in.paper_pages[p];
    out[k] = stats::pearson(dens, in.paper_scores);
  }
  return out;
}

}  // namespace detail

/// Every trial resamples each figure's label from the column distribution of
/// its predicted class and recomputes the unbinned density-score
/// correlation. Trial t draws from its own stream sub_seed(seed, t).
inline std::map<FigureLabel, CalibrationResult> calibration_experiment(const CalibrationInput& in,
                                                                       const svm::ConfusionMatrix& confusion,
                                                                       int trials = 2000, std::uint64_t seed = 0) {
  if (trials < 1) fail(ErrorCode::InvalidParameter, "trials must be >= 1");
  if (in.paper_scores.size() != in.paper_pages.size()) fail(ErrorCode::InvalidParameter, "paper arrays differ in length");
  for (const auto& f : in.figures)
    if (f.paper >= in.paper_scores.size()) fail(ErrorCode::InvalidParameter, "figure refers to unknown paper");
  for (int pg : in.paper_pages)
    if (pg < 1) fail(ErrorCode::InvalidParameter, "page_count must be >= 1");
  const RelabelTable table(confusion);

  std::vector<FigureLabel> raw_labels;
  for (const auto& f : in.figures) raw_labels.push_back(f.predicted);
  const auto raw = detail::density_correlations(in, raw_labels);

  std::vector<std::array<stats::Correlation, 4>> per_trial(static_cast<std::size_t>(trials));
  parallel_for(per_trial.size(), [&](std::size_t t) {
    Rng rng(sub_seed(seed, t));
    std::vector<FigureLabel> labels(in.figures.size());
    for (std::size_t f = 0; f < in.figures.size(); ++f)
      labels[f] = static_cast<FigureLabel>(table.sample(static_cast<int>(in.figures[f].predicted), rng));
    per_trial[t] = detail::density_correlations(in, labels);
  });

  std::map<FigureLabel, CalibrationResult> out;
  for (FigureLabel type : kDensityTypes) {
    const std::size_t k = density_slot(type);
    CalibrationResult r;
    r.figure_type = type;
    r.trials = trials;
    r.raw_coefficient = raw[k].coefficient;
    long failures = 0;
    for (const auto& t : per_trial) {
      r.coefficients.push_back(t[k].coefficient);
      if (!t[k].significant()) ++failures;
    }
    const auto ms = stats::mean_stderr(r.coefficients);
    r.mean = ms.mean;
    r.standard_error = ms.standard_error;
    r.fail_rate = static_cast<double>(failures) / trials;
    out.emplace(type, std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dismantling error

/// sum_i |correct_i - extracted_i| / sum_i |correct_i| over the union of
/// categories; a missing key counts as zero.
inline double dismantling_error(const std::map<std::string, long>& correct, const std::map<std::string, long>& extracted) {
  std::set<std::string> keys;
  for (const auto& [k, v] : correct) keys.insert(k);
  for (const auto& [k, v] : extracted) keys.insert(k);
  long num = 0, den = 0;
  for (const auto& k : keys) {
    const long c = correct.contains(k) ? correct.at(k) : 0;
    const long e = extracted.contains(k) ? extracted.at(k) : 0;
    num += std::labs(c - e);
    den += std::labs(c);
  }
  if (den == 0) fail(ErrorCode::UndefinedError, "no correct sub-figures; dismantling error undefined");
  return static_cast<double>(num) / static_cast<double>(den);
}

// ---------------------------------------------------------------------------
// Bias audit

struct AuditSample {
  int truth = 0;
  int predicted = 0;
  double score = 0.0;
};

struct AuditBin {
  std::size_t count = 0;
  double mean_score = 0.0;
  double precision = 0.0;  // correct / count
};

struct AuditReport {
  std::vector<AuditBin> bins;
  stats::Correlation correlation;  // precision vs mean score
  std::vector<std::string> warnings;
};

/// Bins samples by score into `percentile` slices (widened to at least
/// `min_per_bin` samples) and correlates per-bin precision with score.
inline AuditReport bias_audit(std::span<const AuditSample> samples, double percentile = 0.01, std::size_t min_per_bin = 8) {
  if (samples.empty()) fail(ErrorCode::EmptyInput, "no audit samples");
  if (!(percentile > 0.0 && percentile <= 1.0)) fail(ErrorCode::InvalidParameter, "percentile must be in (0,1]");
  AuditReport rep;
  const std::size_t n = samples.size();
  std::size_t width = static_cast<std::size_t>(std::ceil(percentile * static_cast<double>(n)));
  if (width < min_per_bin) {
    rep.warnings.push_back("bin width widened from " + std::to_string(width) + " to " + std::to_string(min_per_bin) +
                           " samples");
    width = min_per_bin;
  }
  std::vector<ScoredId> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back({std::to_string(i), samples[i].score});
  ImpactBins bins = impact_bins(ids, BinScheme::fixed_count, static_cast<double>(width));
  // A short tail bin joins its neighbour.
  if (bins.bins.size() > 1 && bins.bins.back().size() < min_per_bin) {
    auto tail = std::move(bins.bins.back());
    bins.bins.pop_back();
    bins.bins.back().insert(bins.bins.back().end(), tail.begin(), tail.end());
  }
  std::vector<double> prec, score;
  for (const auto& bin : bins.bins) {
    AuditBin b;
    b.count = bin.size();
    long correct = 0;
    double s = 0.0;
    for (const auto& id : bin) {
      const AuditSample& smp = samples[std::stoul(id)];
      correct += smp.truth == smp.predicted ? 1 : 0;
      s += smp.score;
    }
    b.mean_score = s / static_cast<double>(b.count);
    b.precision = static_cast<double>(correct) / static_cast<double>(b.count);
    rep.bins.push_back(b);
    prec.push_back(b.precision);
    score.push_back(b.mean_score);
  }
  rep.correlation = stats::pearson(prec, score);
  return rep;
}

// ---------------------------------------------------------------------------
// Aggregates

/// Mean per-type density over the papers of each group; papers whose key
/// function returns nullopt are left out.
template <class KeyFn>
std::map<std::string, std::array<double, 4>> density_by(std::span<const PaperRecord> papers,
                                                       const std::map<std::string, DensityProfile>& profiles, KeyFn&& key) {
  std::map<std::string, std::pair<std::array<double, 4>, std::size_t>> acc;
  for (const auto& p : papers) {
    const auto it = profiles.find(p.paper_id);
    if (it == profiles.end()) continue;
    const std::optional<std::string> k = key(p);
    if (!k) continue;
    auto& [sum, n] = acc[*k];
    for (std::size_t t = 0; t < 4; ++t) sum[t] += it->second.density[t];
    ++n;
  }
  std::map<std::string, std::array<double, 4>> out;
  for (const auto& [k, v] : acc) {
    std::array<double, 4> m{};
    for (std::size_t t = 0; t < 4; ++t) m[t] = v.first[t] / static_cast<double>(v.second);
    out[k] = m;
  }
  return out;
}

inline std::map<std::string, std::array<double, 4>> density_by_journal(std::span<const PaperRecord> papers,
                                                                       const std::map<std::string, DensityProfile>& profiles) {
  return density_by(papers, profiles, [](const PaperRecord& p) { return std::optional<std::string>(p.journal); });
}
inline std::map<std::string, std::array<double, 4>> density_by_topic(std::span<const PaperRecord> papers,
                                                                     const std::map<std::string, DensityProfile>& profiles) {
  return density_by(papers, profiles, [](const PaperRecord& p) { return p.topic; });
}
inline std::map<std::string, std::array<double, 4>> density_by_year(std::span<const PaperRecord> papers,
                                                                    const std::map<std::string, DensityProfile>& profiles) {
  return density_by(papers, profiles, [](const PaperRecord& p) { return std::optional<std::string>(std::to_string(p.year)); });
}

// ---------------------------------------------------------------------------
// Reference confusion matrices
//
// Reference evaluation of the figure-type classifier on 7000 labelled
// figures. Rows are the true class and columns the predicted class, both in
// FigureLabel order (equation, diagram, photo, plot, table). The singleton
// matrix drives the relabeling example: its predicted-diagram column holds
// 16, 823, 31, 129 and 58, for a total of 1057.

inline svm::ConfusionMatrix matrix_from_rows(const std::array<std::array<long, 5>, 5>& rows) {
  svm::ConfusionMatrix m({0, 1, 2, 3, 4});
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 5; ++c) m.at(r, c) = rows[r][c];
  return m;
}

inline svm::ConfusionMatrix reference_singleton_confusion() {
  return matrix_from_rows({{{1391, 16, 12, 31, 6},
                            {4, 823, 72, 75, 44},
                            {2, 31, 644, 28, 2},
                            {2, 129, 24, 1088, 36},
                            {0, 58, 0, 9, 1263}}});
}

/// Singletons plus single-type multi-chart figures; composite figures are
/// not part of the 5x5 body.
inline svm::ConfusionMatrix reference_all_confusion() {
  return matrix_from_rows({{{1391, 16, 12, 31, 6},
                            {4, 850, 82, 79, 48},
                            {2, 62, 1205, 37, 5},
                            {3, 331, 32, 1195, 47},
                            {0, 58, 0, 9, 1265}}});
}

// ---------------------------------------------------------------------------
// Report tables

inline std::string format_number(double v, int precision = 6) {
  if (!std::isfinite(v)) return "NaN";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

/// "0.84" or "NSS" when not significant.
inline std::string coefficient_cell(const stats::Correlation& c) {
  return c.significant() ? format_number(c.coefficient, 2) : std::string("NSS");
}

/// Confusion table with an optional singleton-only matrix shown in
/// parentheses, rows = truth, columns = prediction, plus totals.
inline std::string confusion_table_csv(const svm::ConfusionMatrix& all, const svm::ConfusionMatrix* singleton,
                                       const std::vector<std::string>& names) {
  auto cell = [&](long a, std::optional<long> s) { return s ? std::to_string(a) + "(" + std::to_string(*s) + ")" : std::to_string(a); };
  std::string out = "truth\\predicted";
  for (const auto& n : names) out += "," + n;
  out += ",Total\n";
  for (std::size_t r = 0; r < all.size(); ++r) {
    out += names.at(r);
    for (std::size_t c = 0; c < all.size(); ++c)
      out += "," + cell(all.at(r, c), singleton ? std::optional(singleton->at(r, c)) : std::nullopt);
    out += "," + cell(all.row_sum(r), singleton ? std::optional(singleton->row_sum(r)) : std::nullopt) + "\n";
  }
  out += "Total";
  for (std::size_t c = 0; c < all.size(); ++c)
    out += "," + cell(all.col_sum(c), singleton ? std::optional(singleton->col_sum(c)) : std::nullopt);
  out += "," + cell(all.total(), singleton ? std::optional(singleton->total()) : std::nullopt) + "\n";
  out += "Precision";
  for (std::size_t c = 0; c < all.size(); ++c) out += "," + format_number(100.0 * all.precision(c), 1) + "%";
  out += "," + format_number(100.0 * all.accuracy(), 1) + "%\n";
  return out;
}

inline std::string precision_recall_csv(const svm::CvReport& r, const std::vector<std::string>& names) {
  std::string out = "class,precision,recall\n";
  for (std::size_t i = 0; i < r.confusion.size(); ++i)
    out += names.at(i) + "," + format_number(100.0 * r.precision[i], 1) + "%," + format_number(100.0 * r.recall[i], 1) + "%\n";
  out += "accuracy," + format_number(100.0 * r.accuracy(), 1) + "%,\n";
  return out;
}

inline nlohmann::json to_json(const stats::Correlation& c) {
  nlohmann::json j = {{"p_value", c.p_value}, {"n", c.n}, {"significant", c.significant()}};
  j["coefficient"] = std::isfinite(c.coefficient) ? nlohmann::json(c.coefficient) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json to_json(const BinnedCorrelation& b) {
  return {{"figure_type", to_string(b.figure_type)},
          {"target", b.target == Target::density ? "density" : "proportion"},
          {"bins", b.bins},
          {"papers", b.papers},
          {"pearson", to_json(b.pearson)},
          {"spearman_robustness", to_json(b.spearman)}};
}

inline nlohmann::json to_json(const CalibrationResult& r) {
  return {{"figure_type", to_string(r.figure_type)}, {"trials", r.trials},
          {"raw_coefficient", std::isfinite(r.raw_coefficient) ? nlohmann::json(r.raw_coefficient) : nlohmann::json(nullptr)},
          {"mean", std::isfinite(r.mean) ? nlohmann::json(r.mean) : nlohmann::json(nullptr)},
          {"stderr", r.standard_error},
          {"fail_rate", r.fail_rate}};
}

inline nlohmann::json to_json(const AuditReport& r) {
  nlohmann::json bins = nlohmann::json::array();
  for (const auto& b : r.bins) bins.push_back({{"count", b.count}, {"mean_score", b.mean_score}, {"precision", b.precision}});
  return {{"bins", bins}, {"correlation", to_json(r.correlation)}, {"warnings", r.warnings}};
}

/// Figure counts per label before dismantling (top-level figures) and
/// after (figures without children).
inline std::string figure_counts_csv(std::span<const FigureRecord> figures) {
  std::set<std::string> parents;
  for (const auto& f : figures)
    if (f.parent_figure_id) parents.insert(*f.parent_figure_id);
  std::map<FigureLabel, std::pair<long, long>> counts;
  for (const auto& f : figures) {
    if (!f.parent_figure_id) ++counts[f.label].first;
    if (!parents.contains(f.figure_id)) ++counts[f.label].second;
  }
  std::string out = "label,before_dismantling,after_dismantling\n";
  long b = 0, a = 0;
  for (int i = 0; i <= static_cast<int>(FigureLabel::unclassified); ++i) {
    const auto l = static_cast<FigureLabel>(i);
    const auto [before, after] = counts[l];
    out += std::string(to_string(l)) + "," + std::to_string(before) + "," + std::to_string(after) + "\n";
    b += before;
    a += after;
  }
  out += "total," + std::to_string(b) + "," + std::to_string(a) + "\n";
  return out;
}

struct CorrelationRow {
  FigureLabel figure_type = FigureLabel::diagram;
  Target target = Target::density;
  std::optional<BinnedCorrelation> included;  // nullopt: fewer than 3 bins
  std::optional<BinnedCorrelation> excluded;
};

/// Coefficient table with and without the journal exclusion.
inline std::string correlation_table_csv(const std::vector<CorrelationRow>& rows) {
  std::string out = "figure_type,target,coefficient,coefficient_excluded,p_value,p_value_excluded,spearman,spearman_excluded\n";
  auto coef = [](const std::optional<BinnedCorrelation>& b) { return b ? coefficient_cell(b->pearson) : std::string("n/a"); };
  auto pv = [](const std::optional<BinnedCorrelation>& b) { return b ? format_number(b->pearson.p_value, 6) : std::string("n/a"); };
  auto sp = [](const std::optional<BinnedCorrelation>& b) { return b ? coefficient_cell(b->spearman) : std::string("n/a"); };
  for (const auto& r : rows)
    out += std::string(to_string(r.figure_type)) + "," + (r.target == Target::density ? "density" : "proportion") + "," +
           coef(r.included) + "," + coef(r.excluded) + "," + pv(r.included) + "," + pv(r.excluded) + "," + sp(r.included) +
           "," + sp(r.excluded) + "\n";
  return out;
}

}  // namespace figmine::analysis
