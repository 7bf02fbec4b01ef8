#pragma once

// Soft-margin kernel SVM: SMO dual solver, one-vs-rest multi-class wrapper,
// softmax probabilities, stratified k-fold evaluation and grid search.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "figmine/error.hpp"
#include "figmine/util.hpp"

namespace figmine::svm {

enum class Kernel { rbf, linear };

inline std::string to_string(Kernel k) { return k == Kernel::rbf ? "rbf" : "linear"; }

inline Kernel parse_kernel(const std::string& s) {
  if (s == "rbf") return Kernel::rbf;
  if (s == "linear") return Kernel::linear;
  fail(ErrorCode::InvalidParameter, "unknown kernel '" + s + "'");
}

struct SvmParams {
  Kernel kernel = Kernel::rbf;
  double gamma = 0.001;
  double penalty_c = 1000.0;

  void validate() const {
    if (!(gamma > 0.0)) fail(ErrorCode::InvalidParameter, "gamma must be positive");
    if (!(penalty_c > 0.0)) fail(ErrorCode::InvalidParameter, "penalty_c must be positive");
  }

  friend bool operator==(const SvmParams&, const SvmParams&) = default;
};

inline void to_json(nlohmann::json& j, const SvmParams& p) {
  j = {{"kernel", to_string(p.kernel)}, {"gamma", p.gamma}, {"C", p.penalty_c}};
}

inline void from_json(const nlohmann::json& j, SvmParams& p) {
  p.kernel = parse_kernel(j.value("kernel", std::string("rbf")));
  p.gamma = j.value("gamma", 0.001);
  p.penalty_c = j.contains("C") ? j.at("C").get<double>() : j.value("penalty_c", 1000.0);
  p.validate();
}

struct SolverOptions {
  double tolerance = 1e-3;
  long max_iterations = 100000;
};

using Matrix = Eigen::MatrixXd;

/// Gram matrix between the rows of a and the rows of b.
inline Matrix kernel_matrix(const Matrix& a, const Matrix& b, const SvmParams& p) {
  Matrix dot = a * b.transpose();
  if (p.kernel == Kernel::linear) return dot;
  const Eigen::VectorXd na = a.rowwise().squaredNorm();
  const Eigen::RowVectorXd nb = b.rowwise().squaredNorm().transpose();
  for (Eigen::Index i = 0; i < dot.rows(); ++i)
    for (Eigen::Index j = 0; j < dot.cols(); ++j)
      dot(i, j) = std::exp(-p.gamma * std::max(0.0, na(i) + nb(j) - 2.0 * dot(i, j)));
  return dot;
}

// ---------------------------------------------------------------------------
// Binary dual solver

struct BinarySolution {
  Eigen::VectorXd alpha;
  double rho = 0.0;  // f(x) = sum_i y_i alpha_i K(x_i, x) - rho
  double kkt_gap = 0.0;
  long iterations = 0;
};

/// Solves  min 1/2 a'Qa - e'a  s.t. 0 <= a <= C, y'a = 0,  Q_ij = y_i y_j K_ij,
/// with maximal-violating-pair selection using second-order gain. Stops once
/// the KKT gap m(a) - M(a) falls below the tolerance.
inline BinarySolution solve_binary(const Matrix& kernel, const std::vector<int>& y, double c,
                                   const SolverOptions& opt = {}) {
  const Eigen::Index n = kernel.rows();
  constexpr double kTau = 1e-12;
  BinarySolution sol;
  sol.alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd grad = Eigen::VectorXd::Constant(n, -1.0);
  auto& a = sol.alpha;

  auto q = [&](Eigen::Index i, Eigen::Index j) { return y[i] * y[j] * kernel(i, j); };

  for (;;) {
    double gmax = -std::numeric_limits<double>::infinity();
    Eigen::Index i = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (y[t] == +1) {
        if (a(t) < c && -grad(t) >= gmax) {
          gmax = -grad(t);
          i = t;
        }
      } else if (a(t) > 0 && grad(t) >= gmax) {
        gmax = grad(t);
        i = t;
      }
    }
    double gmax2 = -std::numeric_limits<double>::infinity();
    double best_gain = std::numeric_limits<double>::infinity();
    Eigen::Index j = -1;
    if (i >= 0) {
      for (Eigen::Index t = 0; t < n; ++t) {
        double diff = 0.0;
        if (y[t] == +1) {
          if (!(a(t) > 0)) continue;
          diff = gmax + grad(t);
          gmax2 = std::max(gmax2, grad(t));
        } else {
          if (!(a(t) < c)) continue;
          diff = gmax - grad(t);
          gmax2 = std::max(gmax2, -grad(t));
        }
        if (diff > 0) {
          double quad = kernel(i, i) + kernel(t, t) - 2.0 * y[i] * q(i, t);
          if (quad <= 0) quad = kTau;
          const double gain = -(diff * diff) / quad;
          if (gain <= best_gain) {
            best_gain = gain;
            j = t;
          }
        }
      }
    }
    sol.kkt_gap = gmax + gmax2;
    if (i < 0 || j < 0 || gmax + gmax2 < opt.tolerance || sol.iterations >= opt.max_iterations) break;
    ++sol.iterations;

    const double old_ai = a(i);
    const double old_aj = a(j);
    if (y[i] != y[j]) {
      double quad = kernel(i, i) + kernel(j, j) + 2.0 * q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (-grad(i) - grad(j)) / quad;
      const double diff = a(i) - a(j);
      a(i) += delta;
      a(j) += delta;
      if (diff > 0) {
        if (a(j) < 0) {
          a(j) = 0;
          a(i) = diff;
        }
      } else if (a(i) < 0) {
        a(i) = 0;
        a(j) = -diff;
      }
      if (diff > 0) {
        if (a(i) > c) {
          a(i) = c;
          a(j) = c - diff;
        }
      } else if (a(j) > c) {
        a(j) = c;
        a(i) = c + diff;
      }
    } else {
      double quad = kernel(i, i) + kernel(j, j) - 2.0 * q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (grad(i) - grad(j)) / quad;
      const double sum = a(i) + a(j);
      a(i) -= delta;
      a(j) += delta;
      if (sum > c) {
        if (a(i) > c) {
          a(i) = c;
          a(j) = sum - c;
        }
      } else if (a(j) < 0) {
        a(j) = 0;
        a(i) = sum;
      }
      if (sum > c) {
        if (a(j) > c) {
          a(j) = c;
          a(i) = sum - c;
        }
      } else if (a(i) < 0) {
        a(i) = 0;
        a(j) = sum;
      }
    }
    const double di = a(i) - old_ai;
    const double dj = a(j) - old_aj;
    for (Eigen::Index t = 0; t < n; ++t) grad(t) += q(t, i) * di + q(t, j) * dj;
  }

  // rho: mean of y_i G_i over free variables, else midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  long n_free = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = y[t] * grad(t);
    if (a(t) >= c) {
      if (y[t] == -1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (a(t) <= 0) {
      if (y[t] == +1) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  sol.rho = n_free > 0 ? sum_free / n_free : (ub + lb) / 2.0;
  return sol;
}

// ---------------------------------------------------------------------------
// Multi-class model

struct SvmModel {
  SvmParams params;
  std::vector<int> classes;   // sorted class ids; row order of coef
  Matrix support_vectors;     // m x dim, union over all one-vs-rest problems
  Matrix coef;                // classes x m, entries y_i * alpha_i
  Eigen::VectorXd rho;        // per class
  std::string metadata;       // free-form JSON carried with the model file

  int dim() const { return static_cast<int>(support_vectors.cols()); }
  int class_count() const { return static_cast<int>(classes.size()); }
};

struct Prediction {
  int label = 0;
  std::vector<double> class_probs;  // aligned with model.classes
  std::vector<double> decision;     // raw one-vs-rest margins
};

namespace detail {

inline void validate_features(const Matrix& x) {
  if (!x.allFinite()) fail(ErrorCode::InvalidFeature, "non-finite feature value");
}

inline std::vector<int> distinct_classes(const std::vector<int>& labels) {
  std::vector<int> cls(labels);
  std::sort(cls.begin(), cls.end());
  cls.erase(std::unique(cls.begin(), cls.end()), cls.end());
  return cls;
}

/// One-vs-rest training given the Gram matrix of the training rows.
inline SvmModel train_with_kernel(const Matrix& x, const Matrix& gram, const std::vector<int>& labels,
                                  const SvmParams& params, const SolverOptions& opt,
                                  std::vector<Eigen::Index>* sv_rows = nullptr) {
  SvmModel model;
  model.params = params;
  model.classes = distinct_classes(labels);
  if (model.classes.size() < 2) fail(ErrorCode::InvalidTrainingSet, "need at least two classes");
  const Eigen::Index n = x.rows();
  const auto nc = static_cast<Eigen::Index>(model.classes.size());

  Matrix dense_coef = Matrix::Zero(nc, n);
  model.rho.resize(nc);
  std::vector<int> y(static_cast<std::size_t>(n));
  for (Eigen::Index c = 0; c < nc; ++c) {
    for (Eigen::Index i = 0; i < n; ++i) y[i] = labels[i] == model.classes[c] ? +1 : -1;
    const BinarySolution sol = solve_binary(gram, y, params.penalty_c, opt);
    for (Eigen::Index i = 0; i < n; ++i) dense_coef(c, i) = y[i] * sol.alpha(i);
    model.rho(c) = sol.rho;
  }
  std::vector<Eigen::Index> sv;
  for (Eigen::Index i = 0; i < n; ++i)
    if ((dense_coef.col(i).array() != 0.0).any()) sv.push_back(i);
  model.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), x.cols());
  model.coef.resize(nc, static_cast<Eigen::Index>(sv.size()));
  for (std::size_t s = 0; s < sv.size(); ++s) {
    model.support_vectors.row(static_cast<Eigen::Index>(s)) = x.row(sv[s]);
    model.coef.col(static_cast<Eigen::Index>(s)) = dense_coef.col(sv[s]);
  }
  if (sv_rows) *sv_rows = std::move(sv);
  return model;
}

inline Matrix select_rows(const Matrix& x, const std::vector<Eigen::Index>& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
  return out;
}

inline Matrix select_block(const Matrix& k, const std::vector<Eigen::Index>& rows, const std::vector<Eigen::Index>& cols) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = k(rows[i], cols[j]);
  return out;
}

}  // namespace detail

inline SvmModel train(const Matrix& x, const std::vector<int>& labels, const SvmParams& params,
                      const SolverOptions& opt = {}) {
  params.validate();
  if (x.rows() == 0) fail(ErrorCode::InvalidTrainingSet, "empty feature set");
  if (static_cast<std::size_t>(x.rows()) != labels.size())
    fail(ErrorCode::InvalidTrainingSet, "feature/label count mismatch");
  detail::validate_features(x);
  return detail::train_with_kernel(x, kernel_matrix(x, x, params), labels, params, opt);
}

/// Softmax over margins; the largest margin maps to the largest
/// probability, ties resolved to the lowest class index.
inline std::vector<double> softmax(const std::vector<double>& margins) {
  const double top = *std::max_element(margins.begin(), margins.end());
  std::vector<double> p(margins.size());
  double total = 0.0;
  for (std::size_t i = 0; i < margins.size(); ++i) total += p[i] = std::exp(margins[i] - top);
  for (double& v : p) v /= total;
  return p;
}

inline std::size_t argmax(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

/// Margins for many rows at once (rows x classes).
inline Matrix decision_values(const SvmModel& model, const Matrix& x) {
  if (x.cols() != model.dim()) fail(ErrorCode::InvalidFeature, "feature dimension mismatch");
  detail::validate_features(x);
  const Matrix k = kernel_matrix(x, model.support_vectors, model.params);
  Matrix d = k * model.coef.transpose();
  d.rowwise() -= model.rho.transpose();
  return d;
}

inline Prediction prediction_from_margins(const SvmModel& model, std::vector<double> margins) {
  Prediction p;
  p.decision = std::move(margins);
  p.class_probs = softmax(p.decision);
  p.label = model.classes[argmax(p.class_probs)];
  return p;
}

inline Prediction predict(const SvmModel& model, std::span<const double> feature) {
  if (static_cast<int>(feature.size()) != model.dim()) fail(ErrorCode::InvalidFeature, "feature dimension mismatch");
  const Matrix row = Eigen::Map<const Eigen::RowVectorXd>(feature.data(), static_cast<Eigen::Index>(feature.size()));
  const Matrix d = decision_values(model, row);
  return prediction_from_margins(model, std::vector<double>(d.data(), d.data() + d.size()));
}

inline std::vector<Prediction> predict_batch(const SvmModel& model, const Matrix& x) {
  const Matrix d = decision_values(model, x);
  std::vector<Prediction> out;
  out.reserve(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    std::vector<double> m(static_cast<std::size_t>(d.cols()));
    for (Eigen::Index c = 0; c < d.cols(); ++c) m[c] = d(i, c);
    out.push_back(prediction_from_margins(model, std::move(m)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

/// Entry (i, j) counts items of true class i predicted as class j.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::vector<int> classes)
      : classes_(std::move(classes)), counts_(classes_.size() * classes_.size(), 0) {}

  const std::vector<int>& classes() const { return classes_; }
  std::size_t size() const { return classes_.size(); }

  void add(int truth, int predicted, long count = 1) { counts_[index(truth) * size() + index(predicted)] += count; }

  long at(std::size_t row, std::size_t col) const { return counts_[row * size() + col]; }
  long& at(std::size_t row, std::size_t col) { return counts_[row * size() + col]; }

  long row_sum(std::size_t row) const {
    long s = 0;
    for (std::size_t c = 0; c < size(); ++c) s += at(row, c);
    return s;
  }
  long col_sum(std::size_t col) const {
    long s = 0;
    for (std::size_t r = 0; r < size(); ++r) s += at(r, col);
    return s;
  }
  long total() const { return std::accumulate(counts_.begin(), counts_.end(), 0L); }

  /// M(i,i) / sum_j M(j,i); 0 when nothing was predicted as i.
  double precision(std::size_t i) const {
    const long d = col_sum(i);
    return d > 0 ? static_cast<double>(at(i, i)) / d : 0.0;
  }
  /// M(i,i) / sum_j M(i,j); 0 when class i has no samples.
  double recall(std::size_t i) const {
    const long d = row_sum(i);
    return d > 0 ? static_cast<double>(at(i, i)) / d : 0.0;
  }
  double accuracy() const {
    long diag = 0;
    for (std::size_t i = 0; i < size(); ++i) diag += at(i, i);
    const long t = total();
    return t > 0 ? static_cast<double>(diag) / t : 0.0;
  }

  std::size_t index(int cls) const {
    const auto it = std::find(classes_.begin(), classes_.end(), cls);
    if (it == classes_.end()) fail(ErrorCode::InvalidParameter, "class " + std::to_string(cls) + " not in confusion matrix");
    return static_cast<std::size_t>(it - classes_.begin());
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    if (o.classes_ != classes_) fail(ErrorCode::InvalidParameter, "confusion matrix class mismatch");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += o.counts_[i];
    return *this;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::vector<int> classes_;
  std::vector<long> counts_;
};

inline nlohmann::json to_json(const ConfusionMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.size(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t c = 0; c < m.size(); ++c) row.push_back(m.at(r, c));
    rows.push_back(row);
  }
  return {{"classes", m.classes()}, {"counts", rows}};
}

inline ConfusionMatrix confusion_from_json(const nlohmann::json& j) {
  ConfusionMatrix m(j.at("classes").get<std::vector<int>>());
  const auto& rows = j.at("counts");
  if (rows.size() != m.size()) fail(ErrorCode::ParseError, "confusion matrix is not square");
  for (std::size_t r = 0; r < m.size(); ++r) {
    if (rows[r].size() != m.size()) fail(ErrorCode::ParseError, "confusion matrix is not square");
    for (std::size_t c = 0; c < m.size(); ++c) m.at(r, c) = rows[r][c].get<long>();
  }
  return m;
}

inline ConfusionMatrix evaluate(const SvmModel& model, const Matrix& x, const std::vector<int>& labels) {
  ConfusionMatrix cm(model.classes);
  const auto preds = predict_batch(model, x);
  for (std::size_t i = 0; i < preds.size(); ++i) cm.add(labels[i], preds[i].label);
  return cm;
}

struct Folds {
  std::vector<int> fold_of;  // per sample
  int count = 0;
  std::vector<std::string> warnings;
};

/// Stratified assignment: each class is shuffled with the seed and dealt
/// round-robin across folds. A class with fewer samples than folds ends up
/// with one sample per fold, i.e. leave-one-out for that class.
inline Folds stratified_folds(const std::vector<int>& labels, int folds, std::uint64_t seed) {
  if (folds < 2) fail(ErrorCode::InvalidParameter, "folds must be >= 2");
  Folds f;
  f.count = folds;
  f.fold_of.assign(labels.size(), 0);
  const auto classes = detail::distinct_classes(labels);
  for (std::size_t ci = 0; ci < classes.size(); ++ci) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == classes[ci]) members.push_back(i);
    if (members.size() < static_cast<std::size_t>(folds))
      f.warnings.push_back("class " + std::to_string(classes[ci]) + " has " + std::to_string(members.size()) +
                           " samples (< " + std::to_string(folds) + " folds); using leave-one-out for it");
    Rng rng(sub_seed(seed, static_cast<std::uint64_t>(ci)));
    shuffle_in_place(members, rng);
    for (std::size_t k = 0; k < members.size(); ++k) f.fold_of[members[k]] = static_cast<int>(k % folds);
  }
  return f;
}

/// Stratified train/test split; `test_fraction` of each class (rounded) is
/// reserved for testing.
inline std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> holdout_split(const std::vector<int>& labels,
                                                                                     double test_fraction,
                                                                                     std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) fail(ErrorCode::InvalidParameter, "test_fraction must be in (0,1)");
  std::vector<Eigen::Index> train_idx, test_idx;
  const auto classes = detail::distinct_classes(labels);
  for (std::size_t ci = 0; ci < classes.size(); ++ci) {
    std::vector<Eigen::Index> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == classes[ci]) members.push_back(static_cast<Eigen::Index>(i));
    Rng rng(sub_seed(seed, static_cast<std::uint64_t>(ci)));
    shuffle_in_place(members, rng);
    const auto n_test = static_cast<std::size_t>(std::lround(test_fraction * members.size()));
    for (std::size_t k = 0; k < members.size(); ++k) (k < n_test ? test_idx : train_idx).push_back(members[k]);
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {train_idx, test_idx};
}

struct CvReport {
  ConfusionMatrix confusion;
  std::vector<double> precision;  // aligned with confusion.classes()
  std::vector<double> recall;
  std::vector<std::string> warnings;

  double accuracy() const { return confusion.accuracy(); }
};

inline nlohmann::json to_json(const CvReport& r) {
  nlohmann::json per_class = nlohmann::json::array();
  for (std::size_t i = 0; i < r.confusion.size(); ++i)
    per_class.push_back({{"class", r.confusion.classes()[i]}, {"precision", r.precision[i]}, {"recall", r.recall[i]}});
  return {{"accuracy", r.accuracy()}, {"per_class", per_class}, {"confusion", to_json(r.confusion)}, {"warnings", r.warnings}};
}

namespace detail {

inline CvReport cross_validate_gram(const Matrix& x, const Matrix& gram, const std::vector<int>& labels,
                                    const SvmParams& params, const Folds& folds, const SolverOptions& opt) {
  CvReport report;
  report.confusion = ConfusionMatrix(distinct_classes(labels));
  report.warnings = folds.warnings;
  for (int f = 0; f < folds.count; ++f) {
    std::vector<Eigen::Index> tr, te;
    for (std::size_t i = 0; i < labels.size(); ++i) (folds.fold_of[i] == f ? te : tr).push_back(static_cast<Eigen::Index>(i));
    if (te.empty()) continue;
    std::vector<int> tr_labels;
    for (auto i : tr) tr_labels.push_back(labels[i]);
    std::vector<Eigen::Index> sv_local;
    const SvmModel model =
        train_with_kernel(select_rows(x, tr), select_block(gram, tr, tr), tr_labels, params, opt, &sv_local);
    // Test margins come straight from the precomputed Gram matrix.
    std::vector<Eigen::Index> sv_cols;
    for (auto s : sv_local) sv_cols.push_back(tr[s]);
    Matrix d = select_block(gram, te, sv_cols) * model.coef.transpose();
    d.rowwise() -= model.rho.transpose();
    for (std::size_t i = 0; i < te.size(); ++i) {
      std::vector<double> m(static_cast<std::size_t>(d.cols()));
      for (Eigen::Index c = 0; c < d.cols(); ++c) m[c] = d(static_cast<Eigen::Index>(i), c);
      report.confusion.add(labels[te[i]], prediction_from_margins(model, std::move(m)).label);
    }
  }
  for (std::size_t i = 0; i < report.confusion.size(); ++i) {
    report.precision.push_back(report.confusion.precision(i));
    report.recall.push_back(report.confusion.recall(i));
  }
  return report;
}

inline void check_training_inputs(const Matrix& x, const std::vector<int>& labels) {
  if (x.rows() == 0) fail(ErrorCode::InvalidTrainingSet, "empty feature set");
  if (static_cast<std::size_t>(x.rows()) != labels.size())
    fail(ErrorCode::InvalidTrainingSet, "feature/label count mismatch");
  validate_features(x);
  if (distinct_classes(labels).size() < 2) fail(ErrorCode::InvalidTrainingSet, "need at least two classes");
}

}  // namespace detail

inline CvReport cross_validate(const Matrix& x, const std::vector<int>& labels, const SvmParams& params, int folds = 10,
                               std::uint64_t seed = 0, const SolverOptions& opt = {}) {
  params.validate();
  detail::check_training_inputs(x, labels);
  const Folds f = stratified_folds(labels, folds, seed);
  return detail::cross_validate_gram(x, kernel_matrix(x, x, params), labels, params, f, opt);
}

struct GridResult {
  SvmParams best;
  std::size_t best_index = 0;
  std::vector<double> accuracy;  // mean CV accuracy per grid cell, in grid order
  std::vector<std::string> warnings;
};

/// Every cell is scored on the same folds. The best cell maximizes accuracy;
/// ties go to the earlier cell.
inline GridResult grid_search(const Matrix& x, const std::vector<int>& labels, const std::vector<SvmParams>& grid,
                              int folds = 10, std::uint64_t seed = 0, const SolverOptions& opt = {}) {
  if (grid.empty()) fail(ErrorCode::InvalidParameter, "empty parameter grid");
  for (const auto& p : grid) p.validate();
  detail::check_training_inputs(x, labels);
  const Folds f = stratified_folds(labels, folds, seed);
  GridResult out;
  out.warnings = f.warnings;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const CvReport r = detail::cross_validate_gram(x, kernel_matrix(x, x, grid[g]), labels, grid[g], f, opt);
    out.accuracy.push_back(r.accuracy());
    if (out.accuracy[g] > out.accuracy[out.best_index]) out.best_index = g;
  }
  out.best = grid[out.best_index];
  return out;
}

// ---------------------------------------------------------------------------
// Serialization: 8-byte magic, u32 version, little-endian payload.

inline constexpr std::string_view kModelMagic = "FIGMSVM\x01";
inline constexpr std::uint32_t kModelVersion = 1;

inline std::vector<std::uint8_t> serialize(const SvmModel& m) {
  BinaryWriter w;
  w.magic(kModelMagic);
  w.put<std::uint32_t>(kModelVersion);
  w.put<std::uint8_t>(m.params.kernel == Kernel::rbf ? 0 : 1);
  w.put<double>(m.params.gamma);
  w.put<double>(m.params.penalty_c);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.classes.size()));
  for (int c : m.classes) w.put<std::int32_t>(c);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.dim()));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(m.support_vectors.rows()));
  for (Eigen::Index i = 0; i < m.support_vectors.rows(); ++i)
    for (Eigen::Index j = 0; j < m.support_vectors.cols(); ++j) w.put<double>(m.support_vectors(i, j));
  for (Eigen::Index i = 0; i < m.coef.rows(); ++i)
    for (Eigen::Index j = 0; j < m.coef.cols(); ++j) w.put<double>(m.coef(i, j));
  for (Eigen::Index i = 0; i < m.rho.size(); ++i) w.put<double>(m.rho(i));
  w.put_string(m.metadata);
  return w.bytes();
}

inline SvmModel deserialize_model(std::span<const std::uint8_t> bytes) {
  BinaryReader r(bytes);
  r.expect_magic(kModelMagic);
  if (const auto v = r.get<std::uint32_t>(); v != kModelVersion)
    fail(ErrorCode::ParseError, "unsupported model version " + std::to_string(v));
  SvmModel m;
  m.params.kernel = r.get<std::uint8_t>() == 0 ? Kernel::rbf : Kernel::linear;
  m.params.gamma = r.get<double>();
  m.params.penalty_c = r.get<double>();
  const auto nc = r.get<std::uint32_t>();
  if (nc < 2 || nc > 4096) fail(ErrorCode::ParseError, "implausible class count");
  for (std::uint32_t i = 0; i < nc; ++i) m.classes.push_back(r.get<std::int32_t>());
  const auto dim = r.get<std::uint32_t>();
  const auto nsv = r.get<std::uint64_t>();
  if (dim > (1u << 24) || nsv > bytes.size()) fail(ErrorCode::ParseError, "implausible model size");
  m.support_vectors.resize(static_cast<Eigen::Index>(nsv), dim);
  for (Eigen::Index i = 0; i < m.support_vectors.rows(); ++i)
    for (Eigen::Index j = 0; j < m.support_vectors.cols(); ++j) m.support_vectors(i, j) = r.get<double>();
  m.coef.resize(nc, static_cast<Eigen::Index>(nsv));
  for (Eigen::Index i = 0; i < m.coef.rows(); ++i)
    for (Eigen::Index j = 0; j < m.coef.cols(); ++j) m.coef(i, j) = r.get<double>();
  m.rho.resize(nc);
  for (Eigen::Index i = 0; i < m.rho.size(); ++i) m.rho(i) = r.get<double>();
  m.metadata = r.get_string();
  if (!r.at_end()) fail(ErrorCode::ParseError, "trailing bytes in model");
  return m;
}

}  // namespace figmine::svm
