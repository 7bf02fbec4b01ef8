#include "figmine/svm.hpp"

#include <cmath>
#include <limits>

#include "test_support.hpp"

using namespace figmine;
using namespace figmine::svm;
using figmine::testing::expect_code;

namespace {

struct Blobs {
  Matrix x;
  std::vector<int> y;
};

Blobs blobs(int per_class, int classes, double spread, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> nd;
  Blobs b;
  b.x.resize(per_class * classes, 2);
  for (int c = 0; c < classes; ++c)
    for (int i = 0; i < per_class; ++i) {
      const int r = c * per_class + i;
      const double angle = 2.0 * 3.141592653589793 * c / classes;
      b.x(r, 0) = 3.0 * std::cos(angle) + spread * nd(rng);
      b.x(r, 1) = 3.0 * std::sin(angle) + spread * nd(rng);
      b.y.push_back(c);
    }
  return b;
}

SvmParams rbf(double gamma, double c) {
  SvmParams p;
  p.kernel = Kernel::rbf;
  p.gamma = gamma;
  p.penalty_c = c;
  return p;
}

}  // namespace

TEST(Solver, XorMatchesClosedForm) {
  // Four corners of the square, opposite corners share a label. Symmetry
  // forces equal multipliers a and a zero offset; the dual then reduces to
  // min 2 a^2 s - 4 a with s = 1 + e^-8 - 2 e^-4.
  Matrix x(4, 2);
  x << 1, 1, -1, -1, 1, -1, -1, 1;
  const std::vector<int> y{1, 1, -1, -1};
  const Matrix k = kernel_matrix(x, x, rbf(1.0, 10.0));
  SolverOptions opt;
  opt.tolerance = 1e-10;
  const BinarySolution sol = solve_binary(k, y, 10.0, opt);
  const double expected = 1.0 / (1.0 + std::exp(-8.0) - 2.0 * std::exp(-4.0));
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(sol.alpha(i), expected, 1e-8);
  EXPECT_NEAR(sol.rho, 0.0, 1e-8);
}

TEST(Solver, TwoPointLinearMargin) {
  Matrix x(2, 1);
  x << 0, 1;
  SvmParams p;
  p.kernel = Kernel::linear;
  SolverOptions opt;
  opt.tolerance = 1e-12;
  const BinarySolution sol = solve_binary(kernel_matrix(x, x, p), {1, -1}, 100.0, opt);
  // Hard margin: w = -2, f(x) = -2x + 1, alpha = 2 / |x1 - x2|^2.
  EXPECT_NEAR(sol.alpha(0), 2.0, 1e-9);
  EXPECT_NEAR(sol.alpha(1), 2.0, 1e-9);
  EXPECT_NEAR(sol.rho, -1.0, 1e-9);
}

TEST(Solver, BoxConstraintCaps) {
  Matrix x(2, 1);
  x << 0, 1;
  SvmParams p;
  p.kernel = Kernel::linear;
  const BinarySolution sol = solve_binary(kernel_matrix(x, x, p), {1, -1}, 0.5, {});
  EXPECT_DOUBLE_EQ(sol.alpha(0), 0.5);
  EXPECT_DOUBLE_EQ(sol.alpha(1), 0.5);
}

TEST(Kernel, RbfEntries) {
  Matrix a(1, 2), b(2, 2);
  a << 0, 0;
  b << 3, 4, 0, 0;
  const Matrix k = kernel_matrix(a, b, rbf(0.1, 1));
  EXPECT_NEAR(k(0, 0), std::exp(-2.5), 1e-15);
  EXPECT_DOUBLE_EQ(k(0, 1), 1.0);
}

TEST(Model, SeparatesWellSpacedBlobs) {
  const Blobs b = blobs(30, 4, 0.3, 1);
  const SvmModel m = train(b.x, b.y, rbf(0.5, 10));
  EXPECT_EQ(m.classes, (std::vector<int>{0, 1, 2, 3}));
  EXPECT_DOUBLE_EQ(evaluate(m, b.x, b.y).accuracy(), 1.0);
  for (const auto& p : predict_batch(m, b.x)) {
    double s = 0;
    for (double v : p.class_probs) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
    EXPECT_EQ(m.classes[argmax(p.class_probs)], p.label);
    EXPECT_EQ(argmax(p.decision), argmax(p.class_probs));
  }
}

TEST(Model, SingleAndBatchPredictionsAgree) {
  const Blobs b = blobs(10, 3, 1.0, 2);
  const SvmModel m = train(b.x, b.y, rbf(0.3, 5));
  const auto batch = predict_batch(m, b.x);
  for (Eigen::Index i = 0; i < b.x.rows(); ++i) {
    const std::vector<double> row{b.x(i, 0), b.x(i, 1)};
    const Prediction p = predict(m, row);
    EXPECT_EQ(p.label, batch[i].label);
    for (std::size_t c = 0; c < p.decision.size(); ++c) EXPECT_NEAR(p.decision[c], batch[i].decision[c], 1e-12);
  }
}

TEST(Model, SerializationRoundTrip) {
  const Blobs b = blobs(10, 3, 1.0, 3);
  SvmModel m = train(b.x, b.y, rbf(0.3, 5));
  m.metadata = R"({"note":"x"})";
  const SvmModel back = deserialize_model(serialize(m));
  EXPECT_EQ(back.classes, m.classes);
  EXPECT_EQ(back.coef, m.coef);
  EXPECT_EQ(back.support_vectors, m.support_vectors);
  EXPECT_EQ(back.metadata, m.metadata);
  EXPECT_EQ(back.params.gamma, m.params.gamma);
}

TEST(Model, RejectsBadInputs) {
  Matrix x(2, 1);
  x << 0, std::numeric_limits<double>::quiet_NaN();
  expect_code(ErrorCode::InvalidFeature, [&] { train(x, {0, 1}, rbf(1, 1)); });
  Matrix ok(2, 1);
  ok << 0, 1;
  expect_code(ErrorCode::InvalidTrainingSet, [&] { train(ok, {1, 1}, rbf(1, 1)); });
  expect_code(ErrorCode::InvalidTrainingSet, [&] { train(ok, {0}, rbf(1, 1)); });
  expect_code(ErrorCode::InvalidParameter, [&] { train(ok, {0, 1}, rbf(-1, 1)); });
  const SvmModel m = train(ok, {0, 1}, rbf(1, 1));
  expect_code(ErrorCode::InvalidFeature, [&] { predict(m, std::vector<double>{1, 2}); });
}

TEST(Softmax, StableAndOrdered) {
  const auto p = softmax({1000.0, 999.0, 0.0});
  EXPECT_NEAR(p[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
  EXPECT_GT(p[0], p[1]);
  EXPECT_EQ(argmax({0.2, 0.5, 0.5}), 1u);
}

TEST(Folds, StratifiedAndBalanced) {
  std::vector<int> labels;
  for (int i = 0; i < 53; ++i) labels.push_back(i % 3 == 0 ? 7 : 2);
  const Folds f = stratified_folds(labels, 10, 4);
  std::map<std::pair<int, int>, int> counts;
  for (std::size_t i = 0; i < labels.size(); ++i) ++counts[{labels[i], f.fold_of[i]}];
  for (int cls : {2, 7}) {
    int lo = 1 << 30, hi = 0;
    for (int k = 0; k < 10; ++k) {
      lo = std::min(lo, counts[{cls, k}]);
      hi = std::max(hi, counts[{cls, k}]);
    }
    EXPECT_LE(hi - lo, 1);
  }
  EXPECT_TRUE(f.warnings.empty());
  const Folds small = stratified_folds({0, 0, 1, 1, 1}, 3, 1);
  EXPECT_EQ(small.warnings.size(), 1u);
}

TEST(Holdout, ReservesFractionPerClass) {
  std::vector<int> labels(100, 0);
  for (int i = 50; i < 100; ++i) labels[i] = 1;
  const auto [train_idx, test_idx] = holdout_split(labels, 0.2, 9);
  EXPECT_EQ(test_idx.size(), 20u);
  EXPECT_EQ(train_idx.size(), 80u);
  int ones = 0;
  for (auto i : test_idx) ones += labels[i];
  EXPECT_EQ(ones, 10);
  expect_code(ErrorCode::InvalidParameter, [&] { holdout_split(labels, 1.0, 9); });
}

TEST(CrossValidation, ConfusionRowsMatchClassSizes) {
  const Blobs b = blobs(12, 3, 1.5, 5);
  const CvReport r = cross_validate(b.x, b.y, rbf(0.5, 10), 4, 6);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(r.confusion.row_sum(i), 12);
  EXPECT_EQ(r.confusion.total(), 36);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(r.recall[i], r.confusion.recall(i));
    EXPECT_DOUBLE_EQ(r.precision[i], r.confusion.precision(i));
  }
}

TEST(CrossValidation, MatchesManualFoldLoop) {
  const Blobs b = blobs(10, 3, 1.8, 7);
  const SvmParams p = rbf(0.4, 3);
  const CvReport r = cross_validate(b.x, b.y, p, 5, 8);
  const Folds f = stratified_folds(b.y, 5, 8);
  ConfusionMatrix manual({0, 1, 2});
  for (int k = 0; k < 5; ++k) {
    std::vector<Eigen::Index> tr, te;
    for (std::size_t i = 0; i < b.y.size(); ++i) (f.fold_of[i] == k ? te : tr).push_back(i);
    Matrix xtr(tr.size(), 2);
    std::vector<int> ytr;
    for (std::size_t i = 0; i < tr.size(); ++i) {
      xtr.row(i) = b.x.row(tr[i]);
      ytr.push_back(b.y[tr[i]]);
    }
    const SvmModel m = train(xtr, ytr, p);
    for (auto i : te) manual.add(b.y[i], predict(m, std::vector<double>{b.x(i, 0), b.x(i, 1)}).label);
  }
  EXPECT_EQ(r.confusion, manual);
}

TEST(GridSearch, ScoresEachCellLikeCrossValidation) {
  const Blobs b = blobs(10, 3, 2.0, 9);
  const std::vector<SvmParams> grid{rbf(0.01, 1), rbf(0.5, 10), rbf(5, 100)};
  const GridResult g = grid_search(b.x, b.y, grid, 5, 3);
  ASSERT_EQ(g.accuracy.size(), 3u);
  for (std::size_t i = 0; i < grid.size(); ++i)
    EXPECT_DOUBLE_EQ(g.accuracy[i], cross_validate(b.x, b.y, grid[i], 5, 3).accuracy());
  EXPECT_EQ(g.accuracy[g.best_index], *std::max_element(g.accuracy.begin(), g.accuracy.end()));
}

TEST(GridSearch, TiesGoToEarlierCell) {
  const Blobs b = blobs(8, 2, 0.2, 10);
  const GridResult g = grid_search(b.x, b.y, {rbf(0.5, 10), rbf(0.5, 10)}, 4, 1);
  EXPECT_EQ(g.best_index, 0u);
  expect_code(ErrorCode::InvalidParameter, [&] { grid_search(b.x, b.y, {}, 4, 1); });
}

TEST(Confusion, PrecisionRecallAndJson) {
  ConfusionMatrix m({3, 5});
  m.add(3, 3, 8);
  m.add(3, 5, 2);
  m.add(5, 5, 5);
  EXPECT_DOUBLE_EQ(m.precision(1), 5.0 / 7.0);
  EXPECT_DOUBLE_EQ(m.recall(0), 0.8);
  EXPECT_DOUBLE_EQ(m.accuracy(), 13.0 / 15.0);
  EXPECT_EQ(confusion_from_json(to_json(m)), m);
  ConfusionMatrix empty({1, 2});
  EXPECT_EQ(empty.precision(0), 0.0);
  expect_code(ErrorCode::InvalidParameter, [&] { m.add(4, 3); });
}
