#pragma once

// Bag-of-visual-words figure features: 128x128 normalization, 6x6 patch
// sampling with contrast normalization, ZCA whitening, a k-means codebook,
// and the four-quadrant histogram encoding (4 x 200 = 800 bins).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "figmine/error.hpp"
#include "figmine/image.hpp"
#include "figmine/util.hpp"

namespace figmine::features {

/// Geometry of the encoder. The defaults are the production values; the
/// small-scale tests shrink everything to make brute-force oracles cheap.
struct Geometry {
  int image_size = 128;
  int window = 6;
  int codebook_size = 200;

  constexpr int patch_dim() const { return window * window; }
  constexpr int windows_per_side() const { return image_size - window + 1; }
  constexpr int window_count() const { return windows_per_side() * windows_per_side(); }
  constexpr int feature_dim() const { return 4 * codebook_size; }
  /// Offset of the pixel treated as the window centre.
  constexpr int center_offset() const { return (window - 1) / 2; }
};

inline constexpr Geometry kDefaultGeometry{};
static_assert(kDefaultGeometry.window_count() == 15129);
static_assert(kDefaultGeometry.feature_dim() == 800);

/// Added to the patch variance before dividing; 10 on the 0..255 scale.
inline constexpr double kContrastEpsilon = 10.0 / (255.0 * 255.0);
inline constexpr double kDefaultZcaEpsilon = 0.01;

using PatchMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using FeatureVector = std::vector<std::int32_t>;

// ---------------------------------------------------------------------------
// Normalization

/// Scale so the longer edge equals `size`, keep the aspect ratio, and centre
/// the result on a white square canvas.
inline GrayImage normalize_image(const GrayImage& img, int size = kDefaultGeometry.image_size) {
  if (img.empty()) fail(ErrorCode::InvalidImage, "zero-area image");
  if (img.width == size && img.height == size) return img;
  const int longer = std::max(img.width, img.height);
  const auto scaled = [&](int edge) {
    return std::max(1, static_cast<int>(std::lround(static_cast<double>(edge) * size / longer)));
  };
  const int w = img.width >= img.height ? size : scaled(img.width);
  const int h = img.height >= img.width ? size : scaled(img.height);
  const GrayImage content = resample_area(img, w, h);
  GrayImage canvas(size, size, 1.0f);
  paste(canvas, content, (size - w) / 2, (size - h) / 2);
  return canvas;
}

// ---------------------------------------------------------------------------
// Patches

/// In-place contrast normalization: x <- (x - mean) / sqrt(var + eps_c), with
/// the population variance. A constant patch becomes the zero vector.
inline void contrast_normalize(std::span<double> patch, double epsilon = kContrastEpsilon) {
  const double n = static_cast<double>(patch.size());
  double mean = 0.0;
  for (double v : patch) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : patch) var += (v - mean) * (v - mean);
  var /= n;
  if (var == 0.0) {
    std::fill(patch.begin(), patch.end(), 0.0);
    return;
  }
  const double scale = 1.0 / std::sqrt(var + epsilon);
  for (double& v : patch) v = (v - mean) * scale;
}

inline void extract_patch(const GrayImage& img, int row, int col, int window, std::span<double> out) {
  for (int r = 0; r < window; ++r)
    for (int c = 0; c < window; ++c) out[r * window + c] = img.at(row + r, col + c);
}

/// Draw `per_image` contrast-normalized windows uniformly from each image.
/// Image i uses its own stream derived from (seed, i), so the result does not
/// depend on evaluation order.
inline PatchMatrix sample_patches(std::span<const GrayImage> images, int per_image, std::uint64_t seed,
                                  const Geometry& geo = kDefaultGeometry) {
  if (per_image < 1) fail(ErrorCode::InvalidParameter, "per_image must be >= 1");
  const int dim = geo.patch_dim();
  PatchMatrix patches(static_cast<Eigen::Index>(images.size()) * per_image, dim);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const GrayImage& img = images[i];
    if (img.width != geo.image_size || img.height != geo.image_size)
      fail(ErrorCode::InvalidImage, "sample_patches expects normalized images");
    Rng rng(sub_seed(seed, i));
    const auto span = static_cast<std::uint64_t>(geo.windows_per_side());
    for (int p = 0; p < per_image; ++p) {
      const int row = static_cast<int>(uniform_index(rng, span));
      const int col = static_cast<int>(uniform_index(rng, span));
      const Eigen::Index idx = static_cast<Eigen::Index>(i) * per_image + p;
      std::span<double> out(patches.row(idx).data(), static_cast<std::size_t>(dim));
      extract_patch(img, row, col, geo.window, out);
      contrast_normalize(out);
    }
  }
  return patches;
}

// ---------------------------------------------------------------------------
// Whitening

struct WhiteningTransform {
  Eigen::VectorXd mean;
  Eigen::MatrixXd matrix;  // symmetric ZCA matrix
  double epsilon = kDefaultZcaEpsilon;

  int dim() const { return static_cast<int>(mean.size()); }

  /// Row-wise: (x - mean) * matrix^T.
  PatchMatrix apply(const PatchMatrix& patches) const {
    PatchMatrix centered = patches.rowwise() - mean.transpose();
    return centered * matrix.transpose();
  }

  static WhiteningTransform identity(int dim) {
    return {Eigen::VectorXd::Zero(dim), Eigen::MatrixXd::Identity(dim, dim), kDefaultZcaEpsilon};
  }
};

/// ZCA whitening with an eigenvalue floor: W = U diag(1/sqrt(max(l, eps))) U^T
/// where C = U diag(l) U^T is the population covariance. Directions whose
/// variance is at least eps come out with unit variance.
inline WhiteningTransform fit_whitening(const PatchMatrix& patches, double epsilon = kDefaultZcaEpsilon) {
  if (!(epsilon > 0.0)) fail(ErrorCode::InvalidParameter, "epsilon_zca must be positive");
  const Eigen::Index n = patches.rows();
  const Eigen::Index dim = patches.cols();
  if (n <= dim) fail(ErrorCode::InsufficientData, "whitening needs more patches than dimensions");

  WhiteningTransform t;
  t.epsilon = epsilon;
  t.mean = patches.colwise().mean().transpose();
  const PatchMatrix centered = patches.rowwise() - t.mean.transpose();
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) fail(ErrorCode::InvalidParameter, "covariance eigendecomposition failed");
  const Eigen::VectorXd inv_sqrt = eig.eigenvalues().unaryExpr([epsilon](double l) { return 1.0 / std::sqrt(std::max(l, epsilon)); });
  t.matrix = eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
  return t;
}

/// Population covariance of a row-sample matrix; shared by tests and the
/// acceptance report.
inline Eigen::MatrixXd sample_covariance(const PatchMatrix& x) {
  const Eigen::RowVectorXd mu = x.colwise().mean();
  const PatchMatrix c = x.rowwise() - mu;
  return (c.transpose() * c) / static_cast<double>(x.rows());
}

// ---------------------------------------------------------------------------
// Codebook

struct Codebook {
  Geometry geometry;
  WhiteningTransform whitening;
  Eigen::MatrixXd centroids;  // k x patch_dim, whitened space

  int k() const { return static_cast<int>(centroids.rows()); }
};

struct KMeansOptions {
  int max_iterations = 100;
  double tolerance = 1e-6;  // max centroid displacement
};

struct KMeansResult {
  Eigen::MatrixXd centroids;
  std::vector<int> assignment;
  std::vector<double> objective;  // sum of squared distances after each assignment step
  int iterations = 0;
  bool converged = false;
};

namespace detail {

/// Nearest centroid per row of `points` (lowest index on ties), with the
/// exact squared distance to the chosen centroid. Candidate scores come from
/// one matrix product, |c|^2 - 2 x.c, evaluated in blocks of rows.
inline void assign_nearest(const PatchMatrix& points, const Eigen::MatrixXd& centroids, std::vector<int>& assignment,
                           std::vector<double>& dist) {
  const Eigen::Index n = points.rows();
  const Eigen::Index k = centroids.rows();
  assignment.resize(static_cast<std::size_t>(n));
  dist.resize(static_cast<std::size_t>(n));
  const Eigen::RowVectorXd norms = centroids.rowwise().squaredNorm().transpose();
  constexpr Eigen::Index kBlock = 4096;
  for (Eigen::Index start = 0; start < n; start += kBlock) {
    const Eigen::Index rows = std::min(kBlock, n - start);
    const Eigen::MatrixXd scores =
        (-2.0 * (points.middleRows(start, rows) * centroids.transpose())).rowwise() + norms;
    for (Eigen::Index i = 0; i < rows; ++i) {
      Eigen::Index best = 0;
      double best_s = scores(i, 0);
      for (Eigen::Index c = 1; c < k; ++c)
        if (scores(i, c) < best_s) {
          best_s = scores(i, c);
          best = c;
        }
      assignment[start + i] = static_cast<int>(best);
      dist[start + i] = (points.row(start + i) - centroids.row(best)).squaredNorm();
    }
  }
}

}  // namespace detail

/// k-means++ seeding followed by Lloyd iterations. An empty cluster is
/// re-seeded with the point currently farthest from its centroid.
inline KMeansResult kmeans(const PatchMatrix& points, int k, std::uint64_t seed, const KMeansOptions& opt = {}) {
  const Eigen::Index n = points.rows();
  if (k < 1) fail(ErrorCode::InvalidParameter, "k must be >= 1");
  if (n < k) fail(ErrorCode::InsufficientData, "fewer points than clusters");

  Rng rng(seed);
  KMeansResult res;
  res.centroids.resize(k, points.cols());

  // k-means++: first centre uniform, then proportional to squared distance.
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  Eigen::Index pick = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::uint64_t>(n)));
  for (int c = 0; c < k; ++c) {
    res.centroids.row(c) = points.row(pick);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (points.row(i) - res.centroids.row(c)).squaredNorm());
      total += d2[i];
    }
    if (c + 1 == k) break;
    if (!(total > 0.0)) fail(ErrorCode::InsufficientData, "fewer distinct points than clusters");
    const double target = uniform01(rng) * total;
    double acc = 0.0;
    pick = -1;
    Eigen::Index last_positive = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      last_positive = i;
      acc += d2[i];
      if (acc > target) {
        pick = i;
        break;
      }
    }
    if (pick < 0) pick = last_positive;
  }

  std::vector<double> dist;
  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    detail::assign_nearest(points, res.centroids, res.assignment, dist);
    res.objective.push_back(std::accumulate(dist.begin(), dist.end(), 0.0));

    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(k, points.cols());
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      next.row(res.assignment[i]) += points.row(i);
      ++counts[res.assignment[i]];
    }
    std::vector<bool> taken(static_cast<std::size_t>(n), false);
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        next.row(c) /= static_cast<double>(counts[c]);
        continue;
      }
      Eigen::Index far = -1;
      for (Eigen::Index i = 0; i < n; ++i)
        if (!taken[i] && (far < 0 || dist[i] > dist[far])) far = i;
      taken[far] = true;
      next.row(c) = points.row(far);
      dist[far] = 0.0;
    }
    const double shift = (next - res.centroids).rowwise().norm().maxCoeff();
    res.centroids = std::move(next);
    res.iterations = iter + 1;
    if (shift < opt.tolerance) {
      res.converged = true;
      break;
    }
  }
  // Final assignment consistent with the returned centroids.
  detail::assign_nearest(points, res.centroids, res.assignment, dist);
  res.objective.push_back(std::accumulate(dist.begin(), dist.end(), 0.0));
  return res;
}

/// Whiten the training patches and cluster them into the codebook.
inline Codebook build_codebook(const PatchMatrix& patches, const WhiteningTransform& whitening, int k, std::uint64_t seed,
                               const Geometry& geo = kDefaultGeometry, KMeansResult* trace = nullptr) {
  if (patches.rows() < k) fail(ErrorCode::InsufficientData, "fewer patches than codebook entries");
  if (patches.cols() != whitening.dim()) fail(ErrorCode::InvalidParameter, "whitening dimension mismatch");
  KMeansResult km = kmeans(whitening.apply(patches), k, seed);
  Codebook cb;
  cb.geometry = geo;
  cb.geometry.codebook_size = k;
  cb.whitening = whitening;
  cb.centroids = km.centroids;
  if (trace) *trace = std::move(km);
  return cb;
}

// ---------------------------------------------------------------------------
// Encoding

/// Quadrant of a window by its centre pixel: 0 top-left, 1 top-right,
/// 2 bottom-left, 3 bottom-right.
constexpr int quadrant_of(int row, int col, const Geometry& geo) {
  const int half = geo.image_size / 2;
  const int cr = row + geo.center_offset();
  const int cc = col + geo.center_offset();
  return (cr >= half ? 2 : 0) + (cc >= half ? 1 : 0);
}

/// Dense sliding-window encoding. Every window is contrast-normalized,
/// whitened and counted against its nearest centroid (lowest index on ties)
/// in the histogram of its quadrant.
inline FeatureVector encode(const GrayImage& img, const Codebook& cb) {
  const Geometry& geo = cb.geometry;
  if (img.width != geo.image_size || img.height != geo.image_size)
    fail(ErrorCode::InvalidImage, "encode expects a " + std::to_string(geo.image_size) + "-pixel square image");
  const int side = geo.windows_per_side();
  const int dim = geo.patch_dim();
  const int k = cb.k();

  PatchMatrix windows(static_cast<Eigen::Index>(side) * side, dim);
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c) {
      std::span<double> out(windows.row(static_cast<Eigen::Index>(r) * side + c).data(), static_cast<std::size_t>(dim));
      extract_patch(img, r, c, geo.window, out);
      contrast_normalize(out);
    }
  const PatchMatrix white = cb.whitening.apply(windows);

  // argmin_c |x - c|^2 == argmin_c (|c|^2 - 2 x.c)
  const Eigen::RowVectorXd norms = cb.centroids.rowwise().squaredNorm().transpose();
  const Eigen::MatrixXd scores = (-2.0 * (white * cb.centroids.transpose())).rowwise() + norms;

  FeatureVector hist(static_cast<std::size_t>(4 * k), 0);
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c) {
      const Eigen::Index idx = static_cast<Eigen::Index>(r) * side + c;
      int best = 0;
      double best_s = scores(idx, 0);
      for (int j = 1; j < k; ++j)
        if (scores(idx, j) < best_s) {
          best_s = scores(idx, j);
          best = j;
        }
      ++hist[static_cast<std::size_t>(quadrant_of(r, c, geo) * k + best)];
    }
  return hist;
}

inline std::vector<double> to_double(const FeatureVector& f) { return {f.begin(), f.end()}; }

// ---------------------------------------------------------------------------
// Serialization: 8-byte magic, u32 version, little-endian payload.

inline constexpr std::string_view kCodebookMagic = "FIGMCBK\x01";
inline constexpr std::uint32_t kCodebookVersion = 1;

inline std::vector<std::uint8_t> serialize(const Codebook& cb) {
  BinaryWriter w;
  w.magic(kCodebookMagic);
  w.put<std::uint32_t>(kCodebookVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(cb.geometry.image_size));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(cb.geometry.window));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(cb.k()));
  w.put<double>(cb.whitening.epsilon);
  const int dim = cb.geometry.patch_dim();
  for (int i = 0; i < dim; ++i) w.put<double>(cb.whitening.mean(i));
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) w.put<double>(cb.whitening.matrix(i, j));
  for (int i = 0; i < cb.k(); ++i)
    for (int j = 0; j < dim; ++j) w.put<double>(cb.centroids(i, j));
  return w.bytes();
}

inline Codebook deserialize_codebook(std::span<const std::uint8_t> bytes) {
  BinaryReader r(bytes);
  r.expect_magic(kCodebookMagic);
  if (const auto v = r.get<std::uint32_t>(); v != kCodebookVersion)
    fail(ErrorCode::ParseError, "unsupported codebook version " + std::to_string(v));
  Codebook cb;
  cb.geometry.image_size = static_cast<int>(r.get<std::uint32_t>());
  cb.geometry.window = static_cast<int>(r.get<std::uint32_t>());
  cb.geometry.codebook_size = static_cast<int>(r.get<std::uint32_t>());
  if (cb.geometry.window < 1 || cb.geometry.window > cb.geometry.image_size || cb.geometry.codebook_size < 1 ||
      cb.geometry.codebook_size > (1 << 20))
    fail(ErrorCode::ParseError, "implausible codebook geometry");
  cb.whitening.epsilon = r.get<double>();
  const int dim = cb.geometry.patch_dim();
  cb.whitening.mean.resize(dim);
  for (int i = 0; i < dim; ++i) cb.whitening.mean(i) = r.get<double>();
  cb.whitening.matrix.resize(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) cb.whitening.matrix(i, j) = r.get<double>();
  cb.centroids.resize(cb.geometry.codebook_size, dim);
  for (int i = 0; i < cb.geometry.codebook_size; ++i)
    for (int j = 0; j < dim; ++j) cb.centroids(i, j) = r.get<double>();
  if (!r.at_end()) fail(ErrorCode::ParseError, "trailing bytes in codebook");
  return cb;
}

}  // namespace figmine::features
