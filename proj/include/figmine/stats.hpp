#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "figmine/error.hpp"

namespace figmine::stats {

inline constexpr double kSignificance = 0.05;

struct Correlation {
  double coefficient = std::numeric_limits<double>::quiet_NaN();
  double p_value = 1.0;
  std::size_t n = 0;

  /// Two-sided p < 0.05. An undefined coefficient is never significant.
  bool significant() const { return std::isfinite(coefficient) && p_value < kSignificance; }
};

inline double mean(std::span<const double> x) {
  if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Pearson r; NaN when either side has zero variance or n < 2.
inline double pearson_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorCode::InvalidParameter, "correlation inputs differ in length");
  const std::size_t n = x.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const double mx = mean(x), my = mean(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Two-sided p-value of H0: rho = 0 via t = r sqrt((n-2)/(1-r^2)).
inline double correlation_p_value(double r, std::size_t n) {
  if (!std::isfinite(r) || n < 3) return 1.0;
  if (std::fabs(r) >= 1.0) return 0.0;
  const double df = static_cast<double>(n - 2);
  const double t = r * std::sqrt(df / (1.0 - r * r));
  const boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
}

inline Correlation pearson(std::span<const double> x, std::span<const double> y) {
  Correlation c;
  c.n = x.size();
  c.coefficient = pearson_r(x, y);
  c.p_value = correlation_p_value(c.coefficient, c.n);
  return c;
}

/// Average ranks (1-based), ties share the mean rank.
inline std::vector<double> ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

inline Correlation spearman(std::span<const double> x, std::span<const double> y) {
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  return pearson(rx, ry);
}

/// Mean and standard error of the mean, accumulated around the first value
/// so identical inputs give exactly that value and exactly zero error.
struct MeanStderr {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double stddev = 0.0;
  double standard_error = 0.0;
};

inline MeanStderr mean_stderr(std::span<const double> x) {
  MeanStderr out;
  if (x.empty()) return out;
  const double shift = x[0];
  double s = 0, ss = 0;
  for (double v : x) {
    s += v - shift;
    ss += (v - shift) * (v - shift);
  }
  const double n = static_cast<double>(x.size());
  out.mean = shift + s / n;
  if (x.size() > 1) {
    const double var = std::max(0.0, (ss - s * s / n) / (n - 1.0));
    out.stddev = std::sqrt(var);
    out.standard_error = out.stddev / std::sqrt(n);
  }
  return out;
}

}  // namespace figmine::stats
