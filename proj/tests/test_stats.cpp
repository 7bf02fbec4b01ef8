#include "figmine/stats.hpp"

#include <cmath>

#include "test_support.hpp"

using namespace figmine;
using namespace figmine::stats;

TEST(Pearson, KnownValues) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  const std::vector<double> up{2, 4, 6, 8, 10}, down{5, 4, 3, 2, 1}, flat{3, 3, 3, 3, 3};
  EXPECT_DOUBLE_EQ(pearson_r(x, up), 1.0);
  EXPECT_DOUBLE_EQ(pearson_r(x, down), -1.0);
  EXPECT_TRUE(std::isnan(pearson_r(x, flat)));
  // Hand computation: sxy = 8, sxx = syy = 10.
  const std::vector<double> y{1, 3, 2, 5, 4};
  EXPECT_NEAR(pearson_r(x, y), 8.0 / std::sqrt(10.0 * 10.0), 1e-15);
  EXPECT_THROW(pearson_r(x, std::vector<double>{1, 2}), Error);
}

TEST(Pearson, PValue) {
  // r = 0.5, n = 10: t = 1.63299 on 8 df, two-sided p = 0.14111.
  EXPECT_NEAR(correlation_p_value(0.5, 10), 0.14111, 1e-5);
  EXPECT_DOUBLE_EQ(correlation_p_value(1.0, 10), 0.0);
  EXPECT_DOUBLE_EQ(correlation_p_value(std::nan(""), 10), 1.0);
  EXPECT_DOUBLE_EQ(correlation_p_value(0.9, 2), 1.0);
  Correlation undefined;
  EXPECT_FALSE(undefined.significant());
}

TEST(Spearman, TiesShareRanks) {
  EXPECT_EQ(ranks(std::vector<double>{10, 20, 20, 30}), (std::vector<double>{1, 2.5, 2.5, 4}));
  EXPECT_EQ(ranks(std::vector<double>{3, 1, 2}), (std::vector<double>{3, 1, 2}));
  const std::vector<double> x{1, 2, 3, 4, 5, 6}, cube{1, 8, 27, 64, 125, 216};
  EXPECT_DOUBLE_EQ(spearman(x, cube).coefficient, 1.0);
}

TEST(MeanStderr, TextbookSample) {
  const std::vector<double> x{2, 4, 4, 4, 5, 5, 7, 9};
  const MeanStderr m = mean_stderr(x);
  EXPECT_DOUBLE_EQ(m.mean, 5.0);
  EXPECT_NEAR(m.stddev, std::sqrt(32.0 / 7.0), 1e-14);
  EXPECT_NEAR(m.standard_error, std::sqrt(32.0 / 7.0) / std::sqrt(8.0), 1e-14);
  const std::vector<double> same(5, 0.1);
  EXPECT_EQ(mean_stderr(same).mean, 0.1);
  EXPECT_EQ(mean_stderr(same).standard_error, 0.0);
  EXPECT_TRUE(std::isnan(mean_stderr({}).mean));
}
