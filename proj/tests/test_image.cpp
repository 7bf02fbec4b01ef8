#include "figmine/image.hpp"

#include <gtest/gtest.h>

#include <functional>

#include "figmine/util.hpp"

using namespace figmine;

namespace {

void expect_code(ErrorCode code, const std::function<void()>& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

}  // namespace

TEST(Rect, IntersectionAndUnion) {
  const Rect a{0, 0, 10, 10}, b{5, 5, 10, 10};
  EXPECT_EQ(intersection(a, b), (Rect{5, 5, 5, 5}));
  EXPECT_EQ(bounding_union(a, b), (Rect{0, 0, 15, 15}));
  EXPECT_TRUE(overlaps(a, b));
  EXPECT_FALSE(overlaps(a, Rect{10, 0, 3, 3}));  // touching edges do not overlap
  EXPECT_TRUE(intersection(a, Rect{20, 20, 2, 2}).empty());
  EXPECT_TRUE(a.contains(Rect{2, 2, 8, 8}));
  EXPECT_FALSE(a.contains(Rect{2, 2, 9, 8}));
}

TEST(Rect, IouMatchesAreaRatio) {
  const Rect a{0, 0, 10, 10}, b{5, 0, 10, 10};
  // 50 shared pixels over 150 covered.
  EXPECT_DOUBLE_EQ(iou(a, b), 50.0 / 150.0);
  EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(iou(a, Rect{30, 30, 1, 1}), 0.0);
}

TEST(GrayImage, CropAndPaste) {
  GrayImage img(6, 4, 1.0f);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 6; ++c) img.at(r, c) = static_cast<float>(r * 10 + c) / 100.0f;
  const GrayImage sub = crop(img, Rect{2, 1, 3, 2});
  ASSERT_EQ(sub.width, 3);
  ASSERT_EQ(sub.height, 2);
  EXPECT_FLOAT_EQ(sub.at(0, 0), 0.12f);
  EXPECT_FLOAT_EQ(sub.at(1, 2), 0.24f);

  GrayImage canvas(4, 4, 1.0f);
  paste(canvas, sub, 2, 3);  // clipped at the bottom and right edges
  EXPECT_FLOAT_EQ(canvas.at(3, 2), 0.12f);
  EXPECT_FLOAT_EQ(canvas.at(3, 3), 0.13f);
  EXPECT_FLOAT_EQ(canvas.at(0, 0), 1.0f);
  expect_code(ErrorCode::InvalidRegion, [&] { crop(img, Rect{4, 0, 3, 1}); });
}

TEST(GrayImage, FillRectClipsToBounds) {
  GrayImage img(5, 5, 1.0f);
  fill_rect(img, Rect{3, 3, 10, 10}, 0.0f);
  long dark = 0;
  for (float v : img.pixels) dark += v == 0.0f;
  EXPECT_EQ(dark, 4);
}

TEST(Resample, IdentityAndIntegerDownscale) {
  GrayImage img(4, 2, 0.0f);
  img.at(0, 0) = 1.0f;
  img.at(0, 1) = 0.5f;
  EXPECT_EQ(resample_area(img, 4, 2), img);
  const GrayImage half = resample_area(img, 2, 1);
  // Each output pixel averages a 2x2 block.
  EXPECT_NEAR(half.at(0, 0), (1.0 + 0.5) / 4.0, 1e-6);
  EXPECT_NEAR(half.at(0, 1), 0.0, 1e-6);
}

TEST(Resample, MatchesSupersampledBoxFilter) {
  // Oracle: average over a fine grid of sample points inside each output
  // pixel footprint. A non-integer ratio exercises partial coverage.
  Rng rng(3);
  GrayImage src(7, 5);
  for (auto& p : src.pixels) p = static_cast<float>(uniform01(rng));
  const int nw = 3, nh = 2;
  const GrayImage out = resample_area(src, nw, nh);
  constexpr int kSub = 420;  // divisible by 3, 7, 2 and 5
  for (int r = 0; r < nh; ++r)
    for (int c = 0; c < nw; ++c) {
      double acc = 0;
      for (int i = 0; i < kSub; ++i)
        for (int j = 0; j < kSub; ++j) {
          const double y = (r + (i + 0.5) / kSub) * src.height / nh;
          const double x = (c + (j + 0.5) / kSub) * src.width / nw;
          acc += src.at(static_cast<int>(y), static_cast<int>(x));
        }
      EXPECT_NEAR(out.at(r, c), acc / (kSub * kSub), 2e-3) << r << "," << c;
    }
}

TEST(Resample, UpscaleReplicates) {
  GrayImage src(2, 1, 0.0f);
  src.at(0, 1) = 1.0f;
  const GrayImage up = resample_area(src, 4, 2);
  EXPECT_FLOAT_EQ(up.at(0, 0), 0.0f);
  EXPECT_FLOAT_EQ(up.at(1, 1), 0.0f);
  EXPECT_FLOAT_EQ(up.at(0, 2), 1.0f);
  EXPECT_FLOAT_EQ(up.at(1, 3), 1.0f);
  expect_code(ErrorCode::InvalidImage, [] { resample_area(GrayImage{}, 2, 2); });
}

TEST(Util, SubSeedsAreDistinctAndStable) {
  EXPECT_EQ(sub_seed(1, 2), sub_seed(1, 2));
  EXPECT_NE(sub_seed(1, 2), sub_seed(1, 3));
  EXPECT_NE(sub_seed(1, 2), sub_seed(2, 2));
}

TEST(Util, ParallelForVisitsEveryIndexOnce) {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), [&](std::size_t i) { ++hits[i]; });
  for (int h : hits) EXPECT_EQ(h, 1);
}

TEST(Util, ParallelForRethrows) {
  EXPECT_THROW(parallel_for(10, [](std::size_t i) {
                 if (i == 7) fail(ErrorCode::InvalidParameter, "boom");
               }),
               Error);
}

TEST(Util, BinaryRoundTrip) {
  BinaryWriter w;
  w.magic("TESTMAG\x01");
  w.put<std::uint32_t>(7);
  w.put<double>(-2.5);
  w.put_string("héllo");
  BinaryReader r(w.bytes());
  r.expect_magic("TESTMAG\x01");
  EXPECT_EQ(r.get<std::uint32_t>(), 7u);
  EXPECT_EQ(r.get<double>(), -2.5);
  EXPECT_EQ(r.get_string(), "héllo");
  EXPECT_TRUE(r.at_end());
  BinaryReader bad(w.bytes());
  expect_code(ErrorCode::ParseError, [&] { bad.expect_magic("OTHERMG\x01"); });
}
