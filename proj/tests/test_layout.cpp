#include "figmine/layout.hpp"

#include "test_support.hpp"

using namespace figmine;
using namespace figmine::layout;
using figmine::testing::expect_code;

namespace {

GrayImage with_blocks(int w, int h, const std::vector<Rect>& blocks, float ink = 0.0f) {
  GrayImage img(w, h, 1.0f);
  for (const Rect& r : blocks) fill_rect(img, r, ink);
  return img;
}

std::vector<Rect> sorted(std::vector<Rect> v) {
  std::sort(v.begin(), v.end(), [](const Rect& a, const Rect& b) { return std::tie(a.y, a.x) < std::tie(b.y, b.x); });
  return v;
}

}  // namespace

TEST(Split, BlankImageIsOneLeaf) {
  const FragmentNode root = split(GrayImage(50, 40, 1.0f));
  EXPECT_TRUE(root.is_leaf());
  EXPECT_EQ(leaves(root), std::vector<Rect>{(Rect{0, 0, 50, 40})});
  expect_code(ErrorCode::InvalidImage, [] { split(GrayImage{}); });
}

TEST(Split, TwoSquaresSideBySide) {
  const Rect a{10, 10, 60, 60}, b{120, 20, 50, 50};
  const FragmentNode root = split(with_blocks(200, 100, {a, b}));
  EXPECT_EQ(root.bbox, (Rect{0, 0, 200, 100}));
  EXPECT_EQ(root.split_axis, SplitAxis::vertical);
  EXPECT_EQ(leaves(root), (std::vector<Rect>{a, b}));
}

TEST(Split, GridWithGutters) {
  std::vector<Rect> panels;
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 3; ++c) panels.push_back(Rect{10 + c * 52, 10 + r * 42, 40, 30});
  const GrayImage img = with_blocks(10 + 3 * 52 - 12 + 10, 10 + 2 * 42 - 12 + 10, panels, 0.3f);
  EXPECT_EQ(sorted(leaves(split(img))), sorted(panels));
}

TEST(Split, NarrowGutterDoesNotCut) {
  const GrayImage img = with_blocks(160, 120, {Rect{30, 35, 50, 50}, Rect{85, 35, 50, 50}});  // 5 px apart
  EXPECT_EQ(leaves(split(img)).size(), 1u);
  SplitConfig loose;
  loose.min_gutter = 4;
  EXPECT_EQ(leaves(split(img, loose)).size(), 2u);
}

TEST(Split, ShortStripStillCutsAcross) {
  // The content box is 10 px tall, below min_fragment, yet wide enough to
  // be cut into two side-by-side pieces.
  const Rect a{10, 15, 60, 10}, b{120, 15, 60, 10};
  EXPECT_EQ(leaves(split(with_blocks(200, 40, {a, b}))), (std::vector<Rect>{a, b}));
}

TEST(Split, NestedAlternatingAxes) {
  // Left column holds two stacked panels, right column one tall panel.
  const Rect top{5, 5, 60, 40}, bottom{5, 60, 60, 40}, tall{90, 5, 50, 95};
  const FragmentNode root = split(with_blocks(200, 160, {top, bottom, tall}));
  EXPECT_EQ(root.split_axis, SplitAxis::vertical);
  ASSERT_EQ(root.children.size(), 2u);
  EXPECT_EQ(root.children[0].split_axis, SplitAxis::horizontal);
  EXPECT_EQ(leaves(root), (std::vector<Rect>{top, bottom, tall}));
}

TEST(Split, BackgroundSourceMatters) {
  // Dark panels cover most pixels, so the whole-image mode is dark while
  // the frame is white.
  const GrayImage img = with_blocks(100, 50, {Rect{3, 3, 44, 44}, Rect{53, 3, 44, 44}});
  EXPECT_FLOAT_EQ(modal_luminance(img), 0.0f);
  EXPECT_FLOAT_EQ(modal_border_luminance(img), 1.0f);
  SplitConfig border;
  border.min_gutter = 6;
  border.background = BackgroundSource::border;
  EXPECT_EQ(leaves(split(img, border)).size(), 2u);
  SplitConfig whole = border;
  whole.background = BackgroundSource::whole_image;
  EXPECT_EQ(leaves(split(img, whole)).size(), 1u);
}

TEST(Background, TiesFavourLighterValue) {
  GrayImage img(4, 2, 0.0f);
  fill_rect(img, Rect{0, 0, 4, 1}, 1.0f);
  EXPECT_FLOAT_EQ(modal_luminance(img), 1.0f);
}

TEST(ContentMap, CountsAndTrims) {
  const GrayImage img = with_blocks(20, 20, {Rect{4, 6, 3, 2}});
  const ContentMap map(img, 1.0f, 0.05f);
  EXPECT_EQ(map.count(Rect{0, 0, 20, 20}), 6);
  EXPECT_EQ(map.count(Rect{5, 0, 100, 100}), 4);
  EXPECT_EQ(map.trim(Rect{0, 0, 20, 20}), (Rect{4, 6, 3, 2}));
  EXPECT_TRUE(map.trim(Rect{10, 10, 5, 5}).empty());
}

TEST(ContentBox, ThresholdedExtent) {
  GrayImage img(10, 10, 1.0f);
  img.at(2, 3) = 0.5f;
  img.at(7, 8) = 0.96f;  // lighter than the threshold
  EXPECT_EQ(content_bbox(img, img.bounds(), 0.95f), (Rect{3, 2, 1, 1}));
  EXPECT_TRUE(content_bbox(img, Rect{5, 5, 5, 5}, 0.95f).empty());
}
