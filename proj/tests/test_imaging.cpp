#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "drowsy/imaging.hpp"
#include "support.hpp"

using namespace drowsy;
using testing_support::brute_sum;
using testing_support::random_image;
using testing_support::random_rect;

namespace {

GrayImage from_rows(std::initializer_list<std::initializer_list<int>> rows) {
  const int h = static_cast<int>(rows.size());
  const int w = static_cast<int>(rows.begin()->size());
  GrayImage img(w, h);
  int y = 0;
  for (const auto& r : rows) {
    int x = 0;
    for (int v : r) img.at(x++, y) = static_cast<std::uint8_t>(v);
    ++y;
  }
  return img;
}

}  // namespace

TEST(Integral, TwoByTwo) {
  const auto ii = integral(from_rows({{1, 2}, {3, 4}}));
  EXPECT_EQ(ii.width(), 3);
  EXPECT_EQ(ii.at(2, 2), 10u);
  EXPECT_EQ(ii.at(1, 1), 1u);
  EXPECT_EQ(ii.at(2, 1), 3u);
  EXPECT_EQ(ii.at(1, 2), 4u);
  EXPECT_EQ(rect_sum(ii, Rect{0, 0, 2, 2}), 10u);
  EXPECT_EQ(rect_sum(ii, Rect{1, 1, 1, 1}), 4u);
}

TEST(Integral, SinglePixelAndZeros) {
  const auto one = integral(from_rows({{7}}));
  EXPECT_EQ(one.at(0, 0), 0u);
  EXPECT_EQ(one.at(1, 0), 0u);
  EXPECT_EQ(one.at(0, 1), 0u);
  EXPECT_EQ(one.at(1, 1), 7u);

  const auto zero = integral(GrayImage(9, 5));
  for (int y = 0; y <= 5; ++y)
    for (int x = 0; x <= 9; ++x) EXPECT_EQ(zero.at(x, y), 0u);
  EXPECT_EQ(rect_sum(zero, Rect{2, 1, 4, 3}), 0u);
}

TEST(Integral, MatchesBruteForceOnRandomRects) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 300; ++t) {
    const auto img = random_image(1 + static_cast<int>(rng() % 60), 1 + static_cast<int>(rng() % 60), rng);
    const auto ii = integral(img);
    const Rect r = random_rect(img.width(), img.height(), rng);
    ASSERT_EQ(rect_sum(ii, r), brute_sum(img, r));
  }
}

TEST(Integral, SquaredTableMatchesBruteForce) {
  std::mt19937_64 rng(2);
  const auto img = random_image(31, 17, rng);
  const auto sq = squared_integral(img);
  for (int t = 0; t < 100; ++t) {
    const Rect r = random_rect(img.width(), img.height(), rng);
    std::uint64_t s = 0;
    for (int y = r.y; y < r.bottom(); ++y)
      for (int x = r.x; x < r.right(); ++x) s += static_cast<std::uint64_t>(img.at(x, y)) * img.at(x, y);
    ASSERT_EQ(rect_sum(sq, r), s);
  }
}

TEST(Integral, SaturatedMaximumFitsIn32Bits) {
  GrayImage img(kMaxIntegralSide, kMaxIntegralSide, 255);
  const auto ii = integral(img);
  EXPECT_EQ(rect_sum(ii, img.bounds()), 255u * 4096u * 4096u);
  EXPECT_THROW(integral(GrayImage(kMaxIntegralSide + 1, 2)), InvalidArgument);
}

TEST(Integral, OutOfBoundsRectThrows) {
  const auto ii = integral(GrayImage(10, 8, 3));
  EXPECT_THROW(rect_sum(ii, Rect{5, 0, 6, 1}), BoundsError);
  EXPECT_THROW(rect_sum(ii, Rect{-1, 0, 2, 2}), BoundsError);
  EXPECT_THROW(rect_sum(ii, Rect{0, 0, 1, 9}), BoundsError);
  EXPECT_EQ(rect_sum(ii, Rect{9, 7, 1, 1}), 3u);
}

TEST(Downsample, IdentityConstantAndSize) {
  std::mt19937_64 rng(3);
  const auto img = random_image(64, 48, rng);
  EXPECT_EQ(downsample(img, 1).pixels().size(), img.size());
  EXPECT_TRUE(std::equal(img.pixels().begin(), img.pixels().end(), downsample(img, 1).pixels().begin()));

  const GrayImage flat(640, 480, 93);
  for (int sf : {1, 2, 4, 6, 8}) {
    const auto d = downsample(flat, sf);
    EXPECT_EQ(d.width(), 640 / sf);
    EXPECT_EQ(d.height(), 480 / sf);
    for (auto v : d.pixels()) ASSERT_EQ(v, 93);
  }
  const auto six = downsample(flat, 6);
  EXPECT_EQ(six.width(), 106);
  EXPECT_EQ(six.height(), 80);
}

TEST(Downsample, BlockMeanRoundsHalfUp) {
  // 2x2 blocks: (1+2+3+4)/4 = 2.5 -> 3, (0+0+0+1)/4 = 0.25 -> 0.
  const auto d = downsample(from_rows({{1, 2, 0, 0}, {3, 4, 0, 1}}), 2);
  ASSERT_EQ(d.width(), 2);
  EXPECT_EQ(d.at(0, 0), 3);
  EXPECT_EQ(d.at(1, 0), 0);
}

TEST(Downsample, EmptyResultThrows) {
  EXPECT_THROW(downsample(GrayImage(5, 5), 6), InvalidArgument);
  EXPECT_THROW(downsample(GrayImage(5, 5), 0), InvalidArgument);
}

TEST(Remap, MultipliesEveryField) {
  EXPECT_EQ(remap_rect(Rect{10, 12, 20, 20}, 6), (Rect{60, 72, 120, 120}));
  EXPECT_EQ(remap_rect(Rect{3, 4, 5, 6}, 1), (Rect{3, 4, 5, 6}));
}

TEST(Rotate, ZeroIsIdentity) {
  std::mt19937_64 rng(4);
  const auto img = random_image(33, 21, rng);
  const auto r = rotate(img, 0.0);
  EXPECT_TRUE(std::equal(img.pixels().begin(), img.pixels().end(), r.pixels().begin()));
}

TEST(Rotate, HalfTurnTwiceRestoresInterior) {
  // Smooth content so interpolation error stays within one level.
  GrayImage img(41, 31);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) img.at(x, y) = static_cast<std::uint8_t>(40 + 3 * x + 2 * y);
  const auto back = rotate(rotate(img, std::numbers::pi), std::numbers::pi);
  for (int y = 2; y < img.height() - 2; ++y)
    for (int x = 2; x < img.width() - 2; ++x) ASSERT_LE(std::abs(back.at(x, y) - img.at(x, y)), 1);
}

TEST(Rotate, AffineMapKeepsMidpointsAndCollinearity) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-300.0, 300.0);
  for (int t = 0; t < 200; ++t) {
    const auto m = AffineMap::rotation(u(rng) / 50.0, {u(rng), u(rng)});
    const Point a{u(rng), u(rng)}, b{u(rng), u(rng)};
    const Point mid{(a.x + b.x) / 2, (a.y + b.y) / 2};
    const Point ma = m.apply(a), mb = m.apply(b), mm = m.apply(mid);
    EXPECT_NEAR(mm.x, (ma.x + mb.x) / 2, 0.5);
    EXPECT_NEAR(mm.y, (ma.y + mb.y) / 2, 0.5);
    const double cross = (mb.x - ma.x) * (mm.y - ma.y) - (mb.y - ma.y) * (mm.x - ma.x);
    EXPECT_NEAR(cross, 0.0, 1e-6);
  }
}

TEST(Rotate, InverseAndComposeRoundTrip) {
  const auto m = AffineMap::rotation(0.7, {12.0, -4.0});
  const auto id = m.compose(m.inverse());
  const Point p = id.apply({3.5, 9.25});
  EXPECT_NEAR(p.x, 3.5, 1e-12);
  EXPECT_NEAR(p.y, 9.25, 1e-12);
  EXPECT_NEAR(m.determinant(), 1.0, 1e-12);
}

TEST(Rotate, QuarterTurnMovesPixelClockwise) {
  GrayImage img(11, 11, 0);
  img.at(8, 5) = 255;  // right of centre
  const auto r = rotate(img, std::numbers::pi / 2);
  EXPECT_EQ(r.at(5, 8), 255);  // below centre: clockwise on screen with y down
}

TEST(HistEqualize, ConstantImageUnchanged) {
  const GrayImage flat(20, 10, 77);
  const auto e = hist_equalize(flat);
  for (auto v : e.pixels()) ASSERT_EQ(v, 77);
}

TEST(HistEqualize, TwoLevelsGoToTheEnds) {
  GrayImage img(10, 10, 50);
  for (int y = 5; y < 10; ++y)
    for (int x = 0; x < 10; ++x) img.at(x, y) = 200;
  const auto e = hist_equalize(img);
  EXPECT_EQ(e.at(0, 0), 0);
  EXPECT_EQ(e.at(0, 9), 255);
}

TEST(HistEqualize, SpreadsAndPreservesOrder) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 50; ++t) {
    const int lo = static_cast<int>(rng() % 200);
    const auto img = random_image(30, 20, rng, lo, lo + 1 + static_cast<int>(rng() % 50));
    const auto e = hist_equalize(img);
    const auto [mn, mx] = std::minmax_element(e.pixels().begin(), e.pixels().end());
    EXPECT_GE(*mx - *mn, static_cast<int>(0.9 * 255));
    for (std::size_t i = 0; i + 1 < img.size(); ++i) {
      const auto a = img.pixels()[i], b = img.pixels()[i + 1];
      if (a < b) {
        ASSERT_LE(e.pixels()[i], e.pixels()[i + 1]);
      } else if (a == b) {
        ASSERT_EQ(e.pixels()[i], e.pixels()[i + 1]);
      }
    }
  }
}

TEST(Resize, SameSizeAndConstant) {
  std::mt19937_64 rng(7);
  const auto img = random_image(25, 13, rng);
  const auto same = resize(img, 25, 13);
  EXPECT_TRUE(std::equal(img.pixels().begin(), img.pixels().end(), same.pixels().begin()));
  const auto flat = resize(GrayImage(17, 9, 140), 200, 70);
  for (auto v : flat.pixels()) ASSERT_EQ(v, 140);
  EXPECT_THROW(resize(img, 0, 3), InvalidArgument);
}

TEST(Resize, UpThenDownOnGradient) {
  GrayImage img(40, 30);
  for (int y = 0; y < 30; ++y)
    for (int x = 0; x < 40; ++x) img.at(x, y) = static_cast<std::uint8_t>(20 + 4 * x + 2 * y);
  const auto back = resize(resize(img, 80, 60), 40, 30);
  for (int y = 0; y < 30; ++y)
    for (int x = 0; x < 40; ++x) ASSERT_LE(std::abs(back.at(x, y) - img.at(x, y)), 2);
}

TEST(CropPaste, RoundTripAndBounds) {
  std::mt19937_64 rng(8);
  const auto img = random_image(30, 20, rng);
  const Rect r{4, 5, 10, 7};
  const auto c = crop(img, r);
  GrayImage canvas(30, 20, 0);
  paste(canvas, c, r.x, r.y);
  for (int y = 0; y < r.h; ++y)
    for (int x = 0; x < r.w; ++x) ASSERT_EQ(canvas.at(r.x + x, r.y + y), img.at(r.x + x, r.y + y));
  EXPECT_THROW(crop(img, Rect{25, 0, 6, 2}), BoundsError);
  EXPECT_THROW(paste(canvas, c, 25, 0), BoundsError);
}

TEST(PadReplicate, CopiesEdges) {
  const auto p = pad_replicate(from_rows({{1, 2}, {3, 4}}), 2);
  EXPECT_EQ(p.width(), 6);
  EXPECT_EQ(p.at(0, 0), 1);
  EXPECT_EQ(p.at(5, 0), 2);
  EXPECT_EQ(p.at(0, 5), 3);
  EXPECT_EQ(p.at(5, 5), 4);
  EXPECT_EQ(p.at(2, 2), 1);
}

TEST(RectGeometry, IouAndClamp) {
  EXPECT_DOUBLE_EQ(iou(Rect{0, 0, 10, 10}, Rect{0, 0, 10, 10}), 1.0);
  EXPECT_DOUBLE_EQ(iou(Rect{0, 0, 10, 10}, Rect{5, 0, 10, 10}), 50.0 / 150.0);
  EXPECT_DOUBLE_EQ(iou(Rect{0, 0, 10, 10}, Rect{20, 0, 10, 10}), 0.0);
  EXPECT_EQ(clamp_rect(Rect{-5, -5, 20, 20}, 10, 12), (Rect{0, 0, 10, 12}));
}

TEST(GrayImage, RejectsBadDimensions) {
  EXPECT_THROW(GrayImage(0, 4), InvalidArgument);
  EXPECT_THROW(GrayImage(3, 3, std::vector<std::uint8_t>(8)), InvalidArgument);
}
