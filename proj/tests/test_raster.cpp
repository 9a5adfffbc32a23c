#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bocr/raster.hpp"
#include "oracles.hpp"

using namespace bocr;

namespace {

BinaryImage bitmap(int w, int h, std::initializer_list<std::pair<int, int>> ink) {
  BinaryImage img(w, h);
  for (const auto& [x, y] : ink) img(x, y) = 1;
  return img;
}

}  // namespace

TEST(Grayscale, WhiteBlackAndRed) {
  const std::vector<std::uint8_t> rgb{255, 255, 255, 0, 0, 0, 255, 0, 0};
  const auto g = to_grayscale(rgb, 3, 1);
  EXPECT_EQ(g(0, 0), 255);
  EXPECT_EQ(g(1, 0), 0);
  EXPECT_EQ(g(2, 0), 76);
}

TEST(Grayscale, RejectsZeroDimensions) {
  EXPECT_THROW(to_grayscale({}, 0, 3), DimensionError);
  EXPECT_THROW(to_grayscale(std::vector<std::uint8_t>(6, 0), 3, 1), DimensionError);
}

TEST(Raster, RejectsNonPositiveSizeAndNonBinaryValues) {
  EXPECT_THROW(GrayImage(0, 4), DimensionError);
  EXPECT_THROW(BinaryImage(2, 1, std::vector<std::uint8_t>{0, 2}), DimensionError);
}

TEST(GaussianBlur, ConstantImageUnchanged) {
  const GrayImage img(12, 9, 137);
  for (double sigma : {0.3, 0.8, 2.5}) EXPECT_EQ(gaussian_blur(img, sigma), img);
}

TEST(GaussianBlur, ImpulseMatchesDirectConvolution) {
  GrayImage img(7, 7, 0);
  img(3, 3) = 255;
  const auto k = gaussian_kernel(1.0);
  const auto out = gaussian_blur(img, 1.0);
  EXPECT_EQ(out(3, 3), clamp_u8(k[k.size() / 2] * k[k.size() / 2] * 255));
  const auto ref = oracle::convolve2d(img, k);
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 7; ++x) {
      EXPECT_NEAR(out(x, y), ref[y * 7 + x], 0.5 + 1e-9);
      EXPECT_EQ(out(x, y), out(6 - x, y));
      EXPECT_EQ(out(x, y), out(x, 6 - y));
    }
}

TEST(GaussianBlur, RandomImagesMatchDirectConvolution) {
  std::mt19937 rng(11);
  for (int i = 0; i < 20; ++i) {
    const auto img = oracle::random_gray(rng, 12);
    const double sigma = 0.5 + 0.1 * i;
    const auto out = gaussian_blur(img, sigma);
    const auto ref = oracle::convolve2d(img, gaussian_kernel(sigma));
    for (std::size_t p = 0; p < img.size(); ++p) EXPECT_NEAR(out.data()[p], ref[p], 0.5 + 1e-6);
  }
}

TEST(GaussianBlur, RejectsNonPositiveSigma) {
  EXPECT_THROW(gaussian_blur(GrayImage(3, 3), 0), ParameterError);
  EXPECT_THROW(gaussian_blur(GrayImage(3, 3), -1), ParameterError);
}

TEST(AdaptiveThreshold, UniformImageHasNoInk) {
  EXPECT_EQ(ink_count(adaptive_threshold(GrayImage(20, 20, 128), 9, 10)), 0);
}

TEST(AdaptiveThreshold, DarkSquareExactlyRecovered) {
  GrayImage img(9, 9, 255);
  for (int y = 3; y < 6; ++y)
    for (int x = 3; x < 6; ++x) img(x, y) = 0;
  const auto bin = adaptive_threshold(img, 9, 10);
  EXPECT_EQ(ink_count(bin), 9);
  for (int y = 3; y < 6; ++y)
    for (int x = 3; x < 6; ++x) EXPECT_EQ(bin(x, y), 1);
}

TEST(AdaptiveThreshold, RejectsBadWindow) {
  EXPECT_THROW(adaptive_threshold(GrayImage(5, 5), 4, 0), ParameterError);
  EXPECT_THROW(adaptive_threshold(GrayImage(5, 5), -3, 0), ParameterError);
  EXPECT_THROW(adaptive_threshold(GrayImage(5, 5), 1, 0), ParameterError);
}

TEST(AdaptiveThreshold, MatchesBruteForceOnRandomImages) {
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> win(1, 7), off(-20, 40);
  for (int i = 0; i < 200; ++i) {
    const auto img = oracle::random_gray(rng);
    const int window = 2 * win(rng) + 1, offset = off(rng);
    ASSERT_EQ(adaptive_threshold(img, window, offset), oracle::adaptive_threshold(img, window, offset)) << "case " << i;
  }
}

TEST(Rotate, ZeroAngleIsIdentity) {
  std::mt19937 rng(5);
  const auto img = oracle::random_gray(rng, 30);
  EXPECT_EQ(rotate(img, 0.0), img);
}

TEST(Rotate, RoundTripWithinTwoLevelsOnInterior) {
  GrayImage img(80, 60);
  for (int y = 0; y < 60; ++y)
    for (int x = 0; x < 80; ++x) img(x, y) = static_cast<std::uint8_t>(128 + 60 * std::sin(x * 0.11) * std::cos(y * 0.07));
  for (double a : {1.0, 3.0, -4.5}) {
    const auto back = rotate(rotate(img, a), -a);
    // Corners lose content to the fill; compare a centered interior region.
    for (int y = 15; y < 45; ++y)
      for (int x = 15; x < 65; ++x) EXPECT_LE(std::abs(back(x, y) - img(x, y)), 2) << a << " at " << x << "," << y;
  }
}

TEST(Rotate, BarProjectionPeakDropsWhenTilted) {
  GrayImage img(120, 60, 255);
  for (int y = 28; y < 32; ++y)
    for (int x = 10; x < 110; ++x) img(x, y) = 0;
  const auto peak = [](const GrayImage& g) { return project(adaptive_threshold(g, 31, 15), Axis::Row).max(); };
  EXPECT_LT(peak(rotate(img, 5.0)), peak(img));
}

TEST(Rotate, PositiveAngleIsCounterClockwise) {
  GrayImage img(101, 101, 255);
  for (int x = 50; x < 90; ++x) img(x, 50) = 0;  // ray pointing right from the center
  const auto r = rotate(img, 90.0);
  EXPECT_LT(r(50, 20), 128);  // now points up
  EXPECT_GT(r(80, 50), 128);
}

TEST(Rotate, ExpandHoldsWholeSource) {
  const GrayImage img(40, 20, 0);
  const auto r = rotate(img, 90.0, 255, true);
  EXPECT_EQ(r.width(), 20);
  EXPECT_EQ(r.height(), 40);
  EXPECT_EQ(r(10, 20), 0);
}

TEST(Project, BlankAndFullRow) {
  EXPECT_EQ(project(BinaryImage(4, 4), Axis::Row).sums, (std::vector<int>{0, 0, 0, 0}));
  BinaryImage img(4, 4);
  for (int x = 0; x < 4; ++x) img(x, 1) = 1;
  EXPECT_EQ(project(img, Axis::Row).sums, (std::vector<int>{0, 4, 0, 0}));
  EXPECT_EQ(project(img, Axis::Column).sums, (std::vector<int>{1, 1, 1, 1}));
}

TEST(Project, MatchesBruteForce) {
  std::mt19937 rng(7);
  for (int i = 0; i < 200; ++i) {
    const auto img = oracle::random_bitmap(rng);
    EXPECT_EQ(project(img, Axis::Row).sums, oracle::project(img, Axis::Row));
    EXPECT_EQ(project(img, Axis::Column).sums, oracle::project(img, Axis::Column));
  }
}

TEST(Canny, ConstantImageHasNoEdges) { EXPECT_EQ(ink_count(canny(GrayImage(30, 30, 90))), 0); }

TEST(Canny, VerticalStepGivesSingleColumn) {
  GrayImage img(40, 30, 0);
  for (int y = 0; y < 30; ++y)
    for (int x = 20; x < 40; ++x) img(x, y) = 255;
  const auto e = canny(img);
  // Away from the top/bottom rows every row has exactly one edge pixel at the step.
  std::set<int> cols;
  for (int y = 4; y < 26; ++y) {
    int n = 0;
    for (int x = 0; x < 40; ++x)
      if (e(x, y)) {
        ++n;
        cols.insert(x);
      }
    EXPECT_EQ(n, 1) << "row " << y;
  }
  EXPECT_EQ(cols.size(), 1u);
  EXPECT_NEAR(*cols.begin(), 19.5, 1.0);
}

TEST(Canny, DarkFrameProducesBorderEdges) {
  GrayImage img(60, 60, 240);
  for (int y = 0; y < 60; ++y)
    for (int x = 0; x < 60; ++x)
      if (x < 3 || y < 3 || x >= 57 || y >= 57) img(x, y) = 20;
  const auto e = canny(img);
  int hits = 0;
  for (int y = 10; y < 50; ++y) hits += e(2, y) || e(3, y);
  EXPECT_GE(hits, 35);
}

TEST(Canny, RejectsBadThresholds) {
  EXPECT_THROW(canny(GrayImage(8, 8), 150, 150), ParameterError);
  EXPECT_THROW(canny(GrayImage(8, 8), 200, 100), ParameterError);
}

TEST(RankFilter, RemovesThinPerpendicularLine) {
  BinaryImage img(9, 9);
  for (int y = 0; y < 9; ++y) img(4, y) = 1;
  EXPECT_EQ(ink_count(rank_filter(img, Orientation::Horizontal, 3)), 0);
}

TEST(RankFilter, SolidBlockInteriorUnchanged) {
  BinaryImage img(9, 9);
  for (int y = 2; y < 7; ++y)
    for (int x = 2; x < 7; ++x) img(x, y) = 1;
  for (int len : {3, 5})
    for (auto o : {Orientation::Horizontal, Orientation::Vertical}) {
      const auto out = rank_filter(img, o, len);
      EXPECT_EQ(out(4, 4), 1);
      EXPECT_EQ(out(3, 3), len == 3 ? 1 : out(3, 3));
    }
}

TEST(RankFilter, RejectsEvenOrShortLength) {
  EXPECT_THROW(rank_filter(BinaryImage(5, 5), Orientation::Horizontal, 4), ParameterError);
  EXPECT_THROW(rank_filter(BinaryImage(5, 5), Orientation::Vertical, 1), ParameterError);
  EXPECT_THROW(rank_filter(BinaryImage(5, 5), Orientation::Vertical, 5, 5), ParameterError);
}

TEST(RankFilter, MatchesSortedWindowOracle) {
  std::mt19937 rng(13);
  std::uniform_int_distribution<int> half(1, 5);
  for (int i = 0; i < 200; ++i) {
    const auto img = oracle::random_bitmap(rng);
    const int len = 2 * half(rng) + 1;
    const int rank = std::uniform_int_distribution<int>(0, len - 1)(rng);
    for (auto o : {Orientation::Horizontal, Orientation::Vertical}) {
      ASSERT_EQ(rank_filter(img, o, len), oracle::rank_filter(img, o, len, len / 2)) << "median case " << i;
      ASSERT_EQ(rank_filter(img, o, len, rank), oracle::rank_filter(img, o, len, rank)) << "rank case " << i;
    }
  }
}

TEST(Dilate, UnitKernelIsIdentity) {
  std::mt19937 rng(17);
  const auto img = oracle::random_bitmap(rng);
  EXPECT_EQ(dilate(img, 1, 1), img);
}

TEST(Dilate, BridgesSmallGap) {
  const auto img = bitmap(9, 1, {{2, 0}, {5, 0}});
  const auto out = dilate(img, 5, 1);
  for (int x = 2; x <= 5; ++x) EXPECT_EQ(out(x, 0), 1);
  EXPECT_EQ(connected_components(out).size(), 1u);
}

TEST(Dilate, MatchesBruteForce) {
  std::mt19937 rng(19);
  std::uniform_int_distribution<int> k(1, 6);
  for (int i = 0; i < 100; ++i) {
    const auto img = oracle::random_bitmap(rng);
    const int kw = k(rng), kh = k(rng);
    ASSERT_EQ(dilate(img, kw, kh), oracle::dilate(img, kw, kh)) << kw << "x" << kh;
  }
}

TEST(Components, EmptyImage) { EXPECT_TRUE(connected_components(BinaryImage(5, 5)).empty()); }

TEST(Components, TwoBlocks) {
  const auto img = bitmap(8, 4, {{0, 0}, {1, 0}, {0, 1}, {1, 1}, {5, 2}, {6, 2}, {5, 3}, {6, 3}});
  const auto cs = connected_components(img);
  ASSERT_EQ(cs.size(), 2u);
  for (const auto& c : cs) {
    EXPECT_EQ(c.count, 4);
    EXPECT_EQ(c.box.w, 2);
    EXPECT_EQ(c.box.h, 2);
  }
}

TEST(Components, DiagonalTouchIsConnected) {
  const auto img = bitmap(4, 4, {{0, 0}, {1, 1}, {2, 2}, {2, 3}});
  EXPECT_EQ(connected_components(img).size(), 1u);
}

TEST(Components, SortedByDescendingCount) {
  std::mt19937 rng(23);
  for (int i = 0; i < 50; ++i) {
    const auto cs = connected_components(oracle::random_bitmap(rng));
    for (std::size_t j = 1; j < cs.size(); ++j) EXPECT_GE(cs[j - 1].count, cs[j].count);
  }
}

TEST(Components, MatchesFloodFill) {
  std::mt19937 rng(29);
  for (int i = 0; i < 200; ++i) {
    const auto img = oracle::random_bitmap(rng);
    ASSERT_TRUE(oracle::same_components(img, label_components(img))) << "case " << i;
  }
}

TEST(ScaleRows, NearestNeighbor) {
  BinaryImage img(1, 4);
  img(0, 1) = 1;
  const auto up = scale_rows_nearest(img, 8);
  EXPECT_EQ(up.height(), 8);
  EXPECT_EQ(up(0, 2), 1);
  EXPECT_EQ(up(0, 3), 1);
  EXPECT_EQ(ink_count(up), 2);
  EXPECT_THROW(scale_rows_nearest(img, 0), DimensionError);
}
