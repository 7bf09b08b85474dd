#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "drowsy/lbp.hpp"
#include "support.hpp"

using namespace drowsy;
using namespace drowsy::lbp;

namespace {

GrayImage fig_grid() {
  GrayImage g(3, 3);
  const int v[9] = {6, 5, 2, 7, 6, 1, 9, 8, 7};
  for (int i = 0; i < 9; ++i) g.at(i % 3, i / 3) = static_cast<std::uint8_t>(v[i]);
  return g;
}

GrayImage shifted(const GrayImage& img, int c) {
  GrayImage out = img;
  for (auto& v : out.pixels()) v = static_cast<std::uint8_t>(v + c);
  return out;
}

// Histogram of the window straight from the code image, block by block.
std::vector<double> direct_descriptor(const LbpImage& li, int x0, int y0) {
  std::vector<double> out;
  for (int by = 0; by < kWindowHeight / 4; ++by)
    for (int bx = 0; bx < kWindowWidth / 5; ++bx) {
      std::vector<double> h(16, 0.0);
      for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 5; ++x) h[li.at(x0 + bx * 5 + x, y0 + by * 4 + y) / 16] += 1.0;
      out.insert(out.end(), h.begin(), h.end());
    }
  return out;
}

std::vector<GrayImage> night_crops(int n, std::uint64_t seed) {
  synth::Rng rng(seed);
  synth::EyeSampleOptions eo;
  eo.style = synth::Style::night;
  auto open = synth::eye_crops(false, n / 2, eo, rng);
  const auto closed = synth::eye_crops(true, n - n / 2, eo, rng);
  open.insert(open.end(), closed.begin(), closed.end());
  return open;
}

const NirEyeModel& night_model() {
  static const NirEyeModel m = train_nir(night_crops(120, 5));
  return m;
}

}  // namespace

TEST(Code, WorkedGrid) {
  EXPECT_EQ(lbp_code(fig_grid(), 1, 1), 241u);
  const auto li = lbp_image(fig_grid());
  ASSERT_EQ(li.width, 1);
  ASSERT_EQ(li.height, 1);
  EXPECT_EQ(li.at(0, 0), 241u);
}

TEST(Code, NeighbourWeightsFollowTheFigure) {
  // One neighbour at a time above the centre; the rest below it.
  const int pos[8][2] = {{0, 0}, {1, 0}, {2, 0}, {2, 1}, {2, 2}, {1, 2}, {0, 2}, {0, 1}};
  for (int k = 0; k < 8; ++k) {
    GrayImage g(3, 3, 10);
    g.at(1, 1) = 50;
    g.at(pos[k][0], pos[k][1]) = 90;
    EXPECT_EQ(lbp_code(g, 1, 1), 1u << k) << k;
  }
}

TEST(Code, ConstantImageSetsEveryBit) {
  EXPECT_EQ(lbp_code(GrayImage(3, 3, 77), 1, 1), 255u);
  for (int p : {4, 8, 12, 16}) {
    LbpParams lp{p, 2.0, true};
    EXPECT_EQ(lbp_code(GrayImage(9, 9, 3), 4, 4, lp), (1u << p) - 1u) << p;
  }
  const auto li = lbp_image(GrayImage(10, 10, 200));
  EXPECT_EQ(li.width, 8);
  EXPECT_EQ(li.height, 8);
  for (auto c : li.codes) EXPECT_EQ(c, 255u);
}

TEST(Code, BorderAndParameterErrors) {
  EXPECT_THROW(lbp_code(fig_grid(), 0, 1), BoundsError);
  EXPECT_THROW(lbp_code(fig_grid(), 1, 2), BoundsError);
  EXPECT_THROW(lbp_image(GrayImage(2, 5)), InvalidArgument);
  EXPECT_THROW(lbp_image(GrayImage(5, 5), LbpParams{3, 1.0, false}), InvalidArgument);
  EXPECT_THROW(lbp_image(GrayImage(5, 5), LbpParams{8, 0.0, false}), InvalidArgument);
}

TEST(Code, OutputDimensions) {
  for (double r : {1.0, 1.5, 2.0, 3.0}) {
    LbpParams lp{8, r, true};
    const int m = lp.margin();
    const auto li = lbp_image(GrayImage(31, 17, 5), lp);
    EXPECT_EQ(li.width, 31 - 2 * m);
    EXPECT_EQ(li.height, 17 - 2 * m);
  }
  const auto same = lbp_image_same(GrayImage(31, 17, 5), LbpParams{8, 2.0, true});
  EXPECT_EQ(same.width, 31);
  EXPECT_EQ(same.height, 17);
}

TEST(Properties, GrayscaleShiftInvariance) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> shift(-60, 60);
  for (int trial = 0; trial < 30; ++trial) {
    const auto img = testing_support::random_image(40, 30, rng, 60, 195);
    const int c = shift(rng);
    for (const LbpParams& lp : {LbpParams{}, LbpParams{8, 1.0, true}, LbpParams{12, 2.5, true}})
      ASSERT_EQ(lbp_image(img, lp), lbp_image(shifted(img, c), lp)) << "shift " << c;
  }
}

TEST(Blocks, UniformCodesFillOneBin) {
  const auto g = block_histograms(lbp_image(GrayImage(52, 42, 9)));
  EXPECT_EQ(g.cols, 10);
  EXPECT_EQ(g.rows, 10);
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c) {
      const auto* h = g.block(c, r);
      EXPECT_EQ(h[15], 20u);
      EXPECT_EQ(std::count(h, h + 16, 0u), 15);
    }
}

TEST(Blocks, EveryBlockCountsTwenty) {
  std::mt19937_64 rng(2);
  const auto g = block_histograms(lbp_image_same(testing_support::random_image(113, 67, rng)));
  EXPECT_EQ(g.cols, 113 / 5);
  EXPECT_EQ(g.rows, 67 / 4);
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c) {
      const auto* h = g.block(c, r);
      EXPECT_EQ(std::accumulate(h, h + 16, 0u), 20u);
    }
  EXPECT_THROW(block_histograms(lbp_image(GrayImage(10, 10)), BlockSpec{5, 4, 15}), InvalidArgument);
}

TEST(Descriptor, LayoutAndLength) {
  std::mt19937_64 rng(3);
  const auto g = block_histograms(lbp_image_same(testing_support::random_image(200, 70, rng)));
  const auto d = window_descriptor(g, 0, 0);
  ASSERT_EQ(d.size(), 1600u);
  for (int b = 0; b < 16; ++b) EXPECT_EQ(d[b], g.block(0, 0)[b]);
  for (int b = 0; b < 16; ++b) EXPECT_EQ(d[16 + b], g.block(1, 0)[b]);
  for (int b = 0; b < 16; ++b) EXPECT_EQ(d[160 + b], g.block(0, 1)[b]);
  const auto n = window_descriptor(g, 0, 0, true);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_DOUBLE_EQ(n[i], d[i] / 20.0);
  EXPECT_THROW(window_descriptor(g, 3, 0), InvalidArgument);
  EXPECT_THROW(window_descriptor(g, 0, 2), InvalidArgument);
  EXPECT_THROW(window_descriptor(g, 155, 0), BoundsError);
}

TEST(Descriptor, GridMatchesDirectRecomputation) {
  std::mt19937_64 rng(4);
  const auto roi = testing_support::random_image(200, 70, rng);
  const auto li = lbp_image_same(roi);
  const auto g = block_histograms(li);
  int checked = 0;
  for (int y = 0; y + kWindowHeight <= 70; y += 4)
    for (int x = 0; x + kWindowWidth <= 200; x += 5) {
      ASSERT_EQ(window_descriptor(g, x, y), direct_descriptor(li, x, y)) << x << "," << y;
      ++checked;
    }
  EXPECT_EQ(checked, 248);
}

TEST(Descriptor, OneBlockShiftReusesNinetyBlocks) {
  std::mt19937_64 rng(5);
  const auto g = block_histograms(lbp_image_same(testing_support::random_image(200, 70, rng)));
  BlockAccessLog a, b, c;
  window_descriptor(g, 0, 0, false, kWindowWidth, kWindowHeight, &a);
  window_descriptor(g, 5, 0, false, kWindowWidth, kWindowHeight, &b);
  window_descriptor(g, 0, 4, false, kWindowWidth, kWindowHeight, &c);
  const std::set<std::pair<int, int>> sa(a.reads.begin(), a.reads.end());
  ASSERT_EQ(sa.size(), 100u);
  auto shared = [&](const BlockAccessLog& o) {
    return std::count_if(o.reads.begin(), o.reads.end(), [&](const auto& k) { return sa.count(k) > 0; });
  };
  EXPECT_EQ(shared(b), 90);
  EXPECT_EQ(shared(c), 90);
}

TEST(Search, PositionCounts) {
  EXPECT_EQ(window_positions(200, 70, 5, 4), 248);
  EXPECT_EQ(window_positions(200, 70, 1, 1), 4681);
  EXPECT_EQ(window_positions(40, 70, 5, 4), 0);
  NirSearchStats st;
  std::mt19937_64 rng(6);
  detect_eye_nir(night_model(), testing_support::random_image(200, 70, rng), &st);
  EXPECT_EQ(st.windows, 248u);
  EXPECT_EQ(st.lbp_passes, 1u);
  EXPECT_EQ(st.histogram_passes, 1u);
}

TEST(Train, SpanAndErrors) {
  const auto crops = night_crops(41, 6);
  const auto m = train_nir(crops);
  EXPECT_EQ(m.eigen.components(), 40u);
  EXPECT_EQ(m.eigen.dim(), 1600u);
  for (const auto& c : crops) EXPECT_LE(pca::recon_error(m.eigen, crop_descriptor(c)), 1e-6);
  EXPECT_THROW(train_nir(night_crops(40, 7)), TrainingError);
  EXPECT_THROW(train_nir(std::vector<GrayImage>(41, crops[0])), TrainingError);
  auto wrong = crops;
  wrong[3] = GrayImage(50, 41);
  EXPECT_THROW(train_nir(wrong), InvalidArgument);
}

TEST(Train, EyesReconstructBetterThanNoise) {
  const auto& m = night_model();
  std::vector<double> eyes, noise;
  for (const auto& c : night_crops(100, 8)) eyes.push_back(pca::recon_error(m.eigen, crop_descriptor(c)));
  std::mt19937_64 rng(9);
  for (int i = 0; i < 100; ++i)
    noise.push_back(pca::recon_error(m.eigen, crop_descriptor(testing_support::random_image(50, 40, rng))));
  EXPECT_LT(pca::percentile(eyes, 0.99), pca::percentile(noise, 0.01));
  EXPECT_GT(m.tau, 0.0);
}

TEST(Search, PlantedEyeIsRecovered) {
  const auto& m = night_model();
  const auto crops = night_crops(120, 5);
  std::mt19937_64 rng(10);
  GrayImage roi = testing_support::random_image(200, 70, rng);
  paste(roi, crops[7], 95, 20);
  const auto hit = detect_eye_nir(m, roi);
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->rect, (Rect{95, 20, 50, 40}));
  EXPECT_EQ(hit->weights.size(), 40u);
}

TEST(Search, NoiseIsRejected) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 5; ++i) EXPECT_FALSE(detect_eye_nir(night_model(), testing_support::random_image(200, 70, rng)));
  EXPECT_FALSE(detect_eye_nir(night_model(), GrayImage(45, 70)));
}

TEST(Search, IntensityShiftKeepsTheWinner) {
  synth::Rng rng(12);
  synth::EyeSampleOptions eo;
  eo.style = synth::Style::night;
  for (int trial = 0; trial < 4; ++trial) {
    GrayImage roi = synth::render_eye_roi(trial % 2 == 0, eo, rng).roi;
    // Squeeze into [45, 210] so both shifts stay unsaturated.
    for (auto& v : roi.pixels()) v = static_cast<std::uint8_t>(45 + v * 165 / 255);
    NirEyeModel loose = night_model();
    loose.tau = 1e12;
    const auto base = detect_eye_nir(loose, roi);
    ASSERT_TRUE(base);
    for (int c : {-40, 40}) {
      const auto moved = detect_eye_nir(loose, shifted(roi, c));
      ASSERT_TRUE(moved);
      EXPECT_EQ(moved->rect, base->rect);
      EXPECT_DOUBLE_EQ(moved->error, base->error);
    }
  }
}

TEST(ModelFile, RoundTripAndValidation) {
  testing_support::TempDir dir("nir");
  save_nir_model(dir / "nir.model", night_model());
  const auto back = load_nir_model(dir / "nir.model");
  EXPECT_EQ(back.eigen.mean, night_model().eigen.mean);
  EXPECT_EQ(back.eigen.eigvecs, night_model().eigen.eigvecs);
  EXPECT_EQ(back.tau, night_model().tau);
  EXPECT_EQ(back.stride_x, 5);
  EXPECT_EQ(back.stride_y, 4);

  std::ostringstream out;
  auto odd = night_model();
  odd.block.bins = 8;
  write_nir_model(out, odd);
  std::istringstream in(out.str());
  EXPECT_THROW(read_nir_model(in), FormatError);
  std::istringstream junk("LBPEIGEN v1\nLBP 8 1\n");
  EXPECT_THROW(read_nir_model(junk), FormatError);
}
