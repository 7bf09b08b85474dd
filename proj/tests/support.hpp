#pragma once

// Shared fixtures for the unit tests: scratch directories, brute-force
// oracles, and a toy bright-square cascade.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "drowsy/haar.hpp"
#include "drowsy/haar_train.hpp"
#include "drowsy/imaging.hpp"
#include "drowsy/synth.hpp"

namespace testing_support {

using namespace drowsy;

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("drowsy_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline GrayImage random_image(int w, int h, std::mt19937_64& rng, int lo = 0, int hi = 255) {
  std::uniform_int_distribution<int> d(lo, hi);
  GrayImage img(w, h);
  for (auto& v : img.pixels()) v = static_cast<std::uint8_t>(d(rng));
  return img;
}

inline std::uint64_t brute_sum(const GrayImage& img, const Rect& r) {
  std::uint64_t s = 0;
  for (int y = r.y; y < r.bottom(); ++y)
    for (int x = r.x; x < r.right(); ++x) s += img.at(x, y);
  return s;
}

inline Rect random_rect(int w, int h, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> dx(0, w - 1), dy(0, h - 1);
  const int x = dx(rng), y = dy(rng);
  std::uniform_int_distribution<int> dw(1, w - x), dh(1, h - y);
  return {x, y, dw(rng), dh(rng)};
}

// Toy "faces": a bright square centred in a 20x20 window with a dark margin.
inline constexpr int kToyBase = 20;

inline GrayImage toy_positive(synth::Rng& rng) {
  const int side = rng.integer(12, 16);
  const int off = (kToyBase - side) / 2;
  return synth::square_scene(kToyBase, kToyBase, {{off + rng.integer(-1, 1), off + rng.integer(-1, 1), side, side}}, rng);
}

// Noise, plain levels, off-centre or wrongly sized squares, and bars.
inline GrayImage toy_negative(synth::Rng& rng) {
  switch (rng.integer(0, 3)) {
    case 0: return synth::square_scene(kToyBase, kToyBase, {}, rng, rng.uniform(2.0, 30.0));
    case 1: {
      GrayImage g(kToyBase, kToyBase, static_cast<std::uint8_t>(rng.integer(0, 255)));
      for (auto& v : g.pixels()) v = to_pixel(v + rng.normal(0.0, 4.0));
      return g;
    }
    case 2: {
      const int side = rng.integer(6, 20);
      const int x = rng.integer(-side / 2, kToyBase - side / 2);
      const int y = rng.integer(-side / 2, kToyBase - side / 2);
      if (std::abs(x - (kToyBase - side) / 2) < 4 && std::abs(y - (kToyBase - side) / 2) < 4 && side > 10 &&
          side < 18)
        return synth::square_scene(kToyBase, kToyBase, {{0, 0, 4, kToyBase}}, rng);
      return synth::square_scene(kToyBase, kToyBase, {{x, y, side, side}}, rng);
    }
    default: {
      const int w = rng.integer(2, 8);
      const int x = rng.integer(0, kToyBase - w);
      if (rng.chance(0.5)) return synth::square_scene(kToyBase, kToyBase, {{x, 0, w, kToyBase}}, rng);
      return synth::square_scene(kToyBase, kToyBase, {{0, x, kToyBase, w}}, rng);
    }
  }
}

// Squares that are close to a positive but shifted, resized, or turned.
inline GrayImage toy_hard_negative(synth::Rng& rng) {
  if (rng.chance(0.3)) {
    const int side = rng.integer(11, 15);
    const int off = (kToyBase - side) / 2;
    const GrayImage sq = synth::square_scene(kToyBase, kToyBase, {{off, off, side, side}}, rng, 0.0);
    GrayImage turned = rotate(sq, rng.uniform(0.35, 1.22), image_center(sq));
    for (auto& v : turned.pixels()) v = to_pixel(std::max<double>(v, 50.0) + rng.normal(0.0, 4.0));
    return turned;
  }
  const int side = rng.integer(8, 19);
  const int c = (kToyBase - side) / 2;
  int dx = rng.integer(-6, 6);
  const int dy = rng.integer(-6, 6);
  if (side >= 12 && side <= 16 && std::abs(dx) < 3 && std::abs(dy) < 3) dx = dx < 0 ? -4 : 4;
  return synth::square_scene(kToyBase, kToyBase, {{c + dx, c + dy, side, side}}, rng);
}

inline std::vector<GrayImage> toy_set(bool positive, int n, synth::Rng& rng) {
  std::vector<GrayImage> out;
  for (int i = 0; i < n; ++i) out.push_back(positive ? toy_positive(rng) : toy_negative(rng));
  return out;
}

inline std::vector<haar::HaarFeature> toy_pool(std::size_t n = 500, std::uint32_t seed = 7) {
  return haar::sample_features(haar::enumerate_features(kToyBase, kToyBase, 2), n, seed);
}

inline haar::Cascade toy_cascade(std::uint64_t seed = 11, std::vector<int> rounds = {3, 6, 10}) {
  synth::Rng rng(seed);
  const auto pos = toy_set(true, 300, rng);
  auto neg = toy_set(false, 400, rng);
  for (int i = 0; i < 400; ++i) neg.push_back(toy_hard_negative(rng));
  return haar::build_cascade(pos, neg, toy_pool(), rounds);
}

}  // namespace testing_support
