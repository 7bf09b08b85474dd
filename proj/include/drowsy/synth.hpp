#pragma once

// Synthetic scenes for training and testing: cartoon faces with open or closed
// eyes over cluttered backgrounds, day and NIR-like night styles, frame
// sequences, and the toy model trainers built on them.
//
// Face geometry, in face coordinates (u, v) over the unit square:
//   hair        v < 0.12
//   eyebrows    v 0.245..0.29, u around 0.275 and 0.725
//   eyes        ellipses centred (0.275, 0.44) and (0.725, 0.44), radii 0.11 x 0.07
//   nose        u 0.47..0.53, v 0.46..0.66, nostrils at v 0.665
//   mouth       u 0.33..0.67, v 0.75..0.81
// The eye windows at (30, 16) and (120, 16) of a 200x70 eye ROI cover exactly
// u 0.15..0.40 / 0.60..0.85 and v 0.3067..0.5733 of an aligned face box.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "drowsy/eigen_space.hpp"
#include "drowsy/error.hpp"
#include "drowsy/haar.hpp"
#include "drowsy/haar_train.hpp"
#include "drowsy/imaging.hpp"
#include "drowsy/lbp.hpp"
#include "drowsy/pgm.hpp"
#include "drowsy/svm.hpp"

namespace drowsy::synth {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(eng_); }
  double normal(double mean, double sd) { return std::normal_distribution<double>(mean, sd)(eng_); }
  int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(eng_); }
  bool chance(double p) { return uniform(0.0, 1.0) < p; }
  std::uint64_t next() { return eng_(); }
  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

enum class Style { day, night };

struct Face {
  double cx = 0.0;  // centre, continuous coordinates (pixel x spans [x, x + 1))
  double cy = 0.0;
  double size = 100.0;
  double angle = 0.0;  // radians; the upright face is rotated by this about its centre
  bool closed = false;
  double skin = 170.0;
};

/// Upright face square as an integer box.
inline Rect face_box(const Face& f) {
  const int x = static_cast<int>(std::lround(f.cx - f.size / 2.0));
  const int y = static_cast<int>(std::lround(f.cy - f.size / 2.0));
  const int s = static_cast<int>(std::lround(f.size));
  return {x, y, s, s};
}

inline constexpr double kEyeCentreV = 0.44;
inline constexpr double kEyeRadiusU = 0.11;
inline constexpr double kEyeRadiusV = 0.07;
inline constexpr double kEyeCentresU[2] = {0.275, 0.725};

/// Day-style intensity of face point (u, v); u, v in [0, 1].
inline double face_value(double u, double v, bool closed, double skin) {
  if (v < 0.12) return 55.0;
  double val = skin - 12.0 * (v - 0.5);
  for (double cu : kEyeCentresU) {
    const double du = (u - cu) / kEyeRadiusU;
    const double dv = (v - kEyeCentreV) / kEyeRadiusV;
    if (std::abs(u - cu) <= 0.115 && v >= 0.245 && v <= 0.29) return skin - 90.0;
    const double socket = (du / 1.4) * (du / 1.4) + (dv / 1.6) * (dv / 1.6);
    if (socket > 1.0) continue;
    val = skin - 35.0;
    const double r2 = du * du + dv * dv;
    if (!closed) {
      if (r2 <= 1.0) {
        const double d2 = (u - cu) * (u - cu) + (v - kEyeCentreV) * (v - kEyeCentreV);
        if (d2 <= 0.02 * 0.02) return 20.0;
        if (d2 <= 0.045 * 0.045) return 45.0;
        return 220.0;
      }
    } else if (std::abs(du) <= 1.0) {
      const double lid = kEyeCentreV + 0.03 * (1.0 - du * du);
      if (std::abs(v - lid) <= 0.012) return 35.0;
      if (r2 <= 1.0) val = skin - 25.0;
    }
    return val;
  }
  if (u >= 0.47 && u <= 0.53 && v >= 0.46 && v <= 0.66) val -= 15.0;
  for (double nu : {0.45, 0.55})
    if ((u - nu) * (u - nu) + (v - 0.665) * (v - 0.665) <= 0.02 * 0.02) return skin - 70.0;
  if (u >= 0.33 && u <= 0.67 && v >= 0.75 && v <= 0.81) return skin - 85.0;
  return val;
}

/// Night frames stand in for actively lit NIR captures: half the contrast and a
/// fifth of the day sensor noise.
inline constexpr double kNightNoiseScale = 0.2;

inline double night_map(double v) { return 0.5 * v + 12.0; }

inline double style_noise(Style s, double sigma) { return s == Style::night ? sigma * kNightNoiseScale : sigma; }

struct SceneOptions {
  Style style = Style::day;
  double noise = 5.0;       // Gaussian pixel noise sigma at day level (see style_noise)
  double clutter = 1.0;     // shape density multiplier
  int supersample = 2;      // per axis, for face edges
};

namespace detail {

inline void fill_background(std::vector<double>& buf, int w, int h, const SceneOptions& o, Rng& rng) {
  const double base = rng.uniform(70.0, 150.0);
  const double gx = rng.uniform(-40.0, 40.0);
  const double gy = rng.uniform(-40.0, 40.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      buf[static_cast<std::size_t>(y) * w + x] = base + gx * x / w + gy * y / h;
  const int side = std::min(w, h);
  const int shapes = std::clamp(static_cast<int>(o.clutter * w * h / 8000.0), o.clutter > 0 ? 3 : 0, 40);
  for (int s = 0; s < shapes; ++s) {
    const double sw = std::max(2.0, rng.uniform(0.03, 0.35) * side);
    const double sh = std::max(2.0, rng.uniform(0.03, 0.35) * side);
    const double x0 = rng.uniform(-sw / 2, w);
    const double y0 = rng.uniform(-sh / 2, h);
    const double val = rng.uniform(20.0, 235.0);
    const int kind = rng.integer(0, 2);
    const int xa = std::max(0, static_cast<int>(x0)), xb = std::min(w, static_cast<int>(x0 + sw));
    const int ya = std::max(0, static_cast<int>(y0)), yb = std::min(h, static_cast<int>(y0 + sh));
    const double period = std::max(2.0, sh / rng.uniform(2.0, 6.0));
    for (int y = ya; y < yb; ++y)
      for (int x = xa; x < xb; ++x) {
        if (kind == 1) {
          const double ex = (x + 0.5 - x0 - sw / 2) / (sw / 2);
          const double ey = (y + 0.5 - y0 - sh / 2) / (sh / 2);
          if (ex * ex + ey * ey > 1.0) continue;
        }
        if (kind == 2 && std::fmod(y - y0, period) > period / 2) continue;
        buf[static_cast<std::size_t>(y) * w + x] = val;
      }
  }
}

inline void draw_face(std::vector<double>& buf, int w, int h, const Face& f, int ss) {
  const double c = std::cos(f.angle), s = std::sin(f.angle);
  const double half = f.size / 2.0 * (std::abs(c) + std::abs(s)) + 1.0;
  const int xa = std::max(0, static_cast<int>(std::floor(f.cx - half)));
  const int xb = std::min(w, static_cast<int>(std::ceil(f.cx + half)));
  const int ya = std::max(0, static_cast<int>(std::floor(f.cy - half)));
  const int yb = std::min(h, static_cast<int>(std::ceil(f.cy + half)));
  for (int y = ya; y < yb; ++y)
    for (int x = xa; x < xb; ++x) {
      double& px = buf[static_cast<std::size_t>(y) * w + x];
      double acc = 0.0;
      int inside = 0;
      for (int j = 0; j < ss; ++j)
        for (int i = 0; i < ss; ++i) {
          const double dx = x + (i + 0.5) / ss - f.cx;
          const double dy = y + (j + 0.5) / ss - f.cy;
          const double u = (c * dx + s * dy) / f.size + 0.5;
          const double v = (-s * dx + c * dy) / f.size + 0.5;
          if (u < 0.0 || u >= 1.0 || v < 0.0 || v >= 1.0) continue;
          acc += face_value(u, v, f.closed, f.skin);
          ++inside;
        }
      if (inside == 0) continue;
      const double n = static_cast<double>(ss) * ss;
      px = (acc + px * (n - inside)) / n;
    }
}

}  // namespace detail

/// Renders a w x h scene: background clutter, then the faces, then the style
/// mapping and pixel noise.
inline GrayImage render_scene(int w, int h, const std::vector<Face>& faces, const SceneOptions& o, Rng& rng) {
  std::vector<double> buf(static_cast<std::size_t>(w) * h);
  detail::fill_background(buf, w, h, o, rng);
  for (const auto& f : faces) detail::draw_face(buf, w, h, f, std::max(1, o.supersample));
  GrayImage img(w, h);
  auto px = img.pixels();
  std::normal_distribution<double> noise(0.0, 1.0);
  const double sigma = style_noise(o.style, o.noise);
  for (std::size_t i = 0; i < buf.size(); ++i) {
    double v = buf[i];
    if (o.style == Style::night) v = night_map(v);
    if (sigma > 0.0) v += sigma * noise(rng.engine());
    px[i] = to_pixel(v);
  }
  return img;
}

/// Area-weighted resampling to w x h (every source pixel contributes by overlap).
inline GrayImage shrink_area(const GrayImage& img, int w, int h) {
  if (w < 1 || h < 1) throw InvalidArgument("shrink target must be at least 1x1");
  const double sx = static_cast<double>(img.width()) / w;
  const double sy = static_cast<double>(img.height()) / h;
  std::vector<double> cols(static_cast<std::size_t>(w) * img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < w; ++x) {
      const double a = x * sx, b = (x + 1) * sx;
      double acc = 0.0;
      for (int k = static_cast<int>(a); k < std::min(img.width(), static_cast<int>(std::ceil(b))); ++k)
        acc += img.at(k, y) * (std::min(b, k + 1.0) - std::max(a, static_cast<double>(k)));
      cols[static_cast<std::size_t>(y) * w + x] = acc / sx;
    }
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    const double a = y * sy, b = (y + 1) * sy;
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = static_cast<int>(a); k < std::min(img.height(), static_cast<int>(std::ceil(b))); ++k)
        acc += cols[static_cast<std::size_t>(k) * w + x] * (std::min(b, k + 1.0) - std::max(a, static_cast<double>(k)));
      out.at(x, y) = to_pixel(acc / sy);
    }
  }
  return out;
}

/// Nominal eye window of the eye ROI for eye 0 (image left) or 1.
inline Rect eye_window(int eye) {
  return {eye == 0 ? 30 : 120, 16, pca::kEyeWindowWidth, pca::kEyeWindowHeight};
}

/// Face box as a detector would report it: position and size perturbed.
inline Rect jittered_box(const Face& f, double pos_jitter, double size_jitter, Rng& rng) {
  const double s = f.size * (1.0 + rng.uniform(-size_jitter, size_jitter));
  const double cx = f.cx + rng.uniform(-pos_jitter, pos_jitter) * f.size;
  const double cy = f.cy + rng.uniform(-pos_jitter, pos_jitter) * f.size;
  const int is = static_cast<int>(std::lround(s));
  return {static_cast<int>(std::lround(cx - s / 2)), static_cast<int>(std::lround(cy - s / 2)), is, is};
}

struct EyeSample {
  GrayImage roi;              // 200x70 eye ROI
  std::array<bool, 2> closed;  // per eye
};

struct EyeSampleOptions {
  Style style = Style::day;
  double min_face = 110.0;
  double max_face = 150.0;
  double pos_jitter = 0.025;
  double size_jitter = 0.04;
  double noise = 5.0;
  bool equalize = false;
};

/// One rendered face (both eyes in the same state) and its eye ROI taken from a
/// perturbed face box.
inline EyeSample render_eye_roi(bool closed, const EyeSampleOptions& o, Rng& rng) {
  Face f;
  f.size = rng.uniform(o.min_face, o.max_face);
  const int canvas = static_cast<int>(std::ceil(f.size * 1.3)) + 4;
  f.cx = canvas / 2.0 + rng.uniform(-1.0, 1.0);
  f.cy = canvas / 2.0 + rng.uniform(-1.0, 1.0);
  f.angle = rng.uniform(-0.03, 0.03);
  f.closed = closed;
  f.skin = rng.uniform(145.0, 195.0);
  SceneOptions so;
  so.style = o.style;
  so.noise = o.noise;
  so.supersample = 1;
  const GrayImage img = render_scene(canvas, canvas, {f}, so, rng);
  GrayImage roi = haar::select_eye_roi(jittered_box(f, o.pos_jitter, o.size_jitter, rng), img);
  if (o.equalize) roi = hist_equalize(roi);
  return {std::move(roi), {closed, closed}};
}

/// 50x40 eye crops around the nominal eye windows, shifted by up to `shift` px.
inline std::vector<GrayImage> eye_crops(bool closed, int count, const EyeSampleOptions& o, Rng& rng, int shift = 2) {
  std::vector<GrayImage> out;
  while (static_cast<int>(out.size()) < count) {
    const EyeSample s = render_eye_roi(closed, o, rng);
    for (int eye = 0; eye < 2 && static_cast<int>(out.size()) < count; ++eye) {
      Rect r = eye_window(eye);
      r.x += rng.integer(-shift, shift);
      r.y += rng.integer(-shift, shift);
      out.push_back(crop(s.roi, r));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cascade training with hard-negative mining.

/// Returns up to n base-sized windows the current cascade accepts but which are not targets.
using NegativeMiner = std::function<std::vector<GrayImage>(const haar::Cascade&, std::size_t n, Rng&)>;

struct MinedTrainOptions {
  std::vector<int> stage_rounds;
  std::size_t negatives_per_stage = 1000;
  std::size_t min_negatives = 40;  // stop adding stages when mining finds fewer
  haar::StageTrainOptions stage;
};

struct MinedTrainReport {
  std::vector<std::size_t> negatives_found;
};

inline haar::Cascade train_cascade_mined(const std::vector<GrayImage>& positives, const std::vector<haar::HaarFeature>& pool,
                                         const NegativeMiner& miner, const MinedTrainOptions& o, Rng& rng,
                                         MinedTrainReport* report = nullptr) {
  if (positives.empty()) throw TrainingError("no positive samples");
  haar::Cascade c;
  c.base_width = positives.front().width();
  c.base_height = positives.front().height();
  c.variance_normalize = o.stage.variance_normalize;
  for (int rounds : o.stage_rounds) {
    auto negatives = miner(c, o.negatives_per_stage, rng);
    if (report) report->negatives_found.push_back(negatives.size());
    if (negatives.size() < o.min_negatives) break;
    c.stages.push_back(haar::train_stage(positives, negatives, pool, rounds, o.stage));
  }
  if (c.stages.empty()) throw TrainingError("mining produced no negatives for the first stage");
  return c;
}

namespace detail {

/// Base-size windows of `img` (stride 1) the cascade accepts, skipping those
/// overlapping any of `keep_out` by IoU >= max_iou. At most `cap` are returned,
/// spread uniformly over the candidates.
inline std::vector<GrayImage> accepted_windows(const haar::Cascade& c, const GrayImage& img,
                                               const std::vector<Rect>& keep_out, double max_iou, std::size_t cap,
                                               Rng& rng) {
  std::vector<Rect> cand;
  if (img.width() < c.base_width || img.height() < c.base_height) return {};
  const haar::ScanImage scan(img, c.variance_normalize);
  const haar::ScaledCascade sc(c, c.base_width, c.base_height, scan.ii().width());
  for (int y = 0; y + c.base_height <= img.height(); ++y)
    for (int x = 0; x + c.base_width <= img.width(); ++x) {
      const Rect r{x, y, c.base_width, c.base_height};
      bool blocked = false;
      for (const auto& k : keep_out)
        if (iou(r, k) >= max_iou) blocked = true;
      if (blocked) continue;
      if (c.stages.empty() || sc.evaluate(scan, x, y).passed) cand.push_back(r);
    }
  std::shuffle(cand.begin(), cand.end(), rng.engine());
  if (cand.size() > cap) cand.resize(cap);
  std::vector<GrayImage> out;
  for (const auto& r : cand) out.push_back(crop(img, r));
  return out;
}

inline Rect scale_box(const Rect& r, double f) {
  return {static_cast<int>(std::lround(r.x / f)), static_cast<int>(std::lround(r.y / f)),
          std::max(1, static_cast<int>(std::lround(r.w / f))), std::max(1, static_cast<int>(std::lround(r.h / f)))};
}

}  // namespace detail

inline constexpr int kFaceBase = 16;

struct FaceCascadeOptions {
  std::size_t positives = 800;
  std::size_t pool = 2500;
  MinedTrainOptions mining{{4, 6, 9, 12, 16, 20, 24, 28}, 1000, 40, {true}};
  int mining_frames_per_stage = 400;
};

/// Base-size face window: face filling the window with small offset, scale and
/// rotation jitter.
inline GrayImage face_positive(Rng& rng) {
  Face f;
  f.size = kFaceBase * rng.uniform(0.88, 1.12);
  f.cx = kFaceBase / 2.0 + rng.uniform(-1.4, 1.4);
  f.cy = kFaceBase / 2.0 + rng.uniform(-1.4, 1.4);
  f.angle = rng.uniform(-0.12, 0.12);
  f.closed = rng.chance(0.5);
  f.skin = rng.uniform(140.0, 200.0);
  SceneOptions so;
  so.style = rng.chance(0.3) ? Style::night : Style::day;
  so.noise = rng.uniform(0.5, 4.0);
  so.supersample = 4;
  return render_scene(kFaceBase, kFaceBase, {f}, so, rng);
}

/// Mining scene: clutter, up to two faces at random size and tilt, sometimes the
/// whole scene rotated with zero fill as the tilted detector does.
struct MiningScene {
  GrayImage image;
  std::vector<Rect> faces;
};

inline MiningScene mining_scene(Rng& rng) {
  const int w = 320, h = 240;
  std::vector<Face> faces;
  const int n = rng.integer(0, 2);
  for (int i = 0; i < n; ++i) {
    Face f;
    f.size = rng.uniform(30.0, 120.0);
    f.cx = rng.uniform(f.size / 2, w - f.size / 2);
    f.cy = rng.uniform(f.size / 2, h - f.size / 2);
    f.angle = rng.chance(0.5) ? 0.0 : rng.uniform(-1.3, 1.3);
    f.closed = rng.chance(0.5);
    f.skin = rng.uniform(140.0, 200.0);
    faces.push_back(f);
  }
  SceneOptions so;
  so.style = rng.chance(0.3) ? Style::night : Style::day;
  so.noise = rng.uniform(2.0, 7.0);
  so.clutter = rng.uniform(0.5, 2.0);
  so.supersample = 1;
  MiningScene ms{render_scene(w, h, faces, so, rng), {}};
  double turn = 0.0;
  if (rng.chance(0.3)) {
    const auto angles = haar::default_tilt_angles();
    turn = angles[static_cast<std::size_t>(rng.integer(0, static_cast<int>(angles.size()) - 1))];
    ms.image = rotate(ms.image, turn);
  }
  const AffineMap m = AffineMap::rotation(turn, image_center(ms.image));
  for (const auto& f : faces) {
    const Point p = m.apply({f.cx - 0.5, f.cy - 0.5});
    Face g = f;
    g.cx = p.x + 0.5;
    g.cy = p.y + 0.5;
    ms.faces.push_back(face_box(g));
  }
  return ms;
}

inline NegativeMiner face_miner(int frames_per_stage) {
  return [frames_per_stage](const haar::Cascade& c, std::size_t n, Rng& rng) {
    std::vector<GrayImage> out;
    for (int fr = 0; fr < frames_per_stage && out.size() < n; ++fr) {
      const MiningScene ms = mining_scene(rng);
      const double max_f = std::min(ms.image.width() / static_cast<double>(kFaceBase),
                                    ms.image.height() / static_cast<double>(kFaceBase));
      const double f = std::exp(rng.uniform(0.0, std::log(max_f)));
      const int w = std::max(kFaceBase, static_cast<int>(ms.image.width() / f));
      const int h = std::max(kFaceBase, static_cast<int>(ms.image.height() / f));
      const GrayImage small = shrink_area(ms.image, w, h);
      std::vector<Rect> keep;
      for (const auto& b : ms.faces) keep.push_back(detail::scale_box(b, f));
      const std::size_t cap = std::min<std::size_t>(n - out.size(), std::max<std::size_t>(8, n / 20));
      auto got = detail::accepted_windows(c, small, keep, 0.3, cap, rng);
      for (auto& g : got) out.push_back(std::move(g));
    }
    return out;
  };
}

inline haar::Cascade train_face_cascade(std::uint64_t seed, const FaceCascadeOptions& o = {},
                                        MinedTrainReport* report = nullptr) {
  Rng rng(seed);
  std::vector<GrayImage> pos;
  for (std::size_t i = 0; i < o.positives; ++i) pos.push_back(face_positive(rng));
  const auto pool = haar::sample_features(haar::enumerate_features(kFaceBase, kFaceBase), o.pool,
                                          static_cast<std::uint32_t>(rng.next()));
  return train_cascade_mined(pos, pool, face_miner(o.mining_frames_per_stage), o.mining, rng, report);
}

// ---------------------------------------------------------------------------
// Eye cascades (day-haar mode).

inline constexpr int kEyeBaseW = 20;
inline constexpr int kEyeBaseH = 16;

struct EyeCascadeOptions {
  std::size_t positives = 600;
  std::size_t pool = 2500;
  MinedTrainOptions mining{{3, 5, 8, 12, 16, 20}, 800, 30, {true}};
  int mining_rois_per_stage = 200;
};

/// Trains the cascade that fires on eyes in state `closed` and rejects the other state.
inline haar::Cascade train_eye_cascade(bool closed, std::uint64_t seed, const EyeCascadeOptions& o = {},
                                       MinedTrainReport* report = nullptr) {
  Rng rng(seed);
  EyeSampleOptions eo;
  std::vector<GrayImage> pos;
  for (const auto& c : eye_crops(closed, static_cast<int>(o.positives), eo, rng, 2))
    pos.push_back(shrink_area(c, kEyeBaseW, kEyeBaseH));
  const auto pool = haar::sample_features(haar::enumerate_features(kEyeBaseW, kEyeBaseH), o.pool,
                                          static_cast<std::uint32_t>(rng.next()));
  const int rois = o.mining_rois_per_stage;
  NegativeMiner miner = [closed, rois, eo](const haar::Cascade& c, std::size_t n, Rng& r) {
    std::vector<GrayImage> out;
    for (int i = 0; i < rois && out.size() < n; ++i) {
      const bool roi_closed = r.chance(0.5);
      const EyeSample s = render_eye_roi(roi_closed, eo, r);
      const double f = r.uniform(1.6, 4.3);
      const int w = static_cast<int>(s.roi.width() / f);
      const int h = std::max(kEyeBaseH, static_cast<int>(s.roi.height() / f));
      const GrayImage small = shrink_area(s.roi, w, h);
      std::vector<Rect> keep;
      if (roi_closed == closed)
        for (int eye = 0; eye < 2; ++eye) keep.push_back(detail::scale_box(eye_window(eye), f));
      const std::size_t cap = std::min<std::size_t>(n - out.size(), std::max<std::size_t>(6, n / 40));
      auto got = detail::accepted_windows(c, small, keep, 0.3, cap, r);
      for (auto& g : got) out.push_back(std::move(g));
    }
    return out;
  };
  return train_cascade_mined(pos, pool, miner, o.mining, rng, report);
}

// ---------------------------------------------------------------------------
// Eigen-eye (day-pca) and NIR models.

struct EigenDayOptions {
  std::size_t train_per_class = 120;
  std::size_t calib_per_class = 80;
  std::size_t components = 20;
};

/// Per-class eye subspaces on equalized day crops; thresholds from held-out crops.
inline pca::ClassModels train_day_eigen(std::uint64_t seed, const EigenDayOptions& o = {}) {
  Rng rng(seed);
  EyeSampleOptions eo;
  eo.equalize = true;
  auto fit = [&](bool closed, double& tau) {
    pca::SampleMatrix x;
    for (const auto& c : eye_crops(closed, static_cast<int>(o.train_per_class), eo, rng)) x.add(pca::vectorize(c));
    pca::EigenModel m = pca::pca_train(x, o.components);
    std::vector<double> errs;
    for (const auto& c : eye_crops(closed, static_cast<int>(o.calib_per_class), eo, rng))
      errs.push_back(pca::recon_error(m, pca::vectorize(c)));
    tau = pca::percentile(errs, 0.99);
    return m;
  };
  pca::ClassModels cm;
  cm.open = fit(false, cm.tau_open);
  cm.closed = fit(true, cm.tau_closed);
  return cm;
}

struct NightModels {
  lbp::NirEyeModel nir;
  svm::SvmModel svm;
};

struct NightOptions {
  std::size_t crops_per_class = 150;
  std::size_t calib_per_class = 60;
  svm::Kernel kernel = svm::Kernel::polynomial(3, 1.0);
  double C = 1.0;
};

/// NIR eye model on night crops of both states (threshold from held-out crops),
/// and the eye-state SVM on the crops' projected weights (+1 open, -1 closed).
inline NightModels train_night(std::uint64_t seed, const NightOptions& o = {}) {
  Rng rng(seed);
  EyeSampleOptions eo;
  eo.style = Style::night;
  const auto open = eye_crops(false, static_cast<int>(o.crops_per_class), eo, rng);
  const auto closed = eye_crops(true, static_cast<int>(o.crops_per_class), eo, rng);
  std::vector<GrayImage> all = open;
  all.insert(all.end(), closed.begin(), closed.end());
  NightModels nm;
  nm.nir = lbp::train_nir(all);
  std::vector<double> errs;
  for (bool state : {false, true})
    for (const auto& c : eye_crops(state, static_cast<int>(o.calib_per_class), eo, rng))
      errs.push_back(pca::recon_error(nm.nir.eigen, lbp::crop_descriptor(c, nm.nir.lbp, nm.nir.block, nm.nir.normalize)));
  nm.nir.tau = pca::percentile(errs, 0.99) * 1.1;
  svm::TrainSet ts;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto d = lbp::crop_descriptor(all[i], nm.nir.lbp, nm.nir.block, nm.nir.normalize);
    ts.add(pca::project(nm.nir.eigen, d), i < open.size() ? 1 : -1);
  }
  svm::TrainConfig cfg;
  cfg.C = o.C;
  nm.svm = svm::train(ts, o.kernel, cfg);
  return nm;
}

/// Stand-in for eigen-space weight vectors of open (+1) and closed (-1) eyes:
/// spread decays with the component index like PCA eigenvalues, the classes
/// sit apart along the first component, and the class boundary bends with the
/// second one.
inline svm::TrainSet weight_clusters(int n_open, int n_closed, int dim, Rng& rng) {
  if (dim < 2) throw InvalidArgument("weight clusters need at least 2 dimensions");
  svm::TrainSet ts;
  for (int i = 0; i < n_open + n_closed; ++i) {
    const int y = i < n_open ? 1 : -1;
    std::vector<double> w(static_cast<std::size_t>(dim));
    for (int k = 0; k < dim; ++k) w[static_cast<std::size_t>(k)] = rng.normal(0.0, 3.0 / std::sqrt(k + 1.0));
    w[0] = 0.5 * w[0] + y * (6.0 + 0.25 * (w[1] * w[1] - 9.0 / 2.0));
    ts.add(std::move(w), y);
  }
  return ts;
}

// ---------------------------------------------------------------------------
// Frame sequences.

struct SequenceOptions {
  int frames = 60;
  int width = 640;
  int height = 480;
  Style style = Style::day;
  double face_size = 130.0;
  double noise = 5.0;
  std::function<bool(int)> closed = [](int i) { return i % 10 < 3; };
  std::function<bool(int)> face_present = [](int) { return true; };
  std::function<double(int)> tilt = [](int) { return 0.0; };
};

struct FrameTruth {
  std::optional<Face> face;
};

/// Frame i of a sequence: a face drifting slowly around the centre, eye state
/// from the schedule. Frame content depends only on (seed, i).
inline GrayImage sequence_frame(const SequenceOptions& o, std::uint64_t seed, int i, FrameTruth* truth = nullptr) {
  Rng rng(seed * 1000003ull + static_cast<std::uint64_t>(i));
  std::vector<Face> faces;
  if (o.face_present(i)) {
    Face f;
    f.size = o.face_size + 8.0 * std::sin(i / 13.0);
    f.cx = o.width / 2.0 + 0.12 * o.width * std::sin(2.0 * std::numbers::pi * i / 80.0);
    f.cy = o.height / 2.0 + 0.06 * o.height * std::sin(2.0 * std::numbers::pi * i / 57.0);
    f.angle = o.tilt(i);
    f.closed = o.closed(i);
    f.skin = 170.0;
    faces.push_back(f);
  }
  if (truth) truth->face = faces.empty() ? std::nullopt : std::optional<Face>(faces.front());
  Rng bg(seed);  // shared background layout
  SceneOptions so;
  so.style = o.style;
  so.noise = 0.0;
  so.supersample = 2;
  std::vector<double> buf(static_cast<std::size_t>(o.width) * o.height);
  detail::fill_background(buf, o.width, o.height, so, bg);
  for (const auto& f : faces) detail::draw_face(buf, o.width, o.height, f, so.supersample);
  GrayImage img(o.width, o.height);
  auto px = img.pixels();
  std::normal_distribution<double> noise(0.0, 1.0);
  const double sigma = style_noise(o.style, o.noise);
  for (std::size_t k = 0; k < buf.size(); ++k) {
    double v = buf[k];
    if (o.style == Style::night) v = night_map(v);
    v += sigma * noise(rng.engine());
    px[k] = to_pixel(v);
  }
  return img;
}

/// Writes frames as frame_00000.pgm, frame_00001.pgm, ...
inline void write_sequence(const std::filesystem::path& dir, const SequenceOptions& o, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  for (int i = 0; i < o.frames; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%05d.pgm", i);
    write_pgm(dir / name, sequence_frame(o, seed, i));
  }
}

/// Independent 640x480 frames with one face of 110..150 px at a random place
/// (none in roughly one frame out of ten); the scale-factor benchmark corpus.
inline std::vector<GrayImage> bench_corpus(int frames, std::uint64_t seed, std::vector<FrameTruth>* truth = nullptr) {
  std::vector<GrayImage> out;
  for (int i = 0; i < frames; ++i) {
    Rng rng(seed * 7919ull + static_cast<std::uint64_t>(i));
    std::vector<Face> faces;
    if (!rng.chance(0.1)) {
      Face f;
      f.size = rng.uniform(110.0, 150.0);
      f.cx = rng.uniform(f.size, 640.0 - f.size);
      f.cy = rng.uniform(f.size / 2 + 10, 480.0 - f.size / 2 - 10);
      f.closed = rng.chance(0.3);
      f.skin = rng.uniform(145.0, 195.0);
      faces.push_back(f);
    }
    if (truth) truth->push_back({faces.empty() ? std::nullopt : std::optional<Face>(faces.front())});
    SceneOptions so;
    so.supersample = 2;
    out.push_back(render_scene(640, 480, faces, so, rng));
  }
  return out;
}

/// Bright square on a dark noisy field: the minimal face stand-in for toy cascades.
inline GrayImage square_scene(int w, int h, const std::vector<Rect>& squares, Rng& rng, double noise = 4.0) {
  GrayImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double v = 50.0;
      for (const auto& s : squares)
        if (x >= s.x && x < s.right() && y >= s.y && y < s.bottom()) v = 200.0;
      img.at(x, y) = to_pixel(v + rng.normal(0.0, noise));
    }
  return img;
}

}  // namespace drowsy::synth
