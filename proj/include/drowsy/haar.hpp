#pragma once

// Haar-like features, boosted cascades, and multi-scale face/eye detection:
// the plain sliding-window search, the downsample-and-remap fast path, eye ROI
// geometry, and tilted-face search over rotated copies of the frame.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "drowsy/error.hpp"
#include "drowsy/imaging.hpp"

namespace drowsy::haar {

enum class FeatureKind { two_horizontal, two_vertical, three_horizontal, three_vertical, four, custom };

struct WeightedRect {
  Rect rect;
  double weight = 0.0;
  friend bool operator==(const WeightedRect&, const WeightedRect&) = default;
};

/// Weighted rectangle sums inside a base window. Standard kinds have zero total
/// weighted area, so they respond with 0 on constant patches.
struct HaarFeature {
  std::vector<WeightedRect> rects;
  FeatureKind kind = FeatureKind::custom;

  friend bool operator==(const HaarFeature&, const HaarFeature&) = default;

  double weighted_area() const {
    double s = 0.0;
    for (const auto& r : rects) s += r.weight * static_cast<double>(r.rect.area());
    return s;
  }

  /// Left half +1, right half -1. Total size (2w) x h.
  static HaarFeature two_horizontal(int x, int y, int w, int h) {
    return {{{{x, y, w, h}, 1.0}, {{x + w, y, w, h}, -1.0}}, FeatureKind::two_horizontal};
  }
  /// Top half +1, bottom half -1. Total size w x (2h).
  static HaarFeature two_vertical(int x, int y, int w, int h) {
    return {{{{x, y, w, h}, 1.0}, {{x, y + h, w, h}, -1.0}}, FeatureKind::two_vertical};
  }
  /// Outer thirds +1, centre -2. Total size (3w) x h.
  static HaarFeature three_horizontal(int x, int y, int w, int h) {
    return {{{{x, y, w, h}, 1.0}, {{x + w, y, w, h}, -2.0}, {{x + 2 * w, y, w, h}, 1.0}},
            FeatureKind::three_horizontal};
  }
  static HaarFeature three_vertical(int x, int y, int w, int h) {
    return {{{{x, y, w, h}, 1.0}, {{x, y + h, w, h}, -2.0}, {{x, y + 2 * h, w, h}, 1.0}},
            FeatureKind::three_vertical};
  }
  /// Diagonal quadrants +1, off-diagonal -1. Total size (2w) x (2h).
  static HaarFeature four(int x, int y, int w, int h) {
    return {{{{x, y, w, h}, 1.0}, {{x + w, y, w, h}, -1.0}, {{x, y + h, w, h}, -1.0}, {{x + w, y + h, w, h}, 1.0}},
            FeatureKind::four};
  }
};

/// Recovers the kind tag from the rect layout; `custom` when it matches none.
inline FeatureKind infer_kind(const std::vector<WeightedRect>& rects) {
  if (rects.empty()) return FeatureKind::custom;
  const Rect& a = rects[0].rect;
  auto same = [](const HaarFeature& f, const std::vector<WeightedRect>& r) { return f.rects == r; };
  if (rects.size() == 2) {
    if (same(HaarFeature::two_horizontal(a.x, a.y, a.w, a.h), rects)) return FeatureKind::two_horizontal;
    if (same(HaarFeature::two_vertical(a.x, a.y, a.w, a.h), rects)) return FeatureKind::two_vertical;
  } else if (rects.size() == 3) {
    if (same(HaarFeature::three_horizontal(a.x, a.y, a.w, a.h), rects)) return FeatureKind::three_horizontal;
    if (same(HaarFeature::three_vertical(a.x, a.y, a.w, a.h), rects)) return FeatureKind::three_vertical;
  } else if (rects.size() == 4) {
    if (same(HaarFeature::four(a.x, a.y, a.w, a.h), rects)) return FeatureKind::four;
  }
  return FeatureKind::custom;
}

/// Weak learner: votes `vote` when polarity * value < polarity * threshold.
struct Stump {
  HaarFeature feature;
  double threshold = 0.0;
  int polarity = 1;
  double vote = 1.0;

  bool fires(double value) const { return polarity * value < polarity * threshold; }
};

struct Stage {
  std::vector<Stump> stumps;
  double threshold = 0.0;
};

struct Cascade {
  int base_width = 0;
  int base_height = 0;
  std::vector<Stage> stages;
  bool variance_normalize = false;

  std::size_t stump_count() const {
    std::size_t n = 0;
    for (const auto& s : stages) n += s.stumps.size();
    return n;
  }

  void validate() const {
    if (base_width < 8 || base_height < 8) throw InvalidArgument("cascade base window must be at least 8x8");
    if (stages.empty()) throw InvalidArgument("cascade has no stages");
    for (const auto& st : stages) {
      if (st.stumps.empty()) throw InvalidArgument("cascade stage has no stumps");
      for (const auto& s : st.stumps) {
        if (!(s.vote > 0.0)) throw InvalidArgument("stump vote weight must be positive");
        if (s.polarity != 1 && s.polarity != -1) throw InvalidArgument("stump polarity must be +1 or -1");
        if (s.feature.rects.empty()) throw InvalidArgument("feature has no rectangles");
        for (const auto& r : s.feature.rects)
          if (!r.rect.fits(base_width, base_height)) throw InvalidArgument("feature rect outside base window");
      }
    }
  }
};

inline std::vector<double> default_tilt_angles() {
  constexpr double deg = std::numbers::pi / 180.0;
  std::vector<double> out;
  for (double a : {20.0, 40.0, 60.0, 70.0}) {
    out.push_back(a * deg);
    out.push_back(-a * deg);
  }
  return out;
}

struct DetectParams {
  double scale_step = 1.2;
  int min_window = 0;     // smallest window side scanned, full-resolution pixels
  int window_stride = 2;  // at base scale; grows with the window
  int min_neighbors = 3;
  int sf = 1;
  std::vector<double> tilt_angles = default_tilt_angles();

  void validate() const {
    if (!(scale_step > 1.0)) throw InvalidArgument("scale_step must be > 1");
    if (window_stride < 1) throw InvalidArgument("window_stride must be >= 1");
    if (min_neighbors < 0) throw InvalidArgument("min_neighbors must be >= 0");
    if (sf < 1) throw InvalidArgument("sf must be >= 1");
    if (min_window < 0) throw InvalidArgument("min_window must be >= 0");
  }
};

struct Detection {
  Rect rect;  // full resolution, de-rotated, inside the frame
  double score = 0.0;  // raw hits merged into this detection
  double tilt = 0.0;   // rotation (radians) applied to the frame to make the face upright
  Point pivot;         // rotation centre for `tilt`, full-resolution coordinates
  Rect rotated_rect;   // the face box inside the frame rotated by `tilt`; equals rect when upright
};

/// Counters filled by the detectors when requested.
struct DetectStats {
  std::size_t windows = 0;
  std::size_t stages = 0;
  std::size_t stumps = 0;
  std::size_t branches = 0;  // rotation branches tried by detect_tilted

  DetectStats& operator+=(const DetectStats& o) {
    windows += o.windows;
    stages += o.stages;
    stumps += o.stumps;
    branches += o.branches;
    return *this;
  }
};

/// Integral tables for one image; the squared table only when variance normalization needs it.
class ScanImage {
 public:
  ScanImage(const GrayImage& img, bool with_squares)
      : ii_(integral(img)), sq_(with_squares ? std::optional(squared_integral(img)) : std::nullopt) {}

  const IntegralImage& ii() const { return ii_; }
  const SquaredIntegralImage* sq() const { return sq_ ? &*sq_ : nullptr; }
  int width() const { return ii_.image_width(); }
  int height() const { return ii_.image_height(); }

 private:
  IntegralImage ii_;
  std::optional<SquaredIntegralImage> sq_;
};

/// Population standard deviation of the pixels under `window`, floored at 1.
inline double window_stddev(const IntegralImage& ii, const SquaredIntegralImage& sq, const Rect& window) {
  const double n = static_cast<double>(window.area());
  const double s = static_cast<double>(rect_sum(ii, window));
  const double s2 = static_cast<double>(rect_sum(sq, window));
  const double var = s2 / n - (s / n) * (s / n);
  return std::max(1.0, std::sqrt(std::max(0.0, var)));
}

namespace detail {

struct ScaledRect {
  int x = 0, y = 0, w = 0, h = 0;
  double weight = 0.0;
};

/// Rects of a base-window feature resized to a window of w x h pixels. The first
/// weight is re-solved so zero-sum features stay zero-sum after rounding.
inline std::vector<ScaledRect> scale_feature(const HaarFeature& f, int base_w, int base_h, int win_w, int win_h) {
  const double sx = static_cast<double>(win_w) / base_w;
  const double sy = static_cast<double>(win_h) / base_h;
  std::vector<ScaledRect> out;
  out.reserve(f.rects.size());
  for (const auto& wr : f.rects) {
    ScaledRect s;
    s.x = static_cast<int>(std::lround(wr.rect.x * sx));
    s.y = static_cast<int>(std::lround(wr.rect.y * sy));
    s.w = std::max(1, static_cast<int>(std::lround(wr.rect.w * sx)));
    s.h = std::max(1, static_cast<int>(std::lround(wr.rect.h * sy)));
    s.x = std::min(s.x, win_w - 1);
    s.y = std::min(s.y, win_h - 1);
    s.w = std::min(s.w, win_w - s.x);
    s.h = std::min(s.h, win_h - s.y);
    s.weight = wr.weight;
    out.push_back(s);
  }
  if (out.size() >= 2 && f.weighted_area() == 0.0 && (win_w != base_w || win_h != base_h)) {
    double rest = 0.0;
    for (std::size_t i = 1; i < out.size(); ++i) rest += out[i].weight * out[i].w * out[i].h;
    out[0].weight = -rest / (static_cast<double>(out[0].w) * out[0].h);
  }
  return out;
}

/// A scaled rect as four corner offsets into an integral table of fixed row width.
struct RectTaps {
  std::ptrdiff_t p1 = 0, p2 = 0, p3 = 0, p4 = 0;
  double weight = 0.0;
};

struct ScaledStump {
  std::array<RectTaps, 4> taps{};
  int n = 0;
  double threshold = 0.0;
  int polarity = 1;
  double vote = 0.0;
};

struct ScaledStage {
  std::vector<ScaledStump> stumps;
  double threshold = 0.0;
};

inline std::vector<RectTaps> to_taps(const std::vector<ScaledRect>& rects, int table_width) {
  std::vector<RectTaps> out;
  for (const auto& r : rects) {
    RectTaps t;
    t.p1 = static_cast<std::ptrdiff_t>(r.y) * table_width + r.x;
    t.p2 = static_cast<std::ptrdiff_t>(r.y) * table_width + r.x + r.w;
    t.p3 = static_cast<std::ptrdiff_t>(r.y + r.h) * table_width + r.x;
    t.p4 = static_cast<std::ptrdiff_t>(r.y + r.h) * table_width + r.x + r.w;
    t.weight = r.weight;
    out.push_back(t);
  }
  return out;
}

inline double tap_sum(const std::uint32_t* origin, const RectTaps& t) {
  const std::uint32_t s = origin[t.p1] + origin[t.p4] - origin[t.p2] - origin[t.p3];
  return t.weight * static_cast<double>(s);
}

}  // namespace detail

/// Raw feature response: sum of weight x rect_sum with the feature's rects scaled
/// from the base window to `window`.
inline double eval_feature(const IntegralImage& ii, const HaarFeature& f, const Rect& window, int base_w, int base_h) {
  check_rect(ii, window);
  const auto rects = detail::scale_feature(f, base_w, base_h, window.w, window.h);
  double v = 0.0;
  for (const auto& r : rects)
    v += r.weight * static_cast<double>(rect_sum(ii, Rect{window.x + r.x, window.y + r.y, r.w, r.h}));
  return v;
}

/// As above, divided by the window's pixel standard deviation (floored at 1).
inline double eval_feature(const ScanImage& scan, const HaarFeature& f, const Rect& window, int base_w, int base_h,
                           bool variance_normalize) {
  double v = eval_feature(scan.ii(), f, window, base_w, base_h);
  if (variance_normalize) {
    if (!scan.sq()) throw InvalidArgument("variance normalization needs a squared integral image");
    v /= window_stddev(scan.ii(), *scan.sq(), window);
  }
  return v;
}

struct CascadeResult {
  bool passed = false;
  double score = 0.0;  // vote sum minus threshold of the last stage evaluated
  int stages_evaluated = 0;
  int stumps_evaluated = 0;
};

/// A cascade specialised to one window size and integral-table width.
class ScaledCascade {
 public:
  ScaledCascade(const Cascade& c, int win_w, int win_h, int table_width)
      : win_w_(win_w), win_h_(win_h), normalize_(c.variance_normalize) {
    area_ratio_ = (static_cast<double>(win_w) * win_h) / (static_cast<double>(c.base_width) * c.base_height);
    stages_.reserve(c.stages.size());
    for (const auto& st : c.stages) {
      detail::ScaledStage ss;
      ss.threshold = st.threshold;
      for (const auto& s : st.stumps) {
        detail::ScaledStump q;
        const auto taps = detail::to_taps(
            detail::scale_feature(s.feature, c.base_width, c.base_height, win_w, win_h), table_width);
        if (taps.size() > q.taps.size()) throw InvalidArgument("features are limited to 4 rectangles");
        std::copy(taps.begin(), taps.end(), q.taps.begin());
        q.n = static_cast<int>(taps.size());
        q.threshold = s.threshold;
        q.polarity = s.polarity;
        q.vote = s.vote;
        ss.stumps.push_back(q);
      }
      stages_.push_back(std::move(ss));
    }
  }

  int window_width() const { return win_w_; }
  int window_height() const { return win_h_; }

  /// Evaluates stages in order with early exit; (x, y) is the window's top-left.
  CascadeResult evaluate(const ScanImage& scan, int x, int y) const {
    const IntegralImage& ii = scan.ii();
    const std::uint32_t* origin = ii.data() + static_cast<std::ptrdiff_t>(y) * ii.width() + x;
    double inv_norm = 1.0 / area_ratio_;
    if (normalize_) inv_norm /= window_stddev(ii, *scan.sq(), Rect{x, y, win_w_, win_h_});
    CascadeResult res;
    for (const auto& st : stages_) {
      double votes = 0.0;
      for (const auto& s : st.stumps) {
        double v = 0.0;
        for (int i = 0; i < s.n; ++i) v += detail::tap_sum(origin, s.taps[i]);
        v *= inv_norm;
        if (s.polarity * v < s.polarity * s.threshold) votes += s.vote;
      }
      res.stumps_evaluated += static_cast<int>(st.stumps.size());
      ++res.stages_evaluated;
      res.score = votes - st.threshold;
      if (votes < st.threshold) {
        res.passed = false;
        return res;
      }
    }
    res.passed = true;
    return res;
  }

 private:
  int win_w_;
  int win_h_;
  bool normalize_;
  double area_ratio_ = 1.0;
  std::vector<detail::ScaledStage> stages_;
};

/// Single-window cascade evaluation. Stump values are scale-normalised by the
/// window/base area ratio (and by the window std-dev when the cascade asks for it).
inline CascadeResult eval_cascade(const Cascade& c, const ScanImage& scan, const Rect& window) {
  check_rect(scan.ii(), window);
  if (c.variance_normalize && !scan.sq())
    throw InvalidArgument("cascade needs variance normalization but no squared integral was built");
  ScaledCascade sc(c, window.w, window.h, scan.ii().width());
  return sc.evaluate(scan, window.x, window.y);
}

namespace detail {

struct RawHit {
  Rect rect;
  double margin = 0.0;
};

inline int find_root(std::vector<int>& parent, int i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

}  // namespace detail

inline constexpr double kGroupIou = 0.4;

/// Union-find over raw hits linked by IoU >= 0.4; groups smaller than
/// `min_neighbors` are dropped and the rest reported as their mean rect.
inline std::vector<Detection> group_hits(const std::vector<Rect>& hits, int min_neighbors) {
  const int n = static_cast<int>(hits.size());
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (iou(hits[i], hits[j]) >= kGroupIou) {
        const int a = detail::find_root(parent, i);
        const int b = detail::find_root(parent, j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
    }
  }
  struct Acc {
    double x = 0, y = 0, w = 0, h = 0;
    int count = 0;
    int first = 0;
  };
  std::vector<int> slot(n, -1);
  std::vector<Acc> groups;
  for (int i = 0; i < n; ++i) {
    const int root = detail::find_root(parent, i);
    if (slot[root] < 0) {
      slot[root] = static_cast<int>(groups.size());
      groups.push_back({});
      groups.back().first = i;
    }
    Acc& g = groups[slot[root]];
    g.x += hits[i].x;
    g.y += hits[i].y;
    g.w += hits[i].w;
    g.h += hits[i].h;
    ++g.count;
  }
  std::vector<Detection> out;
  for (const auto& g : groups) {
    if (g.count < std::max(1, min_neighbors)) continue;
    Detection d;
    d.rect = {static_cast<int>(std::lround(g.x / g.count)), static_cast<int>(std::lround(g.y / g.count)),
              static_cast<int>(std::lround(g.w / g.count)), static_cast<int>(std::lround(g.h / g.count))};
    d.score = g.count;
    d.rotated_rect = d.rect;
    d.pivot = center_of(d.rect);
    out.push_back(d);
  }
  return out;
}

/// Window sizes visited by the multi-scale scan of a width x height image.
inline std::vector<std::pair<int, int>> scan_scales(const Cascade& c, int width, int height, const DetectParams& p) {
  std::vector<std::pair<int, int>> out;
  for (int k = 0;; ++k) {
    const double s = std::pow(p.scale_step, k);
    const int w = static_cast<int>(std::lround(c.base_width * s));
    const int h = static_cast<int>(std::lround(c.base_height * s));
    if (w > width || h > height) break;
    if (std::min(w, h) < p.min_window) continue;
    if (!out.empty() && out.back().first == w && out.back().second == h) continue;
    out.emplace_back(w, h);
  }
  return out;
}

/// Raw (ungrouped) window hits of a full multi-scale scan.
inline std::vector<Rect> scan_windows(const Cascade& c, const ScanImage& scan, const DetectParams& p,
                                      DetectStats* stats = nullptr) {
  std::vector<Rect> hits;
  const int W = scan.width();
  const int H = scan.height();
  for (auto [w, h] : scan_scales(c, W, H, p)) {
    const ScaledCascade sc(c, w, h, scan.ii().width());
    const double scale = static_cast<double>(w) / c.base_width;
    const int stride = std::max(1, static_cast<int>(std::lround(p.window_stride * scale)));
    for (int y = 0; y + h <= H; y += stride) {
      for (int x = 0; x + w <= W; x += stride) {
        const CascadeResult r = sc.evaluate(scan, x, y);
        if (stats) {
          ++stats->windows;
          stats->stages += static_cast<std::size_t>(r.stages_evaluated);
          stats->stumps += static_cast<std::size_t>(r.stumps_evaluated);
        }
        if (r.passed) hits.push_back({x, y, w, h});
      }
    }
  }
  return hits;
}

/// Multi-scale sliding-window detection on the image as given.
inline std::vector<Detection> detect(const Cascade& c, const GrayImage& img, const DetectParams& p,
                                     DetectStats* stats = nullptr) {
  p.validate();
  if (img.width() < c.base_width || img.height() < c.base_height) return {};
  const ScanImage scan(img, c.variance_normalize);
  return group_hits(scan_windows(c, scan, p, stats), p.min_neighbors);
}

namespace detail {

inline DetectParams downsampled_params(const DetectParams& p) {
  DetectParams q = p;
  q.min_window = (p.min_window + p.sf - 1) / p.sf;
  q.sf = 1;
  return q;
}

inline void require_scannable(const Cascade& c, const GrayImage& down, int sf) {
  if (down.width() < c.base_width || down.height() < c.base_height)
    throw InvalidArgument("scale factor " + std::to_string(sf) + " shrinks the image below the " +
                          std::to_string(c.base_width) + "x" + std::to_string(c.base_height) + " base window");
}

inline GrayImage downsample_checked(const GrayImage& img, int sf) {
  if (img.width() / sf < 1 || img.height() / sf < 1)
    throw InvalidArgument("scale factor " + std::to_string(sf) + " leaves an empty image");
  return downsample(img, sf);
}

}  // namespace detail

/// Detects on the image downsampled by p.sf and remaps results to full resolution.
inline std::vector<Detection> detect_fast(const Cascade& c, const GrayImage& img, const DetectParams& p,
                                          DetectStats* stats = nullptr) {
  p.validate();
  if (p.sf == 1) return detect(c, img, p, stats);
  const GrayImage down = detail::downsample_checked(img, p.sf);
  detail::require_scannable(c, down, p.sf);
  auto dets = detect(c, down, detail::downsampled_params(p), stats);
  for (auto& d : dets) {
    d.rect = remap_rect(d.rect, p.sf);
    d.rotated_rect = d.rect;
    d.pivot = center_of(d.rect);
  }
  return dets;
}

/// Picks the detection with the most merged hits; first one wins ties.
inline std::optional<Detection> strongest(const std::vector<Detection>& dets) {
  if (dets.empty()) return std::nullopt;
  return *std::max_element(dets.begin(), dets.end(),
                           [](const Detection& a, const Detection& b) { return a.score < b.score; });
}

inline constexpr int kEyeRoiWidth = 200;
inline constexpr int kEyeRoiHeight = 70;

/// Rows from h/5 below the face top to h/3 above the face bottom, clamped to the frame.
inline Rect eye_band(const Rect& face, int frame_w, int frame_h) {
  if (face.h < 2 || face.w < 1) throw InvalidArgument("face box too small for an eye band");
  const Rect band{face.x, face.y + face.h / 5, face.w, face.h - face.h / 5 - face.h / 3};
  const Rect clamped = clamp_rect(band, frame_w, frame_h);
  if (clamped.w < 1 || clamped.h < 1) throw InvalidArgument("eye band lies outside the frame");
  return clamped;
}

/// Eye search region of a face: the eye band resized to 200x70.
inline GrayImage select_eye_roi(const Rect& face, const GrayImage& frame) {
  const Rect band = eye_band(face, frame.width(), frame.height());
  return resize(crop(frame, band), kEyeRoiWidth, kEyeRoiHeight);
}

/// The eye ROI of a (possibly tilted) detection, sampled from the de-rotated frame.
inline GrayImage derotated_eye_roi(const Detection& d, const GrayImage& frame) {
  if (d.tilt == 0.0) return select_eye_roi(d.rect, frame);
  const Rect face = d.rotated_rect;
  if (face.h < 2 || face.w < 1) throw InvalidArgument("face box too small for an eye band");
  const Rect band{face.x, face.y + face.h / 5, face.w, face.h - face.h / 5 - face.h / 3};
  // Rotated-frame pixel q corresponds to original pixel R(-tilt)(q - pivot) + pivot.
  const AffineMap back = AffineMap::rotation(-d.tilt, d.pivot);
  GrayImage strip(band.w, band.h);
  for (int y = 0; y < band.h; ++y)
    for (int x = 0; x < band.w; ++x) {
      const Point src = back.apply({static_cast<double>(band.x + x), static_cast<double>(band.y + y)});
      strip.at(x, y) = to_pixel(sample_bilinear(frame, src.x, src.y, 0.0));
    }
  return resize(strip, kEyeRoiWidth, kEyeRoiHeight);
}

/// Upright fast-path detection, falling back to rotated copies of the
/// downsampled frame (angles in the order given) until one branch finds a face.
/// Boxes found on a branch are de-rotated into the original frame.
inline std::vector<Detection> detect_tilted(const Cascade& c, const GrayImage& img, const DetectParams& p,
                                            DetectStats* stats = nullptr) {
  p.validate();
  auto upright = detect_fast(c, img, p, stats);
  if (!upright.empty() || p.tilt_angles.empty()) return upright;

  const GrayImage down = p.sf == 1 ? img : detail::downsample_checked(img, p.sf);
  detail::require_scannable(c, down, p.sf);
  const DetectParams q = detail::downsampled_params(p);
  const Point pivot_down = image_center(down);
  const double sf = p.sf;
  for (double angle : p.tilt_angles) {
    if (stats) ++stats->branches;
    const GrayImage turned = rotate(down, angle, pivot_down);
    auto dets = detect(c, turned, q, stats);
    if (dets.empty()) continue;
    const AffineMap back = AffineMap::rotation(-angle, pivot_down);
    std::vector<Detection> out;
    for (const auto& d : dets) {
      const Point centre = back.apply({d.rect.x + (d.rect.w - 1) / 2.0, d.rect.y + (d.rect.h - 1) / 2.0});
      const int w = d.rect.w * p.sf;
      const int h = d.rect.h * p.sf;
      Detection o;
      o.score = d.score;
      o.tilt = angle;
      o.pivot = {pivot_down.x * sf, pivot_down.y * sf};
      o.rotated_rect = remap_rect(d.rect, p.sf);
      const Rect box{static_cast<int>(std::lround(centre.x * sf + (sf - 1) / 2.0 - (w - 1) / 2.0)),
                     static_cast<int>(std::lround(centre.y * sf + (sf - 1) / 2.0 - (h - 1) / 2.0)), w, h};
      o.rect = clamp_rect(box, img.width(), img.height());
      if (o.rect.w < 1 || o.rect.h < 1) continue;
      out.push_back(o);
    }
    if (!out.empty()) return out;
  }
  return {};
}

}  // namespace drowsy::haar
