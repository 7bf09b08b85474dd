#pragma once

// Raster types and the pixel-level primitives shared by every detector.
// Coordinates: x grows rightward, y grows downward, origin at the top-left.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "drowsy/error.hpp"

namespace drowsy {

struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  constexpr int right() const { return x + w; }
  constexpr int bottom() const { return y + h; }
  constexpr long long area() const { return static_cast<long long>(w) * h; }
  constexpr bool fits(int width, int height) const {
    return w >= 1 && h >= 1 && x >= 0 && y >= 0 && x + w <= width && y + h <= height;
  }
  constexpr bool contains(const Rect& o) const {
    return o.x >= x && o.y >= y && o.right() <= right() && o.bottom() <= bottom();
  }
  friend constexpr bool operator==(const Rect&, const Rect&) = default;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline long long intersection_area(const Rect& a, const Rect& b) {
  const int x0 = std::max(a.x, b.x);
  const int y0 = std::max(a.y, b.y);
  const int x1 = std::min(a.right(), b.right());
  const int y1 = std::min(a.bottom(), b.bottom());
  if (x1 <= x0 || y1 <= y0) return 0;
  return static_cast<long long>(x1 - x0) * (y1 - y0);
}

/// Intersection over union; 0 for disjoint or empty rectangles.
inline double iou(const Rect& a, const Rect& b) {
  const long long inter = intersection_area(a, b);
  const long long uni = a.area() + b.area() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

/// Intersects `r` with the [0,width)x[0,height) frame. May return an empty rect.
inline Rect clamp_rect(const Rect& r, int width, int height) {
  const int x0 = std::clamp(r.x, 0, width);
  const int y0 = std::clamp(r.y, 0, height);
  const int x1 = std::clamp(r.right(), 0, width);
  const int y1 = std::clamp(r.bottom(), 0, height);
  return {x0, y0, std::max(0, x1 - x0), std::max(0, y1 - y0)};
}

inline Point center_of(const Rect& r) { return {r.x + r.w / 2.0, r.y + r.h / 2.0}; }

/// 8-bit grayscale raster, row-major.
class GrayImage {
 public:
  GrayImage() = default;

  GrayImage(int width, int height, std::uint8_t fill = 0) : width_(width), height_(height) {
    check_dims(width, height);
    pixels_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  GrayImage(int width, int height, std::vector<std::uint8_t> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    check_dims(width, height);
    if (pixels_.size() != static_cast<std::size_t>(width) * height)
      throw InvalidArgument("pixel buffer length does not match " + std::to_string(width) + "x" +
                            std::to_string(height));
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }
  std::size_t size() const { return pixels_.size(); }

  std::uint8_t at(int x, int y) const { return pixels_[index(x, y)]; }
  std::uint8_t& at(int x, int y) { return pixels_[index(x, y)]; }

  std::span<const std::uint8_t> row(int y) const {
    return {pixels_.data() + static_cast<std::size_t>(y) * width_, static_cast<std::size_t>(width_)};
  }
  std::span<std::uint8_t> row(int y) {
    return {pixels_.data() + static_cast<std::size_t>(y) * width_, static_cast<std::size_t>(width_)};
  }

  std::span<const std::uint8_t> pixels() const { return pixels_; }
  std::span<std::uint8_t> pixels() { return pixels_; }

  Rect bounds() const { return {0, 0, width_, height_}; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  static void check_dims(int width, int height) {
    if (width < 1 || height < 1)
      throw InvalidArgument("image dimensions must be positive, got " + std::to_string(width) + "x" +
                            std::to_string(height));
  }
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

inline constexpr int kMaxIntegralSide = 4096;

namespace detail {

template <typename T>
class SummedArea {
 public:
  SummedArea() = default;
  SummedArea(int img_width, int img_height)
      : width_(img_width + 1),
        height_(img_height + 1),
        sums_(static_cast<std::size_t>(width_) * height_, 0) {}

  /// Table dimensions, one larger than the source image on each axis.
  int width() const { return width_; }
  int height() const { return height_; }
  int image_width() const { return width_ - 1; }
  int image_height() const { return height_ - 1; }

  T at(int x, int y) const { return sums_[static_cast<std::size_t>(y) * width_ + x]; }
  T& at(int x, int y) { return sums_[static_cast<std::size_t>(y) * width_ + x]; }
  const T* data() const { return sums_.data(); }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> sums_;
};

inline void check_integral_limits(const GrayImage& img) {
  if (img.width() > kMaxIntegralSide || img.height() > kMaxIntegralSide)
    throw InvalidArgument("integral image limited to " + std::to_string(kMaxIntegralSide) + "x" +
                          std::to_string(kMaxIntegralSide) + " pixels");
}

}  // namespace detail

/// Summed-area table with a zero first row and column. 32-bit cells hold
/// 255 * 4096 * 4096 without overflow.
using IntegralImage = detail::SummedArea<std::uint32_t>;
/// Summed squares; feeds window standard deviations for variance normalization.
using SquaredIntegralImage = detail::SummedArea<std::uint64_t>;

inline IntegralImage integral(const GrayImage& img) {
  detail::check_integral_limits(img);
  IntegralImage ii(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    std::uint32_t run = 0;
    const auto src = img.row(y);
    for (int x = 0; x < img.width(); ++x) {
      run += src[x];
      ii.at(x + 1, y + 1) = run + ii.at(x + 1, y);
    }
  }
  return ii;
}

inline SquaredIntegralImage squared_integral(const GrayImage& img) {
  detail::check_integral_limits(img);
  SquaredIntegralImage sq(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    std::uint64_t run = 0;
    const auto src = img.row(y);
    for (int x = 0; x < img.width(); ++x) {
      run += static_cast<std::uint64_t>(src[x]) * src[x];
      sq.at(x + 1, y + 1) = run + sq.at(x + 1, y);
    }
  }
  return sq;
}

template <typename T>
inline void check_rect(const detail::SummedArea<T>& table, const Rect& r) {
  if (!r.fits(table.image_width(), table.image_height()))
    throw BoundsError("rect (" + std::to_string(r.x) + "," + std::to_string(r.y) + "," +
                      std::to_string(r.w) + "," + std::to_string(r.h) + ") outside " +
                      std::to_string(table.image_width()) + "x" + std::to_string(table.image_height()));
}

/// Pixel sum inside `r` from four corner lookups: P1 + P4 - P2 - P3.
template <typename T>
inline T rect_sum(const detail::SummedArea<T>& table, const Rect& r) {
  check_rect(table, r);
  const T p1 = table.at(r.x, r.y);
  const T p2 = table.at(r.right(), r.y);
  const T p3 = table.at(r.x, r.bottom());
  const T p4 = table.at(r.right(), r.bottom());
  return p1 + p4 - p2 - p3;
}

/// Block-mean downsampling by an integer factor, rounding half up.
inline GrayImage downsample(const GrayImage& img, int sf) {
  if (sf < 1) throw InvalidArgument("scale factor must be >= 1");
  const int w = img.width() / sf;
  const int h = img.height() / sf;
  if (w < 1 || h < 1)
    throw InvalidArgument("scale factor " + std::to_string(sf) + " leaves an empty image");
  if (sf == 1) return img;
  GrayImage out(w, h);
  const unsigned area = static_cast<unsigned>(sf) * sf;
  std::vector<unsigned> acc(static_cast<std::size_t>(w));
  for (int oy = 0; oy < h; ++oy) {
    std::fill(acc.begin(), acc.end(), 0u);
    for (int dy = 0; dy < sf; ++dy) {
      const auto src = img.row(oy * sf + dy);
      const std::uint8_t* p = src.data();
      for (int ox = 0; ox < w; ++ox) {
        unsigned s = 0;
        for (int dx = 0; dx < sf; ++dx) s += *p++;
        acc[ox] += s;
      }
    }
    auto dst = out.row(oy);
    for (int ox = 0; ox < w; ++ox) dst[ox] = static_cast<std::uint8_t>((acc[ox] + area / 2) / area);
  }
  return out;
}

/// Scales a rect found on a downsampled image back to full resolution.
inline Rect remap_rect(const Rect& r, int sf) { return {r.x * sf, r.y * sf, r.w * sf, r.h * sf}; }

/// y = A x + b on 2-D points.
struct AffineMap {
  std::array<double, 4> a{1.0, 0.0, 0.0, 1.0};  // row-major 2x2
  std::array<double, 2> b{0.0, 0.0};

  Point apply(Point p) const {
    return {a[0] * p.x + a[1] * p.y + b[0], a[2] * p.x + a[3] * p.y + b[1]};
  }

  double determinant() const { return a[0] * a[3] - a[1] * a[2]; }

  AffineMap inverse() const {
    const double det = determinant();
    if (std::abs(det) < 1e-300) throw InvalidArgument("affine map is singular");
    AffineMap inv;
    inv.a = {a[3] / det, -a[1] / det, -a[2] / det, a[0] / det};
    inv.b = {-(inv.a[0] * b[0] + inv.a[1] * b[1]), -(inv.a[2] * b[0] + inv.a[3] * b[1])};
    return inv;
  }

  /// (this ∘ other)(p) == this->apply(other.apply(p))
  AffineMap compose(const AffineMap& other) const {
    AffineMap m;
    m.a = {a[0] * other.a[0] + a[1] * other.a[2], a[0] * other.a[1] + a[1] * other.a[3],
           a[2] * other.a[0] + a[3] * other.a[2], a[2] * other.a[1] + a[3] * other.a[3]};
    m.b = {a[0] * other.b[0] + a[1] * other.b[1] + b[0], a[2] * other.b[0] + a[3] * other.b[1] + b[1]};
    return m;
  }

  /// Rotation by theta about `center`: [cos -sin; sin cos] in image coordinates.
  /// With y pointing down, positive theta turns content clockwise on screen.
  static AffineMap rotation(double theta, Point center) {
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    AffineMap m;
    m.a = {c, -s, s, c};
    m.b = {center.x - (c * center.x - s * center.y), center.y - (s * center.x + c * center.y)};
    return m;
  }
};

inline Point image_center(const GrayImage& img) {
  return {(img.width() - 1) / 2.0, (img.height() - 1) / 2.0};
}

/// Bilinear sample at a real-valued position; `fill` outside [0,w-1]x[0,h-1].
inline double sample_bilinear(const GrayImage& img, double x, double y, double fill = 0.0) {
  constexpr double kSnap = 1e-9;
  if (x < -kSnap || y < -kSnap || x > img.width() - 1 + kSnap || y > img.height() - 1 + kSnap) return fill;
  x = std::clamp(x, 0.0, static_cast<double>(img.width() - 1));
  y = std::clamp(y, 0.0, static_cast<double>(img.height() - 1));
  const int x0 = static_cast<int>(x);
  const int y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = img.at(x0, y0) * (1.0 - fx) + img.at(x1, y0) * fx;
  const double bot = img.at(x0, y1) * (1.0 - fx) + img.at(x1, y1) * fx;
  return top * (1.0 - fy) + bot * fy;
}

inline std::uint8_t to_pixel(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

/// Same-size output whose pixel q takes the source value at map^-1(q).
inline GrayImage warp_affine(const GrayImage& img, const AffineMap& map) {
  const AffineMap inv = map.inverse();
  GrayImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    auto dst = out.row(y);
    for (int x = 0; x < img.width(); ++x) {
      const Point src = inv.apply({static_cast<double>(x), static_cast<double>(y)});
      dst[x] = to_pixel(sample_bilinear(img, src.x, src.y, 0.0));
    }
  }
  return out;
}

/// Rotates the image content by theta about `center`; bilinear, zero fill.
inline GrayImage rotate(const GrayImage& img, double theta, Point center) {
  if (!std::isfinite(theta)) throw InvalidArgument("rotation angle must be finite");
  if (theta == 0.0) return img;
  return warp_affine(img, AffineMap::rotation(theta, center));
}

inline GrayImage rotate(const GrayImage& img, double theta) { return rotate(img, theta, image_center(img)); }

/// Cumulative-histogram equalization onto 0..255. Constant images are returned unchanged.
inline GrayImage hist_equalize(const GrayImage& img) {
  std::array<std::size_t, 256> hist{};
  for (auto v : img.pixels()) ++hist[v];
  std::array<std::size_t, 256> cdf{};
  std::size_t run = 0;
  for (int i = 0; i < 256; ++i) {
    run += hist[i];
    cdf[i] = run;
  }
  const std::size_t total = img.size();
  std::size_t cdf_min = 0;
  for (int i = 0; i < 256; ++i) {
    if (hist[i] != 0) {
      cdf_min = cdf[i];
      break;
    }
  }
  if (total == cdf_min) return img;
  std::array<std::uint8_t, 256> lut{};
  const double denom = static_cast<double>(total - cdf_min);
  for (int i = 0; i < 256; ++i) {
    const double c = cdf[i] >= cdf_min ? static_cast<double>(cdf[i] - cdf_min) : 0.0;
    lut[i] = to_pixel(c / denom * 255.0);
  }
  GrayImage out = img;
  for (auto& v : out.pixels()) v = lut[v];
  return out;
}

/// Bilinear resampling to exactly w x h, pixel-center aligned, edge clamped.
inline GrayImage resize(const GrayImage& img, int w, int h) {
  if (w < 1 || h < 1) throw InvalidArgument("resize target must be at least 1x1");
  if (w == img.width() && h == img.height()) return img;
  GrayImage out(w, h);
  const double sx = static_cast<double>(img.width()) / w;
  const double sy = static_cast<double>(img.height()) / h;
  const double max_x = img.width() - 1;
  const double max_y = img.height() - 1;
  for (int y = 0; y < h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, max_y);
    auto dst = out.row(y);
    for (int x = 0; x < w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, max_x);
      dst[x] = to_pixel(sample_bilinear(img, fx, fy));
    }
  }
  return out;
}

inline GrayImage crop(const GrayImage& img, const Rect& r) {
  if (!r.fits(img.width(), img.height()))
    throw BoundsError("crop rect outside " + std::to_string(img.width()) + "x" + std::to_string(img.height()));
  GrayImage out(r.w, r.h);
  for (int y = 0; y < r.h; ++y) {
    const auto src = img.row(r.y + y).subspan(static_cast<std::size_t>(r.x), static_cast<std::size_t>(r.w));
    std::copy(src.begin(), src.end(), out.row(y).begin());
  }
  return out;
}

/// Pads every side by `r` pixels, replicating the nearest edge pixel.
inline GrayImage pad_replicate(const GrayImage& img, int r) {
  if (r < 0) throw InvalidArgument("padding must be non-negative");
  GrayImage out(img.width() + 2 * r, img.height() + 2 * r);
  for (int y = 0; y < out.height(); ++y) {
    const int sy = std::clamp(y - r, 0, img.height() - 1);
    for (int x = 0; x < out.width(); ++x) out.at(x, y) = img.at(std::clamp(x - r, 0, img.width() - 1), sy);
  }
  return out;
}

/// Copies `patch` into `dst` with its top-left at (x, y); must fit.
inline void paste(GrayImage& dst, const GrayImage& patch, int x, int y) {
  if (!Rect{x, y, patch.width(), patch.height()}.fits(dst.width(), dst.height()))
    throw BoundsError("paste target outside destination image");
  for (int row = 0; row < patch.height(); ++row) {
    const auto src = patch.row(row);
    std::copy(src.begin(), src.end(), dst.row(y + row).begin() + x);
  }
}

/// Pixel mean and population standard deviation over the whole image.
inline std::pair<double, double> mean_stddev(const GrayImage& img) {
  double s = 0.0;
  double s2 = 0.0;
  for (auto v : img.pixels()) {
    s += v;
    s2 += static_cast<double>(v) * v;
  }
  const double n = static_cast<double>(img.size());
  const double mean = s / n;
  return {mean, std::sqrt(std::max(0.0, s2 / n - mean * mean))};
}

}  // namespace drowsy
