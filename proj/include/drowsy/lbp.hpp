#pragma once

// Local binary patterns, block-LBP histogram descriptors, and the NIR eye
// localizer that searches a block-aligned grid of precomputed histograms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "drowsy/eigen_space.hpp"
#include "drowsy/error.hpp"
#include "drowsy/imaging.hpp"
#include "drowsy/textio.hpp"

namespace drowsy::lbp {

struct LbpParams {
  int points = 8;
  double radius = 1.0;
  bool interpolate = false;  // bilinear for off-grid neighbours; otherwise nearest pixel

  int margin() const { return static_cast<int>(std::ceil(radius - 1e-9)); }

  void validate() const {
    if (points < 4 || points > 31) throw InvalidArgument("LBP needs 4..31 neighbours");
    if (!(radius > 0.0)) throw InvalidArgument("LBP radius must be positive");
  }
};

struct Neighbour {
  double dx = 0.0;
  double dy = 0.0;
  int bit = 0;
};

/// Circular neighbour set: sample n sits at (-R sin(2 pi n / P), R cos(2 pi n / P)).
/// Bits start at the upper-left neighbour and run clockwise, so for P = 8, R = 1
/// the weights are 1 2 4 / 128 . 8 / 64 32 16.
inline std::vector<Neighbour> neighbours(const LbpParams& p) {
  p.validate();
  const int start = (3 * p.points) / 8;
  std::vector<Neighbour> out(static_cast<std::size_t>(p.points));
  for (int n = 0; n < p.points; ++n) {
    const double ang = 2.0 * std::numbers::pi * n / p.points;
    double dx = -p.radius * std::sin(ang);
    double dy = p.radius * std::cos(ang);
    if (std::abs(dx - std::round(dx)) < 1e-9) dx = std::round(dx);
    if (std::abs(dy - std::round(dy)) < 1e-9) dy = std::round(dy);
    if (!p.interpolate) {
      dx = std::round(dx);
      dy = std::round(dy);
    }
    out[static_cast<std::size_t>(n)] = {dx, dy, ((n - start) % p.points + p.points) % p.points};
  }
  return out;
}

namespace detail {

/// Neighbour minus centre. Off-grid neighbours interpolate the differences, so
/// adding a constant to every pixel leaves the result untouched.
inline double neighbour_delta(const GrayImage& img, int x, int y, const Neighbour& nb) {
  const int c = img.at(x, y);
  const double fx = x + nb.dx;
  const double fy = y + nb.dy;
  const int x0 = static_cast<int>(std::floor(fx));
  const int y0 = static_cast<int>(std::floor(fy));
  const double ax = fx - x0;
  const double ay = fy - y0;
  if (ax == 0.0 && ay == 0.0) return img.at(x0, y0) - c;
  const int x1 = ax == 0.0 ? x0 : x0 + 1;
  const int y1 = ay == 0.0 ? y0 : y0 + 1;
  const double d00 = img.at(x0, y0) - c;
  const double d10 = img.at(x1, y0) - c;
  const double d01 = img.at(x0, y1) - c;
  const double d11 = img.at(x1, y1) - c;
  return (d00 * (1 - ax) + d10 * ax) * (1 - ay) + (d01 * (1 - ax) + d11 * ax) * ay;
}

inline std::uint32_t code_at(const GrayImage& img, int x, int y, const std::vector<Neighbour>& nbs) {
  std::uint32_t code = 0;
  for (const auto& nb : nbs)
    if (neighbour_delta(img, x, y, nb) >= 0.0) code |= 1u << nb.bit;
  return code;
}

}  // namespace detail

/// P-bit pattern at (x, y): bit set when the neighbour is >= the centre.
inline std::uint32_t lbp_code(const GrayImage& img, int x, int y, const LbpParams& p = {}) {
  const int m = p.margin();
  if (x < m || y < m || x + m >= img.width() || y + m >= img.height())
    throw BoundsError("LBP centre (" + std::to_string(x) + "," + std::to_string(y) + ") closer than " +
                      std::to_string(m) + " px to the border");
  return detail::code_at(img, x, y, neighbours(p));
}

/// Codes of the interior pixels; output pixel (x, y) is the code at input (x + m, y + m).
struct LbpImage {
  int width = 0;
  int height = 0;
  int points = 8;
  std::vector<std::uint32_t> codes;

  std::uint32_t at(int x, int y) const { return codes[static_cast<std::size_t>(y) * width + x]; }
  friend bool operator==(const LbpImage&, const LbpImage&) = default;
};

inline LbpImage lbp_image(const GrayImage& img, const LbpParams& p = {}) {
  const int m = p.margin();
  if (img.width() <= 2 * m || img.height() <= 2 * m)
    throw InvalidArgument("image too small for LBP radius " + std::to_string(p.radius));
  const auto nbs = neighbours(p);
  LbpImage out;
  out.width = img.width() - 2 * m;
  out.height = img.height() - 2 * m;
  out.points = p.points;
  out.codes.resize(static_cast<std::size_t>(out.width) * out.height);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      out.codes[static_cast<std::size_t>(y) * out.width + x] = detail::code_at(img, x + m, y + m, nbs);
  return out;
}

/// Codes for every pixel of `img`, neighbours past the border replicated from the edge.
inline LbpImage lbp_image_same(const GrayImage& img, const LbpParams& p = {}) {
  return lbp_image(pad_replicate(img, p.margin()), p);
}

struct BlockSpec {
  int block_w = 5;
  int block_h = 4;
  int bins = 16;
};

/// Per-block code histograms over a grid of non-overlapping blocks.
struct BlockGrid {
  int cols = 0;
  int rows = 0;
  BlockSpec spec;
  std::vector<std::uint32_t> counts;  // (row * cols + col) * bins + bin

  const std::uint32_t* block(int col, int row) const {
    return counts.data() + (static_cast<std::size_t>(row) * cols + col) * static_cast<std::size_t>(spec.bins);
  }
};

/// Partitions the code image into block_w x block_h blocks (excess cropped) and
/// bins each code as code / (2^P / bins).
inline BlockGrid block_histograms(const LbpImage& li, const BlockSpec& spec = {}) {
  if (spec.block_w < 1 || spec.block_h < 1) throw InvalidArgument("block size must be positive");
  const std::uint32_t levels = 1u << li.points;
  if (spec.bins < 1 || levels % static_cast<std::uint32_t>(spec.bins) != 0)
    throw InvalidArgument("bin count must divide 2^P");
  const std::uint32_t per_bin = levels / static_cast<std::uint32_t>(spec.bins);
  BlockGrid g;
  g.spec = spec;
  g.cols = li.width / spec.block_w;
  g.rows = li.height / spec.block_h;
  g.counts.assign(static_cast<std::size_t>(g.cols) * g.rows * spec.bins, 0);
  for (int by = 0; by < g.rows; ++by)
    for (int bx = 0; bx < g.cols; ++bx) {
      std::uint32_t* h = g.counts.data() + (static_cast<std::size_t>(by) * g.cols + bx) * spec.bins;
      for (int y = by * spec.block_h; y < (by + 1) * spec.block_h; ++y)
        for (int x = bx * spec.block_w; x < (bx + 1) * spec.block_w; ++x) ++h[li.at(x, y) / per_bin];
    }
  return g;
}

inline constexpr int kWindowWidth = 50;
inline constexpr int kWindowHeight = 40;

/// Records which grid blocks a descriptor read.
struct BlockAccessLog {
  std::vector<std::pair<int, int>> reads;  // (col, row)
};

/// Concatenated histograms of the blocks covering the window whose top-left
/// code pixel is (x, y): blocks row-major, bins contiguous per block.
inline std::vector<double> window_descriptor(const BlockGrid& g, int x, int y, bool normalize = false,
                                             int window_w = kWindowWidth, int window_h = kWindowHeight,
                                             BlockAccessLog* log = nullptr) {
  const BlockSpec& s = g.spec;
  if (x % s.block_w != 0 || y % s.block_h != 0)
    throw InvalidArgument("window origin (" + std::to_string(x) + "," + std::to_string(y) +
                          ") is not aligned to the block grid");
  if (window_w % s.block_w != 0 || window_h % s.block_h != 0)
    throw InvalidArgument("window size must be a multiple of the block size");
  const int c0 = x / s.block_w;
  const int r0 = y / s.block_h;
  const int nc = window_w / s.block_w;
  const int nr = window_h / s.block_h;
  if (x < 0 || y < 0 || c0 + nc > g.cols || r0 + nr > g.rows) throw BoundsError("window outside the block grid");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(nc) * nr * s.bins);
  const double area = static_cast<double>(s.block_w) * s.block_h;
  for (int r = r0; r < r0 + nr; ++r)
    for (int c = c0; c < c0 + nc; ++c) {
      if (log) log->reads.emplace_back(c, r);
      const std::uint32_t* h = g.block(c, r);
      for (int b = 0; b < s.bins; ++b) out.push_back(normalize ? h[b] / area : static_cast<double>(h[b]));
    }
  return out;
}

/// Descriptor of a single window-sized crop (edges replicated for the border codes).
inline std::vector<double> crop_descriptor(const GrayImage& crop, const LbpParams& p = {}, const BlockSpec& spec = {},
                                           bool normalize = false) {
  const BlockGrid g = block_histograms(lbp_image_same(crop, p), spec);
  return window_descriptor(g, 0, 0, normalize, crop.width(), crop.height());
}

struct NirEyeModel {
  pca::EigenModel eigen;
  double tau = 0.0;
  int stride_x = 5;
  int stride_y = 4;
  BlockSpec block;
  LbpParams lbp;
  bool normalize = false;
};

struct NirTrainOptions {
  std::size_t components = 40;
  double tau_percentile = 0.99;
  double tau_factor = 1.1;
  std::optional<double> tau;  // overrides the calibration
  LbpParams lbp;
  BlockSpec block;
  bool normalize = false;
};

/// Descriptor of every crop, PCA on the descriptors, threshold from the training
/// reconstruction errors.
inline NirEyeModel train_nir(const std::vector<GrayImage>& crops, const NirTrainOptions& opts = {}) {
  if (crops.size() < opts.components + 1)
    throw TrainingError("NIR eye model with K = " + std::to_string(opts.components) + " needs at least " +
                        std::to_string(opts.components + 1) + " crops, got " + std::to_string(crops.size()));
  pca::SampleMatrix x;
  for (std::size_t i = 0; i < crops.size(); ++i) {
    if (crops[i].width() != kWindowWidth || crops[i].height() != kWindowHeight)
      throw InvalidArgument("NIR training crop " + std::to_string(i) + " is not 50x40");
    x.add(crop_descriptor(crops[i], opts.lbp, opts.block, opts.normalize));
  }
  NirEyeModel m;
  m.eigen = pca::pca_train(x, opts.components);
  m.block = opts.block;
  m.lbp = opts.lbp;
  m.normalize = opts.normalize;
  m.stride_x = opts.block.block_w;
  m.stride_y = opts.block.block_h;
  if (opts.tau) {
    m.tau = *opts.tau;
  } else {
    std::vector<double> errs;
    for (std::size_t i = 0; i < x.rows(); ++i) errs.push_back(pca::recon_error(m.eigen, x.row(i)));
    m.tau = pca::percentile(errs, opts.tau_percentile) * opts.tau_factor;
  }
  return m;
}

/// Number of window positions a w x h ROI offers at the given strides.
inline long long window_positions(int roi_w, int roi_h, int stride_x, int stride_y, int win_w = kWindowWidth,
                                  int win_h = kWindowHeight) {
  if (roi_w < win_w || roi_h < win_h) return 0;
  return static_cast<long long>((roi_w - win_w) / stride_x + 1) * ((roi_h - win_h) / stride_y + 1);
}

struct NirHit {
  Rect rect;
  double error = 0.0;
  std::vector<double> weights;  // subspace weights of the winning window
};

struct NirSearchStats {
  std::size_t windows = 0;
  std::size_t lbp_passes = 0;
  std::size_t histogram_passes = 0;
};

/// One LBP pass and one histogram pass over the ROI, then a block-aligned
/// window search for the minimum reconstruction error; accepted under tau.
inline std::optional<NirHit> detect_eye_nir(const NirEyeModel& m, const GrayImage& roi,
                                            NirSearchStats* stats = nullptr) {
  if (m.stride_x % m.block.block_w != 0 || m.stride_y % m.block.block_h != 0)
    throw InvalidArgument("NIR strides must be multiples of the block size");
  if (roi.width() < kWindowWidth || roi.height() < kWindowHeight) return std::nullopt;
  const LbpImage codes = lbp_image_same(roi, m.lbp);
  const BlockGrid grid = block_histograms(codes, m.block);
  if (stats) {
    ++stats->lbp_passes;
    ++stats->histogram_passes;
  }
  std::optional<NirHit> best;
  const int max_x = grid.cols * m.block.block_w - kWindowWidth;
  const int max_y = grid.rows * m.block.block_h - kWindowHeight;
  for (int y = 0; y <= max_y; y += m.stride_y)
    for (int x = 0; x <= max_x; x += m.stride_x) {
      if (stats) ++stats->windows;
      const auto d = window_descriptor(grid, x, y, m.normalize);
      const double e = pca::recon_error(m.eigen, d);
      if (!best || e < best->error) best = NirHit{{x, y, kWindowWidth, kWindowHeight}, e, {}};
    }
  if (!best || !(best->error < m.tau)) return std::nullopt;
  best->weights = pca::project(m.eigen, window_descriptor(grid, best->rect.x, best->rect.y, m.normalize));
  return best;
}

// LBPEIGEN v1
// LBP <P> <R> <interpolate 0|1>
// NORMALIZE <0|1>
// <EIGEN v1 payload>
// THRESHOLD <tau>
// STRIDE <x> <y>
// BLOCK <w> <h> <bins>

inline void write_nir_model(std::ostream& out, const NirEyeModel& m) {
  out << "LBPEIGEN v1\n";
  out << "LBP " << m.lbp.points << ' ' << textio::format_double(m.lbp.radius) << ' ' << (m.lbp.interpolate ? 1 : 0)
      << '\n';
  out << "NORMALIZE " << (m.normalize ? 1 : 0) << '\n';
  pca::write_eigen_model(out, m.eigen);
  out << "THRESHOLD " << textio::format_double(m.tau) << '\n';
  out << "STRIDE " << m.stride_x << ' ' << m.stride_y << '\n';
  out << "BLOCK " << m.block.block_w << ' ' << m.block.block_h << ' ' << m.block.bins << '\n';
}

inline NirEyeModel read_nir_model(std::istream& in, const std::string& source = "nir model") {
  textio::LineReader rd(in, source);
  auto head = rd.expect("LBPEIGEN", 1);
  if (head[1] != "v1") rd.fail("unsupported LBPEIGEN version '" + head[1] + "'");
  NirEyeModel m;
  auto l = rd.expect("LBP", 3);
  m.lbp.points = static_cast<int>(rd.integer(l[1]));
  m.lbp.radius = rd.num(l[2]);
  m.lbp.interpolate = rd.integer(l[3]) != 0;
  auto nz = rd.expect("NORMALIZE", 1);
  m.normalize = rd.integer(nz[1]) != 0;
  m.eigen = pca::read_eigen_model(rd);
  m.tau = rd.num(rd.expect("THRESHOLD", 1)[1]);
  auto st = rd.expect("STRIDE", 2);
  m.stride_x = static_cast<int>(rd.integer(st[1]));
  m.stride_y = static_cast<int>(rd.integer(st[2]));
  auto bl = rd.expect("BLOCK", 3);
  m.block = {static_cast<int>(rd.integer(bl[1])), static_cast<int>(rd.integer(bl[2])),
             static_cast<int>(rd.integer(bl[3]))};
  try {
    m.lbp.validate();
  } catch (const InvalidArgument& e) {
    rd.fail(e.what());
  }
  if (m.stride_x < 1 || m.stride_y < 1 || m.block.block_w < 1 || m.block.block_h < 1 || m.block.bins < 1)
    rd.fail("stride and block values must be positive");
  const auto expected = static_cast<std::size_t>((kWindowWidth / m.block.block_w) *
                                                 (kWindowHeight / m.block.block_h) * m.block.bins);
  if (m.eigen.dim() != expected) rd.fail("descriptor dimension does not match the block layout");
  return m;
}

inline void save_nir_model(const std::filesystem::path& path, const NirEyeModel& m) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  write_nir_model(out, m);
  if (!out) throw FormatError("write failed for " + path.string());
}

inline NirEyeModel load_nir_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_nir_model(in, path.string());
}

}  // namespace drowsy::lbp
