#pragma once

// PCA subspaces trained through the small P x P Gram matrix, reconstruction
// error, nearest-subspace eye-state classification, and the sliding-window
// eigen-eye detector.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drowsy/error.hpp"
#include "drowsy/imaging.hpp"
#include "drowsy/textio.hpp"

namespace drowsy::pca {

/// P samples of dimension D, one per row.
class SampleMatrix {
 public:
  SampleMatrix() = default;
  explicit SampleMatrix(std::size_t dim) : dim_(dim) {}

  std::size_t rows() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  std::size_t dim() const { return dim_; }

  void add(std::span<const double> v) {
    if (dim_ == 0) dim_ = v.size();
    if (v.size() != dim_ || dim_ == 0) throw InvalidArgument("sample length does not match matrix width");
    data_.insert(data_.end(), v.begin(), v.end());
  }

  std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

/// Row-major pixels as doubles.
inline std::vector<double> vectorize(const GrayImage& img) {
  const auto px = img.pixels();
  return {px.begin(), px.end()};
}

struct EigenModel {
  std::vector<double> mean;     // D
  std::vector<double> eigvecs;  // K x D, rows orthonormal
  std::vector<double> eigvals;  // K, descending, covariance (1/P) scaling

  std::size_t dim() const { return mean.size(); }
  std::size_t components() const { return eigvals.size(); }
  std::span<const double> eigvec(std::size_t k) const { return {eigvecs.data() + k * dim(), dim()}; }
};

struct SymmetricEigen {
  std::vector<double> values;   // descending
  std::vector<double> vectors;  // n x n, column j pairs with values[j]
  int sweeps = 0;
};

/// Cyclic Jacobi rotations on a symmetric n x n row-major matrix until the
/// off-diagonal Frobenius norm drops below tol times the full norm.
inline SymmetricEigen jacobi_eigen(std::vector<double> a, std::size_t n, double tol = 1e-10, int max_sweeps = 100) {
  if (a.size() != n * n) throw InvalidArgument("matrix size mismatch");
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  auto at = [&](std::size_t r, std::size_t c) -> double& { return a[r * n + c]; };

  double total = 0.0;
  for (double x : a) total += x * x;
  const double limit = tol * tol * total;

  SymmetricEigen out;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += 2.0 * at(p, q) * at(p, q);
    if (off <= limit) break;
    ++out.sweeps;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = at(p, q);
        if (apq == 0.0) continue;
        const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = at(k, p);
          const double akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = at(p, k);
          const double aqk = at(q, k);
          at(p, k) = c * apk - s * aqk;
          at(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k * n + p];
          const double vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return at(i, i) > at(j, j); });
  out.values.resize(n);
  out.vectors.resize(n * n);
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = at(idx[j], idx[j]);
    for (std::size_t k = 0; k < n; ++k) out.vectors[k * n + j] = v[k * n + idx[j]];
  }
  return out;
}

/// Flips `v` so its largest-magnitude entry is positive.
inline void canonical_sign(std::span<double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  if (v[best] < 0.0)
    for (auto& x : v) x = -x;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Relative eigenvalue floor under which a component counts as missing.
inline constexpr double kRankTolerance = 1e-9;

/// PCA via the small Gram matrix: mean, centred columns A, eigenvectors v of
/// A^T A, eigen-eyes u = A v / |A v|, keep the K largest.
inline EigenModel pca_train(const SampleMatrix& x, std::size_t k) {
  const std::size_t p = x.rows();
  const std::size_t d = x.dim();
  if (p < 2) throw TrainingError("PCA needs at least 2 samples");
  if (k < 1 || k > p - 1)
    throw InvalidArgument("K = " + std::to_string(k) + " must lie in [1, P-1] with P = " + std::to_string(p));

  EigenModel m;
  m.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < p; ++i) {
    const auto r = x.row(i);
    for (std::size_t j = 0; j < d; ++j) m.mean[j] += r[j];
  }
  for (auto& v : m.mean) v /= static_cast<double>(p);

  std::vector<double> centred(p * d);
  for (std::size_t i = 0; i < p; ++i) {
    const auto r = x.row(i);
    for (std::size_t j = 0; j < d; ++j) centred[i * d + j] = r[j] - m.mean[j];
  }
  std::vector<double> gram(p * p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i; j < p; ++j) {
      const double g = dot({centred.data() + i * d, d}, {centred.data() + j * d, d});
      gram[i * p + j] = g;
      gram[j * p + i] = g;
    }
  const SymmetricEigen eig = jacobi_eigen(std::move(gram), p);
  const double top = eig.values.empty() ? 0.0 : eig.values.front();
  if (!(top > 0.0)) throw TrainingError("training samples have zero variance");
  if (!(eig.values[k - 1] > kRankTolerance * top))
    throw TrainingError("training samples span fewer than " + std::to_string(k) +
                        " independent directions (duplicate or degenerate samples)");

  m.eigvecs.assign(k * d, 0.0);
  m.eigvals.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    std::span<double> u(m.eigvecs.data() + c * d, d);
    for (std::size_t i = 0; i < p; ++i) {
      const double w = eig.vectors[i * p + c];
      const double* row = centred.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) u[j] += w * row[j];
    }
    const double norm = std::sqrt(dot(u, u));
    for (auto& v : u) v /= norm;
    canonical_sign(u);
    m.eigvals[c] = eig.values[c] / static_cast<double>(p);
  }
  return m;
}

inline void check_dim(const EigenModel& m, std::size_t n) {
  if (n != m.dim())
    throw InvalidArgument("vector length " + std::to_string(n) + " does not match model dimension " +
                          std::to_string(m.dim()));
}

/// Subspace weights w_k = u_k . (v - mean).
inline std::vector<double> project(const EigenModel& m, std::span<const double> v) {
  check_dim(m, v.size());
  std::vector<double> centred(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) centred[j] = v[j] - m.mean[j];
  std::vector<double> w(m.components());
  for (std::size_t c = 0; c < w.size(); ++c) w[c] = dot(m.eigvec(c), centred);
  return w;
}

/// mean + sum_k w_k u_k
inline std::vector<double> reconstruct(const EigenModel& m, std::span<const double> weights) {
  if (weights.size() != m.components()) throw InvalidArgument("weight count does not match model components");
  std::vector<double> out = m.mean;
  for (std::size_t c = 0; c < weights.size(); ++c) {
    const auto u = m.eigvec(c);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += weights[c] * u[j];
  }
  return out;
}

/// |(v - mean) - projection of (v - mean) onto the subspace|
inline double recon_error(const EigenModel& m, std::span<const double> v) {
  check_dim(m, v.size());
  const std::size_t d = v.size();
  std::vector<double> r(d);
  for (std::size_t j = 0; j < d; ++j) r[j] = v[j] - m.mean[j];
  for (std::size_t c = 0; c < m.components(); ++c) {
    const auto u = m.eigvec(c);
    const double w = dot(u, r);
    for (std::size_t j = 0; j < d; ++j) r[j] -= w * u[j];
  }
  return std::sqrt(dot(r, r));
}

/// Value at quantile q (nearest rank) of `values`.
inline double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidArgument("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
  return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

enum class Label { open, closed, reject };

inline const char* label_name(Label l) {
  switch (l) {
    case Label::open: return "open";
    case Label::closed: return "closed";
    case Label::reject: return "reject";
  }
  return "?";
}

struct ClassModels {
  EigenModel open;
  EigenModel closed;
  double tau_open = 0.0;
  double tau_closed = 0.0;
};

struct ClassifyResult {
  Label label = Label::reject;
  double error_open = 0.0;
  double error_closed = 0.0;
};

/// Nearest subspace by reconstruction error, accepted only under that class's
/// threshold. Equal errors resolve to closed.
inline ClassifyResult classify_detailed(const ClassModels& cm, std::span<const double> v) {
  ClassifyResult r;
  r.error_open = recon_error(cm.open, v);
  r.error_closed = recon_error(cm.closed, v);
  if (r.error_closed <= r.error_open)
    r.label = r.error_closed < cm.tau_closed ? Label::closed : Label::reject;
  else
    r.label = r.error_open < cm.tau_open ? Label::open : Label::reject;
  return r;
}

inline Label classify(const ClassModels& cm, std::span<const double> v) { return classify_detailed(cm, v).label; }

inline constexpr int kEyeWindowWidth = 50;
inline constexpr int kEyeWindowHeight = 40;

struct PcaDetectOptions {
  int stride_x = 2;
  int stride_y = 2;
  double min_variance = 1.0;  // flatter windows are skipped
};

struct EyeHit {
  Rect rect;
  Label state = Label::reject;
  double error = 0.0;
};

struct EyeSearchStats {
  std::size_t windows = 0;
  std::size_t skipped_flat = 0;
};

/// Slides 50x40 windows over an (already equalized) eye ROI and keeps the one
/// with the smallest per-class reconstruction error; reported only when that
/// error is under the winning class's threshold.
inline std::optional<EyeHit> detect_eye_pca(const ClassModels& cm, const GrayImage& roi,
                                            const PcaDetectOptions& opts = {}, EyeSearchStats* stats = nullptr) {
  const int ww = kEyeWindowWidth;
  const int wh = kEyeWindowHeight;
  if (cm.open.dim() != static_cast<std::size_t>(ww * wh) || cm.closed.dim() != static_cast<std::size_t>(ww * wh))
    throw InvalidArgument("eye models must be trained on 50x40 crops");
  if (roi.width() < ww || roi.height() < wh) return std::nullopt;
  std::optional<EyeHit> best;
  std::vector<double> v(static_cast<std::size_t>(ww * wh));
  for (int y = 0; y + wh <= roi.height(); y += opts.stride_y) {
    for (int x = 0; x + ww <= roi.width(); x += opts.stride_x) {
      if (stats) ++stats->windows;
      double s = 0.0, s2 = 0.0;
      for (int r = 0; r < wh; ++r) {
        const auto src = roi.row(y + r);
        for (int c = 0; c < ww; ++c) {
          const double px = src[x + c];
          v[static_cast<std::size_t>(r * ww + c)] = px;
          s += px;
          s2 += px * px;
        }
      }
      const double n = ww * wh;
      if (s2 / n - (s / n) * (s / n) < opts.min_variance) {
        if (stats) ++stats->skipped_flat;
        continue;
      }
      const ClassifyResult cr = classify_detailed(cm, v);
      const bool closed = cr.error_closed <= cr.error_open;
      const double err = closed ? cr.error_closed : cr.error_open;
      if (!best || err < best->error) best = EyeHit{{x, y, ww, wh}, closed ? Label::closed : Label::open, err};
    }
  }
  if (!best) return std::nullopt;
  const double tau = best->state == Label::closed ? cm.tau_closed : cm.tau_open;
  if (!(best->error < tau)) return std::nullopt;
  return best;
}

// EIGEN v1 <D> <K>
// <D reals: mean>
// <K lines of D reals: eigenvectors>
// <K reals: eigenvalues>

inline void write_eigen_model(std::ostream& out, const EigenModel& m) {
  out << "EIGEN v1 " << m.dim() << ' ' << m.components() << '\n';
  textio::write_reals(out, m.mean.data(), m.dim());
  for (std::size_t c = 0; c < m.components(); ++c) textio::write_reals(out, m.eigvecs.data() + c * m.dim(), m.dim());
  textio::write_reals(out, m.eigvals.data(), m.components());
}

inline EigenModel read_eigen_model(textio::LineReader& rd) {
  auto head = rd.expect("EIGEN", 3);
  if (head[1] != "v1") rd.fail("unsupported EIGEN version '" + head[1] + "'");
  const auto d = rd.integer(head[2]);
  const auto k = rd.integer(head[3]);
  if (d < 1 || k < 1) rd.fail("EIGEN dimensions must be positive");
  EigenModel m;
  m.mean = rd.reals(static_cast<std::size_t>(d));
  m.eigvecs.reserve(static_cast<std::size_t>(d * k));
  for (long long c = 0; c < k; ++c) {
    auto row = rd.reals(static_cast<std::size_t>(d));
    m.eigvecs.insert(m.eigvecs.end(), row.begin(), row.end());
  }
  m.eigvals = rd.reals(static_cast<std::size_t>(k));
  return m;
}

// Day eye models: the open block then the closed block, each an EIGEN v1
// payload followed by `THRESHOLD <open|closed> <tau>`.

inline void write_class_models(std::ostream& out, const ClassModels& cm) {
  write_eigen_model(out, cm.open);
  out << "THRESHOLD open " << textio::format_double(cm.tau_open) << '\n';
  write_eigen_model(out, cm.closed);
  out << "THRESHOLD closed " << textio::format_double(cm.tau_closed) << '\n';
}

inline ClassModels read_class_models(std::istream& in, const std::string& source = "eigen model") {
  textio::LineReader rd(in, source);
  ClassModels cm;
  cm.open = read_eigen_model(rd);
  auto t1 = rd.expect("THRESHOLD", 2);
  if (t1[1] != "open") rd.fail("first block must be the open-eye model");
  cm.tau_open = rd.num(t1[2]);
  cm.closed = read_eigen_model(rd);
  auto t2 = rd.expect("THRESHOLD", 2);
  if (t2[1] != "closed") rd.fail("second block must be the closed-eye model");
  cm.tau_closed = rd.num(t2[2]);
  if (cm.open.dim() != cm.closed.dim()) rd.fail("open and closed models differ in dimension");
  return cm;
}

inline void save_class_models(const std::filesystem::path& path, const ClassModels& cm) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  write_class_models(out, cm);
  if (!out) throw FormatError("write failed for " + path.string());
}

inline ClassModels load_class_models(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_class_models(in, path.string());
}

}  // namespace drowsy::pca
