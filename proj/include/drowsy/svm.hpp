#pragma once

// Binary soft-margin SVM trained by SMO with second-order working-set
// selection. Inputs are z-scored with training statistics before the kernel.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "drowsy/error.hpp"
#include "drowsy/textio.hpp"

namespace drowsy::svm {

enum class KernelType { linear, quadratic, polynomial, rbf };

struct Kernel {
  KernelType type = KernelType::linear;
  int degree = 3;
  double c0 = 1.0;
  double gamma = 1.0;

  static Kernel linear() { return {}; }
  static Kernel quadratic(double c0 = 1.0) { return {KernelType::quadratic, 2, c0, 1.0}; }
  static Kernel polynomial(int degree = 3, double c0 = 1.0) { return {KernelType::polynomial, degree, c0, 1.0}; }
  static Kernel rbf(double gamma) { return {KernelType::rbf, 3, 1.0, gamma}; }

  void validate() const {
    if (type == KernelType::polynomial && degree < 2) throw InvalidArgument("polynomial kernel needs degree >= 2");
    if (type == KernelType::rbf && !(gamma > 0.0)) throw InvalidArgument("rbf kernel needs gamma > 0");
  }

  friend bool operator==(const Kernel&, const Kernel&) = default;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double kernel_eval(const Kernel& k, std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw InvalidArgument("kernel inputs differ in dimension (" + std::to_string(x.size()) + " vs " +
                          std::to_string(y.size()) + ")");
  switch (k.type) {
    case KernelType::linear: return dot(x, y);
    case KernelType::quadratic: {
      const double t = dot(x, y) + k.c0;
      return t * t;
    }
    case KernelType::polynomial: return std::pow(dot(x, y) + k.c0, k.degree);
    case KernelType::rbf: {
      double d2 = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) d2 += (x[i] - y[i]) * (x[i] - y[i]);
      return std::exp(-k.gamma * d2);
    }
  }
  return 0.0;
}

/// Token used in model files: linear | quadratic:c0 | poly:d:c0 | rbf:gamma.
inline std::string kernel_spec(const Kernel& k) {
  using textio::format_double;
  switch (k.type) {
    case KernelType::linear: return "linear";
    case KernelType::quadratic: return "quadratic:" + format_double(k.c0);
    case KernelType::polynomial: return "poly:" + std::to_string(k.degree) + ":" + format_double(k.c0);
    case KernelType::rbf: return "rbf:" + format_double(k.gamma);
  }
  return "?";
}

inline Kernel parse_kernel_spec(const std::string& spec) {
  const auto parts = textio::split(spec, ':');
  Kernel k;
  if (parts.size() == 1 && parts[0] == "linear") {
    k = Kernel::linear();
  } else if (parts.size() <= 2 && parts[0] == "quadratic") {
    k = Kernel::quadratic(parts.size() == 2 ? textio::parse_double(parts[1]) : 1.0);
  } else if ((parts[0] == "poly" || parts[0] == "polynomial") && parts.size() <= 3) {
    k = Kernel::polynomial(parts.size() >= 2 ? static_cast<int>(textio::parse_int(parts[1])) : 3,
                           parts.size() == 3 ? textio::parse_double(parts[2]) : 1.0);
  } else if (parts.size() == 2 && parts[0] == "rbf") {
    k = Kernel::rbf(textio::parse_double(parts[1]));
  } else {
    throw InvalidArgument("unknown kernel '" + spec + "'");
  }
  k.validate();
  return k;
}

struct TrainSet {
  std::vector<std::vector<double>> xs;
  std::vector<int> ys;  // +1 / -1

  void add(std::vector<double> x, int y) {
    xs.push_back(std::move(x));
    ys.push_back(y);
  }
  std::size_t size() const { return xs.size(); }
};

struct TrainConfig {
  double C = 1.0;
  double tolerance = 1e-3;
  long long max_iterations = 10'000'000;
  bool standardize = true;
};

inline constexpr double kSupportAlpha = 1e-8;

struct SvmModel {
  Kernel kernel;
  double C = 1.0;
  double b = 0.0;
  std::size_t dim = 0;
  std::vector<double> alpha;
  std::vector<int> y;
  std::vector<std::vector<double>> sv;  // standardized coordinates
  std::vector<double> mean;             // per-dimension standardization
  std::vector<double> scale;

  std::size_t support_count() const { return alpha.size(); }

  std::vector<double> standardized(std::span<const double> x) const {
    if (x.size() != dim)
      throw InvalidArgument("SVM input has dimension " + std::to_string(x.size()) + ", model expects " +
                            std::to_string(dim));
    std::vector<double> z(dim);
    for (std::size_t i = 0; i < dim; ++i) z[i] = (x[i] - mean[i]) / scale[i];
    return z;
  }
};

/// f(x) = sum_i alpha_i y_i k(x, x_i) + b on the standardized input.
inline double decision(const SvmModel& m, std::span<const double> x) {
  const auto z = m.standardized(x);
  double f = m.b;
  for (std::size_t i = 0; i < m.alpha.size(); ++i) f += m.alpha[i] * m.y[i] * kernel_eval(m.kernel, z, m.sv[i]);
  return f;
}

/// Sign of the decision value; exactly zero maps to +1.
inline int classify(const SvmModel& m, std::span<const double> x) { return decision(m, x) >= 0.0 ? 1 : -1; }

enum class EyeState { open, closed };

inline const char* eye_state_name(EyeState s) { return s == EyeState::open ? "open" : "closed"; }

/// +1 is open, -1 is closed.
inline EyeState classify_eye_state(const SvmModel& m, std::span<const double> weights) {
  return classify(m, weights) > 0 ? EyeState::open : EyeState::closed;
}

struct LinearForm {
  std::vector<double> w;
  double b = 0.0;
};

/// For a linear kernel: w and b with f(x) == w.x + b in raw input coordinates.
inline LinearForm linear_weights(const SvmModel& m) {
  if (m.kernel.type != KernelType::linear) throw InvalidArgument("explicit weights exist only for the linear kernel");
  std::vector<double> ws(m.dim, 0.0);
  for (std::size_t i = 0; i < m.alpha.size(); ++i)
    for (std::size_t d = 0; d < m.dim; ++d) ws[d] += m.alpha[i] * m.y[i] * m.sv[i][d];
  LinearForm out{std::vector<double>(m.dim), m.b};
  for (std::size_t d = 0; d < m.dim; ++d) {
    out.w[d] = ws[d] / m.scale[d];
    out.b -= ws[d] * m.mean[d] / m.scale[d];
  }
  return out;
}

/// Thrown when SMO hits its iteration cap; carries the model reached so far.
class ConvergenceError : public TrainingError {
 public:
  ConvergenceError(const std::string& what, SvmModel best) : TrainingError(what), model_(std::move(best)) {}
  const SvmModel& model() const { return model_; }

 private:
  SvmModel model_;
};

struct TrainReport {
  long long iterations = 0;
  double final_gap = 0.0;  // max KKT gap between the up and low sets at exit
  std::size_t free_vectors = 0;
};

namespace detail {

inline void validate(const TrainSet& ts) {
  if (ts.xs.empty()) throw TrainingError("empty SVM training set");
  if (ts.xs.size() != ts.ys.size()) throw InvalidArgument("SVM labels and vectors differ in count");
  const std::size_t d = ts.xs.front().size();
  if (d == 0) throw InvalidArgument("SVM vectors must be non-empty");
  bool pos = false, neg = false;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts.xs[i].size() != d)
      throw InvalidArgument("SVM training vector " + std::to_string(i) + " has dimension " +
                            std::to_string(ts.xs[i].size()) + ", expected " + std::to_string(d));
    if (ts.ys[i] == 1) pos = true;
    else if (ts.ys[i] == -1) neg = true;
    else throw InvalidArgument("SVM labels must be +1 or -1");
  }
  if (!pos || !neg) throw TrainingError("SVM training needs both classes");
}

}  // namespace detail

/// Solves min 1/2 a'Qa - e'a, 0 <= a <= C, y'a = 0 with Q_ij = y_i y_j k(x_i, x_j).
/// Iterates until the maximal violating pair gap drops under cfg.tolerance.
inline SvmModel train(const TrainSet& ts, const Kernel& kernel, const TrainConfig& cfg = {},
                      TrainReport* report = nullptr) {
  kernel.validate();
  if (!(cfg.C > 0.0)) throw InvalidArgument("C must be positive");
  if (!(cfg.tolerance > 0.0)) throw InvalidArgument("tolerance must be positive");
  detail::validate(ts);
  const std::size_t n = ts.size();
  const std::size_t d = ts.xs.front().size();

  SvmModel m;
  m.kernel = kernel;
  m.C = cfg.C;
  m.dim = d;
  m.mean.assign(d, 0.0);
  m.scale.assign(d, 1.0);
  if (cfg.standardize) {
    for (const auto& x : ts.xs)
      for (std::size_t k = 0; k < d; ++k) m.mean[k] += x[k];
    for (auto& v : m.mean) v /= static_cast<double>(n);
    std::vector<double> var(d, 0.0);
    for (const auto& x : ts.xs)
      for (std::size_t k = 0; k < d; ++k) var[k] += (x[k] - m.mean[k]) * (x[k] - m.mean[k]);
    // z-scores shrunk by sqrt(d) so inputs have unit expected norm.
    const double root_d = std::sqrt(static_cast<double>(d));
    for (std::size_t k = 0; k < d; ++k) {
      const double s = std::sqrt(var[k] / static_cast<double>(n));
      m.scale[k] = (s > 0.0 ? s : 1.0) * root_d;
    }
  }
  std::vector<std::vector<double>> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = m.standardized(ts.xs[i]);

  std::vector<double> K(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) K[i * n + j] = K[j * n + i] = kernel_eval(kernel, z[i], z[j]);
  const auto& y = ts.ys;
  const double C = cfg.C;
  std::vector<double> alpha(n, 0.0);
  std::vector<double> G(n, -1.0);
  auto in_up = [&](std::size_t t) { return (y[t] == 1 && alpha[t] < C) || (y[t] == -1 && alpha[t] > 0.0); };
  auto in_low = [&](std::size_t t) { return (y[t] == 1 && alpha[t] > 0.0) || (y[t] == -1 && alpha[t] < C); };
  constexpr double kTau = 1e-12;

  auto finish = [&](SvmModel& out) {
    double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum = 0.0;
    std::size_t free = 0;
    for (std::size_t t = 0; t < n; ++t) {
      const double yg = y[t] * G[t];
      if (alpha[t] >= C) {
        if (y[t] == -1) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else if (alpha[t] <= 0.0) {
        if (y[t] == 1) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else {
        ++free;
        sum += yg;
      }
    }
    const double rho = free > 0 ? sum / static_cast<double>(free) : 0.5 * (ub + lb);
    out.b = -rho;
    out.alpha.clear();
    out.y.clear();
    out.sv.clear();
    for (std::size_t t = 0; t < n; ++t)
      if (alpha[t] > kSupportAlpha) {
        out.alpha.push_back(alpha[t]);
        out.y.push_back(y[t]);
        out.sv.push_back(z[t]);
      }
    if (report) report->free_vectors = free;
  };

  long long iter = 0;
  double gap = 0.0;
  for (;; ++iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    std::size_t i = n;
    for (std::size_t t = 0; t < n; ++t)
      if (in_up(t) && -y[t] * G[t] > gmax) {
        gmax = -y[t] * G[t];
        i = t;
      }
    double gmin = std::numeric_limits<double>::infinity();
    double best_obj = std::numeric_limits<double>::infinity();
    std::size_t j = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      const double v = -y[t] * G[t];
      gmin = std::min(gmin, v);
      if (i == n) continue;
      const double b = gmax - v;
      if (b <= 0.0) continue;
      double a = K[i * n + i] + K[t * n + t] - 2.0 * K[i * n + t];
      if (a <= 0.0) a = kTau;
      const double obj = -(b * b) / a;
      if (obj < best_obj) {
        best_obj = obj;
        j = t;
      }
    }
    gap = gmax - gmin;
    if (i == n || j == n || gap < cfg.tolerance) break;
    if (iter >= cfg.max_iterations) {
      SvmModel best = m;
      finish(best);
      throw ConvergenceError("SMO did not converge in " + std::to_string(cfg.max_iterations) +
                                 " iterations (gap " + textio::format_double(gap) + ")",
                             std::move(best));
    }

    const double Qii = K[i * n + i], Qjj = K[j * n + j];
    const double Qij = y[i] * y[j] * K[i * n + j];
    const double old_i = alpha[i], old_j = alpha[j];
    if (y[i] != y[j]) {
      double quad = Qii + Qjj + 2.0 * Qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = C - diff;
        }
      } else if (alpha[j] > C) {
        alpha[j] = C;
        alpha[i] = C + diff;
      }
    } else {
      double quad = Qii + Qjj - 2.0 * Qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (G[i] - G[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = sum - C;
        }
      } else if (alpha[j] < 0.0) {
        alpha[j] = 0.0;
        alpha[i] = sum;
      }
      if (sum > C) {
        if (alpha[j] > C) {
          alpha[j] = C;
          alpha[i] = sum - C;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = sum;
      }
    }
    const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
    for (std::size_t t = 0; t < n; ++t)
      G[t] += y[t] * (y[i] * K[i * n + t] * di + y[j] * K[j * n + t] * dj);
  }
  if (report) {
    report->iterations = iter;
    report->final_gap = gap;
  }
  finish(m);
  return m;
}

/// Largest violation of the soft-margin KKT conditions over a training set:
/// alpha = 0 needs y f >= 1, 0 < alpha < C needs y f == 1, alpha = C needs y f <= 1.
/// Samples are matched to support vectors by position in `alphas` (full length N).
inline double kkt_violation(const SvmModel& m, const TrainSet& ts, std::span<const double> alphas) {
  if (alphas.size() != ts.size()) throw InvalidArgument("need one multiplier per training sample");
  double worst = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double margin = ts.ys[i] * decision(m, ts.xs[i]) - 1.0;
    double v = 0.0;
    if (alphas[i] <= kSupportAlpha) v = std::max(0.0, -margin);
    else if (alphas[i] >= m.C - kSupportAlpha) v = std::max(0.0, margin);
    else v = std::abs(margin);
    worst = std::max(worst, v);
  }
  return worst;
}

/// Recovers the full-length multiplier vector of a trained model by matching
/// each training sample against the stored support vectors.
inline std::vector<double> training_alphas(const SvmModel& m, const TrainSet& ts) {
  std::vector<double> out(ts.size(), 0.0);
  std::vector<bool> used(m.alpha.size(), false);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const auto z = m.standardized(ts.xs[i]);
    for (std::size_t s = 0; s < m.alpha.size(); ++s)
      if (!used[s] && m.y[s] == ts.ys[i] && m.sv[s] == z) {
        used[s] = true;
        out[i] = m.alpha[s];
        break;
      }
  }
  return out;
}

inline double alpha_y_sum(const SvmModel& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.alpha.size(); ++i) s += m.alpha[i] * m.y[i];
  return s;
}

// SVM v1 <dim> <kernel> <C> <b> <n_sv>
// <alpha> <y> <dim reals>          (n_sv lines, standardized coordinates)
// MEAN <dim reals>
// SCALE <dim reals>
// LABELS +1 open -1 closed

inline void write_model(std::ostream& out, const SvmModel& m) {
  using textio::format_double;
  out << "SVM v1 " << m.dim << ' ' << kernel_spec(m.kernel) << ' ' << format_double(m.C) << ' ' << format_double(m.b)
      << ' ' << m.alpha.size() << '\n';
  for (std::size_t i = 0; i < m.alpha.size(); ++i) {
    out << format_double(m.alpha[i]) << ' ' << (m.y[i] > 0 ? "+1" : "-1");
    for (double v : m.sv[i]) out << ' ' << format_double(v);
    out << '\n';
  }
  out << "MEAN";
  for (double v : m.mean) out << ' ' << format_double(v);
  out << "\nSCALE";
  for (double v : m.scale) out << ' ' << format_double(v);
  out << "\nLABELS +1 open -1 closed\n";
}

inline SvmModel read_model(std::istream& in, const std::string& source = "svm model") {
  textio::LineReader rd(in, source);
  auto head = rd.expect("SVM", 6);
  if (head[1] != "v1") rd.fail("unsupported SVM version '" + head[1] + "'");
  SvmModel m;
  const auto dim = rd.integer(head[2]);
  if (dim < 1) rd.fail("dimension must be positive");
  m.dim = static_cast<std::size_t>(dim);
  try {
    m.kernel = parse_kernel_spec(head[3]);
  } catch (const Error& e) {
    rd.fail(e.what());
  }
  m.C = rd.num(head[4]);
  if (!(m.C > 0.0)) rd.fail("C must be positive");
  m.b = rd.num(head[5]);
  const auto n_sv = rd.integer(head[6]);
  if (n_sv < 1) rd.fail("model needs at least one support vector");
  for (long long s = 0; s < n_sv; ++s) {
    auto t = rd.tokens();
    if (t.size() != m.dim + 2) rd.fail("support vector line needs " + std::to_string(m.dim + 2) + " fields");
    const double a = rd.num(t[0]);
    if (!(a > 0.0) || a > m.C * (1.0 + 1e-12)) rd.fail("multiplier outside (0, C]");
    const auto lab = rd.integer(t[1]);
    if (lab != 1 && lab != -1) rd.fail("label must be +1 or -1");
    std::vector<double> v(m.dim);
    for (std::size_t k = 0; k < m.dim; ++k) v[k] = rd.num(t[k + 2]);
    m.alpha.push_back(a);
    m.y.push_back(static_cast<int>(lab));
    m.sv.push_back(std::move(v));
  }
  m.mean = rd.reals("MEAN", m.dim);
  m.scale = rd.reals("SCALE", m.dim);
  for (double s : m.scale)
    if (!(s > 0.0)) rd.fail("scale entries must be positive");
  auto lab = rd.expect("LABELS", 4);
  if (lab[1] != "+1" || lab[2] != "open" || lab[3] != "-1" || lab[4] != "closed")
    rd.fail("expected 'LABELS +1 open -1 closed'");
  return m;
}

inline void save_model(const std::filesystem::path& path, const SvmModel& m) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  write_model(out, m);
  if (!out) throw FormatError("write failed for " + path.string());
}

inline SvmModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_model(in, path.string());
}

}  // namespace drowsy::svm
