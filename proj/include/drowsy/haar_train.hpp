#pragma once

// Desk-scale discrete AdaBoost over decision stumps, and sequential cascade
// construction with bootstrapping over surviving negatives.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "drowsy/error.hpp"
#include "drowsy/haar.hpp"
#include "drowsy/imaging.hpp"

namespace drowsy::haar {

/// Every standard feature whose rect corners fall on a `step` grid inside a base window.
inline std::vector<HaarFeature> enumerate_features(int base_w, int base_h, int step = 1) {
  if (step < 1) throw InvalidArgument("feature grid step must be >= 1");
  std::vector<HaarFeature> out;
  for (int y = 0; y < base_h; y += step)
    for (int x = 0; x < base_w; x += step)
      for (int h = step; y + h <= base_h; h += step)
        for (int w = step; x + w <= base_w; w += step) {
          if (x + 2 * w <= base_w) out.push_back(HaarFeature::two_horizontal(x, y, w, h));
          if (y + 2 * h <= base_h) out.push_back(HaarFeature::two_vertical(x, y, w, h));
          if (x + 3 * w <= base_w) out.push_back(HaarFeature::three_horizontal(x, y, w, h));
          if (y + 3 * h <= base_h) out.push_back(HaarFeature::three_vertical(x, y, w, h));
          if (x + 2 * w <= base_w && y + 2 * h <= base_h) out.push_back(HaarFeature::four(x, y, w, h));
        }
  return out;
}

/// Seeded random subset of `pool`, in pool order.
inline std::vector<HaarFeature> sample_features(const std::vector<HaarFeature>& pool, std::size_t n,
                                                std::uint32_t seed) {
  if (n >= pool.size()) return pool;
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  std::vector<HaarFeature> out;
  out.reserve(n);
  for (auto i : idx) out.push_back(pool[i]);
  return out;
}

struct StageTrainOptions {
  bool variance_normalize = false;
};

/// Per-round diagnostics of a stage training run.
struct StageTrainReport {
  std::vector<double> weighted_errors;
  std::vector<double> weight_sums;  // sum of sample weights after each reweighting
  bool stopped_early = false;
};

inline constexpr double kMinWeightedError = 1e-10;

namespace detail {

/// Stump input value of `f` on a base-sized sample, computed exactly as the
/// detector computes it at base scale.
class SampleTable {
 public:
  SampleTable(const std::vector<GrayImage>& samples, int base_w, int base_h, bool variance_normalize) {
    for (const auto& s : samples) {
      if (s.width() != base_w || s.height() != base_h)
        throw InvalidArgument("training samples must all be " + std::to_string(base_w) + "x" +
                              std::to_string(base_h));
      scans_.emplace_back(s, variance_normalize);
      double inv = 1.0;
      if (variance_normalize) inv /= window_stddev(scans_.back().ii(), *scans_.back().sq(), Rect{0, 0, base_w, base_h});
      inv_norm_.push_back(inv);
    }
    base_w_ = base_w;
    base_h_ = base_h;
  }

  std::size_t size() const { return scans_.size(); }

  void values(const HaarFeature& f, std::span<double> out) const {
    const int table_w = base_w_ + 1;
    const auto taps = to_taps(scale_feature(f, base_w_, base_h_, base_w_, base_h_), table_w);
    for (std::size_t i = 0; i < scans_.size(); ++i) {
      const std::uint32_t* origin = scans_[i].ii().data();
      double v = 0.0;
      for (const auto& t : taps) v += tap_sum(origin, t);
      out[i] = v * inv_norm_[i];
    }
  }

 private:
  std::vector<ScanImage> scans_;
  std::vector<double> inv_norm_;
  int base_w_ = 0;
  int base_h_ = 0;
};

}  // namespace detail

/// Discrete AdaBoost for one cascade stage. Each round picks the pool feature,
/// threshold and polarity with the lowest weighted error, votes
/// 0.5 * ln((1 - e) / e), and reweights. The stage threshold is the lowest vote
/// total reached by any training positive, so every training positive passes.
inline Stage train_stage(const std::vector<GrayImage>& positives, const std::vector<GrayImage>& negatives,
                         const std::vector<HaarFeature>& pool, int rounds, const StageTrainOptions& opts = {},
                         StageTrainReport* report = nullptr) {
  if (positives.empty()) throw TrainingError("no positive samples");
  if (negatives.empty()) throw TrainingError("no negative samples");
  if (pool.empty()) throw TrainingError("empty feature pool");
  if (rounds < 1) throw InvalidArgument("rounds must be >= 1");
  const int bw = positives.front().width();
  const int bh = positives.front().height();
  for (const auto& f : pool)
    for (const auto& r : f.rects)
      if (!r.rect.fits(bw, bh)) throw InvalidArgument("pool feature does not fit the sample size");

  std::vector<GrayImage> all;
  all.reserve(positives.size() + negatives.size());
  all.insert(all.end(), positives.begin(), positives.end());
  all.insert(all.end(), negatives.begin(), negatives.end());
  const detail::SampleTable table(all, bw, bh, opts.variance_normalize);
  const std::size_t n = all.size();
  const std::size_t n_pos = positives.size();
  std::vector<int> label(n);
  for (std::size_t i = 0; i < n; ++i) label[i] = i < n_pos ? 1 : -1;

  const std::size_t n_feat = pool.size();
  std::vector<double> values(n_feat * n);
  std::vector<std::uint32_t> order(n_feat * n);
  for (std::size_t f = 0; f < n_feat; ++f) {
    std::span<double> vals(values.data() + f * n, n);
    table.values(pool[f], vals);
    auto* ord = order.data() + f * n;
    std::iota(ord, ord + n, 0u);
    std::stable_sort(ord, ord + n, [&](std::uint32_t a, std::uint32_t b) { return vals[a] < vals[b]; });
  }

  // Class-balanced initial weights.
  std::vector<double> weight(n);
  for (std::size_t i = 0; i < n; ++i)
    weight[i] = label[i] > 0 ? 0.5 / static_cast<double>(n_pos) : 0.5 / static_cast<double>(n - n_pos);

  Stage stage;
  for (int round = 0; round < rounds; ++round) {
    double total_pos = 0.0, total_neg = 0.0;
    for (std::size_t i = 0; i < n; ++i) (label[i] > 0 ? total_pos : total_neg) += weight[i];

    double best_err = 2.0;
    std::size_t best_f = 0;
    double best_thr = 0.0;
    int best_pol = 1;
    for (std::size_t f = 0; f < n_feat; ++f) {
      const double* vals = values.data() + f * n;
      const std::uint32_t* ord = order.data() + f * n;
      double below_pos = 0.0, below_neg = 0.0;
      // Threshold under every value: nothing fires.
      auto consider = [&](double thr) {
        const double err_pos_pol = below_neg + (total_pos - below_pos);
        const double err_neg_pol = below_pos + (total_neg - below_neg);
        if (err_pos_pol < best_err) {
          best_err = err_pos_pol;
          best_f = f;
          best_thr = thr;
          best_pol = 1;
        }
        if (err_neg_pol < best_err) {
          best_err = err_neg_pol;
          best_f = f;
          best_thr = thr;
          best_pol = -1;
        }
      };
      consider(vals[ord[0]] - 1.0);
      for (std::size_t k = 0; k < n; ++k) {
        const std::uint32_t i = ord[k];
        (label[i] > 0 ? below_pos : below_neg) += weight[i];
        if (k + 1 < n && vals[ord[k + 1]] == vals[i]) continue;
        const double thr = k + 1 < n ? 0.5 * (vals[i] + vals[ord[k + 1]]) : vals[i] + 1.0;
        consider(thr);
      }
    }

    best_err = std::max(0.0, best_err);
    if (best_err >= 0.5 - 1e-12) {
      if (stage.stumps.empty()) throw TrainingError("no feature in the pool beats chance (weighted error >= 0.5)");
      if (report) report->stopped_early = true;
      break;
    }
    const double eps = std::max(best_err, kMinWeightedError);
    const double alpha = 0.5 * std::log((1.0 - eps) / eps);
    Stump s{pool[best_f], best_thr, best_pol, alpha};
    stage.stumps.push_back(s);
    if (report) report->weighted_errors.push_back(best_err);

    const double* vals = values.data() + best_f * n;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool fired = s.fires(vals[i]);
      const bool correct = fired == (label[i] > 0);
      weight[i] *= std::exp(correct ? -alpha : alpha);
      total += weight[i];
    }
    double check = 0.0;
    for (auto& w : weight) {
      w /= total;
      check += w;
    }
    if (report) report->weight_sums.push_back(check);
    if (best_err <= kMinWeightedError) {
      if (report) report->stopped_early = true;
      break;
    }
  }
  // Recompute positive vote totals in detector order so threshold comparisons are exact.
  std::vector<double> sums(n_pos, 0.0);
  for (const auto& s : stage.stumps) {
    std::vector<double> v(n);
    table.values(s.feature, v);
    for (std::size_t i = 0; i < n_pos; ++i)
      if (s.fires(v[i])) sums[i] += s.vote;
  }
  stage.threshold = *std::min_element(sums.begin(), sums.end());
  return stage;
}

/// True when `stage` alone accepts a base-sized sample.
inline bool stage_accepts(const Stage& stage, const GrayImage& sample, bool variance_normalize) {
  Cascade c{sample.width(), sample.height(), {stage}, variance_normalize};
  const ScanImage scan(sample, variance_normalize);
  return eval_cascade(c, scan, sample.bounds()).passed;
}

/// Trains stages in sequence (rounds per stage from `stage_rounds`). After each
/// stage, negatives it rejects are dropped; training stops early when none survive.
inline Cascade build_cascade(const std::vector<GrayImage>& positives, std::vector<GrayImage> negatives,
                             const std::vector<HaarFeature>& pool, const std::vector<int>& stage_rounds,
                             const StageTrainOptions& opts = {}) {
  if (positives.empty()) throw TrainingError("no positive samples");
  if (negatives.empty()) throw TrainingError("no negative samples");
  if (stage_rounds.empty()) throw InvalidArgument("no stages requested");
  Cascade c;
  c.base_width = positives.front().width();
  c.base_height = positives.front().height();
  c.variance_normalize = opts.variance_normalize;
  for (int rounds : stage_rounds) {
    if (negatives.empty()) break;
    Stage st = train_stage(positives, negatives, pool, rounds, opts);
    std::erase_if(negatives, [&](const GrayImage& g) { return !stage_accepts(st, g, opts.variance_normalize); });
    c.stages.push_back(std::move(st));
  }
  return c;
}

}  // namespace drowsy::haar
