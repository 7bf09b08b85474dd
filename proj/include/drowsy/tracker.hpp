#pragma once

// Constant-velocity Kalman filter over the face box corners, plus the
// detect/coast/reinitialise bookkeeping that turns it into a search-ROI tracker.
//
// State: [x1, y1, x2, y2, vx1, vy1, vx2, vy2] (top-left and bottom-right corners,
// pixels and pixels/frame). Measurement: [x1, y1, x2, y2].

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>

#include "drowsy/error.hpp"
#include "drowsy/imaging.hpp"
#include "drowsy/textio.hpp"

namespace drowsy::tracker {

using StateVec = Eigen::Matrix<double, 8, 1>;
using StateCov = Eigen::Matrix<double, 8, 8>;
using MeasVec = Eigen::Matrix<double, 4, 1>;
using MeasCov = Eigen::Matrix<double, 4, 4>;
using MeasMap = Eigen::Matrix<double, 4, 8>;

struct KalmanState {
  StateVec x_hat = StateVec::Zero();
  StateCov P = StateCov::Identity();
};

struct KalmanConfig {
  StateCov F;
  MeasMap H;
  StateCov Q;
  MeasCov R;
  double initial_variance = 100.0;
  double roi_margin = 0.5;  // ROI grows by this fraction of the box size on every side
  int max_coast = 5;

  /// F adds one frame of velocity to each coordinate; H reads the four coordinates.
  static KalmanConfig constant_velocity(double q = 0.01, double r = 1.0) {
    KalmanConfig cfg;
    cfg.F = StateCov::Identity();
    cfg.F.block<4, 4>(0, 4) = Eigen::Matrix4d::Identity();
    cfg.H = MeasMap::Zero();
    cfg.H.block<4, 4>(0, 0) = Eigen::Matrix4d::Identity();
    cfg.Q = q * StateCov::Identity();
    cfg.R = r * MeasCov::Identity();
    return cfg;
  }
};

inline void symmetrize(StateCov& P) { P = 0.5 * (P + P.transpose()).eval(); }

/// A priori step: x <- F x, P <- F P F^T + Q. No control input.
inline KalmanState predict(const KalmanState& s, const KalmanConfig& cfg) {
  KalmanState out;
  out.x_hat = cfg.F * s.x_hat;
  out.P = cfg.F * s.P * cfg.F.transpose() + cfg.Q;
  symmetrize(out.P);
  return out;
}

/// Measurement update with residual z - H x.
inline KalmanState update(const KalmanState& s, const MeasVec& z, const KalmanConfig& cfg) {
  const MeasVec residual = z - cfg.H * s.x_hat;
  const MeasCov S = cfg.H * s.P * cfg.H.transpose() + cfg.R;
  const Eigen::LDLT<MeasCov> ldlt(S);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0)
    throw InvalidArgument("innovation covariance is singular");
  const Eigen::Matrix<double, 8, 4> K = ldlt.solve(cfg.H * s.P.transpose()).transpose();
  KalmanState out;
  out.x_hat = s.x_hat + K * residual;
  out.P = (StateCov::Identity() - K * cfg.H) * s.P;
  symmetrize(out.P);
  return out;
}

inline MeasVec corners_of(const Rect& r) {
  MeasVec z;
  z << r.x, r.y, r.x + r.w, r.y + r.h;
  return z;
}

/// Rounded box spanned by the position part of the state (at least 1x1).
inline Rect box_of(const StateVec& x) {
  const int x1 = static_cast<int>(std::lround(std::min(x(0), x(2))));
  const int y1 = static_cast<int>(std::lround(std::min(x(1), x(3))));
  const int x2 = static_cast<int>(std::lround(std::max(x(0), x(2))));
  const int y2 = static_cast<int>(std::lround(std::max(x(1), x(3))));
  return {x1, y1, std::max(1, x2 - x1), std::max(1, y2 - y1)};
}

enum class Mode { uninitialized, tracking, coasting };

inline const char* mode_name(Mode m) {
  switch (m) {
    case Mode::uninitialized: return "uninitialized";
    case Mode::tracking: return "tracking";
    case Mode::coasting: return "coasting";
  }
  return "?";
}

struct TrackState {
  Mode mode = Mode::uninitialized;
  int frames_coasted = 0;
  KalmanState kalman;
};

struct StepResult {
  Rect search_roi;
  std::optional<Rect> predicted;  // box the ROI was built around; empty after reinitialization
};

/// Box grown by `margin` times its size on every side, clamped to the frame.
inline Rect inflate(const Rect& box, double margin, int frame_w, int frame_h) {
  const int mx = static_cast<int>(std::ceil(box.w * margin));
  const int my = static_cast<int>(std::ceil(box.h * margin));
  return clamp_rect({box.x - mx, box.y - my, box.w + 2 * mx, box.h + 2 * my}, frame_w, frame_h);
}

/// Advances the track by one frame and returns where to search in the next one.
/// A detection (re)initialises or corrects the filter. A miss coasts on the
/// prediction for up to max_coast frames, then drops back to full-frame search.
class FaceTracker {
 public:
  FaceTracker(KalmanConfig cfg, int frame_w, int frame_h) : cfg_(std::move(cfg)), w_(frame_w), h_(frame_h) {
    if (frame_w < 1 || frame_h < 1) throw InvalidArgument("frame size must be positive");
    if (cfg_.max_coast < 0) throw InvalidArgument("max_coast must be >= 0");
  }

  const TrackState& state() const { return state_; }
  const KalmanConfig& config() const { return cfg_; }
  Rect full_frame() const { return {0, 0, w_, h_}; }

  /// Search region for the upcoming frame without advancing the track.
  Rect current_roi() const { return roi_; }

  StepResult step(const std::optional<Rect>& detection) {
    if (detection) {
      if (state_.mode == Mode::uninitialized) {
        state_.kalman.x_hat = StateVec::Zero();
        state_.kalman.x_hat.head<4>() = corners_of(*detection);
        state_.kalman.P = cfg_.initial_variance * StateCov::Identity();
      } else {
        state_.kalman = update(state_.kalman, corners_of(*detection), cfg_);
      }
      state_.mode = Mode::tracking;
      state_.frames_coasted = 0;
    } else if (state_.mode != Mode::uninitialized) {
      ++state_.frames_coasted;
      state_.mode = Mode::coasting;
      if (state_.frames_coasted > cfg_.max_coast) {
        state_ = TrackState{};
        roi_ = full_frame();
        return {roi_, std::nullopt};
      }
    } else {
      roi_ = full_frame();
      return {roi_, std::nullopt};
    }
    // The filter always carries the prior for the next frame.
    state_.kalman = predict(state_.kalman, cfg_);
    const Rect predicted = box_of(state_.kalman.x_hat);
    roi_ = inflate(predicted, cfg_.roi_margin, w_, h_);
    if (roi_.w < 1 || roi_.h < 1) roi_ = full_frame();
    return {roi_, predicted};
  }

 private:
  KalmanConfig cfg_;
  int w_;
  int h_;
  TrackState state_;
  Rect roi_{0, 0, w_, h_};
};

/// Debug dump, field order: mode, frames_coasted, x_hat (8 values), P (64 values, row-major).
inline void dump_state(std::ostream& out, const TrackState& s) {
  out << "mode " << mode_name(s.mode) << '\n' << "frames_coasted " << s.frames_coasted << '\n' << "x_hat";
  for (int i = 0; i < 8; ++i) out << ' ' << textio::format_double(s.kalman.x_hat(i));
  out << '\n';
  for (int r = 0; r < 8; ++r) {
    out << "P";
    for (int c = 0; c < 8; ++c) out << ' ' << textio::format_double(s.kalman.P(r, c));
    out << '\n';
  }
}

}  // namespace drowsy::tracker
