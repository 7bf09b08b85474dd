#pragma once

// Per-frame eye-state records, sliding PERCLOS windows over them, and the
// threshold alarm.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "drowsy/error.hpp"
#include "drowsy/textio.hpp"

namespace drowsy::perclos {

enum class EyeStatus { open, closed, unknown };

inline const char* status_name(EyeStatus s) {
  switch (s) {
    case EyeStatus::open: return "open";
    case EyeStatus::closed: return "closed";
    case EyeStatus::unknown: return "unknown";
  }
  return "?";
}

struct FrameRecord {
  long long frame_index = 0;
  double timestamp = 0.0;
  bool face_found = false;
  bool eye_found = false;
  EyeStatus eye_state = EyeStatus::unknown;

  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

inline void validate(const FrameRecord& r) {
  if (r.eye_found && r.eye_state == EyeStatus::unknown) throw InvalidArgument("found eye needs a known state");
  if (!r.eye_found && r.eye_state != EyeStatus::unknown) throw InvalidArgument("eye state without a found eye");
  if (!r.face_found && r.eye_found) throw InvalidArgument("eye found without a face");
}

enum class Denominator { eyes_found, total_frames };

struct WindowConfig {
  double window_seconds = 60.0;
  double slide_seconds = 5.0;
  double min_valid_fraction = 0.25;  // eyes_found / frames below this -> no value
  bool partial_windows = false;      // judge windows ending before window_seconds
  Denominator denominator = Denominator::eyes_found;

  void validate() const {
    if (!(window_seconds > 0.0)) throw InvalidArgument("window length must be positive");
    if (!(slide_seconds > 0.0)) throw InvalidArgument("slide must be positive");
    if (min_valid_fraction < 0.0 || min_valid_fraction > 1.0)
      throw InvalidArgument("min_valid_fraction must lie in [0, 1]");
  }
};

struct WindowCounts {
  long long frames = 0;
  long long eyes_found = 0;
  long long closed = 0;
};

/// Frame log with prefix counters; window queries are two binary searches.
class Accumulator {
 public:
  explicit Accumulator(WindowConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

  const WindowConfig& config() const { return cfg_; }
  std::size_t size() const { return times_.size(); }
  long long eyes_found_total() const { return found_.back(); }
  long long closed_total() const { return closed_.back(); }

  void record(const FrameRecord& r) {
    validate(r);
    if (last_index_ && r.frame_index <= *last_index_)
      throw InvalidArgument("frame " + std::to_string(r.frame_index) + " recorded after frame " +
                            std::to_string(*last_index_));
    if (!times_.empty() && r.timestamp < times_.back())
      throw InvalidArgument("timestamps must not decrease (frame " + std::to_string(r.frame_index) + ")");
    last_index_ = r.frame_index;
    times_.push_back(r.timestamp);
    found_.push_back(found_.back() + (r.eye_found ? 1 : 0));
    closed_.push_back(closed_.back() + (r.eye_found && r.eye_state == EyeStatus::closed ? 1 : 0));
  }

  /// Counts over frames with timestamp in (end - window, end].
  WindowCounts counts(double end_time) const {
    const double start = end_time - cfg_.window_seconds;
    const auto lo = static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), start) - times_.begin());
    const auto hi = static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), end_time) - times_.begin());
    if (hi <= lo) return {};
    return {static_cast<long long>(hi - lo), found_[hi] - found_[lo], closed_[hi] - closed_[lo]};
  }

  /// closed / eyes found over the window; absent without found eyes, under the
  /// valid fraction, or for a window ending early without partial windows.
  std::optional<double> window_value(double end_time) const {
    if (!cfg_.partial_windows && end_time < cfg_.window_seconds) return std::nullopt;
    return value_of(counts(end_time), cfg_);
  }

  static std::optional<double> value_of(const WindowCounts& c, const WindowConfig& cfg) {
    if (c.frames == 0 || c.eyes_found == 0) return std::nullopt;
    if (static_cast<double>(c.eyes_found) < cfg.min_valid_fraction * static_cast<double>(c.frames))
      return std::nullopt;
    const long long denom = cfg.denominator == Denominator::eyes_found ? c.eyes_found : c.frames;
    return static_cast<double>(c.closed) / static_cast<double>(denom);
  }

 private:
  WindowConfig cfg_;
  std::optional<long long> last_index_;
  std::vector<double> times_;
  std::vector<long long> found_{0};
  std::vector<long long> closed_{0};
};

struct AlarmConfig {
  double threshold = 0.15;

  void validate() const {
    if (!(threshold > 0.0 && threshold < 1.0)) throw InvalidArgument("PERCLOS threshold must lie in (0, 1)");
  }
};

/// Strictly greater than the threshold; no value, no alarm.
inline bool check_alarm(const std::optional<double>& value, const AlarmConfig& cfg) {
  return value.has_value() && *value > cfg.threshold;
}

/// What a frame contributes to the CSV: a window value when a window boundary
/// was reached at this frame.
struct FrameReport {
  bool window_closed = false;
  double window_end = 0.0;
  std::optional<double> value;
  bool alarm = false;
};

/// Accumulator plus the window schedule: windows end at window + k * slide
/// (or k * slide with partial windows). A boundary is reached by the first
/// frame whose timestamp is at or past it.
class Monitor {
 public:
  Monitor(WindowConfig wcfg, AlarmConfig acfg) : acc_(wcfg), alarm_(acfg) {
    alarm_.validate();
    next_k_ = wcfg.partial_windows ? 1 : 0;
  }

  const Accumulator& accumulator() const { return acc_; }
  long long windows() const { return windows_; }
  long long alarms() const { return alarms_; }

  FrameReport record(const FrameRecord& r) {
    acc_.record(r);
    FrameReport rep;
    for (;;) {
      const double end = boundary(next_k_);
      if (r.timestamp < end) break;
      ++next_k_;
      ++windows_;
      rep.window_closed = true;
      rep.window_end = end;
      rep.value = acc_.window_value(end);
      rep.alarm = check_alarm(rep.value, alarm_);
      if (rep.alarm) ++alarms_;
    }
    return rep;
  }

  double boundary(long long k) const {
    const auto& c = acc_.config();
    return (c.partial_windows ? 0.0 : c.window_seconds) + static_cast<double>(k) * c.slide_seconds;
  }

 private:
  Accumulator acc_;
  AlarmConfig alarm_;
  long long next_k_ = 0;
  long long windows_ = 0;
  long long alarms_ = 0;
};

inline constexpr const char* kCsvHeader = "frame,timestamp,face_found,eye_found,eye_state,perclos,alarm";

inline void write_csv_header(std::ostream& out) { out << kCsvHeader << '\n'; }

inline void write_csv_row(std::ostream& out, const FrameRecord& r, const FrameReport& rep) {
  out << r.frame_index << ',' << textio::format_fixed(r.timestamp, 6) << ',' << (r.face_found ? 1 : 0) << ','
      << (r.eye_found ? 1 : 0) << ',' << status_name(r.eye_state) << ',';
  if (rep.window_closed && rep.value) out << textio::format_fixed(*rep.value, 6);
  out << ',' << (rep.alarm ? 1 : 0) << '\n';
}

inline std::string summary_line(const Monitor& m) {
  return "PERCLOS windows: " + std::to_string(m.windows()) + ", alarms: " + std::to_string(m.alarms());
}

}  // namespace drowsy::perclos
