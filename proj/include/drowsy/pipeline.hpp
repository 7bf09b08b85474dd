#pragma once

// End-to-end orchestration: face search (tracked ROI, downsampled, tilted
// fallback), eye ROI selection, per-mode eye detection and state, PERCLOS CSV;
// plus the scale-factor benchmark and the model training entry points.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "drowsy/cascade_io.hpp"
#include "drowsy/eigen_space.hpp"
#include "drowsy/error.hpp"
#include "drowsy/haar.hpp"
#include "drowsy/imaging.hpp"
#include "drowsy/lbp.hpp"
#include "drowsy/perclos.hpp"
#include "drowsy/pgm.hpp"
#include "drowsy/svm.hpp"
#include "drowsy/textio.hpp"
#include "drowsy/tracker.hpp"

namespace drowsy::pipeline {

enum class Mode { day_haar, day_pca, night_lbp };

inline const char* mode_name(Mode m) {
  switch (m) {
    case Mode::day_haar: return "day-haar";
    case Mode::day_pca: return "day-pca";
    case Mode::night_lbp: return "night-lbp";
  }
  return "?";
}

inline Mode parse_mode(const std::string& s) {
  if (s == "day-haar") return Mode::day_haar;
  if (s == "day-pca") return Mode::day_pca;
  if (s == "night-lbp") return Mode::night_lbp;
  throw ConfigError("unknown mode '" + s + "' (expected day-haar, day-pca or night-lbp)");
}

struct ModelPaths {
  std::filesystem::path face_cascade;
  std::filesystem::path eye_open_cascade;
  std::filesystem::path eye_closed_cascade;
  std::filesystem::path eigen_model;
  std::filesystem::path nir_model;
  std::filesystem::path svm_model;
};

struct Config {
  Mode mode = Mode::day_haar;
  int sf = 1;
  double fps = 10.0;
  std::vector<double> tilt_angles = haar::default_tilt_angles();
  std::optional<double> perclos_threshold;  // required, no default
  perclos::WindowConfig window;
  bool use_tracker = true;
  ModelPaths models;
  std::filesystem::path input;  // directory of PGM frames, or "-" for raw frames on stdin
  int raw_width = 0;            // frame size for raw stdin input
  int raw_height = 0;
  std::filesystem::path output;  // CSV

  void validate() const {
    if (!(fps > 0.0)) throw ConfigError("fps must be positive");
    if (sf < 1) throw ConfigError("sf must be >= 1");
    if (!perclos_threshold) throw ConfigError("--perclos-threshold is required");
    if (!(*perclos_threshold > 0.0 && *perclos_threshold < 1.0))
      throw ConfigError("PERCLOS threshold must lie in (0, 1)");
    try {
      window.validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
    auto need = [](const std::filesystem::path& p, const char* flag) {
      if (p.empty()) throw ConfigError(std::string(flag) + " is required for this mode");
    };
    need(models.face_cascade, "--face-cascade");
    switch (mode) {
      case Mode::day_haar:
        need(models.eye_open_cascade, "--eye-open-cascade");
        need(models.eye_closed_cascade, "--eye-closed-cascade");
        break;
      case Mode::day_pca: need(models.eigen_model, "--eigen-model"); break;
      case Mode::night_lbp:
        need(models.nir_model, "--nir-model");
        need(models.svm_model, "--svm-model");
        break;
    }
    if (input == "-" && (raw_width < 1 || raw_height < 1))
      throw ConfigError("--frame-size WxH is required when reading raw frames from stdin");
  }
};

/// Models for one mode; only that mode's members are populated.
struct Models {
  haar::Cascade face;
  std::optional<haar::Cascade> eye_open;
  std::optional<haar::Cascade> eye_closed;
  std::optional<pca::ClassModels> eigen;
  std::optional<lbp::NirEyeModel> nir;
  std::optional<svm::SvmModel> svm;
};

/// Loads exactly the files the mode needs. Any failure is a configuration error.
inline Models load_models(Mode mode, const ModelPaths& p) {
  auto wrap = [](const std::filesystem::path& path, auto&& fn) {
    if (!std::filesystem::exists(path)) throw ConfigError("model file not found: " + path.string());
    try {
      return fn(path);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  };
  Models m;
  m.face = wrap(p.face_cascade, [](const auto& f) { return haar::load_cascade(f); });
  switch (mode) {
    case Mode::day_haar:
      m.eye_open = wrap(p.eye_open_cascade, [](const auto& f) { return haar::load_cascade(f); });
      m.eye_closed = wrap(p.eye_closed_cascade, [](const auto& f) { return haar::load_cascade(f); });
      break;
    case Mode::day_pca: m.eigen = wrap(p.eigen_model, [](const auto& f) { return pca::load_class_models(f); }); break;
    case Mode::night_lbp:
      m.nir = wrap(p.nir_model, [](const auto& f) { return lbp::load_nir_model(f); });
      m.svm = wrap(p.svm_model, [](const auto& f) { return svm::load_model(f); });
      if (m.svm->dim != m.nir->eigen.components())
        throw ConfigError("SVM expects " + std::to_string(m.svm->dim) + "-d weights but the NIR model has K = " +
                          std::to_string(m.nir->eigen.components()));
      break;
  }
  return m;
}

/// Face scan used by the pipeline and the benchmark: groups of two raw hits suffice.
inline haar::DetectParams face_scan_params() {
  haar::DetectParams p;
  p.min_neighbors = 2;
  return p;
}

/// Eye cascade scan inside the 200x70 ROI.
inline haar::DetectParams eye_scan_params() {
  haar::DetectParams p;
  p.scale_step = 1.15;
  p.min_window = 32;
  p.window_stride = 1;
  p.min_neighbors = 2;
  p.tilt_angles.clear();
  return p;
}

struct FrameResult {
  perclos::FrameRecord record;
  std::optional<haar::Detection> face;
  Rect search_roi;  // where the face was searched first
  bool used_tilted = false;
  std::optional<Rect> eye;  // inside the 200x70 eye ROI
  haar::DetectStats stats;
};

/// Per-stream state: the tracker and the loaded models. Frames must arrive in order.
class Processor {
 public:
  Processor(const Config& cfg, std::shared_ptr<const Models> models, int width, int height)
      : cfg_(cfg),
        models_(std::move(models)),
        tracker_(tracker::KalmanConfig::constant_velocity(), width, height),
        width_(width),
        height_(height) {
    params_ = face_scan_params();
    params_.sf = cfg.sf;
    params_.tilt_angles = cfg.tilt_angles;
  }

  const tracker::FaceTracker& tracker() const { return tracker_; }

  FrameResult process(const GrayImage& frame, long long index) {
    if (frame.width() != width_ || frame.height() != height_)
      throw InvalidArgument("frame " + std::to_string(index) + " is " + std::to_string(frame.width()) + "x" +
                            std::to_string(frame.height()) + ", expected " + std::to_string(width_) + "x" +
                            std::to_string(height_));
    FrameResult res;
    res.record.frame_index = index;
    res.record.timestamp = static_cast<double>(index) / cfg_.fps;
    res.search_roi = cfg_.use_tracker ? tracker_.current_roi() : Rect{0, 0, width_, height_};
    res.face = find_face(frame, res);
    if (cfg_.use_tracker) tracker_.step(res.face ? std::optional<Rect>(res.face->rect) : std::nullopt);
    if (!res.face) return res;
    res.record.face_found = true;
    GrayImage roi;
    try {
      roi = haar::derotated_eye_roi(*res.face, frame);
    } catch (const InvalidArgument&) {
      return res;
    }
    classify_eye(roi, res);
    return res;
  }

 private:
  std::optional<haar::Detection> find_face(const GrayImage& frame, FrameResult& res) {
    const Models& m = *models_;
    const Rect full{0, 0, width_, height_};
    if (res.search_roi != full) {
      const Rect r = res.search_roi;
      if (r.w / cfg_.sf >= m.face.base_width && r.h / cfg_.sf >= m.face.base_height) {
        auto dets = haar::detect_fast(m.face, crop(frame, r), params_, &res.stats);
        if (auto best = haar::strongest(dets)) {
          best->rect.x += r.x;
          best->rect.y += r.y;
          best->rotated_rect = best->rect;
          best->pivot = center_of(best->rect);
          return best;
        }
      }
    }
    res.used_tilted = true;
    try {
      return haar::strongest(haar::detect_tilted(m.face, frame, params_, &res.stats));
    } catch (const InvalidArgument&) {
      return std::nullopt;  // frame too small for this scale factor
    }
  }

  void classify_eye(const GrayImage& roi, FrameResult& res) {
    const Models& m = *models_;
    auto found = [&](perclos::EyeStatus s, const Rect& where) {
      res.record.eye_found = true;
      res.record.eye_state = s;
      res.eye = where;
    };
    switch (cfg_.mode) {
      case Mode::day_haar: {
        const auto p = eye_scan_params();
        if (auto c = haar::strongest(haar::detect(*m.eye_closed, roi, p))) {
          found(perclos::EyeStatus::closed, c->rect);
        } else if (auto o = haar::strongest(haar::detect(*m.eye_open, roi, p))) {
          found(perclos::EyeStatus::open, o->rect);
        }
        break;
      }
      case Mode::day_pca: {
        if (auto hit = pca::detect_eye_pca(*m.eigen, hist_equalize(roi)))
          found(hit->state == pca::Label::closed ? perclos::EyeStatus::closed : perclos::EyeStatus::open, hit->rect);
        break;
      }
      case Mode::night_lbp: {
        if (auto hit = lbp::detect_eye_nir(*m.nir, roi)) {
          const auto s = svm::classify_eye_state(*m.svm, hit->weights);
          found(s == svm::EyeState::closed ? perclos::EyeStatus::closed : perclos::EyeStatus::open, hit->rect);
        }
        break;
      }
    }
  }

  Config cfg_;
  std::shared_ptr<const Models> models_;
  tracker::FaceTracker tracker_;
  haar::DetectParams params_;
  int width_;
  int height_;
};

struct RunSummary {
  long long frames = 0;
  long long windows = 0;
  long long alarms = 0;
};

/// Streams every frame of `source` through a processor and writes the CSV to `csv`.
inline RunSummary process_stream(const Config& cfg, std::shared_ptr<const Models> models, FrameSource& source,
                                 std::ostream& csv) {
  perclos::Monitor monitor(cfg.window, perclos::AlarmConfig{*cfg.perclos_threshold});
  std::optional<Processor> proc;
  perclos::write_csv_header(csv);
  RunSummary sum;
  while (auto frame = source.next()) {
    const long long index = source.index() - 1;
    if (!proc) proc.emplace(cfg, models, frame->width(), frame->height());
    const FrameResult r = proc->process(*frame, index);
    const perclos::FrameReport rep = monitor.record(r.record);
    perclos::write_csv_row(csv, r.record, rep);
    ++sum.frames;
  }
  sum.windows = monitor.windows();
  sum.alarms = monitor.alarms();
  return sum;
}

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitRuntime = 2;

/// Validates, loads the mode's models, processes the input and writes the CSV
/// (via a temporary file renamed on success). Returns the process exit code.
inline int run(const Config& cfg, std::ostream& out = std::cout, std::ostream& err = std::cerr,
               std::istream& raw_in = std::cin) {
  std::shared_ptr<const Models> models;
  std::unique_ptr<FrameSource> source;
  try {
    cfg.validate();
    if (cfg.output.empty()) throw ConfigError("--output is required");
    models = std::make_shared<const Models>(load_models(cfg.mode, cfg.models));
    if (cfg.input == "-") {
      source = std::make_unique<RawStreamFrameSource>(raw_in, cfg.raw_width, cfg.raw_height);
    } else {
      if (!std::filesystem::is_directory(cfg.input)) throw ConfigError("input is not a directory: " + cfg.input.string());
      auto dir = std::make_unique<DirectoryFrameSource>(cfg.input);
      if (dir->frame_count() == 0) throw ConfigError("no .pgm frames in " + cfg.input.string());
      source = std::move(dir);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  const std::filesystem::path tmp = cfg.output.string() + ".tmp";
  try {
    RunSummary sum;
    {
      std::ofstream csv(tmp, std::ios::binary);
      if (!csv) throw FormatError("cannot write " + tmp.string());
      sum = process_stream(cfg, models, *source, csv);
      if (sum.frames == 0) throw FormatError("input stream holds no frames");
      csv.flush();
      if (!csv) throw FormatError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, cfg.output);
    out << "PERCLOS windows: " << sum.windows << ", alarms: " << sum.alarms << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    std::error_code ec;
    std::filesystem::remove(tmp, ec);
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

// ---------------------------------------------------------------------------
// Scale-factor benchmark.

struct BenchRow {
  int sf = 1;
  double ms_per_frame = 0.0;
  double fps = 0.0;
  long long detections = 0;  // frames with at least one face
  double agreement = 0.0;    // vs sf = 1
};

struct BenchOptions {
  std::vector<int> sfs{1, 2, 4, 6, 8};
  int repeats = 3;  // timing is the fastest of the repeats
  haar::DetectParams params = face_scan_params();
};

/// Strongest upright detection per frame at one scale factor; empty when the
/// factor shrinks the frame below the cascade window.
inline std::vector<std::optional<Rect>> primary_faces(const haar::Cascade& c, const std::vector<GrayImage>& frames,
                                                      const haar::DetectParams& p) {
  std::vector<std::optional<Rect>> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    try {
      const auto best = haar::strongest(haar::detect_fast(c, f, p));
      out.push_back(best ? std::optional<Rect>(best->rect) : std::nullopt);
    } catch (const InvalidArgument&) {
      out.push_back(std::nullopt);
    }
  }
  return out;
}

/// Share of frames where both runs agree: both empty, or primary boxes with IoU >= 0.5.
inline double agreement(const std::vector<std::optional<Rect>>& a, const std::vector<std::optional<Rect>>& b) {
  if (a.size() != b.size()) throw InvalidArgument("agreement needs equally long result lists");
  if (a.empty()) return 1.0;
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i] && !b[i]) ++same;
    else if (a[i] && b[i] && iou(*a[i], *b[i]) >= 0.5) ++same;
  }
  return static_cast<double>(same) / static_cast<double>(a.size());
}

inline std::vector<BenchRow> bench(const haar::Cascade& c, const std::vector<GrayImage>& frames,
                                   const BenchOptions& o = {}) {
  if (frames.empty()) throw InvalidArgument("benchmark corpus is empty");
  if (o.repeats < 1) throw InvalidArgument("repeats must be >= 1");
  haar::DetectParams p1 = o.params;
  p1.sf = 1;
  const auto reference = primary_faces(c, frames, p1);
  std::vector<BenchRow> rows;
  for (int sf : o.sfs) {
    haar::DetectParams p = o.params;
    p.sf = sf;
    p.validate();
    std::vector<std::optional<Rect>> res;
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < o.repeats; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      res = primary_faces(c, frames, p);
      const auto t1 = std::chrono::steady_clock::now();
      best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    BenchRow row;
    row.sf = sf;
    row.ms_per_frame = 1000.0 * best / static_cast<double>(frames.size());
    row.fps = row.ms_per_frame > 0.0 ? 1000.0 / row.ms_per_frame : std::numeric_limits<double>::infinity();
    row.detections = std::count_if(res.begin(), res.end(), [](const auto& r) { return r.has_value(); });
    row.agreement = agreement(reference, res);
    rows.push_back(row);
  }
  return rows;
}

inline void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << "sf,ms_per_frame,fps,detections,agreement\n";
  for (const auto& r : rows)
    out << r.sf << ',' << textio::format_fixed(r.ms_per_frame, 4) << ',' << textio::format_fixed(r.fps, 3) << ','
        << r.detections << ',' << textio::format_fixed(r.agreement, 4) << '\n';
}

inline std::vector<GrayImage> load_frames(const std::filesystem::path& dir) {
  DirectoryFrameSource src(dir);
  std::vector<GrayImage> out;
  while (auto f = src.next()) out.push_back(std::move(*f));
  return out;
}

// ---------------------------------------------------------------------------
// Training entry points.

/// Every .pgm of `dir` as a 50x40 crop; any other size is an error naming the file.
inline std::vector<GrayImage> load_crops(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw InvalidArgument("crop directory not found: " + dir.string());
  std::vector<GrayImage> out;
  for (const auto& f : list_pgm_files(dir)) {
    GrayImage img = read_pgm(f);
    if (img.width() != pca::kEyeWindowWidth || img.height() != pca::kEyeWindowHeight)
      throw InvalidArgument(f.string() + " is " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                            ", eye crops must be 50x40");
    out.push_back(std::move(img));
  }
  return out;
}

struct EigenDayTrainOptions {
  std::size_t components = 20;
  int holdout_every = 4;  // every n-th crop calibrates the threshold instead of training
  double tau_percentile = 0.99;
};

/// Per-class subspaces from crop lists; thresholds from each class's held-out crops.
inline pca::ClassModels train_eigen_day(const std::vector<GrayImage>& open, const std::vector<GrayImage>& closed,
                                        const EigenDayTrainOptions& o = {}) {
  auto fit = [&](const std::vector<GrayImage>& crops, const char* name, double& tau) {
    pca::SampleMatrix train;
    std::vector<const GrayImage*> held;
    for (std::size_t i = 0; i < crops.size(); ++i) {
      if (o.holdout_every > 1 && static_cast<int>(i % o.holdout_every) == o.holdout_every - 1) held.push_back(&crops[i]);
      else train.add(pca::vectorize(crops[i]));
    }
    if (train.rows() < o.components + 1 || held.empty())
      throw TrainingError(std::string(name) + " class needs more crops: " + std::to_string(crops.size()) +
                          " given for K = " + std::to_string(o.components));
    pca::EigenModel m = pca::pca_train(train, o.components);
    std::vector<double> errs;
    for (const auto* h : held) errs.push_back(pca::recon_error(m, pca::vectorize(*h)));
    tau = pca::percentile(errs, o.tau_percentile);
    return m;
  };
  pca::ClassModels cm;
  cm.open = fit(open, "open", cm.tau_open);
  cm.closed = fit(closed, "closed", cm.tau_closed);
  return cm;
}

/// SVM training set from crops: NIR descriptors projected onto the model's subspace.
inline svm::TrainSet projected_weights(const lbp::NirEyeModel& nir, const std::vector<GrayImage>& open,
                                       const std::vector<GrayImage>& closed) {
  svm::TrainSet ts;
  for (const auto* set : {&open, &closed})
    for (const auto& c : *set)
      ts.add(pca::project(nir.eigen, lbp::crop_descriptor(c, nir.lbp, nir.block, nir.normalize)), set == &open ? 1 : -1);
  return ts;
}

}  // namespace drowsy::pipeline
