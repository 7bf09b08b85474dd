// Command-line front end: detect, bench, train, synth.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "drowsy/cascade_io.hpp"
#include "drowsy/pipeline.hpp"
#include "drowsy/synth.hpp"

namespace fs = std::filesystem;
using namespace drowsy;

namespace {

struct DetectArgs {
  std::string mode;
  std::string input;
  std::string frame_size;
  double fps = 10.0;
  int sf = 1;
  double threshold = -1.0;
  double window = 60.0;
  double slide = 5.0;
  double min_valid = 0.25;
  std::string denominator = "eyes";
  bool partial = false;
  bool no_tracker = false;
  std::vector<double> tilt_degrees;
  pipeline::ModelPaths models;
  std::string output;
};

int run_detect(const DetectArgs& a) {
  pipeline::Config cfg;
  try {
    cfg.mode = pipeline::parse_mode(a.mode);
    if (a.denominator != "eyes" && a.denominator != "frames")
      throw ConfigError("--denominator must be 'eyes' or 'frames'");
    if (!a.frame_size.empty()) {
      const auto x = a.frame_size.find('x');
      if (x == std::string::npos) throw ConfigError("--frame-size must look like 640x480");
      try {
        cfg.raw_width = static_cast<int>(textio::parse_int(a.frame_size.substr(0, x)));
        cfg.raw_height = static_cast<int>(textio::parse_int(a.frame_size.substr(x + 1)));
      } catch (const FormatError&) {
        throw ConfigError("--frame-size must look like 640x480");
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pipeline::kExitConfig;
  }
  cfg.sf = a.sf;
  cfg.fps = a.fps;
  if (a.threshold >= 0.0) cfg.perclos_threshold = a.threshold;
  cfg.window.window_seconds = a.window;
  cfg.window.slide_seconds = a.slide;
  cfg.window.min_valid_fraction = a.min_valid;
  cfg.window.partial_windows = a.partial;
  cfg.window.denominator = a.denominator == "eyes" ? perclos::Denominator::eyes_found : perclos::Denominator::total_frames;
  cfg.use_tracker = !a.no_tracker;
  if (!a.tilt_degrees.empty()) {
    cfg.tilt_angles.clear();
    for (double d : a.tilt_degrees) cfg.tilt_angles.push_back(d * std::numbers::pi / 180.0);
  }
  cfg.models = a.models;
  cfg.input = a.input;
  cfg.output = a.output;
  return pipeline::run(cfg);
}

struct BenchArgs {
  std::string input;
  std::string face_cascade;
  std::vector<int> sfs{1, 2, 4, 6, 8};
  int repeats = 3;
  std::string output;
};

int run_bench(const BenchArgs& a) {
  haar::Cascade c;
  std::vector<GrayImage> frames;
  try {
    c = haar::load_cascade(a.face_cascade);
    if (!fs::is_directory(a.input)) throw ConfigError("input is not a directory: " + a.input);
    frames = pipeline::load_frames(a.input);
    if (frames.empty()) throw ConfigError("no .pgm frames in " + a.input);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pipeline::kExitConfig;
  }
  try {
    pipeline::BenchOptions o;
    o.sfs = a.sfs;
    o.repeats = a.repeats;
    const auto rows = pipeline::bench(c, frames, o);
    std::ostringstream csv;
    pipeline::write_bench_csv(csv, rows);
    if (!a.output.empty()) {
      std::ofstream out(a.output, std::ios::binary);
      if (!out) throw FormatError("cannot write " + a.output);
      out << csv.str();
    }
    std::cout << csv.str();
    return pipeline::kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pipeline::kExitRuntime;
  }
}

struct TrainArgs {
  std::string kind;
  std::string open_dir;
  std::string closed_dir;
  std::string out;
  std::size_t components = 0;
  std::string nir_model;
  std::string kernel = "poly:3:1";
  double C = 1.0;
  std::string validate_dir;
};

void print_spectrum(const pca::EigenModel& m, const char* label) {
  std::cout << label << " eigenvalues:";
  for (std::size_t k = 0; k < std::min<std::size_t>(m.components(), 10); ++k)
    std::cout << ' ' << textio::format_fixed(m.eigvals[k], 3);
  if (m.components() > 10) std::cout << " ... (" << m.components() << " total)";
  std::cout << '\n';
}

int run_train(const TrainArgs& a) {
  if (a.kind == "svm" && a.nir_model.empty()) {
    std::cerr << "error: train svm needs --nir-model to project the crops\n";
    return pipeline::kExitConfig;
  }
  try {
    const auto open = pipeline::load_crops(a.open_dir);
    const auto closed = pipeline::load_crops(a.closed_dir);
    std::cout << "crops: " << open.size() << " open, " << closed.size() << " closed\n";
    std::vector<GrayImage> val_open, val_closed;
    if (!a.validate_dir.empty()) {
      val_open = pipeline::load_crops(fs::path(a.validate_dir) / "open");
      val_closed = pipeline::load_crops(fs::path(a.validate_dir) / "closed");
    }
    auto report_accuracy = [&](auto&& predict_closed) {
      if (val_open.empty() && val_closed.empty()) return;
      std::size_t right = 0;
      for (const auto& c : val_open) right += predict_closed(c) == 0 ? 1 : 0;
      for (const auto& c : val_closed) right += predict_closed(c) == 1 ? 1 : 0;
      std::cout << "held-out accuracy: "
                << textio::format_fixed(100.0 * right / static_cast<double>(val_open.size() + val_closed.size()), 2)
                << "% (" << right << "/" << val_open.size() + val_closed.size() << ")\n";
    };
    if (a.kind == "eigen-day") {
      pipeline::EigenDayTrainOptions o;
      if (a.components) o.components = a.components;
      const auto cm = pipeline::train_eigen_day(open, closed, o);
      print_spectrum(cm.open, "open");
      print_spectrum(cm.closed, "closed");
      std::cout << "thresholds: open " << textio::format_double(cm.tau_open) << ", closed "
                << textio::format_double(cm.tau_closed) << '\n';
      pca::save_class_models(a.out, cm);
      const auto back = pca::load_class_models(a.out);
      if (back.open.mean != cm.open.mean || back.closed.eigvecs != cm.closed.eigvecs)
        throw FormatError("reloaded model differs from the trained one");
      report_accuracy([&](const GrayImage& c) {
        const auto l = pca::classify(cm, pca::vectorize(c));
        return l == pca::Label::closed ? 1 : l == pca::Label::open ? 0 : -1;
      });
    } else if (a.kind == "nir") {
      std::vector<GrayImage> all = open;
      all.insert(all.end(), closed.begin(), closed.end());
      lbp::NirTrainOptions o;
      if (a.components) o.components = a.components;
      const auto m = lbp::train_nir(all, o);
      print_spectrum(m.eigen, "descriptor");
      std::cout << "threshold: " << textio::format_double(m.tau) << '\n';
      lbp::save_nir_model(a.out, m);
      lbp::load_nir_model(a.out);
    } else if (a.kind == "svm") {
      const auto nir = lbp::load_nir_model(a.nir_model);
      const auto ts = pipeline::projected_weights(nir, open, closed);
      svm::TrainConfig cfg;
      cfg.C = a.C;
      svm::TrainReport rep;
      const auto m = svm::train(ts, svm::parse_kernel_spec(a.kernel), cfg, &rep);
      std::cout << "support vectors: " << m.support_count() << " of " << ts.size() << ", iterations "
                << rep.iterations << ", sum(alpha*y) " << textio::format_double(svm::alpha_y_sum(m)) << '\n';
      svm::save_model(a.out, m);
      svm::load_model(a.out);
      report_accuracy([&](const GrayImage& c) {
        const auto w = pca::project(nir.eigen, lbp::crop_descriptor(c, nir.lbp, nir.block, nir.normalize));
        return svm::classify_eye_state(m, w) == svm::EyeState::closed ? 1 : 0;
      });
    } else {
      std::cerr << "error: unknown training target '" << a.kind << "' (eigen-day, nir, svm)\n";
      return pipeline::kExitConfig;
    }
    std::cout << "wrote " << a.out << '\n';
    return pipeline::kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pipeline::kExitRuntime;
  }
}

struct SynthArgs {
  std::string out;
  std::uint64_t seed = 1;
  int frames = 60;
  std::string style = "day";
  double face_size = 130.0;
  int closed_period = 10;
  int closed_frames = 3;
  int count = 100;
  bool equalize = false;
};

synth::Style parse_style(const std::string& s) {
  if (s == "day") return synth::Style::day;
  if (s == "night") return synth::Style::night;
  throw ConfigError("--style must be 'day' or 'night'");
}

void write_numbered(const fs::path& dir, const std::vector<GrayImage>& imgs, const char* stem) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    char name[48];
    std::snprintf(name, sizeof name, "%s_%05zu.pgm", stem, i);
    write_pgm(dir / name, imgs[i]);
  }
}

int run_synth(const std::string& what, const SynthArgs& a) {
  try {
    const fs::path out(a.out);
    if (what == "sequence") {
      synth::SequenceOptions o;
      o.frames = a.frames;
      o.style = parse_style(a.style);
      o.face_size = a.face_size;
      const int period = std::max(1, a.closed_period), shut = a.closed_frames;
      o.closed = [period, shut](int i) { return i % period < shut; };
      synth::write_sequence(out, o, a.seed);
      std::cout << "wrote " << o.frames << " frames to " << out.string() << '\n';
    } else if (what == "bench-corpus") {
      write_numbered(out, synth::bench_corpus(a.frames, a.seed), "frame");
      std::cout << "wrote " << a.frames << " frames to " << out.string() << '\n';
    } else if (what == "crops") {
      synth::Rng rng(a.seed);
      synth::EyeSampleOptions eo;
      eo.style = parse_style(a.style);
      eo.equalize = a.equalize;
      write_numbered(out / "open", synth::eye_crops(false, a.count, eo, rng), "open");
      write_numbered(out / "closed", synth::eye_crops(true, a.count, eo, rng), "closed");
      std::cout << "wrote " << a.count << " crops per class under " << out.string() << '\n';
    } else if (what == "models") {
      fs::create_directories(out);
      haar::save_cascade(out / "face.cascade", synth::train_face_cascade(a.seed));
      haar::save_cascade(out / "eye_closed.cascade", synth::train_eye_cascade(true, a.seed + 1));
      haar::save_cascade(out / "eye_open.cascade", synth::train_eye_cascade(false, a.seed + 2));
      pca::save_class_models(out / "eigen_day.model", synth::train_day_eigen(a.seed + 3));
      const auto night = synth::train_night(a.seed + 4);
      lbp::save_nir_model(out / "nir.model", night.nir);
      svm::save_model(out / "eye_state.svm", night.svm);
      std::cout << "wrote face.cascade, eye_closed.cascade, eye_open.cascade, eigen_day.model, nir.model, "
                   "eye_state.svm to "
                << out.string() << '\n';
    }
    return pipeline::kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pipeline::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pipeline::kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Driver drowsiness toolkit: face/eye detection, eye state, PERCLOS"};
  app.require_subcommand(1);

  DetectArgs d;
  auto* detect = app.add_subcommand("detect", "Run the pipeline over a frame directory and write the PERCLOS CSV");
  detect->add_option("--mode", d.mode, "day-haar | day-pca | night-lbp")->required();
  detect->add_option("--input", d.input, "Directory of PGM frames, or - for raw frames on stdin")->required();
  detect->add_option("--frame-size", d.frame_size, "WxH of raw stdin frames");
  detect->add_option("--fps", d.fps, "Nominal frame rate for timestamps");
  detect->add_option("--sf", d.sf, "Face detection scale factor");
  detect->add_option("--perclos-threshold", d.threshold, "Alarm when PERCLOS is above this")->required();
  detect->add_option("--window-seconds", d.window, "PERCLOS window length");
  detect->add_option("--slide-seconds", d.slide, "PERCLOS window step");
  detect->add_option("--min-valid-fraction", d.min_valid, "Minimum eyes-found share for a window to count");
  detect->add_option("--denominator", d.denominator, "eyes (frames with a found eye) | frames (all frames)");
  detect->add_flag("--partial-windows", d.partial, "Report windows shorter than the full length at the start");
  detect->add_flag("--no-tracker", d.no_tracker, "Search the full frame every time");
  detect->add_option("--tilt-angles", d.tilt_degrees, "Rotation branches in degrees")->delimiter(',');
  detect->add_option("--face-cascade", d.models.face_cascade, "Face cascade file");
  detect->add_option("--eye-open-cascade", d.models.eye_open_cascade, "Open-eye cascade (day-haar)");
  detect->add_option("--eye-closed-cascade", d.models.eye_closed_cascade, "Closed-eye cascade (day-haar)");
  detect->add_option("--eigen-model", d.models.eigen_model, "Eigen-eye models (day-pca)");
  detect->add_option("--nir-model", d.models.nir_model, "NIR eye model (night-lbp)");
  detect->add_option("--svm-model", d.models.svm_model, "Eye-state SVM (night-lbp)");
  detect->add_option("--output", d.output, "CSV path")->required();

  BenchArgs b;
  auto* bench = app.add_subcommand("bench", "Time face detection per scale factor and compare with sf=1");
  bench->add_option("--input", b.input, "Directory of PGM frames")->required();
  bench->add_option("--face-cascade", b.face_cascade, "Face cascade file")->required();
  bench->add_option("--sf", b.sfs, "Scale factors")->delimiter(',');
  bench->add_option("--repeats", b.repeats, "Timing repeats (fastest is reported)");
  bench->add_option("--output", b.output, "CSV path");

  TrainArgs t;
  auto* train = app.add_subcommand("train", "Train eye models from labeled 50x40 crops");
  train->add_option("kind", t.kind, "eigen-day | nir | svm")->required();
  train->add_option("--open", t.open_dir, "Directory of open-eye crops")->required();
  train->add_option("--closed", t.closed_dir, "Directory of closed-eye crops")->required();
  train->add_option("--out", t.out, "Model file to write")->required();
  train->add_option("--components", t.components, "Subspace size K");
  train->add_option("--nir-model", t.nir_model, "NIR model whose subspace projects the crops (svm)");
  train->add_option("--kernel", t.kernel, "linear | quadratic[:c0] | poly[:d[:c0]] | rbf:gamma (svm)");
  train->add_option("--C", t.C, "SVM penalty");
  train->add_option("--validate", t.validate_dir, "Directory with open/ and closed/ crops for held-out accuracy");

  SynthArgs s;
  std::string synth_what;
  auto* syn = app.add_subcommand("synth", "Generate synthetic frames, crops or toy models");
  syn->add_option("what", synth_what, "sequence | bench-corpus | crops | models")
      ->required()
      ->check(CLI::IsMember({"sequence", "bench-corpus", "crops", "models"}));
  syn->add_option("--out", s.out, "Output directory")->required();
  syn->add_option("--seed", s.seed, "Random seed");
  syn->add_option("--frames", s.frames, "Frame count (sequence, bench-corpus)");
  syn->add_option("--style", s.style, "day | night");
  syn->add_option("--face-size", s.face_size, "Face side in pixels (sequence)");
  syn->add_option("--closed-period", s.closed_period, "Blink cycle length in frames (sequence)");
  syn->add_option("--closed-frames", s.closed_frames, "Closed frames per cycle (sequence)");
  syn->add_option("--count", s.count, "Crops per class (crops)");
  syn->add_flag("--equalize", s.equalize, "Histogram-equalize the eye ROI before cropping (crops)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return pipeline::kExitConfig;
  }
  if (*detect) return run_detect(d);
  if (*bench) return run_bench(b);
  if (*train) return run_train(t);
  if (*syn) return run_synth(synth_what, s);
  return pipeline::kExitConfig;
}
