#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>

#include "drowsy/cascade_io.hpp"
#include "drowsy/pipeline.hpp"
#include "drowsy/synth.hpp"
#include "support.hpp"

using namespace drowsy;
using namespace drowsy::pipeline;
using testing_support::slurp;
using testing_support::TempDir;

namespace {

// Toy models for every mode, trained once and written to disk.
struct ModelFiles {
  TempDir dir{"pipeline_models"};
  ModelPaths paths;
  synth::NightModels night;

  ModelFiles() {
    paths.face_cascade = dir / "face.cascade";
    paths.eye_open_cascade = dir / "eye_open.cascade";
    paths.eye_closed_cascade = dir / "eye_closed.cascade";
    paths.eigen_model = dir / "eigen_day.model";
    paths.nir_model = dir / "nir.model";
    paths.svm_model = dir / "eye_state.svm";
    haar::save_cascade(paths.face_cascade, synth::train_face_cascade(1));
    haar::save_cascade(paths.eye_closed_cascade, synth::train_eye_cascade(true, 2));
    haar::save_cascade(paths.eye_open_cascade, synth::train_eye_cascade(false, 3));
    pca::save_class_models(paths.eigen_model, synth::train_day_eigen(4));
    night = synth::train_night(5);
    lbp::save_nir_model(paths.nir_model, night.nir);
    svm::save_model(paths.svm_model, night.svm);
  }
};

const ModelFiles& models() {
  static const ModelFiles m;
  return m;
}

Config base_config(Mode mode, const std::filesystem::path& input, const std::filesystem::path& output) {
  Config cfg;
  cfg.mode = mode;
  cfg.sf = 2;
  cfg.perclos_threshold = 0.15;
  cfg.models = models().paths;
  cfg.input = input;
  cfg.output = output;
  return cfg;
}

std::filesystem::path write_frames(const TempDir& tmp, const std::string& name, const synth::SequenceOptions& o,
                                   std::uint64_t seed) {
  const auto dir = tmp / name;
  synth::write_sequence(dir, o, seed);
  return dir;
}

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::shared_ptr<const Models> loaded(Mode mode) {
  return std::make_shared<const Models>(load_models(mode, models().paths));
}

int shell(const std::string& cmd) {
  const int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Config, ValidationErrors) {
  Config cfg = base_config(Mode::day_haar, "in", "out.csv");
  EXPECT_NO_THROW(cfg.validate());
  Config c = cfg;
  c.perclos_threshold.reset();
  EXPECT_THROW(c.validate(), ConfigError);
  c = cfg;
  c.perclos_threshold = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = cfg;
  c.models.eye_closed_cascade.clear();
  EXPECT_THROW(c.validate(), ConfigError);
  c = cfg;
  c.mode = Mode::night_lbp;
  c.models.eye_open_cascade.clear();
  c.models.eye_closed_cascade.clear();
  c.models.eigen_model.clear();
  EXPECT_NO_THROW(c.validate());
  c.models.svm_model.clear();
  EXPECT_THROW(c.validate(), ConfigError);
  c = cfg;
  c.input = "-";
  EXPECT_THROW(c.validate(), ConfigError);
  c.raw_width = 640;
  c.raw_height = 480;
  EXPECT_NO_THROW(c.validate());
  EXPECT_THROW(parse_mode("dusk"), ConfigError);
  EXPECT_EQ(parse_mode("night-lbp"), Mode::night_lbp);
}

TEST(Models, EachModeLoadsOnlyItsOwnFiles) {
  ModelPaths p = models().paths;
  p.eigen_model = "/nonexistent/eigen.model";
  p.nir_model = "/nonexistent/nir.model";
  p.svm_model = "/nonexistent/eye.svm";
  const Models day = load_models(Mode::day_haar, p);
  EXPECT_TRUE(day.eye_open && day.eye_closed);
  EXPECT_FALSE(day.eigen || day.nir || day.svm);

  p = models().paths;
  p.eye_open_cascade = p.eye_closed_cascade = p.eigen_model = "/nonexistent/day";
  const Models night = load_models(Mode::night_lbp, p);
  EXPECT_TRUE(night.nir && night.svm);
  EXPECT_FALSE(night.eye_open || night.eye_closed || night.eigen);

  p = models().paths;
  p.eye_open_cascade = p.nir_model = "/nonexistent/other";
  EXPECT_TRUE(load_models(Mode::day_pca, p).eigen);
  p.eigen_model = "/nonexistent/eigen.model";
  EXPECT_THROW(load_models(Mode::day_pca, p), ConfigError);
}

TEST(Models, SvmDimensionMustMatchTheSubspace) {
  TempDir tmp("svm_dim");
  synth::Rng rng(3);
  const std::size_t k = models().night.nir.eigen.components();
  const auto ts = synth::weight_clusters(20, 20, static_cast<int>(k) + 1, rng);
  svm::save_model(tmp / "wide.svm", svm::train(ts, svm::Kernel::linear()));
  ModelPaths p = models().paths;
  p.svm_model = tmp / "wide.svm";
  EXPECT_THROW(load_models(Mode::night_lbp, p), ConfigError);
  std::ofstream(tmp / "junk.svm") << "not a model\n";
  p.svm_model = tmp / "junk.svm";
  EXPECT_THROW(load_models(Mode::night_lbp, p), ConfigError);
}

TEST(Run, TenFramesGiveElevenCsvLines) {
  TempDir tmp("run10");
  synth::SequenceOptions o;
  o.frames = 10;
  const auto in = write_frames(tmp, "frames", o, 1);
  std::ostringstream out, err;
  const Config cfg = base_config(Mode::day_haar, in, tmp / "out.csv");
  ASSERT_EQ(run(cfg, out, err), kExitOk) << err.str();
  const auto lines = lines_of(slurp(tmp / "out.csv"));
  ASSERT_EQ(lines.size(), 11u);
  EXPECT_EQ(lines[0], "frame,timestamp,face_found,eye_found,eye_state,perclos,alarm");
  EXPECT_EQ(lines[1].rfind("0,0.000000,", 0), 0u);
  EXPECT_EQ(lines[10].rfind("9,0.900000,", 0), 0u);
  EXPECT_EQ(out.str(), "PERCLOS windows: 0, alarms: 0\n");
  EXPECT_FALSE(std::filesystem::exists(tmp / "out.csv.tmp"));
}

TEST(Run, ThirtyPercentClosedRaisesTheAlarm) {
  TempDir tmp("alarm");
  synth::SequenceOptions o;
  o.frames = 60;
  const auto in = write_frames(tmp, "frames", o, 2);
  Config cfg = base_config(Mode::day_haar, in, tmp / "out.csv");
  cfg.window.window_seconds = 3.0;
  cfg.window.slide_seconds = 1.0;
  std::ostringstream out, err;
  ASSERT_EQ(run(cfg, out, err), kExitOk) << err.str();
  int alarms = 0, closed = 0, found = 0;
  for (const auto& l : lines_of(slurp(tmp / "out.csv"))) {
    alarms += l.ends_with(",1");
    closed += l.find(",closed,") != std::string::npos;
    found += l.find(",1,1,") != std::string::npos;
  }
  EXPECT_GE(alarms, 1);
  EXPECT_GE(found, 54);
  EXPECT_GE(closed, 15);
  EXPECT_NE(out.str().find("alarms: "), std::string::npos);
  EXPECT_EQ(out.str().find("alarms: 0"), std::string::npos);
}

TEST(Run, EmptyDirectoryFailsWithoutCsv) {
  TempDir tmp("empty");
  std::filesystem::create_directories(tmp / "frames");
  std::ostringstream out, err;
  EXPECT_EQ(run(base_config(Mode::day_haar, tmp / "frames", tmp / "out.csv"), out, err), kExitConfig);
  EXPECT_FALSE(std::filesystem::exists(tmp / "out.csv"));
  EXPECT_NE(err.str().find("no .pgm frames"), std::string::npos);
  EXPECT_EQ(run(base_config(Mode::day_haar, tmp / "missing", tmp / "out.csv"), out, err), kExitConfig);
  Config bad = base_config(Mode::day_haar, tmp / "frames", tmp / "out.csv");
  bad.models.face_cascade = tmp / "nope.cascade";
  EXPECT_EQ(run(bad, out, err), kExitConfig);
}

TEST(Run, UnreadableFrameAbortsWithItsIndex) {
  TempDir tmp("broken");
  synth::SequenceOptions o;
  o.frames = 4;
  const auto in = write_frames(tmp, "frames", o, 3);
  std::ofstream(in / "frame_00002.pgm", std::ios::trunc) << "P5\n64 ";
  std::ostringstream out, err;
  EXPECT_EQ(run(base_config(Mode::day_haar, in, tmp / "out.csv"), out, err), kExitRuntime);
  EXPECT_NE(err.str().find("frame 2"), std::string::npos) << err.str();
  EXPECT_FALSE(std::filesystem::exists(tmp / "out.csv"));
  EXPECT_FALSE(std::filesystem::exists(tmp / "out.csv.tmp"));
}

TEST(Run, RawStdinMatchesTheDirectory) {
  TempDir tmp("raw");
  synth::SequenceOptions o;
  o.frames = 8;
  const auto in = write_frames(tmp, "frames", o, 4);
  std::string raw;
  for (int i = 0; i < o.frames; ++i) {
    const auto f = synth::sequence_frame(o, 4, i);
    raw.append(f.pixels().begin(), f.pixels().end());
  }
  std::ostringstream out, err;
  ASSERT_EQ(run(base_config(Mode::day_haar, in, tmp / "dir.csv"), out, err), kExitOk);
  Config cfg = base_config(Mode::day_haar, "-", tmp / "raw.csv");
  cfg.raw_width = 640;
  cfg.raw_height = 480;
  std::istringstream stream(raw);
  ASSERT_EQ(run(cfg, out, err, stream), kExitOk) << err.str();
  EXPECT_EQ(slurp(tmp / "raw.csv"), slurp(tmp / "dir.csv"));
  std::istringstream truncated(raw.substr(0, raw.size() - 10));
  EXPECT_EQ(run(cfg, out, err, truncated), kExitRuntime);
}

TEST(Run, EveryModeIsDeterministic) {
  TempDir tmp("determinism");
  synth::SequenceOptions day, night;
  day.frames = night.frames = 6;
  night.style = synth::Style::night;
  const auto din = write_frames(tmp, "day", day, 5), nin = write_frames(tmp, "night", night, 5);
  for (Mode m : {Mode::day_haar, Mode::day_pca, Mode::night_lbp}) {
    const auto in = m == Mode::night_lbp ? nin : din;
    std::ostringstream out, err;
    ASSERT_EQ(run(base_config(m, in, tmp / "a.csv"), out, err), kExitOk) << err.str();
    ASSERT_EQ(run(base_config(m, in, tmp / "b.csv"), out, err), kExitOk) << err.str();
    EXPECT_EQ(slurp(tmp / "a.csv"), slurp(tmp / "b.csv")) << mode_name(m);
  }
}

TEST(Processor, NoFaceFrameIsUnknown) {
  synth::SequenceOptions o;
  o.face_present = [](int) { return false; };
  Processor p(base_config(Mode::day_haar, "", ""), loaded(Mode::day_haar), 640, 480);
  const auto r = p.process(synth::sequence_frame(o, 6, 0), 0);
  EXPECT_FALSE(r.record.face_found);
  EXPECT_FALSE(r.record.eye_found);
  EXPECT_EQ(r.record.eye_state, perclos::EyeStatus::unknown);
  EXPECT_THROW(p.process(GrayImage(320, 240), 1), InvalidArgument);
}

TEST(Processor, PlantedEyeStatesAreRecovered) {
  struct Case {
    Mode mode;
    synth::Style style;
    bool closed;
  };
  for (const Case c : {Case{Mode::day_haar, synth::Style::day, true}, Case{Mode::day_haar, synth::Style::day, false},
                       Case{Mode::day_pca, synth::Style::day, false}, Case{Mode::day_pca, synth::Style::day, true},
                       Case{Mode::night_lbp, synth::Style::night, true},
                       Case{Mode::night_lbp, synth::Style::night, false}}) {
    synth::SequenceOptions o;
    o.style = c.style;
    o.closed = [&](int) { return c.closed; };
    Processor p(base_config(c.mode, "", ""), loaded(c.mode), 640, 480);
    int right = 0;
    for (int i = 0; i < 4; ++i) {
      const auto r = p.process(synth::sequence_frame(o, 7, i), i);
      right += r.record.face_found && r.record.eye_found &&
               r.record.eye_state == (c.closed ? perclos::EyeStatus::closed : perclos::EyeStatus::open);
    }
    EXPECT_GE(right, 3) << mode_name(c.mode) << (c.closed ? " closed" : " open");
  }
}

TEST(Processor, TrackerRoiScansFewerWindows) {
  synth::SequenceOptions o;
  Config tracked = base_config(Mode::day_haar, "", "");
  Config full = tracked;
  full.use_tracker = false;
  full.tilt_angles.clear();
  Processor a(tracked, loaded(Mode::day_haar), 640, 480), b(full, loaded(Mode::day_haar), 640, 480);
  std::size_t wa = 0, wb = 0;
  int roi_frames = 0;
  for (int i = 0; i < 20; ++i) {
    const auto frame = synth::sequence_frame(o, 8, i);
    const auto ra = a.process(frame, i), rb = b.process(frame, i);
    if (i == 0) continue;
    wa += ra.stats.windows;
    wb += rb.stats.windows;
    roi_frames += !ra.used_tilted;
    ASSERT_EQ(ra.record.face_found, rb.record.face_found) << i;
  }
  EXPECT_GE(roi_frames, 17);
  EXPECT_LT(wa, wb);
  EXPECT_LT(2 * wa, wb);
}

TEST(Processor, TiltedFaceFallsBackToRotationBranches) {
  synth::SequenceOptions o;
  o.tilt = [](int) { return 40.0 * std::numbers::pi / 180.0; };
  Processor p(base_config(Mode::day_haar, "", ""), loaded(Mode::day_haar), 640, 480);
  synth::FrameTruth t;
  const auto frame = synth::sequence_frame(o, 9, 0, &t);
  const auto r = p.process(frame, 0);
  ASSERT_TRUE(r.face);
  EXPECT_TRUE(r.used_tilted);
  EXPECT_NE(r.face->tilt, 0.0);
  EXPECT_GE(iou(r.face->rect, synth::face_box(*t.face)), 0.5);
  EXPECT_TRUE(r.record.eye_found);
}

TEST(Bench, RowsAndAgreement) {
  const auto frames = synth::bench_corpus(6, 10);
  BenchOptions o;
  o.sfs = {1, 4};
  o.repeats = 1;
  const auto face = haar::load_cascade(models().paths.face_cascade);
  const auto rows = bench(face, frames, o);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].sf, 1);
  EXPECT_DOUBLE_EQ(rows[0].agreement, 1.0);
  EXPECT_GT(rows[0].ms_per_frame, rows[1].ms_per_frame);
  std::ostringstream csv;
  write_bench_csv(csv, rows);
  EXPECT_EQ(lines_of(csv.str()).size(), 3u);
  EXPECT_EQ(lines_of(csv.str())[0], "sf,ms_per_frame,fps,detections,agreement");
  EXPECT_THROW(bench(face, {}, o), InvalidArgument);
}

TEST(Bench, AgreementCountsMatchingFrames) {
  using R = std::optional<Rect>;
  const std::vector<R> a{Rect{0, 0, 10, 10}, std::nullopt, Rect{0, 0, 10, 10}, std::nullopt};
  const std::vector<R> b{Rect{1, 1, 10, 10}, std::nullopt, Rect{8, 8, 10, 10}, Rect{0, 0, 5, 5}};
  EXPECT_DOUBLE_EQ(agreement(a, b), 0.5);
  EXPECT_THROW(agreement(a, {}), InvalidArgument);
}

TEST(Train, EigenDayRoundTripAndCropValidation) {
  TempDir tmp("train");
  synth::Rng rng(11);
  synth::EyeSampleOptions eo;
  eo.equalize = true;
  for (bool closed : {false, true}) {
    const auto dir = tmp / (closed ? "closed" : "open");
    std::filesystem::create_directories(dir);
    const auto crops = synth::eye_crops(closed, 44, eo, rng);
    for (std::size_t i = 0; i < crops.size(); ++i) write_pgm(dir / ("c" + std::to_string(100 + i) + ".pgm"), crops[i]);
  }
  const auto open = load_crops(tmp / "open"), closed = load_crops(tmp / "closed");
  ASSERT_EQ(open.size(), 44u);
  const auto cm = train_eigen_day(open, closed);
  pca::save_class_models(tmp / "m.model", cm);
  const auto back = pca::load_class_models(tmp / "m.model");
  std::mt19937_64 probe_rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto probe = pca::vectorize(testing_support::random_image(50, 40, probe_rng));
    EXPECT_NEAR(pca::recon_error(cm.open, probe), pca::recon_error(back.open, probe), 1e-9);
    EXPECT_NEAR(pca::recon_error(cm.closed, probe), pca::recon_error(back.closed, probe), 1e-9);
  }
  EXPECT_THROW(train_eigen_day(std::vector<GrayImage>(open.begin(), open.begin() + 10), closed), TrainingError);

  write_pgm(tmp / "open" / "zz_wrong.pgm", GrayImage(48, 40));
  try {
    load_crops(tmp / "open");
    FAIL() << "mismatched crop accepted";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("zz_wrong.pgm"), std::string::npos) << e.what();
  }
}

TEST(Train, SvmOnProjectedWeightsBalancesMultipliers) {
  synth::Rng rng(12);
  synth::EyeSampleOptions eo;
  eo.style = synth::Style::night;
  const auto& nir = models().night.nir;
  const auto ts = projected_weights(nir, synth::eye_crops(false, 40, eo, rng), synth::eye_crops(true, 40, eo, rng));
  ASSERT_EQ(ts.size(), 80u);
  EXPECT_EQ(ts.xs[0].size(), nir.eigen.components());
  const auto m = svm::train(ts, svm::Kernel::polynomial(3, 1.0));
  EXPECT_NEAR(svm::alpha_y_sum(m), 0.0, 1e-6);
}

TEST(Cli, ExitCodes) {
  const char* cli = std::getenv("DROWSY_CLI");
  if (!cli) GTEST_SKIP() << "DROWSY_CLI not set";
  TempDir tmp("cli");
  synth::SequenceOptions o;
  o.frames = 3;
  const auto in = write_frames(tmp, "frames", o, 13);
  std::filesystem::create_directories(tmp / "empty");
  const auto& p = models().paths;
  const std::string exe = std::string("\"") + cli + "\"";
  const std::string day = " --face-cascade " + p.face_cascade.string() + " --eye-open-cascade " +
                          p.eye_open_cascade.string() + " --eye-closed-cascade " + p.eye_closed_cascade.string();
  const std::string ok = exe + " detect --mode day-haar --sf 2 --perclos-threshold 0.2" + day;
  EXPECT_EQ(shell(ok + " --input " + in.string() + " --output " + (tmp / "a.csv").string()), 0);
  EXPECT_EQ(lines_of(slurp(tmp / "a.csv")).size(), 4u);
  EXPECT_EQ(shell(ok + " --input " + (tmp / "empty").string() + " --output " + (tmp / "b.csv").string()), 1);
  EXPECT_FALSE(std::filesystem::exists(tmp / "b.csv"));
  EXPECT_EQ(shell(exe + " detect --mode dusk --perclos-threshold 0.2" + day + " --input " + in.string() +
                  " --output " + (tmp / "c.csv").string()),
            1);
  EXPECT_EQ(shell(exe + " detect --mode day-haar" + day + " --input " + in.string() + " --output " +
                  (tmp / "c.csv").string()),
            1);
  EXPECT_EQ(shell(exe + " bogus"), 1);

  std::filesystem::create_directories(tmp / "open");
  std::filesystem::create_directories(tmp / "closed");
  write_pgm(tmp / "open" / "odd.pgm", GrayImage(20, 20));
  EXPECT_EQ(shell(exe + " train eigen-day --open " + (tmp / "open").string() + " --closed " +
                  (tmp / "closed").string() + " --out " + (tmp / "m.model").string()),
            2);
}
