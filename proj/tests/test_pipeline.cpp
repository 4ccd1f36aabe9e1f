#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "hyperdrive/pipeline.hpp"
#include "hyperdrive/wire.hpp"

using namespace hyperdrive;
using namespace hyperdrive::pipeline;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

/// Write a complete rig + capture into `dir` and return the config.
PipelineConfig make_rig_dir(const fs::path& dir, std::uint64_t seed, double duration_s = 1.0) {
  const int size = 40;
  simgen::RigConfig rig = simgen::RigConfig::test_scale(size);
  simgen::SyntheticScene scene = simgen::generate_scene(seed, size, size, 3);

  PipelineConfig cfg;
  cfg.vnir_pattern_path = (dir / "vnir_pattern.txt").string();
  cfg.swir_pattern_path = (dir / "swir_pattern.txt").string();
  cfg.vnir_correction_path = (dir / "vnir_correction.txt").string();
  cfg.swir_correction_path = (dir / "swir_correction.txt").string();
  cfg.vnir_model_path = (dir / "vnir_model.txt").string();
  cfg.swir_model_path = (dir / "swir_model.txt").string();
  cfg.vnir_correspondences_path = (dir / "vnir_corr.txt").string();
  cfg.swir_correspondences_path = (dir / "swir_corr.txt").string();
  cfg.output_dir = (dir / "dataset").string();
  cfg.out_height = size;
  cfg.out_width = size;

  mosaic::save_pattern(rig.vnir_pattern, cfg.vnir_pattern_path);
  mosaic::save_pattern(rig.swir_pattern, cfg.swir_pattern_path);
  mosaic::save_correction(rig.vnir_correction, cfg.vnir_correction_path);
  mosaic::save_correction(rig.swir_correction, cfg.swir_correction_path);
  geometry::save_camera_model(rig.vnir_model, cfg.vnir_model_path);
  geometry::save_camera_model(rig.swir_model, cfg.swir_model_path);
  geometry::save_correspondences(
      simgen::make_correspondences(rig.vnir_model, rig.h_vnir, size, size),
      cfg.vnir_correspondences_path);
  geometry::save_correspondences(
      simgen::make_correspondences(rig.swir_model, rig.h_swir, size, size),
      cfg.swir_correspondences_path);

  const std::string capture = (dir / "capture.hds").string();
  for (const auto& m : simgen::emit_streams(scene, rig, duration_s, 0.0)) {
    const auto& bytes = *static_cast<const std::vector<std::byte>*>(m.payload.get());
    wire::append_capture_record(capture, bytes);
  }
  return cfg;
}

}  // namespace

TEST_CASE("config files round-trip key for key") {
  TempDir dir("hd_cfg_test");
  PipelineConfig cfg;
  cfg.vnir_pattern_path = "a.txt";
  cfg.swir_pattern_path = "b.txt";
  cfg.vnir_correction_path = "c.txt";
  cfg.swir_correction_path = "d.txt";
  cfg.vnir_model_path = "e.txt";
  cfg.swir_model_path = "f.txt";
  cfg.vnir_correspondences_path = "g.txt";
  cfg.swir_correspondences_path = "h.txt";
  cfg.ontology_path = "ont.txt";
  cfg.output_dir = "out";
  cfg.out_height = 100;
  cfg.out_width = 200;
  cfg.sync_window_ns = 75'000'000;
  cfg.downsample_hz = 2.5;
  cfg.tags = {"desert", "dusk", "winter", "rain"};
  const std::string path = (dir.path / "pipe.cfg").string();
  cfg.save(path);
  PipelineConfig back = PipelineConfig::load(path);
  CHECK(back.vnir_pattern_path == cfg.vnir_pattern_path);
  CHECK(back.swir_correspondences_path == cfg.swir_correspondences_path);
  CHECK(back.ontology_path == cfg.ontology_path);
  CHECK(back.output_dir == cfg.output_dir);
  CHECK(back.out_height == 100);
  CHECK(back.out_width == 200);
  CHECK(back.sync_window_ns == 75'000'000);
  CHECK(back.downsample_hz == doctest::Approx(2.5));
  CHECK(back.tags.biome == "desert");
  CHECK(back.tags.weather == "rain");

  CHECK_THROWS_AS(PipelineConfig::load((dir.path / "missing.cfg").string()), Error);
  std::ofstream((dir.path / "bad.cfg").string()) << "unknown-key 3\n";
  CHECK_THROWS_AS(PipelineConfig::load((dir.path / "bad.cfg").string()), Error);
}

TEST_CASE("load_rig validates every referenced file up front") {
  TempDir dir("hd_loadrig_test");
  PipelineConfig cfg = make_rig_dir(dir.path, 11);
  CHECK_NOTHROW(load_rig(cfg));
  PipelineConfig broken = cfg;
  broken.vnir_correction_path = (dir.path / "does_not_exist.txt").string();
  CHECK_THROWS_AS(load_rig(broken), Error);
}

TEST_CASE("a clean 1 s capture processes every tuple with exit code 0") {
  TempDir dir("hd_run_test");
  PipelineConfig cfg = make_rig_dir(dir.path, 21);
  RunReport report = run_pipeline(cfg, (dir.path / "capture.hds").string());
  CHECK(report.tuples == 10);
  CHECK(report.processed == 10);
  CHECK(report.errored == 0);
  CHECK(report.exit_code() == 0);

  // The written dataset is valid and carries one sample per tuple.
  dataset::Manifest m = dataset::load_manifest(cfg.output_dir);
  CHECK(m.samples.size() == 10);
  CHECK(dataset::validate_manifest(cfg.output_dir, m).ok());
  for (const auto& s : m.samples) {
    CHECK(s.height == 40);
    CHECK(s.width == 40);
    CHECK(s.channels == 33);
  }

  // Reflectance output is physically plausible (clipped to [0, 1.5]).
  cube::DataCube cube =
      dataset::load_cube_hdz(cfg.output_dir + "/samples/" + m.samples[0].id + "/cube.hdz");
  double lo = 1e9, hi = -1e9;
  for (double v : cube.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo >= 0.0);
  CHECK(hi <= 1.5);
  CHECK(hi > 0.05);
}

TEST_CASE("two runs over the same capture produce identical manifests") {
  TempDir a("hd_det_a"), b("hd_det_b");
  PipelineConfig ca = make_rig_dir(a.path, 33);
  PipelineConfig cb = make_rig_dir(b.path, 33);
  run_pipeline(ca, (a.path / "capture.hds").string());
  run_pipeline(cb, (b.path / "capture.hds").string());
  auto slurp = [](const std::string& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), {});
  };
  CHECK(slurp(ca.output_dir + "/manifest.txt") == slurp(cb.output_dir + "/manifest.txt"));
}

TEST_CASE("downsampling keeps the requested rate") {
  TempDir dir("hd_down_test");
  PipelineConfig cfg = make_rig_dir(dir.path, 44, 2.0);  // 20 tuples at 10 Hz
  cfg.downsample_hz = 2.0;
  RunReport report = run_pipeline(cfg, (dir.path / "capture.hds").string());
  CHECK(report.tuples == 20);
  CHECK(report.processed == 4);
  CHECK(report.exit_code() == 0);
}

TEST_CASE("a truncated capture is reported, not fatal") {
  TempDir dir("hd_trunc_test");
  PipelineConfig cfg = make_rig_dir(dir.path, 55);
  const std::string capture = (dir.path / "capture.hds").string();
  std::filesystem::resize_file(capture, fs::file_size(capture) - 7);
  RunReport report = run_pipeline(cfg, capture);
  CHECK(report.errored >= 1);
  CHECK(report.exit_code() == 1);
  CHECK(report.processed >= 8);  // everything before the damage still lands
  bool logged = false;
  for (const auto& line : report.log)
    if (line.find("truncat") != std::string::npos) logged = true;
  CHECK(logged);
}

TEST_CASE("an empty capture is a clean no-op") {
  TempDir dir("hd_empty_test");
  PipelineConfig cfg = make_rig_dir(dir.path, 66);
  const std::string empty = (dir.path / "empty.hds").string();
  std::ofstream(empty, std::ios::binary).close();
  RunReport report = run_pipeline(cfg, empty);
  CHECK(report.tuples == 0);
  CHECK(report.processed == 0);
  CHECK(report.exit_code() == 0);
}

TEST_CASE("the benchmark reports all five stages and a positive throughput") {
  CHECK_THROWS_AS(bench(32, 3), Error);  // too few frames to time
  BenchReport report = bench(32, 10);
  REQUIRE(report.stages.size() == 5);
  const std::vector<std::string> expect = {"demosaic-interpolate", "spectral-correct",
                                           "undistort", "compose", "reflectance"};
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(report.stages[i].name == expect[i]);
    CHECK(report.stages[i].seconds >= 0.0);
  }
  CHECK(report.cube_mb > 0.0);
  CHECK(report.mb_per_second > 0.0);
  CHECK(report.cubes_per_second > 0.0);
  CHECK(report.serial_demosaic_seconds > 0.0);
  CHECK(report.text().find("demosaic") != std::string::npos);
}

TEST_CASE("worker_threads honors HYPERDRIVE_THREADS") {
  setenv("HYPERDRIVE_THREADS", "3", 1);
  CHECK(worker_threads() == 3);
  unsetenv("HYPERDRIVE_THREADS");
  CHECK(worker_threads() >= 1);
}
