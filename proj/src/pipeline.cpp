#include "hyperdrive/pipeline.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "hyperdrive/cube.hpp"
#include "hyperdrive/radiometry.hpp"
#include "hyperdrive/sync.hpp"
#include "hyperdrive/wire.hpp"

namespace fs = std::filesystem;

namespace hyperdrive::pipeline {

int worker_threads() {
  if (const char* env = std::getenv("HYPERDRIVE_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void apply_thread_env() {
#ifdef _OPENMP
  if (std::getenv("HYPERDRIVE_THREADS")) omp_set_num_threads(worker_threads());
#endif
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::storage, "cannot open pipeline config: " + path);
  PipelineConfig c;
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    auto h = line.find('#');
    if (h != std::string::npos) line.erase(h);
    std::istringstream ss(line);
    std::string key, value;
    if (ss >> key >> value) kv[key] = value;
  }
  std::set<std::string> known = {"vnir-pattern",  "swir-pattern",
                                 "vnir-correction", "swir-correction",
                                 "vnir-model",    "swir-model",
                                 "vnir-correspondences", "swir-correspondences",
                                 "ontology",      "out",
                                 "out-height",    "out-width",
                                 "window-ms",     "downsample-hz",
                                 "biome",         "time-of-day",
                                 "season",        "weather"};
  for (const auto& [key, value] : kv)
    if (!known.count(key))
      fail(Errc::configuration, "unknown pipeline config key: " + key);
  auto str = [&](const char* key, std::string* dst) {
    auto it = kv.find(key);
    if (it != kv.end()) *dst = it->second;
  };
  str("vnir-pattern", &c.vnir_pattern_path);
  str("swir-pattern", &c.swir_pattern_path);
  str("vnir-correction", &c.vnir_correction_path);
  str("swir-correction", &c.swir_correction_path);
  str("vnir-model", &c.vnir_model_path);
  str("swir-model", &c.swir_model_path);
  str("vnir-correspondences", &c.vnir_correspondences_path);
  str("swir-correspondences", &c.swir_correspondences_path);
  str("ontology", &c.ontology_path);
  str("out", &c.output_dir);
  str("biome", &c.tags.biome);
  str("time-of-day", &c.tags.time_of_day);
  str("season", &c.tags.season);
  str("weather", &c.tags.weather);
  if (kv.count("out-height")) c.out_height = std::stoi(kv["out-height"]);
  if (kv.count("out-width")) c.out_width = std::stoi(kv["out-width"]);
  if (kv.count("window-ms")) c.sync_window_ns = static_cast<std::int64_t>(
      std::stod(kv["window-ms"]) * 1e6);
  if (kv.count("downsample-hz")) c.downsample_hz = std::stod(kv["downsample-hz"]);
  return c;
}

void PipelineConfig::save(const std::string& path) const {
  std::ofstream out(path);
  out << "vnir-pattern " << vnir_pattern_path << "\n"
      << "swir-pattern " << swir_pattern_path << "\n"
      << "vnir-correction " << vnir_correction_path << "\n"
      << "swir-correction " << swir_correction_path << "\n"
      << "vnir-model " << vnir_model_path << "\n"
      << "swir-model " << swir_model_path << "\n"
      << "vnir-correspondences " << vnir_correspondences_path << "\n"
      << "swir-correspondences " << swir_correspondences_path << "\n";
  if (!ontology_path.empty()) out << "ontology " << ontology_path << "\n";
  out << "out " << output_dir << "\n"
      << "out-height " << out_height << "\n"
      << "out-width " << out_width << "\n"
      << "window-ms " << sync_window_ns / 1e6 << "\n"
      << "downsample-hz " << downsample_hz << "\n"
      << "biome " << tags.biome << "\n"
      << "time-of-day " << tags.time_of_day << "\n"
      << "season " << tags.season << "\n"
      << "weather " << tags.weather << "\n";
  if (!out) fail(Errc::storage, "failed writing pipeline config: " + path);
}

LoadedRig load_rig(const PipelineConfig& config) {
  if (config.out_height < 1 || config.out_width < 1)
    fail(Errc::configuration, "pipeline config needs positive output dimensions");
  if (config.output_dir.empty()) fail(Errc::configuration, "pipeline config needs an output dir");
  LoadedRig rig;
  rig.vnir_pattern = mosaic::load_pattern(config.vnir_pattern_path);
  rig.swir_pattern = mosaic::load_pattern(config.swir_pattern_path);
  rig.vnir_correction = mosaic::load_correction(config.vnir_correction_path);
  rig.swir_correction = mosaic::load_correction(config.swir_correction_path);
  rig.vnir_model = geometry::load_camera_model(config.vnir_model_path);
  rig.swir_model = geometry::load_camera_model(config.swir_model_path);
  rig.h_vnir = geometry::estimate_homography(
                   geometry::load_correspondences(config.vnir_correspondences_path))
                   .h;
  rig.h_swir = geometry::estimate_homography(
                   geometry::load_correspondences(config.swir_correspondences_path))
                   .h;
  rig.ontology = config.ontology_path.empty() ? dataset::Ontology::default_atlas()
                                              : dataset::Ontology::load(config.ontology_path);
  return rig;
}

namespace {

using BytesPtr = std::shared_ptr<const std::vector<std::byte>>;

const std::vector<std::byte>& payload_bytes(const sync::TimedMessage& msg) {
  if (!msg.payload) fail(Errc::invalid_argument, "tuple message has no payload");
  return *static_cast<const std::vector<std::byte>*>(msg.payload.get());
}

/// Stream name from message contents (rule documented in docs/wire.md).
std::string classify_stream(const std::vector<std::byte>& bytes) {
  if (wire::classify(bytes) == wire::MessageKind::cube) {
    const wire::DecodedCube dc = wire::decode_cube(bytes);
    if (dc.cube.channels == 3) return "rgb";
    if (dc.cube.channels == 1 && dc.cube.wavelengths_nm[0] == 780.0) return "vnir";
    if (dc.cube.channels == 1 && dc.cube.wavelengths_nm[0] == 1400.0) return "swir";
    fail(Errc::format, "cube message does not match any known stream");
  }
  const radiometry::SpectrometerReading r = wire::decode_spectrum(bytes);
  return r.wavelengths_nm.front() < 600.0 ? "visnir" : "nir";
}

mosaic::MosaicFrame to_mosaic_frame(const cube::DataCube& c) {
  if (c.channels != 1) fail(Errc::format, "mosaic message must have a single channel");
  mosaic::MosaicFrame f;
  f.height = c.height;
  f.width = c.width;
  f.timestamp_ns = c.timestamp_ns;
  f.values = c.data;
  return f;
}

mosaic::BandStack undistort_stack(const mosaic::BandStack& stack,
                                  const geometry::CameraModel& model) {
  mosaic::BandStack out = stack;
  if (model.k1 == 0 && model.k2 == 0) return out;
  for (auto& band : out.bands) band = geometry::undistort_plane(band, model);
  return out;
}

}  // namespace

dataset::SampleRecord process_tuple(const LoadedRig& rig, const PipelineConfig& config,
                                    const sync::SyncTuple& tuple, const std::string& id) {
  auto required = [&](const char* stream) -> const sync::TimedMessage& {
    auto it = tuple.required.find(stream);
    if (it == tuple.required.end())
      fail(Errc::configuration, std::string("tuple lacks required stream ") + stream);
    return it->second;
  };
  auto attached = [&](const char* stream) -> const sync::TimedMessage& {
    auto it = tuple.attached.find(stream);
    if (it == tuple.attached.end())
      fail(Errc::validation, std::string("no white-reference packet attached for ") + stream);
    return it->second.msg;
  };

  const wire::DecodedCube rgb_msg = wire::decode_cube(payload_bytes(required("rgb")));
  const mosaic::MosaicFrame vnir_frame =
      to_mosaic_frame(wire::decode_cube(payload_bytes(required("vnir"))).cube);
  const mosaic::MosaicFrame swir_frame =
      to_mosaic_frame(wire::decode_cube(payload_bytes(required("swir"))).cube);
  const radiometry::SpectrometerReading visnir =
      wire::decode_spectrum(payload_bytes(attached("visnir")));
  const radiometry::SpectrometerReading nir =
      wire::decode_spectrum(payload_bytes(attached("nir")));

  mosaic::BandStack vnir = mosaic::demosaic(vnir_frame, rig.vnir_pattern, rig.vnir_correction);
  mosaic::BandStack swir = mosaic::demosaic(swir_frame, rig.swir_pattern, rig.swir_correction);
  vnir = undistort_stack(vnir, rig.vnir_model);
  swir = undistort_stack(swir, rig.swir_model);

  cube::DataCube composed = cube::compose(vnir, swir, rig.h_vnir, rig.h_swir,
                                          config.out_height, config.out_width);
  const radiometry::WhiteReference white = radiometry::stitch(visnir, nir, 950.0);
  cube::DataCube reflectance = radiometry::to_reflectance(composed, white, {});

  dataset::SampleRecord record;
  record.id = id;
  record.timestamp_ns = tuple.pivot_ns;
  record.cube = std::move(reflectance);
  record.visnir = visnir;
  record.nir = nir;
  record.tags = config.tags;
  // Registered RGB raster in R,G,B channel order (wire order is ascending
  // wavelength, i.e. B,G,R).
  record.rgb.height = config.out_height;
  record.rgb.width = config.out_width;
  record.rgb.v.assign(static_cast<std::size_t>(config.out_height) * config.out_width * 3, 0.0);
  if (rgb_msg.cube.height != config.out_height || rgb_msg.cube.width != config.out_width)
    fail(Errc::validation, "RGB frame dimensions disagree with the output raster");
  for (int r = 0; r < config.out_height; ++r)
    for (int c = 0; c < config.out_width; ++c)
      for (int ch = 0; ch < 3; ++ch)
        record.rgb.v[(static_cast<std::size_t>(r) * config.out_width + c) * 3 + ch] =
            rgb_msg.cube.at(r, c, 2 - ch);
  // Without an annotation source every pixel carries the ontology's first
  // (unrefined) label; masks can be replaced after ingest.
  record.mask.height = config.out_height;
  record.mask.width = config.out_width;
  record.mask.v.assign(static_cast<std::size_t>(config.out_height) * config.out_width,
                       rig.ontology.entries().front().index);
  return record;
}

RunReport run_pipeline(const PipelineConfig& config, const std::string& capture_file) {
  apply_thread_env();
  const LoadedRig rig = load_rig(config);  // config errors abort before processing
  RunReport report;

  sync::SyncPolicy policy;
  policy.required_streams = {"vnir", "rgb", "swir"};
  policy.window_ns = config.sync_window_ns;
  sync::Synchronizer synchronizer(policy);

  std::vector<sync::SyncTuple> tuples;
  wire::CaptureReader reader(capture_file);
  for (;;) {
    std::optional<std::vector<std::byte>> record;
    try {
      record = reader.next();
    } catch (const Error& e) {
      ++report.errored;
      report.log.push_back(std::string("capture read error: ") + e.what());
      break;  // a truncated record ends the file
    }
    if (!record) break;
    try {
      sync::TimedMessage msg;
      msg.stream_id = classify_stream(*record);
      msg.timestamp_ns = wire::peek_timestamp(*record);
      msg.payload = std::make_shared<const std::vector<std::byte>>(std::move(*record));
      auto emitted = synchronizer.push(msg);
      tuples.insert(tuples.end(), std::make_move_iterator(emitted.begin()),
                    std::make_move_iterator(emitted.end()));
    } catch (const Error& e) {
      ++report.errored;
      report.log.push_back(std::string("message error: ") + e.what());
    }
  }
  report.tuples = tuples.size();
  if (config.downsample_hz > 0)
    tuples = sync::downsample(tuples, config.downsample_hz, config.sync_window_ns);
  report.dropped = synchronizer.counters().dropped;

  fs::create_directories(config.output_dir);
  dataset::DatasetWriter writer(config.output_dir, rig.ontology, "");

  // Frame-level parallelism; manifest writes stay serialized in pivot order.
  const int n = static_cast<int>(tuples.size());
  std::vector<dataset::SampleRecord> records(n);
  std::vector<std::string> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    std::ostringstream id;
    id << "sample_" << std::setw(6) << std::setfill('0') << i;
    try {
      records[i] = process_tuple(rig, config, tuples[i], id.str());
    } catch (const Error& e) {
      errors[i] = e.what();
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (int i = 0; i < n; ++i) {
    if (!errors[i].empty()) {
      ++report.errored;
      report.log.push_back("tuple " + std::to_string(i) + " failed: " + errors[i]);
      continue;
    }
    try {
      writer.write_sample(records[i]);
      ++report.processed;
    } catch (const Error& e) {
      ++report.errored;
      report.log.push_back("tuple " + std::to_string(i) + " write failed: " + e.what());
    }
  }
  std::ostringstream summary;
  summary << "processed " << report.processed << " dropped " << report.dropped << " errored "
          << report.errored;
  report.log.push_back(summary.str());
  return report;
}

std::string BenchReport::text() const {
  std::ostringstream out;
  out << "benchmark: " << frames << " frames at " << size << "x" << size << "\n";
  for (const auto& s : stages) {
    const double rate = s.seconds > 0 ? s.mb / s.seconds : 0;
    out << "  stage " << s.name << ": " << s.seconds << " s, " << rate << " MB/s\n";
  }
  out << "  demosaic serial:   " << serial_demosaic_seconds << " s\n";
  out << "  demosaic parallel: " << parallel_demosaic_seconds << " s\n";
  out << "  composite cube: " << cube_mb << " MB\n";
  out << "  demosaic+compose throughput: " << mb_per_second << " MB/s (" << cubes_per_second
      << " cubes/s)\n";
  return out.str();
}

BenchReport bench(int size, int frames) {
  if (frames < 10) fail(Errc::invalid_argument, "bench needs at least 10 frames");
  apply_thread_env();
  using clock = std::chrono::steady_clock;
  auto secs = [](clock::time_point a, clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
  };

  simgen::RigConfig rig = simgen::RigConfig::test_scale(size);
  const simgen::SyntheticScene scene = simgen::generate_scene(7, size, size, 4);
  const mosaic::MosaicFrame vnir_frame = simgen::render_mosaic(
      scene, rig.vnir_pattern, rig.vnir_model, rig.h_vnir, rig.vnir_height, rig.vnir_width);
  const mosaic::MosaicFrame swir_frame = simgen::render_mosaic(
      scene, rig.swir_pattern, rig.swir_model, rig.h_swir, rig.swir_height, rig.swir_width);
  const radiometry::WhiteReference white = radiometry::stitch(
      simgen::render_spectrometer(scene, 256, 500, 1100, 1.0, 1000.0, 0),
      simgen::render_spectrometer(scene, 128, 950, 1700, rig.nir_gain, 10000.0, 0), 950.0);

  BenchReport report;
  report.frames = frames;
  report.size = size;
  const double raw_mb = (vnir_frame.values.size() + swir_frame.values.size()) * 8.0 / 1e6;

  double t_interp = 0, t_correct = 0, t_undistort = 0, t_compose = 0, t_reflect = 0;
  double cube_mb = 0;
  for (int i = 0; i < frames; ++i) {
    auto t0 = clock::now();
    mosaic::BandStack vnir_raw = mosaic::demosaic_raw(vnir_frame, rig.vnir_pattern);
    mosaic::BandStack swir_raw = mosaic::demosaic_raw(swir_frame, rig.swir_pattern);
    auto t1 = clock::now();
    mosaic::BandStack vnir = mosaic::apply_spectral_correction(vnir_raw, rig.vnir_correction);
    mosaic::BandStack swir = mosaic::apply_spectral_correction(swir_raw, rig.swir_correction);
    auto t2 = clock::now();
    for (auto& band : vnir.bands) band = geometry::undistort_plane(band, rig.vnir_model);
    for (auto& band : swir.bands) band = geometry::undistort_plane(band, rig.swir_model);
    auto t3 = clock::now();
    cube::DataCube composed =
        cube::compose(vnir, swir, rig.h_vnir, rig.h_swir, rig.out_height, rig.out_width);
    auto t4 = clock::now();
    cube::DataCube reflect = radiometry::to_reflectance(composed, white, {});
    auto t5 = clock::now();
    t_interp += secs(t0, t1);
    t_correct += secs(t1, t2);
    t_undistort += secs(t2, t3);
    t_compose += secs(t3, t4);
    t_reflect += secs(t4, t5);
    cube_mb = composed.data.size() * 8.0 / 1e6;
  }

  auto ts0 = clock::now();
  mosaic::BandStack serial =
      mosaic::ref::demosaic(vnir_frame, rig.vnir_pattern, rig.vnir_correction);
  auto ts1 = clock::now();
  mosaic::BandStack parallel =
      mosaic::demosaic(vnir_frame, rig.vnir_pattern, rig.vnir_correction);
  auto ts2 = clock::now();
  (void)serial;
  (void)parallel;
  report.serial_demosaic_seconds = secs(ts0, ts1);
  report.parallel_demosaic_seconds = secs(ts1, ts2);

  report.stages = {{"demosaic-interpolate", t_interp, frames * raw_mb},
                   {"spectral-correct", t_correct, frames * cube_mb},
                   {"undistort", t_undistort, frames * cube_mb},
                   {"compose", t_compose, frames * cube_mb},
                   {"reflectance", t_reflect, frames * cube_mb}};
  report.cube_mb = cube_mb;
  const double pipeline_s = t_interp + t_correct + t_compose;
  report.cubes_per_second = pipeline_s > 0 ? frames / pipeline_s : 0;
  report.mb_per_second = report.cubes_per_second * cube_mb;
  return report;
}

}  // namespace hyperdrive::pipeline
