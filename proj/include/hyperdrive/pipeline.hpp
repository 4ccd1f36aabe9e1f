#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hyperdrive/dataset.hpp"
#include "hyperdrive/geometry.hpp"
#include "hyperdrive/mosaic.hpp"
#include "hyperdrive/simgen.hpp"

namespace hyperdrive::pipeline {

/// Worker-pool width: HYPERDRIVE_THREADS when set, else the OpenMP default.
int worker_threads();
void apply_thread_env();

/// End-to-end processing configuration. Every path is validated (file
/// exists, contents parse) before any frame is touched.
struct PipelineConfig {
  std::string vnir_pattern_path, swir_pattern_path;
  std::string vnir_correction_path, swir_correction_path;
  std::string vnir_model_path, swir_model_path;
  std::string vnir_correspondences_path, swir_correspondences_path;
  std::string ontology_path;  // optional; default ATLAS table when empty
  std::string output_dir;
  int out_height = 0, out_width = 0;
  std::int64_t sync_window_ns = 50'000'000;
  double downsample_hz = 0;  // 0 = keep every tuple
  dataset::SceneTags tags{"unspecified", "unspecified", "unspecified", "unspecified"};

  /// "key value" lines, '#' comments; keys match the flag names.
  static PipelineConfig load(const std::string& path);
  void save(const std::string& path) const;
};

/// Config with every referenced file parsed, ready to process frames.
struct LoadedRig {
  mosaic::MosaicPattern vnir_pattern, swir_pattern;
  mosaic::SpectralCorrectionMatrix vnir_correction, swir_correction;
  geometry::CameraModel vnir_model, swir_model;
  geometry::Homography h_vnir, h_swir;
  dataset::Ontology ontology;
};

/// Parse + validate everything `config` references. Throws on any problem;
/// nothing is processed afterwards if this fails.
LoadedRig load_rig(const PipelineConfig& config);

struct RunReport {
  std::size_t tuples = 0;     // synchronized tuples seen
  std::size_t processed = 0;  // samples written
  std::size_t dropped = 0;    // sync-level message drops
  std::size_t errored = 0;    // tuples skipped on per-frame errors
  std::vector<std::string> log;

  /// CLI exit code: 0 clean, 1 when any frame errored.
  int exit_code() const { return errored == 0 ? 0 : 1; }
};

/// Replay a capture file through sync -> demosaic -> undistort -> compose ->
/// reflectance -> dataset write. Per-frame errors are logged and skipped.
RunReport run_pipeline(const PipelineConfig& config, const std::string& capture_file);

/// Process one already-synchronized tuple into a SampleRecord.
dataset::SampleRecord process_tuple(const LoadedRig& rig, const PipelineConfig& config,
                                    const sync::SyncTuple& tuple, const std::string& id);

struct StageTiming {
  std::string name;
  double seconds = 0;
  double mb = 0;  // data volume attributed to the stage
};

struct BenchReport {
  int frames = 0;
  int size = 0;
  std::vector<StageTiming> stages;         // demosaic, correct, undistort, compose, reflectance
  double serial_demosaic_seconds = 0;      // ref:: kernel on the same workload
  double parallel_demosaic_seconds = 0;
  double cube_mb = 0;        // one composed cube, in MB
  double cubes_per_second = 0;
  double mb_per_second = 0;  // demosaic+compose throughput in output bytes
  std::string text() const;
};

/// Deterministic in-memory throughput benchmark on synthetic frames.
BenchReport bench(int size, int frames);

}  // namespace hyperdrive::pipeline
