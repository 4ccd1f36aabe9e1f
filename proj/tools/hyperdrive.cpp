#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "hyperdrive/analysis.hpp"
#include "hyperdrive/dataset.hpp"
#include "hyperdrive/pipeline.hpp"
#include "hyperdrive/simgen.hpp"
#include "hyperdrive/wire.hpp"

namespace fs = std::filesystem;
using namespace hyperdrive;

namespace {

std::pair<int, int> parse_size(const std::string& s) {
  auto x = s.find('x');
  if (x == std::string::npos) {
    const int n = std::stoi(s);
    return {n, n};
  }
  return {std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1))};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) fail(Errc::storage, "failed writing " + path);
}

int cmd_simgen(std::uint64_t seed, const std::string& size, const std::string& out_dir,
               int materials, double duration_s, double jitter_ms) {
  auto [h, w] = parse_size(size);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  simgen::RigConfig rig = simgen::RigConfig::test_scale(h);
  rig.out_height = rig.vnir_height = h;
  rig.out_width = rig.vnir_width = w;
  rig.swir_height = h;
  rig.swir_width = w;
  rig.vnir_model = geometry::CameraModel::identity_for(h, w);
  rig.swir_model = geometry::CameraModel::identity_for(h, w);
  rig.validate();
  const simgen::SyntheticScene scene = simgen::generate_scene(seed, h, w, materials);

  mosaic::save_pattern(rig.vnir_pattern, (dir / "vnir_pattern.txt").string());
  mosaic::save_pattern(rig.swir_pattern, (dir / "swir_pattern.txt").string());
  mosaic::save_correction(rig.vnir_correction, (dir / "vnir_correction.txt").string());
  mosaic::save_correction(rig.swir_correction, (dir / "swir_correction.txt").string());
  geometry::save_camera_model(rig.vnir_model, (dir / "vnir_model.txt").string());
  geometry::save_camera_model(rig.swir_model, (dir / "swir_model.txt").string());
  geometry::save_correspondences(
      simgen::make_correspondences(rig.vnir_model, rig.h_vnir, rig.vnir_height, rig.vnir_width),
      (dir / "vnir_correspondences.txt").string());
  geometry::save_correspondences(
      simgen::make_correspondences(rig.swir_model, rig.h_swir, rig.swir_height, rig.swir_width),
      (dir / "swir_correspondences.txt").string());

  // Scene truth: registered RGB, material map, and the spectral tables.
  dataset::Raster3 rgb{h, w, scene.rgb_truth};
  dataset::save_raster3(rgb, (dir / "scene_rgb.raster").string());
  dataset::LabelMask map{h, w, scene.material_map};
  dataset::save_mask(map, (dir / "material_map.raster").string());
  {
    std::ostringstream truth;
    truth.precision(17);
    truth << "seed " << seed << "\nheight " << h << "\nwidth " << w << "\nmaterials "
          << materials << "\ngrid_nm " << simgen::kGridStartNm << " " << simgen::kGridEndNm
          << " " << simgen::kGridSamples << "\n";
    truth << "illumination";
    for (double v : scene.illumination) truth << " " << v;
    truth << "\n";
    for (std::size_t m = 0; m < scene.material_reflectance.size(); ++m) {
      truth << "material " << m;
      for (double v : scene.material_reflectance[m]) truth << " " << v;
      truth << "\n";
    }
    write_text((dir / "truth.txt").string(), truth.str());
  }

  const std::string capture = (dir / "capture.hds").string();
  std::remove(capture.c_str());
  for (const auto& msg : simgen::emit_streams(scene, rig, duration_s, jitter_ms, seed)) {
    const auto* bytes = static_cast<const std::vector<std::byte>*>(msg.payload.get());
    wire::append_capture_record(capture, *bytes);
  }

  pipeline::PipelineConfig cfg;
  cfg.vnir_pattern_path = (dir / "vnir_pattern.txt").string();
  cfg.swir_pattern_path = (dir / "swir_pattern.txt").string();
  cfg.vnir_correction_path = (dir / "vnir_correction.txt").string();
  cfg.swir_correction_path = (dir / "swir_correction.txt").string();
  cfg.vnir_model_path = (dir / "vnir_model.txt").string();
  cfg.swir_model_path = (dir / "swir_model.txt").string();
  cfg.vnir_correspondences_path = (dir / "vnir_correspondences.txt").string();
  cfg.swir_correspondences_path = (dir / "swir_correspondences.txt").string();
  cfg.output_dir = (dir / "dataset").string();
  cfg.out_height = rig.out_height;
  cfg.out_width = rig.out_width;
  cfg.save((dir / "pipeline.cfg").string());

  std::cout << "wrote scene, rig files, and capture to " << out_dir << "\n";
  return 0;
}

int cmd_sync(const std::string& in, double window_ms, const std::string& out_path) {
  sync::SyncPolicy policy;
  policy.required_streams = {"vnir", "rgb", "swir"};
  policy.window_ns = static_cast<std::int64_t>(window_ms * 1e6);
  sync::Synchronizer synchronizer(policy);
  std::vector<sync::SyncTuple> tuples;
  std::size_t bad = 0;
  wire::stream_capture_file(in, [&](const std::vector<std::byte>& record) {
    try {
      sync::TimedMessage msg;
      msg.timestamp_ns = wire::peek_timestamp(record);
      if (wire::classify(record) == wire::MessageKind::cube) {
        const auto dc = wire::decode_cube(record);
        msg.stream_id = dc.cube.channels == 3                 ? "rgb"
                        : dc.cube.wavelengths_nm[0] == 1400.0 ? "swir"
                                                              : "vnir";
      } else {
        msg.stream_id =
            wire::decode_spectrum(record).wavelengths_nm.front() < 600.0 ? "visnir" : "nir";
      }
      msg.payload = std::make_shared<const std::vector<std::byte>>(record);
      auto emitted = synchronizer.push(msg);
      tuples.insert(tuples.end(), emitted.begin(), emitted.end());
    } catch (const Error&) {
      ++bad;
    }
  });

  std::ostringstream manifest;
  manifest << "# pivot_ns stream:timestamp_ns ... [stale streams suffixed *]\n";
  for (const auto& t : tuples) {
    manifest << t.pivot_ns;
    for (const auto& [id, msg] : t.required) manifest << " " << id << ":" << msg.timestamp_ns;
    for (const auto& [id, att] : t.attached)
      manifest << " " << id << ":" << att.msg.timestamp_ns << (att.stale ? "*" : "");
    manifest << "\n";
  }
  const auto c = synchronizer.counters();
  manifest << "# pushed " << c.pushed << " emitted " << c.emitted << " dropped " << c.dropped
           << " buffered " << c.buffered << " undecodable " << bad << "\n";
  if (out_path.empty())
    std::cout << manifest.str();
  else
    write_text(out_path, manifest.str());
  std::cout << tuples.size() << " tuples\n";
  return 0;
}

int cmd_run(pipeline::PipelineConfig cfg, const std::string& capture) {
  const pipeline::RunReport report = pipeline::run_pipeline(cfg, capture);
  for (const auto& line : report.log) std::cout << line << "\n";
  return report.exit_code();
}

int cmd_ingest(std::uint64_t seed, const std::string& size, int count,
               const std::string& out_dir) {
  auto [h, w] = parse_size(size);
  dataset::Ontology ontology = dataset::Ontology::default_atlas();
  dataset::DatasetWriter writer(out_dir, ontology, "");
  for (int i = 0; i < count; ++i) {
    const simgen::SyntheticScene scene = simgen::generate_scene(seed + i, h, w, 4);
    dataset::SampleRecord rec;
    std::ostringstream id;
    id << "synthetic_" << std::setw(6) << std::setfill('0') << i;
    rec.id = id.str();
    rec.timestamp_ns = static_cast<std::int64_t>(i) * 1'000'000'000;
    rec.cube = scene.truth_cube;
    rec.rgb = {h, w, scene.rgb_truth};
    rec.mask.height = h;
    rec.mask.width = w;
    rec.mask.v.resize(scene.material_map.size());
    const int n_labels = static_cast<int>(ontology.entries().size());
    for (std::size_t p = 0; p < rec.mask.v.size(); ++p)
      rec.mask.v[p] = ontology.entries()[scene.material_map[p] % n_labels].index;
    rec.visnir = simgen::render_spectrometer(scene, 256, 500, 1100, 1.0, 1000.0,
                                             rec.timestamp_ns);
    rec.nir = simgen::render_spectrometer(scene, 128, 950, 1700, 1.0, 10000.0,
                                          rec.timestamp_ns);
    rec.tags = {"synthetic", "day", "summer", "clear"};
    writer.write_sample(rec);
  }
  std::cout << "wrote " << count << " synthetic samples to " << out_dir << "\n";
  return 0;
}

int cmd_validate(const std::string& root) {
  const dataset::Manifest manifest = dataset::load_manifest(root);
  const dataset::ValidationReport report = dataset::validate_manifest(root, manifest);
  for (const auto& v : report.violations)
    std::cout << v.sample_id << " " << v.kind << " " << v.detail << "\n";
  std::cout << (report.ok() ? "ok" : "invalid") << " (" << report.violations.size()
            << " violations, " << manifest.samples.size() << " samples)\n";
  return report.ok() ? 0 : 2;
}

int cmd_stats(const std::string& root) {
  const dataset::Manifest manifest = dataset::load_manifest(root);
  const auto stats = dataset::compute_stats(root, manifest);
  std::cout << std::left << std::setw(20) << "level1" << std::setw(16) << "level2"
            << std::setw(10) << "segments" << "images\n";
  for (const auto& [index, s] : stats) {
    const auto& e = manifest.ontology.entry(index);
    std::cout << std::left << std::setw(20) << e.level1 << std::setw(16)
              << (e.level2.empty() ? "-" : e.level2) << std::setw(10) << s.segment_count
              << s.image_count << "\n";
  }
  return 0;
}

int cmd_embed(const std::string& root, const std::string& method, int per_class,
              std::uint64_t seed, double perplexity, int iterations,
              const std::string& report_path, const std::string& coords_prefix) {
  pipeline::apply_thread_env();
  const dataset::Manifest manifest = dataset::load_manifest(root);
  const analysis::PixelSample sample =
      analysis::sample_pixels(root, manifest, per_class, seed);
  for (const auto& w : sample.hsi.warnings) std::cerr << "warning: " << w << "\n";

  auto embed = [&](const analysis::LabeledSpectra& data) {
    if (method == "pca") return analysis::pca_embed(data);
    analysis::TsneOptions opts;
    opts.perplexity = std::min(perplexity, (data.n - 1) / 3.0);
    opts.iterations = iterations;
    opts.seed = seed;
    return analysis::tsne_embed(data, opts).embedding;
  };
  const analysis::Embedding hsi = embed(sample.hsi);
  const analysis::Embedding rgb = embed(sample.rgb);
  const analysis::SeparabilityReport report =
      analysis::separability_report(hsi, rgb, sample.hsi.labels);

  if (!report_path.empty()) write_text(report_path, report.text());
  std::cout << report.text();
  if (!coords_prefix.empty()) {
    auto dump = [&](const analysis::Embedding& emb, const std::string& path) {
      std::ostringstream out;
      out.precision(17);
      out << "# label x y\n";
      for (int i = 0; i < emb.n; ++i)
        out << sample.hsi.labels[i] << " " << emb.x(i) << " " << emb.y(i) << "\n";
      write_text(path, out.str());
    };
    dump(hsi, coords_prefix + "_hsi.txt");
    dump(rgb, coords_prefix + "_rgb.txt");
  }
  return 0;
}

int cmd_bench(int size, int frames) {
  const pipeline::BenchReport report = pipeline::bench(size, frames);
  std::cout << report.text();
  return 0;
}

int cmd_wire_inspect(const std::string& path) {
  std::size_t i = 0;
  wire::stream_capture_file(path, [&](const std::vector<std::byte>& record) {
    std::cout << "record " << i++ << " (" << record.size() << " bytes)\n"
              << wire::describe_message(record);
  });
  std::cout << i << " records\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  pipeline::apply_thread_env();
  CLI::App app{"hyperspectral robotics processing toolkit"};
  app.require_subcommand(1);

  // simgen
  auto* simgen_cmd = app.add_subcommand("simgen", "generate a synthetic scene, rig, and capture");
  std::uint64_t seed = 1;
  std::string size = "64x64", out_dir = "simgen_out";
  int materials = 4;
  double duration_s = 1.0, jitter_ms = 0.0;
  simgen_cmd->add_option("--seed", seed);
  simgen_cmd->add_option("--size", size, "HxW");
  simgen_cmd->add_option("--out", out_dir)->required();
  simgen_cmd->add_option("--materials", materials);
  simgen_cmd->add_option("--duration", duration_s, "capture length in seconds");
  simgen_cmd->add_option("--jitter-ms", jitter_ms);

  // sync
  auto* sync_cmd = app.add_subcommand("sync", "replay a capture through the synchronizer");
  std::string sync_in, sync_out;
  double window_ms = 50.0;
  sync_cmd->add_option("--in", sync_in)->required();
  sync_cmd->add_option("--window-ms", window_ms);
  sync_cmd->add_option("--out", sync_out, "tuple manifest file (default stdout)");

  // run
  auto* run_cmd = app.add_subcommand("run", "process a capture into a dataset");
  std::string run_config, run_capture, run_out;
  double run_window_ms = -1, run_downsample = -1;
  run_cmd->add_option("--config", run_config, "pipeline config file")->required();
  run_cmd->add_option("--capture", run_capture)->required();
  run_cmd->add_option("--out", run_out, "override the configured output dir");
  run_cmd->add_option("--window-ms", run_window_ms, "override the sync window");
  run_cmd->add_option("--downsample-hz", run_downsample, "override the tuple rate cap");

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "write labeled synthetic samples");
  std::uint64_t ingest_seed = 1;
  std::string ingest_size = "32x32", ingest_out;
  int ingest_count = 4;
  ingest_cmd->add_option("--seed", ingest_seed);
  ingest_cmd->add_option("--size", ingest_size, "HxW");
  ingest_cmd->add_option("--count", ingest_count);
  ingest_cmd->add_option("--out", ingest_out)->required();

  // validate / stats
  auto* validate_cmd = app.add_subcommand("validate", "check a dataset against its manifest");
  std::string validate_root;
  validate_cmd->add_option("--root", validate_root)->required();
  auto* stats_cmd = app.add_subcommand("stats", "per-class segment/image statistics");
  std::string stats_root;
  stats_cmd->add_option("--root", stats_root)->required();

  // embed
  auto* embed_cmd = app.add_subcommand("embed", "2-D embedding separability study");
  std::string embed_root, embed_method = "tsne", embed_report, embed_coords;
  int per_class = 200, embed_iters = 1000;
  std::uint64_t embed_seed = 1;
  double perplexity = 30.0;
  embed_cmd->add_option("--root", embed_root)->required();
  embed_cmd->add_option("--method", embed_method)->check(CLI::IsMember({"tsne", "pca"}));
  embed_cmd->add_option("--per-class", per_class);
  embed_cmd->add_option("--seed", embed_seed);
  embed_cmd->add_option("--perplexity", perplexity);
  embed_cmd->add_option("--iterations", embed_iters);
  embed_cmd->add_option("--report", embed_report);
  embed_cmd->add_option("--coords", embed_coords, "prefix for coordinate tables");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "throughput benchmark");
  int bench_size = 128, bench_frames = 100;
  bench_cmd->add_option("--size", bench_size);
  bench_cmd->add_option("--frames", bench_frames);

  // wire inspect
  auto* wire_cmd = app.add_subcommand("wire", "wire-format utilities");
  wire_cmd->require_subcommand(1);
  auto* inspect_cmd = wire_cmd->add_subcommand("inspect", "dump capture record headers");
  std::string inspect_file;
  inspect_cmd->add_option("file", inspect_file)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simgen_cmd) return cmd_simgen(seed, size, out_dir, materials, duration_s, jitter_ms);
    if (*sync_cmd) return cmd_sync(sync_in, window_ms, sync_out);
    if (*run_cmd) {
      pipeline::PipelineConfig cfg = pipeline::PipelineConfig::load(run_config);
      if (!run_out.empty()) cfg.output_dir = run_out;  // flags win over the config file
      if (run_window_ms >= 0) cfg.sync_window_ns = static_cast<std::int64_t>(run_window_ms * 1e6);
      if (run_downsample >= 0) cfg.downsample_hz = run_downsample;
      return cmd_run(cfg, run_capture);
    }
    if (*ingest_cmd) return cmd_ingest(ingest_seed, ingest_size, ingest_count, ingest_out);
    if (*validate_cmd) return cmd_validate(validate_root);
    if (*stats_cmd) return cmd_stats(stats_root);
    if (*embed_cmd)
      return cmd_embed(embed_root, embed_method, per_class, embed_seed, perplexity, embed_iters,
                       embed_report, embed_coords);
    if (*bench_cmd) return cmd_bench(bench_size, bench_frames);
    if (*inspect_cmd) return cmd_wire_inspect(inspect_file);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
