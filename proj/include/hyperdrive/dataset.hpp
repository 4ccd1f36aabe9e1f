#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hyperdrive/cube.hpp"
#include "hyperdrive/radiometry.hpp"

namespace hyperdrive::dataset {

/// Hierarchical ATLAS-style label registry loaded from an editable text
/// table. Each registered (level1, level2) pair owns a stable integer index
/// used as the mask pixel value.
class Ontology {
 public:
  struct Entry {
    int index;
    std::string level1;
    std::string level2;  // empty when the class has no refinement
  };

  void register_label(int index, const std::string& level1, const std::string& level2 = "");
  bool has_index(int index) const;
  const Entry& entry(int index) const;
  std::optional<int> find(const std::string& level1, const std::string& level2 = "") const;
  const std::vector<Entry>& entries() const { return entries_; }

  static Ontology load(const std::string& path);
  void save(const std::string& path) const;
  /// The shipped ATLAS table (paths, vegetation, obstacles, person, ...).
  static Ontology default_atlas();

 private:
  std::vector<Entry> entries_;
  std::map<int, std::size_t> by_index_;
};

struct SceneTags {
  std::string biome, time_of_day, season, weather;
  void validate() const;  // all four present
};

/// 3-channel lossless raster for the registered RGB image.
struct Raster3 {
  int height = 0, width = 0;
  std::vector<double> v;  // H x W x 3
};

struct LabelMask {
  int height = 0, width = 0;
  std::vector<std::int32_t> v;
  std::int32_t at(int r, int c) const { return v[static_cast<std::size_t>(r) * width + c]; }
};

struct SampleRecord {
  std::string id;
  cube::DataCube cube;
  Raster3 rgb;
  radiometry::SpectrometerReading visnir;
  radiometry::SpectrometerReading nir;
  LabelMask mask;
  SceneTags tags;
  std::int64_t timestamp_ns = 0;
};

struct FileEntry {
  std::string name;
  std::uint32_t crc32 = 0;
  std::uint64_t bytes = 0;
};

struct ManifestEntry {
  std::string id;
  std::int64_t timestamp_ns = 0;
  int height = 0, width = 0, channels = 0;
  SceneTags tags;
  std::vector<FileEntry> files;
};

struct Manifest {
  std::vector<ManifestEntry> samples;
  Ontology ontology;
  std::string rig_hash;
};

struct Violation {
  std::string sample_id;
  std::string kind;  // missing-file | checksum | dims | label | tags | duplicate-id
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

struct ClassStats {
  std::size_t segment_count = 0;  // 4-connected components across all masks
  std::size_t image_count = 0;    // samples containing the label
};

/// Exclusive writer over a dataset directory (lock file); samples are
/// written atomically (temp + rename) and appended to manifest.txt.
class DatasetWriter {
 public:
  DatasetWriter(const std::string& root, Ontology ontology, std::string rig_hash);
  ~DatasetWriter();
  DatasetWriter(const DatasetWriter&) = delete;
  DatasetWriter& operator=(const DatasetWriter&) = delete;

  ManifestEntry write_sample(const SampleRecord& record);
  const Manifest& manifest() const { return manifest_; }

 private:
  std::string root_;
  std::string lock_path_;
  Manifest manifest_;
};

Manifest load_manifest(const std::string& root);
ValidationReport validate_manifest(const std::string& root, const Manifest& manifest);

/// Summary statistics: per registered label, segment and image counts.
std::map<int, ClassStats> compute_stats(const std::string& root, const Manifest& manifest);

// Individual sample file I/O (formats documented in docs/formats.md).
void save_cube_hdz(const cube::DataCube& cube, const std::string& path);
cube::DataCube load_cube_hdz(const std::string& path);
void save_raster3(const Raster3& r, const std::string& path);
Raster3 load_raster3(const std::string& path);
void save_mask(const LabelMask& m, const std::string& path);
LabelMask load_mask(const std::string& path);
void save_spectrum_arr(const radiometry::SpectrometerReading& r, const std::string& path);
radiometry::SpectrometerReading load_spectrum_arr(const std::string& path);

std::uint32_t file_crc32(const std::string& path);

/// 4-connected component count of `label` within one mask.
std::size_t count_segments(const LabelMask& mask, std::int32_t label);

}  // namespace hyperdrive::dataset
