#include "hyperdrive/dataset.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <queue>
#include <sstream>

namespace fs = std::filesystem;

namespace hyperdrive::dataset {

// ---- ontology ----

void Ontology::register_label(int index, const std::string& level1, const std::string& level2) {
  if (by_index_.count(index)) fail(Errc::invalid_argument, "duplicate ontology index");
  if (level1.empty()) fail(Errc::invalid_argument, "ontology level1 must not be empty");
  by_index_[index] = entries_.size();
  entries_.push_back({index, level1, level2});
}

bool Ontology::has_index(int index) const { return by_index_.count(index) != 0; }

const Ontology::Entry& Ontology::entry(int index) const {
  auto it = by_index_.find(index);
  if (it == by_index_.end()) fail(Errc::invalid_argument, "unregistered ontology index");
  return entries_[it->second];
}

std::optional<int> Ontology::find(const std::string& level1, const std::string& level2) const {
  for (const auto& e : entries_)
    if (e.level1 == level1 && e.level2 == level2) return e.index;
  return std::nullopt;
}

Ontology Ontology::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::storage, "cannot open ontology file: " + path);
  Ontology o;
  std::string line;
  while (std::getline(in, line)) {
    auto h = line.find('#');
    if (h != std::string::npos) line.erase(h);
    std::istringstream ss(line);
    int index;
    std::string l1, l2;
    if (ss >> index >> l1) {
      ss >> l2;
      if (l2 == "-") l2.clear();
      o.register_label(index, l1, l2);
    }
  }
  return o;
}

void Ontology::save(const std::string& path) const {
  std::ofstream out(path);
  out << "# index level1 level2\n";
  for (const auto& e : entries_)
    out << e.index << " " << e.level1 << " " << (e.level2.empty() ? "-" : e.level2) << "\n";
  if (!out) fail(Errc::storage, "failed writing ontology file: " + path);
}

Ontology Ontology::default_atlas() {
  Ontology o;
  int i = 0;
  o.register_label(i++, "landscape_path");  // unrefined catch-all terrain
  for (const char* l2 : {"dirt", "rock_gravel", "paved", "concrete"})
    o.register_label(i++, "landscape_path", l2);
  for (const char* l2 : {"ground_cover", "bush_tree", "leaves_mulch"})
    o.register_label(i++, "vegetation", l2);
  o.register_label(i++, "animal");
  o.register_label(i++, "person");
  for (const char* l2 : {"vehicle", "infrastructure", "road_signage"})
    o.register_label(i++, "obstacle", l2);
  o.register_label(i++, "atmospheric");
  return o;
}

void SceneTags::validate() const {
  if (biome.empty() || time_of_day.empty() || season.empty() || weather.empty())
    fail(Errc::validation, "scene tags require biome, time_of_day, season, weather");
}

// ---- low-level binary helpers ----

namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_f64(std::vector<unsigned char>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

class BinReader {
 public:
  explicit BinReader(std::vector<unsigned char> data) : data_(std::move(data)) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  void bytes(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, data_.data() + pos_, n);
    pos_ += n;
  }
  void magic(const char* m) {
    char got[4];
    bytes(got, 4);
    if (std::memcmp(got, m, 4) != 0) fail(Errc::format, "bad file magic");
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) {
    if (pos_ + n > data_.size()) fail(Errc::length, "file truncated");
  }
  std::vector<unsigned char> data_;
  std::size_t pos_ = 0;
};

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::storage, "cannot open file: " + path);
  std::vector<unsigned char> data((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return data;
}

/// Atomic write: temp file in the same directory, then rename.
void write_file_atomic(const std::string& path, const void* data, std::size_t size) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::storage, "cannot open for write: " + tmp);
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out) {
      std::remove(tmp.c_str());
      fail(Errc::storage, "write failed: " + tmp);
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    std::remove(tmp.c_str());
    fail(Errc::storage, "rename failed: " + path + " (" + ec.message() + ")");
  }
}

std::vector<unsigned char> deflate_bytes(const unsigned char* data, std::size_t size) {
  uLongf bound = compressBound(static_cast<uLong>(size));
  std::vector<unsigned char> out(bound);
  if (compress2(out.data(), &bound, data, static_cast<uLong>(size), Z_BEST_SPEED) != Z_OK)
    fail(Errc::storage, "deflate failed");
  out.resize(bound);
  return out;
}

std::vector<unsigned char> inflate_bytes(const unsigned char* data, std::size_t size,
                                         std::size_t raw_size) {
  std::vector<unsigned char> out(raw_size);
  uLongf len = static_cast<uLongf>(raw_size);
  if (uncompress(out.data(), &len, data, static_cast<uLong>(size)) != Z_OK || len != raw_size)
    fail(Errc::format, "inflate failed or size mismatch");
  return out;
}

void append_compressed_block(std::vector<unsigned char>& out, const void* data,
                             std::size_t size) {
  auto comp = deflate_bytes(static_cast<const unsigned char*>(data), size);
  put_u32(out, static_cast<std::uint32_t>(comp.size()));
  put_u32(out, static_cast<std::uint32_t>(size));
  out.insert(out.end(), comp.begin(), comp.end());
}

std::vector<unsigned char> read_compressed_block(BinReader& r) {
  const std::uint32_t comp_len = r.u32();
  const std::uint32_t raw_len = r.u32();
  std::vector<unsigned char> comp(comp_len);
  r.bytes(comp.data(), comp_len);
  return inflate_bytes(comp.data(), comp.size(), raw_len);
}

}  // namespace

// ---- sample files ----
// cube.hdz: "HDZ1", u32 h/w/c, u64 timestamp, f64 wavelengths[c], f64
// fwhm[c], u8 flags, then per-plane deflate blocks (row-major f64 planes),
// then the validity mask and band_valid blocks.

void save_cube_hdz(const cube::DataCube& cube, const std::string& path) {
  if (cube.height <= 0 || cube.width <= 0 || cube.channels <= 0)
    fail(Errc::invalid_argument, "cannot store an empty cube");
  std::vector<unsigned char> out;
  out.insert(out.end(), {'H', 'D', 'Z', '1'});
  put_u32(out, static_cast<std::uint32_t>(cube.height));
  put_u32(out, static_cast<std::uint32_t>(cube.width));
  put_u32(out, static_cast<std::uint32_t>(cube.channels));
  put_u64(out, static_cast<std::uint64_t>(cube.timestamp_ns));
  for (double w : cube.wavelengths_nm) put_f64(out, w);
  for (double w : cube.fwhm_nm) put_f64(out, w);
  out.push_back(1);  // layout flags: mask + band_valid present

  const std::size_t npx = static_cast<std::size_t>(cube.height) * cube.width;
  std::vector<double> plane(npx);
  for (int ch = 0; ch < cube.channels; ++ch) {
    for (std::size_t p = 0; p < npx; ++p) plane[p] = cube.data[p * cube.channels + ch];
    append_compressed_block(out, plane.data(), npx * sizeof(double));
  }
  append_compressed_block(out, cube.validity.v.data(), cube.validity.v.size());
  append_compressed_block(out, cube.band_valid.data(), cube.band_valid.size());
  write_file_atomic(path, out.data(), out.size());
}

cube::DataCube load_cube_hdz(const std::string& path) {
  BinReader r(read_file(path));
  r.magic("HDZ1");
  const int h = static_cast<int>(r.u32());
  const int w = static_cast<int>(r.u32());
  const int c = static_cast<int>(r.u32());
  if (h <= 0 || w <= 0 || c <= 0) fail(Errc::format, "bad cube dimensions");
  cube::DataCube cube(h, w, c);
  cube.timestamp_ns = static_cast<std::int64_t>(r.u64());
  for (int i = 0; i < c; ++i) cube.wavelengths_nm[i] = r.f64();
  for (int i = 0; i < c; ++i) cube.fwhm_nm[i] = r.f64();
  unsigned char flags;
  r.bytes(&flags, 1);
  if (flags != 1) fail(Errc::format, "unsupported cube layout flags");
  const std::size_t npx = static_cast<std::size_t>(h) * w;
  for (int ch = 0; ch < c; ++ch) {
    auto raw = read_compressed_block(r);
    if (raw.size() != npx * sizeof(double)) fail(Errc::format, "plane size mismatch");
    const double* vals = reinterpret_cast<const double*>(raw.data());
    for (std::size_t p = 0; p < npx; ++p) cube.data[p * c + ch] = vals[p];
  }
  auto mask = read_compressed_block(r);
  if (mask.size() != npx) fail(Errc::format, "mask size mismatch");
  std::copy(mask.begin(), mask.end(), cube.validity.v.begin());
  auto bv = read_compressed_block(r);
  if (bv.size() != static_cast<std::size_t>(c)) fail(Errc::format, "band_valid size mismatch");
  std::copy(bv.begin(), bv.end(), cube.band_valid.begin());
  return cube;
}

void save_raster3(const Raster3& rr, const std::string& path) {
  std::vector<unsigned char> out;
  out.insert(out.end(), {'H', 'D', 'R', '1'});
  put_u32(out, static_cast<std::uint32_t>(rr.height));
  put_u32(out, static_cast<std::uint32_t>(rr.width));
  append_compressed_block(out, rr.v.data(), rr.v.size() * sizeof(double));
  write_file_atomic(path, out.data(), out.size());
}

Raster3 load_raster3(const std::string& path) {
  BinReader r(read_file(path));
  r.magic("HDR1");
  Raster3 out;
  out.height = static_cast<int>(r.u32());
  out.width = static_cast<int>(r.u32());
  auto raw = read_compressed_block(r);
  const std::size_t n = static_cast<std::size_t>(out.height) * out.width * 3;
  if (raw.size() != n * sizeof(double)) fail(Errc::format, "raster size mismatch");
  out.v.resize(n);
  std::memcpy(out.v.data(), raw.data(), raw.size());
  return out;
}

void save_mask(const LabelMask& m, const std::string& path) {
  std::vector<unsigned char> out;
  out.insert(out.end(), {'H', 'D', 'M', '1'});
  put_u32(out, static_cast<std::uint32_t>(m.height));
  put_u32(out, static_cast<std::uint32_t>(m.width));
  append_compressed_block(out, m.v.data(), m.v.size() * sizeof(std::int32_t));
  write_file_atomic(path, out.data(), out.size());
}

LabelMask load_mask(const std::string& path) {
  BinReader r(read_file(path));
  r.magic("HDM1");
  LabelMask out;
  out.height = static_cast<int>(r.u32());
  out.width = static_cast<int>(r.u32());
  auto raw = read_compressed_block(r);
  const std::size_t n = static_cast<std::size_t>(out.height) * out.width;
  if (raw.size() != n * sizeof(std::int32_t)) fail(Errc::format, "mask size mismatch");
  out.v.resize(n);
  std::memcpy(out.v.data(), raw.data(), raw.size());
  return out;
}

void save_spectrum_arr(const radiometry::SpectrometerReading& reading, const std::string& path) {
  reading.validate();
  std::vector<unsigned char> out;
  out.insert(out.end(), {'H', 'D', 'A', '1'});
  put_u32(out, static_cast<std::uint32_t>(reading.wavelengths_nm.size()));
  put_u64(out, static_cast<std::uint64_t>(reading.timestamp_ns));
  put_f64(out, reading.integration_time_us);
  for (double w : reading.wavelengths_nm) put_f64(out, w);
  for (double c : reading.counts) put_f64(out, c);
  write_file_atomic(path, out.data(), out.size());
}

radiometry::SpectrometerReading load_spectrum_arr(const std::string& path) {
  BinReader r(read_file(path));
  r.magic("HDA1");
  radiometry::SpectrometerReading out;
  const std::uint32_t n = r.u32();
  out.timestamp_ns = static_cast<std::int64_t>(r.u64());
  out.integration_time_us = r.f64();
  out.wavelengths_nm.resize(n);
  out.counts.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) out.wavelengths_nm[i] = r.f64();
  for (std::uint32_t i = 0; i < n; ++i) out.counts[i] = r.f64();
  out.validate();
  return out;
}

std::uint32_t file_crc32(const std::string& path) {
  auto data = read_file(path);
  return static_cast<std::uint32_t>(
      crc32(0L, data.empty() ? Z_NULL : data.data(), static_cast<uInt>(data.size())));
}

// ---- manifest ----

namespace {

const char* kManifestName = "manifest.txt";

std::string tags_to_string(const SceneTags& t) {
  return "biome:" + t.biome + ",time_of_day:" + t.time_of_day + ",season:" + t.season +
         ",weather:" + t.weather;
}

SceneTags tags_from_string(const std::string& s) {
  SceneTags t;
  std::istringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto colon = item.find(':');
    if (colon == std::string::npos) continue;
    const std::string key = item.substr(0, colon);
    const std::string value = item.substr(colon + 1);
    if (key == "biome") t.biome = value;
    else if (key == "time_of_day") t.time_of_day = value;
    else if (key == "season") t.season = value;
    else if (key == "weather") t.weather = value;
  }
  return t;
}

void write_manifest_file(const std::string& root, const Manifest& m) {
  std::ostringstream out;
  out << "hyperdrive-manifest v1\n";
  out << "rig_hash " << (m.rig_hash.empty() ? "-" : m.rig_hash) << "\n";
  for (const auto& e : m.ontology.entries())
    out << "label " << e.index << " " << e.level1 << " " << (e.level2.empty() ? "-" : e.level2)
        << "\n";
  for (const auto& s : m.samples) {
    out << "sample " << s.id << " " << s.timestamp_ns << " " << s.height << " " << s.width << " "
        << s.channels << " " << tags_to_string(s.tags);
    for (const auto& f : s.files) out << " " << f.name << ":" << f.crc32 << ":" << f.bytes;
    out << "\n";
  }
  const std::string text = out.str();
  write_file_atomic((fs::path(root) / kManifestName).string(), text.data(), text.size());
}

}  // namespace

DatasetWriter::DatasetWriter(const std::string& root, Ontology ontology, std::string rig_hash)
    : root_(root) {
  fs::create_directories(fs::path(root) / "samples");
  lock_path_ = (fs::path(root) / "manifest.lock").string();
  // O_EXCL-style single-writer lock.
  std::FILE* lock = std::fopen(lock_path_.c_str(), "wx");
  if (!lock) fail(Errc::storage, "dataset is locked by another writer: " + lock_path_);
  std::fclose(lock);
  manifest_.ontology = std::move(ontology);
  manifest_.rig_hash = std::move(rig_hash);
  if (fs::exists(fs::path(root) / kManifestName)) {
    Manifest existing = load_manifest(root);
    manifest_.samples = std::move(existing.samples);
  }
  write_manifest_file(root_, manifest_);
}

DatasetWriter::~DatasetWriter() { std::remove(lock_path_.c_str()); }

ManifestEntry DatasetWriter::write_sample(const SampleRecord& record) {
  if (record.id.empty()) fail(Errc::validation, "sample id must not be empty");
  for (const auto& s : manifest_.samples)
    if (s.id == record.id) fail(Errc::validation, "duplicate sample id: " + record.id);
  record.tags.validate();
  if (record.mask.height != record.cube.height || record.mask.width != record.cube.width)
    fail(Errc::validation, "mask dimensions must match cube dimensions");
  if (record.rgb.height != record.cube.height || record.rgb.width != record.cube.width)
    fail(Errc::validation, "rgb dimensions must match cube dimensions");
  for (std::int32_t v : record.mask.v)
    if (!manifest_.ontology.has_index(v))
      fail(Errc::validation, "mask value " + std::to_string(v) + " is not a registered label");

  const fs::path dir = fs::path(root_) / "samples" / record.id;
  fs::create_directories(dir);
  ManifestEntry entry;
  entry.id = record.id;
  entry.timestamp_ns = record.timestamp_ns;
  entry.height = record.cube.height;
  entry.width = record.cube.width;
  entry.channels = record.cube.channels;
  entry.tags = record.tags;

  try {
    save_cube_hdz(record.cube, (dir / "cube.hdz").string());
    save_raster3(record.rgb, (dir / "rgb.raster").string());
    save_mask(record.mask, (dir / "mask.raster").string());
    save_spectrum_arr(record.visnir, (dir / "visnir.arr").string());
    save_spectrum_arr(record.nir, (dir / "nir.arr").string());
    const std::string tags_text = tags_to_string(record.tags) + "\n";
    write_file_atomic((dir / "tags.txt").string(), tags_text.data(), tags_text.size());
  } catch (const Error&) {
    std::error_code ec;
    fs::remove_all(dir, ec);
    throw;
  }

  for (const char* name :
       {"cube.hdz", "rgb.raster", "mask.raster", "visnir.arr", "nir.arr", "tags.txt"}) {
    const std::string p = (dir / name).string();
    entry.files.push_back({name, file_crc32(p), static_cast<std::uint64_t>(fs::file_size(p))});
  }
  manifest_.samples.push_back(entry);
  write_manifest_file(root_, manifest_);
  return entry;
}

Manifest load_manifest(const std::string& root) {
  const std::string path = (fs::path(root) / kManifestName).string();
  std::ifstream in(path);
  if (!in) fail(Errc::storage, "cannot open manifest: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "hyperdrive-manifest v1")
    fail(Errc::format, "unrecognized manifest header");
  Manifest m;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string kind;
    ss >> kind;
    if (kind == "rig_hash") {
      ss >> m.rig_hash;
      if (m.rig_hash == "-") m.rig_hash.clear();
    } else if (kind == "label") {
      int index;
      std::string l1, l2;
      ss >> index >> l1 >> l2;
      if (l2 == "-") l2.clear();
      m.ontology.register_label(index, l1, l2);
    } else if (kind == "sample") {
      ManifestEntry e;
      std::string tags, file_spec;
      ss >> e.id >> e.timestamp_ns >> e.height >> e.width >> e.channels >> tags;
      e.tags = tags_from_string(tags);
      while (ss >> file_spec) {
        auto c1 = file_spec.find(':');
        auto c2 = file_spec.rfind(':');
        if (c1 == std::string::npos || c2 == c1) fail(Errc::format, "bad manifest file entry");
        FileEntry f;
        f.name = file_spec.substr(0, c1);
        f.crc32 = static_cast<std::uint32_t>(std::stoul(file_spec.substr(c1 + 1, c2 - c1 - 1)));
        f.bytes = std::stoull(file_spec.substr(c2 + 1));
        e.files.push_back(f);
      }
      m.samples.push_back(std::move(e));
    }
  }
  return m;
}

ValidationReport validate_manifest(const std::string& root, const Manifest& manifest) {
  ValidationReport report;
  auto add = [&](const std::string& id, const std::string& kind, const std::string& detail) {
    report.violations.push_back({id, kind, detail});
  };

  std::vector<std::string> seen;
  for (const auto& s : manifest.samples) {
    if (std::find(seen.begin(), seen.end(), s.id) != seen.end())
      add(s.id, "duplicate-id", "sample id appears more than once");
    seen.push_back(s.id);

    if (s.tags.biome.empty() || s.tags.time_of_day.empty() || s.tags.season.empty() ||
        s.tags.weather.empty())
      add(s.id, "tags", "scene tags incomplete");

    const fs::path dir = fs::path(root) / "samples" / s.id;
    bool files_ok = true;
    for (const auto& f : s.files) {
      const fs::path p = dir / f.name;
      if (!fs::exists(p)) {
        add(s.id, "missing-file", f.name);
        files_ok = false;
        continue;
      }
      if (file_crc32(p.string()) != f.crc32) {
        add(s.id, "checksum", f.name);
        files_ok = false;
      }
    }
    if (!files_ok) continue;

    try {
      auto mask = load_mask((dir / "mask.raster").string());
      if (mask.height != s.height || mask.width != s.width)
        add(s.id, "dims", "mask dimensions disagree with manifest");
      for (std::int32_t v : mask.v)
        if (!manifest.ontology.has_index(v)) {
          add(s.id, "label", "mask value " + std::to_string(v) + " unregistered");
          break;
        }
    } catch (const Error& e) {
      add(s.id, "label", std::string("mask unreadable: ") + e.what());
    }
  }
  return report;
}

std::size_t count_segments(const LabelMask& mask, std::int32_t label) {
  const int h = mask.height, w = mask.width;
  std::vector<std::uint8_t> visited(static_cast<std::size_t>(h) * w, 0);
  std::size_t segments = 0;
  std::vector<int> stack;
  for (int start = 0; start < h * w; ++start) {
    if (visited[start] || mask.v[start] != label) continue;
    ++segments;
    stack.push_back(start);
    visited[start] = 1;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      const int r = p / w, c = p % w;
      const int neighbors[4] = {r > 0 ? p - w : -1, r + 1 < h ? p + w : -1,
                                c > 0 ? p - 1 : -1, c + 1 < w ? p + 1 : -1};
      for (int q : neighbors)
        if (q >= 0 && !visited[q] && mask.v[q] == label) {
          visited[q] = 1;
          stack.push_back(q);
        }
    }
  }
  return segments;
}

std::map<int, ClassStats> compute_stats(const std::string& root, const Manifest& manifest) {
  std::map<int, ClassStats> stats;
  for (const auto& e : manifest.ontology.entries()) stats[e.index];  // all labels reported
  for (const auto& s : manifest.samples) {
    const fs::path dir = fs::path(root) / "samples" / s.id;
    const LabelMask mask = load_mask((dir / "mask.raster").string());
    for (const auto& e : manifest.ontology.entries()) {
      const std::size_t n = count_segments(mask, e.index);
      if (n > 0) {
        stats[e.index].segment_count += n;
        stats[e.index].image_count += 1;
      }
    }
  }
  return stats;
}

}  // namespace hyperdrive::dataset
