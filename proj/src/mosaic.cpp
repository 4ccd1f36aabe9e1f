#include "hyperdrive/mosaic.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace hyperdrive::mosaic {

void MosaicPattern::validate() const {
  if (tile_rows <= 0 || tile_cols <= 0) fail(Errc::invalid_argument, "pattern tile dims must be positive");
  const int n = raw_band_count();
  if (static_cast<int>(cell_band.size()) != n)
    fail(Errc::invalid_argument, "pattern cell grid size mismatch");
  std::vector<bool> seen(n, false);
  for (int b : cell_band) {
    if (b < 0 || b >= n || seen[b]) fail(Errc::invalid_argument, "pattern cell map is not a bijection");
    seen[b] = true;
  }
  if (static_cast<int>(raw_wavelengths_nm.size()) != n)
    fail(Errc::invalid_argument, "pattern wavelength count mismatch");
}

MosaicPattern MosaicPattern::regular(int rows, int cols, std::vector<double> wavelengths) {
  MosaicPattern p;
  p.tile_rows = rows;
  p.tile_cols = cols;
  p.cell_band.resize(static_cast<std::size_t>(rows) * cols);
  for (int i = 0; i < rows * cols; ++i) p.cell_band[i] = i;
  p.raw_wavelengths_nm = std::move(wavelengths);
  p.validate();
  return p;
}

void SpectralCorrectionMatrix::validate() const {
  if (rows <= 0 || cols <= 0 || rows > cols)
    fail(Errc::invalid_argument, "correction matrix requires 0 < rows <= cols");
  if (entries.size() != static_cast<std::size_t>(rows) * cols)
    fail(Errc::invalid_argument, "correction matrix entry count mismatch");
  if (static_cast<int>(out_wavelengths_nm.size()) != rows ||
      static_cast<int>(out_fwhm_nm.size()) != rows)
    fail(Errc::invalid_argument, "correction matrix metadata length mismatch");
  for (int r = 0; r < rows; ++r) {
    bool nonzero = false;
    for (int c = 0; c < cols; ++c)
      if (at(r, c) != 0.0) { nonzero = true; break; }
    if (!nonzero) fail(Errc::invalid_argument, "correction matrix has an all-zero row");
  }
}

SpectralCorrectionMatrix SpectralCorrectionMatrix::identity(const std::vector<double>& wavelengths,
                                                            const std::vector<double>& fwhm) {
  SpectralCorrectionMatrix m;
  m.rows = m.cols = static_cast<int>(wavelengths.size());
  m.entries.assign(static_cast<std::size_t>(m.rows) * m.cols, 0.0);
  for (int i = 0; i < m.rows; ++i) m.entries[static_cast<std::size_t>(i) * m.cols + i] = 1.0;
  m.out_wavelengths_nm = wavelengths;
  m.out_fwhm_nm = fwhm;
  m.validate();
  return m;
}

std::vector<SparseSample> extract_sparse_band(const MosaicFrame& frame,
                                              const MosaicPattern& pattern, int band) {
  pattern.validate();
  if (band < 0 || band >= pattern.raw_band_count())
    fail(Errc::invalid_argument, "band index out of range");
  // Locate the unique tile cell for this band.
  int cr = -1, cc = -1;
  for (int r = 0; r < pattern.tile_rows && cr < 0; ++r)
    for (int c = 0; c < pattern.tile_cols; ++c)
      if (pattern.band_at(r, c) == band) { cr = r; cc = c; break; }
  std::vector<SparseSample> out;
  for (int r = cr; r < frame.height; r += pattern.tile_rows)
    for (int c = cc; c < frame.width; c += pattern.tile_cols)
      out.push_back({r, c, frame.at(r, c)});
  return out;
}

namespace {

struct Lattice {
  std::vector<int> rows, cols;
  std::vector<double> grid;  // rows.size() x cols.size()
  double g(std::size_t i, std::size_t j) const { return grid[i * cols.size() + j]; }
};

Lattice build_lattice(const std::vector<SparseSample>& samples) {
  if (samples.empty()) fail(Errc::degenerate_input, "empty sample set");
  Lattice lat;
  for (const auto& s : samples) {
    lat.rows.push_back(s.row);
    lat.cols.push_back(s.col);
  }
  auto uniq = [](std::vector<int>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  uniq(lat.rows);
  uniq(lat.cols);
  lat.grid.assign(lat.rows.size() * lat.cols.size(),
                  std::numeric_limits<double>::quiet_NaN());
  for (const auto& s : samples) {
    auto i = std::lower_bound(lat.rows.begin(), lat.rows.end(), s.row) - lat.rows.begin();
    auto j = std::lower_bound(lat.cols.begin(), lat.cols.end(), s.col) - lat.cols.begin();
    lat.grid[static_cast<std::size_t>(i) * lat.cols.size() + j] = s.value;
  }
  for (double v : lat.grid)
    if (std::isnan(v)) fail(Errc::degenerate_input, "sample set does not form a complete lattice");
  return lat;
}

// Per output coordinate: lower lattice index and interpolation weight.
void segment_table(const std::vector<int>& knots, int extent, std::vector<int>& idx,
                   std::vector<double>& t) {
  idx.resize(extent);
  t.resize(extent);
  std::size_t k = 0;
  for (int x = 0; x < extent; ++x) {
    if (x <= knots.front()) { idx[x] = 0; t[x] = 0.0; continue; }
    if (x >= knots.back()) { idx[x] = static_cast<int>(knots.size()) - 1; t[x] = 0.0; continue; }
    while (knots[k + 1] < x) ++k;
    idx[x] = static_cast<int>(k);
    t[x] = static_cast<double>(x - knots[k]) / (knots[k + 1] - knots[k]);
  }
}

}  // namespace

Plane interpolate_band(const std::vector<SparseSample>& samples, int height, int width) {
  Lattice lat = build_lattice(samples);
  Plane out(height, width);
  std::vector<int> ri, ci;
  std::vector<double> rt, ct;
  segment_table(lat.rows, height, ri, rt);
  segment_table(lat.cols, width, ci, ct);
  const std::size_t nc = lat.cols.size();
#pragma omp parallel for schedule(static)
  for (int r = 0; r < height; ++r) {
    const std::size_t i0 = ri[r];
    const std::size_t i1 = std::min(i0 + 1, lat.rows.size() - 1);
    const double ty = rt[r];
    double* dst = out.v.data() + static_cast<std::size_t>(r) * width;
    const double* row0 = lat.grid.data() + i0 * nc;
    const double* row1 = lat.grid.data() + i1 * nc;
    for (int c = 0; c < width; ++c) {
      const std::size_t j0 = ci[c];
      const std::size_t j1 = std::min(j0 + 1, nc - 1);
      const double tx = ct[c];
      const double a = row0[j0] * (1.0 - tx) + row0[j1] * tx;
      const double b = row1[j0] * (1.0 - tx) + row1[j1] * tx;
      dst[c] = a * (1.0 - ty) + b * ty;
    }
  }
  return out;
}

BandStack apply_spectral_correction(const BandStack& raw, const SpectralCorrectionMatrix& corr) {
  corr.validate();
  if (raw.band_count() != corr.cols)
    fail(Errc::invalid_argument, "raw band count does not match correction matrix columns");
  BandStack out;
  out.height = raw.height;
  out.width = raw.width;
  out.timestamp_ns = raw.timestamp_ns;
  out.wavelengths_nm = corr.out_wavelengths_nm;
  out.fwhm_nm = corr.out_fwhm_nm;
  out.bands.assign(corr.rows, Plane(raw.height, raw.width));
  const std::size_t npx = static_cast<std::size_t>(raw.height) * raw.width;
  // Stream one output band at a time and skip zero weights: resampling
  // matrices are nearly empty, and the per-pixel accumulation order (ascending
  // raw band) matches the serial reference bit for bit.
#pragma omp parallel for schedule(static)
  for (int r = 0; r < corr.rows; ++r) {
    double* dst = out.bands[r].v.data();
    const double* row = corr.entries.data() + static_cast<std::size_t>(r) * corr.cols;
    for (int c = 0; c < corr.cols; ++c) {
      const double w = row[c];
      if (w == 0.0) continue;
      const double* src = raw.bands[c].v.data();
      for (std::size_t p = 0; p < npx; ++p) dst[p] += w * src[p];
    }
    for (std::size_t p = 0; p < npx; ++p) dst[p] = std::max(dst[p], 0.0);
  }
  return out;
}

BandStack demosaic_raw(const MosaicFrame& frame, const MosaicPattern& pattern) {
  pattern.validate();
  BandStack stack;
  stack.height = frame.height;
  stack.width = frame.width;
  stack.timestamp_ns = frame.timestamp_ns;
  stack.wavelengths_nm = pattern.raw_wavelengths_nm;
  stack.fwhm_nm.assign(pattern.raw_band_count(), 0.0);
  stack.bands.resize(pattern.raw_band_count());
  for (int b = 0; b < pattern.raw_band_count(); ++b) {
    auto samples = extract_sparse_band(frame, pattern, b);
    stack.bands[b] = interpolate_band(samples, frame.height, frame.width);
  }
  return stack;
}

BandStack demosaic(const MosaicFrame& frame, const MosaicPattern& pattern,
                   const SpectralCorrectionMatrix& corr) {
  return apply_spectral_correction(demosaic_raw(frame, pattern), corr);
}

namespace {

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
  return v;
}

}  // namespace

MosaicPattern default_vnir_pattern() {
  return MosaicPattern::regular(5, 5, linspace(660.0, 900.0, 25));
}

MosaicPattern default_swir_pattern() {
  // Denser coverage below 1400 nm where the absorption features sit.
  return MosaicPattern::regular(3, 3,
                                {1100, 1150, 1200, 1250, 1300, 1350, 1450, 1550, 1700});
}

SpectralCorrectionMatrix default_vnir_correction() {
  // 25 raw bands -> 24 output bands evenly spaced on [660, 900]: linear
  // resampling onto the output grid, which merges the two most-overlapping
  // raw bands around the middle of the range.
  const auto raw = linspace(660.0, 900.0, 25);
  const auto out = linspace(660.0, 900.0, 24);
  SpectralCorrectionMatrix m;
  m.rows = 24;
  m.cols = 25;
  m.entries.assign(24 * 25, 0.0);
  for (int r = 0; r < 24; ++r) {
    const double w = out[r];
    std::size_t k = 0;
    while (k + 2 < raw.size() && raw[k + 1] < w) ++k;
    const double t = (w - raw[k]) / (raw[k + 1] - raw[k]);
    m.entries[static_cast<std::size_t>(r) * 25 + k] = 1.0 - t;
    m.entries[static_cast<std::size_t>(r) * 25 + k + 1] = t;
  }
  m.out_wavelengths_nm = out;
  m.out_fwhm_nm.assign(24, 12.0);
  m.validate();
  return m;
}

SpectralCorrectionMatrix default_swir_correction() {
  auto p = default_swir_pattern();
  std::vector<double> fwhm(9, 20.0);
  return SpectralCorrectionMatrix::identity(p.raw_wavelengths_nm, fwhm);
}

// ---- text config I/O ----
// pattern file:
//   tile R C
//   R lines of C band indices
//   wavelengths_nm: v0 v1 ...
// correction file:
//   corr ROWS COLS
//   ROWS lines of COLS coefficients
//   out_wavelengths_nm: ...
//   out_fwhm_nm: ...

namespace {

std::vector<double> parse_list(const std::string& line, const std::string& key) {
  auto pos = line.find(':');
  if (pos == std::string::npos || line.substr(0, pos) != key)
    fail(Errc::format, "expected '" + key + ":' line");
  std::istringstream ss(line.substr(pos + 1));
  std::vector<double> out;
  double v;
  while (ss >> v) out.push_back(v);
  return out;
}

std::string next_line(std::istream& in) {
  std::string line;
  while (std::getline(in, line)) {
    auto h = line.find('#');
    if (h != std::string::npos) line.erase(h);
    if (line.find_first_not_of(" \t\r") != std::string::npos) return line;
  }
  fail(Errc::format, "unexpected end of config file");
}

}  // namespace

MosaicPattern load_pattern(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::storage, "cannot open pattern file: " + path);
  std::istringstream head(next_line(in));
  std::string tag;
  MosaicPattern p;
  head >> tag >> p.tile_rows >> p.tile_cols;
  if (tag != "tile") fail(Errc::format, "pattern file must start with 'tile R C'");
  p.cell_band.resize(static_cast<std::size_t>(p.tile_rows) * p.tile_cols);
  for (int r = 0; r < p.tile_rows; ++r) {
    std::istringstream row(next_line(in));
    for (int c = 0; c < p.tile_cols; ++c)
      if (!(row >> p.cell_band[static_cast<std::size_t>(r) * p.tile_cols + c]))
        fail(Errc::format, "short tile row in pattern file");
  }
  p.raw_wavelengths_nm = parse_list(next_line(in), "wavelengths_nm");
  p.validate();
  return p;
}

void save_pattern(const MosaicPattern& p, const std::string& path) {
  std::ofstream out(path);
  out << "tile " << p.tile_rows << " " << p.tile_cols << "\n";
  for (int r = 0; r < p.tile_rows; ++r) {
    for (int c = 0; c < p.tile_cols; ++c) out << p.band_at(r, c) << (c + 1 < p.tile_cols ? " " : "\n");
  }
  out << "wavelengths_nm:";
  for (double w : p.raw_wavelengths_nm) out << " " << w;
  out << "\n";
  if (!out) fail(Errc::storage, "failed writing pattern file: " + path);
}

SpectralCorrectionMatrix load_correction(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::storage, "cannot open correction file: " + path);
  std::istringstream head(next_line(in));
  std::string tag;
  SpectralCorrectionMatrix m;
  head >> tag >> m.rows >> m.cols;
  if (tag != "corr") fail(Errc::format, "correction file must start with 'corr ROWS COLS'");
  m.entries.resize(static_cast<std::size_t>(m.rows) * m.cols);
  for (int r = 0; r < m.rows; ++r) {
    std::istringstream row(next_line(in));
    for (int c = 0; c < m.cols; ++c)
      if (!(row >> m.entries[static_cast<std::size_t>(r) * m.cols + c]))
        fail(Errc::format, "short matrix row in correction file");
  }
  m.out_wavelengths_nm = parse_list(next_line(in), "out_wavelengths_nm");
  m.out_fwhm_nm = parse_list(next_line(in), "out_fwhm_nm");
  m.validate();
  return m;
}

void save_correction(const SpectralCorrectionMatrix& m, const std::string& path) {
  std::ofstream out(path);
  out << "corr " << m.rows << " " << m.cols << "\n";
  out.precision(17);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) out << m.at(r, c) << (c + 1 < m.cols ? " " : "\n");
  out << "out_wavelengths_nm:";
  for (double w : m.out_wavelengths_nm) out << " " << w;
  out << "\nout_fwhm_nm:";
  for (double w : m.out_fwhm_nm) out << " " << w;
  out << "\n";
  if (!out) fail(Errc::storage, "failed writing correction file: " + path);
}

namespace ref {

Plane interpolate_band(const std::vector<SparseSample>& samples, int height, int width) {
  Lattice lat = build_lattice(samples);
  Plane out(height, width);
  auto locate = [](const std::vector<int>& knots, int x, std::size_t& lo, double& t) {
    if (x <= knots.front()) { lo = 0; t = 0; return; }
    if (x >= knots.back()) { lo = knots.size() - 1; t = 0; return; }
    lo = 0;
    while (knots[lo + 1] < x) ++lo;
    t = static_cast<double>(x - knots[lo]) / (knots[lo + 1] - knots[lo]);
  };
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      std::size_t i, j;
      double ty, tx;
      locate(lat.rows, r, i, ty);
      locate(lat.cols, c, j, tx);
      std::size_t i1 = std::min(i + 1, lat.rows.size() - 1);
      std::size_t j1 = std::min(j + 1, lat.cols.size() - 1);
      double a = lat.g(i, j) * (1 - tx) + lat.g(i, j1) * tx;
      double b = lat.g(i1, j) * (1 - tx) + lat.g(i1, j1) * tx;
      out.at(r, c) = a * (1 - ty) + b * ty;
    }
  }
  return out;
}

BandStack apply_spectral_correction(const BandStack& raw, const SpectralCorrectionMatrix& corr) {
  corr.validate();
  if (raw.band_count() != corr.cols)
    fail(Errc::invalid_argument, "raw band count does not match correction matrix columns");
  BandStack out;
  out.height = raw.height;
  out.width = raw.width;
  out.timestamp_ns = raw.timestamp_ns;
  out.wavelengths_nm = corr.out_wavelengths_nm;
  out.fwhm_nm = corr.out_fwhm_nm;
  out.bands.assign(corr.rows, Plane(raw.height, raw.width));
  for (std::size_t p = 0; p < static_cast<std::size_t>(raw.height) * raw.width; ++p) {
    for (int r = 0; r < corr.rows; ++r) {
      double acc = 0.0;
      for (int c = 0; c < corr.cols; ++c) acc += corr.at(r, c) * raw.bands[c].v[p];
      out.bands[r].v[p] = std::max(acc, 0.0);
    }
  }
  return out;
}

BandStack demosaic(const MosaicFrame& frame, const MosaicPattern& pattern,
                   const SpectralCorrectionMatrix& corr) {
  pattern.validate();
  BandStack stack;
  stack.height = frame.height;
  stack.width = frame.width;
  stack.timestamp_ns = frame.timestamp_ns;
  stack.wavelengths_nm = pattern.raw_wavelengths_nm;
  stack.fwhm_nm.assign(pattern.raw_band_count(), 0.0);
  stack.bands.resize(pattern.raw_band_count());
  for (int b = 0; b < pattern.raw_band_count(); ++b)
    stack.bands[b] = ref::interpolate_band(extract_sparse_band(frame, pattern, b), frame.height,
                                           frame.width);
  return ref::apply_spectral_correction(stack, corr);
}

}  // namespace ref

}  // namespace hyperdrive::mosaic
