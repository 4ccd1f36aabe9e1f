#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hyperdrive/image.hpp"

namespace hyperdrive::mosaic {

/// Repeating M x N spectral filter tile. band_at maps a tile cell to a raw
/// band index; the mapping must be a bijection onto 0..M*N-1.
struct MosaicPattern {
  int tile_rows = 0;                     // M
  int tile_cols = 0;                     // N
  std::vector<int> cell_band;            // M*N entries, row-major
  std::vector<double> raw_wavelengths_nm;  // indexed by raw band

  int raw_band_count() const { return tile_rows * tile_cols; }
  int band_at(int r, int c) const { return cell_band[static_cast<std::size_t>(r) * tile_cols + c]; }

  void validate() const;

  /// Row-major cell->band layout with the given wavelengths.
  static MosaicPattern regular(int rows, int cols, std::vector<double> wavelengths);
};

/// Linear per-pixel spectral unmixing, rows = output bands. Removes the
/// Fabry-Perot secondary transmission peak and merges overlapping raw bands.
struct SpectralCorrectionMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> entries;  // row-major rows x cols
  std::vector<double> out_wavelengths_nm;
  std::vector<double> out_fwhm_nm;

  double at(int r, int c) const { return entries[static_cast<std::size_t>(r) * cols + c]; }
  void validate() const;

  static SpectralCorrectionMatrix identity(const std::vector<double>& wavelengths,
                                           const std::vector<double>& fwhm);
};

struct MosaicFrame {
  int height = 0;
  int width = 0;
  std::vector<double> values;  // row-major linear sensor counts
  std::int64_t timestamp_ns = 0;
  std::string pattern_id;

  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * width + c]; }
  double& at(int r, int c) { return values[static_cast<std::size_t>(r) * width + c]; }
};

struct BandStack {
  int height = 0;
  int width = 0;
  std::vector<Plane> bands;
  std::vector<double> wavelengths_nm;
  std::vector<double> fwhm_nm;
  std::int64_t timestamp_ns = 0;

  int band_count() const { return static_cast<int>(bands.size()); }
};

struct SparseSample {
  int row;
  int col;
  double value;
};

/// Pixels of `frame` whose tile cell maps to `band`, with positions.
std::vector<SparseSample> extract_sparse_band(const MosaicFrame& frame,
                                              const MosaicPattern& pattern, int band);

/// Bilinear interpolation of a regular-lattice sparse sample set to a full
/// plane. Sample positions are reproduced exactly; pixels beyond the
/// outermost samples use clamped extension.
Plane interpolate_band(const std::vector<SparseSample>& samples, int height, int width);

BandStack apply_spectral_correction(const BandStack& raw, const SpectralCorrectionMatrix& corr);

/// extract -> interpolate (all raw bands) -> correct.
BandStack demosaic(const MosaicFrame& frame, const MosaicPattern& pattern,
                   const SpectralCorrectionMatrix& corr);

/// Raw stack without spectral correction (all M*N bands).
BandStack demosaic_raw(const MosaicFrame& frame, const MosaicPattern& pattern);

// Plain-text config I/O (tile grid, wavelength list, matrix rows).
MosaicPattern load_pattern(const std::string& path);
void save_pattern(const MosaicPattern& p, const std::string& path);
SpectralCorrectionMatrix load_correction(const std::string& path);
void save_correction(const SpectralCorrectionMatrix& m, const std::string& path);

/// Shipped defaults: VNIR 5x5 (25 raw bands evenly spaced on [660,900],
/// corrected to 24), SWIR 3x3 (9 bands, denser below 1400 nm).
MosaicPattern default_vnir_pattern();
MosaicPattern default_swir_pattern();
SpectralCorrectionMatrix default_vnir_correction();
SpectralCorrectionMatrix default_swir_correction();

namespace ref {
// Serial reference implementations used to cross-check the OpenMP kernels
// and by the benchmark target.
Plane interpolate_band(const std::vector<SparseSample>& samples, int height, int width);
BandStack apply_spectral_correction(const BandStack& raw, const SpectralCorrectionMatrix& corr);
BandStack demosaic(const MosaicFrame& frame, const MosaicPattern& pattern,
                   const SpectralCorrectionMatrix& corr);
}  // namespace ref

}  // namespace hyperdrive::mosaic
