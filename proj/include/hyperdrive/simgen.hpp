#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hyperdrive/cube.hpp"
#include "hyperdrive/geometry.hpp"
#include "hyperdrive/mosaic.hpp"
#include "hyperdrive/radiometry.hpp"
#include "hyperdrive/sync.hpp"

namespace hyperdrive::simgen {

// Scene wavelength grid: 1 nm spacing over [500, 1700].
inline constexpr double kGridStartNm = 500.0;
inline constexpr double kGridEndNm = 1700.0;
inline constexpr int kGridSamples = 1201;

inline double grid_wavelength(int i) { return kGridStartNm + i; }

struct SyntheticScene {
  cube::DataCube truth_cube;           // ground-truth radiance on the 1 nm grid
  std::vector<double> rgb_truth;        // H x W x 3
  std::vector<std::int32_t> material_map;  // H x W labels
  std::vector<double> illumination;    // kGridSamples relative power
  std::vector<std::vector<double>> material_reflectance;  // per material, on the grid

  int height() const { return truth_cube.height; }
  int width() const { return truth_cube.width; }
};

struct RigConfig {
  mosaic::MosaicPattern vnir_pattern;
  mosaic::MosaicPattern swir_pattern;
  mosaic::SpectralCorrectionMatrix vnir_correction;
  mosaic::SpectralCorrectionMatrix swir_correction;
  geometry::CameraModel vnir_model;
  geometry::CameraModel swir_model;
  geometry::Homography h_vnir;  // camera plane -> RGB reference plane
  geometry::Homography h_swir;
  int vnir_height = 0, vnir_width = 0;
  int swir_height = 0, swir_width = 0;
  int out_height = 0, out_width = 0;
  double frame_rate_hz = 10.0;
  double visnir_rate_hz = 4.0;
  double nir_rate_hz = 2.0;
  double nir_gain = 1.0;  // relative spectrometer sensitivity

  void validate() const;  // 24 + 9 = 33 channels etc.

  /// Production-scale rig: 1012 x 1666 composite.
  static RigConfig full_scale();
  /// Desk-scale rig with size x size frames, identity geometry.
  static RigConfig test_scale(int size = 128);
};

/// Deterministic blobby scene: Voronoi material regions with smooth Gaussian
/// -bump reflectance signatures under a smooth illumination spectrum.
SyntheticScene generate_scene(std::uint64_t seed, int height, int width, int n_materials);

/// Scene whose radiance is affine in (row, col) for every wavelength, so
/// bilinear resampling reproduces it exactly away from clamped edges.
SyntheticScene affine_scene(int height, int width, double base, double row_slope,
                            double col_slope);

/// Forward mosaic render: pixel (r,c) holds scene radiance for the cell's
/// band, sampled at h * undistort(p) in the reference plane.
mosaic::MosaicFrame render_mosaic(const SyntheticScene& scene, const mosaic::MosaicPattern& pattern,
                                  const geometry::CameraModel& model,
                                  const geometry::Homography& h, int height, int width,
                                  std::int64_t timestamp_ns = 0);

/// White-reference spectrometer reading: 0.99 * illumination sampled on the
/// device grid, times gain and integration time.
radiometry::SpectrometerReading render_spectrometer(const SyntheticScene& scene, int n_samples,
                                                    double start_nm, double end_nm, double gain,
                                                    double integration_time_us,
                                                    std::int64_t timestamp_ns);

/// Interleaved camera triples at frame_rate_hz plus spectrometer packets at
/// their own rates over [0, duration_s), timestamps jittered by +-jitter_ms,
/// sorted by timestamp. Payloads carry encoded wire messages.
std::vector<sync::TimedMessage> emit_streams(const SyntheticScene& scene, const RigConfig& rig,
                                             double duration_s, double jitter_ms,
                                             std::uint64_t seed = 0);

/// Grid-of-points correspondence file content for a camera: undistorted
/// sensor points mapped through the rig homography into the RGB plane.
geometry::CorrespondenceSet make_correspondences(const geometry::CameraModel& model,
                                                 const geometry::Homography& h, int height,
                                                 int width, int grid = 5);

/// Scene radiance at (row, col) and wavelength (linear spectral interp).
double scene_radiance(const SyntheticScene& scene, int row, int col, double wavelength_nm);

}  // namespace hyperdrive::simgen
