#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "hyperdrive/geometry.hpp"
#include "hyperdrive/mosaic.hpp"

namespace hyperdrive::cube {

/// H x W x C spectral array, row-major (row, col, channel), with per-channel
/// metadata and a per-pixel validity mask.
struct DataCube {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;
  std::vector<double> wavelengths_nm;  // strictly increasing
  std::vector<double> fwhm_nm;
  std::int64_t timestamp_ns = 0;
  Mask validity;
  std::vector<std::uint8_t> band_valid;  // per-channel flag, all 1 by default

  DataCube() = default;
  DataCube(int h, int w, int c)
      : height(h),
        width(w),
        channels(c),
        data(static_cast<std::size_t>(h) * w * c, 0.0),
        wavelengths_nm(c, 0.0),
        fwhm_nm(c, 0.0),
        validity(h, w, true),
        band_valid(c, 1) {}

  double& at(int r, int c, int ch) {
    return data[(static_cast<std::size_t>(r) * width + c) * channels + ch];
  }
  double at(int r, int c, int ch) const {
    return data[(static_cast<std::size_t>(r) * width + c) * channels + ch];
  }
};

/// Warp undistorted VNIR (24 bands) and SWIR (9 bands) stacks into the RGB
/// reference frame and concatenate channels sorted by wavelength. The
/// validity mask is the intersection of both cameras' warp footprints.
DataCube compose(const mosaic::BandStack& vnir, const mosaic::BandStack& swir,
                 const geometry::Homography& h_vnir, const geometry::Homography& h_swir,
                 int out_height, int out_width);

/// The 33 (wavelength, value) pairs at a valid pixel, ascending wavelength.
std::vector<std::pair<double, double>> slice_spectrum(const DataCube& cube, int row, int col);

}  // namespace hyperdrive::cube
