#include "hyperdrive/cube.hpp"

#include <sstream>

namespace hyperdrive::cube {

DataCube compose(const mosaic::BandStack& vnir, const mosaic::BandStack& swir,
                 const geometry::Homography& h_vnir, const geometry::Homography& h_swir,
                 int out_height, int out_width) {
  if (vnir.band_count() != 24 || swir.band_count() != 9) {
    std::ostringstream msg;
    msg << "compose expects 24 VNIR + 9 SWIR bands, got " << vnir.band_count() << " + "
        << swir.band_count();
    fail(Errc::configuration, msg.str());
  }
  if (out_height <= 0 || out_width <= 0)
    fail(Errc::configuration, "compose output dimensions must be positive");

  DataCube out(out_height, out_width, 33);
  out.timestamp_ns = vnir.timestamp_ns;
  for (int b = 0; b < 24; ++b) {
    out.wavelengths_nm[b] = vnir.wavelengths_nm[b];
    out.fwhm_nm[b] = vnir.fwhm_nm[b];
  }
  for (int b = 0; b < 9; ++b) {
    out.wavelengths_nm[24 + b] = swir.wavelengths_nm[b];
    out.fwhm_nm[24 + b] = swir.fwhm_nm[b];
  }
  for (int c = 1; c < 33; ++c)
    if (out.wavelengths_nm[c] <= out.wavelengths_nm[c - 1])
      fail(Errc::configuration, "composite wavelengths are not strictly increasing");

  // Warp every plane first, then interleave in a single streaming pass over
  // the cube; scattering channel-by-channel would touch each cache line of
  // the (much larger) interleaved array 33 times.
  std::vector<geometry::WarpResult> warped(33);
  for (int b = 0; b < 24; ++b)
    warped[b] = geometry::warp_plane(vnir.bands[b], h_vnir, out_height, out_width);
  for (int b = 0; b < 9; ++b)
    warped[24 + b] = geometry::warp_plane(swir.bands[b], h_swir, out_height, out_width);

#pragma omp parallel for schedule(static)
  for (int r = 0; r < out_height; ++r)
    for (int c = 0; c < out_width; ++c)
      for (int ch = 0; ch < 33; ++ch) out.at(r, c, ch) = warped[ch].plane.at(r, c);

  // All planes of a camera share one homography, hence one footprint mask.
  for (std::size_t i = 0; i < out.validity.v.size(); ++i)
    out.validity.v[i] = warped[0].valid.v[i] && warped[24].valid.v[i];
  return out;
}

std::vector<std::pair<double, double>> slice_spectrum(const DataCube& cube, int row, int col) {
  if (row < 0 || col < 0 || row >= cube.height || col >= cube.width)
    fail(Errc::invalid_argument, "slice_spectrum pixel out of bounds");
  if (!cube.validity.at(row, col)) fail(Errc::masked_pixel, "pixel is masked invalid");
  std::vector<std::pair<double, double>> out;
  out.reserve(cube.channels);
  for (int c = 0; c < cube.channels; ++c)
    out.emplace_back(cube.wavelengths_nm[c], cube.at(row, col, c));
  return out;
}

}  // namespace hyperdrive::cube
