#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "hyperdrive/cube.hpp"

namespace hyperdrive::radiometry {

struct SpectrometerReading {
  std::int64_t timestamp_ns = 0;
  std::vector<double> wavelengths_nm;  // strictly increasing
  std::vector<double> counts;          // raw digital counts, >= 0
  double integration_time_us = 1.0;
  std::optional<double> humidity_pct;
  std::optional<double> temperature_c;

  void validate() const;
};

/// Stitched 500-1700 nm reference spectrum; exactly one source device per
/// wavelength, crossover at 950 nm.
struct WhiteReference {
  std::vector<double> wavelengths_nm;
  std::vector<double> values;  // counts normalized by integration time
  double reflectance_factor = 0.99;
  double nir_gain = 1.0;  // splice gain applied to the NIR segment
};

/// VIS-NIR keeps wavelengths < crossover, NIR keeps >= crossover; the NIR
/// segment is scaled by mean(VIS-NIR)/mean(NIR) over [crossover-20,
/// crossover+20] nm so the stitched curve is continuous in the mean.
WhiteReference stitch(const SpectrometerReading& visnir, const SpectrometerReading& nir,
                      double crossover_nm = 950.0);

/// FWHM-weighted Gaussian-window average of the reference at each band center.
std::vector<double> resample_to_bands(const WhiteReference& ref,
                                      const std::vector<double>& wavelengths_nm,
                                      const std::vector<double>& fwhm_nm);

/// R = factor * (S - dark) / (W - dark), clipped to [0, 1.5]. Bands whose
/// reference signal does not exceed dark are flagged invalid, not divided.
cube::DataCube to_reflectance(const cube::DataCube& cube, const WhiteReference& ref,
                              const std::vector<double>& dark = {});

namespace ref {
cube::DataCube to_reflectance(const cube::DataCube& cube, const WhiteReference& white,
                              const std::vector<double>& dark = {});
}  // namespace ref

}  // namespace hyperdrive::radiometry
