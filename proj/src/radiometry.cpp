#include "hyperdrive/radiometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hyperdrive::radiometry {

void SpectrometerReading::validate() const {
  if (wavelengths_nm.empty()) fail(Errc::invalid_argument, "spectrometer reading is empty");
  if (wavelengths_nm.size() != counts.size())
    fail(Errc::invalid_argument, "wavelength/count length mismatch");
  for (std::size_t i = 1; i < wavelengths_nm.size(); ++i)
    if (wavelengths_nm[i] <= wavelengths_nm[i - 1])
      fail(Errc::invalid_argument, "wavelengths must be strictly increasing");
  for (double c : counts)
    if (!(c >= 0)) fail(Errc::invalid_argument, "counts must be non-negative");
  if (integration_time_us <= 0) fail(Errc::invalid_argument, "integration time must be positive");
}

WhiteReference stitch(const SpectrometerReading& visnir, const SpectrometerReading& nir,
                      double crossover_nm) {
  visnir.validate();
  nir.validate();
  const double lo = crossover_nm - 20.0, hi = crossover_nm + 20.0;

  auto window_mean = [&](const SpectrometerReading& r) {
    double sum = 0;
    int n = 0;
    for (std::size_t i = 0; i < r.wavelengths_nm.size(); ++i) {
      const double w = r.wavelengths_nm[i];
      if (w >= lo && w <= hi) {
        sum += r.counts[i] / r.integration_time_us;
        ++n;
      }
    }
    if (n == 0) fail(Errc::stitch, "no samples in the overlap window around the crossover");
    return sum / n;
  };

  const double mean_vis = window_mean(visnir);
  const double mean_nir = window_mean(nir);
  if (mean_nir == 0.0) fail(Errc::degenerate_input, "NIR overlap window mean is zero");
  const double gain = mean_vis / mean_nir;

  WhiteReference ref;
  ref.nir_gain = gain;
  for (std::size_t i = 0; i < visnir.wavelengths_nm.size(); ++i) {
    if (visnir.wavelengths_nm[i] < crossover_nm) {
      ref.wavelengths_nm.push_back(visnir.wavelengths_nm[i]);
      ref.values.push_back(visnir.counts[i] / visnir.integration_time_us);
    }
  }
  for (std::size_t i = 0; i < nir.wavelengths_nm.size(); ++i) {
    if (nir.wavelengths_nm[i] >= crossover_nm) {
      ref.wavelengths_nm.push_back(nir.wavelengths_nm[i]);
      ref.values.push_back(gain * nir.counts[i] / nir.integration_time_us);
    }
  }
  if (ref.wavelengths_nm.size() < 2) fail(Errc::stitch, "stitched reference is empty");
  for (std::size_t i = 1; i < ref.wavelengths_nm.size(); ++i)
    if (ref.wavelengths_nm[i] <= ref.wavelengths_nm[i - 1])
      fail(Errc::stitch, "stitched grid is not strictly increasing");
  return ref;
}

std::vector<double> resample_to_bands(const WhiteReference& ref,
                                      const std::vector<double>& wavelengths_nm,
                                      const std::vector<double>& fwhm_nm) {
  if (wavelengths_nm.size() != fwhm_nm.size())
    fail(Errc::invalid_argument, "band wavelength/FWHM length mismatch");
  const std::size_t m = ref.wavelengths_nm.size();
  // Trapezoid sample spacing for the (possibly non-uniform) reference grid.
  std::vector<double> dl(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double left = i > 0 ? ref.wavelengths_nm[i - 1] : ref.wavelengths_nm[i];
    const double right = i + 1 < m ? ref.wavelengths_nm[i + 1] : ref.wavelengths_nm[i];
    dl[i] = (right - left) / 2.0;
  }

  std::vector<double> out(wavelengths_nm.size());
  for (std::size_t b = 0; b < wavelengths_nm.size(); ++b) {
    const double center = wavelengths_nm[b];
    if (center < ref.wavelengths_nm.front() || center > ref.wavelengths_nm.back()) {
      std::ostringstream msg;
      msg << "band at " << center << " nm is outside reference coverage ["
          << ref.wavelengths_nm.front() << ", " << ref.wavelengths_nm.back() << "]";
      fail(Errc::spectral_coverage, msg.str());
    }
    const double fwhm = std::max(fwhm_nm[b], 1e-6);
    const double sigma = fwhm / 2.3548200450309493;  // FWHM -> Gaussian sigma
    double num = 0, den = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const double d = (ref.wavelengths_nm[i] - center) / sigma;
      const double w = std::exp(-0.5 * d * d) * dl[i];
      num += w * ref.values[i];
      den += w;
    }
    out[b] = num / den;
  }
  return out;
}

namespace {

cube::DataCube reflectance_impl(const cube::DataCube& cube, const WhiteReference& white,
                                const std::vector<double>& dark, bool parallel) {
  if (!dark.empty() && static_cast<int>(dark.size()) != cube.channels)
    fail(Errc::invalid_argument, "dark vector length must match channel count");
  const std::vector<double> w = resample_to_bands(white, cube.wavelengths_nm, cube.fwhm_nm);

  cube::DataCube out = cube;
  std::vector<double> denom(cube.channels);
  for (int b = 0; b < cube.channels; ++b) {
    const double d = dark.empty() ? 0.0 : dark[b];
    denom[b] = w[b] - d;
    if (denom[b] <= 0.0) out.band_valid[b] = 0;
  }
  const std::size_t npx = static_cast<std::size_t>(cube.height) * cube.width;
  const double factor = white.reflectance_factor;
#pragma omp parallel for schedule(static) if (parallel)
  for (long long p = 0; p < static_cast<long long>(npx); ++p) {
    for (int b = 0; b < cube.channels; ++b) {
      if (!out.band_valid[b]) continue;
      const double d = dark.empty() ? 0.0 : dark[b];
      const double r = factor * (cube.data[p * cube.channels + b] - d) / denom[b];
      out.data[p * cube.channels + b] = std::clamp(r, 0.0, 1.5);
    }
  }
  return out;
}

}  // namespace

cube::DataCube to_reflectance(const cube::DataCube& cube, const WhiteReference& white,
                              const std::vector<double>& dark) {
  return reflectance_impl(cube, white, dark, true);
}

namespace ref {
cube::DataCube to_reflectance(const cube::DataCube& cube, const WhiteReference& white,
                              const std::vector<double>& dark) {
  return reflectance_impl(cube, white, dark, false);
}
}  // namespace ref

}  // namespace hyperdrive::radiometry
