#include "hyperdrive/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>

#include "hyperdrive/wire.hpp"

namespace hyperdrive::simgen {

void RigConfig::validate() const {
  vnir_pattern.validate();
  swir_pattern.validate();
  vnir_correction.validate();
  swir_correction.validate();
  if (vnir_correction.rows != 24)
    fail(Errc::configuration, "VNIR correction must produce 24 bands");
  if (swir_correction.rows != 9) fail(Errc::configuration, "SWIR correction must produce 9 bands");
  if (vnir_height < 16 || vnir_width < 16 || swir_height < 16 || swir_width < 16 ||
      out_height < 16 || out_width < 16)
    fail(Errc::configuration, "rig frame dimensions must be at least 16 px");
  if (frame_rate_hz <= 0 || visnir_rate_hz <= 0 || nir_rate_hz <= 0)
    fail(Errc::configuration, "rig rates must be positive");
}

RigConfig RigConfig::full_scale() {
  RigConfig rig = test_scale(128);
  rig.out_height = 1012;
  rig.out_width = 1666;
  rig.vnir_height = 1012;
  rig.vnir_width = 1666;
  rig.swir_height = 506;
  rig.swir_width = 833;
  rig.vnir_model = geometry::CameraModel::identity_for(1012, 1666);
  rig.swir_model = geometry::CameraModel::identity_for(506, 833);
  // SWIR sensor covers the same field at half resolution.
  rig.h_swir.h = {2, 0, 0, 0, 2, 0, 0, 0, 1};
  rig.validate();
  return rig;
}

RigConfig RigConfig::test_scale(int size) {
  RigConfig rig;
  rig.vnir_pattern = mosaic::default_vnir_pattern();
  rig.swir_pattern = mosaic::default_swir_pattern();
  rig.vnir_correction = mosaic::default_vnir_correction();
  rig.swir_correction = mosaic::default_swir_correction();
  rig.vnir_height = rig.vnir_width = size;
  rig.swir_height = rig.swir_width = size;
  rig.out_height = rig.out_width = size;
  rig.vnir_model = geometry::CameraModel::identity_for(size, size);
  rig.swir_model = geometry::CameraModel::identity_for(size, size);
  rig.validate();
  return rig;
}

namespace {

// Sum of Gaussian bumps over the wavelength grid, scaled into [lo, hi].
std::vector<double> bumpy_spectrum(std::mt19937_64& rng, int n_bumps, double lo, double hi) {
  std::uniform_real_distribution<double> center(kGridStartNm, kGridEndNm);
  std::uniform_real_distribution<double> width(60.0, 250.0);
  std::uniform_real_distribution<double> amp(0.4, 1.0);
  std::vector<double> v(kGridSamples, 0.0);
  for (int b = 0; b < n_bumps; ++b) {
    const double c = center(rng), w = width(rng), a = amp(rng);
    for (int i = 0; i < kGridSamples; ++i) {
      const double d = (grid_wavelength(i) - c) / w;
      v[i] += a * std::exp(-0.5 * d * d);
    }
  }
  const auto [mn_it, mx_it] = std::minmax_element(v.begin(), v.end());
  // Copy the extrema before rescaling in place: the iterators alias v.
  const double mn = *mn_it, span = *mx_it - *mn_it;
  for (double& x : v) x = span > 0 ? lo + (hi - lo) * (x - mn) / span : (lo + hi) / 2;
  return v;
}

void fill_truth(SyntheticScene& scene) {
  const int h = scene.height(), w = scene.width();
  // RGB response bands for the reference camera.
  const double rgb_centers[3] = {640.0, 550.0, 460.0};
  const double rgb_sigma = 30.0;
  scene.rgb_truth.assign(static_cast<std::size_t>(h) * w * 3, 0.0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const auto& refl = scene.material_reflectance[scene.material_map[static_cast<std::size_t>(r) * w + c]];
      for (int i = 0; i < kGridSamples; ++i)
        scene.truth_cube.at(r, c, i) = refl[i] * scene.illumination[i];
      for (int ch = 0; ch < 3; ++ch) {
        double num = 0, den = 0;
        for (int i = 0; i < kGridSamples; ++i) {
          const double d = (grid_wavelength(i) - rgb_centers[ch]) / rgb_sigma;
          const double g = std::exp(-0.5 * d * d);
          num += g * scene.truth_cube.at(r, c, i);
          den += g;
        }
        scene.rgb_truth[(static_cast<std::size_t>(r) * w + c) * 3 + ch] = num / den;
      }
    }
  }
}

SyntheticScene make_scene_shell(int height, int width) {
  SyntheticScene scene;
  scene.truth_cube = cube::DataCube(height, width, kGridSamples);
  for (int i = 0; i < kGridSamples; ++i) {
    scene.truth_cube.wavelengths_nm[i] = grid_wavelength(i);
    scene.truth_cube.fwhm_nm[i] = 1.0;
  }
  scene.material_map.assign(static_cast<std::size_t>(height) * width, 0);
  scene.illumination.assign(kGridSamples, 1.0);
  return scene;
}

}  // namespace

SyntheticScene generate_scene(std::uint64_t seed, int height, int width, int n_materials) {
  if (height < 16 || width < 16)
    fail(Errc::invalid_argument, "scene dimensions must be at least 16 px");
  if (n_materials < 2 || n_materials > 16)
    fail(Errc::invalid_argument, "material count must be in [2, 16]");

  std::mt19937_64 rng(seed);
  SyntheticScene scene = make_scene_shell(height, width);

  // Smooth illumination, bounded away from zero.
  std::mt19937_64 illum_rng(seed ^ 0x9e3779b97f4a7c15ull);
  scene.illumination = bumpy_spectrum(illum_rng, 3, 0.4, 1.0);

  std::uniform_int_distribution<int> n_bumps(2, 4);
  for (int m = 0; m < n_materials; ++m)
    scene.material_reflectance.push_back(bumpy_spectrum(rng, n_bumps(rng), 0.15, 0.85));

  // Voronoi regions are contiguous blobs by construction.
  std::uniform_real_distribution<double> ur(0.0, 1.0);
  std::vector<double> sr(n_materials), sc(n_materials);
  for (int m = 0; m < n_materials; ++m) {
    sr[m] = ur(rng) * (height - 1);
    sc[m] = ur(rng) * (width - 1);
  }
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      int best = 0;
      double best_d = 0;
      for (int m = 0; m < n_materials; ++m) {
        const double dr = r - sr[m], dc = c - sc[m];
        const double d = dr * dr + dc * dc;
        if (m == 0 || d < best_d) {
          best = m;
          best_d = d;
        }
      }
      scene.material_map[static_cast<std::size_t>(r) * width + c] = best;
    }

  fill_truth(scene);
  return scene;
}

SyntheticScene affine_scene(int height, int width, double base, double row_slope,
                            double col_slope) {
  SyntheticScene scene = make_scene_shell(height, width);
  scene.material_reflectance.push_back(std::vector<double>(kGridSamples, 1.0));
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) {
      const double v = base + row_slope * r + col_slope * c;
      for (int i = 0; i < kGridSamples; ++i) scene.truth_cube.at(r, c, i) = v;
    }
  scene.rgb_truth.assign(static_cast<std::size_t>(height) * width * 3, 0.0);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c)
      for (int ch = 0; ch < 3; ++ch)
        scene.rgb_truth[(static_cast<std::size_t>(r) * width + c) * 3 + ch] =
            base + row_slope * r + col_slope * c;
  return scene;
}

double scene_radiance(const SyntheticScene& scene, int row, int col, double wavelength_nm) {
  if (wavelength_nm < kGridStartNm || wavelength_nm > kGridEndNm)
    fail(Errc::spectral_coverage, "wavelength outside the scene grid");
  const double pos = wavelength_nm - kGridStartNm;
  const int i0 = std::min(static_cast<int>(pos), kGridSamples - 2);
  const double t = pos - i0;
  return scene.truth_cube.at(row, col, i0) * (1.0 - t) + scene.truth_cube.at(row, col, i0 + 1) * t;
}

mosaic::MosaicFrame render_mosaic(const SyntheticScene& scene, const mosaic::MosaicPattern& pattern,
                                  const geometry::CameraModel& model,
                                  const geometry::Homography& h, int height, int width,
                                  std::int64_t timestamp_ns) {
  pattern.validate();
  for (double w : pattern.raw_wavelengths_nm)
    if (w < kGridStartNm || w > kGridEndNm)
      fail(Errc::spectral_coverage, "pattern band outside the scene wavelength grid");

  // Spectral slices are sampled spatially with the same bilinear order the
  // inverse pipeline uses.
  mosaic::MosaicFrame frame;
  frame.height = height;
  frame.width = width;
  frame.timestamp_ns = timestamp_ns;
  frame.values.assign(static_cast<std::size_t>(height) * width, 0.0);

  std::vector<Plane> slices(pattern.raw_band_count());
  for (int b = 0; b < pattern.raw_band_count(); ++b) {
    slices[b] = Plane(scene.height(), scene.width());
    for (int r = 0; r < scene.height(); ++r)
      for (int c = 0; c < scene.width(); ++c)
        slices[b].at(r, c) = scene_radiance(scene, r, c, pattern.raw_wavelengths_nm[b]);
  }

  const bool identity_model = model.k1 == 0.0 && model.k2 == 0.0;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const int band = pattern.band_at(r % pattern.tile_rows, c % pattern.tile_cols);
      geometry::Point p{static_cast<double>(c), static_cast<double>(r)};
      if (!identity_model) p = geometry::undistort(p, model, 1e-10, 50);
      const geometry::Point s = h.apply(p);
      frame.at(r, c) = bilinear_sample(slices[band], s.x, s.y);
    }
  }
  return frame;
}

radiometry::SpectrometerReading render_spectrometer(const SyntheticScene& scene, int n_samples,
                                                    double start_nm, double end_nm, double gain,
                                                    double integration_time_us,
                                                    std::int64_t timestamp_ns) {
  radiometry::SpectrometerReading out;
  out.timestamp_ns = timestamp_ns;
  out.integration_time_us = integration_time_us;
  out.wavelengths_nm.resize(n_samples);
  out.counts.resize(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    const double w = start_nm + (end_nm - start_nm) * i / (n_samples - 1);
    out.wavelengths_nm[i] = w;
    const double pos = std::clamp(w - kGridStartNm, 0.0, static_cast<double>(kGridSamples - 1));
    const int i0 = std::min(static_cast<int>(pos), kGridSamples - 2);
    const double t = pos - i0;
    const double illum = scene.illumination[i0] * (1.0 - t) + scene.illumination[i0 + 1] * t;
    // The spectrometer fiber stares at the 99% Spectralon tile.
    out.counts[i] = 0.99 * illum * gain * integration_time_us;
  }
  out.validate();
  return out;
}

std::vector<sync::TimedMessage> emit_streams(const SyntheticScene& scene, const RigConfig& rig,
                                             double duration_s, double jitter_ms,
                                             std::uint64_t seed) {
  if (duration_s <= 0) fail(Errc::invalid_argument, "stream duration must be positive");
  if (jitter_ms < 0) fail(Errc::invalid_argument, "jitter must be non-negative");
  rig.validate();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-jitter_ms * 1e6, jitter_ms * 1e6);
  auto jittered = [&](double t_s) {
    std::int64_t ns = static_cast<std::int64_t>(t_s * 1e9);
    if (jitter_ms > 0) ns += static_cast<std::int64_t>(jitter(rng));
    return ns;
  };

  auto payload_of = [](std::vector<std::byte> bytes) {
    return std::shared_ptr<const void>(
        std::make_shared<std::vector<std::byte>>(std::move(bytes)));
  };

  std::vector<sync::TimedMessage> out;

  // Render once per camera; frames repeat the static scene with new stamps.
  const auto vnir_frame = render_mosaic(scene, rig.vnir_pattern, rig.vnir_model,
                                        rig.h_vnir, rig.vnir_height, rig.vnir_width);
  const auto swir_frame = render_mosaic(scene, rig.swir_pattern, rig.swir_model,
                                        rig.h_swir, rig.swir_height, rig.swir_width);

  auto mosaic_message = [](const mosaic::MosaicFrame& f, double wavelength,
                           std::int64_t ts) {
    cube::DataCube c(f.height, f.width, 1);
    c.timestamp_ns = ts;
    c.wavelengths_nm[0] = wavelength;
    c.fwhm_nm[0] = 0.0;
    c.data.assign(f.values.begin(), f.values.end());
    return wire::encode_cube(c, wire::DType::f32);
  };
  auto rgb_message = [&](std::int64_t ts) {
    cube::DataCube c(scene.height(), scene.width(), 3);
    c.timestamp_ns = ts;
    c.wavelengths_nm = {460.0, 550.0, 640.0};
    c.fwhm_nm = {70.0, 70.0, 70.0};
    for (int r = 0; r < scene.height(); ++r)
      for (int col = 0; col < scene.width(); ++col)
        for (int ch = 0; ch < 3; ++ch)
          c.at(r, col, ch) =
              scene.rgb_truth[(static_cast<std::size_t>(r) * scene.width() + col) * 3 + (2 - ch)];
    return wire::encode_cube(c, wire::DType::f32);
  };

  // Spectrometer packets first so that, at tied timestamps, the stable sort
  // delivers the white reference before the camera triple that needs it.
  const int n_visnir = static_cast<int>(std::ceil(duration_s * rig.visnir_rate_hz - 1e-9));
  for (int i = 0; i < n_visnir; ++i) {
    const std::int64_t ts = jittered(i / rig.visnir_rate_hz);
    auto reading = render_spectrometer(scene, 256, 500.0, 1100.0, 1.0, 1000.0, ts);
    out.push_back({"visnir", ts, payload_of(wire::encode_spectrum(reading))});
  }
  const int n_nir = static_cast<int>(std::ceil(duration_s * rig.nir_rate_hz - 1e-9));
  for (int i = 0; i < n_nir; ++i) {
    const std::int64_t ts = jittered(i / rig.nir_rate_hz);
    auto reading = render_spectrometer(scene, 128, 950.0, 1700.0, rig.nir_gain, 10000.0, ts);
    out.push_back({"nir", ts, payload_of(wire::encode_spectrum(reading))});
  }

  const int n_frames = static_cast<int>(std::ceil(duration_s * rig.frame_rate_hz - 1e-9));
  for (int i = 0; i < n_frames; ++i) {
    const double t = i / rig.frame_rate_hz;
    std::int64_t ts = jittered(t);
    out.push_back({"rgb", ts, payload_of(rgb_message(ts))});
    ts = jittered(t);
    auto vf = mosaic_message(vnir_frame, 780.0, ts);
    out.push_back({"vnir", ts, payload_of(std::move(vf))});
    ts = jittered(t);
    auto sf = mosaic_message(swir_frame, 1400.0, ts);
    out.push_back({"swir", ts, payload_of(std::move(sf))});
  }

  std::stable_sort(out.begin(), out.end(),
                   [](const sync::TimedMessage& a, const sync::TimedMessage& b) {
                     return a.timestamp_ns < b.timestamp_ns;
                   });
  return out;
}

geometry::CorrespondenceSet make_correspondences(const geometry::CameraModel& model,
                                                 const geometry::Homography& h, int height,
                                                 int width, int grid) {
  geometry::CorrespondenceSet c;
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j) {
      const double y = 2.0 + (height - 5.0) * i / (grid - 1);
      const double x = 2.0 + (width - 5.0) * j / (grid - 1);
      // Source points live on the distorted sensor; targets in the RGB plane.
      const geometry::Point undist{x, y};
      const geometry::Point sensor = geometry::distort(undist, model);
      const geometry::Point target = h.apply(undist);
      c.pairs.push_back({sensor, target});
    }
  c.source_id = "camera";
  c.target_id = "rgb";
  return c;
}

}  // namespace hyperdrive::simgen
