#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "hyperdrive/cube.hpp"
#include "hyperdrive/mosaic.hpp"

using namespace hyperdrive;

namespace {

mosaic::BandStack make_stack(int h, int w, int n, double wl0, double step, double fill) {
  mosaic::BandStack s;
  s.height = h;
  s.width = w;
  s.bands.assign(n, Plane(h, w, fill));
  for (int b = 0; b < n; ++b) {
    s.wavelengths_nm.push_back(wl0 + b * step);
    s.fwhm_nm.push_back(10.0);
  }
  return s;
}

}  // namespace

TEST_CASE("compose produces a 33-channel cube with ordered wavelengths") {
  mosaic::BandStack vnir = make_stack(20, 24, 24, 660, 10, 1.0);
  mosaic::BandStack swir = make_stack(20, 24, 9, 1100, 60, 2.0);
  vnir.timestamp_ns = 42;
  cube::DataCube out = cube::compose(vnir, swir, geometry::Homography::identity(),
                                     geometry::Homography::identity(), 20, 24);
  CHECK(out.height == 20);
  CHECK(out.width == 24);
  CHECK(out.channels == 33);
  CHECK(out.timestamp_ns == 42);
  for (int c = 1; c < 33; ++c) CHECK(out.wavelengths_nm[c] > out.wavelengths_nm[c - 1]);
  // VNIR tops out below the seam, SWIR starts above it.
  CHECK(out.wavelengths_nm[23] <= 900.0);
  CHECK(out.wavelengths_nm[24] >= 1100.0);
  for (int r = 0; r < 20; ++r) {
    CHECK(out.at(r, 3, 0) == 1.0);
    CHECK(out.at(r, 3, 24) == 2.0);
  }
}

TEST_CASE("compose rejects wrong band counts") {
  mosaic::BandStack vnir = make_stack(8, 8, 23, 660, 10, 1.0);
  mosaic::BandStack swir = make_stack(8, 8, 9, 1100, 60, 1.0);
  try {
    cube::compose(vnir, swir, {}, {}, 8, 8);
    FAIL("expected a configuration error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::configuration);
  }
}

TEST_CASE("compose rejects unsorted channel metadata") {
  mosaic::BandStack vnir = make_stack(8, 8, 24, 660, 10, 1.0);
  mosaic::BandStack swir = make_stack(8, 8, 9, 1100, 60, 1.0);
  swir.wavelengths_nm[3] = swir.wavelengths_nm[2];  // break monotonicity
  CHECK_THROWS_AS(cube::compose(vnir, swir, {}, {}, 8, 8), Error);
}

TEST_CASE("validity mask is the intersection of both camera footprints") {
  mosaic::BandStack vnir = make_stack(10, 10, 24, 660, 10, 1.0);
  mosaic::BandStack swir = make_stack(10, 10, 9, 1100, 60, 1.0);
  // VNIR shifted right 2, SWIR shifted down 3: valid region is the overlap.
  cube::DataCube out = cube::compose(vnir, swir, geometry::Homography::translation(2, 0),
                                     geometry::Homography::translation(0, 3), 10, 10);
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 10; ++c)
      CHECK(static_cast<int>(out.validity.at(r, c)) == ((c >= 2 && r >= 3) ? 1 : 0));
}

TEST_CASE("compose applies the homographies per camera") {
  mosaic::BandStack vnir = make_stack(12, 12, 24, 660, 10, 0.0);
  mosaic::BandStack swir = make_stack(6, 6, 9, 1100, 60, 5.0);
  // Column-gradient VNIR content.
  for (auto& b : vnir.bands)
    for (int r = 0; r < 12; ++r)
      for (int c = 0; c < 12; ++c) b.at(r, c) = c;
  // SWIR at half resolution scaled up by 2.
  geometry::Homography up2;
  up2.h = {2, 0, 0, 0, 2, 0, 0, 0, 1};
  cube::DataCube out =
      cube::compose(vnir, swir, geometry::Homography::identity(), up2, 12, 12);
  for (int r = 2; r < 10; ++r)
    for (int c = 2; c < 10; ++c) {
      CHECK(out.at(r, c, 5) == doctest::Approx(c).epsilon(1e-12));
      CHECK(out.at(r, c, 30) == doctest::Approx(5.0).epsilon(1e-12));
    }
}

TEST_CASE("slice_spectrum returns ascending (wavelength, value) pairs") {
  mosaic::BandStack vnir = make_stack(8, 8, 24, 660, 10, 1.5);
  mosaic::BandStack swir = make_stack(8, 8, 9, 1100, 60, 2.5);
  cube::DataCube out = cube::compose(vnir, swir, {}, {}, 8, 8);
  auto spec = cube::slice_spectrum(out, 4, 4);
  REQUIRE(spec.size() == 33);
  for (std::size_t i = 1; i < spec.size(); ++i) CHECK(spec[i].first > spec[i - 1].first);
  CHECK(spec[0].second == 1.5);
  CHECK(spec[32].second == 2.5);

  CHECK_THROWS_AS(cube::slice_spectrum(out, -1, 0), Error);
  CHECK_THROWS_AS(cube::slice_spectrum(out, 0, 99), Error);
  out.validity.at(4, 4) = 0;
  try {
    cube::slice_spectrum(out, 4, 4);
    FAIL("expected masked_pixel");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::masked_pixel);
  }
}
