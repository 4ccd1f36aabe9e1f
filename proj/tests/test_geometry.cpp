#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "hyperdrive/geometry.hpp"

using namespace hyperdrive;
using namespace hyperdrive::geometry;

namespace {

double frobenius_gap(const Homography& a, const Homography& b) {
  // Scale-normalize both to unit Frobenius norm with consistent sign.
  auto unit = [](const Homography& h) {
    double n = 0;
    for (double v : h.h) n += v * v;
    n = std::sqrt(n);
    std::array<double, 9> u;
    const double sign = h.h[8] >= 0 ? 1.0 : -1.0;
    for (int i = 0; i < 9; ++i) u[i] = sign * h.h[i] / n;
    return u;
  };
  const auto ua = unit(a), ub = unit(b);
  double d = 0;
  for (int i = 0; i < 9; ++i) d += (ua[i] - ub[i]) * (ua[i] - ub[i]);
  return std::sqrt(d);
}

Homography random_projective(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Homography h;
  h.h = {1.0 + 0.2 * u(rng), 0.2 * u(rng),  20.0 * u(rng),
         0.2 * u(rng),       1.0 + 0.2 * u(rng), 20.0 * u(rng),
         1e-4 * u(rng),      1e-4 * u(rng),  1.0};
  return h;
}

}  // namespace

TEST_CASE("homography apply / inverse / compose") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    Homography h = random_projective(rng);
    Homography hinv = h.inverse();
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    for (int i = 0; i < 10; ++i) {
      Point p{u(rng), u(rng)};
      Point q = hinv.apply(h.apply(p));
      CHECK(q.x == doctest::Approx(p.x).epsilon(1e-9));
      CHECK(q.y == doctest::Approx(p.y).epsilon(1e-9));
    }
    // compose(h, hinv) is the identity up to scale.
    CHECK(frobenius_gap(Homography::compose(h, hinv), Homography::identity()) < 1e-9);
  }
  Homography singular;
  singular.h = {1, 2, 3, 2, 4, 6, 0, 0, 0};
  CHECK_THROWS_AS(singular.inverse(), Error);
}

TEST_CASE("distort / undistort round-trip within 1e-6 px across the FOV") {
  CameraModel m = CameraModel::identity_for(480, 640);
  for (double k1 : {-0.3, -0.1, 0.0, 0.1, 0.3})
    for (double k2 : {-0.05, 0.0, 0.05}) {
      m.k1 = k1;
      m.k2 = k2;
      for (int r = 10; r < 480; r += 60)
        for (int c = 10; c < 640; c += 80) {
          const Point p{static_cast<double>(c), static_cast<double>(r)};
          const Point d = distort(p, m);
          const Point u = undistort(d, m);
          CHECK(std::hypot(u.x - p.x, u.y - p.y) < 1e-6);
        }
    }
}

TEST_CASE("undistort reports convergence failures with the residual") {
  CameraModel m = CameraModel::identity_for(100, 100);
  m.fx = m.fy = 20.0;  // huge normalized radii
  m.k1 = -3.0;
  m.k2 = 2.0;
  try {
    undistort({95.0, 95.0}, m, 1e-12, 5);
    FAIL("expected a convergence error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::convergence);
    CHECK(std::string(e.what()).find("residual") != std::string::npos);
  }
}

TEST_CASE("estimate_homography recovers exact synthetic homographies") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 200.0);
  for (int trial = 0; trial < 25; ++trial) {
    Homography truth = random_projective(rng);
    CorrespondenceSet c;
    for (int i = 0; i < 12; ++i) {
      Point s{u(rng), u(rng)};
      c.pairs.push_back({s, truth.apply(s)});
    }
    HomographyEstimate est = estimate_homography(c);
    CHECK(frobenius_gap(est.h, truth) <= 1e-8);
    CHECK(est.max_reprojection_error < 1e-6);
  }
}

TEST_CASE("estimate_homography is invariant to correspondence scaling") {
  std::mt19937_64 rng(13);
  Homography truth = random_projective(rng);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  CorrespondenceSet c, scaled;
  for (int i = 0; i < 8; ++i) {
    Point s{u(rng), u(rng)};
    Point t = truth.apply(s);
    c.pairs.push_back({s, t});
    scaled.pairs.push_back({{s.x * 1000.0, s.y * 1000.0}, t});
  }
  Homography ha = estimate_homography(c).h;
  // Same map expressed in rescaled source pixels.
  Homography expected = ha;
  for (int i = 0; i < 9; ++i)
    if (i % 3 != 2) expected.h[i] /= 1000.0;
  expected.normalize();
  CHECK(frobenius_gap(estimate_homography(scaled).h, expected) < 1e-7);
}

TEST_CASE("degenerate correspondences are rejected") {
  CorrespondenceSet few;
  few.pairs = {{{0, 0}, {0, 0}}, {{1, 0}, {1, 0}}, {{0, 1}, {0, 1}}};
  CHECK_THROWS_AS(estimate_homography(few), Error);

  CorrespondenceSet collinear;
  for (int i = 0; i < 8; ++i)
    collinear.pairs.push_back({{static_cast<double>(i), 2.0 * i}, {static_cast<double>(i), 2.0 * i}});
  try {
    estimate_homography(collinear);
    FAIL("expected a degeneracy error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::estimation);
  }
}

TEST_CASE("warp_plane with identity and translation homographies") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Plane p(10, 12);
  for (double& v : p.v) v = u(rng);

  WarpResult ident = warp_plane(p, Homography::identity(), 10, 12);
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 12; ++c) {
      CHECK(ident.plane.at(r, c) == doctest::Approx(p.at(r, c)).epsilon(1e-12));
      CHECK(ident.valid.at(r, c) == 1);
    }

  // Shift source content right by 3: output(r, c) = source(r, c - 3).
  WarpResult shifted = warp_plane(p, Homography::translation(3, 0), 10, 12);
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 12; ++c) {
      if (c < 3) {
        CHECK(shifted.valid.at(r, c) == 0);
        CHECK(shifted.plane.at(r, c) == 0.0);  // fill value
      } else {
        CHECK(shifted.valid.at(r, c) == 1);
        CHECK(shifted.plane.at(r, c) == doctest::Approx(p.at(r, c - 3)).epsilon(1e-12));
      }
    }
}

TEST_CASE("warp_plane parallel kernel is bit-identical to the serial reference") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Plane p(33, 29);
  for (double& v : p.v) v = u(rng);
  Homography h = random_projective(rng);
  for (Interp interp : {Interp::bilinear, Interp::nearest}) {
    WarpResult a = warp_plane(p, h, 40, 40, interp);
    WarpResult b = ref::warp_plane(p, h, 40, 40, interp);
    CHECK(a.valid.v == b.valid.v);
    for (std::size_t i = 0; i < a.plane.v.size(); ++i) CHECK(a.plane.v[i] == b.plane.v[i]);
  }
}

TEST_CASE("undistort_plane with zero distortion is the identity") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  Plane p(15, 17);
  for (double& v : p.v) v = u(rng);
  CameraModel m = CameraModel::identity_for(15, 17);
  Plane out = undistort_plane(p, m);
  for (std::size_t i = 0; i < p.v.size(); ++i) CHECK(out.v[i] == doctest::Approx(p.v[i]).epsilon(1e-12));
}

TEST_CASE("undistort_plane inverts distortion of a smooth field") {
  // The distorted image of an affine reference field is only piecewise
  // smooth in sensor coordinates, so bilinear resampling carries a small
  // curvature error (~1e-5 here); the check allows for it.
  CameraModel m = CameraModel::identity_for(64, 64);
  m.k1 = 0.08;
  m.k2 = -0.01;
  auto field = [](double x, double y) { return 2.0 + 0.03 * x + 0.011 * y; };
  Plane distorted(64, 64);
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c) {
      const Point ud = undistort({static_cast<double>(c), static_cast<double>(r)}, m, 1e-12, 50);
      distorted.at(r, c) = field(ud.x, ud.y);
    }
  Plane restored = undistort_plane(distorted, m);
  for (int r = 8; r < 56; ++r)
    for (int c = 8; c < 56; ++c)
      CHECK(restored.at(r, c) == doctest::Approx(field(c, r)).epsilon(1e-4));
}

TEST_CASE("correspondence and camera-model files round-trip") {
  const std::string cpath = "test_corr.tmp.txt";
  const std::string mpath = "test_model.tmp.txt";
  CorrespondenceSet c;
  c.pairs = {{{1.5, 2.25}, {3.125, 4.0}}, {{-1.0, 0.5}, {0.25, -2.0}}};
  save_correspondences(c, cpath);
  CorrespondenceSet c2 = load_correspondences(cpath);
  REQUIRE(c2.pairs.size() == 2);
  CHECK(c2.pairs[0].first.x == 1.5);
  CHECK(c2.pairs[1].second.y == -2.0);

  CameraModel m;
  m.fx = 123.5;
  m.fy = 120.25;
  m.cx = 31.5;
  m.cy = 32.5;
  m.k1 = -0.125;
  m.k2 = 0.0625;
  save_camera_model(m, mpath);
  CameraModel m2 = load_camera_model(mpath);
  CHECK(m2.fx == m.fx);
  CHECK(m2.k1 == m.k1);
  CHECK(m2.k2 == m.k2);
  CHECK_THROWS_AS(load_camera_model("missing_model.txt"), Error);
  std::remove(cpath.c_str());
  std::remove(mpath.c_str());
}
