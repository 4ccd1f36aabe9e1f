#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "hyperdrive/image.hpp"

namespace hyperdrive::geometry {

struct Point {
  double x = 0;
  double y = 0;
};

/// Pinhole intrinsics with a two-term radial distortion model.
struct CameraModel {
  double fx = 1, fy = 1;
  double cx = 0, cy = 0;
  double k1 = 0, k2 = 0;
  double fov_deg = 25.0;

  static CameraModel identity_for(int height, int width) {
    CameraModel m;
    m.fx = m.fy = width;  // unit normalized coords span ~1 image width
    m.cx = (width - 1) / 2.0;
    m.cy = (height - 1) / 2.0;
    return m;
  }
};

struct Homography {
  // Row-major 3x3, scale-normalized so h[8] == 1 when nonzero.
  std::array<double, 9> h{1, 0, 0, 0, 1, 0, 0, 0, 1};

  Point apply(const Point& p) const;
  Homography inverse() const;  // throws invalid_argument on singular h
  double det() const;
  void normalize();

  static Homography identity() { return {}; }
  static Homography translation(double dx, double dy) {
    Homography t;
    t.h = {1, 0, dx, 0, 1, dy, 0, 0, 1};
    return t;
  }
  static Homography compose(const Homography& a, const Homography& b);  // a*b
};

struct CorrespondenceSet {
  std::vector<std::pair<Point, Point>> pairs;  // (source px, target px)
  std::string source_id;
  std::string target_id;
};

Point distort(const Point& p, const CameraModel& model);

/// Fixed-point inversion of `distort`. Throws a convergence error (carrying
/// the final residual) if |distort(q) - p| > tol after max_iter iterations.
Point undistort(const Point& p, const CameraModel& model, double tol = 1e-8, int max_iter = 25);

struct HomographyEstimate {
  Homography h;
  double max_reprojection_error = 0;
};

/// Normalized DLT (Hartley normalization, least-squares null space).
HomographyEstimate estimate_homography(const CorrespondenceSet& c);

enum class Interp { nearest, bilinear };

struct WarpResult {
  Plane plane;
  Mask valid;
};

/// Inverse-mapping warp of `plane` by `h` into an out_height x out_width
/// frame; out-of-bounds samples get fill value 0 and a cleared mask bit.
WarpResult warp_plane(const Plane& plane, const Homography& h, int out_height, int out_width,
                      Interp interp = Interp::bilinear);

/// Resample a distorted sensor plane onto undistorted coordinates
/// (per-output-pixel forward distortion lookup; no iteration needed).
Plane undistort_plane(const Plane& plane, const CameraModel& model);

// Correspondence file: one "sx sy tx ty" per line, '#' comments.
CorrespondenceSet load_correspondences(const std::string& path);
void save_correspondences(const CorrespondenceSet& c, const std::string& path);

// Camera model file: key value pairs (fx fy cx cy k1 k2 fov_deg).
CameraModel load_camera_model(const std::string& path);
void save_camera_model(const CameraModel& m, const std::string& path);

namespace ref {
WarpResult warp_plane(const Plane& plane, const Homography& h, int out_height, int out_width,
                      Interp interp = Interp::bilinear);
}  // namespace ref

}  // namespace hyperdrive::geometry
