#include "hyperdrive/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace hyperdrive::geometry {

Point Homography::apply(const Point& p) const {
  double w = h[6] * p.x + h[7] * p.y + h[8];
  if (std::abs(w) < 1e-300) fail(Errc::invalid_argument, "homography maps point to infinity");
  return {(h[0] * p.x + h[1] * p.y + h[2]) / w, (h[3] * p.x + h[4] * p.y + h[5]) / w};
}

double Homography::det() const {
  return h[0] * (h[4] * h[8] - h[5] * h[7]) - h[1] * (h[3] * h[8] - h[5] * h[6]) +
         h[2] * (h[3] * h[7] - h[4] * h[6]);
}

Homography Homography::inverse() const {
  const double d = det();
  double scale = 0;
  for (double v : h) scale = std::max(scale, std::abs(v));
  if (std::abs(d) < 1e-12 * scale * scale * scale)
    fail(Errc::invalid_argument, "singular homography");
  Homography inv;
  inv.h = {(h[4] * h[8] - h[5] * h[7]) / d, (h[2] * h[7] - h[1] * h[8]) / d,
           (h[1] * h[5] - h[2] * h[4]) / d, (h[5] * h[6] - h[3] * h[8]) / d,
           (h[0] * h[8] - h[2] * h[6]) / d, (h[2] * h[3] - h[0] * h[5]) / d,
           (h[3] * h[7] - h[4] * h[6]) / d, (h[1] * h[6] - h[0] * h[7]) / d,
           (h[0] * h[4] - h[1] * h[3]) / d};
  inv.normalize();
  return inv;
}

void Homography::normalize() {
  if (h[8] != 0.0)
    for (double& v : h) v /= h[8];
}

Homography Homography::compose(const Homography& a, const Homography& b) {
  Homography c;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double acc = 0;
      for (int k = 0; k < 3; ++k) acc += a.h[3 * i + k] * b.h[3 * k + j];
      c.h[3 * i + j] = acc;
    }
  c.normalize();
  return c;
}

Point distort(const Point& p, const CameraModel& model) {
  const double x = (p.x - model.cx) / model.fx;
  const double y = (p.y - model.cy) / model.fy;
  const double r2 = x * x + y * y;
  const double s = 1.0 + model.k1 * r2 + model.k2 * r2 * r2;
  return {model.cx + model.fx * x * s, model.cy + model.fy * y * s};
}

Point undistort(const Point& p, const CameraModel& model, double tol, int max_iter) {
  if (tol <= 0) fail(Errc::invalid_argument, "undistort tolerance must be positive");
  const double xd = (p.x - model.cx) / model.fx;
  const double yd = (p.y - model.cy) / model.fy;
  double x = xd, y = yd;
  for (int i = 0; i < max_iter; ++i) {
    const double r2 = x * x + y * y;
    const double s = 1.0 + model.k1 * r2 + model.k2 * r2 * r2;
    if (s == 0.0 || !std::isfinite(s)) break;
    x = xd / s;
    y = yd / s;
    Point q{model.cx + model.fx * x, model.cy + model.fy * y};
    Point back = distort(q, model);
    const double res = std::hypot(back.x - p.x, back.y - p.y);
    if (res <= tol) return q;
  }
  Point q{model.cx + model.fx * x, model.cy + model.fy * y};
  Point back = distort(q, model);
  double res = std::hypot(back.x - p.x, back.y - p.y);
  if (!std::isfinite(res)) res = std::numeric_limits<double>::infinity();
  std::ostringstream msg;
  msg << "undistort failed to converge, residual " << res << " px";
  fail(Errc::convergence, msg.str());
}

namespace {

struct NormXform {
  double scale = 1, tx = 0, ty = 0;  // p' = scale * (p - t)
  Point apply(const Point& p) const { return {scale * (p.x - tx), scale * (p.y - ty)}; }
};

NormXform hartley_normalize(const std::vector<Point>& pts) {
  NormXform n;
  for (const auto& p : pts) {
    n.tx += p.x;
    n.ty += p.y;
  }
  n.tx /= pts.size();
  n.ty /= pts.size();
  double rms = 0;
  for (const auto& p : pts) {
    const double dx = p.x - n.tx, dy = p.y - n.ty;
    rms += dx * dx + dy * dy;
  }
  rms = std::sqrt(rms / pts.size());
  n.scale = rms > 0 ? std::sqrt(2.0) / rms : 1.0;
  return n;
}

}  // namespace

HomographyEstimate estimate_homography(const CorrespondenceSet& c) {
  const std::size_t n = c.pairs.size();
  if (n < 4) fail(Errc::estimation, "homography estimation needs at least 4 correspondences");
  std::vector<Point> src(n), dst(n);
  for (std::size_t i = 0; i < n; ++i) {
    src[i] = c.pairs[i].first;
    dst[i] = c.pairs[i].second;
  }
  const NormXform ns = hartley_normalize(src);
  const NormXform nt = hartley_normalize(dst);

  Eigen::MatrixXd a(2 * n, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const Point s = ns.apply(src[i]);
    const Point t = nt.apply(dst[i]);
    a.row(2 * i) << -s.x, -s.y, -1, 0, 0, 0, t.x * s.x, t.x * s.y, t.x;
    a.row(2 * i + 1) << 0, 0, 0, -s.x, -s.y, -1, t.y * s.x, t.y * s.y, t.y;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // Rank < 8 means the correspondences do not determine a homography.
  if (sv(7) <= 1e-10 * sv(0)) fail(Errc::estimation, "degenerate correspondence configuration");
  Eigen::VectorXd hv = svd.matrixV().col(8);

  // Denormalize: H = T_t^-1 * Hn * T_s.
  Eigen::Matrix3d hn;
  hn << hv(0), hv(1), hv(2), hv(3), hv(4), hv(5), hv(6), hv(7), hv(8);
  Eigen::Matrix3d ts, tt;
  ts << ns.scale, 0, -ns.scale * ns.tx, 0, ns.scale, -ns.scale * ns.ty, 0, 0, 1;
  tt << nt.scale, 0, -nt.scale * nt.tx, 0, nt.scale, -nt.scale * nt.ty, 0, 0, 1;
  Eigen::Matrix3d hm = tt.inverse() * hn * ts;

  HomographyEstimate est;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) est.h.h[3 * i + j] = hm(i, j);
  est.h.normalize();
  const double d = est.h.det();
  if (!std::isfinite(d) || std::abs(d) < 1e-12)
    fail(Errc::estimation, "estimated homography is singular");
  for (std::size_t i = 0; i < n; ++i) {
    const Point proj = est.h.apply(src[i]);
    est.max_reprojection_error = std::max(
        est.max_reprojection_error, std::hypot(proj.x - dst[i].x, proj.y - dst[i].y));
  }
  return est;
}

WarpResult warp_plane(const Plane& plane, const Homography& h, int out_height, int out_width,
                      Interp interp) {
  const Homography hinv = h.inverse();
  WarpResult out;
  out.plane = Plane(out_height, out_width);
  out.valid = Mask(out_height, out_width, false);
  const double* m = hinv.h.data();
  // Identity maps sample at integer coordinates, where bilinear weights
  // collapse to the pixel value itself: a straight row copy gives the same
  // result without the per-pixel arithmetic.
  if (hinv.h == std::array<double, 9>{1, 0, 0, 0, 1, 0, 0, 0, 1}) {
    const int rows = std::min(out_height, plane.height);
    const int cols = std::min(out_width, plane.width);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
      std::copy_n(&plane.v[static_cast<std::size_t>(r) * plane.width], cols,
                  &out.plane.v[static_cast<std::size_t>(r) * out_width]);
      std::fill_n(&out.valid.v[static_cast<std::size_t>(r) * out_width], cols, 1);
    }
    return out;
  }
#pragma omp parallel for schedule(static)
  for (int r = 0; r < out_height; ++r) {
    for (int c = 0; c < out_width; ++c) {
      const double w = m[6] * c + m[7] * r + m[8];
      if (w == 0.0) continue;
      // Affine maps (normalized h) always hit w == 1; dividing by 1.0 is
      // exact, so the shortcut cannot change any result.
      double x = m[0] * c + m[1] * r + m[2];
      double y = m[3] * c + m[4] * r + m[5];
      if (w != 1.0) {
        x /= w;
        y /= w;
      }
      if (x < 0 || y < 0 || x > plane.width - 1 || y > plane.height - 1) continue;
      out.valid.at(r, c) = 1;
      if (interp == Interp::nearest) {
        out.plane.at(r, c) = plane.at(static_cast<int>(std::lround(y)),
                                      static_cast<int>(std::lround(x)));
      } else {
        out.plane.at(r, c) = bilinear_sample(plane, x, y);
      }
    }
  }
  return out;
}

Plane undistort_plane(const Plane& plane, const CameraModel& model) {
  Plane out(plane.height, plane.width);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < plane.height; ++r)
    for (int c = 0; c < plane.width; ++c) {
      const Point d = distort({static_cast<double>(c), static_cast<double>(r)}, model);
      out.at(r, c) = bilinear_sample(plane, d.x, d.y);
    }
  return out;
}

CorrespondenceSet load_correspondences(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::storage, "cannot open correspondence file: " + path);
  CorrespondenceSet c;
  std::string line;
  while (std::getline(in, line)) {
    auto hpos = line.find('#');
    if (hpos != std::string::npos) line.erase(hpos);
    std::istringstream ss(line);
    Point s, t;
    if (ss >> s.x >> s.y >> t.x >> t.y) c.pairs.push_back({s, t});
  }
  return c;
}

void save_correspondences(const CorrespondenceSet& c, const std::string& path) {
  std::ofstream out(path);
  out.precision(17);
  out << "# sx sy tx ty\n";
  for (const auto& [s, t] : c.pairs)
    out << s.x << " " << s.y << " " << t.x << " " << t.y << "\n";
  if (!out) fail(Errc::storage, "failed writing correspondence file: " + path);
}

CameraModel load_camera_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::storage, "cannot open camera model file: " + path);
  std::map<std::string, double> kv;
  std::string line;
  while (std::getline(in, line)) {
    auto hpos = line.find('#');
    if (hpos != std::string::npos) line.erase(hpos);
    std::istringstream ss(line);
    std::string key;
    double value;
    if (ss >> key >> value) kv[key] = value;
  }
  CameraModel m;
  auto get = [&](const char* key, double* dst, bool required) {
    auto it = kv.find(key);
    if (it != kv.end()) *dst = it->second;
    else if (required) fail(Errc::format, std::string("camera model missing key: ") + key);
  };
  get("fx", &m.fx, true);
  get("fy", &m.fy, true);
  get("cx", &m.cx, true);
  get("cy", &m.cy, true);
  get("k1", &m.k1, false);
  get("k2", &m.k2, false);
  get("fov_deg", &m.fov_deg, false);
  if (m.fx <= 0 || m.fy <= 0) fail(Errc::format, "camera model requires fx, fy > 0");
  return m;
}

void save_camera_model(const CameraModel& m, const std::string& path) {
  std::ofstream out(path);
  out.precision(17);
  out << "fx " << m.fx << "\nfy " << m.fy << "\ncx " << m.cx << "\ncy " << m.cy << "\nk1 "
      << m.k1 << "\nk2 " << m.k2 << "\nfov_deg " << m.fov_deg << "\n";
  if (!out) fail(Errc::storage, "failed writing camera model file: " + path);
}

namespace ref {

WarpResult warp_plane(const Plane& plane, const Homography& h, int out_height, int out_width,
                      Interp interp) {
  const Homography hinv = h.inverse();
  WarpResult out;
  out.plane = Plane(out_height, out_width);
  out.valid = Mask(out_height, out_width, false);
  for (int r = 0; r < out_height; ++r) {
    for (int c = 0; c < out_width; ++c) {
      const Point s = hinv.apply({static_cast<double>(c), static_cast<double>(r)});
      if (s.x < 0 || s.y < 0 || s.x > plane.width - 1 || s.y > plane.height - 1) continue;
      out.valid.at(r, c) = 1;
      out.plane.at(r, c) = interp == Interp::nearest
                               ? plane.at(static_cast<int>(std::lround(s.y)),
                                          static_cast<int>(std::lround(s.x)))
                               : bilinear_sample(plane, s.x, s.y);
    }
  }
  return out;
}

}  // namespace ref

}  // namespace hyperdrive::geometry
