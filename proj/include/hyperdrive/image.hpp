#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "hyperdrive/error.hpp"

namespace hyperdrive {

/// Single-band image plane, row-major double storage.
struct Plane {
  int height = 0;
  int width = 0;
  std::vector<double> v;

  Plane() = default;
  Plane(int h, int w, double fill = 0.0) : height(h), width(w), v(static_cast<std::size_t>(h) * w, fill) {}

  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * width + c]; }
  double at(int r, int c) const { return v[static_cast<std::size_t>(r) * width + c]; }
  std::size_t size() const { return v.size(); }
};

/// Boolean mask sharing Plane's layout.
struct Mask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> v;

  Mask() = default;
  Mask(int h, int w, bool fill = true)
      : height(h), width(w), v(static_cast<std::size_t>(h) * w, fill ? 1 : 0) {}

  std::uint8_t& at(int r, int c) { return v[static_cast<std::size_t>(r) * width + c]; }
  std::uint8_t at(int r, int c) const { return v[static_cast<std::size_t>(r) * width + c]; }
};

/// Bilinear sample at real-valued (x=col, y=row) with clamped borders.
inline double bilinear_sample(const Plane& p, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(p.width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(p.height - 1));
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  int x1 = std::min(x0 + 1, p.width - 1);
  int y1 = std::min(y0 + 1, p.height - 1);
  double tx = x - x0;
  double ty = y - y0;
  double a = p.at(y0, x0) * (1.0 - tx) + p.at(y0, x1) * tx;
  double b = p.at(y1, x0) * (1.0 - tx) + p.at(y1, x1) * tx;
  return a * (1.0 - ty) + b * ty;
}

}  // namespace hyperdrive
