#include "surftrack/image.hpp"

#include <algorithm>
#include <cmath>

namespace surftrack {

namespace {

// Coordinates produced by warps land a few ulps outside the border on exact
// edge pixels; those count as on the border.
constexpr double kBorderSlack = 1e-9;

bool snap_to_range(double& v, int hi) {
  if (!(v >= -kBorderSlack) || v > hi + kBorderSlack) return false;
  v = std::clamp(v, 0.0, static_cast<double>(hi));
  return true;
}

}  // namespace

BilinearSample sample_bilinear(const Image& image, double x, double y) {
  BilinearSample s;
  const int w = image.width();
  const int h = image.height();
  if (w < 2 || h < 2 || !snap_to_range(x, w - 1) || !snap_to_range(y, h - 1)) return s;

  const int x0 = std::min(static_cast<int>(x), w - 2);
  const int y0 = std::min(static_cast<int>(y), h - 2);
  const double fx = x - x0;
  const double fy = y - y0;
  const double* r0 = image.row(y0) + x0;
  const double* r1 = image.row(y0 + 1) + x0;
  const double top = r0[0] + fx * (r0[1] - r0[0]);
  const double bottom = r1[0] + fx * (r1[1] - r1[0]);
  s.value = top + fy * (bottom - top);
  s.dx = (1.0 - fy) * (r0[1] - r0[0]) + fy * (r1[1] - r1[0]);
  s.dy = bottom - top;
  s.valid = true;
  return s;
}

bool sample_bilinear(const Image& image, double x, double y, double& value) {
  const int w = image.width();
  const int h = image.height();
  if (w < 2 || h < 2 || !snap_to_range(x, w - 1) || !snap_to_range(y, h - 1)) return false;
  const int x0 = std::min(static_cast<int>(x), w - 2);
  const int y0 = std::min(static_cast<int>(y), h - 2);
  const double fx = x - x0;
  const double fy = y - y0;
  const double* r0 = image.row(y0) + x0;
  const double* r1 = image.row(y0 + 1) + x0;
  const double top = r0[0] + fx * (r0[1] - r0[0]);
  const double bottom = r1[0] + fx * (r1[1] - r1[0]);
  value = top + fy * (bottom - top);
  return true;
}

bool all_set(const Mask& mask) {
  for (auto v : mask.pixels())
    if (!v) return false;
  return true;
}

}  // namespace surftrack
