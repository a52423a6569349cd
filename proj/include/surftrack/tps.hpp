#pragma once

#include <Eigen/Core>

#include <vector>

#include "surftrack/common.hpp"
#include "surftrack/image.hpp"

namespace surftrack {

/// Thin-plate spline R^2 -> R^2 with kernel U(r) = r^2 log r.
///   f(p) = affine * (1, x, y)^T + sum_i kernel_weights[i] U(|p - src_i|)
struct TpsWarp {
  std::vector<Vec2> control_points_src;
  std::vector<Vec2> control_points_dst;
  Eigen::Matrix<double, 2, 3> affine = Eigen::Matrix<double, 2, 3>::Zero();
  std::vector<Vec2> kernel_weights;
  double regularization = 0.0;

  Vec2 operator()(const Vec2& p) const;
  /// sum_d w_d^T K w_d over both output coordinates.
  double bending_energy() const;
};

inline constexpr double kDefaultTpsRegularization = 1e-6;

double tps_kernel(double r);

/// Solves [K + lambda I, P; P^T, 0] [w; a] = [dst; 0]. Throws NumericError
/// for fewer than three or collinear control points.
TpsWarp fit_tps(const std::vector<Vec2>& src, const std::vector<Vec2>& dst,
                double regularization = kDefaultTpsRegularization);

struct UnwarpedImage {
  Image image;
  Mask valid;
};

/// out(x) = input(tps(x)) with bilinear sampling for every pixel of a
/// width x height template inside `region`. Pixels outside `region` or whose
/// sample falls outside the input are invalid and hold 0.
UnwarpedImage unwarp_image(const Image& input, const TpsWarp& tps, int width, int height, const Rect& region);
UnwarpedImage unwarp_image(const Image& input, const TpsWarp& tps, int width, int height);

}  // namespace surftrack
