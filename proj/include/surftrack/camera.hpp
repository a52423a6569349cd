#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <vector>

#include "surftrack/common.hpp"

namespace surftrack {

class Mesh;
struct PixelAnchorSet;

/// Pinhole intrinsics. The world frame is the camera frame.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  /// Throws InputError unless fx > 0 and fy > 0.
  void validate() const;
};

inline constexpr double kMinDepth = 1e-9;

/// (fx x/z + cx, fy y/z + cy). Throws NumericError for z <= kMinDepth.
Vec2 project(const CameraIntrinsics& camera, const Vec3& p);

/// d project / d p, valid for z > kMinDepth.
Eigen::Matrix<double, 2, 3> project_jacobian(const CameraIntrinsics& camera, const Vec3& p);

/// Ray direction (z = 1) through a pixel.
Vec3 pixel_ray(const CameraIntrinsics& camera, const Vec2& pixel);

/// W(x; V) for every anchor. jacobian[i] is d W / d (v_a, v_b, v_c) for the
/// anchor's facet vertices in face order, columns (xa, ya, za, xb, ...).
struct WarpResult {
  std::vector<Vec2> pixels;
  std::vector<Eigen::Matrix<double, 2, 9>> jacobians;
  std::vector<std::uint8_t> valid;
  int invalid_count = 0;
};

/// Anchors at non-positive depth under V are marked invalid and counted.
WarpResult warp(const Mesh& mesh, const PixelAnchorSet& anchors, const Vertices& V,
                const CameraIntrinsics& camera, bool with_jacobian = true);

CameraIntrinsics read_camera_json(const std::filesystem::path& path);
void write_camera_json(const std::filesystem::path& path, const CameraIntrinsics& camera);

}  // namespace surftrack
