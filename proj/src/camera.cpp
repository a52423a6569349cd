#include "surftrack/camera.hpp"

#include <fstream>
#include <json.hpp>

#include "json_format.hpp"
#include "surftrack/mesh.hpp"

namespace surftrack {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw InputError("camera focal lengths must be positive");
}

Vec2 project(const CameraIntrinsics& camera, const Vec3& p) {
  if (!(p.z() > kMinDepth)) throw NumericError("point behind camera (z <= 1e-9)");
  return {camera.fx * p.x() / p.z() + camera.cx, camera.fy * p.y() / p.z() + camera.cy};
}

Eigen::Matrix<double, 2, 3> project_jacobian(const CameraIntrinsics& camera, const Vec3& p) {
  const double iz = 1.0 / p.z();
  Eigen::Matrix<double, 2, 3> J;
  J << camera.fx * iz, 0.0, -camera.fx * p.x() * iz * iz,  //
      0.0, camera.fy * iz, -camera.fy * p.y() * iz * iz;
  return J;
}

Vec3 pixel_ray(const CameraIntrinsics& camera, const Vec2& pixel) {
  return {(pixel.x() - camera.cx) / camera.fx, (pixel.y() - camera.cy) / camera.fy, 1.0};
}

WarpResult warp(const Mesh& mesh, const PixelAnchorSet& anchors, const Vertices& V,
                const CameraIntrinsics& camera, bool with_jacobian) {
  const std::size_t n = anchors.entries.size();
  WarpResult out;
  out.pixels.resize(n);
  out.valid.assign(n, 0);
  if (with_jacobian) out.jacobians.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    const PixelAnchor& a = anchors.entries[i];
    const Face& f = mesh.faces()[static_cast<std::size_t>(a.face)];
    const Vec3 p = a.bary[0] * V.row(f[0]).transpose() + a.bary[1] * V.row(f[1]).transpose() +
                   a.bary[2] * V.row(f[2]).transpose();
    if (!(p.z() > kMinDepth)) {
      ++out.invalid_count;
      continue;
    }
    out.valid[i] = 1;
    out.pixels[i] = {camera.fx * p.x() / p.z() + camera.cx, camera.fy * p.y() / p.z() + camera.cy};
    if (with_jacobian) {
      const Eigen::Matrix<double, 2, 3> P = project_jacobian(camera, p);
      for (int k = 0; k < 3; ++k) out.jacobians[i].block<2, 3>(0, 3 * k) = a.bary[static_cast<std::size_t>(k)] * P;
    }
  }
  return out;
}

CameraIntrinsics read_camera_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open camera file: " + path.string());
  CameraIntrinsics c;
  try {
    const auto j = nlohmann::json::parse(in);
    c.fx = j.at("fx").get<double>();
    c.fy = j.at("fy").get<double>();
    c.cx = j.at("cx").get<double>();
    c.cy = j.at("cy").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError("invalid camera file " + path.string() + ": " + e.what());
  }
  c.validate();
  return c;
}

void write_camera_json(const std::filesystem::path& path, const CameraIntrinsics& camera) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write camera file: " + path.string());
  out << "{\"fx\": " << detail::format_double(camera.fx) << ", \"fy\": " << detail::format_double(camera.fy)
      << ", \"cx\": " << detail::format_double(camera.cx) << ", \"cy\": " << detail::format_double(camera.cy)
      << "}\n";
}

}  // namespace surftrack
