#include "surftrack/mesh.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <map>
#include <sstream>

#include "json_format.hpp"

namespace surftrack {

Mesh::Mesh(Vertices rest_vertices, std::vector<Face> faces) : rest_(std::move(rest_vertices)), faces_(std::move(faces)) {
  const int nv = static_cast<int>(rest_.rows());
  if (nv < 3) throw InputError("mesh needs at least 3 vertices");
  if (faces_.empty()) throw InputError("mesh needs at least one face");

  std::map<Edge, int> edge_faces;
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    const Face& face = faces_[f];
    for (int idx : face) {
      if (idx < 0 || idx >= nv)
        throw InputError("face " + std::to_string(f) + " has out-of-range vertex index " + std::to_string(idx));
    }
    if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2])
      throw InputError("face " + std::to_string(f) + " is degenerate (repeated vertex)");
    const Vec3 a = rest_.row(face[0]);
    const Vec3 b = rest_.row(face[1]);
    const Vec3 c = rest_.row(face[2]);
    const double scale = std::max({(b - a).norm(), (c - a).norm(), (c - b).norm()});
    if (!((b - a).cross(c - a).norm() > 1e-12 * scale * scale))
      throw InputError("face " + std::to_string(f) + " is degenerate (zero rest area)");
    for (int k = 0; k < 3; ++k) {
      const int i = face[static_cast<std::size_t>(k)];
      const int j = face[static_cast<std::size_t>((k + 1) % 3)];
      ++edge_faces[{std::min(i, j), std::max(i, j)}];
    }
  }

  neighbors_.resize(static_cast<std::size_t>(nv));
  boundary_.assign(static_cast<std::size_t>(nv), false);
  edges_.reserve(edge_faces.size());
  rest_lengths_.reserve(edge_faces.size());
  double total = 0.0;
  for (const auto& [e, count] : edge_faces) {
    edges_.push_back(e);
    const double l = (rest_.row(e[0]) - rest_.row(e[1])).norm();
    rest_lengths_.push_back(l);
    total += l;
    neighbors_[static_cast<std::size_t>(e[0])].push_back(e[1]);
    neighbors_[static_cast<std::size_t>(e[1])].push_back(e[0]);
    if (count == 1) {
      boundary_[static_cast<std::size_t>(e[0])] = true;
      boundary_[static_cast<std::size_t>(e[1])] = true;
    }
  }
  for (auto& n : neighbors_) std::sort(n.begin(), n.end());
  mean_edge_length_ = total / static_cast<double>(edges_.size());
}

Mesh build_mesh(Vertices rest_vertices, std::vector<Face> faces) { return Mesh(std::move(rest_vertices), std::move(faces)); }

Mesh make_grid_mesh(int rows, int cols, double spacing, double depth) {
  if (rows < 2 || cols < 2) throw InputError("grid mesh needs at least 2x2 vertices");
  Vertices V(rows * cols, 3);
  const double ox = 0.5 * (cols - 1) * spacing;
  const double oy = 0.5 * (rows - 1) * spacing;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) V.row(r * cols + c) << c * spacing - ox, r * spacing - oy, depth;
  std::vector<Face> faces;
  faces.reserve(static_cast<std::size_t>(2 * (rows - 1) * (cols - 1)));
  for (int r = 0; r + 1 < rows; ++r) {
    for (int c = 0; c + 1 < cols; ++c) {
      const int v00 = r * cols + c;
      const int v01 = v00 + 1;
      const int v10 = v00 + cols;
      const int v11 = v10 + 1;
      faces.push_back({v00, v01, v11});
      faces.push_back({v00, v11, v10});
    }
  }
  return Mesh(std::move(V), std::move(faces));
}

LaplacianMatrix build_laplacian(const Mesh& mesh) {
  LaplacianMatrix L;
  std::vector<Eigen::Triplet<double>> triplets;
  const double tol = 1e-9 * mesh.mean_edge_length();
  int row = 0;
  for (int i = 0; i < mesh.vertex_count(); ++i) {
    if (mesh.is_boundary(i)) continue;
    const auto& nb = mesh.neighbors(i);
    const int k = static_cast<int>(nb.size());
    if (k < 3) continue;

    // Minimise |sum_j w_j (v_i - v_j)| subject to sum_j w_j = 1 with the
    // minimal-norm w: w = 1/k + z, z in the complement of the ones vector.
    Eigen::MatrixXd D(3, k);
    for (int c = 0; c < k; ++c) D.col(c) = (mesh.rest().row(i) - mesh.rest().row(nb[static_cast<std::size_t>(c)])).transpose();
    const Eigen::MatrixXd P = Eigen::MatrixXd::Identity(k, k) - Eigen::MatrixXd::Constant(k, k, 1.0 / k);
    const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(k, 1.0 / k);
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(D * P);
    cod.setThreshold(1e-12);
    const Eigen::VectorXd z = -cod.solve(D * uniform);
    const Eigen::VectorXd w = uniform + P * z;
    if ((D * w).norm() > tol) L.rank_deficient.push_back(i);

    triplets.emplace_back(row, i, 1.0);
    for (int c = 0; c < k; ++c) triplets.emplace_back(row, nb[static_cast<std::size_t>(c)], -w(c));
    L.row_vertex.push_back(i);
    ++row;
  }
  if (row == 0) throw InputError("mesh has no interior vertex for the Laplacian");
  L.matrix.resize(row, mesh.vertex_count());
  L.matrix.setFromTriplets(triplets.begin(), triplets.end());
  L.matrix.makeCompressed();
  return L;
}

Mask PixelAnchorSet::mask() const {
  Mask m(template_width, template_height, 0);
  for (const auto& a : entries) m(a.x, a.y) = 1;
  return m;
}

Rect PixelAnchorSet::bounds() const {
  if (entries.empty()) return {};
  Rect r{entries.front().x, entries.front().y, entries.front().x + 1, entries.front().y + 1};
  for (const auto& a : entries) {
    r.x0 = std::min(r.x0, a.x);
    r.y0 = std::min(r.y0, a.y);
    r.x1 = std::max(r.x1, a.x + 1);
    r.y1 = std::max(r.y1, a.y + 1);
  }
  return r;
}

PixelAnchorSet cast_pixels(const Mesh& mesh, const Vertices& V, const CameraIntrinsics& camera, int template_width,
                           int template_height, const Mask* mask, int stride) {
  camera.validate();
  if (V.rows() != mesh.vertex_count()) throw InputError("vertex count does not match the mesh");
  if (stride < 1) throw InputError("anchor stride must be >= 1");
  constexpr double kBaryClamp = 1e-12;
  const auto npx = static_cast<std::size_t>(template_width) * static_cast<std::size_t>(template_height);
  std::vector<double> best_t(npx, std::numeric_limits<double>::infinity());
  std::vector<PixelAnchor> best(npx);

  for (int f = 0; f < mesh.face_count(); ++f) {
    const Face& face = mesh.faces()[static_cast<std::size_t>(f)];
    const Vec3 v0 = V.row(face[0]);
    const Vec3 v1 = V.row(face[1]);
    const Vec3 v2 = V.row(face[2]);
    if (v0.z() <= kMinDepth || v1.z() <= kMinDepth || v2.z() <= kMinDepth) continue;
    const Vec2 p0 = project(camera, v0), p1 = project(camera, v1), p2 = project(camera, v2);
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min({p0.x(), p1.x(), p2.x()}))));
    const int x1 = std::min(template_width - 1, static_cast<int>(std::ceil(std::max({p0.x(), p1.x(), p2.x()}))));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min({p0.y(), p1.y(), p2.y()}))));
    const int y1 = std::min(template_height - 1, static_cast<int>(std::ceil(std::max({p0.y(), p1.y(), p2.y()}))));
    const Vec3 e1 = v1 - v0;
    const Vec3 e2 = v2 - v0;

    for (int y = y0; y <= y1; ++y) {
      if (y % stride) continue;
      for (int x = x0; x <= x1; ++x) {
        if (x % stride) continue;
        if (mask && !(*mask)(x, y)) continue;
        // Moller-Trumbore with the ray origin at the camera center.
        const Vec3 d = pixel_ray(camera, {static_cast<double>(x), static_cast<double>(y)});
        const Vec3 pvec = d.cross(e2);
        const double det = e1.dot(pvec);
        if (std::abs(det) < 1e-300) continue;
        const double inv = 1.0 / det;
        const Vec3 tvec = -v0;
        double u = tvec.dot(pvec) * inv;
        const Vec3 qvec = tvec.cross(e1);
        double v = d.dot(qvec) * inv;
        const double t = e2.dot(qvec) * inv;
        if (u < -kBaryClamp || v < -kBaryClamp || u + v > 1.0 + kBaryClamp || !(t > 0.0)) continue;
        u = std::max(u, 0.0);
        v = std::max(v, 0.0);
        if (u + v > 1.0) {
          const double s = u + v;
          u /= s;
          v /= s;
        }
        const std::size_t idx = static_cast<std::size_t>(y) * template_width + x;
        if (t < best_t[idx]) {
          best_t[idx] = t;
          best[idx] = PixelAnchor{x, y, f, {1.0 - u - v, u, v}};
        }
      }
    }
  }

  PixelAnchorSet set;
  set.template_width = template_width;
  set.template_height = template_height;
  for (std::size_t i = 0; i < npx; ++i)
    if (std::isfinite(best_t[i])) set.entries.push_back(best[i]);
  return set;
}

PixelAnchorSet anchor_template_pixels(const Mesh& mesh, const CameraIntrinsics& camera, int template_width,
                                      int template_height, const Mask* mask, int stride) {
  PixelAnchorSet set = cast_pixels(mesh, mesh.rest(), camera, template_width, template_height, mask, stride);
  if (set.entries.empty()) throw InputError("template/mesh misalignment: no template pixel hits the rest mesh");
  return set;
}

Vec3 anchor_point(const Mesh& mesh, const PixelAnchor& anchor, const Vertices& V) {
  const Face& f = mesh.faces()[static_cast<std::size_t>(anchor.face)];
  return anchor.bary[0] * V.row(f[0]).transpose() + anchor.bary[1] * V.row(f[1]).transpose() +
         anchor.bary[2] * V.row(f[2]).transpose();
}

double length_energy(const Mesh& mesh, const Vertices& V) {
  double e = 0.0;
  for (std::size_t k = 0; k < mesh.edges().size(); ++k) {
    const auto& [i, j] = mesh.edges()[k];
    const double r = (V.row(i) - V.row(j)).norm() - mesh.rest_lengths()[k];
    e += r * r;
  }
  return e;
}

Vertices length_energy_gradient(const Mesh& mesh, const Vertices& V) {
  Vertices g = Vertices::Zero(V.rows(), 3);
  for (std::size_t k = 0; k < mesh.edges().size(); ++k) {
    const auto& [i, j] = mesh.edges()[k];
    const Eigen::RowVector3d d = V.row(i) - V.row(j);
    const double len = d.norm();
    if (len == 0.0) continue;
    const Eigen::RowVector3d gi = (2.0 * (len - mesh.rest_lengths()[k]) / len) * d;
    g.row(i) += gi;
    g.row(j) -= gi;
  }
  return g;
}

double smooth_energy(const LaplacianMatrix& A, const Vertices& V) {
  const Vertices AV = A.matrix * V;
  return AV.squaredNorm();
}

Vertices smooth_energy_gradient(const LaplacianMatrix& A, const Vertices& V) {
  const Vertices AV = A.matrix * V;
  return 2.0 * (A.matrix.transpose() * AV);
}

std::string vertices_to_json(const Vertices& V) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < V.rows(); ++i) {
    if (i) s += ", ";
    s += "[" + detail::format_double(V(i, 0)) + ", " + detail::format_double(V(i, 1)) + ", " +
         detail::format_double(V(i, 2)) + "]";
  }
  return s + "]";
}

std::string mesh_to_json(const Mesh& mesh) {
  std::ostringstream out;
  out << "{\"vertices\": " << vertices_to_json(mesh.rest()) << ", \"faces\": [";
  for (std::size_t f = 0; f < mesh.faces().size(); ++f) {
    const Face& face = mesh.faces()[f];
    out << (f ? ", " : "") << "[" << face[0] << ", " << face[1] << ", " << face[2] << "]";
  }
  out << "]}\n";
  return out.str();
}

void write_mesh_json(const std::filesystem::path& path, const Mesh& mesh) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write mesh file: " + path.string());
  out << mesh_to_json(mesh);
}

Mesh read_mesh_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open mesh file: " + path.string());
  Vertices V;
  std::vector<Face> faces;
  try {
    const auto j = nlohmann::json::parse(in);
    const auto& jv = j.at("vertices");
    V.resize(static_cast<Eigen::Index>(jv.size()), 3);
    for (std::size_t i = 0; i < jv.size(); ++i)
      for (int c = 0; c < 3; ++c) V(static_cast<Eigen::Index>(i), c) = jv.at(i).at(static_cast<std::size_t>(c)).get<double>();
    for (const auto& jf : j.at("faces")) faces.push_back({jf.at(0).get<int>(), jf.at(1).get<int>(), jf.at(2).get<int>()});
  } catch (const nlohmann::json::exception& e) {
    throw InputError("invalid mesh file " + path.string() + ": " + e.what());
  }
  return Mesh(std::move(V), std::move(faces));
}

}  // namespace surftrack
