#pragma once

#include <Eigen/SparseCore>

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "surftrack/camera.hpp"
#include "surftrack/common.hpp"
#include "surftrack/image.hpp"

namespace surftrack {

using Face = std::array<int, 3>;
using Edge = std::array<int, 2>;

/// Triangular mesh with its rest shape. Immutable after construction.
class Mesh {
 public:
  /// Throws InputError naming the offending face for out-of-range indices,
  /// repeated indices, or zero rest area.
  Mesh(Vertices rest_vertices, std::vector<Face> faces);

  const Vertices& rest() const { return rest_; }
  const std::vector<Face>& faces() const { return faces_; }
  /// Unique undirected edges (i < j), sorted lexicographically.
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<double>& rest_lengths() const { return rest_lengths_; }

  int vertex_count() const { return static_cast<int>(rest_.rows()); }
  int face_count() const { return static_cast<int>(faces_.size()); }
  double mean_edge_length() const { return mean_edge_length_; }

  /// Sorted 1-ring neighbours of vertex v.
  const std::vector<int>& neighbors(int v) const { return neighbors_[static_cast<std::size_t>(v)]; }
  /// True when v touches an edge that belongs to exactly one face.
  bool is_boundary(int v) const { return boundary_[static_cast<std::size_t>(v)]; }

 private:
  Vertices rest_;
  std::vector<Face> faces_;
  std::vector<Edge> edges_;
  std::vector<double> rest_lengths_;
  std::vector<std::vector<int>> neighbors_;
  std::vector<bool> boundary_;
  double mean_edge_length_ = 0.0;
};

Mesh build_mesh(Vertices rest_vertices, std::vector<Face> faces);

/// rows x cols vertex grid on the plane z = depth, centered on the optical
/// axis, with the given spacing. Each cell is split along its (0,0)-(1,1)
/// diagonal, so interior vertices have six neighbours.
Mesh make_grid_mesh(int rows, int cols, double spacing, double depth);

/// Sparse smoothing operator: one row per interior vertex, columns over all
/// vertices. Each row is e_i - sum_j w_j e_j with affine-combination weights
/// fitted on the rest shape.
struct LaplacianMatrix {
  Eigen::SparseMatrix<double, Eigen::RowMajor> matrix;
  std::vector<int> row_vertex;
  /// Vertices whose rest 1-ring could not reproduce them exactly; their row
  /// holds the minimal-norm least-squares weights.
  std::vector<int> rank_deficient;
};

LaplacianMatrix build_laplacian(const Mesh& mesh);

struct PixelAnchor {
  int x = 0;
  int y = 0;
  int face = 0;
  std::array<double, 3> bary{};
};

struct PixelAnchorSet {
  std::vector<PixelAnchor> entries;
  int template_width = 0;
  int template_height = 0;

  /// Template-size mask of anchored pixels.
  Mask mask() const;
  /// Smallest rectangle holding every anchored pixel.
  Rect bounds() const;
};

/// Anchors every template pixel whose back-projected ray hits the rest mesh
/// (front-most facet). An optional mask limits the candidate pixels; a
/// stride > 1 keeps every stride-th pixel along each axis.
PixelAnchorSet anchor_template_pixels(const Mesh& mesh, const CameraIntrinsics& camera, int template_width,
                                      int template_height, const Mask* mask = nullptr, int stride = 1);

/// Same ray casting against the mesh posed at V; the result may be empty.
PixelAnchorSet cast_pixels(const Mesh& mesh, const Vertices& V, const CameraIntrinsics& camera, int width, int height,
                           const Mask* mask = nullptr, int stride = 1);

/// Barycentric reconstruction of an anchor's 3D point under V.
Vec3 anchor_point(const Mesh& mesh, const PixelAnchor& anchor, const Vertices& V);

/// Sum over edges of (|v_i - v_j| - l_ij)^2.
double length_energy(const Mesh& mesh, const Vertices& V);
/// Gradient of length_energy, one row per vertex. Coincident endpoints
/// contribute zero (subgradient choice).
Vertices length_energy_gradient(const Mesh& mesh, const Vertices& V);

/// ||A V||_F^2
double smooth_energy(const LaplacianMatrix& A, const Vertices& V);
/// 2 A^T A V
Vertices smooth_energy_gradient(const LaplacianMatrix& A, const Vertices& V);

/// Mesh file: {"vertices": [[x,y,z],...], "faces": [[i,j,k],...]}, 0-based,
/// in scene units (the harness uses mm). Written with fixed key order and 17 significant digits.
Mesh read_mesh_json(const std::filesystem::path& path);
void write_mesh_json(const std::filesystem::path& path, const Mesh& mesh);
std::string mesh_to_json(const Mesh& mesh);

/// Vertices as a JSON array of [x,y,z] with 17 significant digits.
std::string vertices_to_json(const Vertices& V);

}  // namespace surftrack
