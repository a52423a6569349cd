#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <set>

#include "surftrack/camera.hpp"
#include "surftrack/mesh.hpp"
#include "test_util.hpp"

using namespace surftrack;
using namespace testutil;

namespace {

Mesh unit_quad() {
  Vertices V(4, 3);
  V << 0, 0, 0, 1, 0, 0, 1, 1, 0, 0, 1, 0;
  return build_mesh(V, {{0, 1, 2}, {0, 2, 3}});
}

/// Grid with interior vertices jittered in the plane.
Mesh jittered_grid(int rows, int cols) {
  const Mesh g = make_grid_mesh(rows, cols, 1.0, 5.0);
  Vertices V = g.rest();
  for (int r = 1; r + 1 < rows; ++r)
    for (int c = 1; c + 1 < cols; ++c) {
      V(r * cols + c, 0) += uniform(-0.2, 0.2);
      V(r * cols + c, 1) += uniform(-0.2, 0.2);
    }
  return build_mesh(V, g.faces());
}

Eigen::MatrixXd dense(const LaplacianMatrix& A) { return Eigen::MatrixXd(A.matrix); }

}  // namespace

TEST_SUITE("mesh") {
  TEST_CASE("unit quad has five edges with unit and diagonal lengths") {
    const Mesh m = unit_quad();
    REQUIRE(m.edges().size() == 5);
    std::multiset<double> lengths(m.rest_lengths().begin(), m.rest_lengths().end());
    std::multiset<double> expected{1.0, 1.0, 1.0, 1.0, std::sqrt(2.0)};
    CHECK(lengths == expected);
  }

  TEST_CASE("10 x 13 grid vertex and face counts") {
    const Mesh m = make_grid_mesh(10, 13, 1.0, 1.0);
    CHECK(m.vertex_count() == 130);
    CHECK(m.face_count() == 216);
  }

  TEST_CASE("rest lengths equal pairwise distances over face edges") {
    const Mesh m = jittered_grid(6, 7);
    std::set<std::pair<int, int>> seen;
    for (const Face& f : m.faces())
      for (int k = 0; k < 3; ++k) {
        const int a = std::min(f[k], f[(k + 1) % 3]), b = std::max(f[k], f[(k + 1) % 3]);
        seen.insert({a, b});
      }
    REQUIRE(seen.size() == m.edges().size());
    for (std::size_t e = 0; e < m.edges().size(); ++e) {
      const auto [i, j] = m.edges()[e];
      CHECK(seen.count({i, j}) == 1);
      const double d = (m.rest().row(i) - m.rest().row(j)).norm();
      CHECK(m.rest_lengths()[e] == d);
      CHECK(m.rest_lengths()[e] > 0.0);
    }
  }

  TEST_CASE("construction errors name the face") {
    Vertices V(4, 3);
    V << 0, 0, 0, 1, 0, 0, 1, 1, 0, 2, 2, 0;
    CHECK_THROWS_WITH_AS(build_mesh(V, {{0, 1, 2}, {0, 1, 7}}), doctest::Contains("face 1"), InputError);
    CHECK_THROWS_WITH_AS(build_mesh(V, {{0, 0, 2}}), doctest::Contains("face 0"), InputError);
    CHECK_THROWS_WITH_AS(build_mesh(V, {{0, 1, 2}, {0, 2, 3}}), doctest::Contains("face 1"), InputError);
  }

  TEST_CASE("grid Laplacian: symmetric interior rows, zero row sums, annihilates rest") {
    const Mesh m = make_grid_mesh(5, 6, 2.0, 10.0);
    const LaplacianMatrix A = build_laplacian(m);
    const Eigen::MatrixXd D = dense(A);
    CHECK(A.rank_deficient.empty());
    int interior = 0;
    for (int v = 0; v < m.vertex_count(); ++v) interior += m.is_boundary(v) ? 0 : 1;
    CHECK(static_cast<int>(A.row_vertex.size()) == interior);
    CHECK((D.rowwise().sum()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((D * m.rest()).cwiseAbs().maxCoeff() < 1e-10);
    for (std::size_t r = 0; r < A.row_vertex.size(); ++r) {
      const int v = A.row_vertex[r];
      CHECK(D(static_cast<Eigen::Index>(r), v) == doctest::Approx(1.0));
      // Six neighbours on a planar grid: weights are any affine combination
      // reproducing the center, the minimal-norm one being uniform.
      for (int j : m.neighbors(v)) CHECK(D(static_cast<Eigen::Index>(r), j) == doctest::Approx(-1.0 / 6.0).epsilon(1e-9));
    }
  }

  TEST_CASE("Laplacian annihilates affine images of the rest shape") {
    const Mesh m = jittered_grid(5, 5);
    const LaplacianMatrix A = build_laplacian(m);
    for (int trial = 0; trial < 100; ++trial) {
      Eigen::Matrix3d M;
      for (int i = 0; i < 9; ++i) M.data()[i] = uniform(-2.0, 2.0);
      const Eigen::RowVector3d t(uniform(-5, 5), uniform(-5, 5), uniform(-5, 5));
      Vertices V = m.rest() * M;
      V.rowwise() += t;
      const Eigen::MatrixXd AV = A.matrix * V;
      CHECK(AV.cwiseAbs().maxCoeff() < 1e-8);
    }
  }

  TEST_CASE("anchors of a fronto-parallel plane covering the template") {
    const Mesh m = make_grid_mesh(7, 9, 16.0, 600.0);
    const CameraIntrinsics cam = default_camera();
    // Template window strictly inside the projected grid (x 256..384, y 192..288).
    Mask region(640, 480, 0);
    for (int y = 200; y < 280; ++y)
      for (int x = 260; x < 380; ++x) region(x, y) = 1;
    const PixelAnchorSet set = anchor_template_pixels(m, cam, 640, 480, &region);
    CHECK(set.entries.size() == 80u * 120u);

    const PixelAnchorSet all = anchor_template_pixels(m, cam, 640, 480);
    std::vector<int> per_face(static_cast<std::size_t>(m.face_count()), 0);
    for (const auto& a : all.entries) ++per_face[static_cast<std::size_t>(a.face)];
    // The grid projects to a 97 x 129 px lattice block, each pixel on exactly
    // one facet. A facet is a right triangle with 16 px legs: 105 lattice
    // points strictly inside, 153 including its border (Pick).
    CHECK(all.entries.size() == 97u * 129u);
    for (int n : per_face) {
      CHECK(n >= 105);
      CHECK(n <= 153);
    }
  }

  TEST_CASE("anchor at a vertex projection has unit barycentric weight on it") {
    const Mesh m = make_grid_mesh(7, 9, 16.0, 600.0);
    const CameraIntrinsics cam = default_camera();
    const PixelAnchorSet set = anchor_template_pixels(m, cam, 640, 480);
    const int k = 3 * 9 + 4;  // interior vertex
    const Vec2 px = project(cam, m.rest().row(k).transpose());
    bool found = false;
    for (const auto& a : set.entries) {
      if (a.x != static_cast<int>(px.x()) || a.y != static_cast<int>(px.y())) continue;
      found = true;
      const Face& f = m.faces()[static_cast<std::size_t>(a.face)];
      for (int c = 0; c < 3; ++c) CHECK(a.bary[c] == doctest::Approx(f[c] == k ? 1.0 : 0.0).epsilon(1e-9));
    }
    CHECK(found);
  }

  TEST_CASE("anchors round-trip through barycentric reconstruction") {
    const Mesh g = make_grid_mesh(6, 8, 16.0, 600.0);
    Vertices V = g.rest();
    for (Eigen::Index i = 0; i < V.rows(); ++i) V(i, 2) += uniform(-20.0, 20.0);
    const Mesh m = build_mesh(V, g.faces());
    const CameraIntrinsics cam{550.0, 560.0, 318.5, 241.25};
    const PixelAnchorSet set = anchor_template_pixels(m, cam, 640, 480);
    REQUIRE(!set.entries.empty());
    double worst = 0.0;
    for (const auto& a : set.entries) {
      double s = 0.0;
      for (double b : a.bary) {
        CHECK(b >= -1e-9);
        s += b;
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
      const Vec2 p = project(cam, anchor_point(m, a, m.rest()));
      worst = std::max(worst, (p - Vec2(a.x, a.y)).norm());
    }
    CHECK(worst < 1e-6);
  }

  TEST_CASE("mesh outside the view is a template/mesh misalignment") {
    const Mesh g = make_grid_mesh(3, 3, 1.0, 10.0);
    Vertices V = g.rest();
    V.col(0).array() += 1000.0;
    const Mesh m = build_mesh(V, g.faces());
    CHECK_THROWS_WITH_AS(anchor_template_pixels(m, default_camera(), 640, 480),
                         doctest::Contains("template/mesh misalignment"), InputError);
  }

  TEST_CASE("length energy at rest, under doubling, and against a loop") {
    const Mesh m = jittered_grid(5, 6);
    CHECK(length_energy(m, m.rest()) == 0.0);
    double sum_sq = 0.0;
    for (double l : m.rest_lengths()) sum_sq += l * l;
    CHECK(length_energy(m, 2.0 * m.rest()) == sum_sq);

    const Vertices V = jitter(m.rest(), 0.3);
    double loop = 0.0;
    for (std::size_t e = 0; e < m.edges().size(); ++e) {
      const double d = (V.row(m.edges()[e][0]) - V.row(m.edges()[e][1])).norm() - m.rest_lengths()[e];
      loop += d * d;
    }
    CHECK(length_energy(m, V) == doctest::Approx(loop).epsilon(1e-14));
  }

  TEST_CASE("length energy is zero iff every edge keeps its rest length") {
    const Mesh m = jittered_grid(4, 4);
    Eigen::Matrix3d R = Eigen::AngleAxisd(0.7, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
    const Vertices rigid = m.rest() * R.transpose();
    CHECK(length_energy(m, rigid) < 1e-20);
    for (int t = 0; t < 20; ++t) CHECK(length_energy(m, jitter(m.rest(), 0.1)) > 0.0);
  }

  TEST_CASE("length energy gradient matches central differences") {
    const Mesh m = jittered_grid(4, 5);
    for (int trial = 0; trial < 20; ++trial) {
      Vertices V = jitter(m.rest(), 0.3);
      const Vertices g = length_energy_gradient(m, V);
      Eigen::VectorXd fd(V.size());
      const double h = 1e-5;
      for (Eigen::Index i = 0; i < V.size(); ++i) {
        const double keep = V.data()[i];
        V.data()[i] = keep + h;
        const double ep = length_energy(m, V);
        V.data()[i] = keep - h;
        const double em = length_energy(m, V);
        V.data()[i] = keep;
        fd[i] = (ep - em) / (2 * h);
      }
      CHECK(rel_error(Eigen::Map<const Eigen::VectorXd>(g.data(), g.size()), fd) < 1e-5);
    }
  }

  TEST_CASE("coincident endpoints: value l^2 and zero gradient") {
    const Mesh m = unit_quad();
    Vertices V = m.rest();
    V.row(1) = V.row(0);
    const Vertices g = length_energy_gradient(m, V);
    CHECK(std::isfinite(g.sum()));
    double expected = 0.0;
    for (std::size_t e = 0; e < m.edges().size(); ++e) {
      const double d = (V.row(m.edges()[e][0]) - V.row(m.edges()[e][1])).norm() - m.rest_lengths()[e];
      expected += d * d;
    }
    CHECK(length_energy(m, V) == doctest::Approx(expected));
  }

  TEST_CASE("smooth energy: rest, rigid motion, dense oracle") {
    const Mesh m = jittered_grid(5, 6);
    const LaplacianMatrix A = build_laplacian(m);
    CHECK(smooth_energy(A, m.rest()) < 1e-20);
    const Eigen::Matrix3d R = Eigen::AngleAxisd(0.4, Eigen::Vector3d(0.3, -1, 2).normalized()).toRotationMatrix();
    Vertices rigid = m.rest() * R.transpose();
    rigid.rowwise() += Eigen::RowVector3d(3, -2, 7);
    CHECK(smooth_energy(A, rigid) < 1e-18);

    const Eigen::MatrixXd D = dense(A);
    for (int trial = 0; trial < 5; ++trial) {
      const Vertices V = jitter(m.rest(), 0.5);
      const Eigen::MatrixXd AV = D * V;
      const double ref = AV.squaredNorm();
      CHECK(std::abs(smooth_energy(A, V) - ref) <= 1e-10 * ref);
      const Eigen::MatrixXd gref = 2.0 * D.transpose() * AV;
      const Vertices g = smooth_energy_gradient(A, V);
      CHECK((Eigen::MatrixXd(g) - gref).norm() <= 1e-10 * gref.norm());
    }
  }

  TEST_CASE("smooth energy gradient matches central differences") {
    const Mesh m = jittered_grid(4, 5);
    const LaplacianMatrix A = build_laplacian(m);
    for (int trial = 0; trial < 20; ++trial) {
      Vertices V = jitter(m.rest(), 0.3);
      const Vertices g = smooth_energy_gradient(A, V);
      Eigen::VectorXd fd(V.size());
      const double h = 1e-5;
      for (Eigen::Index i = 0; i < V.size(); ++i) {
        const double keep = V.data()[i];
        V.data()[i] = keep + h;
        const double ep = smooth_energy(A, V);
        V.data()[i] = keep - h;
        const double em = smooth_energy(A, V);
        V.data()[i] = keep;
        fd[i] = (ep - em) / (2 * h);
      }
      CHECK(rel_error(Eigen::Map<const Eigen::VectorXd>(g.data(), g.size()), fd) < 1e-5);
    }
  }

  TEST_CASE("mesh JSON round trip is exact") {
    const Mesh m = jittered_grid(4, 5);
    const auto dir = scratch_dir("mesh_json");
    write_mesh_json(dir / "m.json", m);
    const Mesh r = read_mesh_json(dir / "m.json");
    CHECK(r.rest() == m.rest());
    CHECK(r.faces() == m.faces());
    CHECK(mesh_to_json(r) == mesh_to_json(m));
    std::ofstream(dir / "bad.json") << "{\"vertices\": [[0,0,0]]}";
    CHECK_THROWS_WITH_AS(read_mesh_json(dir / "bad.json"), doctest::Contains("bad.json"), InputError);
  }
}
