#include "surftrack/tps.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace surftrack {

double tps_kernel(double r) { return r > 0.0 ? r * r * std::log(r) : 0.0; }

Vec2 TpsWarp::operator()(const Vec2& p) const {
  Vec2 out = affine.col(0) + affine.col(1) * p.x() + affine.col(2) * p.y();
  for (std::size_t i = 0; i < control_points_src.size(); ++i) {
    const double d2 = (p - control_points_src[i]).squaredNorm();
    if (d2 > 0.0) out += kernel_weights[i] * (0.5 * d2 * std::log(d2));
  }
  return out;
}

double TpsWarp::bending_energy() const {
  const std::size_t n = control_points_src.size();
  double e = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      e += tps_kernel((control_points_src[i] - control_points_src[j]).norm()) * kernel_weights[i].dot(kernel_weights[j]);
  return e;
}

TpsWarp fit_tps(const std::vector<Vec2>& src, const std::vector<Vec2>& dst, double regularization) {
  if (src.size() != dst.size()) throw InputError("tps: source and destination counts differ");
  if (regularization < 0.0) throw InputError("tps: regularization must be >= 0");
  const auto n = static_cast<Eigen::Index>(src.size());
  if (n < 3) throw NumericError("tps: at least three control points are required");

  Eigen::MatrixXd P(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) P.row(i) << 1.0, src[static_cast<std::size_t>(i)].x(), src[static_cast<std::size_t>(i)].y();
  Eigen::FullPivLU<Eigen::MatrixXd> plu(P);
  plu.setThreshold(1e-10);
  if (plu.rank() < 3) throw NumericError("tps: control points are collinear (rank-deficient affine part)");

  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n + 3, n + 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j)
      L(i, j) = tps_kernel((src[static_cast<std::size_t>(i)] - src[static_cast<std::size_t>(j)]).norm());
    L(i, i) += regularization;
  }
  L.block(0, n, n, 3) = P;
  L.block(n, 0, 3, n) = P.transpose();
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + 3, 2);
  for (Eigen::Index i = 0; i < n; ++i) rhs.row(i) = dst[static_cast<std::size_t>(i)].transpose();

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(L);
  const Eigen::MatrixXd sol = lu.solve(rhs);
  if (!sol.allFinite()) throw NumericError("tps: singular system");

  TpsWarp t;
  t.control_points_src = src;
  t.control_points_dst = dst;
  t.regularization = regularization;
  t.kernel_weights.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) t.kernel_weights[static_cast<std::size_t>(i)] = sol.row(i).transpose();
  t.affine = sol.bottomRows(3).transpose();
  return t;
}

UnwarpedImage unwarp_image(const Image& input, const TpsWarp& tps, int width, int height, const Rect& region) {
  UnwarpedImage out{Image(width, height, 0.0), Mask(width, height, 0)};
  const Rect r = region.intersect(full_rect(width, height));
  for (int y = r.y0; y < r.y1; ++y) {
    for (int x = r.x0; x < r.x1; ++x) {
      const Vec2 q = tps({static_cast<double>(x), static_cast<double>(y)});
      double v = 0.0;
      if (sample_bilinear(input, q.x(), q.y(), v)) {
        out.image(x, y) = v;
        out.valid(x, y) = 1;
      }
    }
  }
  return out;
}

UnwarpedImage unwarp_image(const Image& input, const TpsWarp& tps, int width, int height) {
  return unwarp_image(input, tps, width, height, full_rect(width, height));
}

}  // namespace surftrack
