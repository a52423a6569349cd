#include "surftrack/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "surftrack/common.hpp"

namespace surftrack {

std::string_view to_string(SimilarityKind kind) {
  switch (kind) {
    case SimilarityKind::Ssd: return "SSD";
    case SimilarityKind::Ncc: return "NCC";
    case SimilarityKind::Mi: return "MI";
    case SimilarityKind::Huber: return "HUBER";
    case SimilarityKind::Tukey: return "TUKEY";
  }
  return "?";
}

std::string valid_similarity_kinds() { return "SSD, NCC, MI, HUBER, TUKEY"; }

SimilarityKind parse_similarity_kind(std::string_view name) {
  if (name == "SSD") return SimilarityKind::Ssd;
  if (name == "NCC") return SimilarityKind::Ncc;
  if (name == "MI") return SimilarityKind::Mi;
  if (name == "HUBER") return SimilarityKind::Huber;
  if (name == "TUKEY") return SimilarityKind::Tukey;
  throw InputError("unknown similarity kind '" + std::string(name) + "' (valid: " + valid_similarity_kinds() + ")");
}

void SimilaritySpec::validate() const {
  if (!(huber_k > 0.0)) throw InputError("similarity.huber_k must be > 0");
  if (!(tukey_c > 0.0)) throw InputError("similarity.tukey_c must be > 0");
  if (mi_bins < 4) throw InputError("similarity.mi_bins must be >= 4");
}

double wrap_angle(double a) {
  double r = std::remainder(a, 2.0 * std::numbers::pi);
  if (r <= -std::numbers::pi) r += 2.0 * std::numbers::pi;
  return r;
}

namespace {

double weight_at(std::span<const double> w, Eigen::Index i) {
  return w.empty() ? 1.0 : w[static_cast<std::size_t>(i)];
}

void check_weights(std::span<const double> w, std::size_t n) {
  if (!w.empty() && w.size() != n) throw InputError("weight count does not match the sample count");
}

}  // namespace

LossValue ssd(const Residuals& e, std::span<const double> weights) {
  check_weights(weights, static_cast<std::size_t>(e.rows()));
  LossValue out;
  out.derivative.resizeLike(e);
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    const double w = weight_at(weights, i);
    out.value += w * e.row(i).squaredNorm();
    out.derivative.row(i) = 2.0 * w * e.row(i);
  }
  return out;
}

LossValue angular_ssd(const Residuals& e, std::span<const double> weights) {
  Residuals wrapped = e.unaryExpr([](double a) { return wrap_angle(a); });
  return ssd(wrapped, weights);
}

double huber_rho(double r, double k) {
  r = std::abs(r);
  return r <= k ? 0.5 * r * r : k * r - 0.5 * k * k;
}

double tukey_rho(double r, double c) {
  r = std::abs(r);
  if (r >= c) return c * c / 6.0;
  // 1 - (1 - s)^3 expanded so small residuals keep full precision.
  const double s = (r / c) * (r / c);
  return c * c / 6.0 * (s * (3.0 - s * (3.0 - s)));
}

RobustValue huber(const Residuals& e, double k, std::span<const double> weights) {
  if (!(k > 0.0)) throw InputError("huber k must be > 0");
  check_weights(weights, static_cast<std::size_t>(e.rows()));
  RobustValue out;
  out.irls_weights.resize(static_cast<std::size_t>(e.rows()));
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    const double r = e.row(i).norm();
    out.value += weight_at(weights, i) * huber_rho(r, k);
    out.irls_weights[static_cast<std::size_t>(i)] = r <= k ? 1.0 : k / r;
  }
  return out;
}

RobustValue tukey(const Residuals& e, double c, std::span<const double> weights) {
  if (!(c > 0.0)) throw InputError("tukey c must be > 0");
  check_weights(weights, static_cast<std::size_t>(e.rows()));
  RobustValue out;
  out.irls_weights.resize(static_cast<std::size_t>(e.rows()));
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    const double r = e.row(i).norm();
    out.value += weight_at(weights, i) * tukey_rho(r, c);
    const double u = 1.0 - (r / c) * (r / c);
    out.irls_weights[static_cast<std::size_t>(i)] = r < c ? u * u : 0.0;
  }
  return out;
}

double robust_scale(const Residuals& e, std::span<const double> weights) {
  check_weights(weights, static_cast<std::size_t>(e.rows()));
  std::vector<double> r;
  r.reserve(static_cast<std::size_t>(e.rows()));
  for (Eigen::Index i = 0; i < e.rows(); ++i)
    if (weight_at(weights, i) > 0.0) r.push_back(e.row(i).norm());
  if (r.empty()) return 0.0;
  const auto mid = r.begin() + static_cast<std::ptrdiff_t>(r.size() / 2);
  std::nth_element(r.begin(), mid, r.end());
  double med = *mid;
  if (r.size() % 2 == 0) med = 0.5 * (med + *std::max_element(r.begin(), mid));
  return 1.4826 * med;
}

NccValue ncc(std::span<const double> a, std::span<const double> b, std::span<const double> weights) {
  const std::size_t n = a.size();
  if (b.size() != n) throw InputError("ncc: field sizes differ");
  if (n < 2) throw InputError("ncc: at least two samples are required");
  check_weights(weights, n);
  auto wt = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };

  double sw = 0.0, sa = 0.0, sb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sw += wt(i);
    sa += wt(i) * a[i];
    sb += wt(i) * b[i];
  }
  NccValue out;
  out.gradient.assign(n, 0.0);
  if (!(sw > 0.0)) {
    out.degenerate = true;
    return out;
  }
  const double ma = sa / sw;
  const double mb = sb / sw;
  double saa = 0.0, sbb = 0.0, sab = 0.0, raa = 0.0, rbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    saa += wt(i) * da * da;
    sbb += wt(i) * db * db;
    sab += wt(i) * da * db;
    raa += wt(i) * a[i] * a[i];
    rbb += wt(i) * b[i] * b[i];
  }
  if (!(saa > 1e-12 * raa) || !(sbb > 1e-12 * rbb)) {
    out.degenerate = true;
    return out;
  }
  const double denom = std::sqrt(saa * sbb);
  const double r = sab / denom;
  out.value = std::clamp(r, -1.0, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    out.gradient[i] = wt(i) * ((a[i] - ma) / denom - r * (b[i] - mb) / sbb);
  return out;
}

double bspline3(double x) {
  x = std::abs(x);
  if (x < 1.0) return 2.0 / 3.0 - x * x + 0.5 * x * x * x;
  if (x < 2.0) {
    const double t = 2.0 - x;
    return t * t * t / 6.0;
  }
  return 0.0;
}

double bspline3_derivative(double x) {
  const double s = x < 0.0 ? -1.0 : 1.0;
  const double ax = std::abs(x);
  if (ax < 1.0) return s * (-2.0 * ax + 1.5 * ax * ax);
  if (ax < 2.0) {
    const double t = 2.0 - ax;
    return s * (-0.5 * t * t);
  }
  return 0.0;
}

double mutual_information_from_joint(const Eigen::MatrixXd& joint) {
  const double total = joint.sum();
  if (!(total > 0.0)) throw InputError("mutual information of an empty histogram");
  const Eigen::MatrixXd p = joint / total;
  const Eigen::VectorXd pa = p.rowwise().sum();
  const Eigen::RowVectorXd pb = p.colwise().sum();
  double mi = 0.0;
  for (Eigen::Index u = 0; u < p.rows(); ++u)
    for (Eigen::Index v = 0; v < p.cols(); ++v)
      if (p(u, v) > 0.0) mi += p(u, v) * std::log(p(u, v) / (pa(u) * pb(v)));
  return std::max(mi, 0.0);
}

MiValue mutual_information(std::span<const double> a, std::span<const double> b, int bins,
                           std::span<const double> weights, bool parzen) {
  const std::size_t n = a.size();
  if (n == 0) throw InputError("mutual information of an empty input");
  if (b.size() != n) throw InputError("mutual information: field sizes differ");
  if (bins < (parzen ? 6 : 4)) throw InputError("mutual information: too few bins");
  check_weights(weights, n);
  auto wt = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };

  MiValue out;
  out.gradient.assign(n, 0.0);
  const auto B = static_cast<Eigen::Index>(bins);
  Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(B, B);
  double sw = 0.0;
  for (std::size_t i = 0; i < n; ++i) sw += wt(i);
  if (!(sw > 0.0)) return out;

  if (!parzen) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto u = std::min<Eigen::Index>(B - 1, static_cast<Eigen::Index>(std::clamp(a[i], 0.0, 1.0) * bins));
      const auto v = std::min<Eigen::Index>(B - 1, static_cast<Eigen::Index>(std::clamp(b[i], 0.0, 1.0) * bins));
      joint(u, v) += wt(i);
    }
    out.value = mutual_information_from_joint(joint);
    return out;
  }

  // Sample positions in bin units; two padding bins keep every window inside.
  const double span = static_cast<double>(bins - 5);
  auto pos = [&](double s) { return 2.0 + std::clamp(s, 0.0, 1.0) * span; };
  for (std::size_t i = 0; i < n; ++i) {
    if (wt(i) == 0.0) continue;
    const double ta = pos(a[i]);
    const double tb = pos(b[i]);
    const int ua = static_cast<int>(std::floor(ta));
    const int vb = static_cast<int>(std::floor(tb));
    for (int u = ua - 1; u <= ua + 2; ++u) {
      const double wa = bspline3(u - ta);
      if (wa == 0.0) continue;
      for (int v = vb - 1; v <= vb + 2; ++v) joint(u, v) += wt(i) * wa * bspline3(v - tb);
    }
  }
  const Eigen::MatrixXd p = joint / sw;
  const Eigen::VectorXd pa = p.rowwise().sum();
  const Eigen::RowVectorXd pb = p.colwise().sum();
  double mi = 0.0;
  Eigen::MatrixXd score = Eigen::MatrixXd::Zero(B, B);
  for (Eigen::Index u = 0; u < B; ++u) {
    for (Eigen::Index v = 0; v < B; ++v) {
      if (p(u, v) > 0.0) {
        mi += p(u, v) * std::log(p(u, v) / (pa(u) * pb(v)));
        score(u, v) = std::log(p(u, v)) - std::log(pb(v));
      }
    }
  }
  out.value = std::max(mi, 0.0);

  // dMI/db_i = sum_uv dp(u,v)/db_i (log p(u,v) - log p_b(v)); the a-marginal
  // does not move because the spline windows sum to one.
  for (std::size_t i = 0; i < n; ++i) {
    if (wt(i) == 0.0 || b[i] < 0.0 || b[i] > 1.0) continue;
    const double ta = pos(a[i]);
    const double tb = pos(b[i]);
    const int ua = static_cast<int>(std::floor(ta));
    const int vb = static_cast<int>(std::floor(tb));
    double g = 0.0;
    for (int u = ua - 1; u <= ua + 2; ++u) {
      const double wa = bspline3(u - ta);
      if (wa == 0.0) continue;
      for (int v = vb - 1; v <= vb + 2; ++v) g += wa * -bspline3_derivative(v - tb) * score(u, v);
    }
    out.gradient[i] = wt(i) * span * g / sw;
  }
  return out;
}

}  // namespace surftrack
