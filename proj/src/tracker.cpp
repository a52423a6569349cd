#include "surftrack/tracker.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>

#include "json_format.hpp"

namespace surftrack {

namespace {

constexpr double kMinValidAnchorFraction = 0.25;
constexpr int kMaxHalvings = 8;
constexpr int kMaxDampingRetries = 10;

bool mask_ok(const Mask& valid, double x, double y) {
  if (valid.empty()) return true;
  const int x0 = std::min(static_cast<int>(x), valid.width() - 2);
  const int y0 = std::min(static_cast<int>(y), valid.height() - 2);
  return valid(x0, y0) && valid(x0 + 1, y0) && valid(x0, y0 + 1) && valid(x0 + 1, y0 + 1);
}

// Descriptor value and its image-space gradient at a sub-pixel position.
struct Sample {
  std::array<double, 4> value{};
  std::array<Vec2, 4> grad{};
  bool valid = false;
};

Sample sample_level(const InputLevel& level, const Vec2& q) {
  Sample s;
  if (level.kind == DescriptorKind::GradientDirection) {
    const BilinearSample c = sample_bilinear(level.planes[0], q.x(), q.y());
    const BilinearSample n = sample_bilinear(level.planes[1], q.x(), q.y());
    if (!c.valid || !n.valid || !mask_ok(level.valid, q.x(), q.y())) return s;
    const double r2 = c.value * c.value + n.value * n.value;
    if (!(r2 > 1e-24)) return s;
    s.value[0] = std::atan2(n.value, c.value);
    s.grad[0] = Vec2((c.value * n.dx - n.value * c.dx) / r2, (c.value * n.dy - n.value * c.dy) / r2);
    s.valid = true;
    return s;
  }
  for (std::size_t ch = 0; ch < level.planes.size(); ++ch) {
    const BilinearSample b = sample_bilinear(level.planes[ch], q.x(), q.y());
    if (!b.valid) return s;
    s.value[ch] = b.value;
    s.grad[ch] = Vec2(b.dx, b.dy);
  }
  s.valid = mask_ok(level.valid, q.x(), q.y());
  return s;
}

double max_vertex_norm(const Eigen::VectorXd& flat) {
  double m = 0.0;
  for (Eigen::Index i = 0; i + 2 < flat.size(); i += 3) m = std::max(m, flat.segment<3>(i).norm());
  return m;
}

Eigen::Map<const Eigen::VectorXd> flat_view(const Vertices& V) { return {V.data(), V.size()}; }

}  // namespace

InputLevel make_input_level(DescriptorKind kind, const Image& frame, double sigma) {
  InputLevel level;
  level.kind = kind;
  level.sigma = sigma;
  switch (kind) {
    case DescriptorKind::Intensity:
      level.planes.push_back(gaussian_smooth(frame, sigma));
      break;
    case DescriptorKind::Gbdf: {
      const DescriptorField f = gbdf(frame);
      for (const Image& ch : f.channels) level.planes.push_back(gaussian_smooth(ch, sigma));
      break;
    }
    case DescriptorKind::GradientDirection: {
      const DescriptorField f = gradient_direction(frame);
      auto cs = direction_embedding(f, sigma, &level.valid);
      level.planes = {std::move(cs[0]), std::move(cs[1])};
      if (all_set(level.valid)) level.valid = Mask();
      break;
    }
  }
  return level;
}

TemplateLevel make_template_level(const DescriptorField& field, const PixelAnchorSet& anchors, double sigma) {
  TemplateLevel level;
  level.kind = field.kind;
  level.sigma = sigma;
  const std::size_t n = anchors.entries.size();
  level.values.resize(static_cast<Eigen::Index>(n), channel_count(field.kind));
  level.valid.assign(n, 0);
  if (n == 0) return level;

  // Smoothing a crop that keeps the full kernel support around every anchor
  // gives the same values as smoothing the whole field.
  const int r = static_cast<int>(std::ceil(3.0 * sigma)) + 1;
  const Rect crop = anchors.bounds().inflate(r).intersect(full_rect(field.width(), field.height()));
  DescriptorField sub;
  sub.kind = field.kind;
  for (const Image& ch : field.channels) {
    Image c(crop.width(), crop.height());
    for (int y = 0; y < crop.height(); ++y)
      std::copy_n(ch.row(crop.y0 + y) + crop.x0, crop.width(), c.row(y));
    sub.channels.push_back(std::move(c));
  }
  if (!field.valid.empty()) {
    sub.valid = Mask(crop.width(), crop.height());
    for (int y = 0; y < crop.height(); ++y)
      std::copy_n(field.valid.row(crop.y0 + y) + crop.x0, crop.width(), sub.valid.row(y));
  }
  const DescriptorField sm = smooth(sub, sigma);
  for (std::size_t i = 0; i < n; ++i) {
    const PixelAnchor& a = anchors.entries[i];
    const int x = a.x - crop.x0;
    const int y = a.y - crop.y0;
    if (!sm.is_valid(x, y)) continue;
    for (std::size_t ch = 0; ch < sm.channels.size(); ++ch)
      level.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(ch)) = sm.channels[ch](x, y);
    level.valid[i] = 1;
  }
  return level;
}

EnergyModel::EnergyModel(const Mesh& mesh, const PixelAnchorSet& anchors, const CameraIntrinsics& camera,
                         const TrackerConfig& config)
    : mesh_(&mesh), anchors_(&anchors), camera_(camera), config_(config), laplacian_(build_laplacian(mesh)),
      weights_(anchors.entries.size(), 1.0) {
  config_.validate();
  const auto& A = laplacian_.matrix;
  const Eigen::SparseMatrix<double> AtA = (A.transpose() * A).pruned();
  std::vector<Eigen::Triplet<double>> t;
  for (int k = 0; k < AtA.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(AtA, k); it; ++it)
      for (int d = 0; d < 3; ++d)
        t.emplace_back(3 * static_cast<int>(it.row()) + d, 3 * static_cast<int>(it.col()) + d,
                       2.0 * config_.lambda_S * it.value());
  smooth_hessian_.resize(3 * mesh.vertex_count(), 3 * mesh.vertex_count());
  smooth_hessian_.setFromTriplets(t.begin(), t.end());
}

void EnergyModel::set_weights(std::vector<double> weights) {
  if (weights.size() != anchors_->entries.size()) throw InputError("relevancy weight count does not match the anchors");
  weights_ = std::move(weights);
}

namespace {

struct AnchorEval {
  Vec2 pixel;
  Vec3 point;
  Sample sample;
  bool valid = false;
};

std::vector<AnchorEval> evaluate_anchors(const Mesh& mesh, const PixelAnchorSet& anchors, const Vertices& V,
                                         const CameraIntrinsics& camera, const TemplateLevel& tpl,
                                         const InputLevel& input) {
  std::vector<AnchorEval> out(anchors.entries.size());
  for (std::size_t i = 0; i < anchors.entries.size(); ++i) {
    if (!tpl.valid[i]) continue;
    AnchorEval& e = out[i];
    e.point = anchor_point(mesh, anchors.entries[i], V);
    if (!(e.point.z() > kMinDepth)) continue;
    e.pixel = Vec2(camera.fx * e.point.x() / e.point.z() + camera.cx, camera.fy * e.point.y() / e.point.z() + camera.cy);
    e.sample = sample_level(input, e.pixel);
    e.valid = e.sample.valid;
  }
  return out;
}

// Residual of one anchor, channel ch.
double residual(const TemplateLevel& tpl, const AnchorEval& a, std::size_t i, int ch) {
  const double r = a.sample.value[static_cast<std::size_t>(ch)] - tpl.values(static_cast<Eigen::Index>(i), ch);
  return tpl.kind == DescriptorKind::GradientDirection ? wrap_angle(r) : r;
}

// rho(|e|) and the factor f with d rho / d e = f e.
std::pair<double, double> loss(SimilarityKind kind, double norm2, double threshold) {
  switch (kind) {
    case SimilarityKind::Huber: {
      const double r = std::sqrt(norm2);
      return {huber_rho(r, threshold), r <= threshold ? 1.0 : threshold / r};
    }
    case SimilarityKind::Tukey: {
      const double r = std::sqrt(norm2);
      const double u = 1.0 - (r / threshold) * (r / threshold);
      return {tukey_rho(r, threshold), r < threshold ? u * u : 0.0};
    }
    default:
      return {norm2, 2.0};
  }
}

}  // namespace

double EnergyModel::robust_threshold(const Vertices& V, const TemplateLevel& tpl, const InputLevel& input) const {
  const auto kind = config_.similarity.kind;
  if (kind != SimilarityKind::Huber && kind != SimilarityKind::Tukey) return 0.0;
  const double mult = kind == SimilarityKind::Huber ? config_.similarity.huber_k : config_.similarity.tukey_c;
  if (!config_.similarity.scale_by_mad) return mult;
  const auto ev = evaluate_anchors(*mesh_, *anchors_, V, camera_, tpl, input);
  const int C = static_cast<int>(tpl.values.cols());
  Residuals e(static_cast<Eigen::Index>(ev.size()), C);
  std::vector<double> w(ev.size(), 0.0);
  for (std::size_t i = 0; i < ev.size(); ++i) {
    if (!ev[i].valid) {
      e.row(static_cast<Eigen::Index>(i)).setZero();
      continue;
    }
    for (int ch = 0; ch < C; ++ch) e(static_cast<Eigen::Index>(i), ch) = residual(tpl, ev[i], i, ch);
    w[i] = weights_[i] > 0.0 ? 1.0 : 0.0;
  }
  return std::max(mult * robust_scale(e, w), 1e-12);
}

EnergyTerms EnergyModel::image_energy(const Vertices& V, const TemplateLevel& tpl, const InputLevel& input,
                                      bool with_gradient, double threshold) const {
  const auto ev = evaluate_anchors(*mesh_, *anchors_, V, camera_, tpl, input);
  const std::size_t n = ev.size();
  EnergyTerms out;
  if (with_gradient) out.gradient = Vertices::Zero(V.rows(), 3);
  for (const auto& a : ev) out.valid_anchors += a.valid ? 1 : 0;
  if (out.valid_anchors == 0) throw SurfaceLostError();
  const int C = static_cast<int>(tpl.values.cols());
  const auto kind = config_.similarity.kind;

  // Chains d E / d pixel of anchor i into the facet's vertices.
  auto scatter = [&](std::size_t i, const Vec2& dpix) {
    const PixelAnchor& a = anchors_->entries[i];
    const Vec3 g = project_jacobian(camera_, ev[i].point).transpose() * dpix;
    const Face& f = mesh_->faces()[static_cast<std::size_t>(a.face)];
    for (int k = 0; k < 3; ++k) out.gradient.row(f[static_cast<std::size_t>(k)]) += a.bary[static_cast<std::size_t>(k)] * g.transpose();
  };

  if (config_.similarity.is_least_squares()) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!ev[i].valid || weights_[i] == 0.0) continue;
      std::array<double, 4> e{};
      double norm2 = 0.0;
      for (int ch = 0; ch < C; ++ch) {
        e[static_cast<std::size_t>(ch)] = residual(tpl, ev[i], i, ch);
        norm2 += e[static_cast<std::size_t>(ch)] * e[static_cast<std::size_t>(ch)];
      }
      const auto [rho, f] = loss(kind, norm2, threshold);
      out.image += weights_[i] * rho;
      if (with_gradient && f != 0.0) {
        Vec2 dpix = Vec2::Zero();
        for (int ch = 0; ch < C; ++ch) dpix += e[static_cast<std::size_t>(ch)] * ev[i].sample.grad[static_cast<std::size_t>(ch)];
        scatter(i, (weights_[i] * f) * dpix);
      }
    }
    return out;
  }

  std::vector<double> a, b, w;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < n; ++i) {
    if (!ev[i].valid) continue;
    a.push_back(tpl.values(static_cast<Eigen::Index>(i), 0));
    b.push_back(ev[i].sample.value[0]);
    w.push_back(weights_[i]);
    idx.push_back(i);
  }
  // Scaled by the anchor count so the regularizer weights mean the same as
  // for the per-pixel sums.
  const double scale = static_cast<double>(n);
  std::vector<double> dv;
  if (kind == SimilarityKind::Ncc) {
    if (a.size() < 2) throw SurfaceLostError();
    const NccValue r = ncc(a, b, w);
    out.image = scale * (1.0 - r.value);
    dv = r.gradient;
  } else {
    const MiValue m = mutual_information(a, b, config_.similarity.mi_bins, w, true);
    out.image = -scale * m.value;
    dv = m.gradient;
  }
  for (double& g : dv) g *= -scale;
  if (with_gradient)
    for (std::size_t j = 0; j < idx.size(); ++j)
      if (dv[j] != 0.0) scatter(idx[j], dv[j] * ev[idx[j]].sample.grad[0]);
  return out;
}

EnergyTerms EnergyModel::evaluate(const Vertices& V, const TemplateLevel& tpl, const InputLevel& input,
                                  bool with_gradient, double threshold) const {
  EnergyTerms out = image_energy(V, tpl, input, with_gradient, threshold);
  out.length = length_energy(*mesh_, V);
  out.smooth = smooth_energy(laplacian_, V);
  out.total = out.image + config_.lambda_L * out.length + config_.lambda_S * out.smooth;
  if (with_gradient) {
    out.gradient += config_.lambda_L * length_energy_gradient(*mesh_, V);
    out.gradient += config_.lambda_S * smooth_energy_gradient(laplacian_, V);
  }
  return out;
}

EnergyModel::NormalEquations EnergyModel::normal_equations(const Vertices& V, const TemplateLevel& tpl,
                                                           const InputLevel& input, double threshold) const {
  if (!config_.similarity.is_least_squares()) throw InputError("normal equations need a least-squares similarity");
  const auto ev = evaluate_anchors(*mesh_, *anchors_, V, camera_, tpl, input);
  const std::size_t n = ev.size();
  const int nv = mesh_->vertex_count();
  const int C = static_cast<int>(tpl.values.cols());

  NormalEquations ne;
  EnergyTerms& en = ne.energy;
  en.gradient = Vertices::Zero(nv, 3);
  for (const auto& a : ev) en.valid_anchors += a.valid ? 1 : 0;
  if (en.valid_anchors == 0) throw SurfaceLostError();

  // Per-face 9x9 image blocks: sum over anchors of (b b^T) kron (P^T S P).
  std::vector<Eigen::Matrix<double, 9, 9>> blocks(static_cast<std::size_t>(mesh_->face_count()),
                                                  Eigen::Matrix<double, 9, 9>::Zero());
  for (std::size_t i = 0; i < n; ++i) {
    if (!ev[i].valid || weights_[i] == 0.0) continue;
    std::array<double, 4> e{};
    double norm2 = 0.0;
    for (int ch = 0; ch < C; ++ch) {
      e[static_cast<std::size_t>(ch)] = residual(tpl, ev[i], i, ch);
      norm2 += e[static_cast<std::size_t>(ch)] * e[static_cast<std::size_t>(ch)];
    }
    const auto [rho, f] = loss(config_.similarity.kind, norm2, threshold);
    en.image += weights_[i] * rho;
    const double s = weights_[i] * f;
    if (s == 0.0) continue;
    Eigen::Matrix2d S = Eigen::Matrix2d::Zero();
    Vec2 r = Vec2::Zero();
    for (int ch = 0; ch < C; ++ch) {
      const Vec2& g = ev[i].sample.grad[static_cast<std::size_t>(ch)];
      S += g * g.transpose();
      r += e[static_cast<std::size_t>(ch)] * g;
    }
    const Eigen::Matrix<double, 2, 3> P = project_jacobian(camera_, ev[i].point);
    const Eigen::Matrix3d Q = s * (P.transpose() * S * P);
    const Vec3 gq = s * (P.transpose() * r);
    const PixelAnchor& a = anchors_->entries[i];
    const Face& face = mesh_->faces()[static_cast<std::size_t>(a.face)];
    auto& B = blocks[static_cast<std::size_t>(a.face)];
    for (int k = 0; k < 3; ++k) {
      en.gradient.row(face[static_cast<std::size_t>(k)]) += a.bary[static_cast<std::size_t>(k)] * gq.transpose();
      for (int l = 0; l < 3; ++l)
        B.block<3, 3>(3 * k, 3 * l) += (a.bary[static_cast<std::size_t>(k)] * a.bary[static_cast<std::size_t>(l)]) * Q;
    }
  }
  en.length = length_energy(*mesh_, V);
  en.smooth = smooth_energy(laplacian_, V);
  en.total = en.image + config_.lambda_L * en.length + config_.lambda_S * en.smooth;
  en.gradient += config_.lambda_L * length_energy_gradient(*mesh_, V);
  en.gradient += config_.lambda_S * smooth_energy_gradient(laplacian_, V);

  std::vector<Eigen::Triplet<double>> t;
  t.reserve(blocks.size() * 81 + mesh_->edges().size() * 36 + static_cast<std::size_t>(3 * nv));
  for (std::size_t fi = 0; fi < blocks.size(); ++fi) {
    const Face& face = mesh_->faces()[fi];
    for (int k = 0; k < 3; ++k)
      for (int l = 0; l < 3; ++l)
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b)
            t.emplace_back(3 * face[static_cast<std::size_t>(k)] + a, 3 * face[static_cast<std::size_t>(l)] + b,
                           blocks[fi](3 * k + a, 3 * l + b));
  }
  for (std::size_t ei = 0; ei < mesh_->edges().size(); ++ei) {
    const auto& [i, j] = mesh_->edges()[ei];
    const Vec3 d = (V.row(i) - V.row(j)).transpose();
    const double len = d.norm();
    Eigen::Matrix3d uu = Eigen::Matrix3d::Zero();
    if (len > 0.0) uu = (2.0 * config_.lambda_L / (len * len)) * (d * d.transpose());
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        t.emplace_back(3 * i + a, 3 * i + b, uu(a, b));
        t.emplace_back(3 * j + a, 3 * j + b, uu(a, b));
        t.emplace_back(3 * i + a, 3 * j + b, -uu(a, b));
        t.emplace_back(3 * j + a, 3 * i + b, -uu(a, b));
      }
  }
  ne.H.resize(3 * nv, 3 * nv);
  ne.H.setFromTriplets(t.begin(), t.end());
  ne.H += smooth_hessian_;
  ne.g = flat_view(en.gradient);
  return ne;
}

std::string_view to_string(StopReason reason) {
  switch (reason) {
    case StopReason::Converged: return "converged";
    case StopReason::MaxIterations: return "max_iterations";
    case StopReason::Stalled: return "stalled";
  }
  return "?";
}

ScaleResult minimize_at_scale(const EnergyModel& model, const Vertices& V_init, const TemplateLevel& tpl,
                              const InputLevel& input) {
  const TrackerConfig& cfg = model.config();
  const double scale = model.mesh().mean_edge_length();
  const double tol = cfg.step_tolerance * scale;
  const auto n_anchors = static_cast<double>(model.anchors().entries.size());

  ScaleResult res;
  res.vertices = V_init;
  res.robust_threshold = model.robust_threshold(V_init, tpl, input);
  const double thr = res.robust_threshold;

  auto energy_at = [&](const Vertices& V) {
    try {
      const EnergyTerms e = model.evaluate(V, tpl, input, false, thr);
      if (e.valid_anchors < kMinValidAnchorFraction * n_anchors) return std::numeric_limits<double>::infinity();
      return e.total;
    } catch (const SurfaceLostError&) {
      return std::numeric_limits<double>::infinity();
    } catch (const NumericError&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  auto plus = [](const Vertices& V, const Eigen::VectorXd& step, double alpha) {
    Vertices out = V;
    Eigen::Map<Eigen::VectorXd>(out.data(), out.size()) += alpha * step;
    return out;
  };

  if (cfg.similarity.is_least_squares()) {
    auto ne = model.normal_equations(res.vertices, tpl, input, thr);
    if (ne.energy.valid_anchors < kMinValidAnchorFraction * n_anchors) throw SurfaceLostError();
    double E = ne.energy.total;
    res.energy_trace.push_back(E);
    double mu = 0.0;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
    bool analyzed = false;
    for (int it = 0; it < cfg.max_iters_per_scale; ++it) {
      const double mean_diag = std::max(ne.H.diagonal().mean(), 1e-300);
      Eigen::SparseMatrix<double> I(ne.H.rows(), ne.H.cols());
      I.setIdentity();
      bool accepted = false;
      int retries = 0;
      Vertices V_new;
      double E_new = 0.0, step_norm = 0.0;
      while (!accepted) {
        const Eigen::SparseMatrix<double> A = ne.H + (mu * mean_diag) * I;
        if (!analyzed) {
          solver.analyzePattern(A);
          analyzed = true;
        }
        solver.factorize(A);
        Eigen::VectorXd delta;
        bool solved = solver.info() == Eigen::Success;
        if (solved) {
          delta = solver.solve(-ne.g);
          solved = solver.info() == Eigen::Success && delta.allFinite();
        }
        if (solved && max_vertex_norm(delta) < tol) {
          res.reason = StopReason::Converged;
          res.iterations = it;
          return res;
        }
        if (solved) {
          double alpha = 1.0;
          for (int h = 0; h <= kMaxHalvings; ++h, alpha *= 0.5) {
            Vertices trial = plus(res.vertices, delta, alpha);
            const double Et = energy_at(trial);
            if (Et < E) {
              V_new = std::move(trial);
              E_new = Et;
              step_norm = alpha * max_vertex_norm(delta);
              accepted = true;
              break;
            }
          }
        }
        if (!accepted) {
          if (++retries > kMaxDampingRetries) {
            res.reason = StopReason::Stalled;
            res.iterations = it;
            return res;
          }
          mu = mu == 0.0 ? 1e-4 : mu * 10.0;
        }
      }
      res.vertices = std::move(V_new);
      E = E_new;
      res.energy_trace.push_back(E);
      res.iterations = it + 1;
      mu = mu > 1e-8 ? mu / 10.0 : 0.0;
      if (step_norm < tol) {
        res.reason = StopReason::Converged;
        return res;
      }
      if (it + 1 < cfg.max_iters_per_scale) ne = model.normal_equations(res.vertices, tpl, input, thr);
    }
    res.reason = StopReason::MaxIterations;
    return res;
  }

  // NCC / MI: steepest descent with a step expressed as the largest vertex displacement.
  EnergyTerms cur = model.evaluate(res.vertices, tpl, input, true, thr);
  if (cur.valid_anchors < kMinValidAnchorFraction * n_anchors) throw SurfaceLostError();
  res.energy_trace.push_back(cur.total);
  const double max_len = 0.05 * scale;
  double len = max_len;
  for (int it = 0; it < cfg.max_iters_per_scale; ++it) {
    const Eigen::VectorXd g = flat_view(cur.gradient);
    const double gmax = max_vertex_norm(g);
    if (!(gmax > 0.0)) {
      res.reason = StopReason::Converged;
      res.iterations = it;
      return res;
    }
    bool accepted = false;
    int retries = 0;
    double step_norm = 0.0;
    while (!accepted) {
      const Eigen::VectorXd dir = -(len / gmax) * g;
      double alpha = 1.0;
      for (int h = 0; h <= kMaxHalvings; ++h, alpha *= 0.5) {
        Vertices trial = plus(res.vertices, dir, alpha);
        const double Et = energy_at(trial);
        if (Et < cur.total) {
          res.vertices = std::move(trial);
          step_norm = alpha * len;
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        if (++retries > kMaxDampingRetries) {
          res.reason = StopReason::Stalled;
          res.iterations = it;
          return res;
        }
        len /= 10.0;
        if (len < tol) {
          res.reason = StopReason::Converged;
          res.iterations = it;
          return res;
        }
      }
    }
    cur = model.evaluate(res.vertices, tpl, input, true, thr);
    res.energy_trace.push_back(cur.total);
    res.iterations = it + 1;
    if (step_norm < tol) {
      res.reason = StopReason::Converged;
      return res;
    }
    len = std::min(2.0 * step_norm, max_len);
  }
  res.reason = StopReason::MaxIterations;
  return res;
}

Tracker::Tracker(Image template_image, Mesh mesh, CameraIntrinsics camera, TrackerConfig config)
    : template_(std::move(template_image)), mesh_(std::move(mesh)), camera_(camera), config_(std::move(config)) {
  config_.validate();
  camera_.validate();
  anchors_ = anchor_template_pixels(mesh_, camera_, template_.width(), template_.height(), nullptr, config_.anchor_stride);
  model_ = std::make_unique<EnergyModel>(mesh_, anchors_, camera_, config_);
  template_field_ = compute_descriptor(config_.descriptor, template_);
  if (!(config_.use_rotation_handling && config_.descriptor == DescriptorKind::Gbdf))
    for (double s : config_.scale_schedule) static_levels_.push_back(make_template_level(template_field_, anchors_, s));
  v_prev_ = mesh_.rest();
}

FrameResult Tracker::track(const Image& frame) {
  FrameResult result;
  result.vertices = v_prev_;
  result.energy = std::numeric_limits<double>::quiet_NaN();
  try {
    std::vector<double> weights(anchors_.entries.size(), 1.0);
    if (config_.use_relevancy) {
      try {
        RelevancyMap rel = compute_relevancy(template_, frame, mesh_, v_prev_, camera_, anchors_, config_.relevancy);
        for (std::size_t i = 0; i < weights.size(); ++i) {
          const PixelAnchor& a = anchors_.entries[i];
          weights[i] = rel.valid(a.x, a.y) ? rel.normalized(a.x, a.y) : 0.0;
        }
        result.diagnostics.relevancy_uniform = rel.uniform;
        result.relevancy = std::move(rel);
      } catch (const InputError&) {
        result.diagnostics.relevancy_uniform = true;
      } catch (const NumericError&) {
        result.diagnostics.relevancy_uniform = true;
      }
    }
    model_->set_weights(std::move(weights));

    std::vector<TemplateLevel> rotated;
    const std::vector<TemplateLevel>* levels = &static_levels_;
    if (static_levels_.empty()) {
      const FacetRotationSet rot = facet_rotations(mesh_, v_prev_, camera_);
      result.diagnostics.degenerate_facets = rot.degenerate;
      const DescriptorField field =
          rotate_template_descriptors(template_field_, anchors_, rot, mean_anchor_rotation(anchors_, rot));
      for (double s : config_.scale_schedule) rotated.push_back(make_template_level(field, anchors_, s));
      levels = &rotated;
    }

    Vertices V = v_prev_;
    double thr = 0.0;
    std::string reason;
    for (std::size_t s = 0; s < config_.scale_schedule.size(); ++s) {
      const InputLevel input = make_input_level(config_.descriptor, frame, config_.scale_schedule[s]);
      ScaleResult sr = minimize_at_scale(*model_, V, (*levels)[s], input);
      V = std::move(sr.vertices);
      result.energy_trace.insert(result.energy_trace.end(), sr.energy_trace.begin(), sr.energy_trace.end());
      thr = sr.robust_threshold;
      reason = std::string(to_string(sr.reason));
      if (s + 1 == config_.scale_schedule.size()) {
        const EnergyTerms e = model_->evaluate(V, (*levels)[s], input, false, thr);
        result.energy = e.total;
        result.diagnostics.invalid_anchors = static_cast<int>(anchors_.entries.size()) - e.valid_anchors;
      }
    }
    result.diagnostics.robust_threshold = thr;
    result.diagnostics.stop_reason = reason;
    v_prev_ = V;
    result.vertices = std::move(V);
  } catch (const SurfaceLostError&) {
    result.lost = true;
    result.vertices = v_prev_;
    result.energy_trace.clear();
    result.diagnostics.stop_reason = "lost";
  }
  return result;
}

std::vector<FrameResult> track_sequence(const Image& template_image, const Mesh& mesh, const CameraIntrinsics& camera,
                                        const std::vector<Image>& frames, const TrackerConfig& config) {
  if (frames.empty()) throw InputError("track_sequence needs at least one frame");
  Tracker tracker(template_image, mesh, camera, config);
  std::vector<FrameResult> out;
  out.reserve(frames.size());
  for (const Image& f : frames) out.push_back(tracker.track(f));
  return out;
}

std::string frame_result_json(int frame, const FrameResult& result) {
  return "{\"frame\": " + std::to_string(frame) + ", \"vertices\": " + vertices_to_json(result.vertices) +
         ", \"energy\": " + detail::format_double(result.energy) + ", \"lost\": " + (result.lost ? "true" : "false") +
         "}";
}

}  // namespace surftrack
