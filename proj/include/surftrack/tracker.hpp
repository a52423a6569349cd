#pragma once

#include <Eigen/SparseCore>

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "surftrack/camera.hpp"
#include "surftrack/descriptors.hpp"
#include "surftrack/mesh.hpp"
#include "surftrack/relevancy.hpp"
#include "surftrack/similarity.hpp"

namespace surftrack {

struct TrackerConfig {
  double lambda_L = 1.0;
  double lambda_S = 0.25;
  /// Gaussian sigmas in px, coarse to fine.
  std::vector<double> scale_schedule{15.0, 7.0, 3.0};
  DescriptorKind descriptor = DescriptorKind::Gbdf;
  SimilaritySpec similarity;
  bool use_relevancy = true;
  bool use_rotation_handling = true;
  int max_iters_per_scale = 15;
  /// Stop once the largest vertex update is below step_tolerance * mean rest edge length.
  double step_tolerance = 1e-4;
  int anchor_stride = 1;
  RelevancyOptions relevancy;

  /// Throws InputError naming the offending field.
  void validate() const;
};

/// Named sigma schedules: "wide" = {15, 7, 3}, "narrow" = {5, 3, 2}.
std::vector<double> scale_preset(const std::string& name);

TrackerConfig tracker_config_from_json(const std::string& text);
TrackerConfig read_tracker_config(const std::filesystem::path& path);
/// Deterministic JSON with every field.
std::string tracker_config_to_json(const TrackerConfig& config);
/// Applies "key=value" with dotted keys for nested objects, e.g.
/// "lambda_L=2" or "similarity.kind=HUBER".
void apply_config_override(TrackerConfig& config, const std::string& assignment);

/// Smoothed input-image data for one scale.
struct InputLevel {
  DescriptorKind kind = DescriptorKind::Gbdf;
  double sigma = 0.0;
  /// Descriptor channels; for gradient direction the (cos, sin) embedding.
  std::vector<Image> planes;
  /// Empty when every pixel is valid.
  Mask valid;
};

/// Smoothed template descriptor values at the anchors for one scale.
struct TemplateLevel {
  DescriptorKind kind = DescriptorKind::Gbdf;
  double sigma = 0.0;
  Residuals values;
  std::vector<std::uint8_t> valid;
};

InputLevel make_input_level(DescriptorKind kind, const Image& frame, double sigma);
/// `field` is the unsmoothed (possibly rotation-corrected) template field.
TemplateLevel make_template_level(const DescriptorField& field, const PixelAnchorSet& anchors, double sigma);

struct EnergyTerms {
  double image = 0.0;
  double length = 0.0;
  double smooth = 0.0;
  double total = 0.0;
  /// d total / d V; filled when requested.
  Vertices gradient;
  int valid_anchors = 0;
};

/// E(V) = E_image + lambda_L E_length + lambda_S E_smooth at one scale.
/// Image term over the N anchors:
///   SSD / HUBER / TUKEY  sum_i w_i rho(e_i),  e_i = phi_I(W(x_i; V)) - phi_T(x_i)
///   NCC                  N (1 - weighted NCC of template and warped intensities)
///   MI                   -N MI of template and warped intensities
/// with w_i the relevancy weight of anchor i and invalid anchors dropped.
class EnergyModel {
 public:
  EnergyModel(const Mesh& mesh, const PixelAnchorSet& anchors, const CameraIntrinsics& camera,
              const TrackerConfig& config);

  const Mesh& mesh() const { return *mesh_; }
  const PixelAnchorSet& anchors() const { return *anchors_; }
  const LaplacianMatrix& laplacian() const { return laplacian_; }
  const TrackerConfig& config() const { return config_; }
  const CameraIntrinsics& camera() const { return camera_; }

  /// Per-anchor relevancy weights in [0, 1]; all ones by default.
  void set_weights(std::vector<double> weights);
  const std::vector<double>& weights() const { return weights_; }

  /// Absolute Huber / Tukey threshold for the residuals at V (ignored by other kinds).
  double robust_threshold(const Vertices& V, const TemplateLevel& tpl, const InputLevel& input) const;

  EnergyTerms evaluate(const Vertices& V, const TemplateLevel& tpl, const InputLevel& input, bool with_gradient,
                       double robust_threshold = 0.0) const;
  /// Image term alone.
  EnergyTerms image_energy(const Vertices& V, const TemplateLevel& tpl, const InputLevel& input, bool with_gradient,
                           double robust_threshold = 0.0) const;

  /// Gauss-Newton system of the total energy at V: H (3N x 3N, upper and
  /// lower parts) and gradient g, both in the interleaved vertex order.
  struct NormalEquations {
    Eigen::SparseMatrix<double> H;
    Eigen::VectorXd g;
    EnergyTerms energy;
  };
  NormalEquations normal_equations(const Vertices& V, const TemplateLevel& tpl, const InputLevel& input,
                                   double robust_threshold) const;

 private:
  const Mesh* mesh_;
  const PixelAnchorSet* anchors_;
  CameraIntrinsics camera_;
  TrackerConfig config_;
  LaplacianMatrix laplacian_;
  Eigen::SparseMatrix<double> smooth_hessian_;
  std::vector<double> weights_;
};

enum class StopReason { Converged, MaxIterations, Stalled };
std::string_view to_string(StopReason reason);

struct ScaleResult {
  Vertices vertices;
  std::vector<double> energy_trace;
  StopReason reason = StopReason::Converged;
  int iterations = 0;
  double robust_threshold = 0.0;
};

/// Gauss-Newton with IRLS weights for least-squares kinds, gradient descent
/// for NCC and MI; both with Levenberg-style damping and backtracking.
/// Throws SurfaceLostError when fewer than 25% of the anchors are valid at V_init.
ScaleResult minimize_at_scale(const EnergyModel& model, const Vertices& V_init, const TemplateLevel& tpl,
                              const InputLevel& input);

struct FrameDiagnostics {
  int invalid_anchors = 0;
  double robust_threshold = 0.0;
  std::string stop_reason;
  bool relevancy_uniform = false;
  std::vector<int> degenerate_facets;
};

struct FrameResult {
  Vertices vertices;
  std::vector<double> energy_trace;
  double energy = 0.0;
  bool lost = false;
  FrameDiagnostics diagnostics;
  /// Present when relevancy weighting ran for this frame.
  std::optional<RelevancyMap> relevancy;
};

/// Frame-to-frame tracker. Owns the template data and the previous
/// reconstruction; frames must be fed in order.
class Tracker {
 public:
  Tracker(Image template_image, Mesh mesh, CameraIntrinsics camera, TrackerConfig config);
  Tracker(const Tracker&) = delete;
  Tracker& operator=(const Tracker&) = delete;

  FrameResult track(const Image& frame);

  const Vertices& current() const { return v_prev_; }
  const Mesh& mesh() const { return mesh_; }
  const PixelAnchorSet& anchors() const { return anchors_; }
  const EnergyModel& model() const { return *model_; }

 private:
  Image template_;
  Mesh mesh_;
  CameraIntrinsics camera_;
  TrackerConfig config_;
  PixelAnchorSet anchors_;
  std::unique_ptr<EnergyModel> model_;
  DescriptorField template_field_;
  std::vector<TemplateLevel> static_levels_;
  Vertices v_prev_;
};

std::vector<FrameResult> track_sequence(const Image& template_image, const Mesh& mesh, const CameraIntrinsics& camera,
                                        const std::vector<Image>& frames, const TrackerConfig& config);

/// {"frame": n, "vertices": [...], "energy": e, "lost": b}
std::string frame_result_json(int frame, const FrameResult& result);

}  // namespace surftrack
