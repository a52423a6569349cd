#pragma once

#include <Eigen/Core>

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace surftrack {

enum class SimilarityKind { Ssd, Ncc, Mi, Huber, Tukey };

std::string_view to_string(SimilarityKind kind);
/// Accepts "SSD", "NCC", "MI", "HUBER", "TUKEY"; the error lists them.
SimilarityKind parse_similarity_kind(std::string_view name);
std::string valid_similarity_kinds();

/// The comparison function. huber_k and tukey_c are multiples of the robust
/// residual scale 1.4826 * median |e_i| when scale_by_mad is set, absolute
/// thresholds otherwise.
struct SimilaritySpec {
  SimilarityKind kind = SimilarityKind::Ssd;
  double huber_k = 1.345;
  double tukey_c = 4.685;
  bool scale_by_mad = true;
  int mi_bins = 32;

  void validate() const;
  /// SSD, HUBER and TUKEY have a least-squares form.
  bool is_least_squares() const { return kind == SimilarityKind::Ssd || kind == SimilarityKind::Huber || kind == SimilarityKind::Tukey; }
};

/// Residuals: one row per sample, one column per channel.
using Residuals = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct LossValue {
  double value = 0.0;
  /// d value / d residual, same shape as the residuals.
  Residuals derivative;
};

/// (-pi, pi]
double wrap_angle(double a);

/// sum_i w_i |e_i|^2
LossValue ssd(const Residuals& e, std::span<const double> weights);
/// SSD after wrapping every component to (-pi, pi].
LossValue angular_ssd(const Residuals& e, std::span<const double> weights);

struct RobustValue {
  double value = 0.0;
  std::vector<double> irls_weights;
};

double huber_rho(double r, double k);
double tukey_rho(double r, double c);

/// sum_i w_i rho(|e_i|) with IRLS weight min(1, k / |e_i|).
RobustValue huber(const Residuals& e, double k, std::span<const double> weights);
/// sum_i w_i rho(|e_i|) with IRLS weight (1 - (|e_i|/c)^2)^2 inside, 0 outside.
RobustValue tukey(const Residuals& e, double c, std::span<const double> weights);

/// 1.4826 * median |e_i| over samples with positive weight.
double robust_scale(const Residuals& e, std::span<const double> weights);

struct NccValue {
  double value = 0.0;
  /// d value / d b_i
  std::vector<double> gradient;
  bool degenerate = false;
};

/// Weighted Pearson correlation of a and b. Zero variance gives 0, flagged.
NccValue ncc(std::span<const double> a, std::span<const double> b, std::span<const double> weights);

struct MiValue {
  double value = 0.0;
  /// d value / d b_i; zero without Parzen windowing.
  std::vector<double> gradient;
};

/// MI (natural log) of samples in [0, 1] from a bins x bins joint histogram
/// with cubic B-spline Parzen windows on both axes (two padding bins per
/// side), or plain binning when parzen is false. Samples are weighted.
MiValue mutual_information(std::span<const double> a, std::span<const double> b, int bins,
                           std::span<const double> weights = {}, bool parzen = true);

/// MI of a joint histogram (normalised internally).
double mutual_information_from_joint(const Eigen::MatrixXd& joint);

/// Cubic B-spline and its derivative.
double bspline3(double x);
double bspline3_derivative(double x);

}  // namespace surftrack
