#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "surftrack/mesh.hpp"
#include "surftrack/synth.hpp"
#include "surftrack/tracker.hpp"

namespace surftrack {

/// Mean Euclidean distance between corresponding rows.
double vertex_to_vertex_error(const Vertices& estimate, const Vertices& truth);

/// Mean over estimated vertices of the distance to the nearest cloud point.
/// Exhaustive search; the clouds used here hold a few thousand points.
double vertex_to_cloud_error(const Vertices& estimate, const Vertices& cloud);

/// Dense sample of the surface under V: the vertices plus, per face, the
/// interior points of a barycentric lattice with `subdivisions` steps per edge.
Vertices surface_cloud(const Mesh& mesh, const Vertices& V, int subdivisions = 4);

/// Errors of one tracked frame in scene units and as fractions of the mean
/// rest edge length.
struct FrameError {
  int frame = 0;
  double vertex_to_vertex = 0.0;
  double vertex_to_cloud = 0.0;
  double vertex_to_vertex_rel = 0.0;
  double vertex_to_cloud_rel = 0.0;
  bool lost = false;
};

struct ErrorSummary {
  std::vector<FrameError> frames;
  /// Relative vertex-to-vertex error over frames that were not lost; NaN
  /// when every frame was lost.
  double mean = 0.0;
  double median = 0.0;
  double max = 0.0;
  int lost_frames = 0;
};

/// `estimates[i]` is compared with `truths[i]`; `frame_ids` label the rows.
ErrorSummary evaluate_frames(const Mesh& mesh, const std::vector<Vertices>& estimates,
                             const std::vector<Vertices>& truths, const std::vector<bool>& lost,
                             const std::vector<int>& frame_ids);

struct BenchmarkRun {
  std::vector<FrameResult> results;
  ErrorSummary errors;
};

/// Tracks frames 1..N of a generated sequence and scores them against its
/// ground truth.
BenchmarkRun run_benchmark(const Sequence& sequence, const TrackerConfig& config);

/// Cost functions of the translation experiment. NCC and MI are negated so
/// every cost is minimal at the best alignment.
enum class BasinCost { Intensity, Gbdf, Ncc, Mi };
std::string_view to_string(BasinCost cost);
/// "INTENSITY", "GBDF", "NCC", "MI"
BasinCost parse_basin_cost(std::string_view name);

struct BasinSpec {
  BasinCost cost = BasinCost::Gbdf;
  /// Template window; the input window at offset (dx, dy) is window + (dx, dy).
  Rect window;
  double sigma = 1.0;
  int range = 20;
  int mi_bins = 32;
};

/// cost(dx, dy) for dx, dy in [-range, range]; row dy + range, column dx + range.
struct BasinGrid {
  BasinSpec spec;
  Eigen::MatrixXd cost;

  double at(int dx, int dy) const { return cost(dy + spec.range, dx + spec.range); }
};

/// Smoothed per-pixel data the costs compare: one plane for intensity, NCC
/// and MI, four GBDF channels otherwise.
std::vector<Image> basin_planes(BasinCost cost, const Image& image, double sigma);

/// Cost of the template window against the input window shifted by (dx, dy).
/// SSD costs are means over the window pixels and channels.
double basin_cost(BasinCost cost, const std::vector<Image>& template_planes, const std::vector<Image>& input_planes,
                  const Rect& window, int dx, int dy, int mi_bins);

/// Throws InputError when the window shifted by +-range leaves either image.
BasinGrid basin_experiment(const Image& template_image, const Image& input_image, const BasinSpec& spec);

/// Largest r such that along each of the four axis directions the cost rises
/// strictly at every step from the center out to distance r.
int basin_radius(const BasinGrid& grid);

/// Header "dy,dx,cost", one row per offset.
std::string basin_csv(const BasinGrid& grid);

/// Template and input image of the translation experiment: the textured
/// page, and the same page under a lighting change with a low-contrast
/// distractor pattern.
struct BasinImages {
  Image template_image;
  Image input_image;
  Rect window;
};
BasinImages basin_test_images(std::uint64_t seed = 7);

struct SweepCell {
  double lambda_L = 1.0;
  double lambda_S = 0.25;
  /// Mean vertex-to-vertex error over frames in edge-length units; empty when
  /// tracking was lost in the cell.
  std::optional<double> mean_error;
  double max_error = 0.0;
  int lost_frames = 0;
};

/// Full tracking of the sequence for each (lambda_L, lambda_S) pair. Cells
/// are independent and run on up to `jobs` threads.
std::vector<SweepCell> lambda_sweep(const Sequence& sequence, const TrackerConfig& base,
                                    const std::vector<std::pair<double, double>>& cells, int jobs = 1);

/// The 3x3 block {0.5, 1, 2} x {0.125, 0.25, 0.5} plus the corners
/// (0.01, 0.01) and (0.01, 10), as (lambda_L, lambda_S).
std::vector<std::pair<double, double>> default_sweep_cells();

/// Table layout: header "lambda_L\lambda_S" then one column per lambda_S,
/// one row per lambda_L. Lost cells read "N.A", cells not run are empty.
std::string sweep_table_csv(const std::vector<SweepCell>& cells);

}  // namespace surftrack
