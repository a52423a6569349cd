#include "surftrack/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "json_format.hpp"
#include "surftrack/descriptors.hpp"
#include "surftrack/image_io.hpp"
#include "surftrack/similarity.hpp"

namespace surftrack {

double vertex_to_vertex_error(const Vertices& estimate, const Vertices& truth) {
  if (estimate.rows() != truth.rows())
    throw InputError("vertex count mismatch: " + std::to_string(estimate.rows()) + " vs " +
                     std::to_string(truth.rows()));
  if (estimate.rows() == 0) throw InputError("empty vertex set");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < estimate.rows(); ++i) sum += (estimate.row(i) - truth.row(i)).norm();
  return sum / static_cast<double>(estimate.rows());
}

double vertex_to_cloud_error(const Vertices& estimate, const Vertices& cloud) {
  if (cloud.rows() == 0) throw InputError("empty point cloud");
  if (estimate.rows() == 0) throw InputError("empty vertex set");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < estimate.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < cloud.rows(); ++j) best = std::min(best, (estimate.row(i) - cloud.row(j)).squaredNorm());
    sum += std::sqrt(best);
  }
  return sum / static_cast<double>(estimate.rows());
}

Vertices surface_cloud(const Mesh& mesh, const Vertices& V, int subdivisions) {
  if (subdivisions < 1) throw InputError("subdivisions must be >= 1");
  std::vector<Vec3> pts;
  for (Eigen::Index i = 0; i < V.rows(); ++i) pts.push_back(V.row(i).transpose());
  const int n = subdivisions;
  for (const Face& f : mesh.faces()) {
    // Strictly interior lattice points; edges and corners are covered by the
    // vertices and would otherwise repeat across neighbouring faces.
    for (int a = 1; a < n; ++a)
      for (int b = 1; a + b < n; ++b) {
        const double ba = static_cast<double>(a) / n, bb = static_cast<double>(b) / n;
        pts.push_back(ba * V.row(f[0]).transpose() + bb * V.row(f[1]).transpose() +
                      (1.0 - ba - bb) * V.row(f[2]).transpose());
      }
  }
  Vertices out(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  return out;
}

ErrorSummary evaluate_frames(const Mesh& mesh, const std::vector<Vertices>& estimates,
                             const std::vector<Vertices>& truths, const std::vector<bool>& lost,
                             const std::vector<int>& frame_ids) {
  if (estimates.size() != truths.size() || lost.size() != truths.size() || frame_ids.size() != truths.size())
    throw InputError("evaluate_frames: estimate, truth, lost and frame lists differ in length");
  const double unit = mesh.mean_edge_length();
  ErrorSummary s;
  std::vector<double> ok;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    FrameError fe;
    fe.frame = frame_ids[i];
    fe.lost = lost[i];
    fe.vertex_to_vertex = vertex_to_vertex_error(estimates[i], truths[i]);
    fe.vertex_to_cloud = vertex_to_cloud_error(estimates[i], surface_cloud(mesh, truths[i]));
    fe.vertex_to_vertex_rel = fe.vertex_to_vertex / unit;
    fe.vertex_to_cloud_rel = fe.vertex_to_cloud / unit;
    if (fe.lost)
      ++s.lost_frames;
    else
      ok.push_back(fe.vertex_to_vertex_rel);
    s.frames.push_back(fe);
  }
  if (ok.empty()) {
    s.mean = s.median = s.max = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double sum = 0.0;
  for (double e : ok) sum += e;
  s.mean = sum / static_cast<double>(ok.size());
  s.max = *std::max_element(ok.begin(), ok.end());
  std::sort(ok.begin(), ok.end());
  const std::size_t m = ok.size() / 2;
  s.median = ok.size() % 2 ? ok[m] : 0.5 * (ok[m - 1] + ok[m]);
  return s;
}

BenchmarkRun run_benchmark(const Sequence& sequence, const TrackerConfig& config) {
  if (sequence.frames.size() < 2) throw InputError("benchmark sequence has no frames after the template");
  Tracker tracker(sequence.template_image, sequence.mesh, sequence.camera, config);
  BenchmarkRun run;
  std::vector<Vertices> est, truth;
  std::vector<bool> lost;
  std::vector<int> ids;
  for (std::size_t f = 1; f < sequence.frames.size(); ++f) {
    FrameResult r = tracker.track(sequence.frames[f].image);
    r.relevancy.reset();  // full-size maps add up over long runs
    est.push_back(r.vertices);
    truth.push_back(sequence.frames[f].vertices);
    lost.push_back(r.lost);
    ids.push_back(static_cast<int>(f));
    run.results.push_back(std::move(r));
  }
  run.errors = evaluate_frames(sequence.mesh, est, truth, lost, ids);
  return run;
}

std::string_view to_string(BasinCost cost) {
  switch (cost) {
    case BasinCost::Intensity: return "INTENSITY";
    case BasinCost::Gbdf: return "GBDF";
    case BasinCost::Ncc: return "NCC";
    case BasinCost::Mi: return "MI";
  }
  return "?";
}

BasinCost parse_basin_cost(std::string_view name) {
  if (name == "INTENSITY") return BasinCost::Intensity;
  if (name == "GBDF") return BasinCost::Gbdf;
  if (name == "NCC") return BasinCost::Ncc;
  if (name == "MI") return BasinCost::Mi;
  throw InputError("unknown basin cost '" + std::string(name) + "' (valid: INTENSITY, GBDF, NCC, MI)");
}

std::vector<Image> basin_planes(BasinCost cost, const Image& image, double sigma) {
  if (cost == BasinCost::Gbdf) {
    std::vector<Image> out;
    for (const Image& ch : gbdf(image).channels) out.push_back(sigma > 0.0 ? gaussian_smooth(ch, sigma) : ch);
    return out;
  }
  return {sigma > 0.0 ? gaussian_smooth(image, sigma) : image};
}

double basin_cost(BasinCost cost, const std::vector<Image>& template_planes, const std::vector<Image>& input_planes,
                  const Rect& window, int dx, int dy, int mi_bins) {
  if (cost == BasinCost::Intensity || cost == BasinCost::Gbdf) {
    double sum = 0.0;
    for (std::size_t c = 0; c < template_planes.size(); ++c)
      for (int y = window.y0; y < window.y1; ++y)
        for (int x = window.x0; x < window.x1; ++x) {
          const double d = input_planes[c](x + dx, y + dy) - template_planes[c](x, y);
          sum += d * d;
        }
    return sum / (static_cast<double>(window.width()) * window.height() * static_cast<double>(template_planes.size()));
  }
  std::vector<double> a, b;
  a.reserve(static_cast<std::size_t>(window.width()) * window.height());
  b.reserve(a.capacity());
  for (int y = window.y0; y < window.y1; ++y)
    for (int x = window.x0; x < window.x1; ++x) {
      a.push_back(template_planes[0](x, y));
      b.push_back(input_planes[0](x + dx, y + dy));
    }
  if (cost == BasinCost::Ncc) return -ncc(a, b, {}).value;
  return -mutual_information(a, b, mi_bins).value;
}

BasinGrid basin_experiment(const Image& template_image, const Image& input_image, const BasinSpec& spec) {
  if (spec.range < 0) throw InputError("basin range must be >= 0");
  if (spec.window.empty()) throw InputError("basin window is empty");
  const Rect w = spec.window;
  const Rect reach = w.inflate(spec.range);
  if (w.intersect(full_rect(template_image.width(), template_image.height())) != w)
    throw InputError("basin window does not fit in the template image");
  if (reach.intersect(full_rect(input_image.width(), input_image.height())) != reach)
    throw InputError("basin window shifted by the range leaves the input image");
  const auto tp = basin_planes(spec.cost, template_image, spec.sigma);
  const auto ip = basin_planes(spec.cost, input_image, spec.sigma);
  const int n = 2 * spec.range + 1;
  BasinGrid g{spec, Eigen::MatrixXd(n, n)};
  for (int dy = -spec.range; dy <= spec.range; ++dy)
    for (int dx = -spec.range; dx <= spec.range; ++dx)
      g.cost(dy + spec.range, dx + spec.range) = basin_cost(spec.cost, tp, ip, w, dx, dy, spec.mi_bins);
  return g;
}

int basin_radius(const BasinGrid& grid) {
  const int R = grid.spec.range;
  constexpr int dirs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  int r = 0;
  while (r < R) {
    const int next = r + 1;
    bool rising = true;
    for (const auto& d : dirs)
      rising = rising && grid.at(d[0] * next, d[1] * next) > grid.at(d[0] * r, d[1] * r);
    if (!rising) break;
    r = next;
  }
  return r;
}

std::string basin_csv(const BasinGrid& grid) {
  std::ostringstream os;
  os << "dy,dx,cost\n";
  const int R = grid.spec.range;
  for (int dy = -R; dy <= R; ++dy)
    for (int dx = -R; dx <= R; ++dx) os << dy << ',' << dx << ',' << detail::format_double(grid.at(dx, dy)) << '\n';
  return os.str();
}

BasinImages basin_test_images(std::uint64_t seed) {
  BasinImages out;
  out.template_image = quantize_8bit(make_texture("textured", 640, 480, seed));
  // Input: the same page seen under dimmer light, with a faint second page
  // showing through as the distractor.
  const Image distractor = make_texture("textured", 640, 480, seed + 1);
  Image input(640, 480);
  for (int y = 0; y < 480; ++y)
    for (int x = 0; x < 640; ++x)
      input(x, y) = 0.8 * out.template_image(x, y) + 0.15 * distractor(x, y) + 0.02;
  out.input_image = quantize_8bit(input);
  out.window = Rect{240, 180, 400, 300};
  return out;
}

std::vector<SweepCell> lambda_sweep(const Sequence& sequence, const TrackerConfig& base,
                                    const std::vector<std::pair<double, double>>& cells, int jobs) {
  std::vector<SweepCell> out(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex failure_mutex;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) try {
      TrackerConfig cfg = base;
      cfg.lambda_L = cells[i].first;
      cfg.lambda_S = cells[i].second;
      cfg.validate();
      const BenchmarkRun run = run_benchmark(sequence, cfg);
      SweepCell& c = out[i];
      c.lambda_L = cfg.lambda_L;
      c.lambda_S = cfg.lambda_S;
      c.lost_frames = run.errors.lost_frames;
      if (c.lost_frames == 0) c.mean_error = run.errors.mean;
      c.max_error = run.errors.max;
    } catch (...) {
      const std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = cells.size();
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(cells.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::vector<std::pair<double, double>> default_sweep_cells() {
  std::vector<std::pair<double, double>> cells;
  for (double l : {0.5, 1.0, 2.0})
    for (double s : {0.125, 0.25, 0.5}) cells.emplace_back(l, s);
  cells.emplace_back(0.01, 0.01);
  cells.emplace_back(0.01, 10.0);
  return cells;
}

std::string sweep_table_csv(const std::vector<SweepCell>& cells) {
  std::vector<double> ls, ss;
  for (const auto& c : cells) {
    ls.push_back(c.lambda_L);
    ss.push_back(c.lambda_S);
  }
  std::sort(ls.begin(), ls.end());
  ls.erase(std::unique(ls.begin(), ls.end()), ls.end());
  std::sort(ss.begin(), ss.end());
  ss.erase(std::unique(ss.begin(), ss.end()), ss.end());
  std::map<std::pair<double, double>, const SweepCell*> at;
  for (const auto& c : cells) at[{c.lambda_L, c.lambda_S}] = &c;

  std::ostringstream os;
  os << "lambda_L\\lambda_S";
  for (double s : ss) os << ',' << detail::format_double(s);
  os << '\n';
  for (double l : ls) {
    os << detail::format_double(l);
    for (double s : ss) {
      os << ',';
      auto it = at.find({l, s});
      if (it == at.end()) continue;
      if (it->second->mean_error)
        os << detail::format_double(*it->second->mean_error);
      else
        os << "N.A";
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace surftrack
