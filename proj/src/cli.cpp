#include "surftrack/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "json_format.hpp"
#include "surftrack/harness.hpp"
#include "surftrack/image_io.hpp"
#include "surftrack/synth.hpp"
#include "surftrack/tracker.hpp"

namespace surftrack {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

std::string utc_timestamp() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw InputError("no such file: " + p.string());
}

void require_dir(const fs::path& p) {
  if (!fs::is_directory(p)) throw InputError("no such directory: " + p.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path.string());
  f << text;
}

/// Everything needed to re-run a command: the argument list reproduces the
/// outputs, the rest is for the reader.
struct Manifest {
  std::string command;
  std::vector<std::string> args;
  ordered_json config;
  ordered_json inputs = ordered_json::object();
  Clock::time_point start = Clock::now();
  std::string started_at = utc_timestamp();

  void write(const fs::path& dir) const {
    ordered_json j;
    j["command"] = command;
    j["args"] = args;
    j["config"] = config;
    j["inputs"] = inputs;
    j["tool_version"] = SURFTRACK_VERSION;
    j["started_at"] = started_at;
    j["wall_clock_seconds"] = std::chrono::duration<double>(Clock::now() - start).count();
    write_text(dir / "manifest.json", j.dump(2) + "\n");
  }
};

TrackerConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  TrackerConfig c;
  if (!path.empty()) {
    require_file(path);
    c = read_tracker_config(path);
  }
  for (const auto& o : overrides) apply_config_override(c, o);
  return c;
}

std::string frame_name(int frame, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d.%s", frame, ext);
  return buf;
}

/// Numeric file stems label frames; otherwise the position in the sorted list.
std::vector<int> frame_ids(const std::vector<fs::path>& files) {
  std::vector<int> ids;
  bool numeric = true;
  for (const auto& p : files) {
    const std::string s = p.stem().string();
    numeric = numeric && !s.empty() && s.size() < 9 && s.find_first_not_of("0123456789") == std::string::npos;
  }
  for (std::size_t i = 0; i < files.size(); ++i)
    ids.push_back(numeric ? std::stoi(files[i].stem().string()) : static_cast<int>(i));
  return ids;
}

struct TrackArgs {
  std::string template_path, mesh_path, camera_path, frames_dir, config_path, out_dir;
  std::vector<std::string> overrides;
  bool dump_relevancy = false;
};

int cmd_track(const TrackArgs& a, Manifest& m, std::ostream& out) {
  require_file(a.template_path);
  require_file(a.mesh_path);
  require_file(a.camera_path);
  require_dir(a.frames_dir);
  TrackerConfig config = load_config(a.config_path, a.overrides);
  const Image tpl = read_png_gray(a.template_path);
  const Mesh mesh = read_mesh_json(a.mesh_path);
  const CameraIntrinsics camera = read_camera_json(a.camera_path);
  const auto files = list_frames(a.frames_dir);
  const auto ids = frame_ids(files);

  const fs::path dir = a.out_dir;
  fs::create_directories(dir);
  if (a.dump_relevancy) fs::create_directories(dir / "relevancy");
  m.config = ordered_json::parse(tracker_config_to_json(config));
  m.inputs = {{"template", a.template_path}, {"mesh", a.mesh_path}, {"camera", a.camera_path},
              {"frames", a.frames_dir}, {"config", a.config_path}};

  Tracker tracker(tpl, mesh, camera, config);
  std::ofstream results(dir / "results.jsonl", std::ios::binary);
  if (!results) throw InputError("cannot write " + (dir / "results.jsonl").string());
  int lost = 0;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const FrameResult r = tracker.track(read_png_gray(files[i]));
    results << frame_result_json(ids[i], r) << '\n';
    if (a.dump_relevancy && r.relevancy) write_relevancy(dir / "relevancy" / frame_name(ids[i], "pgm"), *r.relevancy);
    if (r.lost) {
      ++lost;
      out << "frame " << ids[i] << ": tracking lost\n";
    }
  }
  m.write(dir);
  out << "tracked " << files.size() << " frames, " << lost << " lost\n";
  return lost ? kExitTrackingLost : kExitOk;
}

struct SynthArgs {
  std::string script_path, benchmark, out_dir;
  std::optional<std::uint64_t> seed;
};

int cmd_synth(const SynthArgs& a, Manifest& m, std::ostream& out) {
  SceneScript script;
  if (!a.script_path.empty()) {
    require_file(a.script_path);
    script = read_scene_script(a.script_path);
  } else {
    script = benchmark_script(a.benchmark);
  }
  if (a.seed) script.seed = *a.seed;
  script.validate();
  const Sequence seq = generate_sequence(script, default_camera());
  const fs::path dir = a.out_dir;
  fs::create_directories(dir);
  write_sequence(dir, seq);
  write_text(dir / "script.json", scene_script_to_json(script) + "\n");
  m.config = ordered_json::parse(scene_script_to_json(script));
  m.inputs = {{"script", a.script_path}, {"benchmark", a.benchmark}};
  m.write(dir);
  out << "wrote " << seq.frames.size() << " frames to " << dir.string() << '\n';
  return kExitOk;
}

struct EvalArgs {
  std::string results_path, gt_dir, mesh_path, out_dir;
};

int cmd_eval(const EvalArgs& a, Manifest& m, std::ostream& out) {
  require_file(a.results_path);
  require_dir(a.gt_dir);
  require_file(a.mesh_path);
  const Mesh mesh = read_mesh_json(a.mesh_path);
  std::ifstream in(a.results_path);
  std::vector<Vertices> est, truth;
  std::vector<bool> lost;
  std::vector<int> ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const int frame = j.at("frame").get<int>();
      est.push_back(vertices_from_json(j.at("vertices").dump()));
      lost.push_back(j.value("lost", false));
      ids.push_back(frame);
    } catch (const std::exception& e) {
      throw InputError(a.results_path + " line " + std::to_string(line_no) + ": " + e.what());
    }
    const fs::path gt = fs::path(a.gt_dir) / frame_name(ids.back(), "json");
    require_file(gt);
    truth.push_back(read_vertices_json(gt));
  }
  if (est.empty()) throw InputError("no results in " + a.results_path);
  const ErrorSummary s = evaluate_frames(mesh, est, truth, lost, ids);

  const fs::path dir = a.out_dir;
  fs::create_directories(dir);
  using detail::format_double;
  std::ostringstream csv;
  csv << "frame,vertex_to_vertex,vertex_to_cloud,vertex_to_vertex_rel,vertex_to_cloud_rel,lost\n";
  double cloud_sum = 0.0;
  for (const auto& f : s.frames) {
    csv << f.frame << ',' << format_double(f.vertex_to_vertex) << ',' << format_double(f.vertex_to_cloud) << ','
        << format_double(f.vertex_to_vertex_rel) << ',' << format_double(f.vertex_to_cloud_rel) << ','
        << (f.lost ? 1 : 0) << '\n';
    cloud_sum += f.vertex_to_cloud_rel;
  }
  write_text(dir / "metrics.csv", csv.str());
  ordered_json summary{{"frames", s.frames.size()},
                       {"lost_frames", s.lost_frames},
                       {"mean_vertex_to_vertex_rel", s.mean},
                       {"median_vertex_to_vertex_rel", s.median},
                       {"max_vertex_to_vertex_rel", s.max},
                       {"mean_vertex_to_cloud_rel", cloud_sum / static_cast<double>(s.frames.size())},
                       {"mean_edge_length", mesh.mean_edge_length()}};
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  m.inputs = {{"results", a.results_path}, {"gt", a.gt_dir}, {"mesh", a.mesh_path}};
  m.write(dir);
  out << "frames " << s.frames.size() << ", mean v2v " << s.mean << ", max v2v " << s.max
      << " (fractions of mean edge length)\n";
  return kExitOk;
}

struct BasinArgs {
  std::string template_path, input_path, out_dir;
  std::vector<int> window;
  std::vector<std::string> costs{"INTENSITY", "GBDF", "NCC", "MI"};
  std::vector<double> sigmas{1.0, 5.0};
  int range = 20;
  int mi_bins = 32;
};

int cmd_basin(const BasinArgs& a, Manifest& m, std::ostream& out) {
  BasinImages im;
  if (a.template_path.empty() != a.input_path.empty()) throw InputError("--template and --input go together");
  if (a.template_path.empty()) {
    im = basin_test_images();
  } else {
    require_file(a.template_path);
    require_file(a.input_path);
    im.template_image = read_png_gray(a.template_path);
    im.input_image = read_png_gray(a.input_path);
    const int w = im.template_image.width(), h = im.template_image.height();
    im.window = Rect{w / 2 - w / 8, h / 2 - h / 8, w / 2 + w / 8, h / 2 + h / 8};
  }
  if (!a.window.empty()) {
    if (a.window.size() != 4) throw InputError("--window expects x0 y0 x1 y1");
    im.window = Rect{a.window[0], a.window[1], a.window[2], a.window[3]};
  }
  const fs::path dir = a.out_dir;
  fs::create_directories(dir);
  std::ostringstream radii;
  radii << "cost,sigma,radius,argmin_dx,argmin_dy\n";
  for (const auto& c : a.costs) {
    for (double sigma : a.sigmas) {
      BasinSpec spec{parse_basin_cost(c), im.window, sigma, a.range, a.mi_bins};
      const BasinGrid g = basin_experiment(im.template_image, im.input_image, spec);
      std::ostringstream name;
      name << "basin_" << c << "_s" << sigma << ".csv";
      write_text(dir / name.str(), basin_csv(g));
      Eigen::Index r = 0, col = 0;
      g.cost.minCoeff(&r, &col);
      const int radius = basin_radius(g);
      radii << c << ',' << detail::format_double(sigma) << ',' << radius << ',' << col - a.range << ','
            << r - a.range << '\n';
      out << c << " sigma " << sigma << ": basin radius " << radius << '\n';
    }
  }
  write_text(dir / "radii.csv", radii.str());
  m.inputs = {{"template", a.template_path}, {"input", a.input_path}};
  m.config = {{"window", {im.window.x0, im.window.y0, im.window.x1, im.window.y1}},
              {"costs", a.costs},
              {"sigmas", a.sigmas},
              {"range", a.range},
              {"mi_bins", a.mi_bins}};
  m.write(dir);
  return kExitOk;
}

struct SweepArgs {
  std::string sequence_dir, benchmark, config_path, out_dir;
  std::vector<std::string> overrides, cells;
  int jobs = 1;
};

std::pair<double, double> parse_cell(const std::string& s) {
  const auto colon = s.find(':');
  try {
    if (colon == std::string::npos) throw std::invalid_argument(s);
    return {std::stod(s.substr(0, colon)), std::stod(s.substr(colon + 1))};
  } catch (const std::exception&) {
    throw InputError("--cell expects lambda_L:lambda_S, got '" + s + "'");
  }
}

int cmd_sweep(const SweepArgs& a, Manifest& m, std::ostream& out) {
  const TrackerConfig config = load_config(a.config_path, a.overrides);
  if (!a.sequence_dir.empty()) require_dir(a.sequence_dir);
  const Sequence seq = a.sequence_dir.empty() ? generate_sequence(benchmark_script(a.benchmark), default_camera())
                                              : read_sequence(a.sequence_dir);
  for (std::size_t f = 0; f < seq.frames.size(); ++f)
    if (seq.frames[f].vertices.rows() == 0)
      throw InputError(a.sequence_dir + ": frame " + std::to_string(f) + " has no ground truth");
  std::vector<std::pair<double, double>> cells;
  for (const auto& c : a.cells) cells.push_back(parse_cell(c));
  if (cells.empty()) cells = default_sweep_cells();

  const auto result = lambda_sweep(seq, config, cells, a.jobs);
  const fs::path dir = a.out_dir;
  fs::create_directories(dir);
  write_text(dir / "sweep.csv", sweep_table_csv(result));
  std::ostringstream long_form;
  long_form << "lambda_L,lambda_S,mean_error,max_error,lost_frames\n";
  for (const auto& c : result) {
    long_form << detail::format_double(c.lambda_L) << ',' << detail::format_double(c.lambda_S) << ','
              << (c.mean_error ? detail::format_double(*c.mean_error) : "N.A") << ','
              << detail::format_double(c.max_error) << ',' << c.lost_frames << '\n';
    out << "lambda_L " << c.lambda_L << " lambda_S " << c.lambda_S << ": "
        << (c.mean_error ? std::to_string(*c.mean_error) : std::string("N.A")) << '\n';
  }
  write_text(dir / "cells.csv", long_form.str());
  m.config = ordered_json::parse(tracker_config_to_json(config));
  m.inputs = {{"sequence", a.sequence_dir}, {"benchmark", a.benchmark}, {"config", a.config_path}};
  m.write(dir);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Monocular deformable-surface tracking toolkit"};
  app.set_version_flag("--version", SURFTRACK_VERSION);
  app.require_subcommand(1);

  TrackArgs ta;
  auto* track = app.add_subcommand("track", "Track a frame sequence and write results.jsonl");
  track->add_option("--template", ta.template_path, "Template image (PNG)")->required();
  track->add_option("--mesh", ta.mesh_path, "Rest mesh (JSON)")->required();
  track->add_option("--camera", ta.camera_path, "Camera intrinsics (JSON)")->required();
  track->add_option("--frames", ta.frames_dir, "Directory of PNG frames")->required();
  track->add_option("--config", ta.config_path, "Tracker config (JSON)")->required();
  track->add_option("--out", ta.out_dir, "Output directory")->required();
  track->add_option("--set", ta.overrides, "Config override key=value");
  track->add_flag("--dump-relevancy", ta.dump_relevancy, "Write per-frame relevancy maps as PGM");

  SynthArgs sa;
  std::uint64_t seed = 0;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic sequence with ground truth");
  auto* script_opt = synth->add_option("--script", sa.script_path, "Scene script (JSON)");
  auto* bench_opt = synth->add_option("--benchmark", sa.benchmark, "Named benchmark scene");
  script_opt->excludes(bench_opt);
  synth->add_option("--out", sa.out_dir, "Output directory")->required();
  auto* seed_opt = synth->add_option("--seed", seed, "Override the script seed");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Score results.jsonl against ground truth");
  eval->add_option("--results", ea.results_path, "results.jsonl")->required();
  eval->add_option("--gt", ea.gt_dir, "Directory of gt/%04d.json")->required();
  eval->add_option("--mesh", ea.mesh_path, "Rest mesh (JSON)")->required();
  eval->add_option("--out", ea.out_dir, "Output directory")->required();

  BasinArgs ba;
  auto* basin = app.add_subcommand("basin", "Translation experiment over the alignment costs");
  basin->add_option("--template", ba.template_path, "Template image (PNG); default: built-in test pair");
  basin->add_option("--input", ba.input_path, "Input image (PNG)");
  basin->add_option("--window", ba.window, "Template window x0 y0 x1 y1")->expected(4);
  basin->add_option("--cost", ba.costs, "INTENSITY, GBDF, NCC or MI");
  basin->add_option("--sigma", ba.sigmas, "Gaussian smoothing sigma in px");
  basin->add_option("--range", ba.range, "Largest offset in px");
  basin->add_option("--mi-bins", ba.mi_bins, "Histogram bins for MI");
  basin->add_option("--out", ba.out_dir, "Output directory")->required();

  SweepArgs wa;
  auto* sweep = app.add_subcommand("sweep", "Tracking error over a lambda_L x lambda_S grid");
  auto* seq_opt = sweep->add_option("--sequence", wa.sequence_dir, "Sequence directory written by synth");
  auto* sbench_opt = sweep->add_option("--benchmark", wa.benchmark, "Named benchmark scene");
  seq_opt->excludes(sbench_opt);
  sweep->add_option("--config", wa.config_path, "Tracker config (JSON)");
  sweep->add_option("--set", wa.overrides, "Config override key=value");
  sweep->add_option("--cell", wa.cells, "lambda_L:lambda_S, repeatable; default grid otherwise");
  sweep->add_option("--jobs", wa.jobs, "Cells tracked in parallel");
  sweep->add_option("--out", wa.out_dir, "Output directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInputError;
  }

  Manifest m;
  m.args = args;
  try {
    if (track->parsed()) {
      m.command = "track";
      return cmd_track(ta, m, out);
    }
    if (synth->parsed()) {
      m.command = "synth";
      if (sa.script_path.empty() == sa.benchmark.empty()) throw InputError("synth needs exactly one of --script, --benchmark");
      if (seed_opt->count()) sa.seed = seed;
      return cmd_synth(sa, m, out);
    }
    if (eval->parsed()) {
      m.command = "eval";
      return cmd_eval(ea, m, out);
    }
    if (basin->parsed()) {
      m.command = "basin";
      return cmd_basin(ba, m, out);
    }
    m.command = "sweep";
    if (wa.sequence_dir.empty() == wa.benchmark.empty()) throw InputError("sweep needs exactly one of --sequence, --benchmark");
    return cmd_sweep(wa, m, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  }
}

}  // namespace surftrack
