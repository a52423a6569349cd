#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "surftrack/cli.hpp"
#include "surftrack/harness.hpp"
#include "surftrack/image_io.hpp"
#include "test_util.hpp"

using namespace surftrack;
using namespace testutil;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::vector<nlohmann::json> jsonl(const fs::path& p) {
  std::vector<nlohmann::json> rows;
  std::istringstream in(slurp(p));
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) rows.push_back(nlohmann::json::parse(line));
  return rows;
}

std::string small_script(int frames, const std::string& deformation = "") {
  return R"({"mesh_rows": 5, "mesh_cols": 6, "frames": )" + std::to_string(frames) + deformation + "}";
}

// Synthesises a small sequence into `dir` and returns the track arguments for it.
std::vector<std::string> track_args(const fs::path& seq, const fs::path& out, const fs::path& config) {
  return {"track",  "--template", (seq / "template.png").string(), "--mesh", (seq / "mesh.json").string(),
          "--camera", (seq / "camera.json").string(), "--frames", (seq / "frames").string(),
          "--config", config.string(), "--out", out.string()};
}

void check_manifest(const fs::path& dir, const std::string& command) {
  const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(m.at("command") == command);
  CHECK(m.contains("args"));
  CHECK(m.contains("config"));
  CHECK(m.contains("inputs"));
  CHECK(m.at("tool_version").get<std::string>().size() > 0);
  CHECK(m.at("started_at").get<std::string>().back() == 'Z');
  CHECK(m.at("wall_clock_seconds").get<double>() >= 0.0);
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit with code 1") {
    CHECK(cli({}).code == kExitInputError);
    CHECK(cli({"frobnicate"}).code == kExitInputError);
    CHECK(cli({"--help"}).code == kExitOk);
    const CliRun r = cli({"synth", "--out", "x"});
    CHECK(r.code == kExitInputError);
  }

  TEST_CASE("synth of a static scene writes identical frames") {
    const auto dir = scratch_dir("cli_synth_static");
    spit(dir / "scene.json", small_script(3));
    const CliRun r = cli({"synth", "--script", (dir / "scene.json").string(), "--out", (dir / "seq").string()});
    REQUIRE(r.code == kExitOk);
    const std::string tpl = slurp(dir / "seq" / "frames" / "0000.png");
    CHECK(!tpl.empty());
    for (int f = 1; f <= 3; ++f) {
      char name[16];
      std::snprintf(name, sizeof name, "%04d.png", f);
      CHECK(slurp(dir / "seq" / "frames" / name) == tpl);
    }
    CHECK(slurp(dir / "seq" / "template.png") == tpl);
    CHECK(fs::exists(dir / "seq" / "script.json"));
    check_manifest(dir / "seq", "synth");
  }

  TEST_CASE("synth ground truth for rotation and bending") {
    const auto dir = scratch_dir("cli_synth_gt");
    spit(dir / "rot.json", R"({"frames": 72, "rotation_deg_per_frame": 5, "mesh_rows": 4, "mesh_cols": 4})");
    REQUIRE(cli({"synth", "--script", (dir / "rot.json").string(), "--out", (dir / "rot").string()}).code == kExitOk);
    const Vertices v0 = read_vertices_json(dir / "rot" / "gt" / "0000.json");
    const Vertices v72 = read_vertices_json(dir / "rot" / "gt" / "0072.json");
    CHECK((v72 - v0).cwiseAbs().maxCoeff() < 1e-9);

    spit(dir / "bend.json", small_script(4, R"(, "deformation": {"kind": "CYL_BEND", "amplitude": [0, 0.006]})"));
    REQUIRE(cli({"synth", "--script", (dir / "bend.json").string(), "--out", (dir / "bend").string()}).code == kExitOk);
    const Mesh mesh = read_mesh_json(dir / "bend" / "mesh.json");
    for (const auto& p : fs::directory_iterator(dir / "bend" / "gt"))
      CHECK(max_edge_strain(mesh, read_vertices_json(p.path())) < 0.01);

    const CliRun bad = cli({"synth", "--benchmark", "nope", "--out", (dir / "x").string()});
    CHECK(bad.code == kExitInputError);
    CHECK(bad.err.find("occluded_sparse") != std::string::npos);
  }

  TEST_CASE("track, then eval, on a one-frame static sequence") {
    const auto dir = scratch_dir("cli_track");
    spit(dir / "scene.json", small_script(1));
    REQUIRE(cli({"synth", "--script", (dir / "scene.json").string(), "--out", (dir / "seq").string()}).code == kExitOk);
    spit(dir / "config.json", R"({"use_relevancy": false})");
    // Track only the template frame.
    fs::create_directories(dir / "only0");
    fs::copy_file(dir / "seq" / "frames" / "0000.png", dir / "only0" / "0000.png");
    auto args = track_args(dir / "seq", dir / "out", dir / "config.json");
    args[8] = (dir / "only0").string();
    args.push_back("--dump-relevancy");
    args.push_back("--set");
    args.push_back("use_relevancy=true");
    const CliRun r = cli(args);
    REQUIRE(r.code == kExitOk);
    const auto rows = jsonl(dir / "out" / "results.jsonl");
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].at("frame") == 0);
    CHECK(rows[0].at("lost") == false);
    const Mesh mesh = read_mesh_json(dir / "seq" / "mesh.json");
    const Vertices V = vertices_from_json(rows[0].at("vertices").dump());
    CHECK((V - mesh.rest()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(fs::exists(dir / "out" / "relevancy" / "0000.pgm"));
    check_manifest(dir / "out", "track");
    const auto manifest = nlohmann::json::parse(slurp(dir / "out" / "manifest.json"));
    CHECK(manifest.at("config").at("use_relevancy") == true);

    const CliRun e = cli({"eval", "--results", (dir / "out" / "results.jsonl").string(), "--gt",
                          (dir / "seq" / "gt").string(), "--mesh", (dir / "seq" / "mesh.json").string(), "--out",
                          (dir / "eval").string()});
    REQUIRE(e.code == kExitOk);
    const auto summary = nlohmann::json::parse(slurp(dir / "eval" / "summary.json"));
    CHECK(summary.at("frames") == 1);
    CHECK(summary.at("mean_vertex_to_vertex_rel").get<double>() < 1e-9);
    CHECK(slurp(dir / "eval" / "metrics.csv")
              .starts_with("frame,vertex_to_vertex,vertex_to_cloud,vertex_to_vertex_rel,vertex_to_cloud_rel,lost\n0,"));
    check_manifest(dir / "eval", "eval");
  }

  TEST_CASE("eval measures known offsets") {
    const auto dir = scratch_dir("cli_eval");
    const Mesh mesh = make_grid_mesh(3, 4, 16.0, 600.0);
    write_mesh_json(dir / "mesh.json", mesh);
    fs::create_directories(dir / "gt");
    std::string lines;
    Vertices noisy = jitter(mesh.rest(), 2.0);
    for (int f = 1; f <= 2; ++f) {
      char name[16];
      std::snprintf(name, sizeof name, "%04d.json", f);
      std::ofstream(dir / "gt" / name) << vertices_to_json(mesh.rest());
      FrameResult r;
      r.vertices = f == 1 ? Vertices(mesh.rest().rowwise() + Eigen::RowVector3d(0, 0, 1.5)) : noisy;
      lines += frame_result_json(f, r) + "\n";
    }
    spit(dir / "results.jsonl", lines);
    REQUIRE(cli({"eval", "--results", (dir / "results.jsonl").string(), "--gt", (dir / "gt").string(), "--mesh",
                 (dir / "mesh.json").string(), "--out", (dir / "out").string()})
                .code == kExitOk);
    std::istringstream csv(slurp(dir / "out" / "metrics.csv"));
    std::string header, row1, row2;
    std::getline(csv, header);
    std::getline(csv, row1);
    std::getline(csv, row2);
    CHECK(std::stod(row1.substr(row1.find(',') + 1)) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(std::stod(row2.substr(row2.find(',') + 1)) ==
          doctest::Approx(vertex_to_vertex_error(noisy, mesh.rest())).epsilon(1e-12));
  }

  TEST_CASE("track reports bad inputs with exit code 1") {
    const auto dir = scratch_dir("cli_bad");
    spit(dir / "scene.json", small_script(1));
    REQUIRE(cli({"synth", "--script", (dir / "scene.json").string(), "--out", (dir / "seq").string()}).code == kExitOk);
    spit(dir / "bad_kind.json", R"({"similarity": {"kind": "L1"}})");
    const CliRun kind = cli(track_args(dir / "seq", dir / "out1", dir / "bad_kind.json"));
    CHECK(kind.code == kExitInputError);
    CHECK(kind.err.find("SSD, NCC, MI, HUBER, TUKEY") != std::string::npos);

    spit(dir / "ok.json", "{}");
    auto args = track_args(dir / "seq", dir / "out2", dir / "ok.json");
    args[2] = (dir / "nowhere.png").string();
    const CliRun missing = cli(args);
    CHECK(missing.code == kExitInputError);
    CHECK(missing.err.find("nowhere.png") != std::string::npos);
  }

  TEST_CASE("track exits with code 2 when the surface is lost") {
    const auto dir = scratch_dir("cli_lost");
    spit(dir / "scene.json", small_script(1));
    REQUIRE(cli({"synth", "--script", (dir / "scene.json").string(), "--out", (dir / "seq").string()}).code == kExitOk);
    fs::create_directories(dir / "tiny");
    write_png_gray(dir / "tiny" / "0001.png", Image(20, 20, 0.5));
    spit(dir / "config.json", R"({"use_relevancy": false})");
    auto args = track_args(dir / "seq", dir / "out", dir / "config.json");
    args[8] = (dir / "tiny").string();
    const CliRun r = cli(args);
    CHECK(r.code == kExitTrackingLost);
    const auto rows = jsonl(dir / "out" / "results.jsonl");
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].at("lost") == true);
    CHECK(rows[0].at("frame") == 1);
  }

  TEST_CASE("basin and sweep produce their tables") {
    const auto dir = scratch_dir("cli_basin");
    const Image t = make_texture("textured", 160, 120, 5);
    write_png_gray(dir / "t.png", t);
    const CliRun b = cli({"basin", "--template", (dir / "t.png").string(), "--input", (dir / "t.png").string(),
                          "--window", "50", "40", "110", "80", "--cost", "GBDF", "--cost", "NCC", "--sigma", "2",
                          "--range", "6", "--out", (dir / "basin").string()});
    REQUIRE(b.code == kExitOk);
    CHECK(fs::exists(dir / "basin" / "basin_GBDF_s2.csv"));
    CHECK(fs::exists(dir / "basin" / "basin_NCC_s2.csv"));
    const std::string radii = slurp(dir / "basin" / "radii.csv");
    CHECK(radii.starts_with("cost,sigma,radius,argmin_dx,argmin_dy\n"));
    CHECK(radii.find("GBDF,2,") != std::string::npos);
    check_manifest(dir / "basin", "basin");

    spit(dir / "scene.json", small_script(1));
    REQUIRE(cli({"synth", "--script", (dir / "scene.json").string(), "--out", (dir / "seq").string()}).code == kExitOk);
    const CliRun s = cli({"sweep", "--sequence", (dir / "seq").string(), "--set", "use_relevancy=false", "--cell",
                          "1:0.25", "--cell", "2:0.5", "--jobs", "2", "--out", (dir / "sweep").string()});
    REQUIRE(s.code == kExitOk);
    CHECK(slurp(dir / "sweep" / "sweep.csv").starts_with("lambda_L\\lambda_S,0.25,0.5\n1,"));
    CHECK(fs::exists(dir / "sweep" / "cells.csv"));
    check_manifest(dir / "sweep", "sweep");
    CHECK(cli({"sweep", "--sequence", (dir / "seq").string(), "--cell", "1-0.25", "--out", (dir / "bad").string()}).code ==
          kExitInputError);
  }

  TEST_CASE("re-running track gives identical results") {
    const auto dir = scratch_dir("cli_determinism");
    spit(dir / "scene.json", small_script(2, R"(, "deformation": {"kind": "CYL_BEND", "amplitude": [0, 0.003]})"));
    REQUIRE(cli({"synth", "--script", (dir / "scene.json").string(), "--out", (dir / "seq").string()}).code == kExitOk);
    spit(dir / "config.json", "{}");
    REQUIRE(cli(track_args(dir / "seq", dir / "a", dir / "config.json")).code == kExitOk);
    REQUIRE(cli(track_args(dir / "seq", dir / "b", dir / "config.json")).code == kExitOk);
    CHECK(slurp(dir / "a" / "results.jsonl") == slurp(dir / "b" / "results.jsonl"));
    CHECK(jsonl(dir / "a" / "results.jsonl").size() == 3);
  }
}
