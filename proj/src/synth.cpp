#include "surftrack/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "json_format.hpp"
#include "surftrack/descriptors.hpp"
#include "surftrack/image_io.hpp"

namespace surftrack {

namespace {

using nlohmann::json;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  // 53 random bits; std distributions are not portable across standard libraries.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int integer(int lo, int hi) { return lo + static_cast<int>(uniform() * (hi - lo + 1)); }

 private:
  std::mt19937_64 gen_;
};

void fill_rect(Image& img, int x0, int y0, int x1, int y1, double v) {
  for (int y = std::max(0, y0); y < std::min(img.height(), y1); ++y)
    for (int x = std::max(0, x0); x < std::min(img.width(), x1); ++x) img(x, y) = v;
}

void fill_disk(Image& img, double cx, double cy, double r_in, double r_out, double v) {
  for (int y = std::max(0, static_cast<int>(cy - r_out)); y <= std::min(img.height() - 1, static_cast<int>(cy + r_out)); ++y)
    for (int x = std::max(0, static_cast<int>(cx - r_out)); x <= std::min(img.width() - 1, static_cast<int>(cx + r_out)); ++x) {
      const double d = std::hypot(x - cx, y - cy);
      if (d <= r_out && d >= r_in) img(x, y) = v;
    }
}

void draw_segment(Image& img, Vec2 a, Vec2 b, double half_width, double v) {
  const int x0 = std::max(0, static_cast<int>(std::min(a.x(), b.x()) - half_width - 1));
  const int x1 = std::min(img.width() - 1, static_cast<int>(std::max(a.x(), b.x()) + half_width + 1));
  const int y0 = std::max(0, static_cast<int>(std::min(a.y(), b.y()) - half_width - 1));
  const int y1 = std::min(img.height() - 1, static_cast<int>(std::max(a.y(), b.y()) + half_width + 1));
  const Vec2 d = b - a;
  const double len2 = d.squaredNorm();
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const Vec2 p(x, y);
      const double t = len2 > 0.0 ? std::clamp((p - a).dot(d) / len2, 0.0, 1.0) : 0.0;
      if ((a + t * d - p).norm() <= half_width) img(x, y) = v;
    }
}

Image printed_page(int w, int h, Rng& rng) {
  Image img(w, h);
  img.fill(0.93);
  for (int y = 6; y + 7 < h; y += 13) {
    if (rng.uniform() < 0.08) continue;
    int x = 6 + rng.integer(0, 20);
    while (x < w - 6) {
      const int len = rng.integer(2, 9);
      const double ink = rng.uniform(0.08, 0.3);
      for (int c = 0; c < len && x < w - 6; ++c) {
        const int lw = rng.integer(2, 4);
        const int top = y + (rng.uniform() < 0.25 ? 0 : rng.integer(1, 3));
        const int bottom = y + 7 + (rng.uniform() < 0.15 ? 2 : 0);
        if (rng.uniform() < 0.5) {
          fill_rect(img, x, top, x + lw, bottom, ink);
        } else {
          fill_rect(img, x, top, x + lw, top + 2, ink);
          fill_rect(img, x, bottom - 2, x + lw, bottom, ink);
          fill_rect(img, x, top, x + 1, bottom, ink);
        }
        x += lw + 1;
      }
      x += rng.integer(4, 9);
    }
  }
  // Halftone-like figures made of soft blobs.
  const int figures = 3;
  for (int f = 0; f < figures; ++f) {
    // Figures shrink to fit small pages.
    const int fw = std::min(rng.integer(60, 120), w - 1);
    const int fh = std::min(rng.integer(50, 90), h - 1);
    const int fx = rng.integer(0, w - fw - 1);
    const int fy = rng.integer(0, h - fh - 1);
    std::vector<std::array<double, 4>> blobs;
    for (int k = 0; k < 14; ++k)
      blobs.push_back({rng.uniform(fx, fx + fw), rng.uniform(fy, fy + fh), rng.uniform(4.0, 14.0), rng.uniform(-0.45, 0.45)});
    for (int y = fy; y < fy + fh; ++y)
      for (int x = fx; x < fx + fw; ++x) {
        double v = 0.55;
        for (const auto& b : blobs) {
          const double d2 = (x - b[0]) * (x - b[0]) + (y - b[1]) * (y - b[1]);
          v += b[3] * std::exp(-d2 / (2.0 * b[2] * b[2]));
        }
        img(x, y) = std::clamp(v, 0.05, 0.95);
      }
  }
  return img;
}

Image sparse_page(int w, int h, Rng& rng) {
  Image img(w, h);
  img.fill(0.9);
  const int marks = std::max(1, w * h / 5000);
  for (int m = 0; m < marks; ++m) {
    const double cx = rng.uniform(0, w);
    const double cy = rng.uniform(0, h);
    const double ink = rng.uniform(0.1, 0.35);
    switch (rng.integer(0, 3)) {
      case 0: fill_disk(img, cx, cy, 0.0, rng.uniform(3.0, 7.0), ink); break;
      case 1: {
        const double r = rng.uniform(8.0, 15.0);
        fill_disk(img, cx, cy, r - 2.0, r, ink);
        break;
      }
      case 2: {
        const double a = rng.uniform(0.0, std::numbers::pi);
        const double l = rng.uniform(10.0, 25.0);
        const Vec2 d(l * std::cos(a), l * std::sin(a));
        draw_segment(img, Vec2(cx, cy) - d, Vec2(cx, cy) + d, 1.2, ink);
        break;
      }
      default: {
        const double l = rng.uniform(5.0, 10.0);
        draw_segment(img, {cx - l, cy}, {cx + l, cy}, 1.2, ink);
        draw_segment(img, {cx, cy - l}, {cx, cy + l}, 1.2, ink);
        break;
      }
    }
  }
  return img;
}

Vec2 path_position(const std::vector<Vec2>& path, double t) {
  if (path.size() == 1) return path.front();
  const double s = std::clamp(t, 0.0, 1.0) * static_cast<double>(path.size() - 1);
  const auto i = std::min(static_cast<std::size_t>(s), path.size() - 2);
  const double u = s - static_cast<double>(i);
  return (1.0 - u) * path[i] + u * path[i + 1];
}

bool in_rounded_rect(double x, double y, double w, double h, double r) {
  if (x < 0.0 || y < 0.0 || x > w || y > h) return false;
  const double qx = std::max(0.0, std::max(r - x, x - (w - r)));
  const double qy = std::max(0.0, std::max(r - y, y - (h - r)));
  return qx * qx + qy * qy <= r * r;
}

// Reads a number or a list of numbers as a schedule.
Schedule schedule_from(const json& j, const std::string& what) {
  Schedule s;
  if (j.is_number()) {
    s.keys = {j.get<double>()};
  } else if (j.is_array() && !j.empty()) {
    s.keys.clear();
    for (const auto& v : j) s.keys.push_back(v.get<double>());
  } else {
    throw InputError(what + " must be a number or a non-empty list of numbers");
  }
  return s;
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  const std::set<std::string> known(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw InputError("unknown key '" + k + "' in " + where);
}

json schedule_json(const Schedule& s) { return s.keys; }

}  // namespace

std::string_view to_string(DeformationKind kind) {
  switch (kind) {
    case DeformationKind::None: return "NONE";
    case DeformationKind::CylBend: return "CYL_BEND";
    case DeformationKind::Wave: return "WAVE";
  }
  return "?";
}

DeformationKind parse_deformation_kind(std::string_view name) {
  if (name == "NONE") return DeformationKind::None;
  if (name == "CYL_BEND") return DeformationKind::CylBend;
  if (name == "WAVE") return DeformationKind::Wave;
  throw InputError("unknown deformation kind '" + std::string(name) + "' (valid: NONE, CYL_BEND, WAVE)");
}

double Schedule::at(int frame, int frames) const {
  if (keys.empty()) throw InputError("empty schedule");
  if (keys.size() == 1 || frames <= 0) return keys.front();
  const double s = static_cast<double>(frame) / frames * static_cast<double>(keys.size() - 1);
  const auto i = std::min(static_cast<std::size_t>(std::max(s, 0.0)), keys.size() - 2);
  const double u = s - static_cast<double>(i);
  if (u == 0.0) return keys[i];
  return (1.0 - u) * keys[i] + u * keys[i + 1];
}

void SceneScript::validate() const {
  if (width < 3 || height < 3) throw InputError("scene width/height must be >= 3");
  if (mesh_rows < 2 || mesh_cols < 2) throw InputError("mesh_rows and mesh_cols must be >= 2");
  if (!(spacing > 0.0)) throw InputError("spacing must be > 0");
  if (!(depth > kMinDepth)) throw InputError("depth must be positive");
  if (frames < 0) throw InputError("frames must be >= 0");
  if (deformation.amplitude.keys.empty() || deformation.wavelength.keys.empty())
    throw InputError("deformation schedules must not be empty");
  if (deformation.kind == DeformationKind::Wave)
    for (double l : deformation.wavelength.keys)
      if (!(l > 0.0)) throw InputError("deformation.wavelength must be > 0");
  if (occluder) {
    if (occluder->width < 1 || occluder->height < 1) throw InputError("occluder size must be positive");
    if (occluder->path.empty()) throw InputError("occluder.path must hold at least one position");
    if (occluder->first_frame < 1) throw InputError("occluder.first_frame must be >= 1 (frame 0 is the template)");
  }
  if (lighting && (lighting->gain.keys.empty() || lighting->bias.keys.empty()))
    throw InputError("lighting schedules must not be empty");
}

SceneScript scene_script_from_json(const std::string& text) {
  SceneScript s;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw InputError("scene script must be a JSON object");
    reject_unknown(j,
                   {"width", "height", "texture", "mesh_rows", "mesh_cols", "spacing", "depth", "frames", "deformation",
                    "rotation_deg_per_frame", "occluder", "lighting", "background", "seed"},
                   "scene script");
    s.width = j.value("width", s.width);
    s.height = j.value("height", s.height);
    s.texture = j.value("texture", s.texture);
    s.mesh_rows = j.value("mesh_rows", s.mesh_rows);
    s.mesh_cols = j.value("mesh_cols", s.mesh_cols);
    s.spacing = j.value("spacing", s.spacing);
    s.depth = j.value("depth", s.depth);
    s.frames = j.value("frames", s.frames);
    s.rotation_deg_per_frame = j.value("rotation_deg_per_frame", s.rotation_deg_per_frame);
    s.background = j.value("background", s.background);
    s.seed = j.value("seed", s.seed);
    if (j.contains("deformation")) {
      const json& d = j.at("deformation");
      reject_unknown(d, {"kind", "amplitude", "wavelength"}, "deformation");
      s.deformation.kind = parse_deformation_kind(d.value("kind", std::string("NONE")));
      if (d.contains("amplitude")) s.deformation.amplitude = schedule_from(d.at("amplitude"), "deformation.amplitude");
      if (d.contains("wavelength"))
        s.deformation.wavelength = schedule_from(d.at("wavelength"), "deformation.wavelength");
    }
    if (j.contains("occluder") && !j.at("occluder").is_null()) {
      const json& o = j.at("occluder");
      reject_unknown(o, {"width", "height", "corner_radius", "gray", "noise", "path", "first_frame"}, "occluder");
      Occluder occ;
      occ.width = o.value("width", occ.width);
      occ.height = o.value("height", occ.height);
      occ.corner_radius = o.value("corner_radius", occ.corner_radius);
      occ.gray = o.value("gray", occ.gray);
      occ.noise = o.value("noise", occ.noise);
      occ.first_frame = o.value("first_frame", occ.first_frame);
      for (const auto& p : o.at("path")) occ.path.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
      s.occluder = occ;
    }
    if (j.contains("lighting") && !j.at("lighting").is_null()) {
      const json& l = j.at("lighting");
      reject_unknown(l, {"gain", "bias"}, "lighting");
      Lighting light;
      if (l.contains("gain")) light.gain = schedule_from(l.at("gain"), "lighting.gain");
      if (l.contains("bias")) light.bias = schedule_from(l.at("bias"), "lighting.bias");
      s.lighting = light;
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("invalid scene script: ") + e.what());
  }
  s.validate();
  return s;
}

SceneScript read_scene_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open scene script: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return scene_script_from_json(ss.str());
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string scene_script_to_json(const SceneScript& s) {
  json j;
  j["width"] = s.width;
  j["height"] = s.height;
  j["texture"] = s.texture;
  j["mesh_rows"] = s.mesh_rows;
  j["mesh_cols"] = s.mesh_cols;
  j["spacing"] = s.spacing;
  j["depth"] = s.depth;
  j["frames"] = s.frames;
  j["deformation"] = {{"kind", std::string(to_string(s.deformation.kind))},
                      {"amplitude", schedule_json(s.deformation.amplitude)},
                      {"wavelength", schedule_json(s.deformation.wavelength)}};
  j["rotation_deg_per_frame"] = s.rotation_deg_per_frame;
  if (s.occluder) {
    json path = json::array();
    for (const Vec2& p : s.occluder->path) path.push_back({p.x(), p.y()});
    j["occluder"] = {{"width", s.occluder->width}, {"height", s.occluder->height},
                     {"corner_radius", s.occluder->corner_radius}, {"gray", s.occluder->gray},
                     {"noise", s.occluder->noise}, {"path", path}, {"first_frame", s.occluder->first_frame}};
  }
  if (s.lighting) j["lighting"] = {{"gain", schedule_json(s.lighting->gain)}, {"bias", schedule_json(s.lighting->bias)}};
  j["background"] = s.background;
  j["seed"] = s.seed;
  return j.dump(2) + "\n";
}

SceneScript benchmark_script(const std::string& name) {
  SceneScript s;
  if (name == "static") {
    s.frames = 50;
  } else if (name == "bend" || name == "bend_sparse") {
    s.frames = 60;
    s.deformation.kind = DeformationKind::CylBend;
    s.deformation.amplitude.keys = {0.0, 0.006, 0.0, -0.005, 0.0};
    if (name == "bend_sparse") s.texture = "sparse";
  } else if (name == "rotate") {
    s.frames = 72;
    s.rotation_deg_per_frame = 5.0;
  } else if (name == "occluded" || name == "occluded_sparse") {
    s.frames = 20;
    s.deformation.kind = DeformationKind::CylBend;
    s.deformation.amplitude.keys = {0.0, 0.002};
    Occluder occ;
    occ.width = 120;
    occ.height = 150;
    occ.gray = 0.3;
    occ.path = {{235.0, 215.0}, {405.0, 265.0}};
    s.occluder = occ;
    if (name == "occluded_sparse") s.texture = "sparse";
  } else {
    throw InputError("unknown benchmark '" + name +
                     "' (valid: static, bend, bend_sparse, rotate, occluded, occluded_sparse)");
  }
  return s;
}

CameraIntrinsics default_camera() { return CameraIntrinsics{600.0, 600.0, 320.0, 240.0}; }

Image make_texture(const std::string& kind, int width, int height, std::uint64_t seed) {
  if (width < 16 || height < 16) throw InputError("texture must be at least 16 x 16 px");
  Rng rng(seed);
  Image raw;
  if (kind == "textured") {
    raw = printed_page(width, height, rng);
  } else if (kind == "sparse") {
    raw = sparse_page(width, height, rng);
  } else {
    throw InputError("unknown texture kind '" + kind + "' (valid: textured, sparse)");
  }
  // Light blur against aliasing under resampling.
  return gaussian_smooth(raw, 1.5);
}

Vertices scene_vertices(const SceneScript& script, const Mesh& mesh, int frame) {
  const Vertices& rest = mesh.rest();
  Vertices V = rest;
  const Vec3 c = rest.colwise().mean().transpose();

  const Deformation& d = script.deformation;
  if (d.kind == DeformationKind::CylBend) {
    const double k = d.amplitude.at(frame, script.frames);
    if (k != 0.0) {
      // Wraps the plane onto a cylinder whose axis is parallel to y; arc
      // length along x is preserved.
      for (Eigen::Index i = 0; i < V.rows(); ++i) {
        const double x = rest(i, 0) - c.x();
        V(i, 0) = c.x() + std::sin(k * x) / k;
        V(i, 2) = rest(i, 2) + (1.0 - std::cos(k * x)) / k;
      }
    }
  } else if (d.kind == DeformationKind::Wave) {
    const double a = d.amplitude.at(frame, script.frames);
    const double l = d.wavelength.at(frame, script.frames);
    if (a != 0.0)
      for (Eigen::Index i = 0; i < V.rows(); ++i)
        V(i, 2) = rest(i, 2) + a * std::sin(2.0 * std::numbers::pi * (rest(i, 0) - c.x()) / l);
  }

  const double deg = std::fmod(frame * script.rotation_deg_per_frame, 360.0);
  if (deg != 0.0) {
    const double a = deg * std::numbers::pi / 180.0;
    const double ca = std::cos(a), sa = std::sin(a);
    for (Eigen::Index i = 0; i < V.rows(); ++i) {
      const double x = V(i, 0) - c.x();
      const double y = V(i, 1) - c.y();
      V(i, 0) = c.x() + ca * x - sa * y;
      V(i, 1) = c.y() + sa * x + ca * y;
    }
  }
  return V;
}

Image render_surface(const Image& texture, const Mesh& mesh, const Vertices& V, const CameraIntrinsics& camera,
                     int width, int height, double background) {
  Image out(width, height);
  out.fill(background);
  std::vector<Vec2> tex(static_cast<std::size_t>(mesh.vertex_count()));
  for (int i = 0; i < mesh.vertex_count(); ++i) tex[static_cast<std::size_t>(i)] = project(camera, mesh.rest().row(i));
  const PixelAnchorSet hits = cast_pixels(mesh, V, camera, width, height);
  for (const PixelAnchor& a : hits.entries) {
    const Face& f = mesh.faces()[static_cast<std::size_t>(a.face)];
    const Vec2 t = a.bary[0] * tex[static_cast<std::size_t>(f[0])] + a.bary[1] * tex[static_cast<std::size_t>(f[1])] +
                   a.bary[2] * tex[static_cast<std::size_t>(f[2])];
    double v = 0.0;
    if (sample_bilinear(texture, t.x(), t.y(), v)) out(a.x, a.y) = v;
  }
  return out;
}

GroundTruthFrame render_frame(const SceneScript& script, const Image& texture, const Mesh& mesh,
                              const CameraIntrinsics& camera, int frame) {
  GroundTruthFrame gt;
  gt.vertices = scene_vertices(script, mesh, frame);
  Image img = render_surface(texture, mesh, gt.vertices, camera, script.width, script.height, script.background);
  if (script.lighting) {
    const double g = script.lighting->gain.at(frame, script.frames);
    const double b = script.lighting->bias.at(frame, script.frames);
    for (double& v : img.pixels()) v = g * v + b;
  }
  gt.occlusion = Mask(script.width, script.height);
  if (script.occluder && frame >= script.occluder->first_frame) {
    const Occluder& o = *script.occluder;
    const int span = std::max(1, script.frames - o.first_frame);
    const Vec2 c = path_position(o.path, static_cast<double>(frame - o.first_frame) / span);
    const double x0 = c.x() - 0.5 * o.width;
    const double y0 = c.y() - 0.5 * o.height;
    // Noise on a coarse lattice fixed to the sprite, so the occluder carries
    // texture that moves with it.
    constexpr double kCell = 6.0;
    const int gw = static_cast<int>(o.width / kCell) + 2;
    const int gh = static_cast<int>(o.height / kCell) + 2;
    Rng rng(script.seed * 0x9E3779B97F4A7C15ULL + 17);
    std::vector<double> lattice(static_cast<std::size_t>(gw * gh));
    for (double& v : lattice) v = 2.0 * rng.uniform() - 1.0;
    auto noise_at = [&](double u, double v) {
      const double gx = std::clamp(u / kCell, 0.0, gw - 1.001);
      const double gy = std::clamp(v / kCell, 0.0, gh - 1.001);
      const int ix = static_cast<int>(gx), iy = static_cast<int>(gy);
      const double fx = gx - ix, fy = gy - iy;
      auto L = [&](int x, int y) { return lattice[static_cast<std::size_t>(y * gw + x)]; };
      return (1 - fy) * ((1 - fx) * L(ix, iy) + fx * L(ix + 1, iy)) + fy * ((1 - fx) * L(ix, iy + 1) + fx * L(ix + 1, iy + 1));
    };
    for (int y = std::max(0, static_cast<int>(std::floor(y0))); y <= std::min(script.height - 1, static_cast<int>(y0 + o.height)); ++y)
      for (int x = std::max(0, static_cast<int>(std::floor(x0))); x <= std::min(script.width - 1, static_cast<int>(x0 + o.width)); ++x) {
        if (!in_rounded_rect(x - x0, y - y0, o.width, o.height, o.corner_radius)) continue;
        img(x, y) = std::clamp(o.gray * (1.0 + o.noise * noise_at(x - x0, y - y0)), 0.0, 1.0);
        gt.occlusion(x, y) = 1;
      }
  }
  gt.image = quantize_8bit(img);
  return gt;
}

double max_edge_strain(const Mesh& mesh, const Vertices& V) {
  double worst = 0.0;
  for (std::size_t e = 0; e < mesh.edges().size(); ++e) {
    const auto& [i, j] = mesh.edges()[e];
    const double l = (V.row(i) - V.row(j)).norm();
    worst = std::max(worst, std::abs(l - mesh.rest_lengths()[e]) / mesh.rest_lengths()[e]);
  }
  return worst;
}

Sequence generate_sequence(const SceneScript& script, const CameraIntrinsics& camera) {
  script.validate();
  camera.validate();
  Image texture;
  if (script.texture == "textured" || script.texture == "sparse") {
    texture = make_texture(script.texture, script.width, script.height, script.seed);
  } else {
    texture = read_png_gray(script.texture);
  }
  Sequence seq{Image(), make_grid_mesh(script.mesh_rows, script.mesh_cols, script.spacing, script.depth), camera, {}};
  const Rect tex_rect = full_rect(texture.width(), texture.height());
  for (int i = 0; i < seq.mesh.vertex_count(); ++i) {
    const Vec2 p = project(camera, seq.mesh.rest().row(i));
    if (!(p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= tex_rect.x1 - 1 && p.y() <= tex_rect.y1 - 1))
      throw InputError("texture does not cover the template projection of the mesh");
  }
  for (int f = 0; f <= script.frames; ++f) {
    GroundTruthFrame gt = render_frame(script, texture, seq.mesh, camera, f);
    const double strain = max_edge_strain(seq.mesh, gt.vertices);
    if (strain > 0.01)
      throw InputError("frame " + std::to_string(f) + ": edge length deviates " + std::to_string(100.0 * strain) +
                       "% from rest (limit 1%)");
    seq.frames.push_back(std::move(gt));
  }
  seq.template_image = seq.frames.front().image;
  return seq;
}

namespace {

std::string frame_name(int i, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d.%s", i, ext);
  return buf;
}

}  // namespace

void write_sequence(const std::filesystem::path& dir, const Sequence& seq) {
  namespace fs = std::filesystem;
  for (const char* sub : {"frames", "gt", "masks"}) fs::create_directories(dir / sub);
  write_png_gray(dir / "template.png", seq.template_image);
  write_mesh_json(dir / "mesh.json", seq.mesh);
  write_camera_json(dir / "camera.json", seq.camera);
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    const int f = static_cast<int>(i);
    write_png_gray(dir / "frames" / frame_name(f, "png"), seq.frames[i].image);
    write_png_mask(dir / "masks" / frame_name(f, "png"), seq.frames[i].occlusion);
    std::ofstream out(dir / "gt" / frame_name(f, "json"));
    if (!out) throw InputError("cannot write " + (dir / "gt" / frame_name(f, "json")).string());
    out << vertices_to_json(seq.frames[i].vertices) << "\n";
  }
}

std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw InputError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw InputError("no PNG frames in " + dir.string());
  return out;
}

Vertices vertices_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    const json& jv = j.is_object() ? j.at("vertices") : j;
    Vertices V(static_cast<Eigen::Index>(jv.size()), 3);
    for (std::size_t i = 0; i < jv.size(); ++i)
      for (int c = 0; c < 3; ++c) {
        const json& v = jv.at(i).at(static_cast<std::size_t>(c));
        V(static_cast<Eigen::Index>(i), c) = v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
      }
    return V;
  } catch (const json::exception& e) {
    throw InputError(std::string("invalid vertex list: ") + e.what());
  }
}

Vertices read_vertices_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open vertex file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return vertices_from_json(ss.str());
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

Sequence read_sequence(const std::filesystem::path& dir) {
  Sequence seq{read_png_gray(dir / "template.png"), read_mesh_json(dir / "mesh.json"), read_camera_json(dir / "camera.json"), {}};
  for (const auto& p : list_frames(dir / "frames")) {
    GroundTruthFrame gt;
    gt.image = read_png_gray(p);
    const std::string stem = p.stem().string();
    const auto gt_path = dir / "gt" / (stem + ".json");
    if (std::filesystem::exists(gt_path)) gt.vertices = read_vertices_json(gt_path);
    const auto mask_path = dir / "masks" / (stem + ".png");
    gt.occlusion = std::filesystem::exists(mask_path) ? read_png_mask(mask_path) : Mask(gt.image.width(), gt.image.height());
    seq.frames.push_back(std::move(gt));
  }
  return seq;
}

}  // namespace surftrack
