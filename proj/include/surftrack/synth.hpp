#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "surftrack/camera.hpp"
#include "surftrack/image.hpp"
#include "surftrack/mesh.hpp"

namespace surftrack {

enum class DeformationKind { None, CylBend, Wave };
std::string_view to_string(DeformationKind kind);
DeformationKind parse_deformation_kind(std::string_view name);

/// Values spread evenly over frames 0..frames and linearly interpolated.
/// A single key is constant.
struct Schedule {
  std::vector<double> keys{0.0};
  double at(int frame, int frames) const;
};

struct Deformation {
  DeformationKind kind = DeformationKind::None;
  /// CYL_BEND: curvature in 1/mm (positive bends the sides away from the
  /// camera). WAVE: out-of-plane amplitude in mm.
  Schedule amplitude;
  /// WAVE only, in mm.
  Schedule wavelength{{100.0}};
};

/// Gray rounded rectangle with multiplicative noise moving along a
/// piecewise-linear path of image positions. The noise is smooth on a 6 px
/// lattice and attached to the sprite.
struct Occluder {
  int width = 90;
  int height = 120;
  int corner_radius = 20;
  double gray = 0.5;
  /// Relative intensity noise: value = gray * (1 + noise * u), u in [-1, 1].
  double noise = 0.2;
  std::vector<Vec2> path;
  int first_frame = 1;
};

struct Lighting {
  Schedule gain{{1.0}};
  Schedule bias{{0.0}};
};

struct SceneScript {
  int width = 640;
  int height = 480;
  /// "textured", "sparse" or a PNG path.
  std::string texture = "textured";
  int mesh_rows = 14;
  int mesh_cols = 17;
  double spacing = 16.0;
  double depth = 600.0;
  /// Frames after the template; the sequence holds frames + 1 images.
  int frames = 60;
  Deformation deformation;
  double rotation_deg_per_frame = 0.0;
  std::optional<Occluder> occluder;
  std::optional<Lighting> lighting;
  double background = 0.35;
  std::uint64_t seed = 1;

  void validate() const;
};

SceneScript scene_script_from_json(const std::string& text);
SceneScript read_scene_script(const std::filesystem::path& path);
std::string scene_script_to_json(const SceneScript& script);

/// Named benchmark scenes: "static", "bend", "bend_sparse", "rotate",
/// "occluded", "occluded_sparse".
SceneScript benchmark_script(const std::string& name);

/// fx = fy = 600, principal point at the center of a 640 x 480 frame.
CameraIntrinsics default_camera();

/// Procedural textures in [0, 1]: "textured" is a printed page with text
/// lines and halftone figures, "sparse" is blank paper with a few marks.
Image make_texture(const std::string& kind, int width, int height, std::uint64_t seed);

/// Surface vertices of frame f before any image formation.
Vertices scene_vertices(const SceneScript& script, const Mesh& mesh, int frame);

struct GroundTruthFrame {
  Image image;
  Vertices vertices;
  /// Pixels covered by the occluder.
  Mask occlusion;
};

struct Sequence {
  Image template_image;
  Mesh mesh;
  CameraIntrinsics camera;
  std::vector<GroundTruthFrame> frames;
};

/// Ray-casts the mesh posed at V; each hit pixel samples the texture at the
/// template position of the same surface point. Other pixels get `background`.
Image render_surface(const Image& texture, const Mesh& mesh, const Vertices& V, const CameraIntrinsics& camera,
                     int width, int height, double background);

/// Full image formation of frame f: surface, lighting, occluder, 8-bit quantization.
GroundTruthFrame render_frame(const SceneScript& script, const Image& texture, const Mesh& mesh,
                              const CameraIntrinsics& camera, int frame);

/// Throws InputError naming the first frame whose edge lengths leave the 1% band.
Sequence generate_sequence(const SceneScript& script, const CameraIntrinsics& camera);

/// template.png, frames/%04d.png, mesh.json, camera.json, gt/%04d.json, masks/%04d.png.
void write_sequence(const std::filesystem::path& dir, const Sequence& seq);
Sequence read_sequence(const std::filesystem::path& dir);

/// Sorted frame files of a frames directory.
std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir);
Vertices read_vertices_json(const std::filesystem::path& path);
Vertices vertices_from_json(const std::string& text);

/// Largest relative edge-length deviation from rest.
double max_edge_strain(const Mesh& mesh, const Vertices& V);

}  // namespace surftrack
