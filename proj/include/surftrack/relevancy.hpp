#pragma once

#include <span>
#include <vector>

#include "surftrack/camera.hpp"
#include "surftrack/image.hpp"
#include "surftrack/mesh.hpp"
#include "surftrack/tps.hpp"

namespace surftrack {

struct RelevancyOptions {
  int patch_size = 26;
  /// delta_x, delta_y range over [-delta_range, delta_range].
  int delta_range = 30;
  int stride = 2;
  /// Back-warped patches with a smaller share of valid pixels are skipped.
  double min_valid_fraction = 0.5;
  double tps_regularization = kDefaultTpsRegularization;

  void validate() const;
  /// Offset of the scored pixel from the patch's top-left corner.
  int center_offset() const { return patch_size / 2; }
};

struct RawScores {
  Image score;
  Mask valid;
  /// Scored pixels whose template patch has zero variance in every channel.
  int textureless = 0;
};

/// max over delta of the windowed NCC between the template patch at x and
/// the back-warped patch at x + delta. With several channels the per-delta
/// NCC is the mean of the channel NCCs. Only pixels set in `targets` (all
/// when null) whose patch fits in the template are scored.
RawScores sliding_relevancy(std::span<const Image> template_channels, std::span<const Image> backwarped_channels,
                            const Mask& backwarped_valid, const RelevancyOptions& options,
                            const Mask* targets = nullptr);

/// Per-pixel mean; valid where both are.
RawScores combine_channels(const RawScores& intensity, const RawScores& gbdf_scores);

struct RelevancyMap {
  Image raw;
  Image normalized;
  Mask valid;
  double mu = 0.0;
  double sigma = 0.0;
  /// sigma was zero and every valid pixel got weight 1.
  bool uniform = false;
};

/// Clamps valid scores to mu +- 3 sigma (population sigma) and maps the
/// clamped range linearly onto [0, 1]. Invalid pixels get 0.
RelevancyMap normalize_scores(const RawScores& raw);

/// Full per-frame pipeline: TPS from the template projections of the rest
/// vertices to the projections of v_prev, back-warp, intensity and GBDF
/// sliding NCC over the anchored pixels, averaging and normalisation.
RelevancyMap compute_relevancy(const Image& template_image, const Image& frame, const Mesh& mesh,
                               const Vertices& v_prev, const CameraIntrinsics& camera, const PixelAnchorSet& anchors,
                               const RelevancyOptions& options = {});

/// Writes the normalised map as 8-bit PGM plus `<path>.json` {"mu":..,"sigma":..}.
void write_relevancy(const std::filesystem::path& path, const RelevancyMap& map);

}  // namespace surftrack
