#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "surftrack/camera.hpp"
#include "surftrack/image.hpp"
#include "surftrack/mesh.hpp"

namespace surftrack {

enum class DescriptorKind { Intensity, GradientDirection, Gbdf };

std::string_view to_string(DescriptorKind kind);
/// Accepts "INTENSITY", "GD", "GBDF". Throws InputError otherwise.
DescriptorKind parse_descriptor_kind(std::string_view name);
int channel_count(DescriptorKind kind);

/// Multi-channel per-pixel feature image.
struct DescriptorField {
  DescriptorKind kind = DescriptorKind::Intensity;
  std::vector<Image> channels;
  double sigma = 0.0;
  /// Empty when every pixel is valid.
  Mask valid;

  int width() const { return channels.empty() ? 0 : channels.front().width(); }
  int height() const { return channels.empty() ? 0 : channels.front().height(); }
  bool is_valid(int x, int y) const { return valid.empty() || valid(x, y) != 0; }
};

/// Central differences inside, one-sided differences on the border.
std::pair<Image, Image> image_gradients(const Image& image);

DescriptorField intensity_field(const Image& image);
/// [dx+, dx-, dy+, dy-]
DescriptorField gbdf(const Image& image);
/// atan2(I_y, I_x); pixels with |grad I| < 1e-8 are invalid.
DescriptorField gradient_direction(const Image& image);
DescriptorField compute_descriptor(DescriptorKind kind, const Image& image);

/// Convolution with the Gaussian of standard deviation sigma truncated at
/// +-ceil(3 sigma) and renormalised. Near borders and invalid pixels the
/// result is the normalised convolution conv(f m) / conv(m); pixels whose
/// window holds no valid sample become invalid in `out_valid`.
Image gaussian_smooth(const Image& image, double sigma, const Mask* valid = nullptr, Mask* out_valid = nullptr);

std::vector<double> gaussian_kernel(double sigma);

/// Channel-wise smoothing. Gradient-direction fields are smoothed through
/// their (cos, sin) embedding and mapped back to an angle.
DescriptorField smooth(const DescriptorField& field, double sigma);

/// Smoothed unit (cos, sin) planes of a gradient-direction field; used where
/// the angle must be interpolated.
std::array<Image, 2> direction_embedding(const DescriptorField& field, double sigma, Mask* out_valid = nullptr);

struct FacetRotationSet {
  std::vector<double> angles;
  /// Faces whose reference edge projects to < 1e-6 px or is behind the camera.
  std::vector<int> degenerate;
};

/// Per face, the signed image-plane angle from the first face edge (v0 -> v1)
/// projected at rest to the same edge projected under v_prev.
FacetRotationSet facet_rotations(const Mesh& mesh, const Vertices& v_prev, const CameraIntrinsics& camera);

/// Circular mean of the rotation angles of anchored faces.
double mean_anchor_rotation(const PixelAnchorSet& anchors, const FacetRotationSet& rotations);

/// Rotates each anchored pixel's gradient (ch0 - ch1, ch2 - ch3) by its face
/// angle and splits it again. Pixels without an anchor are rotated by
/// `fill_angle` when given and copied otherwise.
DescriptorField rotate_template_descriptors(const DescriptorField& field, const PixelAnchorSet& anchors,
                                            const FacetRotationSet& rotations,
                                            std::optional<double> fill_angle = std::nullopt);

/// Writes one channel as min-max normalised 8-bit PGM plus `<path>.json`
/// holding {"min": .., "max": ..}.
void dump_channel_pgm(const std::filesystem::path& path, const Image& channel);

}  // namespace surftrack
