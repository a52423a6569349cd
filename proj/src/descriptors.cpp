#include "surftrack/descriptors.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include "json_format.hpp"
#include "surftrack/image_io.hpp"
#include "surftrack/simd/kernels.hpp"

namespace surftrack {

std::string_view to_string(DescriptorKind kind) {
  switch (kind) {
    case DescriptorKind::Intensity: return "INTENSITY";
    case DescriptorKind::GradientDirection: return "GD";
    case DescriptorKind::Gbdf: return "GBDF";
  }
  return "?";
}

DescriptorKind parse_descriptor_kind(std::string_view name) {
  if (name == "INTENSITY") return DescriptorKind::Intensity;
  if (name == "GD") return DescriptorKind::GradientDirection;
  if (name == "GBDF") return DescriptorKind::Gbdf;
  throw InputError("unknown descriptor '" + std::string(name) + "' (valid: INTENSITY, GD, GBDF)");
}

int channel_count(DescriptorKind kind) { return kind == DescriptorKind::Gbdf ? 4 : 1; }

std::pair<Image, Image> image_gradients(const Image& image) {
  const int w = image.width();
  const int h = image.height();
  if (w < 3 || h < 3) throw InputError("image_gradients needs at least a 3x3 image");
  Image gx(w, h), gy(w, h);
  for (int y = 0; y < h; ++y) {
    const double* r = image.row(y);
    double* o = gx.row(y);
    o[0] = r[1] - r[0];
    for (int x = 1; x + 1 < w; ++x) o[x] = 0.5 * (r[x + 1] - r[x - 1]);
    o[w - 1] = r[w - 1] - r[w - 2];
  }
  for (int y = 0; y < h; ++y) {
    const double* up = image.row(y == 0 ? 0 : y - 1);
    const double* dn = image.row(y == h - 1 ? h - 1 : y + 1);
    const double f = (y == 0 || y == h - 1) ? 1.0 : 0.5;
    double* o = gy.row(y);
    for (int x = 0; x < w; ++x) o[x] = f * (dn[x] - up[x]);
  }
  return {std::move(gx), std::move(gy)};
}

DescriptorField intensity_field(const Image& image) {
  DescriptorField f;
  f.kind = DescriptorKind::Intensity;
  f.channels.push_back(image);
  return f;
}

DescriptorField gbdf(const Image& image) {
  auto [gx, gy] = image_gradients(image);
  const int w = image.width();
  const int h = image.height();
  DescriptorField f;
  f.kind = DescriptorKind::Gbdf;
  f.channels.assign(4, Image(w, h));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double a = gx(x, y);
      const double b = gy(x, y);
      f.channels[0](x, y) = a > 0.0 ? a : 0.0;
      f.channels[1](x, y) = a < 0.0 ? -a : 0.0;
      f.channels[2](x, y) = b > 0.0 ? b : 0.0;
      f.channels[3](x, y) = b < 0.0 ? -b : 0.0;
    }
  }
  return f;
}

DescriptorField gradient_direction(const Image& image) {
  auto [gx, gy] = image_gradients(image);
  const int w = image.width();
  const int h = image.height();
  DescriptorField f;
  f.kind = DescriptorKind::GradientDirection;
  f.channels.assign(1, Image(w, h));
  f.valid = Mask(w, h, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double a = gx(x, y);
      const double b = gy(x, y);
      if (std::hypot(a, b) < 1e-8) {
        f.valid(x, y) = 0;
        continue;
      }
      double t = std::atan2(b, a);
      if (t <= -std::numbers::pi) t = std::numbers::pi;
      f.channels[0](x, y) = t;
    }
  }
  return f;
}

DescriptorField compute_descriptor(DescriptorKind kind, const Image& image) {
  switch (kind) {
    case DescriptorKind::Intensity: return intensity_field(image);
    case DescriptorKind::GradientDirection: return gradient_direction(image);
    case DescriptorKind::Gbdf: return gbdf(image);
  }
  throw InputError("unknown descriptor kind");
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) return {1.0};
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + r)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

namespace {

// Zero-padded separable convolution; the caller normalises.
Image convolve_separable(const Image& in, const std::vector<double>& k) {
  const auto& K = simd::active_kernels();
  const int w = in.width();
  const int h = in.height();
  const int r = static_cast<int>(k.size() / 2);
  Image tmp(w, h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int d = -r; d <= r; ++d) {
      const int x0 = std::max(0, -d);
      const int x1 = std::min(w, w - d);
      if (x1 > x0) K.axpy(static_cast<std::size_t>(x1 - x0), k[static_cast<std::size_t>(d + r)], in.row(y) + x0 + d, tmp.row(y) + x0);
    }
  }
  Image out(w, h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int d = -r; d <= r; ++d) {
      const int yy = y + d;
      if (yy < 0 || yy >= h) continue;
      K.axpy(static_cast<std::size_t>(w), k[static_cast<std::size_t>(d + r)], tmp.row(yy), out.row(y));
    }
  }
  return out;
}

// Sum of the kernel taps that land inside [0, n) around each position.
std::vector<double> border_weights(int n, const std::vector<double>& k) {
  const int r = static_cast<int>(k.size() / 2);
  std::vector<double> s(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i)
    for (int d = -r; d <= r; ++d)
      if (i + d >= 0 && i + d < n) s[static_cast<std::size_t>(i)] += k[static_cast<std::size_t>(d + r)];
  return s;
}

}  // namespace

Image gaussian_smooth(const Image& image, double sigma, const Mask* valid, Mask* out_valid) {
  if (sigma < 0.0) throw InputError("sigma must be >= 0");
  const int w = image.width();
  const int h = image.height();
  const bool masked = valid && !valid->empty() && !all_set(*valid);

  if (!(sigma > 0.0)) {
    if (out_valid) *out_valid = masked ? *valid : Mask(w, h, 1);
    if (!masked) return image;
    Image out = image;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (!(*valid)(x, y)) out(x, y) = 0.0;
    return out;
  }

  const auto k = gaussian_kernel(sigma);
  if (!masked) {
    Image out = convolve_separable(image, k);
    const auto wx = border_weights(w, k);
    const auto wy = border_weights(h, k);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out(x, y) /= wx[static_cast<std::size_t>(x)] * wy[static_cast<std::size_t>(y)];
    if (out_valid) *out_valid = Mask(w, h, 1);
    return out;
  }

  Image fm(w, h, 0.0), m(w, h, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if ((*valid)(x, y)) {
        fm(x, y) = image(x, y);
        m(x, y) = 1.0;
      }
  Image num = convolve_separable(fm, k);
  const Image den = convolve_separable(m, k);
  Mask ov(w, h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (den(x, y) > 1e-12) {
        num(x, y) /= den(x, y);
        ov(x, y) = 1;
      } else {
        num(x, y) = 0.0;
      }
    }
  }
  if (out_valid) *out_valid = std::move(ov);
  return num;
}

std::array<Image, 2> direction_embedding(const DescriptorField& field, double sigma, Mask* out_valid) {
  if (field.kind != DescriptorKind::GradientDirection) throw InputError("direction_embedding needs a GD field");
  const int w = field.width();
  const int h = field.height();
  Image c(w, h, 0.0), s(w, h, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (field.is_valid(x, y)) {
        c(x, y) = std::cos(field.channels[0](x, y));
        s(x, y) = std::sin(field.channels[0](x, y));
      }
  const Mask* vm = field.valid.empty() ? nullptr : &field.valid;
  Mask v1, v2;
  std::array<Image, 2> out{gaussian_smooth(c, sigma, vm, &v1), gaussian_smooth(s, sigma, vm, &v2)};
  if (out_valid) {
    *out_valid = Mask(w, h, 0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        (*out_valid)(x, y) = v1(x, y) && std::hypot(out[0](x, y), out[1](x, y)) > 1e-12 ? 1 : 0;
  }
  return out;
}

DescriptorField smooth(const DescriptorField& field, double sigma) {
  if (sigma < 0.0) throw InputError("sigma must be >= 0");
  DescriptorField out;
  out.kind = field.kind;
  out.sigma = sigma;
  if (field.kind == DescriptorKind::GradientDirection) {
    Mask v;
    const auto cs = direction_embedding(field, sigma, &v);
    Image angle(field.width(), field.height(), 0.0);
    for (int y = 0; y < angle.height(); ++y)
      for (int x = 0; x < angle.width(); ++x)
        if (v(x, y)) {
          double t = std::atan2(cs[1](x, y), cs[0](x, y));
          if (t <= -std::numbers::pi) t = std::numbers::pi;
          angle(x, y) = t;
        }
    out.channels.push_back(std::move(angle));
    out.valid = std::move(v);
    return out;
  }
  const Mask* vm = field.valid.empty() ? nullptr : &field.valid;
  Mask v;
  for (const Image& ch : field.channels) out.channels.push_back(gaussian_smooth(ch, sigma, vm, &v));
  if (vm) out.valid = std::move(v);
  return out;
}

FacetRotationSet facet_rotations(const Mesh& mesh, const Vertices& v_prev, const CameraIntrinsics& camera) {
  FacetRotationSet out;
  out.angles.assign(static_cast<std::size_t>(mesh.face_count()), 0.0);
  for (int f = 0; f < mesh.face_count(); ++f) {
    const Face& face = mesh.faces()[static_cast<std::size_t>(f)];
    const Vec3 r0 = mesh.rest().row(face[0]), r1 = mesh.rest().row(face[1]);
    const Vec3 c0 = v_prev.row(face[0]), c1 = v_prev.row(face[1]);
    if (!(r0.z() > kMinDepth && r1.z() > kMinDepth && c0.z() > kMinDepth && c1.z() > kMinDepth)) {
      out.degenerate.push_back(f);
      continue;
    }
    const Vec2 a = project(camera, r1) - project(camera, r0);
    const Vec2 b = project(camera, c1) - project(camera, c0);
    if (a.norm() < 1e-6 || b.norm() < 1e-6) {
      out.degenerate.push_back(f);
      continue;
    }
    double t = std::atan2(a.x() * b.y() - a.y() * b.x(), a.dot(b));
    if (t <= -std::numbers::pi) t = std::numbers::pi;
    out.angles[static_cast<std::size_t>(f)] = t;
  }
  return out;
}

double mean_anchor_rotation(const PixelAnchorSet& anchors, const FacetRotationSet& rotations) {
  double c = 0.0, s = 0.0;
  for (const auto& a : anchors.entries) {
    const double t = rotations.angles[static_cast<std::size_t>(a.face)];
    c += std::cos(t);
    s += std::sin(t);
  }
  return (c == 0.0 && s == 0.0) ? 0.0 : std::atan2(s, c);
}

DescriptorField rotate_template_descriptors(const DescriptorField& field, const PixelAnchorSet& anchors,
                                            const FacetRotationSet& rotations, std::optional<double> fill_angle) {
  if (field.kind != DescriptorKind::Gbdf || field.channels.size() != 4)
    throw InputError("rotation handling applies to GBDF fields only");
  DescriptorField out = field;
  const int w = field.width();
  const int h = field.height();
  auto rotate_pixel = [&](int x, int y, double theta) {
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    const double gx = field.channels[0](x, y) - field.channels[1](x, y);
    const double gy = field.channels[2](x, y) - field.channels[3](x, y);
    const double rx = c * gx - s * gy;
    const double ry = s * gx + c * gy;
    out.channels[0](x, y) = rx > 0.0 ? rx : 0.0;
    out.channels[1](x, y) = rx < 0.0 ? -rx : 0.0;
    out.channels[2](x, y) = ry > 0.0 ? ry : 0.0;
    out.channels[3](x, y) = ry < 0.0 ? -ry : 0.0;
  };
  Mask anchored(w, h, 0);
  for (const auto& a : anchors.entries) {
    if (!field.channels[0].contains(a.x, a.y)) continue;
    anchored(a.x, a.y) = 1;
    rotate_pixel(a.x, a.y, rotations.angles[static_cast<std::size_t>(a.face)]);
  }
  if (fill_angle) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (!anchored(x, y)) rotate_pixel(x, y, *fill_angle);
  }
  return out;
}

void dump_channel_pgm(const std::filesystem::path& path, const Image& channel) {
  double lo = 0.0, hi = 0.0;
  if (!channel.empty()) {
    const auto [mn, mx] = std::minmax_element(channel.pixels().begin(), channel.pixels().end());
    lo = *mn;
    hi = *mx;
  }
  Image scaled(channel.width(), channel.height(), 0.0);
  if (hi > lo)
    for (std::size_t i = 0; i < channel.size(); ++i) scaled.pixels()[i] = (channel.pixels()[i] - lo) / (hi - lo);
  write_pgm(path, scaled);
  std::ofstream side(path.string() + ".json");
  if (!side) throw InputError("cannot write " + path.string() + ".json");
  side << "{\"min\": " << detail::format_double(lo) << ", \"max\": " << detail::format_double(hi) << "}\n";
}

}  // namespace surftrack
