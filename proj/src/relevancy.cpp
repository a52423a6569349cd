#include "surftrack/relevancy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "json_format.hpp"
#include "surftrack/descriptors.hpp"
#include "surftrack/image_io.hpp"
#include "surftrack/simd/kernels.hpp"

namespace surftrack {

void RelevancyOptions::validate() const {
  if (patch_size < 2) throw InputError("relevancy patch_size must be >= 2");
  if (delta_range < 0) throw InputError("relevancy delta_range must be >= 0");
  if (stride < 1) throw InputError("relevancy stride must be >= 1");
  if (!(min_valid_fraction > 0.0 && min_valid_fraction <= 1.0))
    throw InputError("relevancy min_valid_fraction must be in (0, 1]");
}

namespace {

constexpr double kNoScore = -std::numeric_limits<double>::infinity();

// Flat k-wide box sums built from power-of-two partial sums:
//   out[i] = sum_{t<k} in[i + t*step]   for i < n - (k-1)*step.
// Entries past a row end mix rows and are never read by callers.
class BoxSummer {
 public:
  void run(const double* in, std::size_t n, int k, std::size_t step, double* out) {
    const auto& K = simd::active_kernels();
    const std::size_t span = static_cast<std::size_t>(k - 1) * step;
    if (n <= span) return;
    const std::size_t len = n - span;
    a_.resize(n);
    b_.resize(n);
    const double* cur = in;
    double* nxt = a_.data();
    bool have = false;
    std::size_t off = 0;
    for (std::size_t m = 1; m <= static_cast<std::size_t>(k); m *= 2) {
      if (static_cast<std::size_t>(k) & m) {
        if (have) K.add(len, out, cur + off * step, out);
        else std::memcpy(out, cur + off * step, len * sizeof(double));
        have = true;
        off += m;
      }
      if (2 * m <= static_cast<std::size_t>(k)) {
        const std::size_t n2 = n - (2 * m - 1) * step;
        K.add(n2, cur, cur + m * step, nxt);
        cur = nxt;
        nxt = (nxt == a_.data()) ? b_.data() : a_.data();
      }
    }
  }

  // 2D k x k box sums of a W x H buffer; out(x, y) valid for x <= W-k,
  // y <= H-k, row stride W. Vertical running sums, then the horizontal tree.
  void run2d(const double* in, int W, int H, int k, double* out) {
    const auto& K = simd::active_kernels();
    const std::size_t w = static_cast<std::size_t>(W);
    const int rows = H - k + 1;
    if (rows <= 0) return;
    v_.resize(static_cast<std::size_t>(rows) * w);
    double* v = v_.data();
    std::memcpy(v, in, w * sizeof(double));
    for (int t = 1; t < k; ++t) K.accumulate(w, in + static_cast<std::size_t>(t) * w, v);
    for (int y = 1; y < rows; ++y) {
      double* cur = v + static_cast<std::size_t>(y) * w;
      K.add(w, cur - w, in + static_cast<std::size_t>(y + k - 1) * w, cur);
      K.axpy(w, -1.0, in + static_cast<std::size_t>(y - 1) * w, cur);
    }
    run(v, static_cast<std::size_t>(rows) * w, k, 1, out);
  }

 private:
  std::vector<double> a_, b_, v_;
};

struct Region {
  int x0 = 0, y0 = 0, w = 0, h = 0;
};

}  // namespace

RawScores sliding_relevancy(std::span<const Image> template_channels, std::span<const Image> backwarped_channels,
                            const Mask& backwarped_valid, const RelevancyOptions& options, const Mask* targets) {
  options.validate();
  if (template_channels.empty() || template_channels.size() != backwarped_channels.size())
    throw InputError("sliding_relevancy: channel counts differ");
  const int w = template_channels.front().width();
  const int h = template_channels.front().height();
  for (std::size_t c = 0; c < template_channels.size(); ++c) {
    if (template_channels[c].width() != w || template_channels[c].height() != h ||
        backwarped_channels[c].width() != w || backwarped_channels[c].height() != h)
      throw InputError("sliding_relevancy: template and back-warped sizes differ");
  }
  if (backwarped_valid.width() != w || backwarped_valid.height() != h)
    throw InputError("sliding_relevancy: validity mask size differs");

  const auto& K = simd::active_kernels();
  const auto& S = simd::scalar_kernels();
  const int k = options.patch_size;
  const int c = options.center_offset();
  const int D = options.delta_range;
  const int C = static_cast<int>(template_channels.size());
  const double kk = static_cast<double>(k) * k;
  const int min_valid = static_cast<int>(std::ceil(options.min_valid_fraction * kk));

  RawScores out{Image(w, h, 0.0), Mask(w, h, 0), 0};
  if (w < k || h < k) return out;

  // Window top-left corners u = x - c of every scored pixel.
  Rect U{w, h, 0, 0};
  for (int y = c; y <= h - k + c; ++y)
    for (int x = c; x <= w - k + c; ++x)
      if (!targets || (*targets)(x, y)) {
        U.x0 = std::min(U.x0, x - c);
        U.y0 = std::min(U.y0, y - c);
        U.x1 = std::max(U.x1, x - c + 1);
        U.y1 = std::max(U.y1, y - c + 1);
      }
  if (U.empty()) return out;
  const int Uw = U.width();
  const int Uh = U.height();
  const std::size_t un = static_cast<std::size_t>(Uw) * Uh;

  // Template pixels covered by the windows.
  const Region Y{U.x0, U.y0, Uw + k - 1, Uh + k - 1};
  const std::size_t yn = static_cast<std::size_t>(Y.w) * Y.h;
  // Back-warped pixels reachable under every offset.
  Region Yp;
  Yp.x0 = std::max(0, Y.x0 - D);
  Yp.y0 = std::max(0, Y.y0 - D);
  Yp.w = std::min(w, Y.x0 + Y.w + D) - Yp.x0;
  Yp.h = std::min(h, Y.y0 + Y.h + D) - Yp.y0;
  const std::size_t ypn = static_cast<std::size_t>(Yp.w) * Yp.h;
  const int Gw = Yp.w - k + 1;
  const int Gh = Yp.h - k + 1;

  BoxSummer box;
  std::vector<double> buf(std::max(yn, ypn)), sums(std::max(yn, ypn));

  // Per-channel template window sums, compacted to U.
  std::vector<std::vector<double>> St(C), Stt(C);
  for (int ch = 0; ch < C; ++ch) {
    const Image& T = template_channels[static_cast<std::size_t>(ch)];
    for (int pass = 0; pass < 2; ++pass) {
      for (int j = 0; j < Y.h; ++j) {
        const double* src = T.row(Y.y0 + j) + Y.x0;
        double* dst = buf.data() + static_cast<std::size_t>(j) * Y.w;
        if (pass == 0) std::memcpy(dst, src, static_cast<std::size_t>(Y.w) * sizeof(double));
        else K.multiply(static_cast<std::size_t>(Y.w), src, src, dst);
      }
      box.run2d(buf.data(), Y.w, Y.h, k, sums.data());
      auto& dst = pass == 0 ? St[static_cast<std::size_t>(ch)] : Stt[static_cast<std::size_t>(ch)];
      dst.resize(un);
      for (int j = 0; j < Uh; ++j)
        std::memcpy(dst.data() + static_cast<std::size_t>(j) * Uw, sums.data() + static_cast<std::size_t>(j) * Y.w,
                    static_cast<std::size_t>(Uw) * sizeof(double));
    }
  }

  std::vector<std::vector<double>> At(C);
  for (int ch = 0; ch < C; ++ch) {
    auto& a = At[static_cast<std::size_t>(ch)];
    a.resize(un);
    const auto& st = St[static_cast<std::size_t>(ch)];
    const auto& stt = Stt[static_cast<std::size_t>(ch)];
    for (std::size_t i = 0; i < un; ++i) a[i] = simd::inverse_root_variance(stt[i] - (st[i] * st[i]) / kk, stt[i]);
  }

  // Zero-filled back-warped channels over Yp and their window sums over G.
  const std::size_t gn = static_cast<std::size_t>(std::max(Gw, 0)) * std::max(Gh, 0);
  std::vector<std::vector<double>> Iz(C), Mi(C), Ai(C);
  for (int ch = 0; ch < C; ++ch) {
    const Image& I = backwarped_channels[static_cast<std::size_t>(ch)];
    auto& z = Iz[static_cast<std::size_t>(ch)];
    z.assign(ypn, 0.0);
    for (int j = 0; j < Yp.h; ++j)
      for (int i = 0; i < Yp.w; ++i)
        if (backwarped_valid(Yp.x0 + i, Yp.y0 + j)) z[static_cast<std::size_t>(j) * Yp.w + i] = I(Yp.x0 + i, Yp.y0 + j);
    if (gn == 0) continue;
    std::vector<double> si(gn), sii(gn);
    for (int pass = 0; pass < 2; ++pass) {
      if (pass == 0) std::memcpy(buf.data(), z.data(), ypn * sizeof(double));
      else K.multiply(ypn, z.data(), z.data(), buf.data());
      box.run2d(buf.data(), Yp.w, Yp.h, k, sums.data());
      auto& dst = pass == 0 ? si : sii;
      for (int j = 0; j < Gh; ++j)
        std::memcpy(dst.data() + static_cast<std::size_t>(j) * Gw, sums.data() + static_cast<std::size_t>(j) * Yp.w,
                    static_cast<std::size_t>(Gw) * sizeof(double));
    }
    auto& m = Mi[static_cast<std::size_t>(ch)];
    auto& a = Ai[static_cast<std::size_t>(ch)];
    m.resize(gn);
    a.resize(gn);
    for (std::size_t i = 0; i < gn; ++i) {
      m[i] = si[i] / kk;
      a[i] = simd::inverse_root_variance(sii[i] - (si[i] * si[i]) / kk, sii[i]);
    }
  }

  // Window status over G: 2 fully valid, 1 partially valid but usable, 0 skipped.
  std::vector<std::uint8_t> status(gn, 0);
  std::vector<int> bad_prefix((static_cast<std::size_t>(std::max(Gw, 0)) + 1) * (std::max(Gh, 0) + 1), 0);
  if (gn > 0) {
    for (int j = 0; j < Yp.h; ++j)
      for (int i = 0; i < Yp.w; ++i) buf[static_cast<std::size_t>(j) * Yp.w + i] = backwarped_valid(Yp.x0 + i, Yp.y0 + j) ? 1.0 : 0.0;
    box.run2d(buf.data(), Yp.w, Yp.h, k, sums.data());
    for (int j = 0; j < Gh; ++j) {
      for (int i = 0; i < Gw; ++i) {
        const int count = static_cast<int>(std::lround(sums[static_cast<std::size_t>(j) * Yp.w + i]));
        std::uint8_t s = 0;
        if (count == k * k) s = 2;
        else if (count >= min_valid) s = 1;
        status[static_cast<std::size_t>(j) * Gw + i] = s;
        bad_prefix[static_cast<std::size_t>(j + 1) * (Gw + 1) + (i + 1)] =
            (s != 2 ? 1 : 0) + bad_prefix[static_cast<std::size_t>(j) * (Gw + 1) + (i + 1)] +
            bad_prefix[static_cast<std::size_t>(j + 1) * (Gw + 1) + i] - bad_prefix[static_cast<std::size_t>(j) * (Gw + 1) + i];
      }
    }
  }

  std::vector<double> best(un, kNoScore);
  const double inv_c = 1.0 / C;

  auto direct_score = [&](int ux, int uy, int gx, int gy) {
    double total = 0.0;
    for (int ch = 0; ch < C; ++ch) {
      const Image& T = template_channels[static_cast<std::size_t>(ch)];
      const auto& z = Iz[static_cast<std::size_t>(ch)];
      double st = 0, stt = 0, si = 0, sii = 0, sti = 0;
      int n = 0;
      for (int oy = 0; oy < k; ++oy) {
        for (int ox = 0; ox < k; ++ox) {
          if (!backwarped_valid(Yp.x0 + gx + ox, Yp.y0 + gy + oy)) continue;
          const double t = T(ux + ox, uy + oy);
          const double v = z[static_cast<std::size_t>(gy + oy) * Yp.w + gx + ox];
          st += t;
          stt += t * t;
          si += v;
          sii += v * v;
          sti += t * v;
          ++n;
        }
      }
      double r = 0.0;
      S.ncc_from_sums(1, n, &st, &stt, &si, &sii, &sti, &r);
      total += r;
    }
    return total * inv_c;
  };

  std::vector<int> offsets;
  for (int d = -D; d <= D; d += options.stride) offsets.push_back(d);

  // Per-channel streaming state: a ring of product rows, the running
  // vertical window sum and its horizontal box sum.
  const std::size_t yw = static_cast<std::size_t>(Y.w);
  const int ring = k + 1;
  std::vector<std::vector<double>> prod(C, std::vector<double>(static_cast<std::size_t>(ring) * yw));
  std::vector<std::vector<double>> vsum(C, std::vector<double>(yw));
  std::vector<double> hrow(yw), sum_row(static_cast<std::size_t>(Uw)), avg_row(static_cast<std::size_t>(Uw));

  for (int dy : offsets) {
    for (int dx : offsets) {
      // G coordinates of the window matched to u = U.x0, U.y0.
      const int gx0 = U.x0 + dx - Yp.x0;
      const int gy0 = U.y0 + dy - Yp.y0;
      const int ia = std::clamp(-gx0, 0, Uw);
      const int ib = std::clamp(Gw - gx0, ia, Uw);
      const int ja = std::clamp(-gy0, 0, Uh);
      const int jb = std::clamp(Gh - gy0, ja, Uh);
      if (ia >= ib || ja >= jb) continue;
      const std::size_t n = static_cast<std::size_t>(ib - ia);
      const bool clean = bad_prefix[static_cast<std::size_t>(gy0 + jb) * (Gw + 1) + gx0 + ib] -
                             bad_prefix[static_cast<std::size_t>(gy0 + ja) * (Gw + 1) + gx0 + ib] -
                             bad_prefix[static_cast<std::size_t>(gy0 + jb) * (Gw + 1) + gx0 + ia] +
                             bad_prefix[static_cast<std::size_t>(gy0 + ja) * (Gw + 1) + gx0 + ia] ==
                         0;
      const int zx0 = Y.x0 + dx - Yp.x0;
      const int za = std::clamp(-zx0, 0, Y.w);
      const int zb = std::clamp(Yp.w - zx0, za, Y.w);

      // Product row T(y) * I(y + delta) for template row j of Y.
      auto product_row = [&](int ch, int j) {
        double* dst = prod[static_cast<std::size_t>(ch)].data() + static_cast<std::size_t>(j % ring) * yw;
        std::fill(dst, dst + yw, 0.0);
        const int zy = Y.y0 + j + dy - Yp.y0;
        if (zy < 0 || zy >= Yp.h || za >= zb) return dst;
        K.multiply(static_cast<std::size_t>(zb - za), template_channels[static_cast<std::size_t>(ch)].row(Y.y0 + j) + Y.x0 + za,
                   Iz[static_cast<std::size_t>(ch)].data() + static_cast<std::size_t>(zy) * Yp.w + zx0 + za, dst + za);
        return dst;
      };

      for (int j = ja; j < jb; ++j) {
        std::fill(sum_row.begin(), sum_row.end(), 0.0);
        const std::size_t urow = static_cast<std::size_t>(j) * Uw;
        const std::size_t grow = static_cast<std::size_t>(gy0 + j) * Gw + gx0;
        for (int ch = 0; ch < C; ++ch) {
          double* v = vsum[static_cast<std::size_t>(ch)].data();
          if (j == ja) {
            std::memcpy(v, product_row(ch, j), yw * sizeof(double));
            for (int t = 1; t < k; ++t) K.accumulate(yw, product_row(ch, j + t), v);
          } else {
            K.accumulate(yw, product_row(ch, j + k - 1), v);
            K.axpy(yw, -1.0, prod[static_cast<std::size_t>(ch)].data() + static_cast<std::size_t>((j - 1) % ring) * yw, v);
          }
          box.run(v, yw, k, 1, hrow.data());
          K.ncc_accumulate(n, St[static_cast<std::size_t>(ch)].data() + urow + ia, Mi[static_cast<std::size_t>(ch)].data() + grow + ia,
                           hrow.data() + ia, At[static_cast<std::size_t>(ch)].data() + urow + ia,
                           Ai[static_cast<std::size_t>(ch)].data() + grow + ia, sum_row.data() + ia);
        }
        double* a = sum_row.data();
        if (C > 1) {
          std::fill(avg_row.begin() + ia, avg_row.begin() + ib, 0.0);
          K.axpy(n, inv_c, sum_row.data() + ia, avg_row.data() + ia);
          a = avg_row.data();
        }
        if (!clean) {
          for (int i = ia; i < ib; ++i) {
            const std::uint8_t s = status[grow + static_cast<std::size_t>(i)];
            if (s == 0) a[i] = kNoScore;
            else if (s == 1) a[i] = direct_score(U.x0 + i, U.y0 + j, gx0 + i, gy0 + j);
          }
        }
        K.max_update(n, a + ia, best.data() + urow + ia);
      }
    }
  }
  for (int j = 0; j < Uh; ++j) {
    for (int i = 0; i < Uw; ++i) {
      const int x = U.x0 + i + c;
      const int y = U.y0 + j + c;
      if (targets && !(*targets)(x, y)) continue;
      const std::size_t ui = static_cast<std::size_t>(j) * Uw + i;
      bool flat = true;
      for (int ch = 0; ch < C && flat; ++ch) flat = At[static_cast<std::size_t>(ch)][ui] == 0.0;
      if (flat) ++out.textureless;
      if (best[ui] == kNoScore) continue;
      out.score(x, y) = best[ui];
      out.valid(x, y) = 1;
    }
  }
  return out;
}

RawScores combine_channels(const RawScores& intensity, const RawScores& gbdf_scores) {
  const int w = intensity.score.width();
  const int h = intensity.score.height();
  if (gbdf_scores.score.width() != w || gbdf_scores.score.height() != h)
    throw InputError("combine_channels: score maps differ in size");
  RawScores out{Image(w, h, 0.0), Mask(w, h, 0), std::min(intensity.textureless, gbdf_scores.textureless)};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (intensity.valid(x, y) && gbdf_scores.valid(x, y)) {
        out.score(x, y) = 0.5 * (intensity.score(x, y) + gbdf_scores.score(x, y));
        out.valid(x, y) = 1;
      }
  return out;
}

RelevancyMap normalize_scores(const RawScores& raw) {
  const int w = raw.score.width();
  const int h = raw.score.height();
  RelevancyMap m{raw.score, Image(w, h, 0.0), raw.valid, 0.0, 0.0, false};
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < raw.score.size(); ++i)
    if (raw.valid.pixels()[i]) {
      sum += raw.score.pixels()[i];
      ++n;
    }
  if (n < 2) throw InputError("normalize_scores needs at least two valid pixels");
  m.mu = sum / static_cast<double>(n);
  double var = 0.0;
  for (std::size_t i = 0; i < raw.score.size(); ++i)
    if (raw.valid.pixels()[i]) {
      const double d = raw.score.pixels()[i] - m.mu;
      var += d * d;
    }
  m.sigma = std::sqrt(var / static_cast<double>(n));

  const double lo_clamp = m.mu - 3.0 * m.sigma;
  const double hi_clamp = m.mu + 3.0 * m.sigma;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < raw.score.size(); ++i)
    if (raw.valid.pixels()[i]) {
      const double v = std::clamp(raw.score.pixels()[i], lo_clamp, hi_clamp);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  m.uniform = !(m.sigma > 0.0) || !(hi > lo);
  for (std::size_t i = 0; i < raw.score.size(); ++i) {
    if (!raw.valid.pixels()[i]) continue;
    const double v = std::clamp(raw.score.pixels()[i], lo_clamp, hi_clamp);
    m.normalized.pixels()[i] = m.uniform ? 1.0 : std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
  }
  return m;
}

namespace {

Mask erode_cross(const Mask& m) {
  const int w = m.width();
  const int h = m.height();
  Mask out(w, h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      out(x, y) = m(x, y) && (x == 0 || m(x - 1, y)) && (x == w - 1 || m(x + 1, y)) && (y == 0 || m(x, y - 1)) &&
                          (y == h - 1 || m(x, y + 1))
                      ? 1
                      : 0;
  return out;
}

}  // namespace

RelevancyMap compute_relevancy(const Image& template_image, const Image& frame, const Mesh& mesh,
                               const Vertices& v_prev, const CameraIntrinsics& camera, const PixelAnchorSet& anchors,
                               const RelevancyOptions& options) {
  options.validate();
  std::vector<Vec2> src, dst;
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    const Vec3 r = mesh.rest().row(v);
    const Vec3 p = v_prev.row(v);
    if (!(r.z() > kMinDepth && p.z() > kMinDepth)) continue;
    src.push_back(project(camera, r));
    dst.push_back(project(camera, p));
  }
  const TpsWarp tps = fit_tps(src, dst, options.tps_regularization);
  const int w = template_image.width();
  const int h = template_image.height();
  const Rect region = anchors.bounds().inflate(options.patch_size + options.delta_range);
  const UnwarpedImage back = unwarp_image(frame, tps, w, h, region);
  const Mask targets = anchors.mask();

  const RawScores raw_i = sliding_relevancy(std::span<const Image>(&template_image, 1),
                                            std::span<const Image>(&back.image, 1), back.valid, options, &targets);
  const DescriptorField tg = gbdf(template_image);
  const DescriptorField bg = gbdf(back.image);
  const RawScores raw_g = sliding_relevancy(tg.channels, bg.channels, erode_cross(back.valid), options, &targets);
  return normalize_scores(combine_channels(raw_i, raw_g));
}

void write_relevancy(const std::filesystem::path& path, const RelevancyMap& map) {
  write_pgm(path, map.normalized);
  std::ofstream side(path.string() + ".json");
  if (!side) throw InputError("cannot write " + path.string() + ".json");
  side << "{\"mu\": " << detail::format_double(map.mu) << ", \"sigma\": " << detail::format_double(map.sigma) << "}\n";
}

}  // namespace surftrack
