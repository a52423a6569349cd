#pragma once

// Data-parallel inner loops shared by the smoothing, box-filter and
// sliding-NCC code. Every variant performs the same IEEE operations in the
// same order per element (no FMA contraction), so the vector tables are
// bit-identical to the scalar reference. tests/test_simd.cpp holds them to it.

#include <cstddef>
#include <string_view>

namespace surftrack::simd {

struct KernelTable {
  std::string_view name;

  /// y[i] += a * x[i]
  void (*axpy)(std::size_t n, double a, const double* x, double* y);
  /// out[i] = x[i] * y[i]
  void (*multiply)(std::size_t n, const double* x, const double* y, double* out);
  /// out[i] = x[i] + y[i]   (out may alias x or y)
  void (*add)(std::size_t n, const double* x, const double* y, double* out);
  /// acc[i] += x[i]
  void (*accumulate)(std::size_t n, const double* x, double* acc);
  /// best[i] = max(best[i], x[i])
  void (*max_update)(std::size_t n, const double* x, double* best);
  /// Pearson correlation from window sums of `count` samples:
  ///   num = sti - st*si/count, vt = stt - st*st/count, vi = sii - si*si/count
  ///   out = num / sqrt(vt*vi), or 0 when vt <= eps*stt or vi <= eps*sii.
  /// Result clamped to [-1, 1].
  void (*ncc_from_sums)(std::size_t n, double count, const double* st, const double* stt,
                        const double* si, const double* sii, const double* sti, double* out);
  /// acc[i] += clamp((sti[i] - st[i] * mi[i]) * at[i] * ai[i], -1, 1), the same
  /// correlation with the window mean mi = si/count and the inverse root
  /// variances at, ai (0 for flat windows) hoisted out of the offset loop.
  void (*ncc_accumulate)(std::size_t n, const double* st, const double* mi, const double* sti, const double* at,
                         const double* ai, double* acc);
};

/// 1/sqrt(var) when var > kNccVarianceEpsilon * sum_sq, else 0.
double inverse_root_variance(double var, double sum_sq);

/// Relative variance floor used by ncc_from_sums.
inline constexpr double kNccVarianceEpsilon = 1e-9;

const KernelTable& scalar_kernels();

/// nullptr when the AVX2 table was not compiled in.
const KernelTable* avx2_kernels();

bool cpu_supports_avx2();

/// Table used by the library. Picks AVX2 when both compiled and supported,
/// unless the environment variable SURFTRACK_SIMD=scalar is set.
const KernelTable& active_kernels();

/// Override for tests and benchmarks; pass nullptr to restore auto-selection.
void set_active_kernels(const KernelTable* table);

}  // namespace surftrack::simd
