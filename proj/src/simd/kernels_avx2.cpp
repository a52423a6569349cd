#include <immintrin.h>

#include <cmath>

#include "surftrack/simd/kernels.hpp"

namespace surftrack::simd {
namespace {

void axpy(std::size_t n, double a, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

void multiply(std::size_t n, const double* x, const double* y, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

void add(std::size_t n, const double* x, const double* y, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) out[i] = x[i] + y[i];
}

void accumulate(std::size_t n, const double* x, double* acc) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) acc[i] = acc[i] + x[i];
}

void max_update(std::size_t n, const double* x, double* best) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vx = _mm256_loadu_pd(x + i);
    const __m256d vb = _mm256_loadu_pd(best + i);
    // best = (x > best) ? x : best, matching the scalar select on NaN too.
    const __m256d gt = _mm256_cmp_pd(vx, vb, _CMP_GT_OQ);
    _mm256_storeu_pd(best + i, _mm256_blendv_pd(vb, vx, gt));
  }
  for (; i < n; ++i) best[i] = x[i] > best[i] ? x[i] : best[i];
}

void ncc_from_sums(std::size_t n, double count, const double* st, const double* stt, const double* si,
                   const double* sii, const double* sti, double* out) {
  const double inv = 1.0 / count;
  const __m256d vinv = _mm256_set1_pd(inv);
  const __m256d veps = _mm256_set1_pd(kNccVarianceEpsilon);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d minus_one = _mm256_set1_pd(-1.0);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d t = _mm256_loadu_pd(st + i);
    const __m256d tt = _mm256_loadu_pd(stt + i);
    const __m256d s = _mm256_loadu_pd(si + i);
    const __m256d ss = _mm256_loadu_pd(sii + i);
    const __m256d ts = _mm256_loadu_pd(sti + i);
    const __m256d num = _mm256_sub_pd(ts, _mm256_mul_pd(_mm256_mul_pd(t, s), vinv));
    const __m256d vt = _mm256_sub_pd(tt, _mm256_mul_pd(_mm256_mul_pd(t, t), vinv));
    const __m256d vi = _mm256_sub_pd(ss, _mm256_mul_pd(_mm256_mul_pd(s, s), vinv));
    const __m256d ok_t = _mm256_cmp_pd(vt, _mm256_mul_pd(veps, tt), _CMP_GT_OQ);
    const __m256d ok_i = _mm256_cmp_pd(vi, _mm256_mul_pd(veps, ss), _CMP_GT_OQ);
    const __m256d ok = _mm256_and_pd(ok_t, ok_i);
    // Lanes that fail the variance test may divide by zero; they are masked below.
    __m256d r = _mm256_div_pd(num, _mm256_sqrt_pd(_mm256_mul_pd(vt, vi)));
    r = _mm256_blendv_pd(zero, r, ok);
    r = _mm256_blendv_pd(r, one, _mm256_cmp_pd(r, one, _CMP_GT_OQ));
    r = _mm256_blendv_pd(r, minus_one, _mm256_cmp_pd(r, minus_one, _CMP_LT_OQ));
    _mm256_storeu_pd(out + i, r);
  }
  for (; i < n; ++i) {
    const double num = sti[i] - (st[i] * si[i]) * inv;
    const double vt = stt[i] - (st[i] * st[i]) * inv;
    const double vi = sii[i] - (si[i] * si[i]) * inv;
    const bool ok = vt > kNccVarianceEpsilon * stt[i] && vi > kNccVarianceEpsilon * sii[i];
    double r = ok ? num / std::sqrt(vt * vi) : 0.0;
    r = r > 1.0 ? 1.0 : r;
    r = r < -1.0 ? -1.0 : r;
    out[i] = r;
  }
}

void ncc_accumulate(std::size_t n, const double* st, const double* mi, const double* sti, const double* at,
                    const double* ai, double* acc) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d minus_one = _mm256_set1_pd(-1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d num = _mm256_sub_pd(_mm256_loadu_pd(sti + i), _mm256_mul_pd(_mm256_loadu_pd(st + i), _mm256_loadu_pd(mi + i)));
    __m256d r = _mm256_mul_pd(_mm256_mul_pd(num, _mm256_loadu_pd(at + i)), _mm256_loadu_pd(ai + i));
    r = _mm256_blendv_pd(r, one, _mm256_cmp_pd(r, one, _CMP_GT_OQ));
    r = _mm256_blendv_pd(r, minus_one, _mm256_cmp_pd(r, minus_one, _CMP_LT_OQ));
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), r));
  }
  for (; i < n; ++i) {
    double r = ((sti[i] - st[i] * mi[i]) * at[i]) * ai[i];
    r = r > 1.0 ? 1.0 : r;
    r = r < -1.0 ? -1.0 : r;
    acc[i] = acc[i] + r;
  }
}

constexpr KernelTable kAvx2{"avx2", axpy, multiply, add, accumulate, max_update, ncc_from_sums, ncc_accumulate};

}  // namespace

const KernelTable* avx2_kernels_impl() { return &kAvx2; }

}  // namespace surftrack::simd
