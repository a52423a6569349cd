#include <algorithm>
#include <cmath>

#include "surftrack/simd/kernels.hpp"

namespace surftrack::simd {
namespace {

void axpy(std::size_t n, double a, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + a * x[i];
}

void multiply(std::size_t n, const double* x, const double* y, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

void add(std::size_t n, const double* x, const double* y, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
}

void accumulate(std::size_t n, const double* x, double* acc) {
  for (std::size_t i = 0; i < n; ++i) acc[i] = acc[i] + x[i];
}

void max_update(std::size_t n, const double* x, double* best) {
  for (std::size_t i = 0; i < n; ++i) best[i] = x[i] > best[i] ? x[i] : best[i];
}

void ncc_from_sums(std::size_t n, double count, const double* st, const double* stt, const double* si,
                   const double* sii, const double* sti, double* out) {
  const double inv = 1.0 / count;
  for (std::size_t i = 0; i < n; ++i) {
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
  for (std::size_t i = 0; i < n; ++i) {
    double r = ((sti[i] - st[i] * mi[i]) * at[i]) * ai[i];
    r = r > 1.0 ? 1.0 : r;
    r = r < -1.0 ? -1.0 : r;
    acc[i] = acc[i] + r;
  }
}

constexpr KernelTable kScalar{"scalar", axpy, multiply, add, accumulate, max_update, ncc_from_sums, ncc_accumulate};

}  // namespace

const KernelTable& scalar_kernels() { return kScalar; }

double inverse_root_variance(double var, double sum_sq) {
  return var > kNccVarianceEpsilon * sum_sq ? 1.0 / std::sqrt(var) : 0.0;
}

}  // namespace surftrack::simd
