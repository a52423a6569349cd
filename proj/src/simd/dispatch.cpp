#include <atomic>
#include <cstdlib>
#include <string_view>

#include "surftrack/simd/kernels.hpp"

namespace surftrack::simd {

#if defined(SURFTRACK_BUILD_AVX2)
const KernelTable* avx2_kernels_impl();
#endif

namespace {

std::atomic<const KernelTable*> g_override{nullptr};

const KernelTable& select_default() {
  if (const char* env = std::getenv("SURFTRACK_SIMD"); env && std::string_view(env) == "scalar")
    return scalar_kernels();
  if (const KernelTable* v = avx2_kernels(); v && cpu_supports_avx2()) return *v;
  return scalar_kernels();
}

}  // namespace

bool cpu_supports_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const KernelTable* avx2_kernels() {
#if defined(SURFTRACK_BUILD_AVX2)
  return avx2_kernels_impl();
#else
  return nullptr;
#endif
}

const KernelTable& active_kernels() {
  if (const KernelTable* o = g_override.load(std::memory_order_acquire)) return *o;
  static const KernelTable& chosen = select_default();
  return chosen;
}

void set_active_kernels(const KernelTable* table) { g_override.store(table, std::memory_order_release); }

}  // namespace surftrack::simd
