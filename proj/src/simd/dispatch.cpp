#include <cstdlib>
#include <string_view>

#include "atfm/simd/kernels.hpp"

namespace atfm::simd {

#if defined(ATFM_HAVE_AVX2_KERNELS)
const KernelTable& avx2_kernels();
#endif
#if defined(ATFM_HAVE_NEON_KERNELS)
const KernelTable& neon_kernels();
#endif

const KernelTable* avx2_table() {
#if defined(ATFM_HAVE_AVX2_KERNELS)
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? &avx2_kernels() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* neon_table() {
#if defined(ATFM_HAVE_NEON_KERNELS)
  return &neon_kernels();  // baseline on aarch64
#else
  return nullptr;
#endif
}

namespace {

const KernelTable& select() {
  if (const char* forced = std::getenv("ATFM_SIMD"); forced && std::string_view(forced) == "scalar")
    return scalar_table();
  if (const auto* t = avx2_table()) return *t;
  if (const auto* t = neon_table()) return *t;
  return scalar_table();
}

}  // namespace

const KernelTable& active() {
  static const KernelTable& table = select();
  return table;
}

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "unknown";
}

}  // namespace atfm::simd
