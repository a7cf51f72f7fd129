#include <atomic>
#include <cstdlib>
#include <string_view>

#include "hyperemo/simd/kernels.hpp"

namespace hyperemo::simd {

#if defined(HYPEREMO_HAVE_AVX2)
const KernelTable& avx2_kernel_table();
#endif
#if defined(HYPEREMO_HAVE_NEON)
const KernelTable& neon_kernel_table();
#endif

const KernelTable* avx2_kernels() {
#if defined(HYPEREMO_HAVE_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &avx2_kernel_table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* neon_kernels() {
#if defined(HYPEREMO_HAVE_NEON)
  // NEON is mandatory on aarch64.
  return &neon_kernel_table();
#else
  return nullptr;
#endif
}

namespace {

const KernelTable* pick_default() {
  if (const char* env = std::getenv("HYPEREMO_ISA")) {
    const std::string_view want{env};
    if (want == "scalar") return &scalar_kernels();
    if (want == "avx2" && avx2_kernels() != nullptr) return avx2_kernels();
    if (want == "neon" && neon_kernels() != nullptr) return neon_kernels();
  }
  if (const auto* t = avx2_kernels()) return t;
  if (const auto* t = neon_kernels()) return t;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> s{pick_default()};
  return s;
}

}  // namespace

const KernelTable& active() { return *slot().load(std::memory_order_relaxed); }

Isa active_isa() { return active().isa; }

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
    case Isa::kNeon: return "neon";
  }
  return "unknown";
}

bool force_isa(Isa isa) {
  const KernelTable* t = nullptr;
  switch (isa) {
    case Isa::kScalar: t = &scalar_kernels(); break;
    case Isa::kAvx2: t = avx2_kernels(); break;
    case Isa::kNeon: t = neon_kernels(); break;
  }
  if (t == nullptr) return false;
  slot().store(t, std::memory_order_relaxed);
  return true;
}

}  // namespace hyperemo::simd
