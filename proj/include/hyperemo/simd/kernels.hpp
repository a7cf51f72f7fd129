#pragma once

#include <cstddef>
#include <string_view>

// Double-precision vector kernels behind every dense inner loop in the
// library. Each kernel has a portable scalar reference and optional AVX2+FMA
// (x86-64) or NEON (aarch64) variants; one table is picked at first use.
//
// Set HYPEREMO_ISA=scalar in the environment to force the reference path.

namespace hyperemo::simd {

enum class Isa { kScalar, kAvx2, kNeon };

struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*squared_norm)(const double* a, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y *= alpha
  void (*scale)(double alpha, double* y, std::size_t n);
  Isa isa;
};

const KernelTable& scalar_kernels();
// nullptr when the variant was not compiled in or the CPU lacks it.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

const KernelTable& active();
Isa active_isa();
std::string_view isa_name(Isa isa);

// Overrides the dispatch choice. Returns false if the requested ISA is
// unavailable on this machine (the active table is then left unchanged).
bool force_isa(Isa isa);

inline double dot(const double* a, const double* b, std::size_t n) {
  return active().dot(a, b, n);
}
inline double squared_norm(const double* a, std::size_t n) {
  return active().squared_norm(a, n);
}
inline double squared_distance(const double* a, const double* b, std::size_t n) {
  return active().squared_distance(a, b, n);
}
inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  active().axpy(alpha, x, y, n);
}
inline void scale(double alpha, double* y, std::size_t n) {
  active().scale(alpha, y, n);
}

}  // namespace hyperemo::simd
