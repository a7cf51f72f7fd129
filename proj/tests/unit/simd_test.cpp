#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "hyperemo/simd/kernels.hpp"

using namespace hyperemo::simd;

namespace {

std::vector<const KernelTable*> variants() {
  std::vector<const KernelTable*> out{&scalar_kernels()};
  if (const auto* t = avx2_kernels()) out.push_back(t);
  if (const auto* t = neon_kernels()) out.push_back(t);
  return out;
}

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Reassociation tolerance relative to the sum of absolute terms.
double tol(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] * b[i]) + a[i] * a[i] + b[i] * b[i];
  return 1e-14 * (s + 1.0);
}

}  // namespace

TEST_CASE("every compiled kernel variant matches the scalar reference") {
  std::mt19937_64 rng(3);
  const auto& ref = scalar_kernels();
  for (const auto* k : variants()) {
    CAPTURE(isa_name(k->isa));
    for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 9u, 15u, 16u, 17u, 31u, 64u, 100u, 1023u}) {
      CAPTURE(n);
      auto a = random_vec(n, rng);
      auto b = random_vec(n, rng);
      const double t = tol(a, b);
      CHECK(std::abs(k->dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <= t);
      CHECK(std::abs(k->squared_norm(a.data(), n) - ref.squared_norm(a.data(), n)) <= t);
      CHECK(std::abs(k->squared_distance(a.data(), b.data(), n) - ref.squared_distance(a.data(), b.data(), n)) <=
            4 * t);

      auto y1 = b;
      auto y2 = b;
      k->axpy(0.37, a.data(), y1.data(), n);
      ref.axpy(0.37, a.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) <= 1e-15 * (std::abs(y2[i]) + 1.0));

      auto s1 = a;
      auto s2 = a;
      k->scale(-1.25, s1.data(), n);
      ref.scale(-1.25, s2.data(), n);
      CHECK(s1 == s2);
    }
  }
}

TEST_CASE("scalar reference kernels on hand-computed values") {
  const auto& k = scalar_kernels();
  const double a[] = {1, 2, 3};
  const double b[] = {4, -5, 6};
  CHECK(k.dot(a, b, 3) == 12.0);
  CHECK(k.squared_norm(a, 3) == 14.0);
  CHECK(k.squared_distance(a, b, 3) == 9.0 + 49.0 + 9.0);
}

TEST_CASE("forcing the scalar path switches and restores dispatch") {
  const Isa before = active_isa();
  REQUIRE(force_isa(Isa::kScalar));
  CHECK(active_isa() == Isa::kScalar);
  const double a[] = {1.5, -2.0};
  CHECK(dot(a, a, 2) == 6.25);
  if (before != Isa::kScalar) CHECK(force_isa(before));
  CHECK(active_isa() == before);
}

TEST_CASE("forcing an unavailable variant is refused") {
  const Isa before = active_isa();
  if (neon_kernels() == nullptr) {
    CHECK_FALSE(force_isa(Isa::kNeon));
    CHECK(active_isa() == before);
  }
  if (avx2_kernels() == nullptr) {
    CHECK_FALSE(force_isa(Isa::kAvx2));
    CHECK(active_isa() == before);
  }
}
