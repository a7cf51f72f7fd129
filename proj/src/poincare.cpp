#include "hyperemo/poincare.hpp"

#include <cmath>

#include "hyperemo/errors.hpp"
#include "hyperemo/simd/kernels.hpp"

namespace hyperemo::poincare {
namespace {

constexpr double kSeriesCutoff = 1e-3;
// Rounding slack accepted on the projected norm.
constexpr double kNormSlack = 1e-12;

void require_finite(std::span<const double> x, const char* what) {
  for (double v : x) {
    if (!std::isfinite(v)) throw InvalidInput(std::string(what) + ": non-finite coordinate");
  }
}

void require_same_dim(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw DimensionMismatch(what, a, b);
}

}  // namespace

TangentVector::TangentVector(std::vector<double> coords) : coords_(std::move(coords)) {
  require_finite(coords_, "tangent vector");
}

double TangentVector::norm() const { return std::sqrt(simd::squared_norm(coords_.data(), coords_.size())); }

PoincarePoint::PoincarePoint(std::vector<double> coords) : coords_(std::move(coords)) {
  require_finite(coords_, "poincare point");
  const double n = norm();
  if (n > kMaxNorm * (1.0 + kNormSlack)) {
    throw DomainError("poincare point: norm " + std::to_string(n) + " is not inside the ball");
  }
}

double PoincarePoint::norm() const { return std::sqrt(simd::squared_norm(coords_.data(), coords_.size())); }

namespace detail {

RadialFactor exp_factor(double n) {
  if (n < kZeroNorm) return {1.0, -2.0 / 3.0};
  const double t = std::tanh(n);
  if (t >= kMaxNorm) {
    // Clipped: y = kMaxNorm * v / |v|.
    return {kMaxNorm / n, -kMaxNorm / (n * n * n)};
  }
  if (n < kSeriesCutoff) {
    const double n2 = n * n;
    return {t / n, -2.0 / 3.0 + 8.0 * n2 / 15.0};
  }
  const double dt = 1.0 - t * t;
  return {t / n, (dt * n - t) / (n * n * n)};
}

RadialFactor log_factor(double r) {
  if (r < kZeroNorm) return {1.0, 2.0 / 3.0};
  const double a = std::atanh(r);
  if (r < kSeriesCutoff) {
    const double r2 = r * r;
    return {a / r, 2.0 / 3.0 + 4.0 * r2 / 5.0};
  }
  return {a / r, (r / (1.0 - r * r) - a) / (r * r * r)};
}

DistanceTerms distance_terms(std::span<const double> p, std::span<const double> q) {
  const auto& k = simd::active();
  DistanceTerms t{};
  t.sq_diff = k.squared_distance(p.data(), q.data(), p.size());
  t.alpha = 1.0 - k.squared_norm(p.data(), p.size());
  t.beta = 1.0 - k.squared_norm(q.data(), q.size());
  t.x = 2.0 * t.sq_diff / (t.alpha * t.beta);
  return t;
}

double arcosh1p(double x) { return std::log1p(x + std::sqrt(x * (x + 2.0))); }

}  // namespace detail

void exp_map_into(std::span<const double> v, std::span<double> out) {
  require_same_dim(v.size(), out.size(), "exp_map_origin output");
  require_finite(v, "exp_map_origin");
  const double n = std::sqrt(simd::squared_norm(v.data(), v.size()));
  if (n < kZeroNorm) {
    for (auto& x : out) x = 0.0;
    return;
  }
  const double f = detail::exp_factor(n).factor;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = f * v[i];
}

void log_map_into(std::span<const double> p, std::span<double> out) {
  require_same_dim(p.size(), out.size(), "log_map_origin output");
  require_finite(p, "log_map_origin");
  const double r = std::sqrt(simd::squared_norm(p.data(), p.size()));
  if (r >= 1.0) throw DomainError("log_map_origin: point on or outside the unit sphere");
  if (r < kZeroNorm) {
    for (auto& x : out) x = 0.0;
    return;
  }
  const double f = detail::log_factor(r).factor;
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = f * p[i];
}

double geodesic_distance(std::span<const double> p, std::span<const double> q) {
  require_same_dim(p.size(), q.size(), "geodesic_distance");
  const auto t = detail::distance_terms(p, q);
  if (!(t.alpha > 0.0) || !(t.beta > 0.0)) {
    throw DomainError("geodesic_distance: point on or outside the unit sphere");
  }
  return detail::arcosh1p(t.x);
}

PoincarePoint exp_map_origin(const TangentVector& v) {
  std::vector<double> out(v.dim());
  exp_map_into(v.coords(), out);
  return PoincarePoint(std::move(out));
}

TangentVector log_map_origin(const PoincarePoint& p) {
  std::vector<double> out(p.dim());
  log_map_into(p.coords(), out);
  return TangentVector(std::move(out));
}

double geodesic_distance(const PoincarePoint& p, const PoincarePoint& q) {
  return geodesic_distance(p.coords(), q.coords());
}

PoincarePoint project_to_ball(std::span<const double> x) {
  require_finite(x, "project_to_ball");
  std::vector<double> out(x.begin(), x.end());
  const double n = std::sqrt(simd::squared_norm(out.data(), out.size()));
  if (n >= kMaxNorm) simd::scale(kMaxNorm / n, out.data(), out.size());
  return PoincarePoint(std::move(out));
}

}  // namespace hyperemo::poincare
