#pragma once

#include <cstddef>
#include <span>
#include <vector>

// Poincare-ball geometry at unit curvature. Only origin-based maps are
// provided; everything is in double precision.

namespace hyperemo::poincare {

inline constexpr double kBallEps = 1e-5;
// Largest norm a point may carry after projection.
inline constexpr double kMaxNorm = 1.0 - kBallEps;
// Below this norm exp/log return zero instead of dividing by the norm.
inline constexpr double kZeroNorm = 1e-15;

class TangentVector {
 public:
  TangentVector() = default;
  explicit TangentVector(std::vector<double> coords);  // throws InvalidInput on non-finite
  static TangentVector zero(std::size_t dim) { return TangentVector(std::vector<double>(dim, 0.0)); }

  std::size_t dim() const noexcept { return coords_.size(); }
  std::span<const double> coords() const noexcept { return coords_; }
  double norm() const;

  friend bool operator==(const TangentVector&, const TangentVector&) = default;

 private:
  std::vector<double> coords_;
};

// A point of the open unit ball with norm <= kMaxNorm.
class PoincarePoint {
 public:
  PoincarePoint() = default;
  // Throws InvalidInput on non-finite input and DomainError if the norm
  // exceeds kMaxNorm (beyond rounding).
  explicit PoincarePoint(std::vector<double> coords);
  static PoincarePoint origin(std::size_t dim) { return PoincarePoint(std::vector<double>(dim, 0.0)); }

  std::size_t dim() const noexcept { return coords_.size(); }
  std::span<const double> coords() const noexcept { return coords_; }
  double norm() const;

  friend bool operator==(const PoincarePoint&, const PoincarePoint&) = default;

 private:
  std::vector<double> coords_;
};

PoincarePoint exp_map_origin(const TangentVector& v);
TangentVector log_map_origin(const PoincarePoint& p);
double geodesic_distance(const PoincarePoint& p, const PoincarePoint& q);
PoincarePoint project_to_ball(std::span<const double> x);

// Raw-span forms. `out` must have the input's length and may alias it.
// exp_map_into clips to kMaxNorm; log_map_into throws DomainError for
// norm >= 1.
void exp_map_into(std::span<const double> v, std::span<double> out);
void log_map_into(std::span<const double> p, std::span<double> out);
double geodesic_distance(std::span<const double> p, std::span<const double> q);

namespace detail {

// y = factor * v for the clipped origin exponential map. `dfactor_over_norm`
// is factor'(|v|) / |v|, which is what the Jacobian needs.
struct RadialFactor {
  double factor;
  double dfactor_over_norm;
};

RadialFactor exp_factor(double norm);
RadialFactor log_factor(double norm);

// 1 + 2|p-q|^2 / ((1-|p|^2)(1-|q|^2)) - 1, i.e. the arcosh argument minus one.
struct DistanceTerms {
  double sq_diff;
  double alpha;  // 1 - |p|^2
  double beta;   // 1 - |q|^2
  double x;
};

DistanceTerms distance_terms(std::span<const double> p, std::span<const double> q);
double arcosh1p(double x);

}  // namespace detail

}  // namespace hyperemo::poincare
