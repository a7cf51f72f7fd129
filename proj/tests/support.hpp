#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hyperemo/autograd.hpp"
#include "hyperemo/emotion_tree.hpp"
#include "hyperemo/poincare.hpp"
#include "hyperemo/synthetic.hpp"

// Shared helpers and independent oracles for the test programs. Oracles
// avoid the library's geometry code and work in long double.
namespace testing_support {

using hyperemo::Matrix;
using hyperemo::poincare::PoincarePoint;
using hyperemo::poincare::TangentVector;

inline long double norm_ld(std::span<const double> v) {
  long double s = 0;
  for (double x : v) s += static_cast<long double>(x) * x;
  return std::sqrt(s);
}

// arcosh(1 + 2|p-q|^2 / ((1-|p|^2)(1-|q|^2))) evaluated directly.
inline double oracle_distance(std::span<const double> p, std::span<const double> q) {
  long double diff = 0, np = 0, nq = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const long double d = static_cast<long double>(p[i]) - q[i];
    diff += d * d;
    np += static_cast<long double>(p[i]) * p[i];
    nq += static_cast<long double>(q[i]) * q[i];
  }
  return static_cast<double>(std::acosh(1.0L + 2.0L * diff / ((1.0L - np) * (1.0L - nq))));
}

inline std::vector<double> oracle_exp(std::span<const double> v) {
  const long double n = norm_ld(v);
  std::vector<double> out(v.size(), 0.0);
  if (n == 0) return out;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<double>(std::tanh(n) * v[i] / n);
  return out;
}

inline std::vector<double> oracle_log(std::span<const double> p) {
  const long double n = norm_ld(p);
  std::vector<double> out(p.size(), 0.0);
  if (n == 0) return out;
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = static_cast<double>(std::atanh(n) * p[i] / n);
  return out;
}

// Mobius addition x (+) y at unit curvature: an isometry taking the origin to x.
inline std::vector<double> mobius_add(std::span<const double> x, std::span<const double> y) {
  long double xy = 0, x2 = 0, y2 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xy += static_cast<long double>(x[i]) * y[i];
    x2 += static_cast<long double>(x[i]) * x[i];
    y2 += static_cast<long double>(y[i]) * y[i];
  }
  const long double den = 1 + 2 * xy + x2 * y2;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = static_cast<double>(((1 + 2 * xy + y2) * x[i] + (1 - x2) * y[i]) / den);
  }
  return out;
}

inline std::vector<double> gaussian_vector(std::size_t n, double sd, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = normal(rng);
  return v;
}

// Uniform direction, norm drawn uniformly from [0, max_norm].
inline std::vector<double> random_ball_point(std::size_t n, double max_norm, std::mt19937_64& rng) {
  auto v = gaussian_vector(n, 1.0, rng);
  const double len = static_cast<double>(norm_ld(v));
  const double r = std::uniform_real_distribution<double>(0.0, max_norm)(rng);
  for (auto& x : v) x *= r / len;
  return v;
}

inline std::vector<double> random_tangent(std::size_t n, double max_norm, std::mt19937_64& rng) {
  return random_ball_point(n, max_norm, rng);
}

inline hyperemo::EmotionTree fixture_tree(std::size_t dim, std::uint64_t seed = 0) {
  return hyperemo::EmotionTree::from_rows(hyperemo::synthetic::fixture_taxonomy(), dim, seed);
}

inline hyperemo::EmotionTree tree_from_text(const std::string& text, std::size_t dim, std::uint64_t seed = 0) {
  std::istringstream in(text);
  return hyperemo::EmotionTree::load(in, dim, seed);
}

// Places node n's prototype exactly at ball point p.
inline void set_prototype(hyperemo::EmotionTree& tree, hyperemo::NodeIndex n, std::span<const double> p) {
  const auto z = oracle_log(p);
  std::copy(z.begin(), z.end(), tree.prototype_params().value.row_span(n).begin());
}

struct GradCheck {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
};

// Central differences over every element of `params` against the tape's
// analytic gradients for the scalar built by `loss`.
inline GradCheck finite_difference_check(const std::vector<hyperemo::ad::Parameter*>& params,
                                         const std::function<hyperemo::ad::Var(hyperemo::ad::Tape&)>& loss,
                                         double step = 1e-5, double floor = 1e-6) {
  for (auto* p : params) p->zero_grad();
  {
    hyperemo::ad::Tape tape;
    tape.backward(loss(tape));
  }
  auto eval = [&]() {
    hyperemo::ad::Tape tape;
    return loss(tape).scalar();
  };
  GradCheck out;
  for (auto* p : params) {
    for (std::size_t e = 0; e < p->value.size(); ++e) {
      const double saved = p->value[e];
      p->value[e] = saved + step;
      const double up = eval();
      p->value[e] = saved - step;
      const double down = eval();
      p->value[e] = saved;
      const double numeric = (up - down) / (2 * step);
      const double analytic = p->grad[e];
      const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
      out.max_relative_error = std::max(out.max_relative_error, rel);
      ++out.checked;
    }
  }
  return out;
}

}  // namespace testing_support
