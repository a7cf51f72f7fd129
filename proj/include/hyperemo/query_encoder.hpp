#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hyperemo/autograd.hpp"
#include "hyperemo/poincare.hpp"

namespace hyperemo {

enum class Modality : std::size_t { kAudio = 0, kVisual = 1, kText = 2 };
inline constexpr std::size_t kModalityCount = 3;
inline constexpr std::array<const char*, kModalityCount> kModalityNames = {"audio", "visual", "text"};
inline constexpr std::array<Modality, kModalityCount> kModalities = {Modality::kAudio, Modality::kVisual,
                                                                     Modality::kText};

// Upstream encoder outputs for one sample, indexed by Modality.
struct ModalityFeatures {
  std::array<std::vector<double>, kModalityCount> values;

  const std::vector<double>& operator[](Modality m) const { return values[static_cast<std::size_t>(m)]; }
  std::vector<double>& operator[](Modality m) { return values[static_cast<std::size_t>(m)]; }
};

inline constexpr double kLayerNormEps = 1e-5;

// Linear layer followed by LayerNorm.
struct ProjectionHead {
  static ProjectionHead init(const std::string& prefix, std::size_t in_dim, std::size_t out_dim, std::mt19937_64& rng);

  std::size_t in_dim() const { return weight.value.cols(); }
  std::size_t out_dim() const { return weight.value.rows(); }

  ad::Parameter weight;     // out x in
  ad::Parameter bias;       // 1 x out
  ad::Parameter norm_gain;  // 1 x out
  ad::Parameter norm_bias;  // 1 x out
};

// Pre-softmax modality logits; alpha = softmax(theta).
struct FusionWeights {
  FusionWeights() : theta("fusion.theta", Matrix(1, kModalityCount)) {}
  explicit FusionWeights(const std::array<double, kModalityCount>& logits);

  std::array<double, kModalityCount> alpha() const;

  ad::Parameter theta;
};

struct SampleQueries {
  poincare::PoincarePoint audio;
  poincare::PoincarePoint visual;
  poincare::PoincarePoint text;
  poincare::PoincarePoint fused;

  const poincare::PoincarePoint& operator[](Modality m) const;
};

// Tape-resident queries: each point is 1 x d_h, alpha is 1 x 3.
struct QueryVars {
  std::array<ad::Var, kModalityCount> modality;
  ad::Var fused;
  ad::Var alpha;

  SampleQueries values() const;
};

// exp_map(layer_norm(linear(feat))).
poincare::PoincarePoint project_modality(const ProjectionHead& head, std::span<const double> feat);
// Tangent-space fusion exp(sum_m alpha_m log q_m) with alpha = softmax(theta).
poincare::PoincarePoint fuse_queries(const std::array<poincare::PoincarePoint, kModalityCount>& qs,
                                     const FusionWeights& w);

// On-tape forms of the two operations above.
ad::Var project_modality(ad::Tape& tape, ProjectionHead& head, std::span<const double> feat);
ad::Var fuse_queries(ad::Tape& tape, const std::array<ad::Var, kModalityCount>& qs, ad::Var alpha);
ad::Var fusion_alpha(ad::Tape& tape, FusionWeights& w);

// Three projection heads plus the shared fusion weights.
class QueryEncoder {
 public:
  QueryEncoder(const std::array<std::size_t, kModalityCount>& feature_dims, std::size_t dim, std::mt19937_64& rng);

  SampleQueries encode(const ModalityFeatures& feats) const;
  QueryVars encode(ad::Tape& tape, const ModalityFeatures& feats);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t feature_dim(Modality m) const { return heads_[static_cast<std::size_t>(m)].in_dim(); }

  ProjectionHead& head(Modality m) { return heads_[static_cast<std::size_t>(m)]; }
  const ProjectionHead& head(Modality m) const { return heads_[static_cast<std::size_t>(m)]; }
  FusionWeights& fusion() noexcept { return fusion_; }
  const FusionWeights& fusion() const noexcept { return fusion_; }

  std::vector<ad::Parameter*> parameters();

 private:
  std::array<ProjectionHead, kModalityCount> heads_;
  FusionWeights fusion_;
  std::size_t dim_;
};

}  // namespace hyperemo
