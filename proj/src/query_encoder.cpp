#include "hyperemo/query_encoder.hpp"

#include <cmath>

#include "hyperemo/errors.hpp"

namespace hyperemo {

ProjectionHead ProjectionHead::init(const std::string& prefix, std::size_t in_dim, std::size_t out_dim,
                                    std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 0.02);
  Matrix w(out_dim, in_dim);
  for (auto& x : w.storage()) x = normal(rng);
  return ProjectionHead{
      ad::Parameter(prefix + ".weight", std::move(w)),
      ad::Parameter(prefix + ".bias", Matrix(1, out_dim)),
      ad::Parameter(prefix + ".norm_gain", Matrix(1, out_dim, 1.0)),
      ad::Parameter(prefix + ".norm_bias", Matrix(1, out_dim)),
  };
}

FusionWeights::FusionWeights(const std::array<double, kModalityCount>& logits) : FusionWeights() {
  for (std::size_t m = 0; m < kModalityCount; ++m) theta.value[m] = logits[m];
}

std::array<double, kModalityCount> FusionWeights::alpha() const {
  ad::Tape tape;
  const Matrix a = ad::softmax_rows(tape.constant(theta.value)).value();
  return {a[0], a[1], a[2]};
}

const poincare::PoincarePoint& SampleQueries::operator[](Modality m) const {
  switch (m) {
    case Modality::kAudio: return audio;
    case Modality::kVisual: return visual;
    case Modality::kText: return text;
  }
  return fused;
}

namespace {

poincare::PoincarePoint to_point(ad::Var v) {
  return poincare::PoincarePoint(v.value().storage());
}

ad::Var project_impl(ad::Var w, ad::Var b, ad::Var gain, ad::Var nbias, std::span<const double> feat) {
  if (feat.size() != w.cols()) throw DimensionMismatch("projection head input", w.cols(), feat.size());
  ad::Tape& tape = *w.tape();
  ad::Var x = tape.constant(Matrix::row(feat));
  if (!x.value().all_finite()) throw InvalidInput("projection head input: non-finite feature");
  ad::Var h = ad::layer_norm(ad::linear(x, w, b), gain, nbias, kLayerNormEps);
  return ad::exp_map_rows(h);
}

}  // namespace

SampleQueries QueryVars::values() const {
  return SampleQueries{to_point(modality[0]), to_point(modality[1]), to_point(modality[2]), to_point(fused)};
}

poincare::PoincarePoint project_modality(const ProjectionHead& head, std::span<const double> feat) {
  ad::Tape tape;
  return to_point(project_impl(tape.constant(head.weight.value), tape.constant(head.bias.value),
                               tape.constant(head.norm_gain.value), tape.constant(head.norm_bias.value), feat));
}

ad::Var project_modality(ad::Tape& tape, ProjectionHead& head, std::span<const double> feat) {
  return project_impl(tape.param(head.weight), tape.param(head.bias), tape.param(head.norm_gain),
                      tape.param(head.norm_bias), feat);
}

ad::Var fusion_alpha(ad::Tape& tape, FusionWeights& w) { return ad::softmax_rows(tape.param(w.theta)); }

ad::Var fuse_queries(ad::Tape& tape, const std::array<ad::Var, kModalityCount>& qs, ad::Var alpha) {
  (void)tape;
  const std::size_t d = qs[0].cols();
  for (const auto& q : qs) {
    if (q.cols() != d) throw DimensionMismatch("fuse_queries", d, q.cols());
  }
  ad::Var acc;
  for (std::size_t m = 0; m < kModalityCount; ++m) {
    ad::Var term = ad::mul_scalar(ad::pick(alpha, 0, m), ad::log_map_rows(qs[m]));
    acc = acc.valid() ? ad::add(acc, term) : term;
  }
  return ad::exp_map_rows(acc);
}

poincare::PoincarePoint fuse_queries(const std::array<poincare::PoincarePoint, kModalityCount>& qs,
                                     const FusionWeights& w) {
  ad::Tape tape;
  std::array<ad::Var, kModalityCount> vars;
  for (std::size_t m = 0; m < kModalityCount; ++m) vars[m] = tape.constant(Matrix::row(qs[m].coords()));
  ad::Var alpha = ad::softmax_rows(tape.constant(w.theta.value));
  return to_point(fuse_queries(tape, vars, alpha));
}

QueryEncoder::QueryEncoder(const std::array<std::size_t, kModalityCount>& feature_dims, std::size_t dim,
                           std::mt19937_64& rng)
    : heads_{ProjectionHead::init("head.audio", feature_dims[0], dim, rng),
             ProjectionHead::init("head.visual", feature_dims[1], dim, rng),
             ProjectionHead::init("head.text", feature_dims[2], dim, rng)},
      dim_(dim) {}

SampleQueries QueryEncoder::encode(const ModalityFeatures& feats) const {
  std::array<poincare::PoincarePoint, kModalityCount> qs;
  for (std::size_t m = 0; m < kModalityCount; ++m) qs[m] = project_modality(heads_[m], feats.values[m]);
  auto fused = fuse_queries(qs, fusion_);
  return SampleQueries{std::move(qs[0]), std::move(qs[1]), std::move(qs[2]), std::move(fused)};
}

QueryVars QueryEncoder::encode(ad::Tape& tape, const ModalityFeatures& feats) {
  QueryVars out;
  for (std::size_t m = 0; m < kModalityCount; ++m) out.modality[m] = project_modality(tape, heads_[m], feats.values[m]);
  out.alpha = fusion_alpha(tape, fusion_);
  out.fused = fuse_queries(tape, out.modality, out.alpha);
  return out;
}

std::vector<ad::Parameter*> QueryEncoder::parameters() {
  std::vector<ad::Parameter*> out;
  for (auto& h : heads_) {
    out.insert(out.end(), {&h.weight, &h.bias, &h.norm_gain, &h.norm_bias});
  }
  out.push_back(&fusion_.theta);
  return out;
}

}  // namespace hyperemo
