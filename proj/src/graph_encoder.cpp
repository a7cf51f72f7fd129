#include "hyperemo/graph_encoder.hpp"

#include <cmath>

#include "hyperemo/errors.hpp"

namespace hyperemo {
namespace {

Matrix gaussian(std::size_t rows, std::size_t cols, double sd, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, sd);
  Matrix m(rows, cols);
  for (auto& x : m.storage()) x = normal(rng);
  return m;
}

std::size_t ff_dim_for(std::size_t dim, const AttentionConfig& cfg) { return cfg.ff_dim == 0 ? 4 * dim : cfg.ff_dim; }

}  // namespace

AttentionBlockParams AttentionBlockParams::init(const std::string& prefix, std::size_t dim, const AttentionConfig& cfg,
                                                std::mt19937_64& rng) {
  if (cfg.heads == 0 || dim % cfg.heads != 0) {
    throw InvalidInput("model dimension " + std::to_string(dim) + " is not divisible by " +
                       std::to_string(cfg.heads) + " heads");
  }
  const std::size_t ff = ff_dim_for(dim, cfg);
  const double sd = 1.0 / std::sqrt(static_cast<double>(dim));
  AttentionBlockParams p;
  p.wq = ad::Parameter(prefix + ".wq", gaussian(dim, dim, sd, rng));
  p.wk = ad::Parameter(prefix + ".wk", gaussian(dim, dim, sd, rng));
  p.wv = ad::Parameter(prefix + ".wv", gaussian(dim, dim, sd, rng));
  p.wo = ad::Parameter(prefix + ".wo", gaussian(dim, dim, sd, rng));
  p.ln1_gain = ad::Parameter(prefix + ".ln1_gain", Matrix(1, dim, 1.0));
  p.ln1_bias = ad::Parameter(prefix + ".ln1_bias", Matrix(1, dim));
  p.ln2_gain = ad::Parameter(prefix + ".ln2_gain", Matrix(1, dim, 1.0));
  p.ln2_bias = ad::Parameter(prefix + ".ln2_bias", Matrix(1, dim));
  p.ff1_w = ad::Parameter(prefix + ".ff1_w", gaussian(ff, dim, sd, rng));
  p.ff1_b = ad::Parameter(prefix + ".ff1_b", Matrix(1, ff));
  p.ff2_w = ad::Parameter(prefix + ".ff2_w", gaussian(dim, ff, 1.0 / std::sqrt(static_cast<double>(ff)), rng));
  p.ff2_b = ad::Parameter(prefix + ".ff2_b", Matrix(1, dim));
  return p;
}

std::vector<ad::Parameter*> AttentionBlockParams::parameters() {
  return {&wq, &wk, &wv, &wo, &ln1_gain, &ln1_bias, &ln2_gain, &ln2_bias, &ff1_w, &ff1_b, &ff2_w, &ff2_b};
}

ad::Var attention_block(ad::Var queries, ad::Var context, const ad::AttentionMask* mask, AttentionBlockParams& p,
                        const AttentionConfig& cfg, AttentionTrace* trace) {
  ad::Tape& tape = *queries.tape();
  const std::size_t dim = p.dim();
  if (queries.cols() != dim) throw DimensionMismatch("attention queries", dim, queries.cols());
  if (context.cols() != dim) throw DimensionMismatch("attention context", dim, context.cols());
  if (mask != nullptr && (mask->size != queries.rows() || mask->size != context.rows())) {
    throw DimensionMismatch("attention mask", queries.rows(), mask->size);
  }
  const std::size_t head_dim = dim / cfg.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));

  ad::Var q_all = ad::linear(queries, tape.param(p.wq));
  ad::Var k_all = ad::linear(context, tape.param(p.wk));
  ad::Var v_all = ad::linear(context, tape.param(p.wv));
  std::vector<ad::Var> heads;
  heads.reserve(cfg.heads);
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    ad::Var qh = ad::slice_cols(q_all, h * head_dim, head_dim);
    ad::Var kh = ad::slice_cols(k_all, h * head_dim, head_dim);
    ad::Var vh = ad::slice_cols(v_all, h * head_dim, head_dim);
    ad::Var weights = ad::softmax_rows(ad::scale(ad::matmul_bt(qh, kh), inv_sqrt), mask);
    if (trace != nullptr) trace->weights.push_back(weights.value());
    heads.push_back(ad::matmul(weights, vh));
  }
  ad::Var attended = ad::linear(ad::concat_cols(heads), tape.param(p.wo));

  ad::Var h1 = ad::layer_norm(ad::add(queries, attended), tape.param(p.ln1_gain), tape.param(p.ln1_bias));
  ad::Var ff = ad::linear(ad::gelu(ad::linear(h1, tape.param(p.ff1_w), tape.param(p.ff1_b))), tape.param(p.ff2_w),
                          tape.param(p.ff2_b));
  if (cfg.strict_single_residual) return ff;
  return ad::layer_norm(ad::add(h1, ff), tape.param(p.ln2_gain), tape.param(p.ln2_bias));
}

TreeAttentionParams TreeAttentionParams::init(std::size_t dim, std::size_t layers, const AttentionConfig& cfg,
                                              std::mt19937_64& rng) {
  if (layers == 0) throw InvalidInput("tree attention needs at least one layer");
  TreeAttentionParams p;
  for (std::size_t l = 0; l < layers; ++l) {
    p.layers.push_back(AttentionBlockParams::init("tree_attn." + std::to_string(l), dim, cfg, rng));
  }
  return p;
}

std::vector<ad::Parameter*> TreeAttentionParams::parameters() {
  std::vector<ad::Parameter*> out;
  for (auto& l : layers) {
    const auto ps = l.parameters();
    out.insert(out.end(), ps.begin(), ps.end());
  }
  return out;
}

ad::Var tree_attention(ad::Var features, const ad::AttentionMask& mask, TreeAttentionParams& params,
                       const AttentionConfig& cfg, AttentionTrace* trace) {
  ad::Var x = features;
  for (auto& layer : params.layers) x = attention_block(x, x, &mask, layer, cfg, trace);
  return x;
}

Matrix tree_attention(const Matrix& features, const ad::AttentionMask& mask, TreeAttentionParams& params,
                      const AttentionConfig& cfg, AttentionTrace* trace) {
  ad::Tape tape;
  return tree_attention(tape.constant(features), mask, params, cfg, trace).value();
}

GraphFormerParams GraphFormerParams::init(std::size_t queries, std::size_t dim, std::size_t out_dim,
                                          const AttentionConfig& cfg, std::mt19937_64& rng) {
  if (queries == 0) throw InvalidInput("graph former needs at least one query");
  GraphFormerParams p;
  p.query_table = ad::Parameter("former.queries", gaussian(queries, dim, 1.0, rng));
  p.cross = AttentionBlockParams::init("former.cross", dim, cfg, rng);
  p.self = AttentionBlockParams::init("former.self", dim, cfg, rng);
  p.out_proj = ad::Parameter("former.out_proj", gaussian(out_dim, dim, 1.0 / std::sqrt(static_cast<double>(dim)), rng));
  return p;
}

std::vector<ad::Parameter*> GraphFormerParams::parameters() {
  std::vector<ad::Parameter*> out{&query_table};
  for (auto* p : cross.parameters()) out.push_back(p);
  for (auto* p : self.parameters()) out.push_back(p);
  out.push_back(&out_proj);
  return out;
}

ad::Var graph_former(ad::Var encoded, GraphFormerParams& params, const AttentionConfig& cfg) {
  if (encoded.rows() == 0) throw InvalidInput("graph former: empty graph");
  ad::Tape& tape = *encoded.tape();
  ad::Var q0 = tape.param(params.query_table);
  ad::Var q1 = attention_block(q0, encoded, nullptr, params.cross, cfg);
  ad::Var q2 = attention_block(q1, q1, nullptr, params.self, cfg);
  return ad::linear(q2, tape.param(params.out_proj));
}

Matrix graph_former(const Matrix& encoded, GraphFormerParams& params, const AttentionConfig& cfg) {
  ad::Tape tape;
  return graph_former(tape.constant(encoded), params, cfg).value();
}

}  // namespace hyperemo
