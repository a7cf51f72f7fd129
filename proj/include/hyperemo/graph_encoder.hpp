#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "hyperemo/autograd.hpp"

namespace hyperemo {

struct AttentionConfig {
  std::size_t heads = 2;
  std::size_t ff_dim = 0;  // 0: 4 * model dim
  // Literal single-residual form: out = FFN(LN(X + MHA(X))). When false a
  // second residual + LayerNorm wraps the FFN.
  bool strict_single_residual = false;
};

// One attention block: multi-head attention, residual + LayerNorm, and a
// GELU feed-forward network.
struct AttentionBlockParams {
  static AttentionBlockParams init(const std::string& prefix, std::size_t dim, const AttentionConfig& cfg,
                                   std::mt19937_64& rng);

  std::size_t dim() const { return wq.value.rows(); }
  std::vector<ad::Parameter*> parameters();

  ad::Parameter wq, wk, wv, wo;  // dim x dim; head h owns rows [h*dh, (h+1)*dh)
  ad::Parameter ln1_gain, ln1_bias;
  ad::Parameter ln2_gain, ln2_bias;
  ad::Parameter ff1_w, ff1_b;  // ff x dim, 1 x ff
  ad::Parameter ff2_w, ff2_b;  // dim x ff, 1 x dim
};

// Per-head attention weights captured during a forward pass.
struct AttentionTrace {
  std::vector<Matrix> weights;
};

// queries: n x d, context: m x d. With a mask (n == m required) blocked
// pairs receive exactly zero weight.
ad::Var attention_block(ad::Var queries, ad::Var context, const ad::AttentionMask* mask, AttentionBlockParams& p,
                        const AttentionConfig& cfg, AttentionTrace* trace = nullptr);

struct TreeAttentionParams {
  static TreeAttentionParams init(std::size_t dim, std::size_t layers, const AttentionConfig& cfg,
                                  std::mt19937_64& rng);
  std::vector<ad::Parameter*> parameters();

  std::vector<AttentionBlockParams> layers;
};

// Masked self-attention over the graph nodes.
ad::Var tree_attention(ad::Var features, const ad::AttentionMask& mask, TreeAttentionParams& params,
                       const AttentionConfig& cfg, AttentionTrace* trace = nullptr);
Matrix tree_attention(const Matrix& features, const ad::AttentionMask& mask, TreeAttentionParams& params,
                      const AttentionConfig& cfg, AttentionTrace* trace = nullptr);

// Fixed-budget distillation of a variable-size node set into Q tokens.
struct GraphFormerParams {
  static GraphFormerParams init(std::size_t queries, std::size_t dim, std::size_t out_dim, const AttentionConfig& cfg,
                                std::mt19937_64& rng);
  std::vector<ad::Parameter*> parameters();

  std::size_t query_count() const { return query_table.value.rows(); }
  std::size_t out_dim() const { return out_proj.value.rows(); }

  ad::Parameter query_table;  // Q x d_g
  AttentionBlockParams cross;
  AttentionBlockParams self;
  ad::Parameter out_proj;  // d_llm x d_g
};

// Cross-attention from the learned queries onto `encoded`, self-attention
// among the queries, then a row-wise projection. Always Q x d_llm.
ad::Var graph_former(ad::Var encoded, GraphFormerParams& params, const AttentionConfig& cfg);
Matrix graph_former(const Matrix& encoded, GraphFormerParams& params, const AttentionConfig& cfg);

}  // namespace hyperemo
