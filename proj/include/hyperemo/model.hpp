#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hyperemo/autograd.hpp"
#include "hyperemo/deliberation.hpp"
#include "hyperemo/emotion_tree.hpp"
#include "hyperemo/evidence_graph.hpp"
#include "hyperemo/graph_encoder.hpp"
#include "hyperemo/knowledge_base.hpp"
#include "hyperemo/prompt_assembly.hpp"
#include "hyperemo/query_encoder.hpp"

namespace hyperemo {

struct ModelConfig {
  std::array<std::size_t, kModalityCount> feature_dims{16, 16, 16};
  std::size_t d_h = 32;
  std::size_t d_g = 32;
  std::size_t d_llm = 64;
  std::size_t heads = 2;
  std::size_t tree_layers = 1;
  std::size_t graph_tokens = 8;  // Q
  std::size_t fusion_rows = 4;   // r
  BeamConfig beam{};
  double proximity_threshold = 0.5;
  bool strict_single_residual = false;
  std::uint64_t seed = 0;

  AttentionConfig attention() const { return AttentionConfig{heads, 0, strict_single_residual}; }
  // Throws InvalidInput on the first violated constraint.
  void validate() const;
};

// Discrete choices made for one sample: beam search, retrieved evidence and
// the graph built from them. Held fixed while gradients flow through the
// continuous parameters.
struct SampleStructure {
  DeliberationResult deliberation;
  EvidenceGraph graph;
  ad::AttentionMask mask;
};

// Tape outputs of one forward pass.
struct ForwardVars {
  QueryVars queries;
  ad::Var graph_tokens;  // Q x d_llm
  AssembledVars sequence;
  ad::Var logits;  // T x V
};

struct Prediction {
  SampleQueries queries;
  DeliberationResult deliberation;
  EvidenceGraph graph;
  Matrix graph_tokens;
  PromptSequence sequence;
  Matrix logits;
  NodeIndex predicted_leaf = 0;  // argmax over leaf tokens at the last position
};

// Every learnable piece of the pipeline around the frozen mock language model.
class HyperEmoModel {
 public:
  HyperEmoModel(EmotionTree tree, const ModelConfig& cfg);

  const ModelConfig& config() const noexcept { return cfg_; }
  EmotionTree& tree() noexcept { return tree_; }
  const EmotionTree& tree() const noexcept { return tree_; }
  QueryEncoder& encoder() noexcept { return encoder_; }
  const QueryEncoder& encoder() const noexcept { return encoder_; }
  GraphEmbeddingTables& tables() noexcept { return tables_; }
  TreeAttentionParams& tree_attention_params() noexcept { return tree_attn_; }
  GraphFormerParams& former() noexcept { return former_; }
  MarkerEmbeddings& markers() noexcept { return markers_; }
  MockLanguageModel& language_model() noexcept { return lm_; }
  const MockLanguageModel& language_model() const noexcept { return lm_; }

  // All parameters in a fixed order; the mock LM's are frozen.
  std::vector<ad::Parameter*> parameters();
  std::vector<ad::Parameter*> trainable_parameters();
  void zero_grad();

  SampleStructure plan(const ModalityFeatures& feats, const KnowledgeBase& kb) const;

  // Builds the pipeline on `tape` for a fixed structure. With a label the
  // label row is appended and logits cover the whole sequence.
  ForwardVars forward(ad::Tape& tape, const ModalityFeatures& feats, const KnowledgeBase& kb,
                      const SampleStructure& s, std::optional<NodeIndex> label, const Matrix* text_rows = nullptr);

  Prediction predict(const ModalityFeatures& feats, const KnowledgeBase& kb);

  int leaf_token(NodeIndex leaf) const;
  NodeIndex leaf_of_token(int token) const;

 private:
  ModelConfig cfg_;
  std::mt19937_64 init_rng_;  // consumed by the member initializers below
  EmotionTree tree_;
  QueryEncoder encoder_;
  GraphEmbeddingTables tables_;
  TreeAttentionParams tree_attn_;
  GraphFormerParams former_;
  ad::Parameter fusion_map_;   // (r * d_llm) x (3 d_h)
  ad::Parameter fusion_bias_;  // 1 x (r * d_llm)
  MarkerEmbeddings markers_;
  MockLanguageModel lm_;
  std::vector<int> leaf_tokens_;  // indexed by NodeIndex, -1 for inner nodes
};

}  // namespace hyperemo
