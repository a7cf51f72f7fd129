#include "hyperemo/model.hpp"

#include <algorithm>
#include <cmath>

#include "hyperemo/errors.hpp"

namespace hyperemo {

void ModelConfig::validate() const {
  for (std::size_t m = 0; m < kModalityCount; ++m) {
    if (feature_dims[m] == 0) throw InvalidInput(std::string(kModalityNames[m]) + " feature dimension must be positive");
  }
  if (d_h == 0 || d_g == 0 || d_llm == 0) throw InvalidInput("model dimensions must be positive");
  if (heads == 0) throw InvalidInput("attention heads must be positive");
  if (d_g % heads != 0) {
    throw InvalidInput("d_g=" + std::to_string(d_g) + " is not divisible by H=" + std::to_string(heads));
  }
  if (tree_layers == 0) throw InvalidInput("tree attention needs at least one layer");
  if (graph_tokens == 0) throw InvalidInput("graph token count Q must be positive");
  if (fusion_rows == 0) throw InvalidInput("fusion row count must be positive");
  if (!(proximity_threshold >= 0.0)) throw InvalidInput("proximity threshold must be non-negative");
  beam.validate();
}

namespace {

std::vector<std::string> leaf_labels(const EmotionTree& tree) {
  std::vector<std::string> out;
  for (NodeIndex leaf : tree.leaves()) out.push_back(tree.node(leaf).label);
  return out;
}

const ModelConfig& validated(const ModelConfig& cfg, const EmotionTree& tree) {
  cfg.validate();
  if (tree.dim() != cfg.d_h) throw DimensionMismatch("taxonomy prototype dimension", cfg.d_h, tree.dim());
  return cfg;
}

}  // namespace

HyperEmoModel::HyperEmoModel(EmotionTree tree, const ModelConfig& cfg)
    : cfg_(validated(cfg, tree)),
      init_rng_(cfg.seed),
      tree_(std::move(tree)),
      encoder_(cfg.feature_dims, cfg.d_h, init_rng_),
      tables_(GraphEmbeddingTables::init(static_cast<std::size_t>(tree_.level_count()) + 1, cfg.d_g, init_rng_)),
      tree_attn_(TreeAttentionParams::init(cfg.d_g, cfg.tree_layers, cfg.attention(), init_rng_)),
      former_(GraphFormerParams::init(cfg.graph_tokens, cfg.d_g, cfg.d_llm, cfg.attention(), init_rng_)),
      markers_(MarkerEmbeddings::init(cfg.d_llm, init_rng_)),
      lm_(leaf_labels(tree_), cfg.d_llm, init_rng_) {
  const std::size_t in = kModalityCount * cfg.d_h;
  const std::size_t out = cfg.fusion_rows * cfg.d_llm;
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(in)));
  Matrix w(out, in);
  for (auto& x : w.storage()) x = normal(init_rng_);
  fusion_map_ = ad::Parameter("prompt.fusion_map", std::move(w));
  fusion_bias_ = ad::Parameter("prompt.fusion_bias", Matrix(1, out));

  leaf_tokens_.assign(tree_.size(), -1);
  for (std::size_t i = 0; i < tree_.leaves().size(); ++i) leaf_tokens_[tree_.leaves()[i]] = static_cast<int>(i);
}

std::vector<ad::Parameter*> HyperEmoModel::parameters() {
  std::vector<ad::Parameter*> out;
  out.push_back(&tree_.prototype_params());
  for (auto* p : encoder_.parameters()) out.push_back(p);
  out.push_back(&tables_.type_table);
  out.push_back(&tables_.level_table);
  for (auto* p : tree_attn_.parameters()) out.push_back(p);
  for (auto* p : former_.parameters()) out.push_back(p);
  out.push_back(&fusion_map_);
  out.push_back(&fusion_bias_);
  out.push_back(&markers_.rows);
  for (auto* p : lm_.parameters()) out.push_back(p);
  return out;
}

std::vector<ad::Parameter*> HyperEmoModel::trainable_parameters() {
  auto all = parameters();
  std::erase_if(all, [](const ad::Parameter* p) { return !p->trainable; });
  return all;
}

void HyperEmoModel::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

int HyperEmoModel::leaf_token(NodeIndex leaf) const {
  if (leaf >= leaf_tokens_.size() || leaf_tokens_[leaf] < 0) {
    throw InvalidInput("node " + std::to_string(leaf) + " is not a taxonomy leaf");
  }
  return leaf_tokens_[leaf];
}

NodeIndex HyperEmoModel::leaf_of_token(int token) const {
  if (token < 0 || static_cast<std::size_t>(token) >= tree_.leaves().size()) {
    throw InvalidInput("token " + std::to_string(token) + " is not a leaf token");
  }
  return tree_.leaves()[static_cast<std::size_t>(token)];
}

SampleStructure HyperEmoModel::plan(const ModalityFeatures& feats, const KnowledgeBase& kb) const {
  if (!kb.empty() && kb.dim() != cfg_.d_h) throw DimensionMismatch("knowledge base key dimension", cfg_.d_h, kb.dim());
  SampleStructure s;
  s.deliberation = deliberate(tree_, kb, encoder_.encode(feats), encoder_.fusion(), cfg_.beam);
  s.graph = build_graph_structure(s.deliberation, tree_, kb, encoder_.fusion(), cfg_.proximity_threshold);
  s.mask = build_mask(s.graph);
  return s;
}

ForwardVars HyperEmoModel::forward(ad::Tape& tape, const ModalityFeatures& feats, const KnowledgeBase& kb,
                                   const SampleStructure& s, std::optional<NodeIndex> label, const Matrix* text_rows) {
  ForwardVars out;
  out.queries = encoder_.encode(tape, feats);

  ad::Var node_feats = graph_features(s.graph, kb, tape.param(tree_.prototype_params()), out.queries.alpha,
                                      tape.param(tables_.type_table), tape.param(tables_.level_table));
  ad::Var encoded = tree_attention(node_feats, s.mask, tree_attn_, cfg_.attention());
  out.graph_tokens = graph_former(encoded, former_, cfg_.attention());

  std::array<ad::Var, kModalityCount> tangents;
  for (std::size_t m = 0; m < kModalityCount; ++m) tangents[m] = ad::log_map_rows(out.queries.modality[m]);
  ad::Var fusion_flat = ad::linear(ad::concat_cols(tangents), tape.param(fusion_map_), tape.param(fusion_bias_));
  ad::Var fusion_rows = ad::reshape(fusion_flat, cfg_.fusion_rows, cfg_.d_llm);

  ad::Var text;
  if (text_rows != nullptr && text_rows->rows() > 0) text = tape.constant(*text_rows);
  const int task_token = lm_.task_token();
  ad::Var task = tape.constant(lm_.token_embeddings(std::span<const int>(&task_token, 1)));
  ad::Var label_row;
  if (label) {
    const int token = leaf_token(*label);
    label_row = tape.constant(lm_.token_embeddings(std::span<const int>(&token, 1)));
  }
  out.sequence = assemble(fusion_rows, text, out.graph_tokens, task, tape.param(markers_.rows), label_row);
  out.logits = lm_.logits(out.sequence.rows);
  return out;
}

Prediction HyperEmoModel::predict(const ModalityFeatures& feats, const KnowledgeBase& kb) {
  SampleStructure s = plan(feats, kb);
  ad::Tape tape;
  ForwardVars fv = forward(tape, feats, kb, s, std::nullopt);

  Prediction p;
  p.queries = fv.queries.values();
  p.graph_tokens = fv.graph_tokens.value();
  p.logits = fv.logits.value();

  {
    const Matrix all = fv.sequence.rows.value();
    std::size_t at = 0;
    for (const auto& [tag, count] : fv.sequence.layout) {
      Matrix seg(count, all.cols());
      std::copy(all.data() + at * all.cols(), all.data() + (at + count) * all.cols(), seg.data());
      p.sequence.segments.emplace_back(tag, std::move(seg));
      at += count;
    }
  }

  const std::size_t last = p.logits.rows() - 1;
  int best = 0;
  for (int t = 1; t < static_cast<int>(lm_.leaf_token_count()); ++t) {
    if (p.logits(last, static_cast<std::size_t>(t)) > p.logits(last, static_cast<std::size_t>(best))) best = t;
  }
  p.predicted_leaf = leaf_of_token(best);

  s.graph = build_graph(s.deliberation, tree_, kb, encoder_.fusion(), tables_, cfg_.proximity_threshold);
  p.deliberation = std::move(s.deliberation);
  p.graph = std::move(s.graph);
  return p;
}

}  // namespace hyperemo
