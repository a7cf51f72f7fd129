#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <utility>
#include <vector>

#include "hyperemo/autograd.hpp"
#include "hyperemo/deliberation.hpp"
#include "hyperemo/emotion_tree.hpp"
#include "hyperemo/knowledge_base.hpp"
#include "hyperemo/poincare.hpp"
#include "hyperemo/query_encoder.hpp"

namespace hyperemo {

enum class NodeKind : std::uint8_t { kConcept = 0, kEvidence = 1 };

struct GraphNode {
  NodeKind kind = NodeKind::kConcept;
  int level = 0;  // tree level for concepts, leaf level + 1 for evidence
  // Tree node index for concepts, knowledge-base item index for evidence.
  std::size_t source = 0;
  poincare::PoincarePoint source_point;
  std::vector<double> init_feature;
};

// Learnable type and level embeddings added to the base node features.
struct GraphEmbeddingTables {
  static GraphEmbeddingTables init(std::size_t level_rows, std::size_t feature_dim, std::mt19937_64& rng);

  std::size_t feature_dim() const { return type_table.value.cols(); }

  ad::Parameter type_table;   // 2 x d_g
  ad::Parameter level_table;  // level_rows x d_g
};

struct EvidenceGraph {
  std::vector<GraphNode> nodes;  // concepts first, in path order
  std::size_t concept_count = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // i < j, sorted
  std::vector<std::uint8_t> adjacency;                     // N x N, symmetric, false diagonal

  std::size_t size() const noexcept { return nodes.size(); }
  bool adjacent(std::size_t i, std::size_t j) const { return adjacency[i * nodes.size() + j] != 0; }
  std::size_t edge_count() const noexcept { return edges.size(); }

  // Node lines then edge lines:
  //   node <i> <concept|evidence> <level> <source> <feature checksum hex>
  //   edge <i> <j>
  void dump(std::ostream& out) const;
};

// Nodes, levels, source points and edges; init_feature left empty.
EvidenceGraph build_graph_structure(const DeliberationResult& result, const EmotionTree& tree, const KnowledgeBase& kb,
                                    const FusionWeights& w, double proximity_threshold);

// Full construction including initial node features.
EvidenceGraph build_graph(const DeliberationResult& result, const EmotionTree& tree, const KnowledgeBase& kb,
                          const FusionWeights& w, const GraphEmbeddingTables& tables, double proximity_threshold);

// Initial node features on a tape (N x d_g): log-map of the node point,
// padded or truncated to d_g, plus type and level rows. `prototypes` holds
// the tree's tangent parameters; evidence points are the fused evidence keys.
ad::Var graph_features(const EvidenceGraph& graph, const KnowledgeBase& kb, ad::Var prototypes, ad::Var alpha,
                       ad::Var type_table, ad::Var level_table);

ad::AttentionMask build_mask(const EvidenceGraph& graph);

}  // namespace hyperemo
