#pragma once

#include <cstddef>
#include <vector>

#include "hyperemo/emotion_tree.hpp"
#include "hyperemo/knowledge_base.hpp"
#include "hyperemo/poincare.hpp"
#include "hyperemo/query_encoder.hpp"

namespace hyperemo {

struct BeamConfig {
  std::size_t beam_width = 3;
  std::size_t top_k = 5;

  void validate() const;
};

struct ScoredNode {
  NodeIndex node = 0;
  double score = 0.0;

  friend bool operator==(const ScoredNode&, const ScoredNode&) = default;
};

struct BeamSearchResult {
  std::vector<NodeIndex> path;  // root first, ends at selected_leaf
  NodeIndex selected_leaf = 0;
  // level_beams[l - 1] is the beam kept at level l, ascending by score.
  std::vector<std::vector<ScoredNode>> level_beams;

  // Nodes of the deepest beam; the evidence pool hangs off these.
  std::vector<NodeIndex> final_beam() const;
};

struct DeliberationResult {
  std::vector<NodeIndex> path;
  NodeIndex selected_leaf = 0;
  poincare::PoincarePoint selected_prototype;
  std::vector<ScoredItem> evidence;
  std::vector<std::vector<ScoredNode>> level_beams;
  std::vector<NodeIndex> final_beam;
};

// Geodesic distance between the fused query and the node prototype.
double score_node(const EmotionTree& tree, NodeIndex node, const poincare::PoincarePoint& fused);

// Level-by-level beam search over the taxonomy. Each level keeps the
// beam_width lowest-scoring candidates (ties by node index); nodes that run
// out of children early are carried into the next level's pool unchanged.
// The selected leaf is the best candidate of the deepest level.
BeamSearchResult beam_search(const EmotionTree& tree, const poincare::PoincarePoint& fused, const BeamConfig& cfg);

// beam_search on the fused query, then exact top-k evidence restricted to
// leaves under the final beam, ranked with the modality-specific queries.
DeliberationResult deliberate(const EmotionTree& tree, const KnowledgeBase& kb, const SampleQueries& qs,
                              const FusionWeights& w, const BeamConfig& cfg);

}  // namespace hyperemo
