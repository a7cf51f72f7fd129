#include "hyperemo/deliberation.hpp"

#include <algorithm>

#include "hyperemo/errors.hpp"

namespace hyperemo {

void BeamConfig::validate() const {
  if (beam_width == 0) throw InvalidInput("beam width must be at least 1");
  if (top_k == 0) throw InvalidInput("top_k must be at least 1");
}

std::vector<NodeIndex> BeamSearchResult::final_beam() const {
  std::vector<NodeIndex> out;
  if (level_beams.empty()) return out;
  for (const auto& s : level_beams.back()) out.push_back(s.node);
  return out;
}

double score_node(const EmotionTree& tree, NodeIndex node, const poincare::PoincarePoint& fused) {
  return poincare::geodesic_distance(fused, tree.prototype(node));
}

BeamSearchResult beam_search(const EmotionTree& tree, const poincare::PoincarePoint& fused, const BeamConfig& cfg) {
  cfg.validate();
  if (fused.dim() != tree.dim()) throw DimensionMismatch("fused query", tree.dim(), fused.dim());
  if (tree.children(tree.root()).empty()) throw InvalidInput("beam search needs at least one level below the root");

  const auto by_score = [](const ScoredNode& a, const ScoredNode& b) {
    return a.score < b.score || (a.score == b.score && a.node < b.node);
  };

  BeamSearchResult result;
  std::vector<NodeIndex> pool(tree.children(tree.root()).begin(), tree.children(tree.root()).end());
  for (int level = 1; level <= tree.max_level(); ++level) {
    std::vector<ScoredNode> scored;
    scored.reserve(pool.size());
    for (NodeIndex n : pool) scored.push_back({n, score_node(tree, n, fused)});
    const std::size_t keep = std::min(cfg.beam_width, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), by_score);
    scored.resize(keep);
    result.level_beams.push_back(scored);

    pool.clear();
    for (const auto& s : scored) {
      const auto kids = tree.children(s.node);
      if (kids.empty()) {
        pool.push_back(s.node);
      } else {
        pool.insert(pool.end(), kids.begin(), kids.end());
      }
    }
  }

  result.selected_leaf = result.level_beams.back().front().node;
  result.path = tree.path_to_root(result.selected_leaf);
  return result;
}

DeliberationResult deliberate(const EmotionTree& tree, const KnowledgeBase& kb, const SampleQueries& qs,
                              const FusionWeights& w, const BeamConfig& cfg) {
  if (!kb.empty() && kb.dim() != tree.dim()) throw DimensionMismatch("knowledge base vs taxonomy", tree.dim(), kb.dim());
  auto search = beam_search(tree, qs.fused, cfg);

  DeliberationResult out;
  out.final_beam = search.final_beam();
  std::vector<NodeIndex> leaves;
  for (NodeIndex n : out.final_beam) {
    const auto under = tree.leaves_under(n);
    leaves.insert(leaves.end(), under.begin(), under.end());
  }
  out.evidence = top_k_in_leaves(kb, leaves, qs, w.alpha(), cfg.top_k);
  out.selected_leaf = search.selected_leaf;
  out.selected_prototype = tree.prototype(search.selected_leaf);
  out.path = std::move(search.path);
  out.level_beams = std::move(search.level_beams);
  return out;
}

}  // namespace hyperemo
