#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "hyperemo/emotion_tree.hpp"
#include "hyperemo/knowledge_base.hpp"
#include "hyperemo/objectives.hpp"

namespace hyperemo::synthetic {

// Four coarse emotions with three fine-grained leaves each (17 nodes).
std::vector<TaxonomyRow> fixture_taxonomy();

// Gaussian clusters: one center per (leaf, modality), samples scattered
// around it. Centers ~ N(0, center_scale^2), offsets ~ N(0, noise^2).
struct ClusterConfig {
  std::array<std::size_t, kModalityCount> feature_dims{16, 16, 16};
  std::size_t per_leaf = 5;
  double center_scale = 1.0;
  double noise = 0.15;
  std::uint64_t seed = 0;
};

class ClusterSampler {
 public:
  ClusterSampler(const EmotionTree& tree, const ClusterConfig& cfg);

  ModalityFeatures draw(NodeIndex leaf);
  std::vector<TrainingSample> dataset(std::size_t per_leaf, const char* id_prefix = "s");
  // Raw-feature evidence records, to be mapped through the query heads.
  std::vector<EvidenceRecord> evidence(std::size_t per_leaf);

 private:
  const EmotionTree* tree_;
  ClusterConfig cfg_;
  std::mt19937_64 rng_;
  std::vector<std::array<std::vector<double>, kModalityCount>> centers_;  // by NodeIndex
};

}  // namespace hyperemo::synthetic
