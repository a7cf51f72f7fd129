#include "hyperemo/synthetic.hpp"

#include <random>
#include <string>

namespace hyperemo::synthetic {

std::vector<TaxonomyRow> fixture_taxonomy() {
  std::vector<TaxonomyRow> rows;
  rows.push_back({"emotion", "emotion", "", 0, 0});
  const std::array<std::pair<const char*, std::array<const char*, 3>>, 4> groups = {{
      {"joy", {"happy", "excited", "content"}},
      {"sadness", {"grief", "lonely", "disappointed"}},
      {"anger", {"furious", "annoyed", "resentful"}},
      {"fear", {"anxious", "scared", "nervous"}},
  }};
  for (const auto& [coarse, leaves] : groups) rows.push_back({coarse, coarse, "emotion", 1, 0});
  for (const auto& [coarse, leaves] : groups) {
    for (const char* leaf : leaves) rows.push_back({leaf, leaf, coarse, 2, 0});
  }
  return rows;
}

ClusterSampler::ClusterSampler(const EmotionTree& tree, const ClusterConfig& cfg)
    : tree_(&tree), cfg_(cfg), rng_(cfg.seed), centers_(tree.size()) {
  std::normal_distribution<double> normal(0.0, cfg.center_scale);
  for (NodeIndex leaf : tree.leaves()) {
    for (std::size_t m = 0; m < kModalityCount; ++m) {
      auto& c = centers_[leaf][m];
      c.resize(cfg.feature_dims[m]);
      for (auto& x : c) x = normal(rng_);
    }
  }
}

ModalityFeatures ClusterSampler::draw(NodeIndex leaf) {
  std::normal_distribution<double> normal(0.0, cfg_.noise);
  ModalityFeatures f;
  for (std::size_t m = 0; m < kModalityCount; ++m) {
    f.values[m] = centers_.at(leaf)[m];
    for (auto& x : f.values[m]) x += normal(rng_);
  }
  return f;
}

std::vector<TrainingSample> ClusterSampler::dataset(std::size_t per_leaf, const char* id_prefix) {
  std::vector<TrainingSample> out;
  std::size_t n = 0;
  for (NodeIndex leaf : tree_->leaves()) {
    for (std::size_t i = 0; i < per_leaf; ++i) {
      out.push_back(TrainingSample{std::string(id_prefix) + std::to_string(n++), leaf, draw(leaf)});
    }
  }
  return out;
}

std::vector<EvidenceRecord> ClusterSampler::evidence(std::size_t per_leaf) {
  std::vector<EvidenceRecord> out;
  std::size_t n = 0;
  for (NodeIndex leaf : tree_->leaves()) {
    for (std::size_t i = 0; i < per_leaf; ++i) {
      EvidenceRecord r;
      r.id = "ev" + std::to_string(n++);
      r.label = tree_->node(leaf).id;
      r.vectors = draw(leaf).values;
      r.caption = "synthetic " + tree_->node(leaf).label + " clip " + std::to_string(i);
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace hyperemo::synthetic
