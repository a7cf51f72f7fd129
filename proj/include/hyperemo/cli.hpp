#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "hyperemo/emotion_tree.hpp"
#include "hyperemo/knowledge_base.hpp"
#include "hyperemo/model.hpp"
#include "hyperemo/objectives.hpp"

namespace hyperemo::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericalFailure = 3 };

struct EngineConfig {
  ModelConfig model{};
  LossWeights weights{};
  double margin_base = 0.5;
  std::filesystem::path taxonomy;    // empty: built-in 17-node fixture
  std::filesystem::path kb;          // empty: no evidence
  std::filesystem::path checkpoint;  // empty: parameters drawn from the seed

  // Throws InvalidInput on the first violated constraint.
  void validate() const;
};

// Features document: id <TAB> audio <TAB> visual <TAB> text.
struct FeatureRecord {
  std::string id;
  ModalityFeatures features;
  std::size_t line = 0;
};

std::vector<FeatureRecord> parse_features(std::istream& in);
std::vector<FeatureRecord> read_features_file(const std::filesystem::path& path);
void write_features(std::ostream& out, std::span<const FeatureRecord> records);

EmotionTree load_taxonomy(const EngineConfig& cfg);
// Seeded initialisation, then the checkpoint when one is configured.
HyperEmoModel load_model(const EngineConfig& cfg);
KnowledgeBase load_kb(const EngineConfig& cfg, const EmotionTree& tree);

struct BuildKbOptions {
  std::filesystem::path records;
  std::filesystem::path out;
  bool map_through_heads = false;
};
// Writes the snapshot and prints the item count and per-leaf histogram.
void cmd_build_kb(const EngineConfig& cfg, const BuildKbOptions& opt, std::ostream& out);

struct DeliberateOptions {
  std::filesystem::path features;
  bool json = false;
  bool dump_graph = false;
  bool dump_sequence = false;
};
void cmd_deliberate(const EngineConfig& cfg, const DeliberateOptions& opt, std::ostream& out);

struct TrainOptions {
  std::filesystem::path dataset;  // empty: synthetic clusters
  std::size_t per_leaf = 5;
  std::size_t evidence_per_leaf = 2;
  std::size_t epochs = 30;
  std::size_t batch_size = 4;
  double learning_rate = 1e-3;
  bool shuffle = false;
  std::filesystem::path save;  // checkpoint output, optional
};
void cmd_train_toy(const EngineConfig& cfg, const TrainOptions& opt, std::ostream& out);

// Returns true when every tensor passes.
bool cmd_check_grads(const EngineConfig& cfg, const GradCheckConfig& check, std::ostream& out);

struct SweepOptions {
  std::string axis;  // k, Q, lambda_cont or lambda_path
  std::vector<double> values;
  TrainOptions train{};
};
void cmd_sweep(const EngineConfig& cfg, const SweepOptions& opt, std::ostream& out);

struct SynthOptions {
  std::filesystem::path out_dir;
  std::size_t per_leaf = 5;
  std::size_t evidence_per_leaf = 2;
  std::size_t queries_per_leaf = 1;
  double noise = 0.15;
};
// Writes taxonomy.tsv, dataset.tsv, evidence.tsv (raw features) and queries.tsv.
void cmd_synth(const EngineConfig& cfg, const SynthOptions& opt, std::ostream& out);

// Full command-line entry point; returns an ExitCode.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hyperemo::cli
