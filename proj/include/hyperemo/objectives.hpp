#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hyperemo/autograd.hpp"
#include "hyperemo/emotion_tree.hpp"
#include "hyperemo/knowledge_base.hpp"
#include "hyperemo/model.hpp"
#include "hyperemo/query_encoder.hpp"

namespace hyperemo {

struct LossWeights {
  double lambda_cont = 0.10;
  double lambda_path = 0.05;

  void validate() const;
};

enum class ContrastiveForm { kPairwiseHinge, kTriplet };

struct ContrastiveConfig {
  double margin_base = 0.5;
  ContrastiveForm form = ContrastiveForm::kPairwiseHinge;
};

struct ContrastiveResult {
  double value = 0.0;
  double positive = 0.0;  // same-label share of value
  double negative = 0.0;  // different-label share of value
  bool degenerate = false;  // batch smaller than 2: loss forced to 0
};

struct ContrastiveVars {
  ad::Var value;  // invalid when degenerate
  double positive = 0.0;
  double negative = 0.0;
  bool degenerate = false;
};

// Sum over t of -log softmax(logits_t)[targets_t].
double task_loss(const Matrix& logits, std::span<const int> targets);
ad::Var task_loss(ad::Var logits, std::span<const int> targets);

// Summed over modalities. queries[m][i] is sample i's point in modality m.
// Pairwise hinge, over ordered pairs i != j and normalized by n (n - 1):
//   same label:      d_H(q_i, q_j)
//   different label: max(0, margin_base * tree_distance - d_H(q_i, q_j))
// Triplet form, averaged over all (anchor, positive, negative) triples:
//   max(0, d_H(a, p) - d_H(a, n) + margin_base * tree_distance(a, n))
// and 0 when no triple exists.
ContrastiveResult contrastive_loss(const std::array<std::vector<poincare::PoincarePoint>, kModalityCount>& queries,
                                   std::span<const NodeIndex> labels, const EmotionTree& tree,
                                   const ContrastiveConfig& cfg = {});
// Tape form; the value is an invalid Var (zero loss) for batches smaller than 2.
ContrastiveVars contrastive_loss(const std::vector<QueryVars>& queries, std::span<const NodeIndex> labels,
                         const EmotionTree& tree, const ContrastiveConfig& cfg = {});

double path_loss(const poincare::PoincarePoint& fused, const poincare::PoincarePoint& prototype);
ad::Var path_loss(ad::Var fused, ad::Var prototype);

double total_loss(double task, double cont, double path, const LossWeights& w);

// Decoupled-weight-decay Adam. Moments are keyed by parameter order.
struct AdamWConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
};

class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  // p <- p (1 - lr wd) - lr m_hat / (sqrt(v_hat) + eps) for trainable p.
  void step(std::span<ad::Parameter* const> params);
  std::uint64_t steps() const noexcept { return t_; }
  const AdamWConfig& config() const noexcept { return cfg_; }

 private:
  AdamWConfig cfg_;
  std::uint64_t t_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

struct TrainingSample {
  std::string id;
  NodeIndex label = 0;  // taxonomy leaf
  ModalityFeatures features;
};

// Dataset document: id <TAB> leaf label <TAB> audio <TAB> visual <TAB> text.
std::vector<TrainingSample> parse_dataset(std::istream& in, const EmotionTree& tree);
std::vector<TrainingSample> read_dataset_file(const std::string& path, const EmotionTree& tree);
void write_dataset(std::ostream& out, std::span<const TrainingSample> samples, const EmotionTree& tree);

enum class PathTarget { kGroundTruth, kSelected };

struct ObjectiveConfig {
  LossWeights weights{};
  ContrastiveConfig contrastive{};
  PathTarget path_target = PathTarget::kGroundTruth;
};

struct BatchLosses {
  double task = 0.0;  // mean over samples
  double cont = 0.0;
  double path = 0.0;  // mean over samples
  double total = 0.0;
  double cont_negative = 0.0;
  bool contrastive_degenerate = false;
};

// Discrete structure for every sample of a batch.
std::vector<SampleStructure> plan_batch(const HyperEmoModel& model, std::span<const TrainingSample* const> batch,
                                        const KnowledgeBase& kb);

struct BatchForward {
  ad::Var total;
  BatchLosses losses;
};

// total = mean task + lambda_cont cont + lambda_path mean path, on `tape`.
BatchForward batch_loss(ad::Tape& tape, HyperEmoModel& model, std::span<const TrainingSample* const> batch,
                        std::span<const SampleStructure> plans, const KnowledgeBase& kb, const ObjectiveConfig& cfg);

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 4;
  bool shuffle = false;  // batches follow dataset order unless set
  std::uint64_t seed = 0;
  AdamWConfig optimizer{};
  ObjectiveConfig objective{};
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double task = 0.0;
  double cont = 0.0;
  double path = 0.0;
  double total = 0.0;
  double cont_negative = 0.0;  // different-label share of cont
};

struct SeparationSummary {
  std::array<double, kModalityCount> same{};
  std::array<double, kModalityCount> different{};
  std::size_t same_pairs = 0;
  std::size_t different_pairs = 0;
};

struct TrainingReport {
  std::vector<EpochRecord> epochs;
  SeparationSummary separation;
  bool contrastive_degenerate = false;  // some batch had no negative pairs

  // Line-delimited records:
  //   "epoch <n> task <x> cont <x> path <x> total <x> cont_negative <x>"
  // followed by one "separation <modality> same <x> different <x>" line each.
  void write(std::ostream& out) const;
};

// Mean same-label and different-label distances over every unordered pair.
SeparationSummary separation_summary(const QueryEncoder& encoder, std::span<const TrainingSample> samples);

// Epoch losses are averages over batches of the pre-update batch losses.
// Throws NumericalFailure carrying the step index on a non-finite loss.
TrainingReport train_toy(HyperEmoModel& model, std::span<const TrainingSample> dataset, const KnowledgeBase& kb,
                         const TrainConfig& cfg, const std::function<void(const EpochRecord&)>& on_epoch = {});

struct GradCheckConfig {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
};

struct TensorGradCheck {
  std::string name;
  std::size_t elements = 0;
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  bool passed = false;
};

// Central differences for every element of every trainable tensor through
// batch_loss, with the discrete structure of each sample held fixed.
std::vector<TensorGradCheck> check_gradients(HyperEmoModel& model, std::span<const TrainingSample> batch,
                                             const KnowledgeBase& kb, const ObjectiveConfig& objective,
                                             const GradCheckConfig& cfg = {});

}  // namespace hyperemo
