#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hyperemo/autograd.hpp"

namespace hyperemo {

enum class Segment { kBos, kMmOpen, kFusion, kText, kMmClose, kGraph, kTask, kLabel };

std::string_view segment_name(Segment s);

// Rows of the language-model input, tagged by segment. Order is always
// bos, mm_open, fusion, text, mm_close, graph, task [, label].
struct PromptSequence {
  std::vector<std::pair<Segment, Matrix>> segments;

  std::size_t length() const;
  std::size_t width() const;
  bool has_label() const;
  Matrix rows() const;
  std::size_t segment_rows(Segment s) const;

  // One line per segment: "<tag> <rows> <checksum hex>".
  void dump(std::ostream& out) const;
};

// Trainable marker rows: <bos>, <Multimodal>, </Multimodal>.
struct MarkerEmbeddings {
  static MarkerEmbeddings init(std::size_t width, std::mt19937_64& rng);
  std::size_t width() const { return rows.value.cols(); }

  ad::Parameter rows;  // 3 x d_llm
};

inline constexpr std::size_t kBosRow = 0;
inline constexpr std::size_t kMmOpenRow = 1;
inline constexpr std::size_t kMmCloseRow = 2;

// Value-level assembly; throws DimensionMismatch naming the segment on a
// width mismatch. `expected_graph_rows` (when given) pins the graph segment.
PromptSequence assemble(const Matrix& fusion_rows, const Matrix& text_rows, const Matrix& graph_tokens,
                        const Matrix& task_rows, const Matrix& markers, const std::optional<Matrix>& label_rows,
                        std::optional<std::size_t> expected_graph_rows = std::nullopt);

// Tape form. Empty segments may be passed as invalid Vars.
struct AssembledVars {
  ad::Var rows;
  std::vector<std::pair<Segment, std::size_t>> layout;  // segment and row count

  std::size_t input_length() const;  // rows before the label segment
};

AssembledVars assemble(ad::Var fusion_rows, ad::Var text_rows, ad::Var graph_tokens, ad::Var task_rows,
                       ad::Var markers, ad::Var label_rows);

// Frozen language model seen only through its input rows and output logits.
class SequenceConsumer {
 public:
  virtual ~SequenceConsumer() = default;

  virtual std::size_t vocab_size() const = 0;
  virtual std::size_t width() const = 0;
  // Row i holds next-token logits after reading rows 0..i. Differentiable
  // with respect to `rows` only.
  virtual ad::Var logits(ad::Var rows) const = 0;
  virtual Matrix token_embeddings(std::span<const int> tokens) const = 0;
};

// Frozen single-layer token classifier over the running mean of the rows.
// Vocabulary: the taxonomy leaf labels, then "+", "-", "0".."9", "<task>",
// "<eos>".
class MockLanguageModel final : public SequenceConsumer {
 public:
  MockLanguageModel(std::vector<std::string> leaf_labels, std::size_t width, std::mt19937_64& rng);

  std::size_t vocab_size() const override { return vocab_.size(); }
  std::size_t width() const override { return embedding_.value.cols(); }
  ad::Var logits(ad::Var rows) const override;
  Matrix token_embeddings(std::span<const int> tokens) const override;

  const std::vector<std::string>& vocabulary() const noexcept { return vocab_; }
  int token_id(std::string_view token) const;  // throws NotFound
  std::size_t leaf_token_count() const noexcept { return leaf_count_; }
  int task_token() const { return token_id("<task>"); }
  int eos_token() const { return token_id("<eos>"); }

  // Zero classifier weights: logits no longer depend on the input.
  void silence();

  std::vector<ad::Parameter*> parameters();

 private:
  std::vector<std::string> vocab_;
  std::size_t leaf_count_;
  // Mutable only so logits() can bind them (frozen) to a tape.
  mutable ad::Parameter embedding_;   // V x d_llm
  mutable ad::Parameter classifier_;  // V x d_llm
  mutable ad::Parameter bias_;        // 1 x V
};

// Runs the consumer on an assembled value sequence.
Matrix run_consumer(const PromptSequence& seq, const SequenceConsumer& consumer);

}  // namespace hyperemo
