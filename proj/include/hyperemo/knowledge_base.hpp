#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hyperemo/emotion_tree.hpp"
#include "hyperemo/poincare.hpp"
#include "hyperemo/query_encoder.hpp"

namespace hyperemo {

// One parsed line of an evidence document:
//   id <TAB> label <TAB> audio <TAB> visual <TAB> text <TAB> caption
// The three vectors are comma-separated reals. The caption is the rest of
// the line and may be empty (the sixth field may then be omitted).
struct EvidenceRecord {
  std::string id;
  std::string label;
  std::array<std::vector<double>, kModalityCount> vectors;
  std::string caption;
  std::size_t line = 0;
};

std::vector<EvidenceRecord> parse_evidence(std::istream& in);
std::vector<EvidenceRecord> read_evidence_file(const std::filesystem::path& path);
void write_evidence(std::ostream& out, std::span<const EvidenceRecord> records);

struct KnowledgeItem {
  std::string id;
  NodeIndex leaf = 0;
  std::array<poincare::PoincarePoint, kModalityCount> keys;  // audio, visual, text
  std::string caption;

  const poincare::PoincarePoint& key(Modality m) const { return keys[static_cast<std::size_t>(m)]; }
};

// Offline evidence store. Immutable after construction.
class KnowledgeBase {
 public:
  // Vectors are taken as ball points directly.
  static KnowledgeBase build(std::span<const EvidenceRecord> records, const EmotionTree& tree);
  // Vectors are raw modality features, mapped through the encoder's heads.
  static KnowledgeBase build_through_heads(std::span<const EvidenceRecord> records, const EmotionTree& tree,
                                           const QueryEncoder& encoder);

  // Binary snapshot: "HEKB", version byte, u32 d_h, u64 count, then
  // fixed-width records (id[64], label[64], caption[256], 3 d_h f64).
  // Integers and doubles are little-endian.
  void write_snapshot(std::ostream& out, const EmotionTree& tree) const;
  static KnowledgeBase read_snapshot(std::istream& in, const EmotionTree& tree);
  static KnowledgeBase read_snapshot_file(const std::filesystem::path& path, const EmotionTree& tree);

  std::size_t size() const noexcept { return items_.size(); }
  bool empty() const noexcept { return items_.empty(); }
  std::size_t dim() const noexcept { return dim_; }
  const KnowledgeItem& item(std::size_t i) const { return items_.at(i); }
  const std::vector<KnowledgeItem>& items() const noexcept { return items_; }
  // Item indices labelled with `leaf`, in declaration order.
  std::span<const std::size_t> by_leaf(NodeIndex leaf) const;

 private:
  static KnowledgeBase assemble(std::vector<KnowledgeItem> items, const EmotionTree& tree);

  std::vector<KnowledgeItem> items_;
  std::vector<std::vector<std::size_t>> by_leaf_;  // indexed by NodeIndex
  std::size_t dim_ = 0;
};

inline constexpr std::size_t kSnapshotIdWidth = 64;
inline constexpr std::size_t kSnapshotLabelWidth = 64;
inline constexpr std::size_t kSnapshotCaptionWidth = 256;

// D_i = sum_m alpha_m d_H(q_m, k_i^m).
double retrieval_distance(const KnowledgeItem& item, const SampleQueries& qs,
                          const std::array<double, kModalityCount>& alpha);
double retrieval_distance(const KnowledgeItem& item, const SampleQueries& qs, const FusionWeights& w);

struct ScoredItem {
  std::size_t item = 0;  // index into the knowledge base
  double distance = 0.0;

  friend bool operator==(const ScoredItem&, const ScoredItem&) = default;
};

// Exact scan: the k smallest distances among items labelled with one of
// `leaves`, ascending, ties by item index.
std::vector<ScoredItem> top_k_in_leaves(const KnowledgeBase& kb, std::span<const NodeIndex> leaves,
                                        const SampleQueries& qs, const std::array<double, kModalityCount>& alpha,
                                        std::size_t k);

}  // namespace hyperemo
