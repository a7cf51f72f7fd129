#include "hyperemo/knowledge_base.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include "hyperemo/errors.hpp"
#include "hyperemo/text_io.hpp"

namespace hyperemo {

std::vector<EvidenceRecord> parse_evidence(std::istream& in) {
  std::vector<EvidenceRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::is_skippable(line)) continue;
    if (!text::is_ascii(line)) throw LoadError("non-ASCII byte in evidence record", line_no);
    const auto fields = text::split_tabs(text::strip_cr(line), 6);
    if (fields.size() < 5) {
      throw LoadError("evidence record needs id, label, audio, visual, text[, caption]", line_no);
    }
    EvidenceRecord rec;
    rec.id = std::string(fields[0]);
    rec.label = std::string(fields[1]);
    rec.line = line_no;
    if (rec.id.empty()) throw LoadError("empty evidence id", line_no);
    for (std::size_t m = 0; m < kModalityCount; ++m) {
      rec.vectors[m] = text::parse_reals(fields[2 + m], line_no, kModalityNames[m]);
    }
    if (fields.size() == 6) rec.caption = std::string(fields[5]);
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<EvidenceRecord> read_evidence_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open evidence file " + path.string());
  return parse_evidence(in);
}

void write_evidence(std::ostream& out, std::span<const EvidenceRecord> records) {
  for (const auto& r : records) {
    out << r.id << '\t' << r.label;
    for (const auto& v : r.vectors) out << '\t' << text::format_reals(v.data(), v.size());
    out << '\t' << r.caption << '\n';
  }
}

namespace {

NodeIndex resolve_leaf(const EmotionTree& tree, const std::string& label, std::size_t line, const std::string& id) {
  auto n = tree.find(label);
  if (!n) throw LoadError("unknown label '" + label + "'", line, id);
  if (!tree.is_leaf(*n)) throw LoadError("label '" + label + "' is not a leaf", line, id);
  return *n;
}

poincare::PoincarePoint to_point(const std::vector<double>& v, std::size_t dim, std::size_t line,
                                 const std::string& id, std::size_t modality) {
  if (v.size() != dim) {
    throw LoadError(std::string(kModalityNames[modality]) + " vector has dimension " + std::to_string(v.size()) +
                        ", expected " + std::to_string(dim),
                    line, id);
  }
  try {
    return poincare::PoincarePoint(v);
  } catch (const Error& e) {
    throw LoadError(std::string(kModalityNames[modality]) + " embedding: " + e.what(), line, id);
  }
}

}  // namespace

KnowledgeBase KnowledgeBase::assemble(std::vector<KnowledgeItem> items, const EmotionTree& tree) {
  KnowledgeBase kb;
  kb.dim_ = tree.dim();
  kb.by_leaf_.assign(tree.size(), {});
  for (std::size_t i = 0; i < items.size(); ++i) kb.by_leaf_[items[i].leaf].push_back(i);
  kb.items_ = std::move(items);
  return kb;
}

KnowledgeBase KnowledgeBase::build(std::span<const EvidenceRecord> records, const EmotionTree& tree) {
  std::vector<KnowledgeItem> items;
  items.reserve(records.size());
  std::unordered_set<std::string> ids;
  for (const auto& r : records) {
    if (!ids.insert(r.id).second) throw LoadError("duplicate evidence id", r.line, r.id);
    KnowledgeItem it;
    it.id = r.id;
    it.leaf = resolve_leaf(tree, r.label, r.line, r.id);
    for (std::size_t m = 0; m < kModalityCount; ++m) it.keys[m] = to_point(r.vectors[m], tree.dim(), r.line, r.id, m);
    it.caption = r.caption;
    items.push_back(std::move(it));
  }
  return assemble(std::move(items), tree);
}

KnowledgeBase KnowledgeBase::build_through_heads(std::span<const EvidenceRecord> records, const EmotionTree& tree,
                                                 const QueryEncoder& encoder) {
  if (encoder.dim() != tree.dim()) throw DimensionMismatch("encoder vs taxonomy", tree.dim(), encoder.dim());
  std::vector<KnowledgeItem> items;
  items.reserve(records.size());
  std::unordered_set<std::string> ids;
  for (const auto& r : records) {
    if (!ids.insert(r.id).second) throw LoadError("duplicate evidence id", r.line, r.id);
    KnowledgeItem it;
    it.id = r.id;
    it.leaf = resolve_leaf(tree, r.label, r.line, r.id);
    for (std::size_t m = 0; m < kModalityCount; ++m) {
      const auto& head = encoder.head(kModalities[m]);
      if (r.vectors[m].size() != head.in_dim()) {
        throw LoadError(std::string(kModalityNames[m]) + " feature has dimension " +
                            std::to_string(r.vectors[m].size()) + ", expected " + std::to_string(head.in_dim()),
                        r.line, r.id);
      }
      it.keys[m] = project_modality(head, r.vectors[m]);
    }
    it.caption = r.caption;
    items.push_back(std::move(it));
  }
  return assemble(std::move(items), tree);
}

std::span<const std::size_t> KnowledgeBase::by_leaf(NodeIndex leaf) const {
  if (leaf >= by_leaf_.size()) return {};
  return by_leaf_[leaf];
}

namespace {

constexpr char kMagic[4] = {'H', 'E', 'K', 'B'};
constexpr std::uint8_t kSnapshotVersion = 1;

template <class T>
void put_le(std::ostream& out, T v) {
  static_assert(std::is_unsigned_v<T>);
  char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes, sizeof(T));
}

template <class T>
T get_le(std::istream& in, const char* what) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw LoadError(std::string("truncated snapshot: ") + what);
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes[i]) << (8 * i);
  return v;
}

void put_fixed(std::ostream& out, const std::string& s, std::size_t width, const char* what) {
  if (s.size() >= width) {
    throw InvalidInput(std::string(what) + " '" + s + "' does not fit the " + std::to_string(width - 1) +
                       "-byte snapshot field");
  }
  std::string buf(width, '\0');
  std::memcpy(buf.data(), s.data(), s.size());
  out.write(buf.data(), static_cast<std::streamsize>(width));
}

std::string get_fixed(std::istream& in, std::size_t width, const char* what) {
  std::string buf(width, '\0');
  if (!in.read(buf.data(), static_cast<std::streamsize>(width))) {
    throw LoadError(std::string("truncated snapshot: ") + what);
  }
  buf.resize(std::strlen(buf.c_str()));
  return buf;
}

}  // namespace

void KnowledgeBase::write_snapshot(std::ostream& out, const EmotionTree& tree) const {
  out.write(kMagic, 4);
  put_le<std::uint8_t>(out, kSnapshotVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dim_));
  put_le<std::uint64_t>(out, items_.size());
  for (const auto& it : items_) {
    put_fixed(out, it.id, kSnapshotIdWidth, "evidence id");
    put_fixed(out, tree.node(it.leaf).id, kSnapshotLabelWidth, "label");
    put_fixed(out, it.caption, kSnapshotCaptionWidth, "caption");
    for (const auto& key : it.keys) {
      for (double v : key.coords()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
  }
}

KnowledgeBase KnowledgeBase::read_snapshot(std::istream& in, const EmotionTree& tree) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw LoadError("not a knowledge-base snapshot");
  const auto version = get_le<std::uint8_t>(in, "version");
  if (version != kSnapshotVersion) throw LoadError("unsupported snapshot version " + std::to_string(version));
  const auto dim = get_le<std::uint32_t>(in, "dimension");
  if (dim != tree.dim()) {
    throw LoadError("snapshot dimension " + std::to_string(dim) + " does not match " + std::to_string(tree.dim()));
  }
  const auto count = get_le<std::uint64_t>(in, "item count");
  std::vector<EvidenceRecord> records;
  records.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));
  for (std::uint64_t i = 0; i < count; ++i) {
    EvidenceRecord r;
    r.line = static_cast<std::size_t>(i + 1);
    r.id = get_fixed(in, kSnapshotIdWidth, "id");
    r.label = get_fixed(in, kSnapshotLabelWidth, "label");
    r.caption = get_fixed(in, kSnapshotCaptionWidth, "caption");
    for (auto& v : r.vectors) {
      v.resize(dim);
      for (auto& x : v) x = std::bit_cast<double>(get_le<std::uint64_t>(in, "embedding"));
    }
    records.push_back(std::move(r));
  }
  return build(records, tree);
}

KnowledgeBase KnowledgeBase::read_snapshot_file(const std::filesystem::path& path, const EmotionTree& tree) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open snapshot " + path.string());
  return read_snapshot(in, tree);
}

double retrieval_distance(const KnowledgeItem& item, const SampleQueries& qs,
                          const std::array<double, kModalityCount>& alpha) {
  double d = 0.0;
  for (std::size_t m = 0; m < kModalityCount; ++m) {
    d += alpha[m] * poincare::geodesic_distance(qs[kModalities[m]], item.keys[m]);
  }
  return d;
}

double retrieval_distance(const KnowledgeItem& item, const SampleQueries& qs, const FusionWeights& w) {
  return retrieval_distance(item, qs, w.alpha());
}

std::vector<ScoredItem> top_k_in_leaves(const KnowledgeBase& kb, std::span<const NodeIndex> leaves,
                                        const SampleQueries& qs, const std::array<double, kModalityCount>& alpha,
                                        std::size_t k) {
  if (k == 0) throw InvalidInput("top_k must be at least 1");
  std::vector<std::size_t> pool;
  for (NodeIndex leaf : leaves) {
    const auto bucket = kb.by_leaf(leaf);
    pool.insert(pool.end(), bucket.begin(), bucket.end());
  }
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());

  std::vector<ScoredItem> scored;
  scored.reserve(pool.size());
  for (std::size_t i : pool) scored.push_back({i, retrieval_distance(kb.item(i), qs, alpha)});
  const auto by_distance = [](const ScoredItem& a, const ScoredItem& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.item < b.item);
  };
  const std::size_t keep = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), by_distance);
  scored.resize(keep);
  return scored;
}

}  // namespace hyperemo
