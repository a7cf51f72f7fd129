#include "hyperemo/emotion_tree.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <unordered_set>

#include "hyperemo/errors.hpp"
#include "hyperemo/text_io.hpp"

namespace hyperemo {

std::vector<TaxonomyRow> EmotionTree::parse(std::istream& in) {
  std::vector<TaxonomyRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::is_skippable(line)) continue;
    if (!text::is_ascii(line)) throw LoadError("non-ASCII byte in taxonomy record", line_no);
    const auto fields = text::split_tabs(text::strip_cr(line));
    if (fields.size() != 4) {
      throw LoadError("taxonomy record needs 4 tab-separated fields, found " + std::to_string(fields.size()),
                      line_no);
    }
    TaxonomyRow row;
    row.id = std::string(fields[0]);
    row.label = std::string(fields[1]);
    row.parent_id = std::string(fields[2]);
    row.line = line_no;
    if (row.id.empty()) throw LoadError("empty node id", line_no);
    const auto lv = fields[3];
    auto [ptr, ec] = std::from_chars(lv.data(), lv.data() + lv.size(), row.level);
    if (ec != std::errc{} || ptr != lv.data() + lv.size() || row.level < 0) {
      throw LoadError("level must be a non-negative integer", line_no, row.id);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

EmotionTree EmotionTree::from_rows(std::vector<TaxonomyRow> rows, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw InvalidInput("prototype dimension must be positive");
  EmotionTree tree;
  tree.dim_ = dim;
  tree.nodes_.reserve(rows.size());
  for (const auto& r : rows) {
    if (tree.by_id_.contains(r.id)) throw LoadError("duplicate node id", r.line, r.id);
    tree.by_id_.emplace(r.id, tree.nodes_.size());
    tree.nodes_.push_back(TreeNode{r.id, r.label, std::nullopt, r.level, {}});
  }

  std::optional<NodeIndex> root;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.parent_id.empty()) {
      if (root) throw LoadError("more than one root", r.line, r.id);
      root = i;
      continue;
    }
    auto it = tree.by_id_.find(r.parent_id);
    if (it == tree.by_id_.end()) throw LoadError("parent '" + r.parent_id + "' does not exist", r.line, r.id);
    if (it->second == i) throw LoadError("node is its own parent", r.line, r.id);
    tree.nodes_[i].parent = it->second;
    tree.nodes_[it->second].children.push_back(i);
  }
  if (!root) throw LoadError("taxonomy has no root");
  tree.root_ = *root;

  // Everything must hang off the root; anything else sits on a cycle.
  std::vector<bool> seen(tree.nodes_.size(), false);
  std::vector<NodeIndex> stack{tree.root_};
  seen[tree.root_] = true;
  while (!stack.empty()) {
    const NodeIndex n = stack.back();
    stack.pop_back();
    for (NodeIndex c : tree.nodes_[n].children) {
      seen[c] = true;
      stack.push_back(c);
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) throw LoadError("node lies on a parent cycle", rows[i].line, rows[i].id);
  }

  if (tree.nodes_[tree.root_].level != 0) {
    throw LoadError("root must have level 0", rows[tree.root_].line, rows[tree.root_].id);
  }
  std::unordered_set<std::string> level_labels;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& n = tree.nodes_[i];
    if (n.parent && n.level != tree.nodes_[*n.parent].level + 1) {
      throw LoadError("level must be parent level + 1", rows[i].line, rows[i].id);
    }
    if (!level_labels.insert(std::to_string(n.level) + '\t' + n.label).second) {
      throw LoadError("label repeated within level " + std::to_string(n.level), rows[i].line, rows[i].id);
    }
    tree.max_level_ = std::max(tree.max_level_, n.level);
    if (n.children.empty()) tree.leaves_.push_back(i);
  }

  Matrix z(tree.nodes_.size(), dim);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < tree.nodes_.size(); ++i) {
    const double sd = 0.01 * (tree.nodes_[i].level + 1);
    for (std::size_t c = 0; c < dim; ++c) z(i, c) = sd * normal(rng);
  }
  tree.prototypes_ = ad::Parameter("tree.prototypes", std::move(z));
  return tree;
}

EmotionTree EmotionTree::load(std::istream& in, std::size_t dim, std::uint64_t seed) {
  return from_rows(parse(in), dim, seed);
}

EmotionTree EmotionTree::load_file(const std::filesystem::path& path, std::size_t dim, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open taxonomy file " + path.string());
  return load(in, dim, seed);
}

void EmotionTree::write(std::ostream& out) const {
  for (const auto& n : nodes_) {
    out << n.id << '\t' << n.label << '\t' << (n.parent ? nodes_[*n.parent].id : std::string{}) << '\t' << n.level
        << '\n';
  }
}

const TreeNode& EmotionTree::node(NodeIndex n) const {
  if (n >= nodes_.size()) throw NotFound("node index " + std::to_string(n) + " out of range");
  return nodes_[n];
}

std::optional<NodeIndex> EmotionTree::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

NodeIndex EmotionTree::index_of(std::string_view id) const {
  if (auto n = find(id)) return *n;
  throw NotFound("unknown emotion node '" + std::string(id) + "'");
}

std::vector<NodeIndex> EmotionTree::path_to_root(NodeIndex n) const {
  node(n);
  std::vector<NodeIndex> path;
  for (std::optional<NodeIndex> cur = n; cur; cur = nodes_[*cur].parent) path.push_back(*cur);
  std::reverse(path.begin(), path.end());
  return path;
}

std::size_t EmotionTree::tree_distance(NodeIndex a, NodeIndex b) const {
  node(a);
  node(b);
  std::size_t dist = 0;
  while (a != b) {
    if (nodes_[a].level >= nodes_[b].level) {
      a = *nodes_[a].parent;
    } else {
      b = *nodes_[b].parent;
    }
    ++dist;
  }
  return dist;
}

bool EmotionTree::is_ancestor_or_self(NodeIndex ancestor, NodeIndex n) const {
  node(ancestor);
  node(n);
  for (std::optional<NodeIndex> cur = n; cur; cur = nodes_[*cur].parent) {
    if (*cur == ancestor) return true;
  }
  return false;
}

std::vector<NodeIndex> EmotionTree::leaves_under(NodeIndex n) const {
  std::vector<NodeIndex> out;
  for (NodeIndex leaf : leaves_) {
    if (is_ancestor_or_self(n, leaf)) out.push_back(leaf);
  }
  return out;
}

std::size_t EmotionTree::max_level_width() const {
  std::vector<std::size_t> width(static_cast<std::size_t>(max_level_) + 1, 0);
  for (const auto& n : nodes_) ++width[static_cast<std::size_t>(n.level)];
  return *std::max_element(width.begin(), width.end());
}

poincare::PoincarePoint EmotionTree::prototype(NodeIndex n) const {
  node(n);
  std::vector<double> out(dim_);
  poincare::exp_map_into(prototypes_.value.row_span(n), out);
  return poincare::PoincarePoint(std::move(out));
}

}  // namespace hyperemo
