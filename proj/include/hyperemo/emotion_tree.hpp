#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hyperemo/autograd.hpp"
#include "hyperemo/poincare.hpp"

namespace hyperemo {

// Position of a node in declaration order. Doubles as the deterministic
// tie-break order everywhere downstream.
using NodeIndex = std::size_t;

// One row of a taxonomy document.
struct TaxonomyRow {
  std::string id;
  std::string label;
  std::string parent_id;  // empty for the root
  int level = 0;
  std::size_t line = 0;
};

struct TreeNode {
  std::string id;
  std::string label;
  std::optional<NodeIndex> parent;
  int level = 0;
  std::vector<NodeIndex> children;
};

// Rooted emotion taxonomy with one learnable prototype per node. Topology is
// fixed after construction; prototype parameters are the rows of
// prototype_params() and live in the tangent space at the origin.
class EmotionTree {
 public:
  // Validates the rows and draws prototype parameters from N(0, (0.01 (level+1))^2).
  static EmotionTree from_rows(std::vector<TaxonomyRow> rows, std::size_t dim, std::uint64_t seed);

  // Taxonomy document grammar, one record per line:
  //   id <TAB> label <TAB> parent_id <TAB> level
  // Blank lines and lines starting with '#' are skipped. parent_id is empty
  // for the root. ASCII only.
  static std::vector<TaxonomyRow> parse(std::istream& in);
  static EmotionTree load(std::istream& in, std::size_t dim, std::uint64_t seed);
  static EmotionTree load_file(const std::filesystem::path& path, std::size_t dim, std::uint64_t seed);
  void write(std::ostream& out) const;

  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  NodeIndex root() const noexcept { return root_; }
  // Number of distinct levels (max level + 1).
  int level_count() const noexcept { return max_level_ + 1; }
  int max_level() const noexcept { return max_level_; }

  const TreeNode& node(NodeIndex n) const;
  NodeIndex index_of(std::string_view id) const;  // throws NotFound
  std::optional<NodeIndex> find(std::string_view id) const;

  std::span<const NodeIndex> children(NodeIndex n) const { return node(n).children; }
  std::vector<NodeIndex> path_to_root(NodeIndex n) const;  // root first
  std::size_t tree_distance(NodeIndex a, NodeIndex b) const;
  bool is_leaf(NodeIndex n) const { return node(n).children.empty(); }
  bool is_ancestor_or_self(NodeIndex ancestor, NodeIndex n) const;
  const std::vector<NodeIndex>& leaves() const noexcept { return leaves_; }
  std::vector<NodeIndex> leaves_under(NodeIndex n) const;
  // Largest number of nodes sharing one level.
  std::size_t max_level_width() const;

  // Exp map of the node's current parameter row; never cached.
  poincare::PoincarePoint prototype(NodeIndex n) const;
  poincare::PoincarePoint prototype(std::string_view id) const { return prototype(index_of(id)); }

  ad::Parameter& prototype_params() noexcept { return prototypes_; }
  const ad::Parameter& prototype_params() const noexcept { return prototypes_; }

 private:
  EmotionTree() = default;

  std::vector<TreeNode> nodes_;
  std::unordered_map<std::string, NodeIndex> by_id_;
  std::vector<NodeIndex> leaves_;
  NodeIndex root_ = 0;
  int max_level_ = 0;
  std::size_t dim_ = 0;
  ad::Parameter prototypes_;
};

}  // namespace hyperemo
