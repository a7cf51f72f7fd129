#include "hyperemo/evidence_graph.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>

#include "hyperemo/errors.hpp"
#include "hyperemo/text_io.hpp"

namespace hyperemo {

GraphEmbeddingTables GraphEmbeddingTables::init(std::size_t level_rows, std::size_t feature_dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 0.02);
  Matrix type(2, feature_dim);
  for (auto& x : type.storage()) x = normal(rng);
  Matrix level(level_rows, feature_dim);
  for (auto& x : level.storage()) x = normal(rng);
  return GraphEmbeddingTables{ad::Parameter("graph.type_table", std::move(type)),
                              ad::Parameter("graph.level_table", std::move(level))};
}

namespace {

// Deepest node of `path` that is an ancestor of (or equal to) `leaf`.
std::size_t support_position(const EmotionTree& tree, const std::vector<NodeIndex>& path, NodeIndex leaf) {
  for (std::size_t i = path.size(); i-- > 0;) {
    if (tree.is_ancestor_or_self(path[i], leaf)) return i;
  }
  return 0;
}

poincare::PoincarePoint fused_evidence_point(const KnowledgeItem& item, const FusionWeights& w) {
  return fuse_queries(item.keys, w);
}

}  // namespace

EvidenceGraph build_graph_structure(const DeliberationResult& result, const EmotionTree& tree, const KnowledgeBase& kb,
                                    const FusionWeights& w, double proximity_threshold) {
  if (result.path.empty()) throw InvalidInput("evidence graph: empty concept path");
  if (!(proximity_threshold >= 0.0)) throw InvalidInput("evidence graph: proximity threshold must be non-negative");

  EvidenceGraph g;
  for (NodeIndex n : result.path) {
    g.nodes.push_back(GraphNode{NodeKind::kConcept, tree.node(n).level, n, tree.prototype(n), {}});
  }
  g.concept_count = g.nodes.size();
  for (const auto& ev : result.evidence) {
    const auto& item = kb.item(ev.item);
    g.nodes.push_back(
        GraphNode{NodeKind::kEvidence, tree.node(item.leaf).level + 1, ev.item, fused_evidence_point(item, w), {}});
  }

  const std::size_t n = g.nodes.size();
  g.adjacency.assign(n * n, 0);
  auto connect = [&](std::size_t i, std::size_t j) {
    if (i == j || g.adjacency[i * n + j]) return;
    g.adjacency[i * n + j] = g.adjacency[j * n + i] = 1;
    g.edges.emplace_back(std::min(i, j), std::max(i, j));
  };

  for (std::size_t i = 0; i + 1 < g.concept_count; ++i) connect(i, i + 1);
  for (std::size_t e = g.concept_count; e < n; ++e) {
    const NodeIndex leaf = kb.item(g.nodes[e].source).leaf;
    connect(e, support_position(tree, result.path, leaf));
  }
  for (std::size_t a = g.concept_count; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (poincare::geodesic_distance(g.nodes[a].source_point, g.nodes[b].source_point) < proximity_threshold) {
        connect(a, b);
      }
    }
  }
  std::sort(g.edges.begin(), g.edges.end());
  return g;
}

ad::Var graph_features(const EvidenceGraph& graph, const KnowledgeBase& kb, ad::Var prototypes, ad::Var alpha,
                       ad::Var type_table, ad::Var level_table) {
  ad::Tape& tape = *prototypes.tape();
  const std::size_t d_g = type_table.cols();
  std::vector<ad::Var> rows;
  rows.reserve(graph.size());
  for (const auto& node : graph.nodes) {
    ad::Var point;
    if (node.kind == NodeKind::kConcept) {
      point = ad::exp_map_rows(ad::slice_rows(prototypes, node.source, 1));
    } else {
      const auto& item = kb.item(node.source);
      std::array<ad::Var, kModalityCount> keys;
      for (std::size_t m = 0; m < kModalityCount; ++m) keys[m] = tape.constant(Matrix::row(item.keys[m].coords()));
      point = fuse_queries(tape, keys, alpha);
    }
    if (static_cast<std::size_t>(node.level) >= level_table.rows()) {
      throw DimensionMismatch("level embedding rows", level_table.rows(), static_cast<std::size_t>(node.level) + 1);
    }
    ad::Var base = ad::resize_cols(ad::log_map_rows(point), d_g);
    ad::Var type_row = ad::slice_rows(type_table, static_cast<std::size_t>(node.kind), 1);
    ad::Var level_row = ad::slice_rows(level_table, static_cast<std::size_t>(node.level), 1);
    rows.push_back(ad::add(ad::add(base, type_row), level_row));
  }
  return ad::concat_rows(rows);
}

EvidenceGraph build_graph(const DeliberationResult& result, const EmotionTree& tree, const KnowledgeBase& kb,
                          const FusionWeights& w, const GraphEmbeddingTables& tables, double proximity_threshold) {
  EvidenceGraph g = build_graph_structure(result, tree, kb, w, proximity_threshold);
  ad::Tape tape;
  ad::Var feats = graph_features(g, kb, tape.constant(tree.prototype_params().value),
                                 ad::softmax_rows(tape.constant(w.theta.value)), tape.constant(tables.type_table.value),
                                 tape.constant(tables.level_table.value));
  const Matrix& fv = feats.value();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto row = fv.row_span(i);
    g.nodes[i].init_feature.assign(row.begin(), row.end());
  }
  return g;
}

ad::AttentionMask build_mask(const EvidenceGraph& graph) {
  const std::size_t n = graph.size();
  ad::AttentionMask mask{n, graph.adjacency};
  for (std::size_t i = 0; i < n; ++i) mask.allowed[i * n + i] = 1;
  return mask;
}

void EvidenceGraph::dump(std::ostream& out) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& nd = nodes[i];
    out << "node " << i << ' ' << (nd.kind == NodeKind::kConcept ? "concept" : "evidence") << ' ' << nd.level << ' '
        << nd.source << ' ' << std::hex << std::setw(16) << std::setfill('0')
        << text::checksum(nd.init_feature.data(), nd.init_feature.size()) << std::dec << std::setfill(' ') << '\n';
  }
  for (const auto& [i, j] : edges) out << "edge " << i << ' ' << j << '\n';
}

}  // namespace hyperemo
