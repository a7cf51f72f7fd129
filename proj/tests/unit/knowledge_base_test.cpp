#include <algorithm>
#include <random>
#include <sstream>

#include "../support.hpp"
#include "doctest.h"
#include "hyperemo/errors.hpp"
#include "hyperemo/knowledge_base.hpp"

using namespace hyperemo;
using namespace hyperemo::poincare;
using namespace testing_support;

namespace {

EvidenceRecord record(std::string id, std::string label, std::size_t dim, std::mt19937_64& rng,
                      double radius = 0.9) {
  EvidenceRecord r;
  r.id = std::move(id);
  r.label = std::move(label);
  for (auto& v : r.vectors) v = random_ball_point(dim, radius, rng);
  r.caption = "caption for " + r.id;
  return r;
}

SampleQueries random_queries(std::size_t dim, std::mt19937_64& rng) {
  SampleQueries q{PoincarePoint(random_ball_point(dim, 0.9, rng)), PoincarePoint(random_ball_point(dim, 0.9, rng)),
                  PoincarePoint(random_ball_point(dim, 0.9, rng)), PoincarePoint(random_ball_point(dim, 0.9, rng))};
  return q;
}

std::vector<EvidenceRecord> one_per_leaf(const EmotionTree& tree, std::mt19937_64& rng) {
  std::vector<EvidenceRecord> out;
  for (NodeIndex leaf : tree.leaves()) out.push_back(record("ev-" + tree.node(leaf).id, tree.node(leaf).id, tree.dim(), rng));
  return out;
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const LoadError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("twelve items, one per leaf, give twelve singleton buckets") {
  std::mt19937_64 rng(1);
  const auto tree = fixture_tree(4);
  const auto kb = KnowledgeBase::build(one_per_leaf(tree, rng), tree);
  CHECK(kb.size() == 12);
  std::size_t covered = 0;
  for (NodeIndex n = 0; n < tree.size(); ++n) {
    const auto bucket = kb.by_leaf(n);
    if (tree.is_leaf(n)) {
      REQUIRE(bucket.size() == 1);
      CHECK(kb.item(bucket[0]).leaf == n);
    } else {
      CHECK(bucket.empty());
    }
    covered += bucket.size();
  }
  CHECK(covered == kb.size());
}

TEST_CASE("empty record set is a valid empty knowledge base") {
  const auto tree = fixture_tree(4);
  const auto kb = KnowledgeBase::build({}, tree);
  CHECK(kb.empty());
  std::mt19937_64 rng(1);
  const auto leaves = tree.leaves();
  CHECK(top_k_in_leaves(kb, leaves, random_queries(4, rng), {1 / 3., 1 / 3., 1 / 3.}, 5).empty());
}

TEST_CASE("ingestion errors carry the record line") {
  std::mt19937_64 rng(2);
  const auto tree = fixture_tree(3);
  auto coarse = record("a", "joy", 3, rng);
  coarse.line = 4;
  CHECK(error_of([&] { KnowledgeBase::build(std::vector{coarse}, tree); }).find("not a leaf") != std::string::npos);
  CHECK(error_of([&] { KnowledgeBase::build(std::vector{coarse}, tree); }).find("line 4") != std::string::npos);

  auto unknown = record("b", "bliss", 3, rng);
  CHECK(error_of([&] { KnowledgeBase::build(std::vector{unknown}, tree); }).find("unknown label") != std::string::npos);

  auto wrong_dim = record("c", "happy", 2, rng);
  CHECK(error_of([&] { KnowledgeBase::build(std::vector{wrong_dim}, tree); }).find("dimension") != std::string::npos);

  auto dup1 = record("d", "happy", 3, rng);
  auto dup2 = record("d", "grief", 3, rng);
  CHECK(error_of([&] { KnowledgeBase::build(std::vector{dup1, dup2}, tree); }).find("duplicate") != std::string::npos);

  auto outside = record("e", "happy", 3, rng);
  outside.vectors[1] = {1.0, 0.0, 0.0};
  CHECK_THROWS(KnowledgeBase::build(std::vector{outside}, tree));
}

TEST_CASE("evidence documents parse and report malformed lines") {
  std::istringstream ok("# comment\nx\thappy\t0.1,0.2\t0,0\t-0.1,0.3\tlaughing at a joke\ny\tgrief\t0,0\t0,0\t0,0\n");
  const auto recs = parse_evidence(ok);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].caption == "laughing at a joke");
  CHECK(recs[0].line == 2);
  CHECK(recs[0].vectors[2] == std::vector<double>{-0.1, 0.3});
  CHECK(recs[1].caption.empty());

  std::string doc;
  for (int i = 1; i <= 6; ++i) doc += "id" + std::to_string(i) + "\thappy\t0,0\t0,0\t0,0\tc\n";
  doc += "id7\thappy\t0,zz\t0,0\t0,0\tc\n";
  std::istringstream bad(doc);
  CHECK(error_of([&] { parse_evidence(bad); }).find("line 7") != std::string::npos);

  std::istringstream short_line("a\thappy\t0,0\n");
  CHECK_THROWS_AS(parse_evidence(short_line), LoadError);
}

TEST_CASE("evidence writer round-trips through the parser") {
  std::mt19937_64 rng(3);
  const auto tree = fixture_tree(3);
  auto recs = one_per_leaf(tree, rng);
  std::stringstream ss;
  write_evidence(ss, recs);
  const auto back = parse_evidence(ss);
  REQUIRE(back.size() == recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    CHECK(back[i].id == recs[i].id);
    CHECK(back[i].vectors == recs[i].vectors);
    CHECK(back[i].caption == recs[i].caption);
  }
}

TEST_CASE("retrieval distance examples") {
  std::mt19937_64 rng(4);
  const auto tree = fixture_tree(3);
  const auto qs = random_queries(3, rng);
  KnowledgeItem same{"s", tree.index_of("happy"), {qs.audio, qs.visual, qs.text}, ""};
  CHECK(retrieval_distance(same, qs, FusionWeights()) == 0.0);

  KnowledgeItem other{"o", tree.index_of("happy"),
                      {PoincarePoint(random_ball_point(3, 0.9, rng)), PoincarePoint(random_ball_point(3, 0.9, rng)),
                       PoincarePoint(random_ball_point(3, 0.9, rng))},
                      ""};
  const double da = oracle_distance(qs.audio.coords(), other.keys[0].coords());
  const double dv = oracle_distance(qs.visual.coords(), other.keys[1].coords());
  const double dt = oracle_distance(qs.text.coords(), other.keys[2].coords());
  CHECK(std::abs(retrieval_distance(other, qs, {1.0, 0.0, 0.0}) - da) < 1e-9);
  CHECK(std::abs(retrieval_distance(other, qs, {1 / 3.0, 1 / 3.0, 1 / 3.0}) - (da + dv + dt) / 3.0) < 1e-12);
  const FusionWeights w({0.5, -0.2, 1.1});
  const auto a = w.alpha();
  CHECK(retrieval_distance(other, qs, w) == doctest::Approx(a[0] * da + a[1] * dv + a[2] * dt).epsilon(1e-12));
  CHECK(retrieval_distance(other, qs, w) > 0.0);
}

TEST_CASE("top-k equals a brute-force sort of the leaf-restricted pool") {
  std::mt19937_64 rng(5);
  const auto tree = fixture_tree(4);
  std::vector<EvidenceRecord> recs;
  for (int i = 0; i < 100; ++i) {
    const NodeIndex leaf = tree.leaves()[static_cast<std::size_t>(i) % 12];
    recs.push_back(record("item" + std::to_string(i), tree.node(leaf).id, 4, rng));
  }
  // Two exact duplicates force a distance tie.
  recs[40].vectors = recs[3].vectors;
  recs[40].label = recs[3].label;
  const auto kb = KnowledgeBase::build(recs, tree);
  for (int t = 0; t < 50; ++t) {
    const auto qs = random_queries(4, rng);
    std::vector<NodeIndex> leaves;
    for (NodeIndex leaf : tree.leaves()) {
      if (rng() % 2) leaves.push_back(leaf);
    }
    const std::array<double, 3> alpha = {0.2, 0.5, 0.3};
    std::vector<ScoredItem> brute;
    for (std::size_t i = 0; i < kb.size(); ++i) {
      if (std::find(leaves.begin(), leaves.end(), kb.item(i).leaf) == leaves.end()) continue;
      double d = 0;
      for (std::size_t m = 0; m < 3; ++m) d += alpha[m] * geodesic_distance(qs[kModalities[m]], kb.item(i).keys[m]);
      brute.push_back({i, d});
    }
    std::stable_sort(brute.begin(), brute.end(), [](auto& a, auto& b) { return a.distance < b.distance; });
    for (std::size_t k : {1u, 5u, 17u, 200u}) {
      auto want = brute;
      want.resize(std::min(k, want.size()));
      CHECK(top_k_in_leaves(kb, leaves, qs, alpha, k) == want);
    }
  }
}

TEST_CASE("ties break by declaration order") {
  std::mt19937_64 rng(6);
  const auto tree = fixture_tree(2);
  auto a = record("zeta", "happy", 2, rng);
  auto b = a;
  b.id = "alpha";
  const auto kb = KnowledgeBase::build(std::vector{a, b}, tree);
  const auto qs = random_queries(2, rng);
  const std::vector<NodeIndex> leaves{tree.index_of("happy")};
  const auto top = top_k_in_leaves(kb, leaves, qs, {1 / 3., 1 / 3., 1 / 3.}, 2);
  REQUIRE(top.size() == 2);
  CHECK(top[0].distance == top[1].distance);
  CHECK(top[0].item == 0);
  CHECK(top[1].item == 1);
}

TEST_CASE("top-k returns the sorted pool when k exceeds it and rejects k = 0") {
  std::mt19937_64 rng(7);
  const auto tree = fixture_tree(3);
  const auto kb = KnowledgeBase::build(one_per_leaf(tree, rng), tree);
  const auto qs = random_queries(3, rng);
  const auto leaves = tree.leaves_under(tree.index_of("joy"));
  const auto top = top_k_in_leaves(kb, leaves, qs, {1 / 3., 1 / 3., 1 / 3.}, 5);
  CHECK(top.size() == 3);
  CHECK(std::is_sorted(top.begin(), top.end(), [](auto& x, auto& y) { return x.distance < y.distance; }));
  CHECK(top_k_in_leaves(kb, leaves, qs, {1 / 3., 1 / 3., 1 / 3.}, 5) == top);
  CHECK_THROWS_AS(top_k_in_leaves(kb, leaves, qs, {1 / 3., 1 / 3., 1 / 3.}, 0), InvalidInput);
}

TEST_CASE("snapshot round-trip is byte-identical") {
  std::mt19937_64 rng(8);
  const auto tree = fixture_tree(4);
  const auto kb = KnowledgeBase::build(one_per_leaf(tree, rng), tree);
  std::stringstream first;
  kb.write_snapshot(first, tree);
  const std::string bytes = first.str();
  CHECK(bytes.substr(0, 4) == "HEKB");
  std::istringstream in(bytes);
  const auto again = KnowledgeBase::read_snapshot(in, tree);
  std::stringstream second;
  again.write_snapshot(second, tree);
  CHECK(second.str() == bytes);
  REQUIRE(again.size() == kb.size());
  for (std::size_t i = 0; i < kb.size(); ++i) {
    CHECK(again.item(i).id == kb.item(i).id);
    CHECK(again.item(i).leaf == kb.item(i).leaf);
    CHECK(again.item(i).caption == kb.item(i).caption);
    CHECK(again.item(i).keys == kb.item(i).keys);
  }

  const auto empty = KnowledgeBase::build({}, tree);
  std::stringstream es;
  empty.write_snapshot(es, tree);
  std::istringstream ein(es.str());
  CHECK(KnowledgeBase::read_snapshot(ein, tree).empty());

  std::istringstream garbage("NOPE....");
  CHECK_THROWS_AS(KnowledgeBase::read_snapshot(garbage, tree), LoadError);
  std::istringstream truncated(bytes.substr(0, bytes.size() - 9));
  CHECK_THROWS_AS(KnowledgeBase::read_snapshot(truncated, tree), LoadError);
}

TEST_CASE("mapping raw features through the heads") {
  std::mt19937_64 rng(9);
  const auto tree = fixture_tree(4);
  QueryEncoder enc({3, 3, 3}, 4, rng);
  EvidenceRecord r;
  r.id = "raw";
  r.label = "happy";
  r.vectors = {gaussian_vector(3, 1.0, rng), gaussian_vector(3, 1.0, rng), gaussian_vector(3, 1.0, rng)};
  const auto kb = KnowledgeBase::build_through_heads(std::vector{r}, tree, enc);
  CHECK(kb.item(0).keys[1] == project_modality(enc.head(Modality::kVisual), r.vectors[1]));
  r.vectors[2].push_back(0.0);
  CHECK_THROWS_AS(KnowledgeBase::build_through_heads(std::vector{r}, tree, enc), LoadError);
}
