#include <fstream>
#include <sstream>

#include "../support.hpp"
#include "doctest.h"
#include "hyperemo/emotion_tree.hpp"
#include "hyperemo/errors.hpp"
#include "hyperemo/synthetic.hpp"

using namespace hyperemo;
using namespace testing_support;

namespace {

const char* kDataDir = HYPEREMO_TEST_DATA_DIR;

EmotionTree load_fixture(std::size_t dim = 4) {
  return EmotionTree::load_file(std::string(kDataDir) + "/taxonomy.tsv", dim, 1);
}

std::string load_error(const std::string& doc) {
  try {
    tree_from_text(doc, 2);
  } catch (const LoadError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("hand-written three-level fixture loads") {
  const auto tree = load_fixture();
  CHECK(tree.size() == 17);
  CHECK(tree.level_count() == 3);
  CHECK(tree.leaves().size() == 12);
  CHECK(tree.node(tree.root()).id == "emotion");
  CHECK(tree.max_level_width() == 12);
}

TEST_CASE("built-in fixture rows describe the same taxonomy as the data file") {
  const auto file = load_fixture();
  const auto builtin = fixture_tree(4);
  REQUIRE(file.size() == builtin.size());
  for (NodeIndex n = 0; n < file.size(); ++n) {
    CHECK(file.node(n).id == builtin.node(n).id);
    CHECK(file.node(n).parent == builtin.node(n).parent);
    CHECK(file.node(n).level == builtin.node(n).level);
  }
}

TEST_CASE("single-node document is a root-only tree") {
  const auto tree = tree_from_text("solo\tsolo\t\t0\n", 3);
  CHECK(tree.size() == 1);
  CHECK(tree.level_count() == 1);
  CHECK(tree.is_leaf(tree.root()));
}

TEST_CASE("malformed taxonomies name the offending node") {
  CHECK(load_error("r\tr\t\t0\na\ta\tmissing\t1\n").find("'a'") != std::string::npos);
  CHECK(load_error("r\tr\t\t0\na\ta\tmissing\t1\n").find("line 2") != std::string::npos);
  CHECK(load_error("r\tr\t\t0\nr\tx\tr\t1\n").find("duplicate") != std::string::npos);
  CHECK(load_error("r\tr\t\t0\na\ta\tb\t1\nb\tb\ta\t1\n").find("cycle") != std::string::npos);
  CHECK(load_error("r\tr\t\t0\na\ta\tr\t2\n").find("parent level + 1") != std::string::npos);
  CHECK(load_error("r\tr\t\t1\n").find("root must have level 0") != std::string::npos);
  CHECK(load_error("r\tr\t\t0\ns\ts\t\t0\n").find("more than one root") != std::string::npos);
  CHECK(load_error("r\tr\t\t0\na\tx\tr\t1\nb\tx\tr\t1\n").find("label repeated") != std::string::npos);
  CHECK(load_error("r\tr\t\t0\na\ta\ta\t1\n").find("own parent") != std::string::npos);
  CHECK(load_error("r\tr\t0\n").find("4 tab-separated") != std::string::npos);
  CHECK(load_error("r\tr\t\tx\n").find("non-negative integer") != std::string::npos);
  CHECK(load_error("r\tr\xc3\xa9\t\t0\n").find("non-ASCII") != std::string::npos);
  CHECK(load_error("# only a comment\n\n").find("no root") != std::string::npos);
}

TEST_CASE("comments, blank lines and CRLF endings are tolerated") {
  const auto tree = tree_from_text("# header\r\n\r\nr\tr\t\t0\r\na\ta\tr\t1\r\n", 2);
  CHECK(tree.size() == 2);
  CHECK(tree.node(1).parent == NodeIndex{0});
}

TEST_CASE("prototypes follow the stored parameters without caching") {
  auto tree = fixture_tree(3, 4);
  const NodeIndex n = tree.index_of("happy");
  tree.prototype_params().value.row_span(n)[0] = 0.0;
  tree.prototype_params().value.row_span(n)[1] = 0.0;
  tree.prototype_params().value.row_span(n)[2] = 0.0;
  CHECK(tree.prototype(n).norm() == 0.0);
  tree.prototype_params().value.row_span(n)[1] = 0.5;
  CHECK(tree.prototype("happy").norm() == doctest::Approx(std::tanh(0.5)).epsilon(1e-15));
  CHECK_THROWS_AS(tree.prototype("nope"), NotFound);
}

TEST_CASE("prototype initialization widens with depth") {
  const auto tree = fixture_tree(64, 7);
  double per_level[3] = {0, 0, 0};
  int counts[3] = {0, 0, 0};
  for (NodeIndex n = 0; n < tree.size(); ++n) {
    const auto row = tree.prototype_params().value.row_span(n);
    double ss = 0;
    for (double x : row) ss += x * x;
    per_level[tree.node(n).level] += ss / 64.0;
    ++counts[tree.node(n).level];
  }
  // Sample variance against 1e-4 (level+1)^2, loosely.
  for (int l = 0; l < 3; ++l) {
    const double var = per_level[l] / counts[l];
    const double want = 1e-4 * (l + 1) * (l + 1);
    CHECK(var > 0.5 * want);
    CHECK(var < 1.6 * want);
  }
  const auto again = fixture_tree(64, 7);
  CHECK(again.prototype_params().value == tree.prototype_params().value);
}

TEST_CASE("tree distance on the fixture") {
  const auto tree = fixture_tree(2);
  CHECK(tree.tree_distance(tree.index_of("happy"), tree.index_of("happy")) == 0);
  CHECK(tree.tree_distance(tree.index_of("happy"), tree.index_of("excited")) == 2);
  CHECK(tree.tree_distance(tree.index_of("happy"), tree.index_of("grief")) == 4);
  CHECK(tree.tree_distance(tree.index_of("joy"), tree.index_of("grief")) == 3);
  CHECK(tree.tree_distance(tree.root(), tree.index_of("nervous")) == 2);
}

TEST_CASE("tree distance is a metric on the fixture") {
  const auto tree = fixture_tree(2);
  const std::size_t n = tree.size();
  for (NodeIndex a = 0; a < n; ++a) {
    for (NodeIndex b = 0; b < n; ++b) {
      const auto ab = tree.tree_distance(a, b);
      CHECK(ab == tree.tree_distance(b, a));
      CHECK((ab == 0) == (a == b));
      for (NodeIndex c = 0; c < n; ++c) CHECK(tree.tree_distance(a, c) <= ab + tree.tree_distance(b, c));
    }
  }
}

TEST_CASE("navigation helpers") {
  const auto tree = fixture_tree(2);
  CHECK(tree.children(tree.index_of("grief")).empty());
  CHECK(tree.path_to_root(tree.root()) == std::vector<NodeIndex>{tree.root()});
  CHECK(tree.path_to_root(tree.index_of("lonely")) ==
        std::vector<NodeIndex>{tree.root(), tree.index_of("sadness"), tree.index_of("lonely")});
  const auto kids = tree.children(tree.index_of("anger"));
  REQUIRE(kids.size() == 3);
  CHECK(tree.node(kids[0]).id == "furious");
  CHECK(tree.node(kids[1]).id == "annoyed");
  CHECK(tree.node(kids[2]).id == "resentful");
  CHECK(tree.leaves_under(tree.index_of("fear")).size() == 3);
  CHECK(tree.leaves_under(tree.root()).size() == 12);
  CHECK(tree.is_ancestor_or_self(tree.index_of("fear"), tree.index_of("scared")));
  CHECK_FALSE(tree.is_ancestor_or_self(tree.index_of("joy"), tree.index_of("scared")));
  CHECK_THROWS_AS(tree.index_of("unknown"), NotFound);
}

TEST_CASE("structural counting invariants") {
  const auto tree = load_fixture();
  std::size_t child_total = 0;
  for (NodeIndex n = 0; n < tree.size(); ++n) child_total += tree.children(n).size();
  CHECK(child_total == tree.size() - 1);
  for (NodeIndex leaf : tree.leaves()) {
    CHECK(tree.path_to_root(leaf).size() == static_cast<std::size_t>(tree.node(leaf).level) + 1);
  }
}

TEST_CASE("write then load reproduces the taxonomy") {
  const auto tree = load_fixture();
  std::stringstream ss;
  tree.write(ss);
  const auto again = EmotionTree::load(ss, 4, 1);
  REQUIRE(again.size() == tree.size());
  for (NodeIndex n = 0; n < tree.size(); ++n) {
    CHECK(again.node(n).id == tree.node(n).id);
    CHECK(again.node(n).label == tree.node(n).label);
    CHECK(again.node(n).level == tree.node(n).level);
  }
}
