#include <random>
#include <sstream>

#include "../support.hpp"
#include "doctest.h"
#include "hyperemo/errors.hpp"
#include "hyperemo/model.hpp"
#include "hyperemo/objectives.hpp"
#include "hyperemo/prompt_assembly.hpp"
#include "hyperemo/synthetic.hpp"

using namespace hyperemo;
using namespace testing_support;

namespace {

Matrix filled(std::size_t r, std::size_t c, double v) { return Matrix(r, c, v); }

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.feature_dims = {6, 6, 6};
  cfg.d_h = 8;
  cfg.d_g = 8;
  cfg.d_llm = 16;
  cfg.heads = 2;
  cfg.graph_tokens = 3;
  cfg.fusion_rows = 2;
  cfg.seed = 5;
  return cfg;
}

struct SmallWorld {
  HyperEmoModel model{fixture_tree(8), small_config()};
  synthetic::ClusterSampler sampler{model.tree(), {{6, 6, 6}, 2, 1.0, 0.1, 3}};
  KnowledgeBase kb = KnowledgeBase::build_through_heads(sampler.evidence(2), model.tree(), model.encoder());
};

}  // namespace

TEST_CASE("assembled length is 4 + r + text + Q, plus one label row") {
  std::mt19937_64 rng(71);
  const auto markers = MarkerEmbeddings::init(5, rng);
  for (std::size_t r : {1u, 4u}) {
    for (std::size_t text : {0u, 3u}) {
      for (std::size_t q : {1u, 8u}) {
        const auto seq = assemble(filled(r, 5, 1), filled(text, 5, 2), filled(q, 5, 3), filled(1, 5, 4),
                                  markers.rows.value, std::nullopt);
        CHECK(seq.length() == 4 + r + text + q);
        CHECK_FALSE(seq.has_label());
        CHECK(seq.segment_rows(Segment::kGraph) == q);
        const auto labelled = assemble(filled(r, 5, 1), filled(text, 5, 2), filled(q, 5, 3), filled(1, 5, 4),
                                       markers.rows.value, filled(1, 5, 9));
        CHECK(labelled.length() == seq.length() + 1);
        CHECK(labelled.has_label());
      }
    }
  }
}

TEST_CASE("segments appear in the fixed order with the right rows") {
  std::mt19937_64 rng(72);
  const auto markers = MarkerEmbeddings::init(3, rng);
  const auto seq = assemble(filled(2, 3, 1), Matrix(0, 0), filled(4, 3, 3), filled(1, 3, 4), markers.rows.value,
                            std::nullopt, 4);
  const std::vector<Segment> order{Segment::kBos,     Segment::kMmOpen, Segment::kFusion, Segment::kText,
                                   Segment::kMmClose, Segment::kGraph,  Segment::kTask};
  REQUIRE(seq.segments.size() == order.size());
  for (std::size_t i = 0; i < order.size(); ++i) CHECK(seq.segments[i].first == order[i]);
  CHECK(seq.segment_rows(Segment::kText) == 0);
  const Matrix all = seq.rows();
  REQUIRE(all.rows() == 10);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(all(0, c) == markers.rows.value(kBosRow, c));
    CHECK(all(1, c) == markers.rows.value(kMmOpenRow, c));
    CHECK(all(2, c) == 1.0);
    CHECK(all(4, c) == markers.rows.value(kMmCloseRow, c));
    CHECK(all(5, c) == 3.0);
    CHECK(all(9, c) == 4.0);
  }
}

TEST_CASE("width mismatches name the offending segment") {
  std::mt19937_64 rng(73);
  const auto markers = MarkerEmbeddings::init(4, rng);
  try {
    assemble(filled(1, 4, 0), filled(2, 3, 0), filled(2, 4, 0), filled(1, 4, 0), markers.rows.value, std::nullopt);
    FAIL("expected a width error");
  } catch (const DimensionMismatch& e) {
    CHECK(std::string(e.what()).find("'text'") != std::string::npos);
  }
  CHECK_THROWS_AS(assemble(filled(1, 4, 0), Matrix(0, 0), filled(2, 4, 0), filled(1, 4, 0), markers.rows.value,
                           std::nullopt, 3),
                  DimensionMismatch);
}

TEST_CASE("the sequence dump lists every segment and is deterministic") {
  std::mt19937_64 rng(74);
  const auto markers = MarkerEmbeddings::init(4, rng);
  const auto seq =
      assemble(filled(2, 4, 0.5), Matrix(0, 0), filled(3, 4, -1), filled(1, 4, 2), markers.rows.value, filled(1, 4, 1));
  std::ostringstream a, b;
  seq.dump(a);
  seq.dump(b);
  CHECK(a.str() == b.str());
  std::istringstream in(a.str());
  std::string tag, hex;
  std::size_t rows = 0, total = 0, lines = 0;
  while (in >> tag >> rows >> hex) {
    CHECK(tag == segment_name(seq.segments[lines].first));
    CHECK(rows == seq.segments[lines].second.rows());
    CHECK(hex.size() == 16);
    total += rows;
    ++lines;
  }
  CHECK(lines == 8);
  CHECK(total == seq.length());
}

TEST_CASE("the mock language model reads the causal running mean") {
  std::mt19937_64 rng(75);
  MockLanguageModel lm({"a", "b"}, 4, rng);
  CHECK(lm.vocab_size() == 2 + 2 + 10 + 2);
  CHECK(lm.token_id("b") == 1);
  CHECK(lm.token_id("7") == 11);
  CHECK_THROWS_AS(lm.token_id("zzz"), NotFound);
  CHECK(lm.leaf_token_count() == 2);

  Matrix x(3, 4);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(static_cast<double>(i));
  ad::Tape t;
  const Matrix logits = lm.logits(t.constant(x)).value();
  const Matrix& cls = lm.parameters()[1]->value;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t v = 0; v < lm.vocab_size(); ++v) {
      double want = 0;
      for (std::size_t c = 0; c < 4; ++c) {
        double mean = 0;
        for (std::size_t j = 0; j <= i; ++j) mean += x(j, c);
        want += cls(v, c) * mean / static_cast<double>(i + 1);
      }
      CHECK(logits(i, v) == doctest::Approx(want).epsilon(1e-12));
    }
  }
  lm.silence();
  ad::Tape t2;
  for (double v : lm.logits(t2.constant(x)).value().storage()) CHECK(v == 0.0);
}

TEST_CASE("model prompts have the documented shape and are deterministic") {
  SmallWorld w;
  const auto feats = w.sampler.draw(w.model.tree().leaves()[3]);
  const auto a = w.model.predict(feats, w.kb);
  const auto b = w.model.predict(feats, w.kb);
  CHECK(a.sequence.length() == 4 + 2 + 3);
  CHECK(a.sequence.width() == 16);
  CHECK(a.graph_tokens.rows() == 3);
  std::ostringstream da, db;
  a.sequence.dump(da);
  b.sequence.dump(db);
  CHECK(da.str() == db.str());
  CHECK(a.logits == b.logits);

  Matrix text(5, 16, 0.25);
  const auto plan = w.model.plan(feats, w.kb);
  ad::Tape t;
  const auto fv = w.model.forward(t, feats, w.kb, plan, w.model.tree().leaves()[3], &text);
  CHECK(fv.sequence.rows.rows() == 4 + 2 + 5 + 3 + 1);
  CHECK(fv.sequence.input_length() == 4 + 2 + 5 + 3);
  Matrix narrow(2, 15);
  ad::Tape t2;
  CHECK_THROWS_AS(w.model.forward(t2, feats, w.kb, plan, std::nullopt, &narrow), DimensionMismatch);
}

TEST_CASE("the task loss reaches the graph tokens and leaves the language model frozen") {
  SmallWorld w;
  const auto samples = w.sampler.dataset(1);
  std::vector<const TrainingSample*> batch{&samples[0], &samples[5]};
  const auto plans = plan_batch(w.model, batch, w.kb);
  ObjectiveConfig obj;
  obj.weights = {0.0, 0.0};

  std::vector<Matrix> lm_before;
  for (auto* p : w.model.language_model().parameters()) lm_before.push_back(p->value);
  std::vector<Matrix> former_before;
  for (auto* p : w.model.former().parameters()) former_before.push_back(p->value);

  w.model.zero_grad();
  ad::Tape tape;
  auto fw = batch_loss(tape, w.model, batch, plans, w.kb, obj);
  tape.backward(fw.total);
  double graph_grad = 0;
  for (auto* p : w.model.former().parameters()) {
    for (double g : p->grad.storage()) graph_grad += std::abs(g);
  }
  CHECK(graph_grad > 0.0);
  for (auto* p : w.model.language_model().parameters()) {
    CHECK_FALSE(p->trainable);
    for (double g : p->grad.storage()) CHECK(g == 0.0);
  }

  AdamW opt;
  const auto params = w.model.parameters();
  opt.step(params);
  const auto lm = w.model.language_model().parameters();
  for (std::size_t i = 0; i < lm.size(); ++i) CHECK(lm[i]->value == lm_before[i]);
  bool moved = false;
  const auto former = w.model.former().parameters();
  for (std::size_t i = 0; i < former.size(); ++i) moved = moved || !(former[i]->value == former_before[i]);
  CHECK(moved);
}
