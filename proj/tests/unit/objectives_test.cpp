#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "../support.hpp"
#include "doctest.h"
#include "hyperemo/errors.hpp"
#include "hyperemo/objectives.hpp"
#include "hyperemo/synthetic.hpp"

using namespace hyperemo;
using namespace hyperemo::poincare;
using namespace testing_support;

namespace {

using Batch = std::array<std::vector<PoincarePoint>, kModalityCount>;

// A point at geodesic distance d from the origin along the first axis.
PoincarePoint at_distance(double d, std::size_t dim = 2) {
  std::vector<double> v(dim, 0.0);
  v[0] = std::tanh(d / 2.0);
  return PoincarePoint(v);
}

Batch same_in_every_modality(std::vector<PoincarePoint> pts) { return {pts, pts, pts}; }

// Direct pairwise-hinge and triplet reference built on the oracle distance.
double oracle_contrastive(const Batch& q, const std::vector<NodeIndex>& labels, const EmotionTree& tree, double base,
                          ContrastiveForm form) {
  const std::size_t n = labels.size();
  double total = 0;
  for (const auto& pts : q) {
    auto d = [&](std::size_t i, std::size_t j) { return oracle_distance(pts[i].coords(), pts[j].coords()); };
    if (form == ContrastiveForm::kPairwiseHinge) {
      double s = 0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          if (i == j) continue;
          s += labels[i] == labels[j]
                   ? d(i, j)
                   : std::max(0.0, base * static_cast<double>(tree.tree_distance(labels[i], labels[j])) - d(i, j));
        }
      }
      total += s / static_cast<double>(n * (n - 1));
    } else {
      double s = 0;
      std::size_t count = 0;
      for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t p = 0; p < n; ++p) {
          for (std::size_t m = 0; m < n; ++m) {
            if (p == a || labels[p] != labels[a] || labels[m] == labels[a]) continue;
            s += std::max(0.0, d(a, p) - d(a, m) + base * static_cast<double>(tree.tree_distance(labels[a], labels[m])));
            ++count;
          }
        }
      }
      if (count) total += s / static_cast<double>(count);
    }
  }
  return total;
}

ModelConfig tiny_config(std::uint64_t seed = 3) {
  ModelConfig cfg;
  cfg.feature_dims = {6, 6, 6};
  cfg.d_h = 8;
  cfg.d_g = 8;
  cfg.d_llm = 16;
  cfg.heads = 2;
  cfg.graph_tokens = 3;
  cfg.fusion_rows = 2;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("task loss on uniform and on decisive logits") {
  const Matrix uniform(3, 4, 0.7);
  const int targets[] = {0, 3, 1};
  CHECK(task_loss(uniform, targets) == doctest::Approx(3 * std::log(4.0)).epsilon(1e-12));

  Matrix sharp(3, 4, -50.0);
  for (std::size_t r = 0; r < 3; ++r) sharp(r, static_cast<std::size_t>(targets[r])) = 50.0;
  CHECK(task_loss(sharp, targets) < 1e-30);
  CHECK(task_loss(sharp, targets) >= 0.0);

  const int short_targets[] = {0, 1};
  CHECK_THROWS_AS(task_loss(uniform, short_targets), DimensionMismatch);
}

TEST_CASE("task loss falls as the target logit grows") {
  double previous = INFINITY;
  for (double boost = 0.0; boost < 5.0; boost += 0.5) {
    Matrix logits(1, 5);
    logits(0, 2) = boost;
    const int t[] = {2};
    const double l = task_loss(logits, t);
    CHECK(l < previous);
    previous = l;
  }
}

TEST_CASE("contrastive hand examples") {
  const auto tree = fixture_tree(2);
  const NodeIndex happy = tree.index_of("happy"), excited = tree.index_of("excited"), grief = tree.index_of("grief");

  SUBCASE("same label pair pulls with its distance") {
    const std::vector<NodeIndex> labels{happy, happy};
    const auto r = contrastive_loss(same_in_every_modality({PoincarePoint::origin(2), at_distance(0.7)}), labels, tree);
    CHECK(r.value == doctest::Approx(3 * 0.7).epsilon(1e-12));
    CHECK(r.negative == 0.0);
  }
  SUBCASE("sibling pair inside the margin pays the shortfall") {
    // Tree distance 2 with base 0.5 gives margin 1.0; the gap is 0.3.
    const std::vector<NodeIndex> labels{happy, excited};
    const auto r = contrastive_loss(same_in_every_modality({PoincarePoint::origin(2), at_distance(0.3)}), labels, tree);
    CHECK(r.value == doctest::Approx(3 * 0.7).epsilon(1e-12));
    CHECK(r.positive == 0.0);
  }
  SUBCASE("distant labels beyond the margin cost nothing") {
    // Tree distance 4 gives margin 2.0.
    const std::vector<NodeIndex> labels{happy, grief};
    const auto r = contrastive_loss(same_in_every_modality({PoincarePoint::origin(2), at_distance(2.5)}), labels, tree);
    CHECK(r.value == 0.0);
  }
  SUBCASE("a single sample is degenerate") {
    const std::vector<NodeIndex> labels{happy};
    const auto r = contrastive_loss(same_in_every_modality({PoincarePoint::origin(2)}), labels, tree);
    CHECK(r.degenerate);
    CHECK(r.value == 0.0);
  }
  SUBCASE("triplet form on one anchor-positive-negative set") {
    const std::vector<NodeIndex> labels{happy, happy, excited};
    const auto pts = same_in_every_modality({PoincarePoint::origin(2), at_distance(0.4), at_distance(-0.5)});
    const auto r = contrastive_loss(pts, labels, tree, {0.5, ContrastiveForm::kTriplet});
    // Anchor 0: max(0, 0.4 - 0.5 + 1) = 0.9. Anchor 1: max(0, 0.4 - 0.9 + 1) = 0.5.
    CHECK(r.value == doctest::Approx(3 * (0.9 + 0.5) / 2).epsilon(1e-12));
  }
}

TEST_CASE("contrastive loss matches the brute-force reference and ignores sample order") {
  std::mt19937_64 rng(81);
  const auto tree = fixture_tree(3);
  for (auto form : {ContrastiveForm::kPairwiseHinge, ContrastiveForm::kTriplet}) {
    for (int t = 0; t < 20; ++t) {
      std::vector<NodeIndex> labels;
      Batch q;
      for (int i = 0; i < 6; ++i) {
        labels.push_back(tree.leaves()[rng() % 4]);
        for (auto& m : q) m.emplace_back(random_ball_point(3, 0.9, rng));
      }
      const auto r = contrastive_loss(q, labels, tree, {0.5, form});
      CHECK(r.value == doctest::Approx(oracle_contrastive(q, labels, tree, 0.5, form)).epsilon(1e-9));
      CHECK(r.value == doctest::Approx(r.positive + r.negative).epsilon(1e-12));

      std::vector<std::size_t> perm(6);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      Batch pq;
      std::vector<NodeIndex> pl;
      for (std::size_t i : perm) {
        pl.push_back(labels[i]);
        for (std::size_t m = 0; m < 3; ++m) pq[m].push_back(q[m][i]);
      }
      CHECK(contrastive_loss(pq, pl, tree, {0.5, form}).value == doctest::Approx(r.value).epsilon(1e-12));
    }
  }
}

TEST_CASE("a one-class batch has no negative term") {
  std::mt19937_64 rng(82);
  const auto tree = fixture_tree(3);
  const std::vector<NodeIndex> labels(5, tree.index_of("grief"));
  Batch q;
  for (int i = 0; i < 5; ++i) {
    for (auto& m : q) m.emplace_back(random_ball_point(3, 0.9, rng));
  }
  for (auto form : {ContrastiveForm::kPairwiseHinge, ContrastiveForm::kTriplet}) {
    CHECK(contrastive_loss(q, labels, tree, {0.5, form}).negative == 0.0);
  }
}

TEST_CASE("path loss is the geodesic distance to the prototype") {
  CHECK(path_loss(PoincarePoint::origin(3), PoincarePoint::origin(3)) == 0.0);
  for (double r : {0.1, 0.5, 0.9}) {
    const PoincarePoint p(std::vector<double>{0.0, r, 0.0});
    CHECK(path_loss(PoincarePoint::origin(3), p) == doctest::Approx(2 * std::atanh(r)).epsilon(1e-12));
  }
}

TEST_CASE("total loss combines the terms linearly") {
  CHECK(total_loss(1.0, 2.0, 3.0, LossWeights{}) == doctest::Approx(1.35).epsilon(1e-15));
  CHECK(total_loss(1.0, 2.0, 3.0, {0.0, 0.0}) == 1.0);
  for (double lc : {0.0, 0.1, 0.7}) {
    const double lo = total_loss(0.4, 1.3, 2.2, {lc, 0.05});
    const double hi = total_loss(0.4, 1.3, 2.2, {lc + 0.5, 0.05});
    CHECK(hi - lo == doctest::Approx(0.5 * 1.3).epsilon(1e-12));
  }
  CHECK_THROWS_AS(LossWeights({-0.1, 0.05}).validate(), InvalidInput);
  CHECK_THROWS_AS(LossWeights({0.1, NAN}).validate(), InvalidInput);
}

TEST_CASE("AdamW first step, zero gradients and decoupled decay") {
  ad::Parameter p("p", Matrix::row(std::vector<double>{1.0, -2.0, 0.5}));
  p.grad = Matrix::row(std::vector<double>{0.3, -4.0, 0.0});
  AdamW opt({0.1, 0.9, 0.999, 1e-8, 0.0});
  ad::Parameter* ps[] = {&p};
  opt.step(ps);
  // Bias correction makes the first update lr * g / (|g| + eps).
  CHECK(p.value[0] == doctest::Approx(1.0 - 0.1 * 0.3 / (0.3 + 1e-8)).epsilon(1e-14));
  CHECK(p.value[1] == doctest::Approx(-2.0 + 0.1 * 4.0 / (4.0 + 1e-8)).epsilon(1e-14));
  CHECK(p.value[2] == 0.5);

  ad::Parameter q("q", Matrix::row(std::vector<double>{1.0, -3.0}));
  AdamW still;
  ad::Parameter* qs[] = {&q};
  for (int i = 0; i < 5; ++i) still.step(qs);
  CHECK(q.value == Matrix::row(std::vector<double>{1.0, -3.0}));

  AdamW decaying({0.01, 0.9, 0.999, 1e-8, 0.5});
  decaying.step(qs);
  CHECK(q.value[0] == doctest::Approx(1.0 * (1 - 0.01 * 0.5)).epsilon(1e-15));
  CHECK(q.value[1] == doctest::Approx(-3.0 * (1 - 0.01 * 0.5)).epsilon(1e-15));

  ad::Parameter frozen("f", Matrix(1, 2, 1.0), false);
  frozen.grad = Matrix(1, 2, 5.0);
  AdamW opt2;
  ad::Parameter* fs[] = {&frozen};
  opt2.step(fs);
  CHECK(frozen.value == Matrix(1, 2, 1.0));
}

TEST_CASE("datasets round-trip and report bad lines") {
  const auto tree = fixture_tree(4);
  synthetic::ClusterSampler sampler(tree, {{3, 2, 4}, 2, 1.0, 0.1, 9});
  const auto data = sampler.dataset(2);
  CHECK(data.size() == 24);
  std::stringstream ss;
  write_dataset(ss, data, tree);
  const auto back = parse_dataset(ss, tree);
  REQUIRE(back.size() == data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(back[i].id == data[i].id);
    CHECK(back[i].label == data[i].label);
    CHECK(back[i].features.values == data[i].features.values);
  }
  std::istringstream coarse("a\tjoy\t1,2,3\t1,2\t1,2,3,4\n");
  CHECK_THROWS_AS(parse_dataset(coarse, tree), LoadError);
  std::istringstream ragged("a\thappy\t1,2,3\t1,2\t1,2,3,4\nb\thappy\t1,2\t1,2\t1,2,3,4\n");
  try {
    parse_dataset(ragged, tree);
    FAIL("expected a load error");
  } catch (const LoadError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("full-model gradients match central differences") {
  HyperEmoModel model(fixture_tree(8), tiny_config());
  synthetic::ClusterSampler sampler(model.tree(), {{6, 6, 6}, 2, 1.0, 0.2, 4});
  const auto kb = KnowledgeBase::build_through_heads(sampler.evidence(1), model.tree(), model.encoder());
  const auto all = sampler.dataset(1);
  const std::vector<TrainingSample> batch{all[0], all[1], all[4], all[9]};
  for (auto form : {ContrastiveForm::kPairwiseHinge, ContrastiveForm::kTriplet}) {
    ObjectiveConfig obj;
    obj.weights = {0.5, 0.3};
    obj.contrastive.form = form;
    const auto checks = check_gradients(model, batch, kb, obj);
    CHECK(checks.size() == model.trainable_parameters().size());
    for (const auto& c : checks) {
      CAPTURE(c.name);
      CAPTURE(c.max_relative_error);
      CHECK(c.passed);
    }
  }
}

TEST_CASE("toy training is deterministic and reduces the loss") {
  const auto tree = fixture_tree(8);
  synthetic::ClusterSampler sampler(tree, {{6, 6, 6}, 3, 1.0, 0.15, 12});
  const auto data = sampler.dataset(3);
  const auto evidence = sampler.evidence(1);
  auto run = [&]() {
    HyperEmoModel model(tree, tiny_config(21));
    const auto kb = KnowledgeBase::build_through_heads(evidence, model.tree(), model.encoder());
    TrainConfig cfg;
    cfg.epochs = 6;
    cfg.optimizer.learning_rate = 1e-2;
    std::ostringstream out;
    std::size_t callbacks = 0;
    const auto report = train_toy(model, data, kb, cfg, [&](const EpochRecord&) { ++callbacks; });
    CHECK(callbacks == 6);
    report.write(out);
    return std::pair{report, out.str()};
  };
  const auto [a, text_a] = run();
  const auto [b, text_b] = run();
  CHECK(text_a == text_b);
  REQUIRE(a.epochs.size() == 6);
  CHECK(a.epochs.back().total < a.epochs.front().total);
  for (const auto& e : a.epochs) {
    CHECK(e.total == doctest::Approx(e.task + 0.1 * e.cont + 0.05 * e.path).epsilon(1e-9));
  }
  CHECK(text_a.find("separation text same ") != std::string::npos);

  HyperEmoModel model(tree, tiny_config());
  const auto kb = KnowledgeBase::build({}, model.tree());
  TrainConfig bad;
  bad.batch_size = 0;
  CHECK_THROWS_AS(train_toy(model, data, kb, bad), InvalidInput);
  CHECK_THROWS_AS(train_toy(model, std::span<const TrainingSample>{}, kb, TrainConfig{}), InvalidInput);
}

TEST_CASE("separation summary averages over unordered pairs") {
  const auto tree = fixture_tree(4);
  std::mt19937_64 rng(83);
  QueryEncoder enc({2, 2, 2}, 4, rng);
  std::vector<TrainingSample> s(3);
  s[0].label = s[1].label = tree.index_of("happy");
  s[2].label = tree.index_of("grief");
  for (auto& x : s) {
    for (auto& v : x.features.values) v = gaussian_vector(2, 1.0, rng);
  }
  const auto sum = separation_summary(enc, s);
  CHECK(sum.same_pairs == 1);
  CHECK(sum.different_pairs == 2);
  const auto q0 = enc.encode(s[0].features), q1 = enc.encode(s[1].features), q2 = enc.encode(s[2].features);
  CHECK(sum.same[0] == doctest::Approx(oracle_distance(q0.audio.coords(), q1.audio.coords())).epsilon(1e-9));
  CHECK(sum.different[2] ==
        doctest::Approx((oracle_distance(q0.text.coords(), q2.text.coords()) +
                         oracle_distance(q1.text.coords(), q2.text.coords())) /
                        2)
            .epsilon(1e-9));
}
