#include "hyperemo/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>

#include "hyperemo/errors.hpp"
#include "hyperemo/text_io.hpp"

namespace hyperemo {

void LossWeights::validate() const {
  if (!(std::isfinite(lambda_cont) && lambda_cont >= 0.0) || !(std::isfinite(lambda_path) && lambda_path >= 0.0)) {
    throw InvalidInput("loss weights must be finite and non-negative");
  }
}

double task_loss(const Matrix& logits, std::span<const int> targets) {
  ad::Tape tape;
  return task_loss(tape.constant(logits), targets).scalar();
}

ad::Var task_loss(ad::Var logits, std::span<const int> targets) {
  if (logits.rows() != targets.size()) throw DimensionMismatch("task loss targets", logits.rows(), targets.size());
  return ad::nll(logits, targets);
}

ContrastiveResult contrastive_loss(const std::array<std::vector<poincare::PoincarePoint>, kModalityCount>& queries,
                                   std::span<const NodeIndex> labels, const EmotionTree& tree,
                                   const ContrastiveConfig& cfg) {
  const std::size_t n = labels.size();
  for (const auto& q : queries) {
    if (q.size() != n) throw DimensionMismatch("contrastive batch", n, q.size());
  }
  ContrastiveResult r;
  if (n < 2) {
    r.degenerate = true;
    return r;
  }
  for (const auto& q : queries) {
    if (cfg.form == ContrastiveForm::kPairwiseHinge) {
      const double norm = static_cast<double>(n * (n - 1));
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          if (i == j) continue;
          const double d = poincare::geodesic_distance(q[i], q[j]);
          if (labels[i] == labels[j]) {
            r.positive += d / norm;
          } else {
            const double margin = cfg.margin_base * static_cast<double>(tree.tree_distance(labels[i], labels[j]));
            r.negative += std::max(0.0, margin - d) / norm;
          }
        }
      }
    } else {
      double sum = 0.0;
      std::size_t triples = 0;
      for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t p = 0; p < n; ++p) {
          if (p == a || labels[p] != labels[a]) continue;
          const double dp = poincare::geodesic_distance(q[a], q[p]);
          for (std::size_t m = 0; m < n; ++m) {
            if (labels[m] == labels[a]) continue;
            const double margin = cfg.margin_base * static_cast<double>(tree.tree_distance(labels[a], labels[m]));
            sum += std::max(0.0, dp - poincare::geodesic_distance(q[a], q[m]) + margin);
            ++triples;
          }
        }
      }
      if (triples > 0) r.negative += sum / static_cast<double>(triples);
    }
  }
  r.value = r.positive + r.negative;
  return r;
}

ContrastiveVars contrastive_loss(const std::vector<QueryVars>& queries, std::span<const NodeIndex> labels,
                                 const EmotionTree& tree, const ContrastiveConfig& cfg) {
  const std::size_t n = labels.size();
  if (queries.size() != n) throw DimensionMismatch("contrastive batch", n, queries.size());
  ContrastiveVars r;
  if (n < 2) {
    r.degenerate = true;
    return r;
  }
  std::vector<ad::Var> terms;
  for (std::size_t m = 0; m < kModalityCount; ++m) {
    auto q = [&](std::size_t i) { return queries[i].modality[m]; };
    if (cfg.form == ContrastiveForm::kPairwiseHinge) {
      const double inv = 1.0 / static_cast<double>(n * (n - 1));
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          if (i == j) continue;
          ad::Var d = ad::geodesic_distance(q(i), q(j));
          ad::Var term;
          if (labels[i] == labels[j]) {
            term = ad::scale(d, inv);
            r.positive += term.scalar();
          } else {
            const double margin = cfg.margin_base * static_cast<double>(tree.tree_distance(labels[i], labels[j]));
            term = ad::scale(ad::relu(ad::affine(d, -1.0, margin)), inv);
            r.negative += term.scalar();
          }
          terms.push_back(term);
        }
      }
    } else {
      std::vector<ad::Var> triples;
      for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t p = 0; p < n; ++p) {
          if (p == a || labels[p] != labels[a]) continue;
          ad::Var dp = ad::geodesic_distance(q(a), q(p));
          for (std::size_t k = 0; k < n; ++k) {
            if (labels[k] == labels[a]) continue;
            const double margin = cfg.margin_base * static_cast<double>(tree.tree_distance(labels[a], labels[k]));
            triples.push_back(ad::relu(ad::affine(ad::sub(dp, ad::geodesic_distance(q(a), q(k))), 1.0, margin)));
          }
        }
      }
      if (!triples.empty()) {
        ad::Var term = ad::scale(ad::sum(ad::concat_rows(triples)), 1.0 / static_cast<double>(triples.size()));
        r.negative += term.scalar();
        terms.push_back(term);
      }
    }
  }
  if (terms.empty()) {
    r.value = queries[0].alpha.tape()->constant(Matrix(1, 1));
  } else {
    r.value = ad::sum(ad::concat_rows(terms));
  }
  return r;
}

double path_loss(const poincare::PoincarePoint& fused, const poincare::PoincarePoint& prototype) {
  return poincare::geodesic_distance(fused, prototype);
}

ad::Var path_loss(ad::Var fused, ad::Var prototype) { return ad::geodesic_distance(fused, prototype); }

double total_loss(double task, double cont, double path, const LossWeights& w) {
  return task + w.lambda_cont * cont + w.lambda_path * path;
}

void AdamW::step(std::span<ad::Parameter* const> params) {
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.emplace_back(p->value.rows(), p->value.cols());
      v_.emplace_back(p->value.rows(), p->value.cols());
    }
  }
  if (m_.size() != params.size()) throw DimensionMismatch("optimizer parameter count", m_.size(), params.size());
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const double decay = 1.0 - cfg_.learning_rate * cfg_.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    ad::Parameter& p = *params[i];
    if (!p.trainable) continue;
    if (!p.value.same_shape(m_[i])) throw DimensionMismatch("optimizer state for " + p.name, m_[i].size(), p.value.size());
    for (std::size_t e = 0; e < p.value.size(); ++e) {
      const double g = p.grad[e];
      m_[i][e] = cfg_.beta1 * m_[i][e] + (1.0 - cfg_.beta1) * g;
      v_[i][e] = cfg_.beta2 * v_[i][e] + (1.0 - cfg_.beta2) * g * g;
      const double m_hat = m_[i][e] / bc1;
      const double v_hat = v_[i][e] / bc2;
      p.value[e] = p.value[e] * decay - cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
    }
  }
}

std::vector<TrainingSample> parse_dataset(std::istream& in, const EmotionTree& tree) {
  std::vector<TrainingSample> out;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string_view l = text::strip_cr(raw);
    if (text::is_skippable(l)) continue;
    if (!text::is_ascii(l)) throw LoadError("non-ASCII content", line);
    const auto fields = text::split_tabs(l);
    if (fields.size() != 5) throw LoadError("expected 5 tab-separated fields, got " + std::to_string(fields.size()), line);
    TrainingSample s;
    s.id = std::string(fields[0]);
    if (s.id.empty()) throw LoadError("empty sample id", line);
    NodeIndex leaf = 0;
    bool found = false;
    for (NodeIndex n : tree.leaves()) {
      if (tree.node(n).label == fields[1] || tree.node(n).id == fields[1]) {
        leaf = n;
        found = true;
        break;
      }
    }
    if (!found) throw LoadError("label is not a taxonomy leaf", line, std::string(fields[1]));
    s.label = leaf;
    for (std::size_t m = 0; m < kModalityCount; ++m) {
      s.features.values[m] = text::parse_reals(fields[2 + m], line, kModalityNames[m]);
    }
    if (!out.empty()) {
      for (std::size_t m = 0; m < kModalityCount; ++m) {
        if (s.features.values[m].size() != out.front().features.values[m].size()) {
          throw LoadError(std::string(kModalityNames[m]) + " dimension differs from earlier samples", line, s.id);
        }
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<TrainingSample> read_dataset_file(const std::string& path, const EmotionTree& tree) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open dataset file", 0, path);
  return parse_dataset(in, tree);
}

void write_dataset(std::ostream& out, std::span<const TrainingSample> samples, const EmotionTree& tree) {
  for (const auto& s : samples) {
    out << s.id << '\t' << tree.node(s.label).id;
    for (const auto& v : s.features.values) out << '\t' << text::format_reals(v.data(), v.size());
    out << '\n';
  }
}

std::vector<SampleStructure> plan_batch(const HyperEmoModel& model, std::span<const TrainingSample* const> batch,
                                        const KnowledgeBase& kb) {
  std::vector<SampleStructure> out;
  out.reserve(batch.size());
  for (const auto* s : batch) out.push_back(model.plan(s->features, kb));
  return out;
}

BatchForward batch_loss(ad::Tape& tape, HyperEmoModel& model, std::span<const TrainingSample* const> batch,
                        std::span<const SampleStructure> plans, const KnowledgeBase& kb, const ObjectiveConfig& cfg) {
  if (batch.empty()) throw InvalidInput("empty training batch");
  if (plans.size() != batch.size()) throw DimensionMismatch("batch plans", batch.size(), plans.size());
  cfg.weights.validate();
  const auto& lm = model.language_model();
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  std::vector<QueryVars> queries;
  std::vector<NodeIndex> labels;
  std::vector<ad::Var> task_terms;
  std::vector<ad::Var> path_terms;
  ad::Var prototypes = tape.param(model.tree().prototype_params());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const TrainingSample& s = *batch[i];
    ForwardVars fv = model.forward(tape, s.features, kb, plans[i], s.label);
    const int targets[2] = {model.leaf_token(s.label), lm.eos_token()};
    // Position input_length - 1 predicts the label token, the label row predicts <eos>.
    ad::Var answer = ad::slice_rows(fv.logits, fv.sequence.input_length() - 1, 2);
    task_terms.push_back(task_loss(answer, targets));

    const NodeIndex target =
        cfg.path_target == PathTarget::kGroundTruth ? s.label : plans[i].deliberation.selected_leaf;
    path_terms.push_back(path_loss(fv.queries.fused, ad::exp_map_rows(ad::slice_rows(prototypes, target, 1))));
    queries.push_back(fv.queries);
    labels.push_back(s.label);
  }

  BatchForward out;
  ad::Var task = ad::scale(ad::sum(ad::concat_rows(task_terms)), inv_n);
  ad::Var path = ad::scale(ad::sum(ad::concat_rows(path_terms)), inv_n);
  ContrastiveVars cont = contrastive_loss(queries, labels, model.tree(), cfg.contrastive);

  ad::Var total = ad::add(task, ad::scale(path, cfg.weights.lambda_path));
  if (cont.value.valid()) total = ad::add(total, ad::scale(cont.value, cfg.weights.lambda_cont));
  out.total = total;
  out.losses.task = task.scalar();
  out.losses.path = path.scalar();
  out.losses.cont = cont.value.valid() ? cont.value.scalar() : 0.0;
  out.losses.cont_negative = cont.negative;
  out.losses.contrastive_degenerate = cont.degenerate;
  out.losses.total = total.scalar();
  return out;
}

SeparationSummary separation_summary(const QueryEncoder& encoder, std::span<const TrainingSample> samples) {
  std::vector<SampleQueries> qs;
  qs.reserve(samples.size());
  for (const auto& s : samples) qs.push_back(encoder.encode(s.features));
  SeparationSummary out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t j = i + 1; j < samples.size(); ++j) {
      const bool same = samples[i].label == samples[j].label;
      auto& acc = same ? out.same : out.different;
      for (std::size_t m = 0; m < kModalityCount; ++m) {
        const Modality mod = kModalities[m];
        acc[m] += poincare::geodesic_distance(qs[i][mod], qs[j][mod]);
      }
      ++(same ? out.same_pairs : out.different_pairs);
    }
  }
  for (std::size_t m = 0; m < kModalityCount; ++m) {
    if (out.same_pairs > 0) out.same[m] /= static_cast<double>(out.same_pairs);
    if (out.different_pairs > 0) out.different[m] /= static_cast<double>(out.different_pairs);
  }
  return out;
}

void TrainingReport::write(std::ostream& out) const {
  for (const auto& e : epochs) {
    out << "epoch " << e.epoch << " task " << text::format_real(e.task) << " cont " << text::format_real(e.cont)
        << " path " << text::format_real(e.path) << " total " << text::format_real(e.total) << " cont_negative "
        << text::format_real(e.cont_negative) << '\n';
  }
  for (std::size_t m = 0; m < kModalityCount; ++m) {
    out << "separation " << kModalityNames[m] << " same " << text::format_real(separation.same[m]) << " different "
        << text::format_real(separation.different[m]) << '\n';
  }
}

TrainingReport train_toy(HyperEmoModel& model, std::span<const TrainingSample> dataset, const KnowledgeBase& kb,
                         const TrainConfig& cfg, const std::function<void(const EpochRecord&)>& on_epoch) {
  if (dataset.empty()) throw InvalidInput("empty training set");
  if (cfg.batch_size == 0) throw InvalidInput("batch size must be positive");
  cfg.objective.weights.validate();

  TrainingReport report;
  AdamW opt(cfg.optimizer);
  const auto params = model.trainable_parameters();
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);
    EpochRecord rec;
    rec.epoch = epoch;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<const TrainingSample*> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(&dataset[order[i]]);

      const auto plans = plan_batch(model, batch, kb);
      ad::Tape tape;
      BatchForward f = batch_loss(tape, model, batch, plans, kb, cfg.objective);
      if (!std::isfinite(f.losses.total)) throw NumericalFailure("non-finite training loss", step);
      model.zero_grad();
      tape.backward(f.total);
      opt.step(params);
      ++step;

      rec.task += f.losses.task;
      rec.cont += f.losses.cont;
      rec.path += f.losses.path;
      rec.total += f.losses.total;
      rec.cont_negative += f.losses.cont_negative;
      report.contrastive_degenerate = report.contrastive_degenerate || f.losses.contrastive_degenerate;
      ++batches;
    }
    const double inv = 1.0 / static_cast<double>(batches);
    rec.task *= inv;
    rec.cont *= inv;
    rec.path *= inv;
    rec.total *= inv;
    rec.cont_negative *= inv;
    report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  report.separation = separation_summary(model.encoder(), dataset);
  return report;
}

std::vector<TensorGradCheck> check_gradients(HyperEmoModel& model, std::span<const TrainingSample> batch,
                                             const KnowledgeBase& kb, const ObjectiveConfig& objective,
                                             const GradCheckConfig& cfg) {
  std::vector<const TrainingSample*> ptrs;
  for (const auto& s : batch) ptrs.push_back(&s);
  const auto plans = plan_batch(model, ptrs, kb);

  auto evaluate = [&]() {
    ad::Tape tape;
    return batch_loss(tape, model, ptrs, plans, kb, objective).losses.total;
  };

  model.zero_grad();
  {
    ad::Tape tape;
    BatchForward f = batch_loss(tape, model, ptrs, plans, kb, objective);
    tape.backward(f.total);
  }

  std::vector<TensorGradCheck> out;
  for (ad::Parameter* p : model.trainable_parameters()) {
    TensorGradCheck r;
    r.name = p->name;
    r.elements = p->value.size();
    for (std::size_t e = 0; e < p->value.size(); ++e) {
      const double saved = p->value[e];
      p->value[e] = saved + cfg.step;
      const double up = evaluate();
      p->value[e] = saved - cfg.step;
      const double down = evaluate();
      p->value[e] = saved;
      const double numeric = (up - down) / (2.0 * cfg.step);
      const double analytic = p->grad[e];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), cfg.floor});
      const double rel = std::abs(analytic - numeric) / denom;
      if (rel > r.max_relative_error) {
        r.max_relative_error = rel;
        r.worst_index = e;
      }
    }
    r.passed = r.max_relative_error < cfg.tolerance;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace hyperemo
