#include "hyperemo/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "hyperemo/checkpoint.hpp"
#include "hyperemo/errors.hpp"
#include "hyperemo/synthetic.hpp"
#include "hyperemo/text_io.hpp"

namespace hyperemo::cli {

void EngineConfig::validate() const {
  model.validate();
  weights.validate();
  if (!(std::isfinite(margin_base) && margin_base >= 0.0)) throw InvalidInput("margin base must be non-negative");
}

std::vector<FeatureRecord> parse_features(std::istream& in) {
  std::vector<FeatureRecord> out;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string_view l = text::strip_cr(raw);
    if (text::is_skippable(l)) continue;
    const auto fields = text::split_tabs(l);
    if (fields.size() != 1 + kModalityCount) {
      throw LoadError("expected 4 tab-separated fields, got " + std::to_string(fields.size()), line);
    }
    FeatureRecord r;
    r.id = std::string(fields[0]);
    r.line = line;
    if (r.id.empty()) throw LoadError("empty record id", line);
    for (std::size_t m = 0; m < kModalityCount; ++m) {
      r.features.values[m] = text::parse_reals(fields[1 + m], line, kModalityNames[m]);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<FeatureRecord> read_features_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open features file", 0, path.string());
  return parse_features(in);
}

void write_features(std::ostream& out, std::span<const FeatureRecord> records) {
  for (const auto& r : records) {
    out << r.id;
    for (const auto& v : r.features.values) out << '\t' << text::format_reals(v.data(), v.size());
    out << '\n';
  }
}

EmotionTree load_taxonomy(const EngineConfig& cfg) {
  if (cfg.taxonomy.empty()) return EmotionTree::from_rows(synthetic::fixture_taxonomy(), cfg.model.d_h, cfg.model.seed);
  return EmotionTree::load_file(cfg.taxonomy, cfg.model.d_h, cfg.model.seed);
}

HyperEmoModel load_model(const EngineConfig& cfg) {
  HyperEmoModel model(load_taxonomy(cfg), cfg.model);
  if (!cfg.checkpoint.empty()) checkpoint::load_into(cfg.checkpoint, model.parameters());
  return model;
}

KnowledgeBase load_kb(const EngineConfig& cfg, const EmotionTree& tree) {
  if (cfg.kb.empty()) return KnowledgeBase::build({}, tree);
  return KnowledgeBase::read_snapshot_file(cfg.kb, tree);
}

namespace {

void check_features(const HyperEmoModel& model, const FeatureRecord& r) {
  for (std::size_t m = 0; m < kModalityCount; ++m) {
    const std::size_t want = model.config().feature_dims[m];
    if (r.features.values[m].size() != want) {
      throw LoadError(std::string(kModalityNames[m]) + " features: expected " + std::to_string(want) + " values, got " +
                          std::to_string(r.features.values[m].size()),
                      r.line, r.id);
    }
  }
}

std::string path_string(const EmotionTree& tree, const std::vector<NodeIndex>& path) {
  std::string out;
  for (NodeIndex n : path) {
    if (!out.empty()) out += " > ";
    out += tree.node(n).id;
  }
  return out;
}

void print_text(std::ostream& out, const FeatureRecord& r, const Prediction& p, const EmotionTree& tree,
                const KnowledgeBase& kb) {
  const auto& d = p.deliberation;
  out << "sample " << r.id << '\n';
  out << "path " << path_string(tree, d.path) << '\n';
  out << "selected " << tree.node(d.selected_leaf).id << '\n';
  for (std::size_t l = 0; l < d.level_beams.size(); ++l) {
    out << "beam " << (l + 1);
    for (const auto& s : d.level_beams[l]) out << ' ' << tree.node(s.node).id << '=' << text::format_real(s.score);
    out << '\n';
  }
  for (std::size_t i = 0; i < d.evidence.size(); ++i) {
    const auto& item = kb.item(d.evidence[i].item);
    out << "evidence " << (i + 1) << ' ' << item.id << ' ' << tree.node(item.leaf).id << ' '
        << text::format_real(d.evidence[i].distance) << ' ' << item.caption << '\n';
  }
  out << "predicted " << tree.node(p.predicted_leaf).id << '\n';
}

void print_json(std::ostream& out, const FeatureRecord& r, const Prediction& p, const EmotionTree& tree,
                const KnowledgeBase& kb) {
  const auto& d = p.deliberation;
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["path"] = nlohmann::json::array();
  for (NodeIndex n : d.path) j["path"].push_back(tree.node(n).id);
  j["selected"] = tree.node(d.selected_leaf).id;
  j["beams"] = nlohmann::json::array();
  for (const auto& level : d.level_beams) {
    nlohmann::ordered_json beam = nlohmann::json::array();
    for (const auto& s : level) beam.push_back({{"node", tree.node(s.node).id}, {"score", s.score}});
    j["beams"].push_back(beam);
  }
  j["evidence"] = nlohmann::json::array();
  for (const auto& e : d.evidence) {
    const auto& item = kb.item(e.item);
    j["evidence"].push_back(nlohmann::ordered_json{
        {"id", item.id}, {"leaf", tree.node(item.leaf).id}, {"distance", e.distance}, {"caption", item.caption}});
  }
  j["predicted"] = tree.node(p.predicted_leaf).id;
  out << j.dump() << '\n';
}

synthetic::ClusterConfig cluster_config(const EngineConfig& cfg, std::size_t per_leaf, double noise = 0.15) {
  synthetic::ClusterConfig c;
  c.feature_dims = cfg.model.feature_dims;
  c.per_leaf = per_leaf;
  c.noise = noise;
  c.seed = cfg.model.seed;
  return c;
}

struct TrainingSetup {
  std::vector<TrainingSample> dataset;
  KnowledgeBase kb;
};

TrainingSetup training_setup(const EngineConfig& cfg, const TrainOptions& opt, const HyperEmoModel& model) {
  TrainingSetup s;
  if (!opt.dataset.empty()) {
    s.dataset = read_dataset_file(opt.dataset.string(), model.tree());
    s.kb = load_kb(cfg, model.tree());
    return s;
  }
  synthetic::ClusterSampler sampler(model.tree(), cluster_config(cfg, opt.per_leaf));
  s.dataset = sampler.dataset(opt.per_leaf);
  if (!cfg.kb.empty()) {
    s.kb = load_kb(cfg, model.tree());
  } else {
    s.kb = KnowledgeBase::build_through_heads(sampler.evidence(opt.evidence_per_leaf), model.tree(), model.encoder());
  }
  return s;
}

TrainConfig train_config(const EngineConfig& cfg, const TrainOptions& opt) {
  TrainConfig t;
  t.epochs = opt.epochs;
  t.batch_size = opt.batch_size;
  t.shuffle = opt.shuffle;
  t.seed = cfg.model.seed;
  t.optimizer.learning_rate = opt.learning_rate;
  t.objective.weights = cfg.weights;
  t.objective.contrastive.margin_base = cfg.margin_base;
  return t;
}

}  // namespace

void cmd_build_kb(const EngineConfig& cfg, const BuildKbOptions& opt, std::ostream& out) {
  const auto records = read_evidence_file(opt.records);
  KnowledgeBase kb;
  EmotionTree tree = load_taxonomy(cfg);
  if (opt.map_through_heads) {
    HyperEmoModel model = load_model(cfg);
    kb = KnowledgeBase::build_through_heads(records, model.tree(), model.encoder());
  } else {
    kb = KnowledgeBase::build(records, tree);
  }
  std::ofstream file(opt.out, std::ios::binary);
  if (!file) throw LoadError("cannot open snapshot for writing", 0, opt.out.string());
  kb.write_snapshot(file, tree);
  file.close();
  if (!file) throw LoadError("failed writing snapshot", 0, opt.out.string());

  out << "items " << kb.size() << '\n';
  for (NodeIndex leaf : tree.leaves()) out << "leaf " << tree.node(leaf).id << ' ' << kb.by_leaf(leaf).size() << '\n';
}

void cmd_deliberate(const EngineConfig& cfg, const DeliberateOptions& opt, std::ostream& out) {
  HyperEmoModel model = load_model(cfg);
  const KnowledgeBase kb = load_kb(cfg, model.tree());
  const auto records = read_features_file(opt.features);
  for (const auto& r : records) {
    check_features(model, r);
    const Prediction p = model.predict(r.features, kb);
    if (opt.json) {
      print_json(out, r, p, model.tree(), kb);
    } else {
      print_text(out, r, p, model.tree(), kb);
    }
    if (opt.dump_graph) {
      std::ostringstream g;
      p.graph.dump(g);
      std::istringstream lines(g.str());
      for (std::string l; std::getline(lines, l);) out << "graph " << l << '\n';
    }
    if (opt.dump_sequence) {
      std::ostringstream s;
      p.sequence.dump(s);
      std::istringstream lines(s.str());
      for (std::string l; std::getline(lines, l);) out << "sequence " << l << '\n';
    }
  }
}

void cmd_train_toy(const EngineConfig& cfg, const TrainOptions& opt, std::ostream& out) {
  HyperEmoModel model = load_model(cfg);
  const TrainingSetup setup = training_setup(cfg, opt, model);
  const TrainingReport report = train_toy(model, setup.dataset, setup.kb, train_config(cfg, opt));
  report.write(out);
  if (!opt.save.empty()) {
    const auto ps = model.parameters();
    const std::vector<const ad::Parameter*> cps(ps.begin(), ps.end());
    checkpoint::save(opt.save, cps);
  }
}

bool cmd_check_grads(const EngineConfig& cfg, const GradCheckConfig& check, std::ostream& out) {
  HyperEmoModel model = load_model(cfg);
  synthetic::ClusterSampler sampler(model.tree(), cluster_config(cfg, 1, 0.2));
  const auto kb = KnowledgeBase::build_through_heads(sampler.evidence(1), model.tree(), model.encoder());
  const auto pool = sampler.dataset(1);
  // Two samples share a coarse emotion and two do not, so every loss term is live.
  const std::vector<TrainingSample> batch{pool[0], pool[1], pool[4], pool[9]};
  ObjectiveConfig objective;
  objective.weights = cfg.weights;
  objective.contrastive.margin_base = cfg.margin_base;
  const auto results = check_gradients(model, batch, kb, objective, check);
  bool all = true;
  for (const auto& r : results) {
    out << "tensor " << r.name << " elements " << r.elements << " max_rel " << text::format_real(r.max_relative_error)
        << ' ' << (r.passed ? "PASS" : "FAIL") << '\n';
    all = all && r.passed;
  }
  out << (all ? "all tensors pass" : "gradient check failed") << '\n';
  return all;
}

void cmd_sweep(const EngineConfig& cfg, const SweepOptions& opt, std::ostream& out) {
  if (opt.values.empty()) throw InvalidInput("sweep needs at least one value");
  const bool integral = opt.axis == "k" || opt.axis == "Q";
  if (!integral && opt.axis != "lambda_cont" && opt.axis != "lambda_path") {
    throw InvalidInput("unknown sweep axis '" + opt.axis + "' (expected k, Q, lambda_cont or lambda_path)");
  }
  for (double v : opt.values) {
    EngineConfig c = cfg;
    if (integral && !(v >= 1.0 && v == std::floor(v))) {
      throw InvalidInput("axis " + opt.axis + " needs positive integers, got " + text::format_real(v));
    }
    if (opt.axis == "k") c.model.beam.top_k = static_cast<std::size_t>(v);
    if (opt.axis == "Q") c.model.graph_tokens = static_cast<std::size_t>(v);
    if (opt.axis == "lambda_cont") c.weights.lambda_cont = v;
    if (opt.axis == "lambda_path") c.weights.lambda_path = v;
    c.validate();

    HyperEmoModel model = load_model(c);
    const TrainingSetup setup = training_setup(c, opt.train, model);
    const TrainingReport report = train_toy(model, setup.dataset, setup.kb, train_config(c, opt.train));
    std::size_t correct = 0;
    for (const auto& s : setup.dataset) correct += model.predict(s.features, setup.kb).predicted_leaf == s.label;
    const double accuracy = static_cast<double>(correct) / static_cast<double>(setup.dataset.size());
    out << opt.axis << ' ' << (integral ? std::to_string(static_cast<std::size_t>(v)) : text::format_real(v))
        << " total " << text::format_real(report.epochs.empty() ? 0.0 : report.epochs.back().total) << " accuracy "
        << text::format_real(accuracy) << '\n';
  }
}

void cmd_synth(const EngineConfig& cfg, const SynthOptions& opt, std::ostream& out) {
  const EmotionTree tree = load_taxonomy(cfg);
  std::filesystem::create_directories(opt.out_dir);
  auto open = [&](const char* name) {
    std::ofstream f(opt.out_dir / name);
    if (!f) throw LoadError("cannot open for writing", 0, (opt.out_dir / name).string());
    return f;
  };
  synthetic::ClusterSampler sampler(tree, cluster_config(cfg, opt.per_leaf, opt.noise));
  const auto dataset = sampler.dataset(opt.per_leaf);
  const auto evidence = sampler.evidence(opt.evidence_per_leaf);
  std::vector<FeatureRecord> queries;
  for (NodeIndex leaf : tree.leaves()) {
    for (std::size_t i = 0; i < opt.queries_per_leaf; ++i) {
      queries.push_back({"q" + std::to_string(queries.size()) + "-" + tree.node(leaf).id, sampler.draw(leaf), 0});
    }
  }
  {
    auto f = open("taxonomy.tsv");
    tree.write(f);
  }
  {
    auto f = open("dataset.tsv");
    write_dataset(f, dataset, tree);
  }
  {
    auto f = open("evidence.tsv");
    write_evidence(f, evidence);
  }
  {
    auto f = open("queries.tsv");
    write_features(f, queries);
  }
  out << "taxonomy " << tree.size() << " nodes\n"
      << "dataset " << dataset.size() << " samples\n"
      << "evidence " << evidence.size() << " records\n"
      << "queries " << queries.size() << " records\n";
}

namespace {

void add_engine_options(CLI::App& app, EngineConfig& cfg) {
  auto& m = cfg.model;
  app.add_option("--taxonomy", cfg.taxonomy, "Taxonomy TSV (default: built-in 17-node fixture)");
  app.add_option("--kb", cfg.kb, "Knowledge-base snapshot (default: empty)");
  app.add_option("--checkpoint", cfg.checkpoint, "Parameter checkpoint to load (default: seeded init)");
  app.add_option("--feature-dims", m.feature_dims, "Audio, visual and text feature sizes")->expected(3)->delimiter(',');
  app.add_option("--d-h", m.d_h, "Hyperbolic dimension d_h");
  app.add_option("--d-g", m.d_g, "Graph feature dimension d_g");
  app.add_option("--d-llm", m.d_llm, "Language-model width d_llm");
  app.add_option("--heads", m.heads, "Attention heads H");
  app.add_option("--tree-layers", m.tree_layers, "Tree-attention layers");
  app.add_option("--graph-tokens,-Q", m.graph_tokens, "Graph tokens Q");
  app.add_option("--fusion-rows", m.fusion_rows, "Fusion rows r in the prompt");
  app.add_option("--beam-width,-B", m.beam.beam_width, "Beam width B");
  app.add_option("--top-k,-k", m.beam.top_k, "Evidence items k");
  app.add_option("--proximity", m.proximity_threshold, "Evidence proximity edge threshold");
  app.add_flag("--strict-single-residual", m.strict_single_residual, "Drop the second residual around the FFN");
  app.add_option("--lambda-cont", cfg.weights.lambda_cont, "Contrastive loss weight");
  app.add_option("--lambda-path", cfg.weights.lambda_path, "Path loss weight");
  app.add_option("--margin-base", cfg.margin_base, "Contrastive margin per tree hop");
  app.add_option("--seed", m.seed, "Seed for parameters and synthetic data");
}

void add_train_options(CLI::App& sub, TrainOptions& t) {
  sub.add_option("--dataset", t.dataset, "Training dataset TSV (default: synthetic clusters)");
  sub.add_option("--per-leaf", t.per_leaf, "Synthetic samples per leaf");
  sub.add_option("--evidence-per-leaf", t.evidence_per_leaf, "Synthetic evidence items per leaf");
  sub.add_option("--epochs", t.epochs, "Training epochs");
  sub.add_option("--batch-size", t.batch_size, "Batch size");
  sub.add_option("--lr", t.learning_rate, "AdamW learning rate");
  sub.add_flag("--shuffle", t.shuffle, "Shuffle batches every epoch");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hyperbolic deliberative retrieval for multimodal emotion recognition"};
  app.set_config("--config", "", "INI/TOML file with option values; command-line flags win");
  app.require_subcommand(1);

  EngineConfig cfg;
  add_engine_options(app, cfg);

  BuildKbOptions kb_opt;
  auto* build = app.add_subcommand("build-kb", "Ingest evidence records into a knowledge-base snapshot");
  build->add_option("--records", kb_opt.records, "Evidence TSV")->required();
  build->add_option("--out", kb_opt.out, "Snapshot path to write")->required();
  build->add_flag("--map-through-heads", kb_opt.map_through_heads, "Treat vectors as raw features");

  DeliberateOptions d_opt;
  auto* delib = app.add_subcommand("deliberate", "Run deliberative retrieval and prediction on feature records");
  delib->add_option("--features", d_opt.features, "Features TSV")->required();
  delib->add_flag("--json", d_opt.json, "One JSON object per record");
  delib->add_flag("--dump-graph", d_opt.dump_graph, "Append evidence graph dump lines");
  delib->add_flag("--dump-sequence", d_opt.dump_sequence, "Append prompt segment dump lines");

  TrainOptions t_opt;
  auto* train = app.add_subcommand("train-toy", "Train on a toy dataset and report per-epoch losses");
  add_train_options(*train, t_opt);
  train->add_option("--save", t_opt.save, "Checkpoint path to write after training");

  GradCheckConfig g_opt;
  auto* grads = app.add_subcommand("check-grads", "Finite-difference check of every trainable tensor");
  grads->add_option("--step", g_opt.step, "Central-difference step");
  grads->add_option("--tolerance", g_opt.tolerance, "Maximum relative error");

  SweepOptions s_opt;
  s_opt.train.epochs = 5;
  auto* sweep = app.add_subcommand("sweep", "Train once per setting of one axis and report the toy metric");
  sweep->add_option("--axis", s_opt.axis, "k, Q, lambda_cont or lambda_path")
      ->required()
      ->check(CLI::IsMember({"k", "Q", "lambda_cont", "lambda_path"}));
  sweep->add_option("--values", s_opt.values, "Comma-separated values")->required()->delimiter(',');
  add_train_options(*sweep, s_opt.train);

  SynthOptions y_opt;
  auto* synth = app.add_subcommand("synth", "Write a synthetic taxonomy, dataset, evidence and queries");
  synth->add_option("--out-dir", y_opt.out_dir, "Output directory")->required();
  synth->add_option("--per-leaf", y_opt.per_leaf, "Training samples per leaf");
  synth->add_option("--evidence-per-leaf", y_opt.evidence_per_leaf, "Evidence records per leaf");
  synth->add_option("--queries-per-leaf", y_opt.queries_per_leaf, "Query records per leaf");
  synth->add_option("--noise", y_opt.noise, "Cluster noise standard deviation");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Help requests exit 0; everything else is a usage error.
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  if (grads->parsed()) {
    // Small sizes keep the check fast unless the caller asked otherwise.
    auto unset = [&](const char* name) { return app.count(name) == 0; };
    if (unset("--feature-dims")) cfg.model.feature_dims = {6, 6, 6};
    if (unset("--d-h")) cfg.model.d_h = 8;
    if (unset("--d-g")) cfg.model.d_g = 8;
    if (unset("--d-llm")) cfg.model.d_llm = 16;
    if (unset("--graph-tokens")) cfg.model.graph_tokens = 3;
    if (unset("--fusion-rows")) cfg.model.fusion_rows = 2;
  }

  try {
    cfg.validate();
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (build->parsed()) cmd_build_kb(cfg, kb_opt, out);
    if (delib->parsed()) cmd_deliberate(cfg, d_opt, out);
    if (train->parsed()) cmd_train_toy(cfg, t_opt, out);
    if (grads->parsed() && !cmd_check_grads(cfg, g_opt, out)) return kNumericalFailure;
    if (sweep->parsed()) cmd_sweep(cfg, s_opt, out);
    if (synth->parsed()) cmd_synth(cfg, y_opt, out);
  } catch (const NumericalFailure& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kOk;
}

}  // namespace hyperemo::cli
