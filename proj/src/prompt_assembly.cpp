#include "hyperemo/prompt_assembly.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

#include "hyperemo/errors.hpp"
#include "hyperemo/text_io.hpp"

namespace hyperemo {

std::string_view segment_name(Segment s) {
  switch (s) {
    case Segment::kBos: return "bos";
    case Segment::kMmOpen: return "mm_open";
    case Segment::kFusion: return "fusion";
    case Segment::kText: return "text";
    case Segment::kMmClose: return "mm_close";
    case Segment::kGraph: return "graph";
    case Segment::kTask: return "task";
    case Segment::kLabel: return "label";
  }
  return "?";
}

std::size_t PromptSequence::length() const {
  std::size_t n = 0;
  for (const auto& [tag, rows] : segments) n += rows.rows();
  return n;
}

std::size_t PromptSequence::width() const { return segments.empty() ? 0 : segments.front().second.cols(); }

bool PromptSequence::has_label() const { return !segments.empty() && segments.back().first == Segment::kLabel; }

std::size_t PromptSequence::segment_rows(Segment s) const {
  for (const auto& [tag, rows] : segments) {
    if (tag == s) return rows.rows();
  }
  return 0;
}

Matrix PromptSequence::rows() const {
  Matrix out(length(), width());
  std::size_t at = 0;
  for (const auto& [tag, rows] : segments) {
    std::copy(rows.data(), rows.data() + rows.size(), out.data() + at);
    at += rows.size();
  }
  return out;
}

void PromptSequence::dump(std::ostream& out) const {
  for (const auto& [tag, rows] : segments) {
    out << segment_name(tag) << ' ' << rows.rows() << ' ' << std::hex << std::setw(16) << std::setfill('0')
        << text::checksum(rows.data(), rows.size()) << std::dec << std::setfill(' ') << '\n';
  }
}

MarkerEmbeddings MarkerEmbeddings::init(std::size_t width, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 0.02);
  Matrix m(3, width);
  for (auto& x : m.storage()) x = normal(rng);
  return MarkerEmbeddings{ad::Parameter("prompt.markers", std::move(m))};
}

namespace {

Matrix marker_row(const Matrix& markers, std::size_t r) {
  return Matrix::row(markers.row_span(r));
}

void check_width(const Matrix& m, std::size_t width, Segment s) {
  if (m.rows() > 0 && m.cols() != width) {
    throw DimensionMismatch(std::string("prompt segment '") + std::string(segment_name(s)) + "' width", width,
                            m.cols());
  }
}

}  // namespace

PromptSequence assemble(const Matrix& fusion_rows, const Matrix& text_rows, const Matrix& graph_tokens,
                        const Matrix& task_rows, const Matrix& markers, const std::optional<Matrix>& label_rows,
                        std::optional<std::size_t> expected_graph_rows) {
  if (markers.rows() != 3) throw DimensionMismatch("marker rows", 3, markers.rows());
  const std::size_t width = markers.cols();
  check_width(fusion_rows, width, Segment::kFusion);
  check_width(text_rows, width, Segment::kText);
  check_width(graph_tokens, width, Segment::kGraph);
  check_width(task_rows, width, Segment::kTask);
  if (label_rows) check_width(*label_rows, width, Segment::kLabel);
  if (expected_graph_rows && graph_tokens.rows() != *expected_graph_rows) {
    throw DimensionMismatch("prompt segment 'graph' rows", *expected_graph_rows, graph_tokens.rows());
  }

  auto normalize = [width](const Matrix& m) { return m.rows() == 0 ? Matrix(0, width) : m; };
  PromptSequence seq;
  seq.segments.emplace_back(Segment::kBos, marker_row(markers, kBosRow));
  seq.segments.emplace_back(Segment::kMmOpen, marker_row(markers, kMmOpenRow));
  seq.segments.emplace_back(Segment::kFusion, normalize(fusion_rows));
  seq.segments.emplace_back(Segment::kText, normalize(text_rows));
  seq.segments.emplace_back(Segment::kMmClose, marker_row(markers, kMmCloseRow));
  seq.segments.emplace_back(Segment::kGraph, normalize(graph_tokens));
  seq.segments.emplace_back(Segment::kTask, normalize(task_rows));
  if (label_rows) seq.segments.emplace_back(Segment::kLabel, normalize(*label_rows));
  return seq;
}

std::size_t AssembledVars::input_length() const {
  std::size_t n = 0;
  for (const auto& [tag, count] : layout) {
    if (tag != Segment::kLabel) n += count;
  }
  return n;
}

AssembledVars assemble(ad::Var fusion_rows, ad::Var text_rows, ad::Var graph_tokens, ad::Var task_rows,
                       ad::Var markers, ad::Var label_rows) {
  if (markers.rows() != 3) throw DimensionMismatch("marker rows", 3, markers.rows());
  const std::size_t width = markers.cols();
  AssembledVars out;
  std::vector<ad::Var> parts;
  auto push = [&](Segment s, ad::Var v) {
    const std::size_t rows = v.valid() ? v.rows() : 0;
    if (rows > 0) {
      if (v.cols() != width) {
        throw DimensionMismatch(std::string("prompt segment '") + std::string(segment_name(s)) + "' width", width,
                                v.cols());
      }
      parts.push_back(v);
    }
    out.layout.emplace_back(s, rows);
  };
  push(Segment::kBos, ad::slice_rows(markers, kBosRow, 1));
  push(Segment::kMmOpen, ad::slice_rows(markers, kMmOpenRow, 1));
  push(Segment::kFusion, fusion_rows);
  push(Segment::kText, text_rows);
  push(Segment::kMmClose, ad::slice_rows(markers, kMmCloseRow, 1));
  push(Segment::kGraph, graph_tokens);
  push(Segment::kTask, task_rows);
  if (label_rows.valid()) push(Segment::kLabel, label_rows);
  out.rows = ad::concat_rows(parts);
  return out;
}

MockLanguageModel::MockLanguageModel(std::vector<std::string> leaf_labels, std::size_t width, std::mt19937_64& rng)
    : vocab_(std::move(leaf_labels)), leaf_count_(vocab_.size()) {
  vocab_.insert(vocab_.end(), {"+", "-"});
  for (char c = '0'; c <= '9'; ++c) vocab_.emplace_back(1, c);
  vocab_.insert(vocab_.end(), {"<task>", "<eos>"});

  const std::size_t v = vocab_.size();
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix emb(v, width);
  for (auto& x : emb.storage()) x = normal(rng);
  Matrix cls(v, width);
  const double sd = 1.0 / std::sqrt(static_cast<double>(width));
  for (auto& x : cls.storage()) x = sd * normal(rng);
  embedding_ = ad::Parameter("lm.embedding", std::move(emb), false);
  classifier_ = ad::Parameter("lm.classifier", std::move(cls), false);
  bias_ = ad::Parameter("lm.bias", Matrix(1, v), false);
}

ad::Var MockLanguageModel::logits(ad::Var rows) const {
  if (rows.cols() != width()) throw DimensionMismatch("language model input width", width(), rows.cols());
  const std::size_t n = rows.rows();
  if (n == 0) throw InvalidInput("language model: empty sequence");
  ad::Tape& tape = *rows.tape();
  // Causal running mean: row i averages rows 0..i.
  Matrix avg(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) avg(i, j) = 1.0 / static_cast<double>(i + 1);
  }
  ad::Var prefix = ad::matmul(tape.constant(std::move(avg)), rows);
  return ad::linear(prefix, tape.param(classifier_), tape.param(bias_));
}

Matrix MockLanguageModel::token_embeddings(std::span<const int> tokens) const {
  Matrix out(tokens.size(), width());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const int t = tokens[i];
    if (t < 0 || static_cast<std::size_t>(t) >= vocab_.size()) {
      throw InvalidInput("token id " + std::to_string(t) + " outside the vocabulary");
    }
    const auto src = embedding_.value.row_span(static_cast<std::size_t>(t));
    std::copy(src.begin(), src.end(), out.row_span(i).begin());
  }
  return out;
}

int MockLanguageModel::token_id(std::string_view token) const {
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    if (vocab_[i] == token) return static_cast<int>(i);
  }
  throw NotFound("token '" + std::string(token) + "' not in the vocabulary");
}

void MockLanguageModel::silence() { classifier_.value.fill(0.0); }

std::vector<ad::Parameter*> MockLanguageModel::parameters() { return {&embedding_, &classifier_, &bias_}; }

Matrix run_consumer(const PromptSequence& seq, const SequenceConsumer& consumer) {
  if (seq.width() != consumer.width()) {
    throw DimensionMismatch("consumer input width (sequence length " + std::to_string(seq.length()) + ")",
                            consumer.width(), seq.width());
  }
  ad::Tape tape;
  return consumer.logits(tape.constant(seq.rows())).value();
}

}  // namespace hyperemo
