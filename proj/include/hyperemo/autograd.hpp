#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hyperemo/matrix.hpp"

// Minimal reverse-mode differentiation over dense matrices. A Tape records
// every operation of one forward pass; backward() walks it in reverse and
// accumulates gradients into the Parameters that were bound to it.

namespace hyperemo::ad {

struct Parameter {
  Parameter() = default;
  Parameter(std::string n, Matrix v, bool train = true)
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()), trainable(train) {}

  void zero_grad() { grad = Matrix(value.rows(), value.cols()); }

  std::string name;
  Matrix value;
  Matrix grad;
  bool trainable = true;
};

class Tape;

class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double scalar() const;  // value of a 1x1 var
  Tape* tape() const noexcept { return tape_; }
  std::uint32_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* t, std::uint32_t id) : tape_(t), id_(id) {}

  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

class Tape {
 public:
  // Receives the gradient flowing into the node's output.
  using Backward = std::function<void(Tape&, const Matrix&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  // Binds a parameter. Repeated binds on one tape return the same node.
  Var param(Parameter& p);

  // Records an op output. `inputs` decide whether the node needs a gradient.
  Var record(Matrix value, std::span<const Var> inputs, Backward backward);

  // Seeds d(root)/d(root) = 1 for a 1x1 root and propagates. Gradients of
  // trainable parameters are added into Parameter::grad.
  void backward(Var root);

  const Matrix& value(Var v) const { return nodes_[v.id()].value; }
  bool needs_grad(Var v) const { return nodes_[v.id()].needs_grad; }
  // Adds g into the gradient slot of v (no-op for constants).
  void accumulate(Var v, const Matrix& g);
  // Mutable gradient slot of v, allocated on first use. Only valid if needs_grad(v).
  Matrix& grad_slot(Var v);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::uint32_t> bound_;
};

// A boolean N x N mask; true means attention is allowed.
struct AttentionMask {
  std::size_t size = 0;
  std::vector<std::uint8_t> allowed;  // row-major

  bool operator()(std::size_t i, std::size_t j) const { return allowed[i * size + j] != 0; }
};

// Logit written into blocked entries before the softmax.
inline constexpr double kBlockedLogit = -1e9;

// Elementwise / structural ops.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var add_row(Var a, Var row);  // broadcast a 1 x n row over every row of a
Var scale(Var a, double s);
Var affine(Var a, double s, double b);  // s * a + b elementwise
Var mul_scalar(Var s, Var a);           // (1x1) s times a
Var hadamard(Var a, Var b);
Var relu(Var a);
Var gelu(Var a);
Var sum(Var a);   // 1x1
Var mean(Var a);  // 1x1

Var matmul(Var a, Var b);     // a * b
Var matmul_bt(Var a, Var b);  // a * b^T
// x: m x in, w: out x in, b: 1 x out (optional)  ->  x w^T + b
Var linear(Var x, Var w, Var b = {});

Var slice_rows(Var a, std::size_t first, std::size_t count);
Var slice_cols(Var a, std::size_t first, std::size_t count);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var pick(Var a, std::size_t r, std::size_t c);  // 1x1
Var reshape(Var a, std::size_t rows, std::size_t cols);
Var resize_cols(Var a, std::size_t cols);  // zero-pad or truncate each row

Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
// Row softmax; with a mask, blocked entries get exactly zero weight.
Var softmax_rows(Var x, const AttentionMask* mask = nullptr);
// Sum over rows of -log softmax(logits_t)[targets_t].
Var nll(Var logits, std::span<const int> targets);

// Poincare-ball maps applied to every row.
Var exp_map_rows(Var v);
Var log_map_rows(Var p);
// Geodesic distance between two 1 x d points (1x1 result).
Var geodesic_distance(Var p, Var q);

}  // namespace hyperemo::ad
