#include "hyperemo/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "hyperemo/errors.hpp"
#include "hyperemo/poincare.hpp"
#include "hyperemo/simd/kernels.hpp"

namespace hyperemo::ad {

const Matrix& Var::value() const { return tape_->value(*this); }

double Var::scalar() const {
  const Matrix& m = value();
  if (m.size() != 1) throw DimensionMismatch("scalar var", 1, m.size());
  return m[0];
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::param(Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Var(this, it->second);
  nodes_.push_back(Node{p.value, {}, {}, &p, p.trainable});
  const auto id = static_cast<std::uint32_t>(nodes_.size() - 1);
  bound_.emplace(&p, id);
  return Var(this, id);
}

Var Tape::record(Matrix value, std::span<const Var> inputs, Backward backward) {
  bool needs = false;
  for (const Var& v : inputs) needs = needs || nodes_[v.id()].needs_grad;
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : Backward{}, nullptr, needs});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Matrix& Tape::grad_slot(Var v) {
  Node& n = nodes_[v.id()];
  if (n.grad.empty() && !n.value.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(Var v, const Matrix& g) {
  if (!nodes_[v.id()].needs_grad) return;
  grad_slot(v) += g;
}

void Tape::backward(Var root) {
  if (value(root).size() != 1) throw DimensionMismatch("backward root", 1, value(root).size());
  if (!nodes_[root.id()].needs_grad) return;
  grad_slot(root)[0] = 1.0;
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty()) continue;
    if (n.backward) {
      // Copy: the callback may touch other nodes while reading this one.
      const Matrix g = n.grad;
      n.backward(*this, g);
    }
    if (n.param != nullptr && n.param->trainable) n.param->grad += n.grad;
  }
}

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (!a.same_shape(b)) throw DimensionMismatch(what, a.size(), b.size());
}

Tape& tape_of(Var a) {
  if (!a.valid()) throw InvalidInput("unbound var");
  return *a.tape();
}

}  // namespace

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Matrix out = a.value();
  out += b.value();
  const Var in[] = {a, b};
  return tape_of(a).record(std::move(out), in, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "sub");
  Matrix out = a.value();
  simd::axpy(-1.0, b.value().data(), out.data(), out.size());
  const Var in[] = {a, b};
  return tape_of(a).record(std::move(out), in, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (t.needs_grad(b)) simd::axpy(-1.0, g.data(), t.grad_slot(b).data(), g.size());
  });
}

Var add_row(Var a, Var row) {
  const Matrix& av = a.value();
  const Matrix& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) throw DimensionMismatch("add_row", av.cols(), rv.size());
  Matrix out = av;
  for (std::size_t i = 0; i < out.rows(); ++i) simd::axpy(1.0, rv.data(), out.row_span(i).data(), out.cols());
  const Var in[] = {a, row};
  return tape_of(a).record(std::move(out), in, [a, row](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (t.needs_grad(row)) {
      Matrix& gr = t.grad_slot(row);
      for (std::size_t i = 0; i < g.rows(); ++i) simd::axpy(1.0, g.row_span(i).data(), gr.data(), g.cols());
    }
  });
}

Var scale(Var a, double s) { return affine(a, s, 0.0); }

Var affine(Var a, double s, double b) {
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * out[i] + b;
  const Var in[] = {a};
  return tape_of(a).record(std::move(out), in, [a, s](Tape& t, const Matrix& g) {
    if (t.needs_grad(a)) simd::axpy(s, g.data(), t.grad_slot(a).data(), g.size());
  });
}

Var mul_scalar(Var s, Var a) {
  if (s.value().size() != 1) throw DimensionMismatch("mul_scalar", 1, s.value().size());
  const double sv = s.value()[0];
  Matrix out = a.value();
  simd::scale(sv, out.data(), out.size());
  const Var in[] = {s, a};
  return tape_of(a).record(std::move(out), in, [s, a, sv](Tape& t, const Matrix& g) {
    if (t.needs_grad(s)) t.grad_slot(s)[0] += simd::dot(g.data(), t.value(a).data(), g.size());
    if (t.needs_grad(a)) simd::axpy(sv, g.data(), t.grad_slot(a).data(), g.size());
  });
}

Var hadamard(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "hadamard");
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  const Var in[] = {a, b};
  return tape_of(a).record(std::move(out), in, [a, b](Tape& t, const Matrix& g) {
    if (t.needs_grad(a)) {
      Matrix& ga = t.grad_slot(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * t.value(b)[i];
    }
    if (t.needs_grad(b)) {
      Matrix& gb = t.grad_slot(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * t.value(a)[i];
    }
  });
}

Var relu(Var a) {
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
  const Var in[] = {a};
  return tape_of(a).record(std::move(out), in, [a](Tape& t, const Matrix& g) {
    if (!t.needs_grad(a)) return;
    Matrix& ga = t.grad_slot(a);
    const Matrix& x = t.value(a);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x[i] > 0.0) ga[i] += g[i];
    }
  });
}

Var gelu(Var a) {
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = out[i];
    out[i] = 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  }
  const Var in[] = {a};
  return tape_of(a).record(std::move(out), in, [a](Tape& t, const Matrix& g) {
    if (!t.needs_grad(a)) return;
    Matrix& ga = t.grad_slot(a);
    const Matrix& xs = t.value(a);
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = xs[i];
      const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
      ga[i] += g[i] * (cdf + x * pdf);
    }
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double x : a.value().storage()) s += x;
  const Var in[] = {a};
  return tape_of(a).record(Matrix(1, 1, s), in, [a](Tape& t, const Matrix& g) {
    if (!t.needs_grad(a)) return;
    Matrix& ga = t.grad_slot(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
  });
}

Var mean(Var a) {
  const auto n = static_cast<double>(a.value().size());
  return scale(sum(a), n > 0 ? 1.0 / n : 0.0);
}

Var matmul(Var a, Var b) {
  Matrix out;
  gemm_ab(a.value(), b.value(), out);
  const Var in[] = {a, b};
  return tape_of(a).record(std::move(out), in, [a, b](Tape& t, const Matrix& g) {
    // dA = G B^T, dB = A^T G
    if (t.needs_grad(a)) gemm_abt(g, t.value(b), t.grad_slot(a), true);
    if (t.needs_grad(b)) gemm_atb(t.value(a), g, t.grad_slot(b), true);
  });
}

Var matmul_bt(Var a, Var b) {
  Matrix out;
  gemm_abt(a.value(), b.value(), out);
  const Var in[] = {a, b};
  return tape_of(a).record(std::move(out), in, [a, b](Tape& t, const Matrix& g) {
    // C = A B^T: dA = G B, dB = G^T A
    if (t.needs_grad(a)) gemm_ab(g, t.value(b), t.grad_slot(a), true);
    if (t.needs_grad(b)) gemm_atb(g, t.value(a), t.grad_slot(b), true);
  });
}

Var linear(Var x, Var w, Var b) {
  Var y = matmul_bt(x, w);
  return b.valid() ? add_row(y, b) : y;
}

Var slice_rows(Var a, std::size_t first, std::size_t count) {
  const Matrix& av = a.value();
  if (first + count > av.rows()) throw DimensionMismatch("slice_rows", av.rows(), first + count);
  Matrix out(count, av.cols());
  std::copy(av.data() + first * av.cols(), av.data() + (first + count) * av.cols(), out.data());
  const Var in[] = {a};
  return tape_of(a).record(std::move(out), in, [a, first](Tape& t, const Matrix& g) {
    if (!t.needs_grad(a)) return;
    Matrix& ga = t.grad_slot(a);
    simd::axpy(1.0, g.data(), ga.data() + first * ga.cols(), g.size());
  });
}

Var slice_cols(Var a, std::size_t first, std::size_t count) {
  const Matrix& av = a.value();
  if (first + count > av.cols()) throw DimensionMismatch("slice_cols", av.cols(), first + count);
  Matrix out(av.rows(), count);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 0; c < count; ++c) out(r, c) = av(r, first + c);
  }
  const Var in[] = {a};
  return tape_of(a).record(std::move(out), in, [a, first](Tape& t, const Matrix& g) {
    if (!t.needs_grad(a)) return;
    Matrix& ga = t.grad_slot(a);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < g.cols(); ++c) ga(r, first + c) += g(r, c);
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw InvalidInput("concat_rows: no parts");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw DimensionMismatch("concat_rows width", cols, p.cols());
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::size_t at = 0;
  for (const Var& p : parts) {
    std::copy(p.value().data(), p.value().data() + p.value().size(), out.data() + at);
    at += p.value().size();
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return tape_of(parts.front()).record(std::move(out), parts, [saved](Tape& t, const Matrix& g) {
    std::size_t off = 0;
    for (const Var& p : saved) {
      const std::size_t n = t.value(p).size();
      if (t.needs_grad(p)) simd::axpy(1.0, g.data() + off, t.grad_slot(p).data(), n);
      off += n;
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw InvalidInput("concat_cols: no parts");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw DimensionMismatch("concat_cols height", rows, p.rows());
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::size_t c0 = 0;
  for (const Var& p : parts) {
    const Matrix& pv = p.value();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < pv.cols(); ++c) out(r, c0 + c) = pv(r, c);
    }
    c0 += pv.cols();
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return tape_of(parts.front()).record(std::move(out), parts, [saved](Tape& t, const Matrix& g) {
    std::size_t c0 = 0;
    for (const Var& p : saved) {
      const std::size_t w = t.value(p).cols();
      if (t.needs_grad(p)) {
        Matrix& gp = t.grad_slot(p);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < w; ++c) gp(r, c) += g(r, c0 + c);
        }
      }
      c0 += w;
    }
  });
}

Var pick(Var a, std::size_t r, std::size_t c) {
  const Matrix& av = a.value();
  if (r >= av.rows() || c >= av.cols()) throw DimensionMismatch("pick", av.size(), r * av.cols() + c);
  const Var in[] = {a};
  return tape_of(a).record(Matrix(1, 1, av(r, c)), in, [a, r, c](Tape& t, const Matrix& g) {
    if (t.needs_grad(a)) t.grad_slot(a)(r, c) += g[0];
  });
}

Var reshape(Var a, std::size_t rows, std::size_t cols) {
  if (rows * cols != a.value().size()) throw DimensionMismatch("reshape", a.value().size(), rows * cols);
  Matrix out(rows, cols, a.value().storage());
  const Var in[] = {a};
  return tape_of(a).record(std::move(out), in, [a](Tape& t, const Matrix& g) {
    if (t.needs_grad(a)) simd::axpy(1.0, g.data(), t.grad_slot(a).data(), g.size());
  });
}

Var resize_cols(Var a, std::size_t cols) {
  const Matrix& av = a.value();
  if (cols == av.cols()) return a;
  const std::size_t keep = std::min(cols, av.cols());
  Matrix out(av.rows(), cols);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 0; c < keep; ++c) out(r, c) = av(r, c);
  }
  const Var in[] = {a};
  return tape_of(a).record(std::move(out), in, [a, keep](Tape& t, const Matrix& g) {
    if (!t.needs_grad(a)) return;
    Matrix& ga = t.grad_slot(a);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < keep; ++c) ga(r, c) += g(r, c);
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  const Matrix& xv = x.value();
  const std::size_t n = xv.cols();
  if (gain.value().size() != n) throw DimensionMismatch("layer_norm gain", n, gain.value().size());
  if (bias.value().size() != n) throw DimensionMismatch("layer_norm bias", n, bias.value().size());
  Matrix normed(xv.rows(), n);
  std::vector<double> inv_std(xv.rows());
  Matrix out(xv.rows(), n);
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    double mu = 0.0;
    for (std::size_t c = 0; c < n; ++c) mu += xv(r, c);
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) var += (xv(r, c) - mu) * (xv(r, c) - mu);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < n; ++c) {
      normed(r, c) = (xv(r, c) - mu) * inv_std[r];
      out(r, c) = gain.value()[c] * normed(r, c) + bias.value()[c];
    }
  }
  const Var in[] = {x, gain, bias};
  return tape_of(x).record(
      std::move(out), in,
      [x, gain, bias, normed = std::move(normed), inv_std = std::move(inv_std)](Tape& t, const Matrix& g) {
        const std::size_t n = g.cols();
        const auto nd = static_cast<double>(n);
        if (t.needs_grad(gain)) {
          Matrix& gg = t.grad_slot(gain);
          for (std::size_t r = 0; r < g.rows(); ++r) {
            for (std::size_t c = 0; c < n; ++c) gg[c] += g(r, c) * normed(r, c);
          }
        }
        if (t.needs_grad(bias)) {
          Matrix& gb = t.grad_slot(bias);
          for (std::size_t r = 0; r < g.rows(); ++r) {
            for (std::size_t c = 0; c < n; ++c) gb[c] += g(r, c);
          }
        }
        if (t.needs_grad(x)) {
          Matrix& gx = t.grad_slot(x);
          const Matrix& gain_v = t.value(gain);
          std::vector<double> dn(n);
          for (std::size_t r = 0; r < g.rows(); ++r) {
            double mean_dn = 0.0;
            double mean_dn_xn = 0.0;
            for (std::size_t c = 0; c < n; ++c) {
              dn[c] = g(r, c) * gain_v[c];
              mean_dn += dn[c];
              mean_dn_xn += dn[c] * normed(r, c);
            }
            mean_dn /= nd;
            mean_dn_xn /= nd;
            for (std::size_t c = 0; c < n; ++c) {
              gx(r, c) += inv_std[r] * (dn[c] - mean_dn - normed(r, c) * mean_dn_xn);
            }
          }
        }
      });
}

Var softmax_rows(Var x, const AttentionMask* mask) {
  const Matrix& xv = x.value();
  if (mask != nullptr && (mask->size != xv.rows() || mask->size != xv.cols())) {
    throw DimensionMismatch("softmax mask", xv.rows(), mask->size);
  }
  Matrix out(xv.rows(), xv.cols());
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < xv.cols(); ++c) {
      const double l = (mask == nullptr || (*mask)(r, c)) ? xv(r, c) : kBlockedLogit;
      out(r, c) = l;
      mx = std::max(mx, l);
    }
    double z = 0.0;
    for (std::size_t c = 0; c < xv.cols(); ++c) {
      out(r, c) = std::exp(out(r, c) - mx);
      z += out(r, c);
    }
    for (std::size_t c = 0; c < xv.cols(); ++c) {
      out(r, c) = (mask == nullptr || (*mask)(r, c)) ? out(r, c) / z : 0.0;
    }
  }
  const Var in[] = {x};
  return tape_of(x).record(out, in, [x, probs = out](Tape& t, const Matrix& g) {
    Matrix& gx = t.grad_slot(x);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      double dotv = 0.0;
      for (std::size_t c = 0; c < g.cols(); ++c) dotv += probs(r, c) * g(r, c);
      for (std::size_t c = 0; c < g.cols(); ++c) gx(r, c) += probs(r, c) * (g(r, c) - dotv);
    }
  });
}

Var nll(Var logits, std::span<const int> targets) {
  const Matrix& lv = logits.value();
  if (targets.size() != lv.rows()) throw DimensionMismatch("nll targets", lv.rows(), targets.size());
  Matrix probs(lv.rows(), lv.cols());
  double loss = 0.0;
  for (std::size_t r = 0; r < lv.rows(); ++r) {
    const int y = targets[r];
    if (y < 0 || static_cast<std::size_t>(y) >= lv.cols()) {
      throw InvalidInput("nll: target id " + std::to_string(y) + " outside the vocabulary");
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < lv.cols(); ++c) mx = std::max(mx, lv(r, c));
    double z = 0.0;
    for (std::size_t c = 0; c < lv.cols(); ++c) {
      probs(r, c) = std::exp(lv(r, c) - mx);
      z += probs(r, c);
    }
    for (std::size_t c = 0; c < lv.cols(); ++c) probs(r, c) /= z;
    loss -= lv(r, static_cast<std::size_t>(y)) - mx - std::log(z);
  }
  std::vector<int> tgt(targets.begin(), targets.end());
  const Var in[] = {logits};
  return tape_of(logits).record(Matrix(1, 1, loss), in,
                                [logits, probs = std::move(probs), tgt = std::move(tgt)](Tape& t, const Matrix& g) {
                                  Matrix& gl = t.grad_slot(logits);
                                  for (std::size_t r = 0; r < probs.rows(); ++r) {
                                    for (std::size_t c = 0; c < probs.cols(); ++c) gl(r, c) += g[0] * probs(r, c);
                                    gl(r, static_cast<std::size_t>(tgt[r])) -= g[0];
                                  }
                                });
}

namespace {

// Backward of y = f(|v|) v for every row:
// dv = f g + (f'/|v|) (g . v) v
void radial_backward(const Matrix& in, const std::vector<poincare::detail::RadialFactor>& factors,
                     const Matrix& g, Matrix& gin) {
  for (std::size_t r = 0; r < in.rows(); ++r) {
    const double* v = in.data() + r * in.cols();
    const double* gr = g.data() + r * g.cols();
    double* out = gin.data() + r * gin.cols();
    const double gv = simd::dot(gr, v, in.cols());
    simd::axpy(factors[r].factor, gr, out, in.cols());
    simd::axpy(factors[r].dfactor_over_norm * gv, v, out, in.cols());
  }
}

}  // namespace

Var exp_map_rows(Var v) {
  const Matrix& vv = v.value();
  Matrix out(vv.rows(), vv.cols());
  std::vector<poincare::detail::RadialFactor> factors(vv.rows());
  for (std::size_t r = 0; r < vv.rows(); ++r) {
    poincare::exp_map_into(vv.row_span(r), out.row_span(r));
    const double n = std::sqrt(simd::squared_norm(vv.row_span(r).data(), vv.cols()));
    factors[r] = poincare::detail::exp_factor(n);
  }
  const Var in[] = {v};
  return tape_of(v).record(std::move(out), in, [v, factors = std::move(factors)](Tape& t, const Matrix& g) {
    radial_backward(t.value(v), factors, g, t.grad_slot(v));
  });
}

Var log_map_rows(Var p) {
  const Matrix& pv = p.value();
  Matrix out(pv.rows(), pv.cols());
  std::vector<poincare::detail::RadialFactor> factors(pv.rows());
  for (std::size_t r = 0; r < pv.rows(); ++r) {
    poincare::log_map_into(pv.row_span(r), out.row_span(r));
    const double n = std::sqrt(simd::squared_norm(pv.row_span(r).data(), pv.cols()));
    factors[r] = poincare::detail::log_factor(n);
  }
  const Var in[] = {p};
  return tape_of(p).record(std::move(out), in, [p, factors = std::move(factors)](Tape& t, const Matrix& g) {
    radial_backward(t.value(p), factors, g, t.grad_slot(p));
  });
}

Var geodesic_distance(Var p, Var q) {
  const Matrix& pv = p.value();
  const Matrix& qv = q.value();
  if (pv.rows() != 1 || qv.rows() != 1) throw DimensionMismatch("geodesic_distance rows", 1, pv.rows());
  const double d = poincare::geodesic_distance(pv.row_span(0), qv.row_span(0));
  const auto terms = poincare::detail::distance_terms(pv.row_span(0), qv.row_span(0));
  const Var in[] = {p, q};
  return tape_of(p).record(Matrix(1, 1, d), in, [p, q, terms](Tape& t, const Matrix& g) {
    if (terms.x <= 0.0) return;  // coincident points: zero subgradient
    const double dd_dx = g[0] / std::sqrt(terms.x * (terms.x + 2.0));
    const double ab = terms.alpha * terms.beta;
    const Matrix& pv = t.value(p);
    const Matrix& qv = t.value(q);
    const std::size_t n = pv.cols();
    // dx/dp = 4(p-q)/(ab) + 4 sq p / (a^2 b); dx/dq symmetric.
    const double c_diff = 4.0 / ab;
    const double c_p = 4.0 * terms.sq_diff / (terms.alpha * ab);
    const double c_q = 4.0 * terms.sq_diff / (terms.beta * ab);
    if (t.needs_grad(p)) {
      Matrix& gp = t.grad_slot(p);
      for (std::size_t i = 0; i < n; ++i) gp[i] += dd_dx * (c_diff * (pv[i] - qv[i]) + c_p * pv[i]);
    }
    if (t.needs_grad(q)) {
      Matrix& gq = t.grad_slot(q);
      for (std::size_t i = 0; i < n; ++i) gq[i] += dd_dx * (c_diff * (qv[i] - pv[i]) + c_q * qv[i]);
    }
  });
}

}  // namespace hyperemo::ad
