/*
 * Copyright 2026 The krdn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "krdn/tape.hpp"

#include <cmath>
#include <utility>

#include "krdn/error.hpp"

namespace krdn::ad {

namespace {

constexpr std::array<std::string_view, 18> kOpNames = {
    "leaf", "gather", "scatter_add", "add",  "sub",          "mul",
    "div",  "relu",   "sigmoid",     "exp",  "sum",          "mean",
    "l2_normalize", "dot", "cosine", "matvec", "max_with_zero", "scale_rows",
};

// Row view used by the vector-valued primitives (l2_normalize, dot, cosine,
// matvec): a rank-1 tensor is one row, a rank-2 tensor is a stack of rows.
struct RowLayout {
  std::size_t rows;
  std::size_t width;
};

RowLayout vector_rows(const Tensor& t) {
  if (t.rank() == 2) return {t.shape()[0], t.shape()[1]};
  if (t.rank() == 1) return {1, t.shape()[0]};
  return {1, 1};
}

const double* row_ptr(const Tensor& t, const RowLayout& l, std::size_t r) {
  return t.values().data() + r * l.width;
}

double* row_ptr(Tensor& t, const RowLayout& l, std::size_t r) {
  return t.values().data() + r * l.width;
}

[[noreturn]] void shape_error(Op op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op_name(op)) + ": shape mismatch " + shape_string(a.shape()) +
                   " vs " + shape_string(b.shape()));
}

Tape& common_tape(Op op, const Var& a, const Var& b) {
  if (!a.valid() || !b.valid() || a.tape() != b.tape()) {
    throw ShapeError(std::string(op_name(op)) + ": operands live on different tapes");
  }
  return *a.tape();
}

Tape& tape_of(Op op, const Var& a) {
  if (!a.valid()) throw ShapeError(std::string(op_name(op)) + ": invalid operand");
  return *a.tape();
}

// Elementwise binary ops allow equal shapes or a rank-0 operand on either side.
Tensor::Shape binary_shape(Op op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return a.shape();
  if (a.rank() == 0) return b.shape();
  if (b.rank() == 0) return a.shape();
  shape_error(op, a, b);
}

template <typename F>
Tensor binary_map(Op op, const Tensor& a, const Tensor& b, F f) {
  Tensor out(binary_shape(op, a, b));
  const bool as = a.rank() == 0 && b.rank() != 0;
  const bool bs = b.rank() == 0 && a.rank() != 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = f(as ? a[0] : a[i], bs ? b[0] : b[i]);
  }
  return out;
}

template <typename F>
Tensor unary_map(const Tensor& x, F f) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return out;
}

// Adds `scale * contribution[i]` into `grad`, summing when `grad` is a
// broadcast scalar.
void accumulate(Tensor& grad, const Tensor& contribution, double scale) {
  if (grad.size() == contribution.size()) {
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += scale * contribution[i];
    return;
  }
  double total = 0.0;
  for (double v : contribution.values()) total += v;
  grad[0] += scale * total;
}

}  // namespace

std::string_view op_name(Op op) { return kOpNames[static_cast<std::size_t>(op)]; }

std::optional<Op> op_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kOpNames.size(); ++i) {
    if (kOpNames[i] == name) return static_cast<Op>(i);
  }
  return std::nullopt;
}

IndexList make_index(std::vector<std::size_t> indices) {
  return std::make_shared<const std::vector<std::size_t>>(std::move(indices));
}

const Tensor& Var::value() const {
  if (!tape_) throw ShapeError("var: invalid handle");
  return tape_->value(*this);
}

Var Tape::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(std::string name, Tensor value) {
  Node node;
  node.value = std::move(value);
  node.needs_grad = true;
  node.name = std::move(name);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Op op, std::initializer_list<Var> inputs, Tensor value, IndexList index,
                 std::size_t extent) {
  Node node;
  node.op = op;
  for (const Var& in : inputs) {
    node.inputs[node.arity++] = in.id();
    node.needs_grad = node.needs_grad || nodes_[in.id()].needs_grad;
  }
  node.value = std::move(value);
  node.index = std::move(index);
  node.extent = extent;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Gradients Tape::backward(const Var& loss) const {
  if (loss.tape() != this) throw ShapeError("backward: loss is not on this tape");
  const Node& root = nodes_[loss.id()];
  if (root.value.size() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " +
                     shape_string(root.value.shape()));
  }

  std::vector<Tensor> grads(loss.id() + 1);
  std::vector<bool> touched(loss.id() + 1, false);
  auto grad_of = [&](std::size_t id) -> Tensor& {
    if (!touched[id]) {
      grads[id] = Tensor(nodes_[id].value.shape());
      touched[id] = true;
    }
    return grads[id];
  };
  grad_of(loss.id())[0] = 1.0;

  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (!touched[id] || !node.needs_grad || node.op == Op::Leaf) continue;
    const Tensor& g = grads[id];
    const Tensor& y = node.value;
    const double k = (corrupted_ && *corrupted_ == node.op) ? 1.5 : 1.0;
    const std::size_t ia = node.inputs[0];
    const std::size_t ib = node.inputs[1];
    const Tensor& a = nodes_[ia].value;
    const bool need_a = nodes_[ia].needs_grad;
    const bool need_b = node.arity > 1 && nodes_[ib].needs_grad;

    switch (node.op) {
      case Op::Leaf:
        break;
      case Op::Gather: {
        if (!need_a) break;
        Tensor& ga = grad_of(ia);
        const std::size_t w = a.rank() == 2 ? a.cols() : 1;
        const auto& idx = *node.index;
        for (std::size_t r = 0; r < idx.size(); ++r) {
          for (std::size_t c = 0; c < w; ++c) ga[idx[r] * w + c] += k * g[r * w + c];
        }
        break;
      }
      case Op::ScatterAdd: {
        if (!need_a) break;
        Tensor& ga = grad_of(ia);
        const std::size_t w = a.rank() == 2 ? a.cols() : 1;
        const auto& idx = *node.index;
        for (std::size_t r = 0; r < idx.size(); ++r) {
          for (std::size_t c = 0; c < w; ++c) ga[r * w + c] += k * g[idx[r] * w + c];
        }
        break;
      }
      case Op::Add:
      case Op::Sub: {
        if (need_a) accumulate(grad_of(ia), g, k);
        if (need_b) accumulate(grad_of(ib), g, node.op == Op::Add ? k : -k);
        break;
      }
      case Op::Mul: {
        const Tensor& b = nodes_[ib].value;
        if (need_a) accumulate(grad_of(ia), binary_map(Op::Mul, g, b, std::multiplies<>()), k);
        if (need_b) accumulate(grad_of(ib), binary_map(Op::Mul, g, a, std::multiplies<>()), k);
        break;
      }
      case Op::Div: {
        const Tensor& b = nodes_[ib].value;
        if (need_a) accumulate(grad_of(ia), binary_map(Op::Div, g, b, std::divides<>()), k);
        if (need_b) {
          // d(a/b)/db = -(a/b)/b = -y/b
          Tensor yb = binary_map(Op::Div, y, b, std::divides<>());
          accumulate(grad_of(ib), binary_map(Op::Mul, g, yb, std::multiplies<>()), -k);
        }
        break;
      }
      case Op::Relu:
      case Op::MaxWithZero: {
        Tensor& ga = grad_of(ia);
        for (std::size_t i = 0; i < a.size(); ++i) ga[i] += a[i] > 0.0 ? k * g[i] : 0.0;
        break;
      }
      case Op::Sigmoid: {
        Tensor& ga = grad_of(ia);
        for (std::size_t i = 0; i < a.size(); ++i) ga[i] += k * g[i] * y[i] * (1.0 - y[i]);
        break;
      }
      case Op::Exp: {
        Tensor& ga = grad_of(ia);
        for (std::size_t i = 0; i < a.size(); ++i) ga[i] += k * g[i] * y[i];
        break;
      }
      case Op::Sum:
      case Op::Mean: {
        Tensor& ga = grad_of(ia);
        const double s =
            node.op == Op::Sum ? g[0] : g[0] / static_cast<double>(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) ga[i] += k * s;
        break;
      }
      case Op::L2Normalize: {
        Tensor& ga = grad_of(ia);
        const RowLayout l = vector_rows(a);
        for (std::size_t r = 0; r < l.rows; ++r) {
          const double* x = row_ptr(a, l, r);
          const double* yr = row_ptr(y, l, r);
          const double* gr = row_ptr(g, l, r);
          double nsq = 0.0;
          double yg = 0.0;
          for (std::size_t c = 0; c < l.width; ++c) {
            nsq += x[c] * x[c];
            yg += yr[c] * gr[c];
          }
          if (nsq == 0.0) continue;
          const double n = std::sqrt(nsq);
          double* out = row_ptr(ga, l, r);
          for (std::size_t c = 0; c < l.width; ++c) out[c] += k * (gr[c] - yr[c] * yg) / n;
        }
        break;
      }
      case Op::Dot: {
        const Tensor& b = nodes_[ib].value;
        const RowLayout l = vector_rows(a);
        for (std::size_t r = 0; r < l.rows; ++r) {
          const double gr = k * g[r];
          if (need_a) {
            double* out = row_ptr(grad_of(ia), l, r);
            const double* br = row_ptr(b, l, r);
            for (std::size_t c = 0; c < l.width; ++c) out[c] += gr * br[c];
          }
          if (need_b) {
            double* out = row_ptr(grad_of(ib), l, r);
            const double* ar = row_ptr(a, l, r);
            for (std::size_t c = 0; c < l.width; ++c) out[c] += gr * ar[c];
          }
        }
        break;
      }
      case Op::Cosine: {
        const Tensor& b = nodes_[ib].value;
        const RowLayout l = vector_rows(a);
        for (std::size_t r = 0; r < l.rows; ++r) {
          const double* ar = row_ptr(a, l, r);
          const double* br = row_ptr(b, l, r);
          double na2 = 0.0;
          double nb2 = 0.0;
          for (std::size_t c = 0; c < l.width; ++c) {
            na2 += ar[c] * ar[c];
            nb2 += br[c] * br[c];
          }
          if (na2 == 0.0 || nb2 == 0.0) continue;
          const double nab = std::sqrt(na2) * std::sqrt(nb2);
          const double cr = y[r];
          const double gr = k * g[r];
          if (need_a) {
            double* out = row_ptr(grad_of(ia), l, r);
            for (std::size_t c = 0; c < l.width; ++c) {
              out[c] += gr * (br[c] / nab - cr * ar[c] / na2);
            }
          }
          if (need_b) {
            double* out = row_ptr(grad_of(ib), l, r);
            for (std::size_t c = 0; c < l.width; ++c) {
              out[c] += gr * (ar[c] / nab - cr * br[c] / nb2);
            }
          }
        }
        break;
      }
      case Op::MatVec: {
        // a = W (out x in), b = x rows of width in, y rows of width out.
        const Tensor& x = nodes_[ib].value;
        const std::size_t out_dim = a.shape()[0];
        const std::size_t in_dim = a.shape()[1];
        const RowLayout lx = vector_rows(x);
        for (std::size_t r = 0; r < lx.rows; ++r) {
          const double* xr = x.values().data() + r * in_dim;
          const double* gr = g.values().data() + r * out_dim;
          if (need_a) {
            Tensor& gw = grad_of(ia);
            for (std::size_t o = 0; o < out_dim; ++o) {
              const double go = k * gr[o];
              if (go == 0.0) continue;
              double* wrow = gw.values().data() + o * in_dim;
              for (std::size_t c = 0; c < in_dim; ++c) wrow[c] += go * xr[c];
            }
          }
          if (need_b) {
            double* out = grad_of(ib).values().data() + r * in_dim;
            for (std::size_t o = 0; o < out_dim; ++o) {
              const double go = k * gr[o];
              if (go == 0.0) continue;
              const double* wrow = a.values().data() + o * in_dim;
              for (std::size_t c = 0; c < in_dim; ++c) out[c] += go * wrow[c];
            }
          }
        }
        break;
      }
      case Op::ScaleRows: {
        const Tensor& w = nodes_[ib].value;
        const std::size_t width = a.rank() == 2 ? a.cols() : 1;
        for (std::size_t r = 0; r < w.size(); ++r) {
          const double* gr = g.values().data() + r * width;
          if (need_a) {
            double* out = grad_of(ia).values().data() + r * width;
            for (std::size_t c = 0; c < width; ++c) out[c] += k * w[r] * gr[c];
          }
          if (need_b) {
            const double* xr = a.values().data() + r * width;
            double s = 0.0;
            for (std::size_t c = 0; c < width; ++c) s += gr[c] * xr[c];
            grad_of(ib)[r] += k * s;
          }
        }
        break;
      }
    }
  }

  Gradients out;
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    const Node& node = nodes_[id];
    if (node.op != Op::Leaf || node.name.empty()) continue;
    auto [it, inserted] = out.try_emplace(node.name, node.value.shape());
    if (!it->second.same_shape(node.value)) {
      throw ShapeError("backward: parameter '" + node.name + "' bound with two shapes");
    }
    if (id <= loss.id() && touched[id]) accumulate(it->second, grads[id], 1.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Forward rules.

Var gather(const Var& table, IndexList index) {
  Tape& tape = tape_of(Op::Gather, table);
  const Tensor& t = table.value();
  if (t.rank() == 0) throw ShapeError("gather: table must have rank 1 or 2");
  const std::size_t w = t.rank() == 2 ? t.cols() : 1;
  const auto& idx = *index;
  Tensor out(t.rank() == 2 ? Tensor::Shape{idx.size(), w} : Tensor::Shape{idx.size()});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= t.rows()) {
      throw BoundsError("gather: index " + std::to_string(idx[r]) + " out of range for " +
                        std::to_string(t.rows()) + " rows");
    }
    for (std::size_t c = 0; c < w; ++c) out[r * w + c] = t[idx[r] * w + c];
  }
  return tape.record(Op::Gather, {table}, std::move(out), std::move(index));
}

Var scatter_add(const Var& x, IndexList index, std::size_t rows) {
  Tape& tape = tape_of(Op::ScatterAdd, x);
  const Tensor& t = x.value();
  if (t.rank() == 0) throw ShapeError("scatter_add: input must have rank 1 or 2");
  const auto& idx = *index;
  if (idx.size() != t.rows()) {
    throw ShapeError("scatter_add: " + std::to_string(idx.size()) + " indices for " +
                     std::to_string(t.rows()) + " rows");
  }
  const std::size_t w = t.rank() == 2 ? t.cols() : 1;
  Tensor out(t.rank() == 2 ? Tensor::Shape{rows, w} : Tensor::Shape{rows});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= rows) {
      throw BoundsError("scatter_add: index " + std::to_string(idx[r]) + " out of range for " +
                        std::to_string(rows) + " rows");
    }
    for (std::size_t c = 0; c < w; ++c) out[idx[r] * w + c] += t[r * w + c];
  }
  return tape.record(Op::ScatterAdd, {x}, std::move(out), std::move(index), rows);
}

Var add(const Var& a, const Var& b) {
  Tape& tape = common_tape(Op::Add, a, b);
  return tape.record(Op::Add, {a, b}, binary_map(Op::Add, a.value(), b.value(), std::plus<>()));
}

Var sub(const Var& a, const Var& b) {
  Tape& tape = common_tape(Op::Sub, a, b);
  return tape.record(Op::Sub, {a, b}, binary_map(Op::Sub, a.value(), b.value(), std::minus<>()));
}

Var mul(const Var& a, const Var& b) {
  Tape& tape = common_tape(Op::Mul, a, b);
  return tape.record(Op::Mul, {a, b},
                     binary_map(Op::Mul, a.value(), b.value(), std::multiplies<>()));
}

Var div(const Var& a, const Var& b) {
  Tape& tape = common_tape(Op::Div, a, b);
  for (double v : b.value().values()) {
    if (v == 0.0) throw NumericError("div: division by zero");
  }
  return tape.record(Op::Div, {a, b},
                     binary_map(Op::Div, a.value(), b.value(), std::divides<>()));
}

Var relu(const Var& x) {
  Tape& tape = tape_of(Op::Relu, x);
  return tape.record(Op::Relu, {x}, unary_map(x.value(), [](double v) { return v > 0.0 ? v : 0.0; }));
}

Var max_with_zero(const Var& x) {
  Tape& tape = tape_of(Op::MaxWithZero, x);
  return tape.record(Op::MaxWithZero, {x},
                     unary_map(x.value(), [](double v) { return v > 0.0 ? v : 0.0; }));
}

Var sigmoid(const Var& x) {
  Tape& tape = tape_of(Op::Sigmoid, x);
  return tape.record(Op::Sigmoid, {x}, unary_map(x.value(), [](double v) {
                       return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                       : std::exp(v) / (1.0 + std::exp(v));
                     }));
}

Var exp(const Var& x) {
  Tape& tape = tape_of(Op::Exp, x);
  return tape.record(Op::Exp, {x}, unary_map(x.value(), [](double v) { return std::exp(v); }));
}

Var sum(const Var& x) {
  Tape& tape = tape_of(Op::Sum, x);
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return tape.record(Op::Sum, {x}, Tensor::scalar(s));
}

Var mean(const Var& x) {
  Tape& tape = tape_of(Op::Mean, x);
  if (x.value().size() == 0) throw NumericError("mean: empty input");
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return tape.record(Op::Mean, {x}, Tensor::scalar(s / static_cast<double>(x.value().size())));
}

Var l2_normalize(const Var& x) {
  Tape& tape = tape_of(Op::L2Normalize, x);
  const Tensor& t = x.value();
  const RowLayout l = vector_rows(t);
  Tensor out(t.shape());
  for (std::size_t r = 0; r < l.rows; ++r) {
    const double* xr = row_ptr(t, l, r);
    double nsq = 0.0;
    for (std::size_t c = 0; c < l.width; ++c) nsq += xr[c] * xr[c];
    if (nsq == 0.0) continue;
    const double n = std::sqrt(nsq);
    double* o = row_ptr(out, l, r);
    for (std::size_t c = 0; c < l.width; ++c) o[c] = xr[c] / n;
  }
  return tape.record(Op::L2Normalize, {x}, std::move(out));
}

Var dot(const Var& a, const Var& b) {
  Tape& tape = common_tape(Op::Dot, a, b);
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  if (!ta.same_shape(tb) || ta.rank() == 0) shape_error(Op::Dot, ta, tb);
  const RowLayout l = vector_rows(ta);
  Tensor out(ta.rank() == 2 ? Tensor::Shape{l.rows} : Tensor::Shape{});
  for (std::size_t r = 0; r < l.rows; ++r) {
    const double* ar = row_ptr(ta, l, r);
    const double* br = row_ptr(tb, l, r);
    double s = 0.0;
    for (std::size_t c = 0; c < l.width; ++c) s += ar[c] * br[c];
    out[r] = s;
  }
  return tape.record(Op::Dot, {a, b}, std::move(out));
}

Var cosine(const Var& a, const Var& b) {
  Tape& tape = common_tape(Op::Cosine, a, b);
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  if (!ta.same_shape(tb) || ta.rank() == 0) shape_error(Op::Cosine, ta, tb);
  const RowLayout l = vector_rows(ta);
  Tensor out(ta.rank() == 2 ? Tensor::Shape{l.rows} : Tensor::Shape{});
  for (std::size_t r = 0; r < l.rows; ++r) {
    const double* ar = row_ptr(ta, l, r);
    const double* br = row_ptr(tb, l, r);
    double ab = 0.0;
    double na2 = 0.0;
    double nb2 = 0.0;
    for (std::size_t c = 0; c < l.width; ++c) {
      ab += ar[c] * br[c];
      na2 += ar[c] * ar[c];
      nb2 += br[c] * br[c];
    }
    out[r] = (na2 == 0.0 || nb2 == 0.0) ? 0.0 : ab / (std::sqrt(na2) * std::sqrt(nb2));
  }
  return tape.record(Op::Cosine, {a, b}, std::move(out));
}

Var matvec(const Var& w, const Var& x) {
  Tape& tape = common_tape(Op::MatVec, w, x);
  const Tensor& tw = w.value();
  const Tensor& tx = x.value();
  if (tw.rank() != 2) throw ShapeError("matvec: matrix must have rank 2");
  const std::size_t out_dim = tw.shape()[0];
  const std::size_t in_dim = tw.shape()[1];
  const RowLayout l = vector_rows(tx);
  if (tx.rank() == 0 || l.width != in_dim) shape_error(Op::MatVec, tw, tx);
  Tensor out(tx.rank() == 2 ? Tensor::Shape{l.rows, out_dim} : Tensor::Shape{out_dim});
  for (std::size_t r = 0; r < l.rows; ++r) {
    const double* xr = tx.values().data() + r * in_dim;
    double* o = out.values().data() + r * out_dim;
    for (std::size_t i = 0; i < out_dim; ++i) {
      const double* wrow = tw.values().data() + i * in_dim;
      double s = 0.0;
      for (std::size_t c = 0; c < in_dim; ++c) s += wrow[c] * xr[c];
      o[i] = s;
    }
  }
  return tape.record(Op::MatVec, {w, x}, std::move(out));
}

Var scale_rows(const Var& x, const Var& weights) {
  Tape& tape = common_tape(Op::ScaleRows, x, weights);
  const Tensor& tx = x.value();
  const Tensor& tw = weights.value();
  if (tx.rank() == 0 || tw.rank() != 1 || tw.size() != tx.rows()) {
    shape_error(Op::ScaleRows, tx, tw);
  }
  const std::size_t width = tx.rank() == 2 ? tx.cols() : 1;
  Tensor out(tx.shape());
  for (std::size_t r = 0; r < tw.size(); ++r) {
    for (std::size_t c = 0; c < width; ++c) out[r * width + c] = tw[r] * tx[r * width + c];
  }
  return tape.record(Op::ScaleRows, {x, weights}, std::move(out));
}

}  // namespace krdn::ad
