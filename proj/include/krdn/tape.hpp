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

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "krdn/tensor.hpp"

namespace krdn::ad {

enum class Op : std::uint8_t {
  Leaf,
  Gather,
  ScatterAdd,
  Add,
  Sub,
  Mul,
  Div,
  Relu,
  Sigmoid,
  Exp,
  Sum,
  Mean,
  L2Normalize,
  Dot,
  Cosine,
  MatVec,
  MaxWithZero,
  ScaleRows,
};

std::string_view op_name(Op op);
std::optional<Op> op_from_name(std::string_view name);

/// Shared, immutable row-index list. Edge lists are reused across many
/// primitives in one forward pass, so nodes hold them by reference.
using IndexList = std::shared_ptr<const std::vector<std::size_t>>;
IndexList make_index(std::vector<std::size_t> indices);

/// Parameter name -> gradient, shaped like the parameter.
using Gradients = std::map<std::string, Tensor>;

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  std::size_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/**
 * Linear record of primitive applications.
 *
 * Nodes are appended in evaluation order, so the record is topologically
 * sorted by construction; `backward` walks it once in reverse. A tape is
 * confined to the thread that builds it.
 */
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var constant(double value) { return constant(Tensor::scalar(value)); }
  /// Leaf whose gradient is reported under `name` by `backward`.
  Var parameter(std::string name, Tensor value);

  const Tensor& value(const Var& v) const { return nodes_[v.id()].value; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Reverse sweep from a scalar node. Parameters that do not reach the
  /// loss are still reported, with zero gradient.
  Gradients backward(const Var& loss) const;

  /// Test hook: scales the backward rule of `op` by 1.5 so gradient checks
  /// can be shown to catch a broken primitive.
  void corrupt_backward(std::optional<Op> op) { corrupted_ = op; }

  struct Node {
    Op op = Op::Leaf;
    std::array<std::size_t, 2> inputs{};
    std::uint8_t arity = 0;
    bool needs_grad = false;
    Tensor value;
    IndexList index;
    std::size_t extent = 0;
    std::string name;
  };

  Var record(Op op, std::initializer_list<Var> inputs, Tensor value, IndexList index = nullptr,
             std::size_t extent = 0);

 private:
  std::deque<Node> nodes_;  // deque: values stay addressable while recording
  std::optional<Op> corrupted_;
};

// Primitives. All operands must live on the same tape.

/// Rows of `table` selected by `index` (elements when `table` is rank 1).
Var gather(const Var& table, IndexList index);
/// Sums row k of `x` into row index[k] of a fresh `rows`-row tensor.
Var scatter_add(const Var& x, IndexList index, std::size_t rows);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var relu(const Var& x);
Var sigmoid(const Var& x);
Var exp(const Var& x);
Var sum(const Var& x);
Var mean(const Var& x);
/// Row-wise unit normalization; a zero row maps to zero.
Var l2_normalize(const Var& x);
/// Row-wise inner product: rank-2 inputs give one value per row.
Var dot(const Var& a, const Var& b);
/// Row-wise cosine similarity; 0 when either row has zero norm.
Var cosine(const Var& a, const Var& b);
/// Applies `w` (out x in) to `x` (a vector of length in, or rows of width in).
Var matvec(const Var& w, const Var& x);
Var max_with_zero(const Var& x);
/// Multiplies row k of `x` by weights[k].
Var scale_rows(const Var& x, const Var& weights);

}  // namespace krdn::ad
