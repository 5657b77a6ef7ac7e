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

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "krdn/tape.hpp"
#include "krdn/tensor.hpp"

namespace krdn::ad {

/// Named trainable tensors plus their adaptive-moment state.
class ParameterStore {
 public:
  struct Slot {
    Tensor value;
    Tensor first_moment;
    Tensor second_moment;
  };

  void add(const std::string& name, Tensor value);
  bool contains(const std::string& name) const { return slots_.count(name) != 0; }

  const Tensor& value(const std::string& name) const { return slot(name).value; }
  Tensor& value(const std::string& name) { return slot(name).value; }
  const Slot& slot(const std::string& name) const;
  Slot& slot(const std::string& name);

  /// Binds the current value of `name` as a parameter leaf on `tape`.
  Var bind(Tape& tape, const std::string& name) const { return tape.parameter(name, value(name)); }

  std::vector<std::string> names() const;
  const std::map<std::string, Slot>& slots() const noexcept { return slots_; }

  /// Number of optimizer steps taken so far.
  std::uint64_t step() const noexcept { return step_; }
  void set_step(std::uint64_t step) noexcept { step_ = step; }

  friend bool operator==(const ParameterStore& a, const ParameterStore& b) {
    return a.step_ == b.step_ && a.slots_.size() == b.slots_.size() &&
           std::equal(a.slots_.begin(), a.slots_.end(), b.slots_.begin(), [](const auto& x, const auto& y) {
             return x.first == y.first && x.second.value == y.second.value &&
                    x.second.first_moment == y.second.first_moment &&
                    x.second.second_moment == y.second.second_moment;
           });
  }

 private:
  std::map<std::string, Slot> slots_;
  std::uint64_t step_ = 0;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/**
 * One bias-corrected adaptive-moment update over every parameter in the
 * store. Parameters absent from `grads` are stepped with a zero gradient, so
 * their moments still decay. Throws NumericError naming the first
 * non-finite gradient before touching any state.
 */
void adam_step(ParameterStore& store, const Gradients& grads, const AdamConfig& config);

/// Uniform in +-sqrt(6 / (fan_in + fan_out)), deterministic under `seed`.
/// For a rank-2 shape (rows, cols) fan_in = cols and fan_out = rows.
Tensor xavier_init(const Tensor::Shape& shape, std::uint64_t seed);

}  // namespace krdn::ad
