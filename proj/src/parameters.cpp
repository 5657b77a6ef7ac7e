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

#include "krdn/parameters.hpp"

#include <cmath>

#include "krdn/error.hpp"
#include "krdn/rng.hpp"

namespace krdn::ad {

void ParameterStore::add(const std::string& name, Tensor value) {
  if (slots_.count(name)) throw ConfigError("parameter '" + name + "' already registered");
  Slot slot;
  slot.first_moment = Tensor(value.shape());
  slot.second_moment = Tensor(value.shape());
  slot.value = std::move(value);
  slots_.emplace(name, std::move(slot));
}

const ParameterStore::Slot& ParameterStore::slot(const std::string& name) const {
  auto it = slots_.find(name);
  if (it == slots_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->second;
}

ParameterStore::Slot& ParameterStore::slot(const std::string& name) {
  auto it = slots_.find(name);
  if (it == slots_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->second;
}

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  out.reserve(slots_.size());
  for (const auto& [name, _] : slots_) out.push_back(name);
  return out;
}

void adam_step(ParameterStore& store, const Gradients& grads, const AdamConfig& config) {
  for (const auto& [name, g] : grads) {
    if (!store.contains(name)) throw ConfigError("gradient for unknown parameter '" + name + "'");
    if (!g.same_shape(store.value(name))) {
      throw ShapeError("adam_step: gradient shape " + shape_string(g.shape()) +
                       " for parameter '" + name + "' of shape " +
                       shape_string(store.value(name).shape()));
    }
    if (!g.all_finite()) throw NumericError("adam_step: non-finite gradient for '" + name + "'");
  }

  const std::uint64_t t = store.step() + 1;
  const double bias1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  const double bias2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  for (const std::string& name : store.names()) {
    ParameterStore::Slot& s = store.slot(name);
    auto it = grads.find(name);
    const Tensor* g = it == grads.end() ? nullptr : &it->second;
    for (std::size_t i = 0; i < s.value.size(); ++i) {
      const double gi = g ? (*g)[i] : 0.0;
      s.first_moment[i] = config.beta1 * s.first_moment[i] + (1.0 - config.beta1) * gi;
      s.second_moment[i] = config.beta2 * s.second_moment[i] + (1.0 - config.beta2) * gi * gi;
      const double m_hat = s.first_moment[i] / bias1;
      const double v_hat = s.second_moment[i] / bias2;
      s.value[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
  store.set_step(t);
}

Tensor xavier_init(const Tensor::Shape& shape, std::uint64_t seed) {
  if (shape.empty()) throw ShapeError("xavier_init: shape must be non-empty");
  const double fan_in = static_cast<double>(shape.size() == 2 ? shape[1] : shape[0]);
  const double fan_out = static_cast<double>(shape[0]);
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  Tensor out(shape);
  Rng rng(seed);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : out.values()) v = dist(rng);
  return out;
}

}  // namespace krdn::ad
