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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "krdn/denoiser.hpp"
#include "krdn/graph.hpp"
#include "krdn/model.hpp"
#include "krdn/parameters.hpp"
#include "krdn/tape.hpp"

namespace krdn::gradcheck {

/// ||a - b|| / max(||a||, ||b||); 0 when both norms are below 1e-10.
double relative_error(std::span<const double> analytic, std::span<const double> numeric);

struct CheckResult {
  std::string name;
  double rel_error = 0.0;
  bool passed = false;
};

/**
 * Each primitive on small random operands, reduced to a scalar by a fixed
 * random weighting, against central differences. Operands are kept away
 * from kinks and poles. `corrupt` breaks one backward rule on every tape.
 */
std::vector<CheckResult> check_primitives(std::uint64_t seed,
                                          std::optional<ad::Op> corrupt = std::nullopt,
                                          double tolerance = 1e-6, double epsilon = 1e-6);

/// A complete model instance small enough for elementwise differencing.
struct Toy {
  model::ModelConfig config;
  graph::Graphs graphs;
  ad::ParameterStore store;
  model::Batch batch;
  denoise::SimilarityBank bank;
  std::vector<double> triplet_weights;
};

/// 6 users, 8 items, 4 attribute entities, 3 relations, at most 30
/// triplets covering all three facets; d = 8, L = 2, n = 2. The pruning
/// threshold sits in the widest gap of the initial divergences so that
/// some edges are pruned and none are near the threshold.
Toy make_toy(std::uint64_t seed, model::Variant variant = model::Variant::Full);

/// Loss of the toy under its fixed weights, batch and bank.
double toy_loss(const Toy& toy, const ad::ParameterStore& store);

/// One result per continuous parameter block, analytic vs central
/// differences of the full loss.
std::vector<CheckResult> check_model(const Toy& toy, std::optional<ad::Op> corrupt = std::nullopt,
                                     double tolerance = 1e-4, double epsilon = 1e-6);

struct DisarmCheck {
  std::vector<double> alpha;
  std::vector<double> exact;
  std::vector<double> mean;
  std::vector<double> standard_error;
  std::size_t samples = 0;
  /// max_i |mean_i - exact_i| / standard_error_i.
  double max_z = 0.0;
  bool passed = false;
};

/// Analytic objective over K gates used by check_disarm.
double disarm_objective(std::span<const double> bits);

/// Exact gradient of E_b[f(b)] w.r.t. the logits by enumerating all 2^K
/// masks.
std::vector<double> enumerate_gradient(std::span<const double> alpha);

/// Monte Carlo mean of the antithetic estimator over `samples` draws
/// against enumeration; passes when every coordinate is within 3 standard
/// errors.
DisarmCheck check_disarm(std::size_t gates, std::size_t samples, std::uint64_t seed);

}  // namespace krdn::gradcheck
