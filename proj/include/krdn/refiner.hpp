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

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "krdn/graph.hpp"
#include "krdn/tape.hpp"

namespace krdn::refiner {

/// Numerically stable logistic function.
double sigmoid(double x);

/// One Bernoulli gate per triplet, parameterized by a real logit; the keep
/// probability is sigmoid(alpha).
struct MaskBank {
  std::span<const double> alpha;
};

/**
 * Antithetic pair of gate draws from one set of uniforms:
 * b[i] = 1{1 - u[i] < sigmoid(alpha[i])}, b_tilde[i] = 1{u[i] < sigmoid(alpha[i])}.
 * Bits are stored as 0.0 / 1.0 so they can be used directly as triplet
 * weights.
 */
struct MaskSample {
  std::vector<double> u;
  std::vector<double> b;
  std::vector<double> b_tilde;
};

MaskSample sample_masks(MaskBank bank, std::uint64_t seed);
MaskSample masks_from_uniforms(MaskBank bank, std::vector<double> u);
/// sigmoid(alpha) per triplet; the deterministic inference-time weights.
std::vector<double> expected_masks(MaskBank bank);

/**
 * DisARM estimate of d E[f] / d alpha from the two losses of an antithetic
 * pair:  0.5 (f(b) - f(b~)) (-1)^{b~_i} 1{b_i != b~_i} sigmoid(|alpha_i|).
 */
std::vector<double> disarm_gradient(double loss_b, double loss_btilde, const MaskSample& sample,
                                    MaskBank bank);

/// How neighbor messages are combined.
enum class AggregationRule {
  /// W1 (e_t * e_r) for T1/T3 triplets, W2 (e_t + e_r) for T2 triplets.
  Compositional,
  /// W1 (e_t * e_r) for every triplet; used when knowledge refining is off.
  Uniform,
};

/// Continuous inputs of the KG aggregation, all bound on the same tape.
struct KgParams {
  ad::Var relations;  // num_relations x d
  ad::Var w1;         // d x d
  ad::Var w2;         // d x d
};

/**
 * One aggregation layer over the KG:
 *
 *   e_h' = 1/|N_h| * sum_{(r,t) in N_h} ReLU(W phi(e_t, e_r)) * weight(h,t)
 *
 * `triplet_weights` holds one value per triplet (sampled bits during
 * training, keep probabilities at inference); inverse edges reuse their
 * triplet's weight. |N_h| counts every neighbor, weighted or not. Entities
 * without neighbors produce the zero vector.
 */
ad::Var kg_aggregate_layer(ad::Tape& tape, const graph::KnowledgeGraph& kg, const ad::Var& entities,
                           const KgParams& params, std::span<const double> triplet_weights,
                           AggregationRule rule = AggregationRule::Compositional);

struct KgForward {
  /// layers[0] is the input; layers[l] the output of layer l.
  std::vector<ad::Var> layers;
  /// Sum over layers 0..L.
  ad::Var summed;
};

KgForward kg_forward(ad::Tape& tape, const graph::KnowledgeGraph& kg, const ad::Var& entities,
                     const KgParams& params, std::span<const double> triplet_weights,
                     std::size_t num_layers, AggregationRule rule = AggregationRule::Compositional);

struct KeepProbability {
  std::size_t triplet = 0;
  data::TripletRecord record;
  graph::Facet facet = graph::Facet::ItemItem;
  double probability = 0.0;
};

/// One row per triplet, sorted by ascending probability (ties by id).
std::vector<KeepProbability> keep_probabilities(MaskBank bank, const graph::KnowledgeGraph& kg);

/// TSV with header triplet_id, h, r, t, facet, keep_probability.
void write_keep_probabilities(std::ostream& out, const std::vector<KeepProbability>& rows);

}  // namespace krdn::refiner
