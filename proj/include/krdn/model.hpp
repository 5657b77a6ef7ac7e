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
#include <string_view>
#include <vector>

#include "krdn/denoiser.hpp"
#include "krdn/graph.hpp"
#include "krdn/parameters.hpp"
#include "krdn/refiner.hpp"
#include "krdn/rng.hpp"
#include "krdn/tape.hpp"

namespace krdn::model {

/// Ablation switch. Exactly one is active per model.
enum class Variant {
  Full,
  NoAKR,     // all triplet gates forced to 1, one aggregation rule for every facet
  NoCDL,     // no interaction pruning, single aggregation round, all-ones bank
  NoAKRCDL,  // both of the above
};

Variant parse_variant(std::string_view name);
std::string_view variant_name(Variant v);
bool refines_knowledge(Variant v);
bool denoises_interactions(Variant v);

struct ModelConfig {
  std::size_t embed_dim = 64;
  std::size_t layers = 3;
  std::size_t n_iterations = 3;
  double gamma = 0.2;
  std::size_t negatives = 200;
  double margin = 0.6;
  double learning_rate = 1e-3;
  std::size_t batch_size = 4096;
  Variant variant = Variant::Full;
  /// Initial mask logit for every triplet (0 -> keep probability 0.5).
  double mask_logit_init = 0.0;

  void validate() const;
  denoise::DenoiseConfig denoise_config() const;
  refiner::AggregationRule aggregation_rule() const;
};

/// Parameter names in the store.
namespace names {
inline constexpr const char* kUserKnowledge = "user_knowledge";  // e^_u, layer 0
inline constexpr const char* kUserCollab = "user_collab";        // e~_u, layer 0
inline constexpr const char* kItemCollab = "item_collab";        // e~_i, layer 0
inline constexpr const char* kEntity = "entity";  // e_e; rows [0, items) are e^_i
inline constexpr const char* kRelation = "relation";
inline constexpr const char* kW1 = "w1";
inline constexpr const char* kW2 = "w2";
inline constexpr const char* kMaskLogits = "mask_logits";
}  // namespace names

/// Names of every continuous (backpropagated) parameter.
std::vector<std::string> continuous_parameters();

/// Xavier-initialized parameters, one substream per tensor.
ad::ParameterStore init_parameters(const ModelConfig& config, const graph::Graphs& graphs,
                                   std::uint64_t seed);

struct ForwardPass {
  ad::Var user_knowledge;  // |U| x d, summed over layers
  ad::Var item_knowledge;  // |I| x d
  ad::Var user_collab;
  ad::Var item_collab;
  /// Similarities and keep bits of the final round of the last layer.
  denoise::EdgeStats edge_stats;
};

/**
 * Full two-view propagation.
 *
 * Knowledge view: entities run through the masked KG aggregation; items
 * take their entity rows; users are self-enhanced against the previous
 * layer's items. Collaborative view: users are self-enhanced the same way,
 * and each item averages its previous-layer users over all of its edges,
 * keeping only edges whose final-round keep bit is 1. Final representations
 * sum layers 0..L per view.
 *
 * `triplet_weights` is ignored (treated as all ones) for variants without
 * knowledge refining.
 */
ForwardPass forward(ad::Tape& tape, const ModelConfig& config, const graph::Graphs& graphs,
                    const ad::ParameterStore& store, std::span<const double> triplet_weights);

struct Representations {
  ad::Tensor user_knowledge;
  ad::Tensor item_knowledge;
  ad::Tensor user_collab;
  ad::Tensor item_collab;
};

struct Inference {
  Representations reps;
  denoise::EdgeStats edge_stats;
};

/// Triplet weights used outside training: keep probabilities, or all ones
/// when knowledge refining is off.
std::vector<double> inference_weights(const ModelConfig& config, const ad::ParameterStore& store);

/// Deterministic forward with inference weights; reads the store only.
Inference infer(const ModelConfig& config, const graph::Graphs& graphs,
                const ad::ParameterStore& store);

/// Cosine similarity with the zero-norm convention (0 when either side is 0).
double cosine(std::span<const double> a, std::span<const double> b);

/// cos(e~_u, e~_i) + cos(e^_u, e^_i), in [-2, 2].
double predict(const Representations& reps, std::size_t user, std::size_t item);

/// `count` items drawn uniformly with replacement from those `user` has no
/// training edge to. Throws when the user has interacted with every item.
std::vector<std::size_t> sample_negatives(std::size_t user, std::size_t count,
                                          const graph::InteractionGraph& train, Rng& rng);

struct Batch {
  std::vector<std::size_t> edges;
  /// negatives_per_positive entries per edge, edge-major.
  std::vector<std::size_t> negatives;
  std::size_t negatives_per_positive = 0;
};

Batch make_batch(std::vector<std::size_t> edges, const graph::InteractionGraph& train,
                 std::size_t negatives_per_positive, std::uint64_t seed);

/**
 * Self-adapting loss over a batch:
 *   sum_{(u,i)} [ m_{u,i} (1 - y_{u,i})_+ + 1/|N| sum_j (y_{u,j} - margin)_+ ].
 */
ad::Var loss(const ForwardPass& pass, const graph::InteractionGraph& train, const Batch& batch,
             const denoise::SimilarityBank& bank, double margin);

struct StepReport {
  double loss_b = 0.0;
  double loss_btilde = 0.0;
  std::size_t differing_masks = 0;
};

/**
 * One optimization step: draw an antithetic mask pair, evaluate the loss
 * under b (on a tape) and under b~ with identical batch and negatives, take
 * the mask-logit gradient from DisARM and the continuous gradients from the
 * b pass, then apply one Adam step to every parameter.
 *
 * `forced_sample` replaces the random draw (tests and diagnostics).
 */
StepReport train_step(ad::ParameterStore& store, const ModelConfig& config,
                      const graph::Graphs& graphs, const denoise::SimilarityBank& bank,
                      const Batch& batch, std::uint64_t mask_seed,
                      const std::optional<refiner::MaskSample>& forced_sample = std::nullopt);

}  // namespace krdn::model
