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
#include <iosfwd>
#include <vector>

#include "krdn/graph.hpp"
#include "krdn/tape.hpp"

namespace krdn::denoise {

struct DenoiseConfig {
  /// Pruning threshold on |sigmoid(p~) - sigmoid(p^)|.
  double gamma = 0.2;
  /// Self-enhancement rounds per propagation layer.
  std::size_t n_iterations = 3;
  /// false disables contrastive denoising: every edge is kept and a single
  /// weighted-aggregation round runs per layer.
  bool hard_pruning = true;
};

/// Per-training-edge keep bit gating the positive loss terms.
struct SimilarityBank {
  std::vector<std::uint8_t> keep;

  static SimilarityBank all_kept(std::size_t edges) { return {std::vector<std::uint8_t>(edges, 1)}; }
  std::size_t size() const noexcept { return keep.size(); }
  std::size_t pruned() const noexcept;
  friend bool operator==(const SimilarityBank&, const SimilarityBank&) = default;
};

/// Training edges as tape index lists, in InteractionGraph edge-id order.
struct EdgeIndex {
  ad::IndexList users;
  ad::IndexList items;
  std::size_t num_users = 0;
  std::size_t num_items = 0;

  static EdgeIndex from(const graph::InteractionGraph& graph);
  std::size_t size() const noexcept { return users->size(); }
};

/// Softmax of `logits` within each segment (edges sharing a user).
ad::Var segment_softmax(const ad::Var& logits, const ad::IndexList& segments,
                        std::size_t num_segments);

/// Per-item mean relation embedding over R_(i); the zero vector when R_(i)
/// is empty.
ad::Var relation_means(ad::Tape& tape, const ad::Var& relations, const graph::KnowledgeGraph& kg);

/// p~_{u,i}: softmax over N_(u) of <e~_u, e~_i>.
ad::Var collab_similarity(const ad::Var& users, const ad::Var& items, const EdgeIndex& edges);

/**
 * p^_{u,i}: softmax over N_(u) of mean_{r in R_(i)} <e_r * e^_u, e^_i>.
 * The relation term modulates the user vector elementwise; since the inner
 * product is linear this equals <e^_u, e^_i * mean_r e_r>, which is how it
 * is evaluated. An item with empty R_(i) gets logit 0.
 */
ad::Var knowledge_similarity(const ad::Var& users, const ad::Var& items, const ad::Var& rel_means,
                             const EdgeIndex& edges);

/// 1 when |sigmoid(p_collab) - sigmoid(p_know)| < gamma (strict).
bool prune_indicator(double p_collab, double p_know, double gamma);
double divergence(double p_collab, double p_know);

/// Per-edge similarities and keep bits of one self-enhancement round.
struct EdgeStats {
  std::vector<double> p_collab;
  std::vector<double> p_know;
  std::vector<double> keep;
};

struct EnhancedUsers {
  ad::Var knowledge;
  ad::Var collaborative;
  EdgeStats last_round;
};

/**
 * Relation-aware self-enhancement of both user views over n rounds, with
 * item representations held fixed. Each round recomputes p~ and p^ from the
 * current users, derives keep bits from the pruning indicator, and sets
 *
 *   e_u <- normalize(e_u + sum_i keep_{u,i} p_{u,i} e_i)
 *
 * per view. Keep bits are constants of the round (no gradient flows through
 * the threshold). With hard_pruning off, one round runs with every bit 1.
 */
EnhancedUsers self_enhance(ad::Tape& tape, const ad::Var& users_knowledge,
                           const ad::Var& users_collab, const ad::Var& items_knowledge,
                           const ad::Var& items_collab, const ad::Var& rel_means,
                           const EdgeIndex& edges, const DenoiseConfig& config);

/// Bank of prune bits taken from the last self-enhancement round.
SimilarityBank make_bank(const EdgeStats& stats, const DenoiseConfig& config);

/// TSV with header u, i, p_collab, p_know, divergence, bit.
void write_edge_divergence(std::ostream& out, const graph::InteractionGraph& graph,
                           const EdgeStats& stats);

}  // namespace krdn::denoise
