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

#include "krdn/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "krdn/error.hpp"
#include "krdn/io_format.hpp"
#include "krdn/refiner.hpp"

namespace krdn::denoise {

std::size_t SimilarityBank::pruned() const noexcept {
  return static_cast<std::size_t>(std::count(keep.begin(), keep.end(), std::uint8_t{0}));
}

EdgeIndex EdgeIndex::from(const graph::InteractionGraph& graph) {
  return {ad::make_index(graph.edge_users()), ad::make_index(graph.edge_items()),
          graph.num_users(), graph.num_items()};
}

ad::Var segment_softmax(const ad::Var& logits, const ad::IndexList& segments,
                        std::size_t num_segments) {
  ad::Tape& tape = *logits.tape();
  const ad::Tensor& x = logits.value();
  const auto& seg = *segments;
  if (x.rank() != 1 || x.size() != seg.size()) {
    throw ShapeError("segment_softmax: logits must be a vector with one entry per segment index");
  }
  // Shifting by the segment maximum leaves the softmax unchanged, so the
  // shift enters as a constant.
  std::vector<double> max_of(num_segments, -std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < seg.size(); ++k) max_of[seg[k]] = std::max(max_of[seg[k]], x[k]);
  std::vector<double> shift(seg.size());
  for (std::size_t k = 0; k < seg.size(); ++k) shift[k] = max_of[seg[k]];
  const ad::Var e = ad::exp(ad::sub(logits, tape.constant(ad::Tensor::vector(std::move(shift)))));
  const ad::Var denom = ad::gather(ad::scatter_add(e, segments, num_segments), segments);
  return ad::div(e, denom);
}

ad::Var relation_means(ad::Tape& tape, const ad::Var& relations, const graph::KnowledgeGraph& kg) {
  std::vector<std::size_t> rel_idx;
  std::vector<std::size_t> item_idx;
  std::vector<double> inv_count(kg.num_items(), 0.0);
  for (std::size_t i = 0; i < kg.num_items(); ++i) {
    const auto rels = kg.item_relations(i);
    for (std::size_t r : rels) {
      rel_idx.push_back(r);
      item_idx.push_back(i);
    }
    if (!rels.empty()) inv_count[i] = 1.0 / static_cast<double>(rels.size());
  }
  const std::size_t d = relations.value().cols();
  if (rel_idx.empty()) return tape.constant(ad::Tensor({kg.num_items(), d}));
  const ad::Var summed = ad::scatter_add(ad::gather(relations, ad::make_index(std::move(rel_idx))),
                                         ad::make_index(std::move(item_idx)), kg.num_items());
  return ad::scale_rows(summed, tape.constant(ad::Tensor::vector(std::move(inv_count))));
}

ad::Var collab_similarity(const ad::Var& users, const ad::Var& items, const EdgeIndex& edges) {
  const ad::Var logits = ad::dot(ad::gather(users, edges.users), ad::gather(items, edges.items));
  return segment_softmax(logits, edges.users, edges.num_users);
}

ad::Var knowledge_similarity(const ad::Var& users, const ad::Var& items, const ad::Var& rel_means,
                             const EdgeIndex& edges) {
  const ad::Var modulated =
      ad::mul(ad::gather(items, edges.items), ad::gather(rel_means, edges.items));
  const ad::Var logits = ad::dot(ad::gather(users, edges.users), modulated);
  return segment_softmax(logits, edges.users, edges.num_users);
}

double divergence(double p_collab, double p_know) {
  return std::abs(refiner::sigmoid(p_collab) - refiner::sigmoid(p_know));
}

bool prune_indicator(double p_collab, double p_know, double gamma) {
  return divergence(p_collab, p_know) < gamma;
}

EnhancedUsers self_enhance(ad::Tape& tape, const ad::Var& users_knowledge,
                           const ad::Var& users_collab, const ad::Var& items_knowledge,
                           const ad::Var& items_collab, const ad::Var& rel_means,
                           const EdgeIndex& edges, const DenoiseConfig& config) {
  if (config.hard_pruning && config.n_iterations < 1) {
    throw ConfigError("self_enhance: at least one iteration required");
  }
  const std::size_t rounds = config.hard_pruning ? config.n_iterations : 1;
  const std::size_t n_edges = edges.size();

  EnhancedUsers out{users_knowledge, users_collab, {}};
  if (n_edges == 0) {
    out.knowledge = ad::l2_normalize(users_knowledge);
    out.collaborative = ad::l2_normalize(users_collab);
    return out;
  }

  // Item-side terms are fixed across rounds.
  const ad::Var item_k = ad::gather(items_knowledge, edges.items);
  const ad::Var item_c = ad::gather(items_collab, edges.items);
  const ad::Var modulated = ad::mul(item_k, ad::gather(rel_means, edges.items));

  for (std::size_t round = 0; round < rounds; ++round) {
    const ad::Var p_know = segment_softmax(
        ad::dot(ad::gather(out.knowledge, edges.users), modulated), edges.users, edges.num_users);
    const ad::Var p_collab = segment_softmax(
        ad::dot(ad::gather(out.collaborative, edges.users), item_c), edges.users, edges.num_users);

    EdgeStats stats;
    stats.p_collab.assign(p_collab.value().values().begin(), p_collab.value().values().end());
    stats.p_know.assign(p_know.value().values().begin(), p_know.value().values().end());
    stats.keep.assign(n_edges, 1.0);
    if (config.hard_pruning) {
      for (std::size_t e = 0; e < n_edges; ++e) {
        stats.keep[e] = prune_indicator(stats.p_collab[e], stats.p_know[e], config.gamma) ? 1.0 : 0.0;
      }
    }
    const ad::Var keep = tape.constant(ad::Tensor::vector(stats.keep));

    const ad::Var msg_k = ad::scale_rows(item_k, ad::mul(p_know, keep));
    const ad::Var msg_c = ad::scale_rows(item_c, ad::mul(p_collab, keep));
    out.knowledge = ad::l2_normalize(
        ad::add(out.knowledge, ad::scatter_add(msg_k, edges.users, edges.num_users)));
    out.collaborative = ad::l2_normalize(
        ad::add(out.collaborative, ad::scatter_add(msg_c, edges.users, edges.num_users)));
    out.last_round = std::move(stats);
  }
  return out;
}

SimilarityBank make_bank(const EdgeStats& stats, const DenoiseConfig& config) {
  SimilarityBank bank;
  bank.keep.assign(stats.keep.size(), 1);
  if (!config.hard_pruning) return bank;
  for (std::size_t e = 0; e < stats.keep.size(); ++e) bank.keep[e] = stats.keep[e] != 0.0 ? 1 : 0;
  return bank;
}

void write_edge_divergence(std::ostream& out, const graph::InteractionGraph& graph,
                           const EdgeStats& stats) {
  out << "u\ti\tp_collab\tp_know\tdivergence\tbit\n";
  for (std::size_t e = 0; e < graph.num_edges(); ++e) {
    out << graph.edge_users()[e] << '\t' << graph.edge_items()[e] << '\t'
        << format_double(stats.p_collab[e]) << '\t' << format_double(stats.p_know[e]) << '\t'
        << format_double(divergence(stats.p_collab[e], stats.p_know[e])) << '\t'
        << (stats.keep[e] != 0.0 ? 1 : 0) << '\n';
  }
}

}  // namespace krdn::denoise
