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
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "krdn/data.hpp"

namespace krdn::graph {

/// Triplet category by how many endpoints are items.
enum class Facet : std::uint8_t {
  ItemItem,            // T1: head and tail are items
  ItemAttribute,       // T2: exactly one endpoint is an item
  AttributeAttribute,  // T3: neither endpoint is an item
};

std::string_view facet_name(Facet f);
Facet classify(const data::TripletRecord& t, std::size_t num_items);
std::vector<Facet> classify_facets(const std::vector<data::TripletRecord>& triplets,
                                   std::size_t num_items);

/// Bipartite user-item graph in CSR form. Edge ids follow user-major,
/// item-ascending order, so edge e of user u lives at offsets[u] + k.
class InteractionGraph {
 public:
  InteractionGraph() = default;
  static InteractionGraph build(const std::vector<data::InteractionRecord>& records,
                                std::size_t num_users, std::size_t num_items);

  std::size_t num_users() const noexcept { return user_offsets_.empty() ? 0 : user_offsets_.size() - 1; }
  std::size_t num_items() const noexcept { return num_items_; }
  std::size_t num_edges() const noexcept { return edge_items_.size(); }

  std::span<const std::size_t> user_items(std::size_t u) const {
    return {edge_items_.data() + user_offsets_[u], user_offsets_[u + 1] - user_offsets_[u]};
  }
  std::span<const std::size_t> item_users(std::size_t i) const {
    return {item_users_.data() + item_offsets_[i], item_offsets_[i + 1] - item_offsets_[i]};
  }
  /// Edge ids aligned with item_users(i).
  std::span<const std::size_t> item_edges(std::size_t i) const {
    return {item_edges_.data() + item_offsets_[i], item_offsets_[i + 1] - item_offsets_[i]};
  }
  std::size_t user_edge_begin(std::size_t u) const { return user_offsets_[u]; }

  std::optional<std::size_t> edge_id(std::size_t u, std::size_t i) const;
  bool has_edge(std::size_t u, std::size_t i) const { return edge_id(u, i).has_value(); }

  /// Per-edge endpoints in edge-id order.
  const std::vector<std::size_t>& edge_users() const noexcept { return edge_users_; }
  const std::vector<std::size_t>& edge_items() const noexcept { return edge_items_; }

  friend bool operator==(const InteractionGraph&, const InteractionGraph&) = default;

 private:
  std::size_t num_items_ = 0;
  std::vector<std::size_t> user_offsets_{0};
  std::vector<std::size_t> edge_users_;
  std::vector<std::size_t> edge_items_;
  std::vector<std::size_t> item_offsets_{0};
  std::vector<std::size_t> item_users_;
  std::vector<std::size_t> item_edges_;
};

/// One directed KG adjacency entry. Inverse entries (tail -> head) share
/// the forward triplet's id, and therefore its mask and facet.
struct KgEdge {
  std::size_t head = 0;
  std::size_t relation = 0;
  std::size_t tail = 0;
  std::size_t triplet = 0;
  bool inverse = false;
  friend bool operator==(const KgEdge&, const KgEdge&) = default;
};

class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;
  /// Exact duplicate triplets are dropped (first occurrence kept); triplet
  /// ids index the deduplicated list.
  static KnowledgeGraph build(const std::vector<data::TripletRecord>& triplets,
                              std::size_t num_entities, std::size_t num_relations,
                              std::size_t num_items);

  std::size_t num_entities() const noexcept { return num_entities_; }
  std::size_t num_relations() const noexcept { return num_relations_; }
  std::size_t num_items() const noexcept { return num_items_; }
  std::size_t num_triplets() const noexcept { return triplets_.size(); }

  const std::vector<data::TripletRecord>& triplets() const noexcept { return triplets_; }
  const std::vector<Facet>& facets() const noexcept { return facets_; }
  std::array<std::size_t, 3> facet_counts() const;

  /// All adjacency entries grouped by head, sorted by (relation, tail, triplet).
  const std::vector<KgEdge>& edges() const noexcept { return edges_; }
  std::span<const KgEdge> neighbors(std::size_t h) const {
    return {edges_.data() + head_offsets_[h], head_offsets_[h + 1] - head_offsets_[h]};
  }
  /// |N_h|, counting masked and unmasked neighbors alike.
  std::size_t degree(std::size_t h) const { return head_offsets_[h + 1] - head_offsets_[h]; }

  /// R_(i): sorted distinct relations of triplets whose head is item i.
  std::span<const std::size_t> item_relations(std::size_t i) const {
    return {item_relations_.data() + relation_offsets_[i],
            relation_offsets_[i + 1] - relation_offsets_[i]};
  }

  friend bool operator==(const KnowledgeGraph&, const KnowledgeGraph&) = default;

 private:
  std::size_t num_entities_ = 0;
  std::size_t num_relations_ = 0;
  std::size_t num_items_ = 0;
  std::vector<data::TripletRecord> triplets_;
  std::vector<Facet> facets_;
  std::vector<KgEdge> edges_;
  std::vector<std::size_t> head_offsets_{0};
  std::vector<std::size_t> relation_offsets_{0};
  std::vector<std::size_t> item_relations_;
};

struct Graphs {
  InteractionGraph interactions;
  KnowledgeGraph kg;
};

/// Builds both indices; any index outside `counts` raises BoundsError.
Graphs build_indices(const std::vector<data::InteractionRecord>& interactions,
                     const std::vector<data::TripletRecord>& triplets, const data::Counts& counts);

/// Facet counts and degree histograms as a JSON document (debug dump).
std::string describe_json(const Graphs& graphs);

}  // namespace krdn::graph
