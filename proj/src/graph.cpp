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

#include "krdn/graph.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <tuple>

#include <json.hpp>

#include "krdn/error.hpp"

namespace krdn::graph {

std::string_view facet_name(Facet f) {
  switch (f) {
    case Facet::ItemItem:
      return "T1";
    case Facet::ItemAttribute:
      return "T2";
    case Facet::AttributeAttribute:
      return "T3";
  }
  return "?";
}

Facet classify(const data::TripletRecord& t, std::size_t num_items) {
  const bool head_item = t.head < num_items;
  const bool tail_item = t.tail < num_items;
  if (head_item && tail_item) return Facet::ItemItem;
  if (head_item || tail_item) return Facet::ItemAttribute;
  return Facet::AttributeAttribute;
}

std::vector<Facet> classify_facets(const std::vector<data::TripletRecord>& triplets,
                                   std::size_t num_items) {
  std::vector<Facet> out;
  out.reserve(triplets.size());
  for (const auto& t : triplets) out.push_back(classify(t, num_items));
  return out;
}

InteractionGraph InteractionGraph::build(const std::vector<data::InteractionRecord>& records,
                                         std::size_t num_users, std::size_t num_items) {
  std::vector<data::InteractionRecord> sorted = records;
  for (const auto& r : sorted) {
    if (r.user >= num_users || r.item >= num_items) {
      throw BoundsError("interaction (" + std::to_string(r.user) + ", " + std::to_string(r.item) +
                        ") outside " + std::to_string(num_users) + " users x " +
                        std::to_string(num_items) + " items");
    }
  }
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  InteractionGraph g;
  g.num_items_ = num_items;
  g.user_offsets_.assign(num_users + 1, 0);
  g.edge_users_.reserve(sorted.size());
  g.edge_items_.reserve(sorted.size());
  for (const auto& r : sorted) {
    ++g.user_offsets_[r.user + 1];
    g.edge_users_.push_back(r.user);
    g.edge_items_.push_back(r.item);
  }
  for (std::size_t u = 0; u < num_users; ++u) g.user_offsets_[u + 1] += g.user_offsets_[u];

  g.item_offsets_.assign(num_items + 1, 0);
  for (std::size_t i : g.edge_items_) ++g.item_offsets_[i + 1];
  for (std::size_t i = 0; i < num_items; ++i) g.item_offsets_[i + 1] += g.item_offsets_[i];
  g.item_users_.resize(sorted.size());
  g.item_edges_.resize(sorted.size());
  std::vector<std::size_t> cursor(g.item_offsets_.begin(), g.item_offsets_.end() - 1);
  // Edges are user-major, so each item's user list comes out ascending.
  for (std::size_t e = 0; e < sorted.size(); ++e) {
    const std::size_t slot = cursor[g.edge_items_[e]]++;
    g.item_users_[slot] = g.edge_users_[e];
    g.item_edges_[slot] = e;
  }
  return g;
}

std::optional<std::size_t> InteractionGraph::edge_id(std::size_t u, std::size_t i) const {
  if (u >= num_users()) return std::nullopt;
  const auto items = user_items(u);
  auto it = std::lower_bound(items.begin(), items.end(), i);
  if (it == items.end() || *it != i) return std::nullopt;
  return user_offsets_[u] + static_cast<std::size_t>(it - items.begin());
}

KnowledgeGraph KnowledgeGraph::build(const std::vector<data::TripletRecord>& triplets,
                                     std::size_t num_entities, std::size_t num_relations,
                                     std::size_t num_items) {
  KnowledgeGraph kg;
  kg.num_items_ = num_items;
  kg.num_entities_ = std::max(num_entities, num_items);
  kg.num_relations_ = num_relations;

  std::set<data::TripletRecord> seen;
  for (const auto& t : triplets) {
    if (t.head >= kg.num_entities_ || t.tail >= kg.num_entities_ || t.relation >= num_relations) {
      throw BoundsError("triplet (" + std::to_string(t.head) + ", " + std::to_string(t.relation) +
                        ", " + std::to_string(t.tail) + ") outside " +
                        std::to_string(kg.num_entities_) + " entities x " +
                        std::to_string(num_relations) + " relations");
    }
    if (seen.insert(t).second) kg.triplets_.push_back(t);
  }
  kg.facets_ = classify_facets(kg.triplets_, num_items);

  kg.edges_.reserve(2 * kg.triplets_.size());
  for (std::size_t id = 0; id < kg.triplets_.size(); ++id) {
    const auto& t = kg.triplets_[id];
    kg.edges_.push_back({t.head, t.relation, t.tail, id, false});
    if (t.head != t.tail) kg.edges_.push_back({t.tail, t.relation, t.head, id, true});
  }
  std::sort(kg.edges_.begin(), kg.edges_.end(), [](const KgEdge& a, const KgEdge& b) {
    return std::tie(a.head, a.relation, a.tail, a.triplet, a.inverse) <
           std::tie(b.head, b.relation, b.tail, b.triplet, b.inverse);
  });
  kg.head_offsets_.assign(kg.num_entities_ + 1, 0);
  for (const auto& e : kg.edges_) ++kg.head_offsets_[e.head + 1];
  for (std::size_t h = 0; h < kg.num_entities_; ++h) kg.head_offsets_[h + 1] += kg.head_offsets_[h];

  std::vector<std::vector<std::size_t>> rels(num_items);
  for (const auto& t : kg.triplets_) {
    if (t.head < num_items) rels[t.head].push_back(t.relation);
  }
  kg.relation_offsets_.assign(num_items + 1, 0);
  for (std::size_t i = 0; i < num_items; ++i) {
    auto& r = rels[i];
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
    kg.item_relations_.insert(kg.item_relations_.end(), r.begin(), r.end());
    kg.relation_offsets_[i + 1] = kg.item_relations_.size();
  }
  return kg;
}

std::array<std::size_t, 3> KnowledgeGraph::facet_counts() const {
  std::array<std::size_t, 3> out{};
  for (Facet f : facets_) ++out[static_cast<std::size_t>(f)];
  return out;
}

Graphs build_indices(const std::vector<data::InteractionRecord>& interactions,
                     const std::vector<data::TripletRecord>& triplets, const data::Counts& counts) {
  Graphs g;
  g.interactions = InteractionGraph::build(interactions, counts.num_users, counts.num_items);
  g.kg = KnowledgeGraph::build(triplets, counts.num_entities, counts.num_relations,
                               counts.num_items);
  return g;
}

std::string describe_json(const Graphs& graphs) {
  const auto& ig = graphs.interactions;
  const auto& kg = graphs.kg;
  nlohmann::ordered_json doc;
  doc["users"] = ig.num_users();
  doc["items"] = ig.num_items();
  doc["interactions"] = ig.num_edges();
  doc["entities"] = kg.num_entities();
  doc["relations"] = kg.num_relations();
  doc["triplets"] = kg.num_triplets();
  const auto counts = kg.facet_counts();
  doc["facets"] = {{"T1", counts[0]}, {"T2", counts[1]}, {"T3", counts[2]}};

  auto histogram = [](auto degree_of, std::size_t n) {
    std::map<std::size_t, std::size_t> h;
    for (std::size_t k = 0; k < n; ++k) ++h[degree_of(k)];
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const auto& [degree, count] : h) out.push_back({degree, count});
    return out;
  };
  doc["user_degree_histogram"] =
      histogram([&](std::size_t u) { return ig.user_items(u).size(); }, ig.num_users());
  doc["item_degree_histogram"] =
      histogram([&](std::size_t i) { return ig.item_users(i).size(); }, ig.num_items());
  doc["entity_degree_histogram"] =
      histogram([&](std::size_t h) { return kg.degree(h); }, kg.num_entities());
  return doc.dump(2);
}

}  // namespace krdn::graph
