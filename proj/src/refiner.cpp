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

#include "krdn/refiner.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "krdn/error.hpp"
#include "krdn/io_format.hpp"
#include "krdn/rng.hpp"

namespace krdn::refiner {

namespace {

// Edges of one message group, with their per-edge weights.
struct EdgeGroup {
  std::vector<std::size_t> heads;
  std::vector<std::size_t> tails;
  std::vector<std::size_t> relations;
  std::vector<double> weights;
  bool unit_weights = true;
};

struct LayerPlan {
  EdgeGroup product;  // W1 (e_t * e_r)
  EdgeGroup sum;      // W2 (e_t + e_r)
  std::vector<double> inverse_degree;
  ad::IndexList product_heads, product_tails, product_relations;
  ad::IndexList sum_heads, sum_tails, sum_relations;
};

LayerPlan make_plan(const graph::KnowledgeGraph& kg, std::span<const double> weights,
                    AggregationRule rule) {
  if (weights.size() != kg.num_triplets()) {
    throw ShapeError("kg_aggregate_layer: " + std::to_string(weights.size()) +
                     " triplet weights for " + std::to_string(kg.num_triplets()) + " triplets");
  }
  LayerPlan plan;
  plan.inverse_degree.assign(kg.num_entities(), 0.0);
  for (std::size_t h = 0; h < kg.num_entities(); ++h) {
    if (kg.degree(h) > 0) plan.inverse_degree[h] = 1.0 / static_cast<double>(kg.degree(h));
  }
  for (const graph::KgEdge& e : kg.edges()) {
    const double w = weights[e.triplet];
    if (w == 0.0) continue;  // masked: contributes nothing
    const bool additive =
        rule == AggregationRule::Compositional && kg.facets()[e.triplet] == graph::Facet::ItemAttribute;
    EdgeGroup& g = additive ? plan.sum : plan.product;
    g.heads.push_back(e.head);
    g.tails.push_back(e.tail);
    g.relations.push_back(e.relation);
    g.weights.push_back(w);
    g.unit_weights = g.unit_weights && w == 1.0;
  }
  plan.product_heads = ad::make_index(plan.product.heads);
  plan.product_tails = ad::make_index(plan.product.tails);
  plan.product_relations = ad::make_index(plan.product.relations);
  plan.sum_heads = ad::make_index(plan.sum.heads);
  plan.sum_tails = ad::make_index(plan.sum.tails);
  plan.sum_relations = ad::make_index(plan.sum.relations);
  return plan;
}

ad::Var apply_plan(ad::Tape& tape, const LayerPlan& plan, const ad::Var& entities,
                   const KgParams& params) {
  const ad::Tensor& e = entities.value();
  if (e.rank() != 2 || e.rows() != plan.inverse_degree.size()) {
    throw ShapeError("kg_aggregate_layer: entity table shape " + ad::shape_string(e.shape()) +
                     " does not match " + std::to_string(plan.inverse_degree.size()) + " entities");
  }
  const std::size_t d = e.cols();
  if (params.relations.value().rank() != 2 || params.relations.value().cols() != d) {
    throw ShapeError("kg_aggregate_layer: relation dimension does not match entity dimension");
  }

  auto messages = [&](const EdgeGroup& g, const ad::IndexList& heads, const ad::IndexList& tails,
                      const ad::IndexList& rels, bool additive) -> ad::Var {
    const ad::Var t = ad::gather(entities, tails);
    const ad::Var r = ad::gather(params.relations, rels);
    const ad::Var combined = additive ? ad::add(t, r) : ad::mul(t, r);
    ad::Var msg = ad::relu(ad::matvec(additive ? params.w2 : params.w1, combined));
    if (!g.unit_weights) msg = ad::scale_rows(msg, tape.constant(ad::Tensor::vector(g.weights)));
    return ad::scatter_add(msg, heads, e.rows());
  };

  ad::Var total;
  if (!plan.product.heads.empty()) {
    total = messages(plan.product, plan.product_heads, plan.product_tails, plan.product_relations,
                     false);
  }
  if (!plan.sum.heads.empty()) {
    const ad::Var s = messages(plan.sum, plan.sum_heads, plan.sum_tails, plan.sum_relations, true);
    total = total.valid() ? ad::add(total, s) : s;
  }
  if (!total.valid()) return tape.constant(ad::Tensor({e.rows(), d}));
  return ad::scale_rows(total, tape.constant(ad::Tensor::vector(plan.inverse_degree)));
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double z = std::exp(x);
  return z / (1.0 + z);
}

MaskSample masks_from_uniforms(MaskBank bank, std::vector<double> u) {
  if (u.size() != bank.alpha.size()) throw ShapeError("masks_from_uniforms: size mismatch");
  MaskSample s;
  s.b.resize(u.size());
  s.b_tilde.resize(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double p = sigmoid(bank.alpha[i]);
    s.b[i] = (1.0 - u[i] < p) ? 1.0 : 0.0;
    s.b_tilde[i] = (u[i] < p) ? 1.0 : 0.0;
  }
  s.u = std::move(u);
  return s;
}

MaskSample sample_masks(MaskBank bank, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> u(bank.alpha.size());
  for (double& v : u) v = uniform_open(rng);
  return masks_from_uniforms(bank, std::move(u));
}

std::vector<double> expected_masks(MaskBank bank) {
  std::vector<double> out(bank.alpha.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid(bank.alpha[i]);
  return out;
}

std::vector<double> disarm_gradient(double loss_b, double loss_btilde, const MaskSample& sample,
                                    MaskBank bank) {
  if (sample.b.size() != bank.alpha.size() || sample.b_tilde.size() != bank.alpha.size()) {
    throw ShapeError("disarm_gradient: sample does not match mask bank");
  }
  std::vector<double> grad(bank.alpha.size(), 0.0);
  const double half_diff = 0.5 * (loss_b - loss_btilde);
  if (half_diff == 0.0) return grad;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (sample.b[i] == sample.b_tilde[i]) continue;
    const double sign = sample.b_tilde[i] != 0.0 ? -1.0 : 1.0;
    grad[i] = half_diff * sign * sigmoid(std::abs(bank.alpha[i]));
  }
  return grad;
}

ad::Var kg_aggregate_layer(ad::Tape& tape, const graph::KnowledgeGraph& kg, const ad::Var& entities,
                           const KgParams& params, std::span<const double> triplet_weights,
                           AggregationRule rule) {
  return apply_plan(tape, make_plan(kg, triplet_weights, rule), entities, params);
}

KgForward kg_forward(ad::Tape& tape, const graph::KnowledgeGraph& kg, const ad::Var& entities,
                     const KgParams& params, std::span<const double> triplet_weights,
                     std::size_t num_layers, AggregationRule rule) {
  if (num_layers < 1) throw ConfigError("kg_forward: at least one layer required");
  const LayerPlan plan = make_plan(kg, triplet_weights, rule);
  KgForward out;
  out.layers.push_back(entities);
  out.summed = entities;
  for (std::size_t l = 1; l <= num_layers; ++l) {
    out.layers.push_back(apply_plan(tape, plan, out.layers.back(), params));
    out.summed = ad::add(out.summed, out.layers.back());
  }
  return out;
}

std::vector<KeepProbability> keep_probabilities(MaskBank bank, const graph::KnowledgeGraph& kg) {
  if (bank.alpha.size() != kg.num_triplets()) {
    throw ShapeError("keep_probabilities: mask bank does not match the KG");
  }
  std::vector<KeepProbability> rows;
  rows.reserve(kg.num_triplets());
  for (std::size_t i = 0; i < kg.num_triplets(); ++i) {
    rows.push_back({i, kg.triplets()[i], kg.facets()[i], sigmoid(bank.alpha[i])});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const KeepProbability& a, const KeepProbability& b) {
    return a.probability < b.probability;
  });
  return rows;
}

void write_keep_probabilities(std::ostream& out, const std::vector<KeepProbability>& rows) {
  out << "triplet_id\th\tr\tt\tfacet\tkeep_probability\n";
  for (const auto& r : rows) {
    out << r.triplet << '\t' << r.record.head << '\t' << r.record.relation << '\t' << r.record.tail
        << '\t' << graph::facet_name(r.facet) << '\t' << format_double(r.probability) << '\n';
  }
}

}  // namespace krdn::refiner
