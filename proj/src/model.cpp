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

#include "krdn/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "krdn/error.hpp"
#include "krdn/io_format.hpp"

namespace krdn::model {

namespace {

ad::IndexList iota_index(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return ad::make_index(std::move(idx));
}

void check_finite_loss(double value, const char* pass) {
  if (!std::isfinite(value)) {
    throw NumericError(std::string("train_step: non-finite loss (") + format_double(value) +
                       ") in the " + pass + " pass");
  }
}

}  // namespace

Variant parse_variant(std::string_view name) {
  if (name == "full") return Variant::Full;
  if (name == "no_AKR") return Variant::NoAKR;
  if (name == "no_CDL") return Variant::NoCDL;
  if (name == "no_AKR_CDL") return Variant::NoAKRCDL;
  throw ConfigError("unknown variant '" + std::string(name) +
                    "' (expected full, no_AKR, no_CDL or no_AKR_CDL)");
}

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::Full:
      return "full";
    case Variant::NoAKR:
      return "no_AKR";
    case Variant::NoCDL:
      return "no_CDL";
    case Variant::NoAKRCDL:
      return "no_AKR_CDL";
  }
  return "?";
}

bool refines_knowledge(Variant v) { return v == Variant::Full || v == Variant::NoCDL; }
bool denoises_interactions(Variant v) { return v == Variant::Full || v == Variant::NoAKR; }

void ModelConfig::validate() const {
  if (embed_dim == 0) throw ConfigError("embed_dim must be positive");
  if (layers == 0) throw ConfigError("layers must be at least 1");
  if (n_iterations == 0) throw ConfigError("n_iterations must be at least 1");
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be non-negative");
  if (negatives == 0) throw ConfigError("negatives must be at least 1");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!std::isfinite(margin)) throw ConfigError("margin must be finite");
  if (!std::isfinite(mask_logit_init)) throw ConfigError("mask_logit_init must be finite");
}

denoise::DenoiseConfig ModelConfig::denoise_config() const {
  return {gamma, n_iterations, denoises_interactions(variant)};
}

refiner::AggregationRule ModelConfig::aggregation_rule() const {
  return refines_knowledge(variant) ? refiner::AggregationRule::Compositional
                                    : refiner::AggregationRule::Uniform;
}

std::vector<std::string> continuous_parameters() {
  return {names::kUserKnowledge, names::kUserCollab, names::kItemCollab, names::kEntity,
          names::kRelation,      names::kW1,         names::kW2};
}

ad::ParameterStore init_parameters(const ModelConfig& config, const graph::Graphs& graphs,
                                   std::uint64_t seed) {
  config.validate();
  const std::size_t d = config.embed_dim;
  const std::size_t nu = graphs.interactions.num_users();
  const std::size_t ni = graphs.interactions.num_items();
  const auto& kg = graphs.kg;
  if (kg.num_items() != ni) throw ConfigError("KG and interaction graph disagree on item count");

  ad::ParameterStore store;
  std::uint64_t k = 0;
  auto add = [&](const char* name, ad::Tensor::Shape shape) {
    store.add(name, ad::xavier_init(shape, derive_seed(seed, {0xA11CE, k++})));
  };
  add(names::kUserKnowledge, {nu, d});
  add(names::kUserCollab, {nu, d});
  add(names::kItemCollab, {ni, d});
  add(names::kEntity, {kg.num_entities(), d});
  add(names::kRelation, {std::max<std::size_t>(kg.num_relations(), 1), d});
  add(names::kW1, {d, d});
  add(names::kW2, {d, d});
  store.add(names::kMaskLogits, ad::Tensor({kg.num_triplets()}, config.mask_logit_init));
  return store;
}

ForwardPass forward(ad::Tape& tape, const ModelConfig& config, const graph::Graphs& graphs,
                    const ad::ParameterStore& store, std::span<const double> triplet_weights) {
  const auto& ig = graphs.interactions;
  const auto& kg = graphs.kg;
  const std::size_t ni = ig.num_items();

  std::vector<double> ones;
  if (!refines_knowledge(config.variant)) {
    ones.assign(kg.num_triplets(), 1.0);
    triplet_weights = ones;
  }

  const ad::Var user_k0 = store.bind(tape, names::kUserKnowledge);
  const ad::Var user_c0 = store.bind(tape, names::kUserCollab);
  const ad::Var item_c0 = store.bind(tape, names::kItemCollab);
  const refiner::KgParams kp{store.bind(tape, names::kRelation), store.bind(tape, names::kW1),
                             store.bind(tape, names::kW2)};
  const refiner::KgForward entities =
      refiner::kg_forward(tape, kg, store.bind(tape, names::kEntity), kp, triplet_weights,
                          config.layers, config.aggregation_rule());

  const ad::IndexList items = iota_index(ni);
  const denoise::EdgeIndex edges = denoise::EdgeIndex::from(ig);
  const ad::Var rel_means = denoise::relation_means(tape, kp.relations, kg);
  const denoise::DenoiseConfig dcfg = config.denoise_config();

  std::vector<double> inv_item_degree(ni, 0.0);
  for (std::size_t i = 0; i < ni; ++i) {
    const std::size_t deg = ig.item_users(i).size();
    if (deg > 0) inv_item_degree[i] = 1.0 / static_cast<double>(deg);
  }
  const ad::Var inv_item_degree_v = tape.constant(ad::Tensor::vector(inv_item_degree));

  ForwardPass out;
  ad::Var prev_uk = user_k0;
  ad::Var prev_uc = user_c0;
  ad::Var prev_ic = item_c0;
  ad::Var sum_uk = user_k0;
  ad::Var sum_uc = user_c0;
  ad::Var sum_ic = item_c0;
  for (std::size_t l = 1; l <= config.layers; ++l) {
    const ad::Var prev_ik = ad::gather(entities.layers[l - 1], items);
    denoise::EnhancedUsers enhanced =
        denoise::self_enhance(tape, prev_uk, prev_uc, prev_ik, prev_ic, rel_means, edges, dcfg);

    ad::Var ic;
    if (edges.size() > 0) {
      const ad::Var msg = ad::scale_rows(ad::gather(prev_uc, edges.users),
                                         tape.constant(ad::Tensor::vector(enhanced.last_round.keep)));
      ic = ad::scale_rows(ad::scatter_add(msg, edges.items, ni), inv_item_degree_v);
    } else {
      ic = tape.constant(ad::Tensor(prev_ic.value().shape()));
    }

    prev_uk = enhanced.knowledge;
    prev_uc = enhanced.collaborative;
    prev_ic = ic;
    sum_uk = ad::add(sum_uk, prev_uk);
    sum_uc = ad::add(sum_uc, prev_uc);
    sum_ic = ad::add(sum_ic, prev_ic);
    out.edge_stats = std::move(enhanced.last_round);
  }
  out.user_knowledge = sum_uk;
  out.user_collab = sum_uc;
  out.item_collab = sum_ic;
  out.item_knowledge = ad::gather(entities.summed, items);
  return out;
}

std::vector<double> inference_weights(const ModelConfig& config, const ad::ParameterStore& store) {
  const auto alpha = store.value(names::kMaskLogits).values();
  if (!refines_knowledge(config.variant)) return std::vector<double>(alpha.size(), 1.0);
  return refiner::expected_masks({alpha});
}

Inference infer(const ModelConfig& config, const graph::Graphs& graphs,
                const ad::ParameterStore& store) {
  ad::Tape tape;
  const std::vector<double> weights = inference_weights(config, store);
  ForwardPass pass = forward(tape, config, graphs, store, weights);
  Inference out;
  out.reps = {pass.user_knowledge.value(), pass.item_knowledge.value(), pass.user_collab.value(),
              pass.item_collab.value()};
  out.edge_stats = std::move(pass.edge_stats);
  return out;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0.0;
  double aa = 0.0;
  double bb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

double predict(const Representations& reps, std::size_t user, std::size_t item) {
  return cosine(reps.user_collab.row(user), reps.item_collab.row(item)) +
         cosine(reps.user_knowledge.row(user), reps.item_knowledge.row(item));
}

std::vector<std::size_t> sample_negatives(std::size_t user, std::size_t count,
                                          const graph::InteractionGraph& train, Rng& rng) {
  const auto positives = train.user_items(user);
  const std::size_t ni = train.num_items();
  if (positives.size() >= ni) {
    throw ConfigError("sample_negatives: user " + std::to_string(user) +
                      " has no unobserved items");
  }
  std::vector<std::size_t> out;
  out.reserve(count);
  while (out.size() < count) {
    const std::size_t candidate = uniform_index(rng, ni);
    if (!std::binary_search(positives.begin(), positives.end(), candidate)) out.push_back(candidate);
  }
  return out;
}

Batch make_batch(std::vector<std::size_t> edges, const graph::InteractionGraph& train,
                 std::size_t negatives_per_positive, std::uint64_t seed) {
  Batch batch;
  batch.negatives_per_positive = negatives_per_positive;
  batch.negatives.reserve(edges.size() * negatives_per_positive);
  Rng rng(seed);
  for (std::size_t e : edges) {
    const auto neg = sample_negatives(train.edge_users()[e], negatives_per_positive, train, rng);
    batch.negatives.insert(batch.negatives.end(), neg.begin(), neg.end());
  }
  batch.edges = std::move(edges);
  return batch;
}

ad::Var loss(const ForwardPass& pass, const graph::InteractionGraph& train, const Batch& batch,
             const denoise::SimilarityBank& bank, double margin) {
  ad::Tape& tape = *pass.user_knowledge.tape();
  if (bank.size() != train.num_edges()) {
    throw ShapeError("loss: similarity bank has " + std::to_string(bank.size()) +
                     " entries for " + std::to_string(train.num_edges()) + " training edges");
  }
  const std::size_t per = batch.negatives_per_positive;
  if (batch.negatives.size() != batch.edges.size() * per) {
    throw ShapeError("loss: negative list does not match the batch");
  }

  auto scores = [&](std::vector<std::size_t> users, std::vector<std::size_t> items) {
    const ad::IndexList u = ad::make_index(std::move(users));
    const ad::IndexList i = ad::make_index(std::move(items));
    return ad::add(ad::cosine(ad::gather(pass.user_collab, u), ad::gather(pass.item_collab, i)),
                   ad::cosine(ad::gather(pass.user_knowledge, u), ad::gather(pass.item_knowledge, i)));
  };

  std::vector<std::size_t> pos_users;
  std::vector<std::size_t> pos_items;
  std::vector<double> keep;
  std::vector<std::size_t> neg_users;
  for (std::size_t k = 0; k < batch.edges.size(); ++k) {
    const std::size_t e = batch.edges[k];
    pos_users.push_back(train.edge_users()[e]);
    pos_items.push_back(train.edge_items()[e]);
    keep.push_back(bank.keep[e] ? 1.0 : 0.0);
    neg_users.insert(neg_users.end(), per, train.edge_users()[e]);
  }

  const ad::Var y_pos = scores(std::move(pos_users), std::move(pos_items));
  ad::Var total = ad::sum(ad::mul(ad::max_with_zero(ad::sub(tape.constant(1.0), y_pos)),
                                  tape.constant(ad::Tensor::vector(std::move(keep)))));
  if (per > 0 && !batch.edges.empty()) {
    const ad::Var y_neg = scores(std::move(neg_users), batch.negatives);
    const ad::Var ramp = ad::sum(ad::max_with_zero(ad::sub(y_neg, tape.constant(margin))));
    total = ad::add(total, ad::mul(ramp, tape.constant(1.0 / static_cast<double>(per))));
  }
  return total;
}

StepReport train_step(ad::ParameterStore& store, const ModelConfig& config,
                      const graph::Graphs& graphs, const denoise::SimilarityBank& bank,
                      const Batch& batch, std::uint64_t mask_seed,
                      const std::optional<refiner::MaskSample>& forced_sample) {
  StepReport report;
  ad::Gradients grads;
  const refiner::MaskBank masks{store.value(names::kMaskLogits).values()};

  if (refines_knowledge(config.variant)) {
    const refiner::MaskSample sample =
        forced_sample ? *forced_sample : refiner::sample_masks(masks, mask_seed);
    {
      ad::Tape tape;
      const ForwardPass pass = forward(tape, config, graphs, store, sample.b);
      const ad::Var l = loss(pass, graphs.interactions, batch, bank, config.margin);
      report.loss_b = l.value()[0];
      check_finite_loss(report.loss_b, "b");
      grads = tape.backward(l);
    }
    {
      ad::Tape tape;
      const ForwardPass pass = forward(tape, config, graphs, store, sample.b_tilde);
      report.loss_btilde = loss(pass, graphs.interactions, batch, bank, config.margin).value()[0];
      check_finite_loss(report.loss_btilde, "b_tilde");
    }
    for (std::size_t i = 0; i < sample.b.size(); ++i) {
      report.differing_masks += sample.b[i] != sample.b_tilde[i];
    }
    grads[names::kMaskLogits] = ad::Tensor::vector(
        refiner::disarm_gradient(report.loss_b, report.loss_btilde, sample, masks));
  } else {
    ad::Tape tape;
    const ForwardPass pass = forward(tape, config, graphs, store, {});
    const ad::Var l = loss(pass, graphs.interactions, batch, bank, config.margin);
    report.loss_b = l.value()[0];
    report.loss_btilde = report.loss_b;
    check_finite_loss(report.loss_b, "b");
    grads = tape.backward(l);
  }

  ad::AdamConfig adam;
  adam.learning_rate = config.learning_rate;
  ad::adam_step(store, grads, adam);
  return report;
}

}  // namespace krdn::model
