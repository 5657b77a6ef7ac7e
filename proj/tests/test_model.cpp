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


#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "krdn/error.hpp"
#include "krdn/gradcheck.hpp"
#include "krdn/model.hpp"
#include "support.hpp"

using namespace krdn;
using namespace krdn::model;
using krdn::ad::Tensor;

namespace {

const Variant kVariants[] = {Variant::Full, Variant::NoAKR, Variant::NoCDL, Variant::NoAKRCDL};

}  // namespace

TEST_CASE("variant names and switches") {
  for (Variant v : kVariants) CHECK(parse_variant(variant_name(v)) == v);
  CHECK(variant_name(Variant::NoAKRCDL) == "no_AKR_CDL");
  CHECK_THROWS_AS(parse_variant("none"), ConfigError);
  CHECK(refines_knowledge(Variant::NoCDL));
  CHECK(!refines_knowledge(Variant::NoAKR));
  CHECK(denoises_interactions(Variant::NoAKR));
  CHECK(!denoises_interactions(Variant::NoCDL));
  ModelConfig c;
  CHECK_NOTHROW(c.validate());
  c.embed_dim = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("forward pass matches the straight-line oracle for every variant") {
  for (std::uint64_t seed : {1u, 2u}) {
    for (Variant v : kVariants) {
      const gradcheck::Toy toy = gradcheck::make_toy(seed, v);
      ad::Tape tape;
      const ForwardPass pass = forward(tape, toy.config, toy.graphs, toy.store, toy.triplet_weights);
      const oracle::Outputs want =
          oracle::evaluate(support::oracle_inputs(toy.config, toy.graphs, toy.store, toy.triplet_weights));
      INFO("variant " << variant_name(v) << " seed " << seed);
      CHECK(want.min_threshold_margin > 1e-8);
      CHECK(support::max_abs_diff(pass.user_knowledge.value(), want.user_knowledge) < 1e-10);
      CHECK(support::max_abs_diff(pass.item_knowledge.value(), want.item_knowledge) < 1e-10);
      CHECK(support::max_abs_diff(pass.user_collab.value(), want.user_collab) < 1e-10);
      CHECK(support::max_abs_diff(pass.item_collab.value(), want.item_collab) < 1e-10);
    }
  }
}

TEST_CASE("loss on a hand example") {
  const auto train = graph::InteractionGraph::build({{0, 0}}, 1, 3);
  ad::Tape tape;
  ForwardPass pass;
  pass.user_collab = tape.constant(Tensor::matrix(1, 2, {1, 0}));
  pass.item_collab = tape.constant(Tensor::matrix(3, 2, {0, 1, 0, 1, 1, 1}));
  pass.user_knowledge = tape.constant(Tensor::matrix(1, 2, {0, 1}));
  pass.item_knowledge = tape.constant(Tensor::matrix(3, 2, {1, 1, 0, 1, -1, 0}));
  Batch batch{{0}, {1, 2}, 2};
  const double s = 1.0 / std::sqrt(2.0);
  // y = (s, 1, s) for items 0, 1, 2
  const double kept = loss(pass, train, batch, denoise::SimilarityBank::all_kept(1), 0.6).value()[0];
  CHECK(kept == doctest::Approx((1 - s) + (0.4 + (s - 0.6)) / 2).epsilon(1e-14));
  const double pruned = loss(pass, train, batch, {{0}}, 0.6).value()[0];
  CHECK(pruned == doctest::Approx((0.4 + (s - 0.6)) / 2).epsilon(1e-14));
  CHECK_THROWS_AS(loss(pass, train, batch, denoise::SimilarityBank::all_kept(2), 0.6), ShapeError);
  batch.negatives.pop_back();
  CHECK_THROWS_AS(loss(pass, train, batch, denoise::SimilarityBank::all_kept(1), 0.6), ShapeError);
}

TEST_CASE("scores are bounded and invariant to row scaling") {
  const gradcheck::Toy toy = gradcheck::make_toy(3);
  Inference inf = infer(toy.config, toy.graphs, toy.store);
  std::vector<double> before;
  for (std::size_t i = 0; i < 8; ++i) {
    const double y = predict(inf.reps, 0, i);
    CHECK(y >= -2.0);
    CHECK(y <= 2.0);
    before.push_back(y);
  }
  for (double& v : inf.reps.user_collab.row(0)) v *= 7.5;
  for (double& v : inf.reps.user_knowledge.row(0)) v *= 0.01;
  for (std::size_t i = 0; i < 8; ++i) CHECK(predict(inf.reps, 0, i) == doctest::Approx(before[i]).epsilon(1e-12));
  const std::vector<double> zero{0, 0};
  const std::vector<double> one{1, 0};
  CHECK(cosine(zero, one) == 0.0);
}

TEST_CASE("negatives avoid training items") {
  const auto g = graph::InteractionGraph::build({{0, 0}, {0, 2}, {0, 3}, {1, 0}, {1, 1}}, 2, 5);
  Rng rng(5);
  std::set<std::size_t> seen;
  for (std::size_t n : sample_negatives(0, 500, g, rng)) {
    CHECK((n == 1 || n == 4));
    seen.insert(n);
  }
  CHECK(seen.size() == 2);
  const auto full = graph::InteractionGraph::build({{0, 0}, {0, 1}}, 1, 2);
  CHECK_THROWS_AS(sample_negatives(0, 1, full, rng), ConfigError);
  const Batch b = make_batch({0, 3}, g, 4, 9);
  CHECK(b.negatives.size() == 8);
  CHECK(make_batch({0, 3}, g, 4, 9).negatives == b.negatives);
}

TEST_CASE("identical antithetic masks leave the logits untouched") {
  gradcheck::Toy toy = gradcheck::make_toy(4);
  const auto alpha = toy.store.value(names::kMaskLogits);
  refiner::MaskSample forced;
  forced.u.assign(alpha.size(), 0.5);
  forced.b = toy.triplet_weights;
  forced.b_tilde = toy.triplet_weights;
  const StepReport r = train_step(toy.store, toy.config, toy.graphs, toy.bank, toy.batch, 0, forced);
  CHECK(r.loss_b == r.loss_btilde);
  CHECK(r.differing_masks == 0);
  CHECK(toy.store.value(names::kMaskLogits) == alpha);
  CHECK(toy.store.step() == 1);
}

TEST_CASE("model gradients match central differences for every variant") {
  for (Variant v : kVariants) {
    const gradcheck::Toy toy = gradcheck::make_toy(1, v);
    for (const auto& r : gradcheck::check_model(toy)) {
      INFO(variant_name(v) << " " << r.name << " rel " << r.rel_error);
      CHECK(r.passed);
    }
  }
}

TEST_CASE("a broken primitive is caught by the model check") {
  const gradcheck::Toy toy = gradcheck::make_toy(1);
  bool any_failed = false;
  for (const auto& r : gradcheck::check_model(toy, ad::Op::Cosine)) any_failed = any_failed || !r.passed;
  CHECK(any_failed);
}

TEST_CASE("ablations reduce to the full model in their limits") {
  const gradcheck::Toy toy = gradcheck::make_toy(2, Variant::NoAKR);
  const std::vector<double> zeros(toy.triplet_weights.size(), 0.0);
  ad::Tape tape;
  const ForwardPass a = forward(tape, toy.config, toy.graphs, toy.store, toy.triplet_weights);
  const ForwardPass b = forward(tape, toy.config, toy.graphs, toy.store, zeros);
  CHECK(a.item_knowledge.value() == b.item_knowledge.value());
  CHECK(inference_weights(toy.config, toy.store) == std::vector<double>(zeros.size(), 1.0));

  // no denoising equals the full model with one round and a threshold nothing reaches
  ModelConfig full = toy.config;
  full.variant = Variant::Full;
  full.gamma = 10.0;
  full.n_iterations = 1;
  ModelConfig nocdl = full;
  nocdl.variant = Variant::NoCDL;
  nocdl.n_iterations = 3;
  const ForwardPass f = forward(tape, full, toy.graphs, toy.store, toy.triplet_weights);
  const ForwardPass n = forward(tape, nocdl, toy.graphs, toy.store, toy.triplet_weights);
  CHECK(f.user_collab.value() == n.user_collab.value());
  CHECK(f.item_collab.value() == n.item_collab.value());
  CHECK(f.user_knowledge.value() == n.user_knowledge.value());
}

TEST_CASE("repeated steps reduce the toy loss") {
  gradcheck::Toy toy = gradcheck::make_toy(5, Variant::NoCDL);
  toy.config.learning_rate = 0.01;
  const double start = gradcheck::toy_loss(toy, toy.store);
  for (std::uint64_t step = 0; step < 40; ++step) {
    train_step(toy.store, toy.config, toy.graphs, toy.bank, toy.batch, step);
  }
  CHECK(gradcheck::toy_loss(toy, toy.store) < 0.9 * start);
}

TEST_CASE("initial parameters have the documented shapes") {
  const gradcheck::Toy toy = gradcheck::make_toy(1);
  CHECK(toy.store.value(names::kEntity).shape() == Tensor::Shape{12, 8});
  CHECK(toy.store.value(names::kRelation).shape() == Tensor::Shape{3, 8});
  CHECK(toy.store.value(names::kUserCollab).shape() == Tensor::Shape{6, 8});
  CHECK(toy.store.value(names::kMaskLogits).size() == toy.graphs.kg.num_triplets());
  const ad::ParameterStore again = init_parameters(toy.config, toy.graphs, 17);
  CHECK(init_parameters(toy.config, toy.graphs, 17) == again);
  for (double a : again.value(names::kMaskLogits).values()) CHECK(a == toy.config.mask_logit_init);
}
