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

#include <algorithm>
#include <cmath>
#include <span>
#include <sstream>
#include <vector>

#include "krdn/denoiser.hpp"
#include "krdn/error.hpp"
#include "krdn/gradcheck.hpp"
#include "krdn/graph.hpp"
#include "krdn/parameters.hpp"
#include "krdn/rng.hpp"

using namespace krdn;
using namespace krdn::denoise;
using krdn::ad::Tensor;

namespace {

Tensor random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t({rows, cols});
  for (double& v : t.values()) v = 2.0 * uniform_open(rng) - 1.0;
  return t;
}

// 3 users over 4 items; user 2 has a single item.
graph::InteractionGraph small_graph() {
  return graph::InteractionGraph::build({{0, 0}, {0, 1}, {0, 3}, {1, 1}, {1, 2}, {2, 3}}, 3, 4);
}

double dotv(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

}  // namespace

TEST_CASE("segment softmax matches a per-segment hand softmax") {
  ad::Tape tape;
  const std::vector<double> x{1.0, 2.0, -1.0, 0.5, 700.0, 699.0};
  const auto seg = ad::make_index({0, 0, 0, 2, 3, 3});
  const Tensor p = segment_softmax(tape.constant(Tensor::vector(x)), seg, 4).value();
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(-1.0);
  CHECK(p[0] == doctest::Approx(std::exp(1.0) / z).epsilon(1e-14));
  CHECK(p[2] == doctest::Approx(std::exp(-1.0) / z).epsilon(1e-14));
  CHECK(p[3] == 1.0);
  CHECK(p[4] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-14));
  CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0));
  CHECK(p[4] + p[5] == doctest::Approx(1.0));
}

TEST_CASE("segment softmax gradient matches central differences") {
  const std::vector<double> x0{0.3, -0.2, 0.9, 0.1, -0.5};
  const std::vector<double> w{0.7, -1.1, 0.4, 2.0, -0.3};
  const auto seg = ad::make_index({0, 0, 1, 1, 1});
  const auto value = [&](const std::vector<double>& x, ad::Gradients* g) {
    ad::Tape tape;
    const auto xv = tape.parameter("x", Tensor::vector(x));
    const auto l = ad::sum(ad::mul(segment_softmax(xv, seg, 2), tape.constant(Tensor::vector(w))));
    if (g != nullptr) *g = tape.backward(l);
    return l.value()[0];
  };
  ad::Gradients g;
  value(x0, &g);
  std::vector<double> numeric;
  for (std::size_t k = 0; k < x0.size(); ++k) {
    auto up = x0;
    auto down = x0;
    up[k] += 1e-6;
    down[k] -= 1e-6;
    numeric.push_back((value(up, nullptr) - value(down, nullptr)) / 2e-6);
  }
  CHECK(gradcheck::relative_error(g.at("x").values(), numeric) < 1e-7);
}

TEST_CASE("similarities match their definitions") {
  const auto ig = small_graph();
  const auto kg = graph::KnowledgeGraph::build({{0, 0, 5}, {0, 1, 4}, {1, 1, 5}, {4, 0, 5}}, 6, 2, 4);
  const EdgeIndex edges = EdgeIndex::from(ig);
  const Tensor users = random_matrix(3, 3, 1);
  const Tensor items = random_matrix(4, 3, 2);
  const Tensor rels = random_matrix(2, 3, 3);
  ad::Tape tape;
  const auto u = tape.constant(users);
  const auto i = tape.constant(items);
  const auto rm = relation_means(tape, tape.constant(rels), kg);
  // item 0 has relations {0, 1}, item 1 has {1}, items 2 and 3 none
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(rm.value().at(0, c) == doctest::Approx(0.5 * (rels.at(0, c) + rels.at(1, c))));
    CHECK(rm.value().at(1, c) == rels.at(1, c));
    CHECK(rm.value().at(2, c) == 0.0);
  }

  const Tensor pc = collab_similarity(u, i, edges).value();
  const Tensor pk = knowledge_similarity(u, i, rm, edges).value();
  // user 0 holds edges 0..2 over items 0, 1, 3
  const std::vector<std::size_t> its{0, 1, 3};
  std::vector<double> lc;
  std::vector<double> lk;
  for (std::size_t item : its) {
    lc.push_back(dotv(users.row(0), items.row(item)));
    // mean over R(i) of <e_r * e_u, e_i>, computed per relation
    double s = 0.0;
    const auto rs = kg.item_relations(item);
    for (std::size_t r : rs) {
      for (std::size_t c = 0; c < 3; ++c) s += rels.at(r, c) * users.at(0, c) * items.at(item, c);
    }
    lk.push_back(rs.empty() ? 0.0 : s / static_cast<double>(rs.size()));
  }
  const auto soft = [](const std::vector<double>& l, std::size_t k) {
    double z = 0.0;
    for (double v : l) z += std::exp(v);
    return std::exp(l[k]) / z;
  };
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(pc[k] == doctest::Approx(soft(lc, k)).epsilon(1e-12));
    CHECK(pk[k] == doctest::Approx(soft(lk, k)).epsilon(1e-12));
  }
  CHECK(pc[5] == 1.0);
  CHECK(pk[5] == 1.0);
}

TEST_CASE("pruning is strict and gamma zero prunes everything") {
  CHECK(divergence(0.0, 0.0) == 0.0);
  CHECK(!prune_indicator(0.0, 0.0, 0.0));
  CHECK(prune_indicator(0.0, 0.0, 1e-12));
  const double d = divergence(0.2, 0.6);
  CHECK(d == doctest::Approx(1.0 / (1.0 + std::exp(-0.6)) - 1.0 / (1.0 + std::exp(-0.2))));
  CHECK(!prune_indicator(0.2, 0.6, d));
  CHECK(prune_indicator(0.2, 0.6, std::nextafter(d, 1.0)));

  const auto ig = small_graph();
  const auto kg = graph::KnowledgeGraph::build({{0, 0, 1}}, 4, 1, 4);
  ad::Tape tape;
  const auto rm = relation_means(tape, tape.constant(random_matrix(1, 3, 4)), kg);
  const auto u = tape.constant(random_matrix(3, 3, 5));
  const auto it = tape.constant(random_matrix(4, 3, 6));
  const auto out = self_enhance(tape, u, u, it, it, rm, EdgeIndex::from(ig), {0.0, 2, true});
  CHECK(make_bank(out.last_round, {0.0, 2, true}).pruned() == ig.num_edges());
}

TEST_CASE("identical views with unit relations keep every edge") {
  const auto ig = small_graph();
  const auto kg = graph::KnowledgeGraph::build({{0, 0, 4}, {1, 0, 4}, {2, 0, 4}, {3, 0, 4}}, 5, 1, 4);
  ad::Tape tape;
  const auto rm = relation_means(tape, tape.constant(Tensor({1, 3}, 1.0)), kg);
  const auto u = tape.constant(random_matrix(3, 3, 7));
  const auto it = tape.constant(random_matrix(4, 3, 8));
  const auto out = self_enhance(tape, u, u, it, it, rm, EdgeIndex::from(ig), {1e-9, 3, true});
  CHECK(out.knowledge.value() == out.collaborative.value());
  for (std::size_t e = 0; e < ig.num_edges(); ++e) {
    CHECK(out.last_round.p_collab[e] == out.last_round.p_know[e]);
    CHECK(out.last_round.keep[e] == 1.0);
  }
}

TEST_CASE("enhanced users have unit norm and kept count grows with gamma") {
  const auto ig = small_graph();
  const auto kg = graph::KnowledgeGraph::build({{0, 0, 4}, {1, 1, 4}, {3, 0, 1}}, 5, 2, 4);
  ad::Tape tape;
  const auto rm = relation_means(tape, tape.constant(random_matrix(2, 4, 9)), kg);
  const auto uk = tape.constant(random_matrix(3, 4, 10));
  const auto uc = tape.constant(random_matrix(3, 4, 11));
  const auto ik = tape.constant(random_matrix(4, 4, 12));
  const auto ic = tape.constant(random_matrix(4, 4, 13));
  const auto edges = EdgeIndex::from(ig);
  const auto first = self_enhance(tape, uk, uc, ik, ic, rm, edges, {0.5, 3, true});
  for (const auto* t : {&first.knowledge.value(), &first.collaborative.value()}) {
    for (std::size_t r = 0; r < 3; ++r) CHECK(dotv(t->row(r), t->row(r)) == doctest::Approx(1.0));
  }
  std::size_t previous = 0;
  for (double gamma : {0.0, 0.01, 0.03, 0.05, 0.1, 0.2, 0.5}) {
    const auto out = self_enhance(tape, uk, uc, ik, ic, rm, edges, {gamma, 1, true});
    const std::size_t kept = ig.num_edges() - make_bank(out.last_round, {gamma, 1, true}).pruned();
    CHECK(kept >= previous);
    previous = kept;
  }
  CHECK(previous == ig.num_edges());
  CHECK_THROWS_AS(self_enhance(tape, uk, uc, ik, ic, rm, edges, {0.5, 0, true}), ConfigError);
}

TEST_CASE("without hard pruning one round runs and the bank keeps all") {
  const auto ig = small_graph();
  const auto kg = graph::KnowledgeGraph::build({{0, 0, 4}}, 5, 1, 4);
  ad::Tape tape;
  const auto rm = relation_means(tape, tape.constant(random_matrix(1, 3, 14)), kg);
  const auto uk = tape.constant(random_matrix(3, 3, 15));
  const auto uc = tape.constant(random_matrix(3, 3, 16));
  const auto ik = tape.constant(random_matrix(4, 3, 17));
  const auto ic = tape.constant(random_matrix(4, 3, 18));
  const auto edges = EdgeIndex::from(ig);
  const auto off = self_enhance(tape, uk, uc, ik, ic, rm, edges, {0.0, 5, false});
  const auto one = self_enhance(tape, uk, uc, ik, ic, rm, edges, {1.0, 1, true});
  CHECK(off.collaborative.value() == one.collaborative.value());
  CHECK(make_bank(off.last_round, {0.0, 5, false}) == SimilarityBank::all_kept(ig.num_edges()));

  std::ostringstream tsv;
  write_edge_divergence(tsv, ig, off.last_round);
  const std::string s = tsv.str();
  CHECK(s.rfind("u\ti\tp_collab\tp_know\tdivergence\tbit\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == static_cast<long>(ig.num_edges() + 1));
}
