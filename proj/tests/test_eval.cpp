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
#include <sstream>
#include <vector>

#include "krdn/error.hpp"
#include "krdn/eval.hpp"
#include "krdn/rng.hpp"
#include "support.hpp"

using namespace krdn;
using namespace krdn::eval;
using krdn::ad::Tensor;

namespace {

struct Instance {
  model::Representations reps;
  std::vector<data::InteractionRecord> train;
  std::vector<data::InteractionRecord> test;
  std::size_t users = 0;
  std::size_t items = 0;
};

Tensor random_rows(std::size_t rows, std::size_t d, Rng& rng, bool coarse) {
  Tensor t({rows, d});
  // coarse values produce exact score ties
  for (double& v : t.values()) v = coarse ? static_cast<double>(uniform_index(rng, 3)) - 1.0 : 2.0 * uniform_open(rng) - 1.0;
  return t;
}

Instance random_instance(std::uint64_t seed, bool coarse = false) {
  Rng rng(seed);
  Instance in;
  in.users = 5 + uniform_index(rng, 46);
  in.items = 30 + uniform_index(rng, 40);
  const std::size_t d = 2 + uniform_index(rng, 4);
  in.reps = {random_rows(in.users, d, rng, coarse), random_rows(in.items, d, rng, coarse),
             random_rows(in.users, d, rng, coarse), random_rows(in.items, d, rng, coarse)};
  for (std::size_t u = 0; u < in.users; ++u) {
    for (std::size_t i = 0; i < in.items; ++i) {
      const double r = uniform_open(rng);
      if (r < 0.15) in.train.push_back({u, i});
      else if (r < 0.25 && u % 7 != 3) in.test.push_back({u, i});
    }
  }
  return in;
}

}  // namespace

TEST_CASE("metric closed forms") {
  CHECK(ndcg_at({5, 3, 7}, {7}, 3) == doctest::Approx(1.0 / std::log2(4.0)));
  CHECK(recall_at({5, 3, 7}, {7}, 3) == 1.0);
  CHECK(recall_at({5, 3, 7}, {7}, 2) == 0.0);
  CHECK(ndcg_at({3, 1, 7}, {3, 7}, 3) == doctest::Approx(1.5 / (1.0 + 1.0 / std::log2(3.0))));
  CHECK(ndcg_at({3, 1, 7}, {3, 7}, 1) == 1.0);
  CHECK(recall_at({3, 1, 7}, {3, 7, 9, 11}, 3) == 0.5);
  CHECK(ndcg_at({1, 2}, {3}, 2) == 0.0);
}

TEST_CASE("ties rank by ascending item id") {
  const std::vector<double> scores{0.5, 0.9, 0.5, 0.9, 0.1};
  CHECK(top_n(scores, {0, 1, 2, 3, 4}, 3) == std::vector<std::size_t>{1, 3, 0});
  CHECK(top_n(scores, {4, 2, 0}, 2) == std::vector<std::size_t>{0, 2});
  CHECK(top_n(scores, {4}, 3) == std::vector<std::size_t>{4});
}

TEST_CASE("full ranking agrees with brute force") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const Instance in = random_instance(seed, seed % 2 == 0);
    const auto g = graph::InteractionGraph::build(in.train, in.users, in.items);
    const RankingResult got = full_ranking(in.reps, g, in.test, {5, 20});
    for (std::size_t n : {5u, 20u}) {
      const oracle::RankingOutputs want = oracle::ranking_metrics(
          support::to_mat(in.reps.user_collab), support::to_mat(in.reps.item_collab),
          support::to_mat(in.reps.user_knowledge), support::to_mat(in.reps.item_knowledge), in.train,
          in.test, n);
      INFO("seed " << seed << " n " << n);
      CHECK(got.user_count == want.user_count);
      CHECK(got.at(n).recall == doctest::Approx(want.recall).epsilon(1e-12));
      CHECK(got.at(n).ndcg == doctest::Approx(want.ndcg).epsilon(1e-12));
    }
  }
}

TEST_CASE("train items never appear in the ranking") {
  const Instance in = random_instance(21);
  const auto g = graph::InteractionGraph::build(in.train, in.users, in.items);
  const RankingResult r = full_ranking(in.reps, g, in.test, {20});
  CHECK(!r.users.empty());
  for (const auto& u : r.users) {
    CHECK(u.top.size() <= 20);
    for (std::size_t i : u.top) CHECK(!g.has_edge(u.user, i));
  }
}

TEST_CASE("results do not depend on the thread count") {
  const Instance in = random_instance(33);
  const auto g = graph::InteractionGraph::build(in.train, in.users, in.items);
  const RankingResult one = full_ranking(in.reps, g, in.test, {10, 20}, 1);
  for (std::size_t threads : {2u, 3u, 8u}) {
    const RankingResult many = full_ranking(in.reps, g, in.test, {10, 20}, threads);
    CHECK(many.metrics == one.metrics);
    REQUIRE(many.users.size() == one.users.size());
    for (std::size_t k = 0; k < one.users.size(); ++k) CHECK(many.users[k].top == one.users[k].top);
  }
}

TEST_CASE("recall does not fall as the cutoff grows") {
  const Instance in = random_instance(44);
  const auto g = graph::InteractionGraph::build(in.train, in.users, in.items);
  const RankingResult r = full_ranking(in.reps, g, in.test, {1, 5, 10, 20, 50});
  for (std::size_t k = 1; k < r.metrics.size(); ++k) CHECK(r.metrics[k].recall >= r.metrics[k - 1].recall);
  CHECK_THROWS_AS(r.at(7), ConfigError);

  std::ostringstream csv;
  write_metrics_csv(csv, r);
  CHECK(csv.str().rfind("user_count,Recall@1,Recall@5,Recall@10,Recall@20,Recall@50,NDCG@1,", 0) == 0);
}

TEST_CASE("sweep runs ratio-major with sample deviations") {
  std::vector<std::pair<double, std::uint64_t>> calls;
  const Pipeline p = [&](double ratio, std::uint64_t seed) {
    calls.push_back({ratio, seed});
    return Metrics{20, ratio + 0.1 * static_cast<double>(seed), 0.5};
  };
  const SweepResult r = robustness_sweep(p, {0.0, 0.5}, {1, 3});
  REQUIRE(calls.size() == 4);
  CHECK(calls[1] == std::pair<double, std::uint64_t>{0.0, 3});
  CHECK(calls[2] == std::pair<double, std::uint64_t>{0.5, 1});
  REQUIRE(r.summary.size() == 2);
  CHECK(r.summary[1].recall_mean == doctest::Approx(0.7));
  CHECK(r.summary[1].recall_std == doctest::Approx(std::sqrt(0.02)));
  CHECK(r.summary[1].ndcg_std == 0.0);
  CHECK(robustness_sweep(p, {0.2}, {4}).summary[0].recall_std == 0.0);
  CHECK_THROWS_AS(robustness_sweep(p, {1.5}, {1}), ConfigError);
  CHECK(relative_degradation(0.5, 0.4) == doctest::Approx(0.2));
  CHECK(relative_degradation(0.0, 0.4) == 0.0);

  std::ostringstream rows;
  write_sweep_csv(rows, r);
  CHECK(rows.str().rfind("ratio,seed,cutoff,recall,ndcg\n", 0) == 0);
}
