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
#include <functional>
#include <iosfwd>
#include <vector>

#include "krdn/data.hpp"
#include "krdn/graph.hpp"
#include "krdn/model.hpp"

namespace krdn::eval {

/// Recall and NDCG at one cutoff, averaged over evaluated users.
struct Metrics {
  std::size_t cutoff = 20;
  double recall = 0.0;
  double ndcg = 0.0;
  friend bool operator==(const Metrics&, const Metrics&) = default;
};

struct UserRanking {
  std::size_t user = 0;
  /// Top max-cutoff items, best first; never contains a train item.
  std::vector<std::size_t> top;
  /// Per-cutoff values, aligned with RankingResult::metrics.
  std::vector<double> recall;
  std::vector<double> ndcg;
};

struct RankingResult {
  /// Users with at least one test item.
  std::size_t user_count = 0;
  /// One entry per requested cutoff, in request order.
  std::vector<Metrics> metrics;
  /// Evaluated users in ascending id order.
  std::vector<UserRanking> users;

  const Metrics& at(std::size_t cutoff) const;
};

/// |top_N ∩ relevant| / |relevant|. `relevant` must be sorted.
double recall_at(const std::vector<std::size_t>& ranked, const std::vector<std::size_t>& relevant,
                 std::size_t n);

/// DCG over hit ranks k (1-based) of 1/log2(k+1), divided by the DCG of
/// min(|relevant|, n) hits at the top. `relevant` must be sorted.
double ndcg_at(const std::vector<std::size_t>& ranked, const std::vector<std::size_t>& relevant,
               std::size_t n);

/// The n best items by score among `candidates`, ties by ascending item id.
std::vector<std::size_t> top_n(const std::vector<double>& scores,
                               const std::vector<std::size_t>& candidates, std::size_t n);

/**
 * All-ranking evaluation. Every user with a test item scores every item it
 * has no train edge to, and metrics are averaged over those users. Users
 * are scored on `threads` workers; the result does not depend on the count.
 */
RankingResult full_ranking(const model::Representations& reps,
                           const graph::InteractionGraph& train,
                           const std::vector<data::InteractionRecord>& test,
                           const std::vector<std::size_t>& cutoffs = {20},
                           std::size_t threads = 1);

/// Header `user_count,Recall@N...,NDCG@N...` and one data row.
void write_metrics_csv(std::ostream& out, const RankingResult& result);

struct SweepRow {
  double ratio = 0.0;
  std::uint64_t seed = 0;
  Metrics metrics;
};

struct SweepSummary {
  double ratio = 0.0;
  std::size_t runs = 0;
  double recall_mean = 0.0;
  double recall_std = 0.0;
  double ndcg_mean = 0.0;
  double ndcg_std = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<SweepSummary> summary;
};

/// Trains and evaluates one run at a noise ratio and seed.
using Pipeline = std::function<Metrics(double ratio, std::uint64_t seed)>;

/// Runs `pipeline` for every (ratio, seed) pair, ratio-major. Standard
/// deviations are sample deviations (0 for a single seed).
SweepResult robustness_sweep(const Pipeline& pipeline, const std::vector<double>& ratios,
                             const std::vector<std::uint64_t>& seeds);

/// Relative drop (base - noisy) / base; 0 when base is 0.
double relative_degradation(double base, double noisy);

/// One `ratio,seed,cutoff,recall,ndcg` row per run.
void write_sweep_csv(std::ostream& out, const SweepResult& result);
void write_sweep_summary_csv(std::ostream& out, const SweepResult& result);

}  // namespace krdn::eval
