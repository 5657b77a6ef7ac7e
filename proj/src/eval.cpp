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

#include "krdn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <thread>

#include "krdn/error.hpp"
#include "krdn/io_format.hpp"

namespace krdn::eval {

const Metrics& RankingResult::at(std::size_t cutoff) const {
  for (const Metrics& m : metrics) {
    if (m.cutoff == cutoff) return m;
  }
  throw ConfigError("no metrics recorded at cutoff " + std::to_string(cutoff));
}

double recall_at(const std::vector<std::size_t>& ranked, const std::vector<std::size_t>& relevant,
                 std::size_t n) {
  if (relevant.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < std::min(n, ranked.size()); ++k) {
    hits += std::binary_search(relevant.begin(), relevant.end(), ranked[k]);
  }
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

double ndcg_at(const std::vector<std::size_t>& ranked, const std::vector<std::size_t>& relevant,
               std::size_t n) {
  if (relevant.empty()) return 0.0;
  double dcg = 0.0;
  for (std::size_t k = 0; k < std::min(n, ranked.size()); ++k) {
    if (std::binary_search(relevant.begin(), relevant.end(), ranked[k])) {
      dcg += 1.0 / std::log2(static_cast<double>(k) + 2.0);
    }
  }
  double idcg = 0.0;
  for (std::size_t k = 0; k < std::min(n, relevant.size()); ++k) {
    idcg += 1.0 / std::log2(static_cast<double>(k) + 2.0);
  }
  return dcg / idcg;
}

std::vector<std::size_t> top_n(const std::vector<double>& scores,
                               const std::vector<std::size_t>& candidates, std::size_t n) {
  std::vector<std::size_t> order = candidates;
  const auto better = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  const std::size_t keep = std::min(n, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                    better);
  order.resize(keep);
  return order;
}

RankingResult full_ranking(const model::Representations& reps,
                           const graph::InteractionGraph& train,
                           const std::vector<data::InteractionRecord>& test,
                           const std::vector<std::size_t>& cutoffs, std::size_t threads) {
  if (cutoffs.empty()) throw ConfigError("full_ranking: at least one cutoff required");
  for (std::size_t n : cutoffs) {
    if (n == 0) throw ConfigError("full_ranking: cutoffs must be positive");
  }
  const std::size_t nu = train.num_users();
  const std::size_t ni = train.num_items();

  std::map<std::size_t, std::vector<std::size_t>> relevant;
  for (const auto& r : test) {
    if (r.user >= nu || r.item >= ni) {
      throw BoundsError("full_ranking: test pair (" + std::to_string(r.user) + ", " +
                        std::to_string(r.item) + ") outside the training index");
    }
    relevant[r.user].push_back(r.item);
  }
  for (auto& [u, items] : relevant) {
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
  }

  RankingResult result;
  result.user_count = relevant.size();
  result.users.resize(relevant.size());
  std::vector<const std::vector<std::size_t>*> rel_of;
  {
    std::size_t k = 0;
    for (const auto& [u, items] : relevant) {
      result.users[k++].user = u;
      rel_of.push_back(&items);
    }
  }
  const std::size_t max_n = *std::max_element(cutoffs.begin(), cutoffs.end());

  const auto score_user = [&](std::size_t k) {
    UserRanking& ur = result.users[k];
    const auto seen = train.user_items(ur.user);
    std::vector<double> scores(ni, 0.0);
    std::vector<std::size_t> candidates;
    candidates.reserve(ni - seen.size());
    for (std::size_t i = 0; i < ni; ++i) {
      if (std::binary_search(seen.begin(), seen.end(), i)) continue;
      scores[i] = model::predict(reps, ur.user, i);
      candidates.push_back(i);
    }
    ur.top = top_n(scores, candidates, max_n);
    for (std::size_t n : cutoffs) {
      ur.recall.push_back(recall_at(ur.top, *rel_of[k], n));
      ur.ndcg.push_back(ndcg_at(ur.top, *rel_of[k], n));
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, result.users.size()));
  if (workers <= 1) {
    for (std::size_t k = 0; k < result.users.size(); ++k) score_user(k);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t k = w; k < result.users.size(); k += workers) score_user(k);
      });
    }
    for (auto& t : pool) t.join();
  }

  // Accumulated in user order so the mean does not depend on the worker count.
  for (std::size_t c = 0; c < cutoffs.size(); ++c) {
    Metrics m;
    m.cutoff = cutoffs[c];
    for (const UserRanking& ur : result.users) {
      m.recall += ur.recall[c];
      m.ndcg += ur.ndcg[c];
    }
    if (result.user_count > 0) {
      m.recall /= static_cast<double>(result.user_count);
      m.ndcg /= static_cast<double>(result.user_count);
    }
    result.metrics.push_back(m);
  }
  return result;
}

void write_metrics_csv(std::ostream& out, const RankingResult& result) {
  out << "user_count";
  for (const Metrics& m : result.metrics) out << ",Recall@" << m.cutoff;
  for (const Metrics& m : result.metrics) out << ",NDCG@" << m.cutoff;
  out << '\n' << result.user_count;
  for (const Metrics& m : result.metrics) out << ',' << format_double(m.recall);
  for (const Metrics& m : result.metrics) out << ',' << format_double(m.ndcg);
  out << '\n';
}

namespace {

void mean_std(const std::vector<double>& xs, double& mean, double& sd) {
  mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  sd = 0.0;
  if (xs.size() < 2) return;
  for (double x : xs) sd += (x - mean) * (x - mean);
  sd = std::sqrt(sd / static_cast<double>(xs.size() - 1));
}

}  // namespace

SweepResult robustness_sweep(const Pipeline& pipeline, const std::vector<double>& ratios,
                             const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw ConfigError("robustness_sweep: at least one seed required");
  for (double r : ratios) {
    if (!(r >= 0.0 && r <= 1.0)) {
      throw ConfigError("robustness_sweep: noise ratio " + format_double(r) + " outside [0, 1]");
    }
  }
  SweepResult out;
  for (double ratio : ratios) {
    std::vector<double> recalls;
    std::vector<double> ndcgs;
    for (std::uint64_t seed : seeds) {
      const Metrics m = pipeline(ratio, seed);
      out.rows.push_back({ratio, seed, m});
      recalls.push_back(m.recall);
      ndcgs.push_back(m.ndcg);
    }
    SweepSummary s;
    s.ratio = ratio;
    s.runs = seeds.size();
    mean_std(recalls, s.recall_mean, s.recall_std);
    mean_std(ndcgs, s.ndcg_mean, s.ndcg_std);
    out.summary.push_back(s);
  }
  return out;
}

double relative_degradation(double base, double noisy) {
  if (base == 0.0) return 0.0;
  return (base - noisy) / base;
}

void write_sweep_csv(std::ostream& out, const SweepResult& result) {
  out << "ratio,seed,cutoff,recall,ndcg\n";
  for (const SweepRow& r : result.rows) {
    out << format_double(r.ratio) << ',' << r.seed << ',' << r.metrics.cutoff << ','
        << format_double(r.metrics.recall) << ',' << format_double(r.metrics.ndcg) << '\n';
  }
}

void write_sweep_summary_csv(std::ostream& out, const SweepResult& result) {
  out << "ratio,runs,recall_mean,recall_std,ndcg_mean,ndcg_std\n";
  for (const SweepSummary& s : result.summary) {
    out << format_double(s.ratio) << ',' << s.runs << ',' << format_double(s.recall_mean) << ','
        << format_double(s.recall_std) << ',' << format_double(s.ndcg_mean) << ','
        << format_double(s.ndcg_std) << '\n';
  }
}

}  // namespace krdn::eval
