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

// Straight-line reference evaluations of the two-view forward pass and of
// the ranking metrics, written from their definitions with plain loops and
// no tape. Shared by the unit tests and the acceptance suite.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <set>
#include <utility>
#include <vector>

#include "krdn/data.hpp"

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

struct Inputs {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::size_t num_entities = 0;
  std::vector<krdn::data::InteractionRecord> interactions;  // distinct pairs
  std::vector<krdn::data::TripletRecord> triplets;          // distinct triplets
  std::vector<double> triplet_weights;
  Mat user_knowledge, user_collab, item_collab, entity, relation, w1, w2;
  std::size_t layers = 1;
  std::size_t rounds = 1;
  double gamma = 0.2;
  bool hard_pruning = true;
  bool compositional = true;
};

struct Outputs {
  Mat user_knowledge, item_knowledge, user_collab, item_collab;
  /// Smallest |divergence - gamma| seen over all rounds and layers.
  double min_threshold_margin = std::numeric_limits<double>::infinity();
};

inline double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double dotp(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline Vec mat_vec(const Mat& w, const Vec& x) {
  Vec y(w.size(), 0.0);
  for (std::size_t r = 0; r < w.size(); ++r) y[r] = dotp(w[r], x);
  return y;
}

inline Vec normalized(Vec v) {
  const double n = std::sqrt(dotp(v, v));
  if (n == 0.0) return Vec(v.size(), 0.0);
  for (double& x : v) x /= n;
  return v;
}

inline Mat zeros(std::size_t rows, std::size_t d) { return Mat(rows, Vec(d, 0.0)); }

inline Mat add(Mat a, const Mat& b) {
  for (std::size_t r = 0; r < a.size(); ++r) {
    for (std::size_t k = 0; k < a[r].size(); ++k) a[r][k] += b[r][k];
  }
  return a;
}

inline Outputs evaluate(const Inputs& in) {
  const std::size_t d = in.entity[0].size();
  const std::size_t nI = in.num_items;

  // Neighbor lists: each triplet links head->tail and, unless a self loop,
  // tail->head with the same relation, weight and facet.
  struct Nb {
    std::size_t tail, relation, triplet;
  };
  std::vector<std::vector<Nb>> nbrs(in.num_entities);
  for (std::size_t k = 0; k < in.triplets.size(); ++k) {
    const auto& t = in.triplets[k];
    nbrs[t.head].push_back({t.tail, t.relation, k});
    if (t.head != t.tail) nbrs[t.tail].push_back({t.head, t.relation, k});
  }
  const auto one_item = [&](std::size_t k) {
    const auto& t = in.triplets[k];
    return (t.head < nI) != (t.tail < nI);
  };

  std::vector<Mat> layers{in.entity};
  for (std::size_t l = 1; l <= in.layers; ++l) {
    const Mat& prev = layers.back();
    Mat next = zeros(in.num_entities, d);
    for (std::size_t h = 0; h < in.num_entities; ++h) {
      if (nbrs[h].empty()) continue;
      for (const Nb& nb : nbrs[h]) {
        const double w = in.triplet_weights[nb.triplet];
        const bool additive = in.compositional && one_item(nb.triplet);
        Vec phi(d);
        for (std::size_t c = 0; c < d; ++c) {
          phi[c] = additive ? prev[nb.tail][c] + in.relation[nb.relation][c]
                            : prev[nb.tail][c] * in.relation[nb.relation][c];
        }
        Vec msg = mat_vec(additive ? in.w2 : in.w1, phi);
        for (std::size_t c = 0; c < d; ++c) {
          next[h][c] += std::max(0.0, msg[c]) * w / static_cast<double>(nbrs[h].size());
        }
      }
    }
    layers.push_back(next);
  }

  // Mean relation embedding of each item's distinct outgoing relations.
  Mat rel_mean = zeros(nI, d);
  for (std::size_t i = 0; i < nI; ++i) {
    std::set<std::size_t> rels;
    for (const auto& t : in.triplets) {
      if (t.head == i) rels.insert(t.relation);
    }
    for (std::size_t r : rels) {
      for (std::size_t c = 0; c < d; ++c) rel_mean[i][c] += in.relation[r][c] / rels.size();
    }
  }

  std::vector<std::vector<std::size_t>> user_items(in.num_users);
  std::vector<std::size_t> item_degree(nI, 0);
  for (const auto& r : in.interactions) {
    user_items[r.user].push_back(r.item);
    ++item_degree[r.item];
  }

  Outputs out;
  Mat uk = in.user_knowledge, uc = in.user_collab, ic = in.item_collab;
  Mat sum_uk = uk, sum_uc = uc, sum_ic = ic;
  for (std::size_t l = 1; l <= in.layers; ++l) {
    Mat ik(layers[l - 1].begin(), layers[l - 1].begin() + static_cast<std::ptrdiff_t>(nI));
    Mat new_uk = uk, new_uc = uc;
    // keep[u][k] for the k-th item of user u, from the final round.
    std::vector<Vec> keep(in.num_users);
    const std::size_t rounds = in.hard_pruning ? in.rounds : 1;
    for (std::size_t round = 0; round < rounds; ++round) {
      for (std::size_t u = 0; u < in.num_users; ++u) {
        const auto& items = user_items[u];
        if (items.empty()) {
          keep[u].clear();
          new_uk[u] = normalized(new_uk[u]);
          new_uc[u] = normalized(new_uc[u]);
          continue;
        }
        Vec lk, lc;
        for (std::size_t i : items) {
          Vec mod(d);
          for (std::size_t c = 0; c < d; ++c) mod[c] = ik[i][c] * rel_mean[i][c];
          lk.push_back(dotp(new_uk[u], mod));
          lc.push_back(dotp(new_uc[u], ic[i]));
        }
        const auto softmax = [](const Vec& x) {
          const double m = *std::max_element(x.begin(), x.end());
          Vec e;
          double z = 0.0;
          for (double v : x) {
            e.push_back(std::exp(v - m));
            z += e.back();
          }
          for (double& v : e) v /= z;
          return e;
        };
        const Vec pk = softmax(lk), pc = softmax(lc);
        keep[u].assign(items.size(), 1.0);
        if (in.hard_pruning) {
          for (std::size_t k = 0; k < items.size(); ++k) {
            const double div = std::abs(sig(pc[k]) - sig(pk[k]));
            out.min_threshold_margin = std::min(out.min_threshold_margin, std::abs(div - in.gamma));
            keep[u][k] = div < in.gamma ? 1.0 : 0.0;
          }
        }
        Vec ak = new_uk[u], ac = new_uc[u];
        for (std::size_t k = 0; k < items.size(); ++k) {
          for (std::size_t c = 0; c < d; ++c) {
            ak[c] += keep[u][k] * pk[k] * ik[items[k]][c];
            ac[c] += keep[u][k] * pc[k] * ic[items[k]][c];
          }
        }
        new_uk[u] = normalized(ak);
        new_uc[u] = normalized(ac);
      }
    }
    Mat new_ic = zeros(nI, d);
    for (std::size_t u = 0; u < in.num_users; ++u) {
      for (std::size_t k = 0; k < user_items[u].size(); ++k) {
        const std::size_t i = user_items[u][k];
        for (std::size_t c = 0; c < d; ++c) {
          new_ic[i][c] += keep[u][k] * uc[u][c] / static_cast<double>(item_degree[i]);
        }
      }
    }
    uk = new_uk;
    uc = new_uc;
    ic = new_ic;
    sum_uk = add(sum_uk, uk);
    sum_uc = add(sum_uc, uc);
    sum_ic = add(sum_ic, ic);
  }
  Mat sum_e = layers[0];
  for (std::size_t l = 1; l < layers.size(); ++l) sum_e = add(sum_e, layers[l]);
  out.user_knowledge = sum_uk;
  out.user_collab = sum_uc;
  out.item_collab = sum_ic;
  out.item_knowledge.assign(sum_e.begin(), sum_e.begin() + static_cast<std::ptrdiff_t>(nI));
  return out;
}

struct RankingOutputs {
  std::size_t user_count = 0;
  double recall = 0.0;
  double ndcg = 0.0;
};

/// Brute-force all-ranking metrics at cutoff n: every non-train item is
/// scored, fully sorted, and the top n compared with the test items.
inline RankingOutputs ranking_metrics(const Mat& user_collab, const Mat& item_collab,
                                      const Mat& user_knowledge, const Mat& item_knowledge,
                                      const std::vector<krdn::data::InteractionRecord>& train,
                                      const std::vector<krdn::data::InteractionRecord>& test,
                                      std::size_t n) {
  const auto cos = [](const Vec& a, const Vec& b) {
    const double na = std::sqrt(dotp(a, a));
    const double nb = std::sqrt(dotp(b, b));
    return na == 0.0 || nb == 0.0 ? 0.0 : dotp(a, b) / (na * nb);
  };
  const std::size_t users = user_collab.size();
  const std::size_t items = item_collab.size();
  std::vector<std::set<std::size_t>> seen(users), relevant(users);
  for (const auto& r : train) seen[r.user].insert(r.item);
  for (const auto& r : test) relevant[r.user].insert(r.item);
  RankingOutputs out;
  for (std::size_t u = 0; u < users; ++u) {
    if (relevant[u].empty()) continue;
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t i = 0; i < items; ++i) {
      if (seen[u].count(i) != 0) continue;
      scored.push_back({-(cos(user_collab[u], item_collab[i]) +
                          cos(user_knowledge[u], item_knowledge[i])),
                        i});
    }
    std::sort(scored.begin(), scored.end());
    double hits = 0.0;
    double dcg = 0.0;
    for (std::size_t k = 0; k < std::min(n, scored.size()); ++k) {
      if (relevant[u].count(scored[k].second) == 0) continue;
      hits += 1.0;
      dcg += 1.0 / std::log2(static_cast<double>(k) + 2.0);
    }
    double idcg = 0.0;
    for (std::size_t k = 0; k < std::min(n, relevant[u].size()); ++k) {
      idcg += 1.0 / std::log2(static_cast<double>(k) + 2.0);
    }
    ++out.user_count;
    out.recall += hits / static_cast<double>(relevant[u].size());
    out.ndcg += dcg / idcg;
  }
  if (out.user_count > 0) {
    out.recall /= static_cast<double>(out.user_count);
    out.ndcg /= static_cast<double>(out.user_count);
  }
  return out;
}

}  // namespace oracle
