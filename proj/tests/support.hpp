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

// Helpers shared by the test binaries.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "krdn/model.hpp"
#include "krdn/parameters.hpp"
#include "krdn/tensor.hpp"
#include "oracle.hpp"

namespace support {

inline oracle::Mat to_mat(const krdn::ad::Tensor& t) {
  oracle::Mat m(t.rows(), oracle::Vec(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t.at(r, c);
  }
  return m;
}

inline double max_abs_diff(const krdn::ad::Tensor& t, const oracle::Mat& m) {
  double worst = 0.0;
  if (t.rows() != m.size()) return INFINITY;
  for (std::size_t r = 0; r < m.size(); ++r) {
    if (m[r].size() != t.cols()) return INFINITY;
    for (std::size_t c = 0; c < m[r].size(); ++c) worst = std::max(worst, std::abs(t.at(r, c) - m[r][c]));
  }
  return worst;
}

/// Oracle inputs mirroring a model instance.
inline oracle::Inputs oracle_inputs(const krdn::model::ModelConfig& config,
                                    const krdn::graph::Graphs& graphs,
                                    const krdn::ad::ParameterStore& store,
                                    const std::vector<double>& weights) {
  namespace n = krdn::model::names;
  oracle::Inputs in;
  in.num_users = graphs.interactions.num_users();
  in.num_items = graphs.interactions.num_items();
  in.num_entities = graphs.kg.num_entities();
  for (std::size_t e = 0; e < graphs.interactions.num_edges(); ++e) {
    in.interactions.push_back({graphs.interactions.edge_users()[e], graphs.interactions.edge_items()[e]});
  }
  in.triplets = graphs.kg.triplets();
  in.triplet_weights = krdn::model::refines_knowledge(config.variant)
                           ? weights
                           : std::vector<double>(in.triplets.size(), 1.0);
  in.user_knowledge = to_mat(store.value(n::kUserKnowledge));
  in.user_collab = to_mat(store.value(n::kUserCollab));
  in.item_collab = to_mat(store.value(n::kItemCollab));
  in.entity = to_mat(store.value(n::kEntity));
  in.relation = to_mat(store.value(n::kRelation));
  in.w1 = to_mat(store.value(n::kW1));
  in.w2 = to_mat(store.value(n::kW2));
  in.layers = config.layers;
  in.rounds = config.n_iterations;
  in.gamma = config.gamma;
  in.hard_pruning = krdn::model::denoises_interactions(config.variant);
  in.compositional = krdn::model::refines_knowledge(config.variant);
  return in;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const std::filesystem::path p = std::filesystem::current_path() / "scratch" / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace support
