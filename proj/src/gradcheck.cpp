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

#include "krdn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "krdn/error.hpp"
#include "krdn/refiner.hpp"
#include "krdn/rng.hpp"

namespace krdn::gradcheck {

namespace {

using Builder = std::function<ad::Var(const std::vector<ad::Var>&)>;

enum class Draw { Any, AwayFromZero, Positive };

ad::Tensor random_tensor(Rng& rng, ad::Tensor::Shape shape, Draw draw) {
  ad::Tensor t(std::move(shape));
  for (double& v : t.values()) {
    const double u = uniform_open(rng);
    switch (draw) {
      case Draw::Any:
        v = 3.0 * u - 1.5;
        break;
      case Draw::AwayFromZero:
        v = (0.2 + 1.3 * u) * (uniform_open(rng) < 0.5 ? -1.0 : 1.0);
        break;
      case Draw::Positive:
        v = 0.5 + u;
        break;
    }
  }
  return t;
}

struct PrimitiveCase {
  ad::Op op;
  std::vector<ad::Tensor> inputs;
  Builder build;
};

double weighted_output(const PrimitiveCase& c, const std::vector<ad::Tensor>& inputs,
                       const ad::Tensor& weights, std::optional<ad::Op> corrupt,
                       ad::Gradients* grads) {
  ad::Tape tape;
  tape.corrupt_backward(corrupt);
  std::vector<ad::Var> vars;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    vars.push_back(tape.parameter("in" + std::to_string(k), inputs[k]));
  }
  const ad::Var out = c.build(vars);
  const ad::Var loss = ad::sum(ad::mul(out, tape.constant(weights)));
  if (grads != nullptr) *grads = tape.backward(loss);
  return loss.value()[0];
}

ad::Tensor output_of(const PrimitiveCase& c) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (const ad::Tensor& t : c.inputs) vars.push_back(tape.constant(t));
  return c.build(vars).value();
}

CheckResult run_case(const PrimitiveCase& c, Rng& rng, std::optional<ad::Op> corrupt,
                     double tolerance, double epsilon) {
  const ad::Tensor weights = random_tensor(rng, output_of(c).shape(), Draw::Any);
  ad::Gradients grads;
  weighted_output(c, c.inputs, weights, corrupt, &grads);

  std::vector<double> analytic;
  std::vector<double> numeric;
  std::vector<ad::Tensor> inputs = c.inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const ad::Tensor& g = grads.at("in" + std::to_string(k));
    analytic.insert(analytic.end(), g.values().begin(), g.values().end());
    for (std::size_t e = 0; e < inputs[k].size(); ++e) {
      const double saved = inputs[k][e];
      inputs[k][e] = saved + epsilon;
      const double up = weighted_output(c, inputs, weights, std::nullopt, nullptr);
      inputs[k][e] = saved - epsilon;
      const double down = weighted_output(c, inputs, weights, std::nullopt, nullptr);
      inputs[k][e] = saved;
      numeric.push_back((up - down) / (2.0 * epsilon));
    }
  }
  CheckResult r;
  r.name = std::string(ad::op_name(c.op));
  r.rel_error = relative_error(analytic, numeric);
  r.passed = r.rel_error < tolerance;
  return r;
}

double loss_on(const Toy& toy, const ad::ParameterStore& store, std::optional<ad::Op> corrupt,
               ad::Gradients* grads) {
  ad::Tape tape;
  tape.corrupt_backward(corrupt);
  const model::ForwardPass pass =
      model::forward(tape, toy.config, toy.graphs, store, toy.triplet_weights);
  const ad::Var l = model::loss(pass, toy.graphs.interactions, toy.batch, toy.bank, toy.config.margin);
  if (grads != nullptr) *grads = tape.backward(l);
  return l.value()[0];
}

}  // namespace

double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  if (analytic.size() != numeric.size()) throw ShapeError("relative_error: length mismatch");
  double diff = 0.0;
  double na = 0.0;
  double nn = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    diff += (analytic[k] - numeric[k]) * (analytic[k] - numeric[k]);
    na += analytic[k] * analytic[k];
    nn += numeric[k] * numeric[k];
  }
  na = std::sqrt(na);
  nn = std::sqrt(nn);
  if (na < 1e-10 && nn < 1e-10) return 0.0;
  return std::sqrt(diff) / std::max(na, nn);
}

std::vector<CheckResult> check_primitives(std::uint64_t seed, std::optional<ad::Op> corrupt,
                                          double tolerance, double epsilon) {
  Rng rng(derive_seed(seed, {0x9C}));
  const auto any = [&](ad::Tensor::Shape s) { return random_tensor(rng, std::move(s), Draw::Any); };
  const auto away = [&](ad::Tensor::Shape s) {
    return random_tensor(rng, std::move(s), Draw::AwayFromZero);
  };
  const auto positive = [&](ad::Tensor::Shape s) {
    return random_tensor(rng, std::move(s), Draw::Positive);
  };
  const ad::IndexList gather_idx = ad::make_index({2, 0, 2, 1});
  const ad::IndexList scatter_idx = ad::make_index({1, 0, 1, 3});
  using V = std::vector<ad::Var>;

  std::vector<PrimitiveCase> cases;
  cases.push_back({ad::Op::Gather, {any({4, 3})}, [&](const V& v) { return ad::gather(v[0], gather_idx); }});
  cases.push_back({ad::Op::ScatterAdd, {any({4, 3})},
                   [&](const V& v) { return ad::scatter_add(v[0], scatter_idx, 5); }});
  cases.push_back({ad::Op::Add, {any({4, 3}), any({4, 3})}, [](const V& v) { return ad::add(v[0], v[1]); }});
  cases.push_back({ad::Op::Sub, {any({4, 3}), any({4, 3})}, [](const V& v) { return ad::sub(v[0], v[1]); }});
  cases.push_back({ad::Op::Mul, {any({4, 3}), any({4, 3})}, [](const V& v) { return ad::mul(v[0], v[1]); }});
  cases.push_back({ad::Op::Div, {any({4, 3}), positive({4, 3})},
                   [](const V& v) { return ad::div(v[0], v[1]); }});
  cases.push_back({ad::Op::Relu, {away({4, 3})}, [](const V& v) { return ad::relu(v[0]); }});
  cases.push_back({ad::Op::Sigmoid, {any({4, 3})}, [](const V& v) { return ad::sigmoid(v[0]); }});
  cases.push_back({ad::Op::Exp, {any({4, 3})}, [](const V& v) { return ad::exp(v[0]); }});
  cases.push_back({ad::Op::Sum, {any({4, 3})}, [](const V& v) { return ad::sum(v[0]); }});
  cases.push_back({ad::Op::Mean, {any({4, 3})}, [](const V& v) { return ad::mean(v[0]); }});
  cases.push_back({ad::Op::L2Normalize, {away({4, 3})}, [](const V& v) { return ad::l2_normalize(v[0]); }});
  cases.push_back({ad::Op::Dot, {any({4, 3}), any({4, 3})}, [](const V& v) { return ad::dot(v[0], v[1]); }});
  cases.push_back({ad::Op::Cosine, {away({4, 3}), away({4, 3})},
                   [](const V& v) { return ad::cosine(v[0], v[1]); }});
  cases.push_back({ad::Op::MatVec, {any({2, 3}), any({4, 3})},
                   [](const V& v) { return ad::matvec(v[0], v[1]); }});
  cases.push_back({ad::Op::MaxWithZero, {away({4, 3})}, [](const V& v) { return ad::max_with_zero(v[0]); }});
  cases.push_back({ad::Op::ScaleRows, {any({4, 3}), any({4})},
                   [](const V& v) { return ad::scale_rows(v[0], v[1]); }});

  std::vector<CheckResult> out;
  for (const PrimitiveCase& c : cases) out.push_back(run_case(c, rng, corrupt, tolerance, epsilon));
  return out;
}

Toy make_toy(std::uint64_t seed, model::Variant variant) {
  constexpr std::size_t kUsers = 6;
  constexpr std::size_t kItems = 8;
  constexpr std::size_t kAttributes = 4;
  Rng rng(derive_seed(seed, {0x70E}));

  std::vector<data::InteractionRecord> interactions;
  for (std::size_t u = 0; u < kUsers; ++u) {
    std::vector<std::size_t> items(kItems);
    std::iota(items.begin(), items.end(), std::size_t{0});
    for (std::size_t k = 0; k < 3; ++k) {
      std::swap(items[k], items[k + uniform_index(rng, kItems - k)]);
      interactions.push_back({u, items[k]});
    }
  }
  std::vector<data::TripletRecord> triplets;
  for (std::size_t i = 0; i < kItems; ++i) {
    triplets.push_back({i, 0, kItems + uniform_index(rng, kAttributes)});
    const std::size_t j = (i + 1 + uniform_index(rng, kItems - 1)) % kItems;
    triplets.push_back({i, 1, j});
  }
  for (std::size_t a = 0; a < kAttributes; ++a) {
    triplets.push_back({kItems + a, 2, kItems + (a + 1) % kAttributes});
  }
  const data::Counts counts{kUsers, kItems, kItems + kAttributes, 3};

  Toy toy;
  toy.graphs = graph::build_indices(interactions, triplets, counts);
  toy.config.embed_dim = 8;
  toy.config.layers = 2;
  toy.config.n_iterations = 2;
  toy.config.negatives = 3;
  toy.config.variant = variant;
  toy.config.gamma = 1.0;
  toy.store = model::init_parameters(toy.config, toy.graphs, derive_seed(seed, {0x9A}));

  const std::size_t nt = toy.graphs.kg.num_triplets();
  std::vector<double> alpha(nt);
  for (double& a : alpha) a = 2.0 * uniform_open(rng) - 1.0;
  toy.store.value(model::names::kMaskLogits) = ad::Tensor::vector(alpha);
  toy.triplet_weights = refiner::sample_masks({toy.store.value(model::names::kMaskLogits).values()},
                                              derive_seed(seed, {0xB1})).b;

  const std::size_t ne = toy.graphs.interactions.num_edges();
  std::vector<std::size_t> edges(ne);
  std::iota(edges.begin(), edges.end(), std::size_t{0});
  toy.batch = model::make_batch(edges, toy.graphs.interactions, toy.config.negatives,
                                derive_seed(seed, {0xBA}));
  toy.bank = denoise::SimilarityBank::all_kept(ne);
  for (std::size_t e = 0; e < ne; e += 3) toy.bank.keep[e] = 0;

  // Threshold in the widest interior gap of the final-round divergences,
  // refined a few times since the threshold feeds back into the rounds.
  for (int refine = 0; refine < 3; ++refine) {
    ad::Tape tape;
    const model::ForwardPass pass =
        model::forward(tape, toy.config, toy.graphs, toy.store, toy.triplet_weights);
    std::vector<double> div;
    for (std::size_t e = 0; e < ne; ++e) {
      div.push_back(denoise::divergence(pass.edge_stats.p_collab[e], pass.edge_stats.p_know[e]));
    }
    std::sort(div.begin(), div.end());
    std::size_t best = div.size() / 2;
    double widest = -1.0;
    for (std::size_t k = div.size() / 2; k + 1 < div.size(); ++k) {
      if (div[k + 1] - div[k] > widest) {
        widest = div[k + 1] - div[k];
        best = k;
      }
    }
    toy.config.gamma = 0.5 * (div[best] + div[best + 1]);
  }
  return toy;
}

double toy_loss(const Toy& toy, const ad::ParameterStore& store) {
  return loss_on(toy, store, std::nullopt, nullptr);
}

std::vector<CheckResult> check_model(const Toy& toy, std::optional<ad::Op> corrupt, double tolerance,
                                     double epsilon) {
  ad::Gradients grads;
  loss_on(toy, toy.store, corrupt, &grads);
  ad::ParameterStore store = toy.store;
  std::vector<CheckResult> out;
  for (const std::string& name : model::continuous_parameters()) {
    const ad::Tensor& g = grads.at(name);
    std::vector<double> numeric;
    ad::Tensor& value = store.value(name);
    for (std::size_t e = 0; e < value.size(); ++e) {
      const double saved = value[e];
      value[e] = saved + epsilon;
      const double up = loss_on(toy, store, std::nullopt, nullptr);
      value[e] = saved - epsilon;
      const double down = loss_on(toy, store, std::nullopt, nullptr);
      value[e] = saved;
      numeric.push_back((up - down) / (2.0 * epsilon));
    }
    CheckResult r;
    r.name = name;
    r.rel_error = relative_error(g.values(), numeric);
    r.passed = r.rel_error < tolerance;
    out.push_back(r);
  }
  return out;
}

double disarm_objective(std::span<const double> bits) {
  double s = -1.3;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    s += static_cast<double>(i + 1) / static_cast<double>(bits.size()) * bits[i];
  }
  const double pair = bits.size() >= 2 ? bits[0] * bits[1] : 0.0;
  return s * s + 0.5 * pair;
}

std::vector<double> enumerate_gradient(std::span<const double> alpha) {
  const std::size_t k = alpha.size();
  if (k > 20) throw ConfigError("enumerate_gradient: too many gates to enumerate");
  std::vector<double> p(k);
  for (std::size_t i = 0; i < k; ++i) p[i] = refiner::sigmoid(alpha[i]);
  std::vector<double> grad(k, 0.0);
  std::vector<double> bits(k);
  for (std::uint64_t m = 0; m < (std::uint64_t{1} << k); ++m) {
    double prob = 1.0;
    for (std::size_t i = 0; i < k; ++i) {
      bits[i] = static_cast<double>((m >> i) & 1U);
      prob *= bits[i] != 0.0 ? p[i] : 1.0 - p[i];
    }
    const double f = disarm_objective(bits);
    // d/d alpha_i of P(b) is P(b) (b_i - p_i).
    for (std::size_t i = 0; i < k; ++i) grad[i] += f * prob * (bits[i] - p[i]);
  }
  return grad;
}

DisarmCheck check_disarm(std::size_t gates, std::size_t samples, std::uint64_t seed) {
  if (gates == 0 || samples < 2) throw ConfigError("check_disarm: need gates >= 1, samples >= 2");
  DisarmCheck out;
  out.samples = samples;
  out.alpha.resize(gates);
  for (std::size_t i = 0; i < gates; ++i) {
    out.alpha[i] = gates == 1 ? 0.3
                              : -1.5 + 3.0 * static_cast<double>(i) / static_cast<double>(gates - 1);
  }
  out.exact = enumerate_gradient(out.alpha);

  Rng rng(derive_seed(seed, {0xD15A}));
  std::vector<double> sum(gates, 0.0);
  std::vector<double> sum_sq(gates, 0.0);
  const refiner::MaskBank bank{out.alpha};
  for (std::size_t s = 0; s < samples; ++s) {
    std::vector<double> u(gates);
    for (double& v : u) v = uniform_open(rng);
    const refiner::MaskSample m = refiner::masks_from_uniforms(bank, std::move(u));
    const std::vector<double> g =
        refiner::disarm_gradient(disarm_objective(m.b), disarm_objective(m.b_tilde), m, bank);
    for (std::size_t i = 0; i < gates; ++i) {
      sum[i] += g[i];
      sum_sq[i] += g[i] * g[i];
    }
  }
  const double n = static_cast<double>(samples);
  out.passed = true;
  for (std::size_t i = 0; i < gates; ++i) {
    const double mean = sum[i] / n;
    const double var = std::max(0.0, (sum_sq[i] - n * mean * mean) / (n - 1.0));
    const double se = std::sqrt(var / n);
    out.mean.push_back(mean);
    out.standard_error.push_back(se);
    const double gap = std::abs(mean - out.exact[i]);
    const double z = se > 0.0 ? gap / se : (gap < 1e-12 ? 0.0 : INFINITY);
    out.max_z = std::max(out.max_z, z);
    out.passed = out.passed && z <= 3.0;
  }
  return out;
}

}  // namespace krdn::gradcheck
