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

#include "krdn/train.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "krdn/checkpoint.hpp"
#include "krdn/error.hpp"
#include "krdn/io_format.hpp"
#include "krdn/rng.hpp"

namespace krdn::train {

namespace {

enum Stream : std::uint64_t { kInit = 1, kShuffle = 2, kNegatives = 3, kMasks = 4 };

using Json = nlohmann::ordered_json;

Json config_json(const TrainConfig& c) {
  const model::ModelConfig& m = c.model;
  Json j;
  j["embed_dim"] = m.embed_dim;
  j["layers"] = m.layers;
  j["n_iterations"] = m.n_iterations;
  j["gamma"] = m.gamma;
  j["negatives"] = m.negatives;
  j["margin"] = m.margin;
  j["learning_rate"] = m.learning_rate;
  j["batch_size"] = m.batch_size;
  j["variant"] = std::string(model::variant_name(m.variant));
  j["mask_logit_init"] = m.mask_logit_init;
  j["seed"] = c.seed;
  j["validation_cutoff"] = c.validation_cutoff;
  return j;
}

}  // namespace

std::string config_fingerprint(const TrainConfig& config) { return config_json(config).dump(); }

std::uint64_t config_hash(const TrainConfig& config) { return fnv1a(config_fingerprint(config)); }

TrainConfig read_checkpoint_config(const std::filesystem::path& stem) {
  const std::filesystem::path path = checkpoint_metadata(stem);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read checkpoint metadata " + path.string());
  TrainConfig c;
  try {
    const Json meta = Json::parse(in);
    const Json& j = meta.at("config");
    model::ModelConfig& m = c.model;
    m.embed_dim = j.at("embed_dim").get<std::size_t>();
    m.layers = j.at("layers").get<std::size_t>();
    m.n_iterations = j.at("n_iterations").get<std::size_t>();
    m.gamma = j.at("gamma").get<double>();
    m.negatives = j.at("negatives").get<std::size_t>();
    m.margin = j.at("margin").get<double>();
    m.learning_rate = j.at("learning_rate").get<double>();
    m.batch_size = j.at("batch_size").get<std::size_t>();
    m.variant = model::parse_variant(j.at("variant").get<std::string>());
    m.mask_logit_init = j.at("mask_logit_init").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.validation_cutoff = j.at("validation_cutoff").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 0, e.what());
  }
  return c;
}

std::string log_line(const EpochReport& report) {
  Json j;
  j["epoch"] = report.epoch;
  j["loss"] = report.loss;
  j["pruned_edges"] = report.pruned_edges;
  j["mean_keep_probability"] = report.mean_keep_probability;
  if (report.validation_recall) j["validation_recall"] = *report.validation_recall;
  return j.dump();
}

std::filesystem::path checkpoint_tensors(const std::filesystem::path& stem) {
  return std::filesystem::path(stem.string() + ".tensors");
}

std::filesystem::path checkpoint_metadata(const std::filesystem::path& stem) {
  return std::filesystem::path(stem.string() + ".json");
}

Trainer::Trainer(TrainConfig config, const graph::Graphs& graphs)
    : config_(std::move(config)),
      graphs_(graphs),
      params_(model::init_parameters(config_.model, graphs, derive_seed(config_.seed, {kInit}))),
      bank_(denoise::SimilarityBank::all_kept(graphs.interactions.num_edges())) {}

EpochReport Trainer::run_epoch(const std::function<double(const model::Inference&)>& validation) {
  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t e = epoch_ + 1;
  const model::ModelConfig& mc = config_.model;
  const graph::InteractionGraph& train = graphs_.interactions;

  std::vector<std::size_t> order(train.num_edges());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng(derive_seed(config_.seed, {kShuffle, e}));
  shuffle_in_place(order, shuffle_rng);

  EpochReport report;
  report.epoch = e;
  std::uint64_t step = 0;
  for (std::size_t begin = 0; begin < order.size(); begin += mc.batch_size, ++step) {
    const std::size_t end = std::min(order.size(), begin + mc.batch_size);
    std::vector<std::size_t> edges(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                   order.begin() + static_cast<std::ptrdiff_t>(end));
    const model::Batch batch = model::make_batch(std::move(edges), train, mc.negatives,
                                                 derive_seed(config_.seed, {kNegatives, e, step}));
    const model::StepReport sr = model::train_step(params_, mc, graphs_, bank_, batch,
                                                   derive_seed(config_.seed, {kMasks, e, step}));
    report.loss += sr.loss_b;
  }

  const model::Inference inference = model::infer(mc, graphs_, params_);
  bank_ = denoise::make_bank(inference.edge_stats, mc.denoise_config());
  if (bank_.size() != train.num_edges()) {
    bank_ = denoise::SimilarityBank::all_kept(train.num_edges());
  }
  report.pruned_edges = bank_.pruned();

  const std::vector<double> keep = model::inference_weights(mc, params_);
  report.mean_keep_probability =
      keep.empty() ? 1.0
                   : std::accumulate(keep.begin(), keep.end(), 0.0) / static_cast<double>(keep.size());

  if (validation) {
    const double recall = validation(inference);
    report.validation_recall = recall;
    if (!best_validation_ || recall > *best_validation_) {
      best_validation_ = recall;
      stale_epochs_ = 0;
    } else {
      ++stale_epochs_;
    }
  }
  epoch_ = e;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::vector<EpochReport> Trainer::fit(const std::function<void(const EpochReport&)>& on_epoch,
                                      const std::function<double(const model::Inference&)>& validation) {
  std::vector<EpochReport> reports;
  while (epoch_ < config_.epochs) {
    reports.push_back(run_epoch(validation));
    if (on_epoch) on_epoch(reports.back());
    if (validation && config_.patience > 0 && stale_epochs_ >= config_.patience) break;
  }
  return reports;
}

void Trainer::save_checkpoint(const std::filesystem::path& stem) const {
  ad::NamedTensors tensors;
  for (const auto& [name, slot] : params_.slots()) {
    tensors.emplace_back("value/" + name, slot.value);
    tensors.emplace_back("m1/" + name, slot.first_moment);
    tensors.emplace_back("m2/" + name, slot.second_moment);
  }
  std::vector<double> bank(bank_.keep.begin(), bank_.keep.end());
  tensors.emplace_back("bank", ad::Tensor::vector(std::move(bank)));
  ad::write_tensor_container(checkpoint_tensors(stem), tensors);

  Json meta;
  meta["format"] = "krdn-checkpoint";
  meta["version"] = 1;
  meta["epoch"] = epoch_;
  meta["optimizer_step"] = params_.step();
  meta["config_hash"] = hex64(config_hash(config_));
  meta["config"] = config_json(config_);
  meta["rng"] = {{"seed", config_.seed}, {"epoch", epoch_}};
  meta["best_validation"] = best_validation_ ? Json(*best_validation_) : Json(nullptr);
  meta["stale_epochs"] = stale_epochs_;
  std::ofstream out(checkpoint_metadata(stem), std::ios::binary);
  if (!out) throw Error("cannot write " + checkpoint_metadata(stem).string());
  out << meta.dump(2) << '\n';
}

void Trainer::load_checkpoint(const std::filesystem::path& stem) {
  std::ifstream in(checkpoint_metadata(stem), std::ios::binary);
  if (!in) throw Error("cannot read " + checkpoint_metadata(stem).string());
  Json meta;
  try {
    meta = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(checkpoint_metadata(stem).string(), 0, e.what());
  }
  const std::string expected = hex64(config_hash(config_));
  if (meta.value("config_hash", std::string()) != expected) {
    throw ConfigError("checkpoint " + stem.string() + " was written under config hash " +
                      meta.value("config_hash", std::string("?")) + ", current config is " +
                      expected);
  }

  ad::ParameterStore restored = params_;
  std::size_t restored_values = 0;
  bool have_bank = false;
  for (auto& [name, tensor] : ad::read_tensor_container(checkpoint_tensors(stem))) {
    if (name == "bank") {
      if (tensor.size() != bank_.size()) throw ShapeError("checkpoint bank size mismatch");
      for (std::size_t e = 0; e < tensor.size(); ++e) bank_.keep[e] = tensor[e] != 0.0 ? 1 : 0;
      have_bank = true;
      continue;
    }
    const auto slash = name.find('/');
    if (slash == std::string::npos) throw ParseError(stem.string(), 0, "unexpected entry " + name);
    const std::string kind = name.substr(0, slash);
    const std::string param = name.substr(slash + 1);
    if (!restored.contains(param)) throw ParseError(stem.string(), 0, "unknown parameter " + param);
    ad::ParameterStore::Slot& slot = restored.slot(param);
    ad::Tensor* target = kind == "value" ? &slot.value
                         : kind == "m1"  ? &slot.first_moment
                         : kind == "m2"  ? &slot.second_moment
                                         : nullptr;
    if (target == nullptr) throw ParseError(stem.string(), 0, "unexpected entry " + name);
    if (!tensor.same_shape(*target)) {
      throw ShapeError("checkpoint entry " + name + " has shape " + ad::shape_string(tensor.shape()) +
                       ", expected " + ad::shape_string(target->shape()));
    }
    *target = std::move(tensor);
    restored_values += kind == "value";
  }
  if (restored_values != restored.slots().size() || !have_bank) {
    throw ParseError(stem.string(), 0, "checkpoint is missing entries");
  }
  restored.set_step(meta.at("optimizer_step").get<std::uint64_t>());
  params_ = std::move(restored);
  epoch_ = meta.at("epoch").get<std::size_t>();
  best_validation_.reset();
  if (!meta["best_validation"].is_null()) best_validation_ = meta["best_validation"].get<double>();
  stale_epochs_ = meta.value("stale_epochs", std::size_t{0});
}

}  // namespace krdn::train
