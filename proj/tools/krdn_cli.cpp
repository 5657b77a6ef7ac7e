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

// krdn: prepare, train, evaluate, pollute, explain and gradcheck.
//
// Every option lives on the top-level app so that one flat key=value config
// file (--config) can hold the options of any command; precedence is
// flags > file > defaults. Exit codes: 0 success, 1 usage or config error,
// 2 runtime or numeric failure.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "krdn/data.hpp"
#include "krdn/denoiser.hpp"
#include "krdn/error.hpp"
#include "krdn/eval.hpp"
#include "krdn/gradcheck.hpp"
#include "krdn/graph.hpp"
#include "krdn/io_format.hpp"
#include "krdn/model.hpp"
#include "krdn/refiner.hpp"
#include "krdn/train.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

using namespace krdn;

struct Options {
  std::string config_file;
  std::uint64_t seed = 0;
  std::size_t threads = std::max(1U, std::thread::hardware_concurrency());

  // Data.
  std::string interactions;
  std::string kg;
  std::string format = "adjacency";
  std::string data_dir;
  std::string out_dir;
  bool synthetic = false;
  data::PlantedConfig planted;
  data::SplitRatios ratios;

  // Model and training.
  model::ModelConfig model;
  std::string variant = "full";
  std::size_t epochs = 100;
  std::size_t patience = 0;
  bool validate = false;
  std::size_t checkpoint_every = 0;
  std::string resume;

  // Evaluation and explanation.
  std::string checkpoint;
  std::vector<std::size_t> topk{20};
  std::string split = "test";

  // Noise.
  double noise_rate = 0.05;
  double kg_noise_rate = 0.0;

  // Gradient checks.
  std::string corrupt_primitive;
  std::size_t disarm_gates = 8;
  std::size_t disarm_samples = 100000;
};

Json options_json(const Options& o) {
  Json j;
  j["seed"] = o.seed;
  j["interactions"] = o.interactions;
  j["kg"] = o.kg;
  j["format"] = o.format;
  j["data"] = o.data_dir;
  j["out"] = o.out_dir;
  j["synthetic"] = o.synthetic;
  j["synthetic-users"] = o.planted.users;
  j["synthetic-items"] = o.planted.items;
  j["synthetic-blocks"] = o.planted.blocks;
  j["synthetic-interactions"] = o.planted.interactions_per_user;
  j["synthetic-item-links"] = o.planted.item_links_per_item;
  j["synthetic-distractors"] = o.planted.distractors;
  j["train-ratio"] = o.ratios.train;
  j["validation-ratio"] = o.ratios.validation;
  j["test-ratio"] = o.ratios.test;
  j["embed-dim"] = o.model.embed_dim;
  j["layers"] = o.model.layers;
  j["n-iterations"] = o.model.n_iterations;
  j["gamma"] = o.model.gamma;
  j["negatives"] = o.model.negatives;
  j["margin"] = o.model.margin;
  j["learning-rate"] = o.model.learning_rate;
  j["batch-size"] = o.model.batch_size;
  j["variant"] = o.variant;
  j["mask-logit-init"] = o.model.mask_logit_init;
  j["epochs"] = o.epochs;
  j["patience"] = o.patience;
  j["validate"] = o.validate;
  j["checkpoint-every"] = o.checkpoint_every;
  j["resume"] = o.resume;
  j["checkpoint"] = o.checkpoint;
  j["topk"] = o.topk;
  j["split"] = o.split;
  j["noise-rate"] = o.noise_rate;
  j["kg-noise-rate"] = o.kg_noise_rate;
  j["corrupt-primitive"] = o.corrupt_primitive;
  j["disarm-gates"] = o.disarm_gates;
  j["disarm-samples"] = o.disarm_samples;
  j["threads"] = o.threads;
  return j;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

void require_dir_option(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(std::string(flag) + " is required for this command");
}

void require_existing(const fs::path& path, const char* what) {
  if (!fs::exists(path)) throw ConfigError(std::string(what) + " not found: " + path.string());
}

fs::path prepare_out(const Options& o) {
  require_dir_option(o.out_dir, "--out");
  fs::create_directories(o.out_dir);
  return o.out_dir;
}

/// Writes manifest.json: the command, every option, and command details.
void write_manifest(const fs::path& dir, const std::string& command, const Options& o,
                    Json details = Json::object()) {
  Json m;
  m["tool"] = "krdn";
  m["command"] = command;
  m["options"] = options_json(o);
  for (auto& [k, v] : details.items()) m[k] = v;
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Dataset directories: split files plus dataset.json naming them.

struct Dataset {
  fs::path dir;
  Json manifest;
  data::SplitDataset split;
  data::InteractionFormat format = data::InteractionFormat::Adjacency;
};

Json counts_json(const data::Counts& c) {
  return {{"num_users", c.num_users},
          {"num_items", c.num_items},
          {"num_entities", c.num_entities},
          {"num_relations", c.num_relations}};
}

void write_dataset_manifest(const fs::path& dir, const data::SplitDataset& split,
                            data::InteractionFormat format, const Json& files) {
  Json j;
  j["format"] = std::string(data::format_name(format));
  j["files"] = files;
  j["counts"] = counts_json(split.counts);
  j["sizes"] = {{"train", split.train.size()},
                {"validation", split.validation.size()},
                {"test", split.test.size()},
                {"kg", split.kg.size()}};
  write_text(dir / "dataset.json", j.dump(2) + "\n");
}

Dataset load_dataset(const std::string& dir_option) {
  require_dir_option(dir_option, "--data");
  Dataset d;
  d.dir = dir_option;
  const fs::path manifest = d.dir / "dataset.json";
  require_existing(manifest, "dataset manifest");
  try {
    d.manifest = Json::parse(read_file(manifest));
    d.format = data::parse_format(d.manifest.at("format").get<std::string>());
    const Json& c = d.manifest.at("counts");
    d.split.counts = {c.at("num_users").get<std::size_t>(), c.at("num_items").get<std::size_t>(),
                      c.at("num_entities").get<std::size_t>(),
                      c.at("num_relations").get<std::size_t>()};
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest.string(), 0, e.what());
  }
  const Json& files = d.manifest.at("files");
  const auto& counts = d.split.counts;
  const auto load = [&](const char* key) {
    const fs::path p = d.dir / files.at(key).get<std::string>();
    require_existing(p, key);
    return data::load_interactions(p, d.format, counts.num_users, counts.num_items).records;
  };
  d.split.train = load("train");
  d.split.validation = load("validation");
  d.split.test = load("test");
  const fs::path kg = d.dir / files.at("kg").get<std::string>();
  require_existing(kg, "kg");
  d.split.kg = data::load_kg(kg, counts.num_entities, counts.num_relations).triplets;
  return d;
}

graph::Graphs graphs_of(const Dataset& d) {
  return graph::build_indices(d.split.train, d.split.kg, d.split.counts);
}

const std::vector<data::InteractionRecord>& split_records(const Dataset& d, const std::string& name) {
  if (name == "test") return d.split.test;
  if (name == "validation") return d.split.validation;
  if (name == "train") return d.split.train;
  throw ConfigError("unknown split '" + name + "' (expected test, validation or train)");
}

// ---------------------------------------------------------------------------
// Commands.

int cmd_prepare(const Options& o) {
  data::SplitDataset split;
  Json inputs;
  if (o.synthetic) {
    data::PlantedConfig pc = o.planted;
    pc.seed = o.seed;
    const data::PlantedDataset planted = data::make_planted(pc);
    split = data::split_dataset(planted.interactions, o.ratios, o.seed, planted.counts);
    split.kg = planted.kg;
    inputs["synthetic"] = true;
  } else {
    if (o.interactions.empty() || o.kg.empty()) {
      throw ConfigError("prepare needs --interactions and --kg, or --synthetic");
    }
    require_existing(o.interactions, "interaction file");
    require_existing(o.kg, "kg file");
    const data::InteractionFile inter = data::load_interactions(o.interactions, data::parse_format(o.format));
    const data::KgFile kg = data::load_kg(o.kg);
    data::Counts counts;
    counts.num_users = inter.num_users;
    counts.num_items = inter.num_items;
    counts.num_entities = std::max(kg.num_entities, inter.num_items);
    counts.num_relations = kg.num_relations;
    split = data::split_dataset(inter.records, o.ratios, o.seed, counts);
    split.kg = kg.triplets;
    inputs["interactions_fnv1a"] = hex64(fnv1a(read_file(o.interactions)));
    inputs["kg_fnv1a"] = hex64(fnv1a(read_file(o.kg)));
  }
  const fs::path out = prepare_out(o);
  const auto fmt = data::InteractionFormat::Adjacency;
  data::write_interactions(out / "train.txt", split.train, fmt);
  data::write_interactions(out / "validation.txt", split.validation, fmt);
  data::write_interactions(out / "test.txt", split.test, fmt);
  data::write_kg(out / "kg.txt", split.kg);
  write_dataset_manifest(out, split, fmt,
                         {{"train", "train.txt"},
                          {"validation", "validation.txt"},
                          {"test", "test.txt"},
                          {"kg", "kg.txt"}});
  write_manifest(out, "prepare", o, {{"inputs", inputs}});
  std::cout << "prepared " << split.train.size() << " train, " << split.validation.size()
            << " validation, " << split.test.size() << " test interactions and "
            << split.kg.size() << " triplets in " << out.string() << "\n";
  return 0;
}

std::string rate_tag(double rate) { return format_double(rate); }

int cmd_pollute(const Options& o) {
  const Dataset d = load_dataset(o.data_dir);
  data::NoiseSpec spec;
  spec.interaction_noise_rate = o.noise_rate;
  spec.kg_noise_rate = o.kg_noise_rate;
  spec.seed = o.seed;
  const data::PollutedInteractions polluted = data::inject_interaction_noise(d.split, spec);

  const fs::path out = prepare_out(o);
  const Json& files = d.manifest.at("files");
  const auto stem = [&](const char* key) {
    return fs::path(files.at(key).get<std::string>()).stem().string();
  };
  const std::string tag = rate_tag(o.noise_rate);
  Json new_files;
  new_files["train"] = stem("train") + ".polluted-" + tag + ".txt";
  new_files["validation"] = stem("validation") + ".polluted-" + tag + ".txt";
  new_files["test"] = files.at("test").get<std::string>();
  data::write_interactions(out / new_files["train"].get<std::string>(), polluted.dataset.train, d.format);
  data::write_interactions(out / new_files["validation"].get<std::string>(),
                           polluted.dataset.validation, d.format);
  fs::copy_file(d.dir / files.at("test").get<std::string>(), out / new_files["test"].get<std::string>(),
                fs::copy_options::overwrite_existing);

  data::SplitDataset result = polluted.dataset;
  Json kg_replaced = Json::array();
  if (o.kg_noise_rate > 0.0) {
    const data::PollutedKg pkg =
        data::inject_kg_noise(d.split.kg, o.kg_noise_rate, derive_seed(o.seed, {0x4B47}),
                              d.split.counts.num_entities);
    new_files["kg"] = stem("kg") + ".polluted-" + rate_tag(o.kg_noise_rate) + ".txt";
    data::write_kg(out / new_files["kg"].get<std::string>(), pkg.triplets);
    result.kg = pkg.triplets;
    for (const auto& r : pkg.replaced) {
      kg_replaced.push_back({{"triplet", r.triplet}, {"old_tail", r.old_tail}, {"new_tail", r.new_tail}});
    }
  } else {
    new_files["kg"] = files.at("kg").get<std::string>();
    fs::copy_file(d.dir / files.at("kg").get<std::string>(), out / new_files["kg"].get<std::string>(),
                  fs::copy_options::overwrite_existing);
  }
  write_dataset_manifest(out, result, d.format, new_files);

  Json replaced = Json::array();
  std::size_t train_replaced = 0;
  std::size_t validation_replaced = 0;
  for (const auto& r : polluted.replaced) {
    (r.split == data::SplitName::Train ? train_replaced : validation_replaced) += 1;
    replaced.push_back({{"split", std::string(data::split_name(r.split))},
                        {"position", r.position},
                        {"user", r.user},
                        {"old_item", r.old_item},
                        {"new_item", r.new_item}});
  }
  Json pollution;
  pollution["seed"] = o.seed;
  pollution["rate"] = o.noise_rate;
  pollution["kg_rate"] = o.kg_noise_rate;
  pollution["train_replaced"] = train_replaced;
  pollution["validation_replaced"] = validation_replaced;
  pollution["replaced"] = replaced;
  pollution["kg_replaced"] = kg_replaced;
  write_manifest(out, "pollute", o,
                 {{"inputs", {{"dataset_fnv1a", hex64(fnv1a(read_file(d.dir / "dataset.json")))}}},
                  {"pollution", pollution}});
  std::cout << "replaced " << train_replaced << " train and " << validation_replaced
            << " validation interactions";
  if (o.kg_noise_rate > 0.0) std::cout << " and " << kg_replaced.size() << " triplet tails";
  std::cout << "\n";
  return 0;
}

train::TrainConfig train_config(const Options& o) {
  train::TrainConfig c;
  c.model = o.model;
  c.model.variant = model::parse_variant(o.variant);
  c.model.validate();
  c.epochs = o.epochs;
  c.seed = o.seed;
  c.patience = o.patience;
  c.validation_cutoff = o.topk.front();
  c.threads = o.threads;
  return c;
}

std::string epoch_stem(std::size_t epoch) {
  std::string digits = std::to_string(epoch);
  if (digits.size() < 4) digits.insert(0, 4 - digits.size(), '0');
  return "epoch-" + digits;
}

int cmd_train(const Options& o) {
  const train::TrainConfig config = train_config(o);
  const Dataset d = load_dataset(o.data_dir);
  const graph::Graphs graphs = graphs_of(d);
  const fs::path out = prepare_out(o);
  fs::create_directories(out / "checkpoints");

  train::Trainer trainer(config, graphs);
  if (!o.resume.empty()) {
    require_existing(train::checkpoint_metadata(o.resume), "checkpoint");
    trainer.load_checkpoint(o.resume);
  }
  const std::ios::openmode mode =
      o.resume.empty() ? std::ios::binary | std::ios::trunc : std::ios::binary | std::ios::app;
  std::ofstream log(out / "train_log.jsonl", mode);
  std::ofstream timing(out / "timing.jsonl", mode);
  if (!log || !timing) throw Error("cannot write training logs in " + out.string());

  std::function<double(const model::Inference&)> validation;
  if (o.patience > 0 || o.validate) {
    validation = [&](const model::Inference& inf) {
      return eval::full_ranking(inf.reps, graphs.interactions, d.split.validation,
                                {config.validation_cutoff}, o.threads)
          .metrics.front()
          .recall;
    };
  }
  Json checkpoints = Json::array();
  const auto save = [&](std::size_t epoch) {
    const fs::path stem = out / "checkpoints" / epoch_stem(epoch);
    trainer.save_checkpoint(stem);
    checkpoints.push_back(fs::relative(stem, out).string());
  };
  const std::vector<train::EpochReport> reports = trainer.fit(
      [&](const train::EpochReport& r) {
        log << train::log_line(r) << '\n';
        log.flush();
        timing << Json({{"epoch", r.epoch}, {"wall_seconds", r.wall_seconds}}).dump() << '\n';
        std::cerr << train::log_line(r) << '\n';
        if (o.checkpoint_every > 0 && r.epoch % o.checkpoint_every == 0) save(r.epoch);
      },
      validation);
  if (checkpoints.empty() || checkpoints.back() != fs::relative(out / "checkpoints" / epoch_stem(trainer.epoch()), out).string()) {
    save(trainer.epoch());
  }
  write_manifest(out, "train", o,
                 {{"inputs", {{"dataset_fnv1a", hex64(fnv1a(read_file(d.dir / "dataset.json")))}}},
                  {"config_hash", hex64(train::config_hash(config))},
                  {"variant", std::string(model::variant_name(config.model.variant))},
                  {"epochs_run", reports.size()},
                  {"final_epoch", trainer.epoch()},
                  {"checkpoints", checkpoints}});
  std::cout << "trained to epoch " << trainer.epoch() << "; checkpoint "
            << (out / checkpoints.back().get<std::string>()).string() << "\n";
  return 0;
}

/// Parameters of a checkpoint, with its stored config.
struct Loaded {
  train::TrainConfig config;
  std::unique_ptr<train::Trainer> trainer;
};

Loaded load_model(const Options& o, const graph::Graphs& graphs) {
  require_dir_option(o.checkpoint, "--checkpoint");
  require_existing(train::checkpoint_metadata(o.checkpoint), "checkpoint");
  Loaded l;
  l.config = train::read_checkpoint_config(o.checkpoint);
  l.config.threads = o.threads;
  l.trainer = std::make_unique<train::Trainer>(l.config, graphs);
  l.trainer->load_checkpoint(o.checkpoint);
  return l;
}

int cmd_evaluate(const Options& o) {
  const Dataset d = load_dataset(o.data_dir);
  const graph::Graphs graphs = graphs_of(d);
  const Loaded l = load_model(o, graphs);
  const model::Inference inf = model::infer(l.config.model, graphs, l.trainer->params());
  const eval::RankingResult result =
      eval::full_ranking(inf.reps, graphs.interactions, split_records(d, o.split), o.topk, o.threads);
  const fs::path out = prepare_out(o);
  std::ostringstream csv;
  eval::write_metrics_csv(csv, result);
  write_text(out / "metrics.csv", csv.str());
  write_manifest(out, "evaluate", o,
                 {{"inputs",
                   {{"dataset_fnv1a", hex64(fnv1a(read_file(d.dir / "dataset.json")))},
                    {"checkpoint_fnv1a",
                     hex64(fnv1a(read_file(train::checkpoint_tensors(o.checkpoint))))}}},
                  {"model_config", Json::parse(train::config_fingerprint(l.config))}});
  std::cout << csv.str();
  return 0;
}

int cmd_explain(const Options& o) {
  const Dataset d = load_dataset(o.data_dir);
  const graph::Graphs graphs = graphs_of(d);
  const Loaded l = load_model(o, graphs);
  const model::Inference inf = model::infer(l.config.model, graphs, l.trainer->params());
  const fs::path out = prepare_out(o);

  std::ostringstream keep;
  refiner::write_keep_probabilities(
      keep, refiner::keep_probabilities(
                {l.trainer->params().value(model::names::kMaskLogits).values()}, graphs.kg));
  write_text(out / "keep_probabilities.tsv", keep.str());

  model::Inference stats = inf;
  if (stats.edge_stats.keep.size() != graphs.interactions.num_edges()) {
    const std::size_t ne = graphs.interactions.num_edges();
    stats.edge_stats.p_collab.assign(ne, 0.0);
    stats.edge_stats.p_know.assign(ne, 0.0);
    stats.edge_stats.keep.assign(ne, 1.0);
  }
  std::ostringstream div;
  denoise::write_edge_divergence(div, graphs.interactions, stats.edge_stats);
  write_text(out / "edge_divergence.tsv", div.str());
  write_manifest(out, "explain", o,
                 {{"inputs",
                   {{"dataset_fnv1a", hex64(fnv1a(read_file(d.dir / "dataset.json")))},
                    {"checkpoint_fnv1a",
                     hex64(fnv1a(read_file(train::checkpoint_tensors(o.checkpoint))))}}}});
  std::cout << "wrote " << graphs.kg.num_triplets() << " keep probabilities and "
            << graphs.interactions.num_edges() << " edge divergences to " << out.string() << "\n";
  return 0;
}

int cmd_gradcheck(const Options& o) {
  std::optional<ad::Op> corrupt;
  if (!o.corrupt_primitive.empty()) {
    corrupt = ad::op_from_name(o.corrupt_primitive);
    if (!corrupt || *corrupt == ad::Op::Leaf) {
      throw ConfigError("unknown primitive '" + o.corrupt_primitive + "'");
    }
  }
  std::ostringstream report;
  report << "group\tname\tvalue\tstatus\n";
  bool ok = true;
  std::vector<std::string> failed_primitives;
  for (const auto& r : gradcheck::check_primitives(o.seed, corrupt)) {
    report << "primitive\t" << r.name << '\t' << format_double(r.rel_error) << '\t'
           << (r.passed ? "PASS" : "FAIL") << '\n';
    if (!r.passed) failed_primitives.push_back(r.name);
    ok = ok && r.passed;
  }
  for (auto variant : {model::Variant::Full, model::Variant::NoAKR, model::Variant::NoCDL,
                       model::Variant::NoAKRCDL}) {
    const gradcheck::Toy toy = gradcheck::make_toy(o.seed, variant);
    for (const auto& r : gradcheck::check_model(toy, corrupt)) {
      report << "model:" << model::variant_name(variant) << '\t' << r.name << '\t'
             << format_double(r.rel_error) << '\t' << (r.passed ? "PASS" : "FAIL") << '\n';
      ok = ok && r.passed;
    }
  }
  const gradcheck::DisarmCheck dc = gradcheck::check_disarm(o.disarm_gates, o.disarm_samples, o.seed);
  report << "disarm\tmax_z\t" << format_double(dc.max_z) << '\t' << (dc.passed ? "PASS" : "FAIL")
         << '\n';
  ok = ok && dc.passed;

  if (!o.out_dir.empty()) {
    const fs::path out = prepare_out(o);
    write_text(out / "gradcheck.tsv", report.str());
    write_manifest(out, "gradcheck", o, {{"passed", ok}, {"failed_primitives", failed_primitives}});
  }
  std::cout << report.str();
  if (!failed_primitives.empty()) {
    std::cerr << "gradient check failed for primitive";
    for (const auto& n : failed_primitives) std::cerr << ' ' << n;
    std::cerr << '\n';
  }
  std::cout << (ok ? "gradcheck PASS" : "gradcheck FAIL") << '\n';
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"KRDN knowledge-refined denoising recommender"};
  app.set_config("--config", "", "Flat key=value file; keys are long option names");
  app.allow_config_extras(false);
  app.require_subcommand(1);

  app.add_option("--seed", o.seed, "Seed for every random draw");
  app.add_option("--threads", o.threads, "Evaluation worker threads")->check(CLI::PositiveNumber);
  app.add_option("--interactions", o.interactions, "Raw interaction file (prepare)");
  app.add_option("--kg", o.kg, "Raw KG triplet file (prepare)");
  app.add_option("--format", o.format, "Interaction file format: adjacency or pairs");
  app.add_option("--data", o.data_dir, "Dataset directory containing dataset.json");
  app.add_option("--out", o.out_dir, "Output directory");
  app.add_flag("--synthetic", o.synthetic, "Generate the planted block synthetic (prepare)");
  app.add_option("--synthetic-users", o.planted.users);
  app.add_option("--synthetic-items", o.planted.items);
  app.add_option("--synthetic-blocks", o.planted.blocks);
  app.add_option("--synthetic-interactions", o.planted.interactions_per_user);
  app.add_option("--synthetic-item-links", o.planted.item_links_per_item);
  app.add_option("--synthetic-distractors", o.planted.distractors);
  app.add_option("--train-ratio", o.ratios.train);
  app.add_option("--validation-ratio", o.ratios.validation);
  app.add_option("--test-ratio", o.ratios.test);
  app.add_option("--embed-dim", o.model.embed_dim);
  app.add_option("--layers", o.model.layers);
  app.add_option("--n-iterations", o.model.n_iterations, "Self-enhancement rounds per layer");
  app.add_option("--gamma", o.model.gamma, "Pruning threshold");
  app.add_option("--negatives", o.model.negatives, "Negatives per positive");
  app.add_option("--margin", o.model.margin, "Negative margin");
  app.add_option("--learning-rate", o.model.learning_rate);
  app.add_option("--batch-size", o.model.batch_size);
  app.add_option("--variant", o.variant, "full, no_AKR, no_CDL or no_AKR_CDL");
  app.add_option("--mask-logit-init", o.model.mask_logit_init);
  app.add_option("--epochs", o.epochs);
  app.add_option("--patience", o.patience, "Stop after this many epochs without validation gain");
  app.add_flag("--validate", o.validate, "Log validation recall every epoch");
  app.add_option("--checkpoint-every", o.checkpoint_every, "0 keeps only the final checkpoint");
  app.add_option("--resume", o.resume, "Checkpoint stem to continue from");
  app.add_option("--checkpoint", o.checkpoint, "Checkpoint stem (evaluate, explain)");
  app.add_option("--topk", o.topk, "Ranking cutoffs")->expected(1, -1);
  app.add_option("--split", o.split, "Split to evaluate: test, validation or train");
  app.add_option("--noise-rate", o.noise_rate, "Interaction noise rate (pollute)");
  app.add_option("--kg-noise-rate", o.kg_noise_rate, "Triplet tail noise rate (pollute)");
  app.add_option("--corrupt-primitive", o.corrupt_primitive, "Break one backward rule (gradcheck)");
  app.add_option("--disarm-gates", o.disarm_gates);
  app.add_option("--disarm-samples", o.disarm_samples);

  std::vector<std::pair<CLI::App*, int (*)(const Options&)>> commands;
  const auto add = [&](const char* name, const char* help, int (*fn)(const Options&)) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->fallthrough();
    commands.emplace_back(sub, fn);
  };
  add("prepare", "Split raw or synthetic data into a dataset directory", cmd_prepare);
  add("train", "Train a model and write checkpoints and logs", cmd_train);
  add("evaluate", "All-ranking Recall@N and NDCG@N of a checkpoint", cmd_evaluate);
  add("pollute", "Inject interaction (and KG) noise into a dataset", cmd_pollute);
  add("explain", "Keep probabilities and edge divergences of a checkpoint", cmd_explain);
  add("gradcheck", "Finite-difference and enumeration checks", cmd_gradcheck);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    for (const auto& [sub, fn] : commands) {
      if (sub->parsed()) return fn(o);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
