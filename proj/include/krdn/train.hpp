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
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "krdn/denoiser.hpp"
#include "krdn/graph.hpp"
#include "krdn/model.hpp"
#include "krdn/parameters.hpp"

namespace krdn::train {

struct TrainConfig {
  model::ModelConfig model;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  /// Epochs without validation-recall improvement before stopping; 0 disables.
  std::size_t patience = 0;
  /// Cutoff for the validation recall used by patience.
  std::size_t validation_cutoff = 20;
  std::size_t threads = 1;
};

/// Canonical text of every field that changes training results; threads,
/// epochs and patience are excluded so a run can be resumed and extended.
std::string config_fingerprint(const TrainConfig& config);
std::uint64_t config_hash(const TrainConfig& config);

/// The training config stored in a checkpoint's metadata; threads, epochs
/// and patience keep their defaults.
TrainConfig read_checkpoint_config(const std::filesystem::path& stem);

struct EpochReport {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;
  std::size_t pruned_edges = 0;
  double mean_keep_probability = 0.0;
  std::optional<double> validation_recall;
  /// Not part of the deterministic log.
  double wall_seconds = 0.0;
};

/// One JSON object (no trailing newline) with epoch, loss, pruned_edges,
/// mean_keep_probability and validation_recall when present.
std::string log_line(const EpochReport& report);

/**
 * Epoch loop. Every random draw is derived from (seed, epoch, step), so the
 * state after epoch k depends only on the config and the epoch-k
 * checkpoint. The similarity bank starts all kept and is refreshed from an
 * inference forward after each epoch's optimizer steps.
 */
class Trainer {
 public:
  Trainer(TrainConfig config, const graph::Graphs& graphs);

  const TrainConfig& config() const noexcept { return config_; }
  const ad::ParameterStore& params() const noexcept { return params_; }
  ad::ParameterStore& params() noexcept { return params_; }
  const denoise::SimilarityBank& bank() const noexcept { return bank_; }
  /// Completed epochs.
  std::size_t epoch() const noexcept { return epoch_; }

  /// Runs the next epoch. `validation` supplies the validation recall when set.
  EpochReport run_epoch(const std::function<double(const model::Inference&)>& validation = {});

  /// Runs until config.epochs epochs are complete or patience runs out,
  /// calling `on_epoch` after each epoch.
  std::vector<EpochReport> fit(const std::function<void(const EpochReport&)>& on_epoch = {},
                               const std::function<double(const model::Inference&)>& validation = {});

  /// Writes `<stem>.tensors` and `<stem>.json`.
  void save_checkpoint(const std::filesystem::path& stem) const;
  /// Restores parameters, optimizer moments, bank and epoch. Throws
  /// ConfigError when the checkpoint was written under a different config.
  void load_checkpoint(const std::filesystem::path& stem);

 private:
  TrainConfig config_;
  const graph::Graphs& graphs_;
  ad::ParameterStore params_;
  denoise::SimilarityBank bank_;
  std::size_t epoch_ = 0;
  std::optional<double> best_validation_;
  std::size_t stale_epochs_ = 0;
};

/// Paths of a checkpoint stem.
std::filesystem::path checkpoint_tensors(const std::filesystem::path& stem);
std::filesystem::path checkpoint_metadata(const std::filesystem::path& stem);

}  // namespace krdn::train
