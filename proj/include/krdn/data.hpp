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

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace krdn::data {

struct InteractionRecord {
  std::size_t user = 0;
  std::size_t item = 0;
  friend auto operator<=>(const InteractionRecord&, const InteractionRecord&) = default;
};

struct TripletRecord {
  std::size_t head = 0;
  std::size_t relation = 0;
  std::size_t tail = 0;
  friend auto operator<=>(const TripletRecord&, const TripletRecord&) = default;
};

/// `Adjacency`: "user item item ..." per line. `Pairs`: "user item" per line.
enum class InteractionFormat { Adjacency, Pairs };

InteractionFormat parse_format(std::string_view name);
std::string_view format_name(InteractionFormat format);

struct Counts {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::size_t num_entities = 0;
  std::size_t num_relations = 0;
  friend bool operator==(const Counts&, const Counts&) = default;
};

struct InteractionFile {
  std::vector<InteractionRecord> records;
  std::size_t num_users = 0;
  std::size_t num_items = 0;
};

struct KgFile {
  std::vector<TripletRecord> triplets;
  std::size_t num_entities = 0;
  std::size_t num_relations = 0;
};

/// Records are returned in file order. Counts default to 1 + the largest
/// index seen; an explicit count smaller than that raises BoundsError.
InteractionFile parse_interactions(std::istream& in, InteractionFormat format,
                                   const std::string& source,
                                   std::optional<std::size_t> num_users = std::nullopt,
                                   std::optional<std::size_t> num_items = std::nullopt);
InteractionFile load_interactions(const std::filesystem::path& path, InteractionFormat format,
                                  std::optional<std::size_t> num_users = std::nullopt,
                                  std::optional<std::size_t> num_items = std::nullopt);

KgFile parse_kg(std::istream& in, const std::string& source,
                std::optional<std::size_t> num_entities = std::nullopt,
                std::optional<std::size_t> num_relations = std::nullopt);
KgFile load_kg(const std::filesystem::path& path,
               std::optional<std::size_t> num_entities = std::nullopt,
               std::optional<std::size_t> num_relations = std::nullopt);

/// Adjacency output starts a new line whenever the user changes, so any
/// record sequence reloads in the same order.
void write_interactions(const std::filesystem::path& path,
                        const std::vector<InteractionRecord>& records, InteractionFormat format);
void write_kg(const std::filesystem::path& path, const std::vector<TripletRecord>& triplets);

struct SplitRatios {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

struct SplitDataset {
  std::vector<InteractionRecord> train;
  std::vector<InteractionRecord> validation;
  std::vector<InteractionRecord> test;
  std::vector<TripletRecord> kg;
  Counts counts;
};

/**
 * Per-user stratified random split. Each user's distinct items are shuffled
 * and cut into round(n * test) test, round(n * validation) validation and
 * the rest train, shrinking validation then test until at least one train
 * item remains. Splits come back sorted by (user, item).
 */
SplitDataset split_dataset(const std::vector<InteractionRecord>& interactions,
                           const SplitRatios& ratios, std::uint64_t seed, const Counts& counts);

struct NoiseSpec {
  double interaction_noise_rate = 0.05;
  double kg_noise_rate = 0.0;
  std::uint64_t seed = 0;
};

enum class SplitName { Train, Validation, Test };
std::string_view split_name(SplitName s);

struct InteractionReplacement {
  SplitName split = SplitName::Train;
  std::size_t position = 0;
  std::size_t user = 0;
  std::size_t old_item = 0;
  std::size_t new_item = 0;
};

struct PollutedInteractions {
  SplitDataset dataset;
  std::vector<InteractionReplacement> replaced;
};

/**
 * Replaces exactly round(rate * |train|) train edges and round(rate * |val|)
 * validation edges in place. Each replacement keeps the user and draws an
 * item uniformly from those the user has no edge to in any split
 * (including earlier replacements). Test is copied untouched.
 */
PollutedInteractions inject_interaction_noise(const SplitDataset& split, const NoiseSpec& spec);

struct TailReplacement {
  std::size_t triplet = 0;
  std::size_t old_tail = 0;
  std::size_t new_tail = 0;
};

struct PollutedKg {
  std::vector<TripletRecord> triplets;
  std::vector<TailReplacement> replaced;
};

/// Gives round(rate * |kg|) triplets a new tail drawn uniformly from the
/// entities other than the original tail.
PollutedKg inject_kg_noise(const std::vector<TripletRecord>& kg, double rate, std::uint64_t seed,
                           std::size_t num_entities);

/// Block-structured synthetic with planted preferences, used for desk-scale
/// experiments. Items are split into contiguous blocks; user u belongs to
/// block u % blocks and interacts only with items of its block. The KG holds
/// item->category (relation 0), item->same-block item (relation 1) and
/// item->random distractor attribute (relation 2) triplets.
struct PlantedConfig {
  std::size_t users = 200;
  std::size_t items = 200;
  std::size_t blocks = 10;
  std::size_t interactions_per_user = 10;
  std::size_t item_links_per_item = 2;
  std::size_t distractors = 20;
  std::uint64_t seed = 0;
};

struct PlantedDataset {
  std::vector<InteractionRecord> interactions;
  std::vector<TripletRecord> kg;
  Counts counts;
  std::vector<std::size_t> user_block;
  std::vector<std::size_t> item_block;
};

PlantedDataset make_planted(const PlantedConfig& config);

}  // namespace krdn::data
