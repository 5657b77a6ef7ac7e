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

#include "krdn/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "krdn/error.hpp"
#include "krdn/rng.hpp"

namespace krdn::data {

namespace {

std::vector<std::size_t> parse_line(std::string_view line, const std::string& source,
                                    std::size_t line_no) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\r')) ++pos;
    if (pos >= line.size()) break;
    std::size_t end = pos;
    while (end < line.size() && line[end] != ' ' && line[end] != '\t' && line[end] != '\r') ++end;
    const std::string_view token = line.substr(pos, end - pos);
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
      throw ParseError(source, line_no, "expected a non-negative integer, got '" +
                                            std::string(token) + "'");
    }
    out.push_back(value);
    pos = end;
  }
  return out;
}

std::size_t resolve_count(std::optional<std::size_t> given, std::size_t observed,
                          const char* what, const std::string& source) {
  if (!given) return observed;
  if (*given < observed) {
    throw BoundsError(source + ": " + what + " index " + std::to_string(observed - 1) +
                      " exceeds configured count " + std::to_string(*given));
  }
  return *given;
}

std::size_t rounded_count(double rate, std::size_t n) {
  return static_cast<std::size_t>(std::llround(rate * static_cast<double>(n)));
}

void check_rate(double rate, const char* what) {
  if (!(rate >= 0.0 && rate <= 1.0)) {
    throw ConfigError(std::string(what) + " must lie in [0, 1]");
  }
}

// Per-user sorted item sets over every split, grown as replacements are made.
class SeenItems {
 public:
  SeenItems(const SplitDataset& split, std::size_t num_users) : items_(num_users) {
    for (const auto* part : {&split.train, &split.validation, &split.test}) {
      for (const auto& r : *part) items_.at(r.user).push_back(r.item);
    }
    for (auto& v : items_) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
  }

  std::size_t count(std::size_t user) const { return items_[user].size(); }

  void insert(std::size_t user, std::size_t item) {
    auto& v = items_[user];
    v.insert(std::lower_bound(v.begin(), v.end(), item), item);
  }

  std::size_t sample_unseen(std::size_t user, std::size_t num_items, Rng& rng) const {
    const auto& seen = items_[user];
    if (seen.size() * 2 < num_items) {
      for (;;) {
        const std::size_t candidate = uniform_index(rng, num_items);
        if (!std::binary_search(seen.begin(), seen.end(), candidate)) return candidate;
      }
    }
    std::vector<std::size_t> unseen;
    unseen.reserve(num_items - seen.size());
    std::size_t s = 0;
    for (std::size_t i = 0; i < num_items; ++i) {
      while (s < seen.size() && seen[s] < i) ++s;
      if (s < seen.size() && seen[s] == i) continue;
      unseen.push_back(i);
    }
    return unseen[uniform_index(rng, unseen.size())];
  }

 private:
  std::vector<std::vector<std::size_t>> items_;
};

void pollute_split(std::vector<InteractionRecord>& records, SplitName name, double rate,
                   std::size_t num_items, SeenItems& seen, Rng& rng,
                   std::vector<InteractionReplacement>& log) {
  const std::size_t target = rounded_count(rate, records.size());
  if (target == 0) return;
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle_in_place(order, rng);
  std::size_t done = 0;
  for (std::size_t pos : order) {
    if (done == target) break;
    InteractionRecord& r = records[pos];
    if (seen.count(r.user) >= num_items) {
      std::cerr << "warning: user " << r.user
                << " has interacted with every item; drawing another edge\n";
      continue;
    }
    const std::size_t item = seen.sample_unseen(r.user, num_items, rng);
    log.push_back({name, pos, r.user, r.item, item});
    seen.insert(r.user, item);
    r.item = item;
    ++done;
  }
  if (done < target) {
    throw ConfigError("cannot replace " + std::to_string(target) + " " +
                      std::string(split_name(name)) + " edges: only " + std::to_string(done) +
                      " belong to users with unobserved items");
  }
}

}  // namespace

InteractionFormat parse_format(std::string_view name) {
  if (name == "adjacency") return InteractionFormat::Adjacency;
  if (name == "pairs") return InteractionFormat::Pairs;
  throw ConfigError("unknown interaction format '" + std::string(name) +
                    "' (expected adjacency or pairs)");
}

std::string_view format_name(InteractionFormat format) {
  return format == InteractionFormat::Adjacency ? "adjacency" : "pairs";
}

std::string_view split_name(SplitName s) {
  switch (s) {
    case SplitName::Train:
      return "train";
    case SplitName::Validation:
      return "validation";
    case SplitName::Test:
      return "test";
  }
  return "?";
}

InteractionFile parse_interactions(std::istream& in, InteractionFormat format,
                                   const std::string& source,
                                   std::optional<std::size_t> num_users,
                                   std::optional<std::size_t> num_items) {
  InteractionFile out;
  std::size_t users_seen = 0;
  std::size_t items_seen = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = parse_line(line, source, line_no);
    if (fields.empty()) continue;
    if (format == InteractionFormat::Pairs && fields.size() != 2) {
      throw ParseError(source, line_no, "expected 'user item', got " +
                                            std::to_string(fields.size()) + " fields");
    }
    users_seen = std::max(users_seen, fields[0] + 1);
    for (std::size_t k = 1; k < fields.size(); ++k) {
      out.records.push_back({fields[0], fields[k]});
      items_seen = std::max(items_seen, fields[k] + 1);
    }
  }
  out.num_users = resolve_count(num_users, users_seen, "user", source);
  out.num_items = resolve_count(num_items, items_seen, "item", source);
  return out;
}

InteractionFile load_interactions(const std::filesystem::path& path, InteractionFormat format,
                                  std::optional<std::size_t> num_users,
                                  std::optional<std::size_t> num_items) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open interaction file '" + path.string() + "'");
  return parse_interactions(in, format, path.string(), num_users, num_items);
}

KgFile parse_kg(std::istream& in, const std::string& source,
                std::optional<std::size_t> num_entities,
                std::optional<std::size_t> num_relations) {
  KgFile out;
  std::size_t entities_seen = 0;
  std::size_t relations_seen = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = parse_line(line, source, line_no);
    if (fields.empty()) continue;
    if (fields.size() != 3) {
      throw ParseError(source, line_no,
                       "expected 'head relation tail', got " + std::to_string(fields.size()) +
                           " fields");
    }
    out.triplets.push_back({fields[0], fields[1], fields[2]});
    entities_seen = std::max({entities_seen, fields[0] + 1, fields[2] + 1});
    relations_seen = std::max(relations_seen, fields[1] + 1);
  }
  out.num_entities = resolve_count(num_entities, entities_seen, "entity", source);
  out.num_relations = resolve_count(num_relations, relations_seen, "relation", source);
  return out;
}

KgFile load_kg(const std::filesystem::path& path, std::optional<std::size_t> num_entities,
               std::optional<std::size_t> num_relations) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open KG file '" + path.string() + "'");
  return parse_kg(in, path.string(), num_entities, num_relations);
}

void write_interactions(const std::filesystem::path& path,
                        const std::vector<InteractionRecord>& records, InteractionFormat format) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  if (format == InteractionFormat::Pairs) {
    for (const auto& r : records) out << r.user << '\t' << r.item << '\n';
  } else {
    for (std::size_t k = 0; k < records.size(); ++k) {
      if (k == 0 || records[k].user != records[k - 1].user) {
        if (k != 0) out << '\n';
        out << records[k].user;
      }
      out << ' ' << records[k].item;
    }
    if (!records.empty()) out << '\n';
  }
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

void write_kg(const std::filesystem::path& path, const std::vector<TripletRecord>& triplets) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  for (const auto& t : triplets) out << t.head << ' ' << t.relation << ' ' << t.tail << '\n';
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

SplitDataset split_dataset(const std::vector<InteractionRecord>& interactions,
                           const SplitRatios& ratios, std::uint64_t seed, const Counts& counts) {
  if (ratios.train < 0 || ratios.validation < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must be non-negative and sum to 1");
  }
  std::vector<std::vector<std::size_t>> by_user(counts.num_users);
  for (const auto& r : interactions) {
    if (r.user >= counts.num_users || r.item >= counts.num_items) {
      throw BoundsError("interaction (" + std::to_string(r.user) + ", " + std::to_string(r.item) +
                        ") outside configured counts");
    }
    by_user[r.user].push_back(r.item);
  }

  SplitDataset out;
  out.counts = counts;
  Rng rng(seed);
  for (std::size_t u = 0; u < by_user.size(); ++u) {
    auto& items = by_user[u];
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    if (items.empty()) continue;
    shuffle_in_place(items, rng);
    const std::size_t n = items.size();
    std::size_t n_test = rounded_count(ratios.test, n);
    std::size_t n_val = rounded_count(ratios.validation, n);
    while (n_test + n_val >= n && n_val > 0) --n_val;
    while (n_test + n_val >= n && n_test > 0) --n_test;
    for (std::size_t k = 0; k < n; ++k) {
      const InteractionRecord rec{u, items[k]};
      if (k < n_test) {
        out.test.push_back(rec);
      } else if (k < n_test + n_val) {
        out.validation.push_back(rec);
      } else {
        out.train.push_back(rec);
      }
    }
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.validation.begin(), out.validation.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

PollutedInteractions inject_interaction_noise(const SplitDataset& split, const NoiseSpec& spec) {
  check_rate(spec.interaction_noise_rate, "interaction noise rate");
  PollutedInteractions out{split, {}};
  SeenItems seen(split, split.counts.num_users);
  Rng rng(derive_seed(spec.seed, {0x1A7E4AC7ULL}));
  pollute_split(out.dataset.train, SplitName::Train, spec.interaction_noise_rate,
                split.counts.num_items, seen, rng, out.replaced);
  pollute_split(out.dataset.validation, SplitName::Validation, spec.interaction_noise_rate,
                split.counts.num_items, seen, rng, out.replaced);
  return out;
}

PollutedKg inject_kg_noise(const std::vector<TripletRecord>& kg, double rate, std::uint64_t seed,
                           std::size_t num_entities) {
  check_rate(rate, "KG noise rate");
  PollutedKg out{kg, {}};
  const std::size_t target = rounded_count(rate, kg.size());
  if (target == 0) return out;
  if (num_entities < 2) throw ConfigError("KG noise needs at least two entities");
  Rng rng(derive_seed(seed, {0x6E0153ULL}));
  std::vector<std::size_t> order(kg.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle_in_place(order, rng);
  for (std::size_t k = 0; k < target; ++k) {
    TripletRecord& t = out.triplets[order[k]];
    if (t.tail >= num_entities) throw BoundsError("triplet tail outside entity count");
    std::size_t tail = uniform_index(rng, num_entities - 1);
    if (tail >= t.tail) ++tail;
    out.replaced.push_back({order[k], t.tail, tail});
    t.tail = tail;
  }
  return out;
}

PlantedDataset make_planted(const PlantedConfig& config) {
  if (config.blocks == 0 || config.items < config.blocks) {
    throw ConfigError("planted synthetic needs 1 <= blocks <= items");
  }
  PlantedDataset out;
  Rng rng(derive_seed(config.seed, {0x5EED}));
  const std::size_t nb = config.blocks;
  out.item_block.resize(config.items);
  std::vector<std::vector<std::size_t>> block_items(nb);
  for (std::size_t i = 0; i < config.items; ++i) {
    out.item_block[i] = i * nb / config.items;
    block_items[out.item_block[i]].push_back(i);
  }

  out.user_block.resize(config.users);
  for (std::size_t u = 0; u < config.users; ++u) {
    const std::size_t b = u % nb;
    out.user_block[u] = b;
    std::vector<std::size_t> pool = block_items[b];
    shuffle_in_place(pool, rng);
    const std::size_t take = std::min(config.interactions_per_user, pool.size());
    std::sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
    for (std::size_t k = 0; k < take; ++k) out.interactions.push_back({u, pool[k]});
  }

  const std::size_t category0 = config.items;
  const std::size_t distractor0 = config.items + nb;
  for (std::size_t i = 0; i < config.items; ++i) {
    const std::size_t b = out.item_block[i];
    out.kg.push_back({i, 0, category0 + b});
    const auto& peers = block_items[b];
    if (peers.size() > 1) {
      for (std::size_t k = 0; k < config.item_links_per_item; ++k) {
        std::size_t j = peers[uniform_index(rng, peers.size())];
        if (j == i) j = peers[(std::find(peers.begin(), peers.end(), i) - peers.begin() + 1) % peers.size()];
        out.kg.push_back({i, 1, j});
      }
    }
    if (config.distractors > 0) {
      out.kg.push_back({i, 2, distractor0 + uniform_index(rng, config.distractors)});
    }
  }
  std::sort(out.kg.begin(), out.kg.end());
  out.kg.erase(std::unique(out.kg.begin(), out.kg.end()), out.kg.end());

  out.counts.num_users = config.users;
  out.counts.num_items = config.items;
  out.counts.num_entities = config.items + nb + config.distractors;
  out.counts.num_relations = config.distractors > 0 ? 3 : 2;
  return out;
}

}  // namespace krdn::data
