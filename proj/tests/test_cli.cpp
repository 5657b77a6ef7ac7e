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


#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "support.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(KRDN_CLI_PATH) + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::size_t count_lines(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

const char* kSmall =
    " --synthetic --synthetic-users 40 --synthetic-items 40 --synthetic-blocks 4"
    " --synthetic-interactions 8 --synthetic-distractors 5";
const char* kModel = " --embed-dim 8 --layers 1 --n-iterations 1 --negatives 4 --batch-size 64";

// One prepared dataset and one trained checkpoint shared by the cases below.
struct Fixture {
  fs::path root = support::scratch_dir("cli");
  fs::path data = root / "data";
  fs::path run_dir = root / "run";
  fs::path stem = run_dir / "checkpoints" / "epoch-0001";
  Fixture() {
    REQUIRE(run(std::string("prepare --seed 3 --out ") + data.string() + kSmall, root / "prepare.log") == 0);
    REQUIRE(run("train --seed 3 --epochs 1 --variant no_CDL --data " + data.string() + " --out " +
                    run_dir.string() + kModel,
                root / "train.log") == 0);
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("prepare is reproducible and reports missing inputs") {
  Fixture& f = fixture();
  const fs::path again = f.root / "data2";
  REQUIRE(run(std::string("prepare --seed 3 --out ") + again.string() + kSmall, f.root / "p2.log") == 0);
  for (const char* name : {"train.txt", "validation.txt", "test.txt", "kg.txt", "dataset.json"}) {
    CHECK(support::slurp(f.data / name) == support::slurp(again / name));
  }
  CHECK(run("prepare --interactions " + (f.root / "nope.txt").string() + " --kg " +
                (f.root / "nope_kg.txt").string() + " --out " + (f.root / "x").string(),
            f.root / "missing.log") == 1);
  CHECK(run("prepare --out " + (f.root / "y").string(), f.root / "none.log") == 1);
  CHECK(run("evaluate --data " + (f.root / "absent").string() + " --checkpoint " + f.stem.string() +
                " --out " + (f.root / "z").string(),
            f.root / "absent.log") == 1);
}

TEST_CASE("train writes one checkpoint and one log line per epoch") {
  Fixture& f = fixture();
  CHECK(fs::exists(f.stem.string() + ".tensors"));
  CHECK(fs::exists(f.stem.string() + ".json"));
  CHECK(count_lines(support::slurp(f.run_dir / "train_log.jsonl")) == 1);
  CHECK(count_lines(support::slurp(f.run_dir / "timing.jsonl")) == 1);
  const json m = json::parse(support::slurp(f.run_dir / "manifest.json"));
  CHECK(m.at("variant") == "no_CDL");
  CHECK(m.at("final_epoch") == 1);
  CHECK(m.at("checkpoints").size() == 1);
}

TEST_CASE("evaluate is deterministic and writes every cutoff") {
  Fixture& f = fixture();
  const std::string base = "evaluate --data " + f.data.string() + " --checkpoint " + f.stem.string() + " --topk 5 10 20";
  REQUIRE(run(base + " --out " + (f.root / "e1").string(), f.root / "e1.log") == 0);
  REQUIRE(run(base + " --threads 3 --out " + (f.root / "e2").string(), f.root / "e2.log") == 0);
  const std::string a = support::slurp(f.root / "e1" / "metrics.csv");
  CHECK(a == support::slurp(f.root / "e2" / "metrics.csv"));
  CHECK(a.rfind("user_count,Recall@5,Recall@10,Recall@20,NDCG@5,NDCG@10,NDCG@20\n", 0) == 0);
  CHECK(count_lines(a) == 2);
}

TEST_CASE("pollute keeps the test split byte-identical") {
  Fixture& f = fixture();
  const fs::path out = f.root / "polluted";
  REQUIRE(run("pollute --seed 4 --noise-rate 0.1 --data " + f.data.string() + " --out " + out.string(),
              f.root / "pollute.log") == 0);
  CHECK(support::slurp(out / "test.txt") == support::slurp(f.data / "test.txt"));
  CHECK(support::slurp(out / "kg.txt") == support::slurp(f.data / "kg.txt"));
  const json m = json::parse(support::slurp(out / "manifest.json"));
  const json& p = m.at("pollution");
  const json d = json::parse(support::slurp(f.data / "dataset.json"));
  const auto train = d.at("sizes").at("train").get<double>();
  CHECK(p.at("train_replaced").get<double>() == std::round(0.1 * train));
  CHECK(p.at("replaced").size() == p.at("train_replaced").get<std::size_t>() +
                                       p.at("validation_replaced").get<std::size_t>());
  const json pd = json::parse(support::slurp(out / "dataset.json"));
  CHECK(fs::exists(out / pd.at("files").at("train").get<std::string>()));
}

TEST_CASE("explain writes one row per triplet and per training edge") {
  Fixture& f = fixture();
  const fs::path out = f.root / "explain";
  REQUIRE(run("explain --data " + f.data.string() + " --checkpoint " + f.stem.string() + " --out " +
                  out.string(),
              f.root / "explain.log") == 0);
  const json d = json::parse(support::slurp(f.data / "dataset.json"));
  CHECK(count_lines(support::slurp(out / "keep_probabilities.tsv")) ==
        d.at("sizes").at("kg").get<std::size_t>() + 1);
  CHECK(count_lines(support::slurp(out / "edge_divergence.tsv")) ==
        d.at("sizes").at("train").get<std::size_t>() + 1);
}

TEST_CASE("config files set options and the command line wins") {
  Fixture& f = fixture();
  const fs::path cfg = f.root / "run.ini";
  std::ofstream(cfg) << "embed-dim=8\nlayers=1\nn-iterations=1\nnegatives=4\nbatch-size=64\nepochs=1\nseed=3\n";
  const fs::path out = f.root / "cfgrun";
  REQUIRE(run("train --config " + cfg.string() + " --epochs 2 --data " + f.data.string() + " --out " +
                  out.string(),
              f.root / "cfg.log") == 0);
  CHECK(count_lines(support::slurp(out / "train_log.jsonl")) == 2);
  const json m = json::parse(support::slurp(out / "manifest.json"));
  CHECK(m.at("options").dump().find("\"embed-dim\":8") != std::string::npos);

  const fs::path bad = f.root / "bad.ini";
  std::ofstream(bad) << "embed-dim=8\nno-such-key=1\n";
  CHECK(run("train --config " + bad.string() + " --data " + f.data.string() + " --out " +
                (f.root / "badrun").string(),
            f.root / "bad.log") == 1);
}

TEST_CASE("gradcheck exits 2 and names a corrupted primitive") {
  Fixture& f = fixture();
  const fs::path log = f.root / "gc.log";
  CHECK(run("gradcheck --seed 2 --disarm-samples 2000 --corrupt-primitive relu", log) == 2);
  const std::string text = support::slurp(log);
  CHECK(text.find("primitive\trelu\t") != std::string::npos);
  CHECK(text.find("failed for primitive relu") != std::string::npos);
  CHECK(run("gradcheck --corrupt-primitive nonsense", f.root / "gc2.log") == 1);
}
