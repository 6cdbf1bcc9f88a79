// Copyright 2026 The tkginc Authors. All rights reserved.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "gradient_checks.hpp"
#include "oracles.hpp"
#include "tkg/continual.hpp"

using namespace tkg;

namespace {

std::vector<CheckpointPair> run_pairs(const Bundle& b, const RunConfig& cfg) {
  Trainer trainer(cfg, b.num_relations(), b.config.window_days);
  std::vector<CheckpointPair> out;
  for (const auto& task : b.tasks) out.push_back(trainer.train_task(task));
  return out;
}

double anchored_distance(const ModelParams& p, const FisherInfo& f) {
  double acc = 0;
  auto table = [&](const EmbeddingTable& a, const EmbeddingTable& b, std::size_t rows) {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t k = 0; k < a.dim(); ++k) acc += (a.row(r)[k] - b.row(r)[k]) * (a.row(r)[k] - b.row(r)[k]);
  };
  table(p.entity, f.anchor.entity, f.entity.rows());
  table(p.relation, f.anchor.relation, f.relation.rows());
  table(p.time, f.anchor.time, f.time.rows());
  return std::sqrt(acc);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("strategy names") {
  for (const auto& n : strategy_names()) CHECK(to_string(parse_strategy(n)) == n);
  try {
    parse_strategy("joint");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("ours-full") != std::string::npos);
  }
}

TEST_CASE("reservoir keeps each item with probability capacity / N") {
  Rng rng(1);
  std::vector<double> kept(4, 0.0);
  const int trials = 40000;
  for (int t = 0; t < trials; ++t) {
    ReplayBuffer buf(2);
    for (EntityId i = 0; i < 4; ++i) buf.offer({i, 0, 0, 0}, rng);
    REQUIRE(buf.items().size() == 2);
    for (const auto& q : buf.items()) kept[q.subject] += 1;
  }
  CHECK(oracle::chi_square_p(kept, std::vector<double>(4, trials * 0.5)) > 0.01);
}

TEST_CASE("replay mix sizes") {
  Rng rng(2);
  ReplayBuffer buf(10);
  std::vector<Quadruple> cur;
  for (EntityId i = 0; i < 7; ++i) cur.push_back({i, 0, 0, 0});
  CHECK(replay_mix(cur, buf, 1.0, rng).size() == 7);  // empty buffer: only current
  CHECK(replay_mix(cur, buf, 0.0, rng) == cur);
  CHECK(replay_mix(cur, buf, 1.0, rng).size() == 14);
  CHECK(replay_mix(cur, buf, 0.3, rng).size() == 7 + 3);
  CHECK(buf.items().size() == 10);
  CHECK_THROWS_AS(replay_mix(cur, buf, 1.5, rng), ConfigError);
}

TEST_CASE("EWC penalty: zero at the anchor, gradient matches finite differences") {
  Rng rng(3);
  const auto p = oracle::random_params(rng, 5, 2, 4);
  FisherInfo f;
  CHECK(ewc_penalty(p, f, 1.0) == 0.0);
  ewc_consolidate(p, f, std::vector<Quadruple>{{0, 0, 1, 0}, {2, 0, 3, 1}}, 1, 3, rng);
  CHECK(ewc_penalty(p, f, 5.0) == 0.0);
  for (double x : f.entity.data()) CHECK(x >= 0.0);
  for (std::uint64_t seed = 0; seed < 10; ++seed)
    CHECK(checks::ewc_penalty_check(seed, 1 + seed % 8).max_relative_error < 1e-4);
  CHECK_THROWS_AS(ewc_consolidate(p, f, std::vector<Quadruple>{}, 1, 3, rng), DataError);
}

TEST_CASE("strength 0 and replay fraction 0 reproduce fine-tuning bit-exactly") {
  const auto b = fixtures::tiny_bundle();
  const auto ft = run_pairs(b, fixtures::tiny_run(Strategy::Finetune));
  auto ewc = fixtures::tiny_run(Strategy::Ewc);
  ewc.ewc_strength = 0.0;
  auto replay = fixtures::tiny_run(Strategy::Replay);
  replay.replay_fraction = 0.0;
  const auto e = run_pairs(b, ewc);
  const auto r = run_pairs(b, replay);
  for (std::size_t t = 0; t < ft.size(); ++t) {
    CHECK(e[t].eval == ft[t].eval);
    CHECK(e[t].carry == ft[t].carry);
    CHECK(r[t].eval == ft[t].eval);
    CHECK(r[t].carry == ft[t].carry);
  }
  auto strong = fixtures::tiny_run(Strategy::Ewc);
  CHECK(!(run_pairs(b, strong).back().eval == ft.back().eval));
}

TEST_CASE("warm start, determinism and zero-epoch identity") {
  const auto b = fixtures::tiny_bundle();
  const auto cfg = fixtures::tiny_run(Strategy::OursFull);
  Trainer trainer(cfg, b.num_relations(), 5);
  const auto p1 = trainer.train_task(b.tasks[0]);
  CHECK(trainer.state() == p1.carry);
  CHECK(!(p1.eval.params == p1.carry.params));
  const auto again = run_pairs(b, cfg);
  CHECK(again[0].eval == p1.eval);

  auto frozen = cfg;
  frozen.epochs_per_task = 0;
  frozen.post_eval_epochs = 0;
  Trainer idle(frozen, b.num_relations(), 5);
  const auto start = idle.state().params;
  const auto pair = idle.train_task(b.tasks[0]);
  CHECK(pair.eval.params.relation == start.relation);
  CHECK(pair.eval.params.entity.rows() > 0);
}

TEST_CASE("first-snapshot-only stops learning after task 1") {
  const auto b = fixtures::tiny_bundle();
  const auto pairs = run_pairs(b, fixtures::tiny_run(Strategy::FirstSnapshotOnly));
  for (std::size_t t = 1; t < pairs.size(); ++t) {
    CHECK(pairs[t].eval.params.relation == pairs[0].carry.params.relation);
    const auto& prev = pairs[t - 1].carry.params.entity;
    const auto& now = pairs[t].eval.params.entity;
    CHECK(std::equal(prev.data().begin(), prev.data().end(), now.data().begin()));
  }
}

TEST_CASE("consolidation distance is non-increasing in strength") {
  auto b = fixtures::tiny_bundle(4);
  b.tasks.resize(2);
  b.snapshots.resize(2);
  double last = std::numeric_limits<double>::infinity();
  for (const double s : {0.0, 0.1, 1.0, 10.0}) {
    auto cfg = fixtures::tiny_run(Strategy::Ewc);
    cfg.ewc_strength = s;
    cfg.epochs_per_task = 4;
    Trainer trainer(cfg, b.num_relations(), 5);
    trainer.train_task(b.tasks[0]);
    const auto fisher = trainer.fisher();
    const auto pair = trainer.train_task(b.tasks[1]);
    const double dist = anchored_distance(pair.eval.params, fisher);
    CHECK(dist <= last);
    last = dist;
  }
}

TEST_CASE("checkpoint round trip") {
  const auto b = fixtures::tiny_bundle();
  const auto pairs = run_pairs(b, fixtures::tiny_run(Strategy::OursFull));
  const auto path = std::filesystem::temp_directory_path() / "tkg_test_checkpoint";
  const CheckpointHeader h{"eval", 1, 0, b.num_entities(), b.num_relations()};
  write_checkpoint(path, h, pairs[0].eval);
  const auto [h2, s2] = read_checkpoint(path);
  CHECK(h2 == h);
  CHECK(s2 == pairs[0].eval);
  std::filesystem::remove(path);
}

TEST_CASE("incremental run writes a reproducible run directory") {
  const auto b = fixtures::tiny_bundle();
  const auto base = std::filesystem::temp_directory_path() / "tkg_test_run";
  std::filesystem::remove_all(base);
  RunOptions opts;
  opts.run_dir = base / "a";
  const auto cfg = fixtures::tiny_run(Strategy::OursFull);
  const auto res = incremental_run(b, cfg, opts);
  opts.run_dir = base / "b";
  incremental_run(b, cfg, opts);
  for (std::size_t t = 1; t <= b.tasks.size(); ++t) {
    const auto rel = std::filesystem::path("task_" + std::to_string(t));
    CHECK(std::filesystem::exists(base / "a" / rel / "checkpoint.eval"));
    CHECK(std::filesystem::exists(base / "a" / rel / "checkpoint.carry"));
    CHECK(slurp(base / "a" / rel / "metrics.json") == slurp(base / "b" / rel / "metrics.json"));
  }
  CHECK(res.report.steps.size() == b.tasks.size());
  for (const auto& s : res.report.steps) CHECK(s.checkpoint == "eval");
  CHECK(res.report.steps.back().test.at("filtered").size() == b.tasks.size());
  CHECK(res.report.inputs_hash == bundle_hash(b));
  CHECK(res.report.inputs_hash.size() == 40);
  std::filesystem::remove_all(base);
}
