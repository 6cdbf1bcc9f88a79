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

#include "oracles.hpp"
#include "tkg/eval.hpp"

using namespace tkg;

TEST_CASE("rank uses the pessimistic half of ties") {
  const std::vector<double> s{0.5, 0.9, 0.5, 0.5, 0.1};
  CHECK(rank_from_scores(s, 0) == 3);  // one better, two ties -> 1 + 1 + 1
  CHECK(rank_from_scores(s, 1) == 1);
  CHECK(rank_from_scores(s, 4) == 5);
  const std::vector<EntityId> ex{1, 2};
  CHECK(rank_from_scores(s, 0, ex) == 2);
  const std::vector<double> flat(5, 1.0);
  CHECK(rank_from_scores(flat, 2) == 3);
}

TEST_CASE("ranks match the sorting oracle on random instances") {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(30);
    std::vector<double> scores(n);
    for (auto& x : scores) x = static_cast<double>(rng.uniform_index(6));  // plenty of ties
    const auto truth = static_cast<EntityId>(rng.uniform_index(n));
    std::vector<std::size_t> ex_idx;
    std::vector<EntityId> ex;
    for (std::size_t c = 0; c < n; ++c)
      if (c != truth && rng.uniform01() < 0.2) {
        ex_idx.push_back(c);
        ex.push_back(static_cast<EntityId>(c));
      }
    CHECK(rank_from_scores(scores, truth, ex) == oracle::rank_by_sort(scores, truth, ex_idx));
  }
}

TEST_CASE("metrics and averages match the oracle") {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::size_t> ranks(1 + rng.uniform_index(40));
    for (auto& r : ranks) r = 1 + rng.uniform_index(25);
    const auto got = metrics(ranks);
    const auto want = oracle::metrics(ranks);
    CHECK(got.mrr == doctest::Approx(want.mrr).epsilon(1e-9));
    CHECK(got.hit1 == doctest::Approx(want.hit1).epsilon(1e-9));
    CHECK(got.hit3 == doctest::Approx(want.hit3).epsilon(1e-9));
    CHECK(got.hit10 == doctest::Approx(want.hit10).epsilon(1e-9));
    CHECK(got.count == ranks.size());
  }
  const std::vector<SetMetrics> sets{{1.0, 1.0, 1.0, 1.0, 10}, {0.5, 0.0, 1.0, 1.0, 30}};
  const auto avg = average(sets);
  CHECK(avg.mrr == 0.75);  // unweighted over sets
  CHECK(avg.hit1 == 0.5);
  CHECK(metrics(std::vector<std::size_t>{}).count == 0);
}

TEST_CASE("forgetting curve matches the oracle") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<double>> p(1 + rng.uniform_index(8));
    for (std::size_t t = 0; t < p.size(); ++t)
      for (std::size_t j = 0; j <= t; ++j) p[t].push_back(rng.uniform01());
    const auto c = forgetting_curve(p);
    const auto want = oracle::forgetting(p);
    for (std::size_t t = 0; t < p.size(); ++t) CHECK(c.P[t] == doctest::Approx(want[t]).epsilon(1e-9));
  }
  CHECK_THROWS_AS(forgetting_curve({{0.1, 0.2}}), DataError);
}

TEST_CASE("time-aware filtering only removes facts at the query time") {
  Rng rng(4);
  const auto p = oracle::random_params(rng, 6, 2, 4);
  KnownFacts facts;
  facts.add(std::vector<Quadruple>{{0, 0, 1, 3}, {0, 0, 2, 3}, {0, 0, 4, 5}});
  CHECK(facts.objects(0, 0, 3).size() == 2);
  CHECK(facts.objects(0, 0, 4).empty());

  ScoringView view{&p, nullptr, nullptr, nullptr, 1};
  const Quadruple q{0, 0, 1, 3};
  const auto r = rank_query(view, q, facts);
  std::vector<double> scores(6);
  score_all_objects(p, p.entity.row(0), 0, 3, scores);
  std::vector<std::size_t> ex{2};  // the other true object at t = 3; object 4 is from t = 5
  CHECK(r.raw.rank == oracle::rank_by_sort(scores, 1, {}));
  CHECK(r.filtered.rank == oracle::rank_by_sort(scores, 1, ex));
}

TEST_CASE("parallel ranking equals sequential ranking") {
  Rng rng(5);
  const auto p = oracle::random_params(rng, 40, 4, 8);
  const auto queries = oracle::random_corpus(rng, 40, 4, 6, 30);
  KnownFacts facts;
  facts.add(queries);
  ScoringView view{&p, nullptr, nullptr, nullptr, 2};
  const auto a = rank_queries(view, queries, facts, 1);
  const auto b = rank_queries(view, queries, facts, 3);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].raw.rank == b[i].raw.rank);
    CHECK(a[i].filtered.rank == b[i].filtered.rank);
  }
}

TEST_CASE("bucketing by frequency") {
  const std::vector<std::size_t> ranks{1, 2, 5, 1, 10};
  const std::vector<std::uint64_t> freq{0, 17, 18, 47, 1000};
  const auto rep = bucketize(ranks, freq, default_bucket_bounds());
  REQUIRE(rep.buckets.size() == 3);
  CHECK(rep.buckets[0].metrics.count == 2);
  CHECK(rep.buckets[0].metrics.mrr == doctest::Approx(0.75));
  CHECK(rep.buckets[1].metrics.count == 2);
  CHECK(rep.buckets[2].metrics.count == 1);
  CHECK(rep.buckets[2].hi == std::numeric_limits<std::uint64_t>::max());
  CHECK_THROWS_AS(bucketize(ranks, freq, std::vector<std::uint64_t>{5, 10}), ConfigError);
}

TEST_CASE("inductive subset") {
  const std::vector<Quadruple> test{{0, 0, 1, 0}, {2, 0, 0, 0}, {3, 0, 3, 0}};
  const std::set<EntityId> unseen{2, 3};
  CHECK(inductive_subset(test, unseen).size() == 2);
  CHECK(inductive_subset(test, std::set<EntityId>{0}, true).size() == 1);
}

TEST_CASE("report round trip and files") {
  MetricReport r;
  r.strategy = "finetune";
  r.seed = 3;
  r.inputs_hash = "abc";
  for (int t = 1; t <= 3; ++t) {
    StepMetrics s;
    s.step = t;
    for (int j = 1; j <= t; ++j) {
      s.test["filtered"].push_back({0.1 * j + 0.01 * t, 0.1, 0.2, 0.3, 10});
      s.test["raw"].push_back({0.05 * j, 0.05, 0.1, 0.2, 10});
    }
    s.valid_current["filtered"] = {0.3, 0.2, 0.3, 0.4, 5};
    r.steps.push_back(s);
  }
  compute_curves(r);
  r.buckets = bucketize(std::vector<std::size_t>{1, 3}, std::vector<std::uint64_t>{2, 60}, default_bucket_bounds());
  CHECK(parse_report(report_json(r)) == r);
  CHECK(parse_step_metrics(step_metrics_json(r.steps[1])) == r.steps[1]);

  const auto dir = std::filesystem::temp_directory_path() / "tkg_test_report";
  std::filesystem::remove_all(dir);
  emit_report(r, dir);
  CHECK(read_report(dir) == r);
  CHECK(std::filesystem::exists(dir / "curve.csv"));
  CHECK(std::filesystem::exists(dir / "buckets.csv"));
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(emit_report(MetricReport{}, dir), DataError);
}
