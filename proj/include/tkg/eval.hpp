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

// Ranking evaluation: per-query ranks under raw and time-aware filtered
// protocols, MRR/Hit@k, forgetting curves, inductive subsets, long-tail
// frequency buckets and the on-disk report formats.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "tkg/core.hpp"
#include "tkg/enhancement.hpp"
#include "tkg/model.hpp"

namespace tkg {

//! Objects known to hold at exactly (s, r, t), inverse relations included.
class KnownFacts {
 public:
  void add(const Quadruple& q);
  void add(std::span<const Quadruple> quads);
  //! Sorted object ids; empty when nothing is known.
  std::span<const EntityId> objects(EntityId s, RelationId r, Timestamp t) const;

 private:
  struct Key {
    EntityId s;
    RelationId r;
    Timestamp t;
    friend bool operator==(const Key&, const Key&) = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept;
  };
  std::unordered_map<Key, std::vector<EntityId>, KeyHash> facts_;
};

//! 1 + #{candidates scoring strictly higher} + ceil(#{exact ties} / 2),
//! skipping the ids in `excluded` (sorted) other than `truth`.
std::size_t rank_from_scores(std::span<const double> scores, EntityId truth,
                             std::span<const EntityId> excluded = {});

struct RankResult {
  Quadruple query;
  std::size_t rank = 1;
  bool filtered = false;
};

struct QueryRanks {
  RankResult raw;
  RankResult filtered;
};

//! Read-only view of a model for ranking.
struct ScoringView {
  const ModelParams* params = nullptr;
  //! Null disables enhancement.
  const SimilaritySource* similarity = nullptr;
  const EnhancementConfig* enhancement = nullptr;
  const FrequencyTracker* tracker = nullptr;
  std::size_t num_base_relations = 0;  // relations are fixed after the first snapshot
};

QueryRanks rank_query(const ScoringView& view, const Quadruple& query, const KnownFacts& facts);

//! Ranks every query; output order matches input, independent of `workers`.
std::vector<QueryRanks> rank_queries(const ScoringView& view, std::span<const Quadruple> queries,
                                     const KnownFacts& facts, std::size_t workers = 1);

struct SetMetrics {
  double mrr = 0.0;
  double hit1 = 0.0;
  double hit3 = 0.0;
  double hit10 = 0.0;
  std::size_t count = 0;

  friend bool operator==(const SetMetrics&, const SetMetrics&) = default;
};

SetMetrics metrics(std::span<const std::size_t> ranks);
SetMetrics metrics(std::span<const RankResult> ranks);
//! Unweighted mean of each metric across sets; count is the summed count.
SetMetrics average(std::span<const SetMetrics> sets);
double metric_value(const SetMetrics& m, const std::string& name);

inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"mrr", "hit1", "hit3", "hit10"};
  return names;
}

struct ForgettingCurve {
  std::vector<std::vector<double>> p;  // p[t][j] for j <= t
  std::vector<double> P;

  friend bool operator==(const ForgettingCurve&, const ForgettingCurve&) = default;
};

ForgettingCurve forgetting_curve(const std::vector<std::vector<double>>& p);

//! Queries touching an unseen entity (either role, or subject only).
std::vector<Quadruple> inductive_subset(std::span<const Quadruple> test, const std::set<EntityId>& unseen,
                                        bool subject_only = false);

struct Bucket {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;  // exclusive; UINT64_MAX = unbounded
  SetMetrics metrics;

  friend bool operator==(const Bucket&, const Bucket&) = default;
};

struct BucketReport {
  std::vector<Bucket> buckets;

  friend bool operator==(const BucketReport&, const BucketReport&) = default;
};

inline std::vector<std::uint64_t> default_bucket_bounds() { return {0, 18, 48}; }

//! `frequencies[i]` is the incremental frequency of the i-th query's subject
//! when the query was evaluated. `lower_bounds` must start at 0 and increase.
BucketReport bucketize(std::span<const std::size_t> ranks, std::span<const std::uint64_t> frequencies,
                       std::span<const std::uint64_t> lower_bounds);

// ---- reports ----------------------------------------------------------------

//! Metrics of one eval checkpoint.
struct StepMetrics {
  int step = 0;
  std::string checkpoint = "eval";
  //! protocol ("filtered" / "raw") -> metrics of test sets 1..step
  std::map<std::string, std::vector<SetMetrics>> test;
  std::map<std::string, SetMetrics> valid_current;
  std::map<std::string, SetMetrics> inductive_current;

  SetMetrics current(const std::string& protocol) const { return test.at(protocol).back(); }
  SetMetrics average(const std::string& protocol) const;

  friend bool operator==(const StepMetrics&, const StepMetrics&) = default;
};

struct MetricReport {
  std::string strategy;
  std::uint64_t seed = 0;
  std::string inputs_hash;
  std::vector<StepMetrics> steps;
  //! metric name -> curve (filtered protocol)
  std::map<std::string, ForgettingCurve> curves;
  BucketReport buckets;
  SetMetrics inductive_first;
  SetMetrics inductive_average;

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

//! Fills `curves` from the filtered per-step test metrics.
void compute_curves(MetricReport& report);

nlohmann::json step_metrics_json(const StepMetrics& step);
StepMetrics parse_step_metrics(const nlohmann::json& j);

nlohmann::json report_json(const MetricReport& report);
MetricReport parse_report(const nlohmann::json& j);

//! Writes report.json, curve.csv and buckets.csv into `dir`.
void emit_report(const MetricReport& report, const std::filesystem::path& dir);
MetricReport read_report(const std::filesystem::path& dir);

//! Long-format rows `step,eval_set,metric,value,strategy,seed`.
std::string curve_csv(std::span<const MetricReport> reports);
//! Rows `bucket_lo,bucket_hi,metric,value,count,strategy,seed`.
std::string buckets_csv(std::span<const MetricReport> reports);

}  // namespace tkg
