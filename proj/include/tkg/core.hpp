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

// Temporal knowledge graph data model: vocabularies, ingestion of TSV event
// files, snapshot construction, extrapolation splits and the incremental
// frequency/degree bookkeeping shared by sampling, enhancement and eval.

#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tkg/common.hpp"

namespace tkg {

//! Bijective label <-> dense id map.
class LabelMap {
 public:
  //! Returns the id of `label`, appending it if unseen.
  std::uint32_t intern(std::string_view label);
  std::optional<std::uint32_t> find(std::string_view label) const;
  const std::string& label(std::uint32_t id) const { return labels_.at(id); }
  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }

  friend bool operator==(const LabelMap& a, const LabelMap& b) { return a.labels_ == b.labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::uint32_t> ids_;
};

struct Vocabulary {
  LabelMap entities;
  LabelMap relations;

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;
};

//! Parses `subject<TAB>relation<TAB>object<TAB>date[<TAB>...]` lines. Dates are
//! ISO `YYYY-MM-DD` or plain integers; they are mapped to day indexes relative
//! to the earliest date in the file. The result is stably sorted by time.
std::vector<Quadruple> parse_quadruple_file(const std::filesystem::path& path, Vocabulary& vocab);
std::vector<Quadruple> parse_quadruple_stream(std::istream& in, Vocabulary& vocab,
                                              const std::string& source_name = "<stream>");

//! Day number of an ISO date or integer field; nullopt when malformed.
std::optional<Timestamp> parse_day(std::string_view field);

struct Snapshot {
  int index = 1;  // 1-based
  std::vector<Quadruple> quads;
  Timestamp begin = 0;  // inclusive
  Timestamp end = 0;    // exclusive
};

struct TaskSplit {
  std::vector<Quadruple> train;
  std::vector<Quadruple> valid;
  std::vector<Quadruple> test;
};

struct SplitFractions {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
};

struct SnapshotConfig {
  double initial_fraction = 0.5;
  int window_days = 7;
  SplitFractions split;

  //! Throws ConfigError on violated invariants.
  void validate() const;
};

std::vector<Snapshot> build_snapshots(std::span<const Quadruple> quads, const SnapshotConfig& cfg);
TaskSplit split_snapshot(const Snapshot& snapshot, const SplitFractions& fractions);

//! Sorted list of distinct timestamps.
std::vector<Timestamp> distinct_times(std::span<const Quadruple> quads);

//! Incremental per-entity statistics over the observed training stream.
//! Frequency counts subject and object roles (a self-loop counts twice);
//! degree is the number of distinct neighbouring entities.
class FrequencyTracker {
 public:
  void observe(std::span<const Quadruple> quads);
  void observe(const Quadruple& q);

  std::uint64_t frequency(EntityId e) const { return e < freq_.size() ? freq_[e] : 0; }
  std::uint64_t subject_count(EntityId e) const {
    return e < subject_.size() ? subject_[e] : 0;
  }
  std::uint64_t object_count(EntityId e) const { return frequency(e) - subject_count(e); }
  std::uint64_t degree(EntityId e) const {
    return e < neighbours_.size() ? neighbours_[e].size() : 0;
  }
  std::size_t size() const { return freq_.size(); }
  std::uint64_t total_observed() const { return total_; }

  //! Copy of the frequency vector (for per-step bucket bookkeeping).
  const std::vector<std::uint64_t>& frequencies() const { return freq_; }

 private:
  void grow(EntityId e);

  std::vector<std::uint64_t> freq_;
  std::vector<std::uint64_t> subject_;
  std::vector<std::unordered_set<EntityId>> neighbours_;
  std::uint64_t total_ = 0;
};

//! Entities in [0, vocab_size) that appear in neither the history snapshots
//! nor the current training split.
std::set<EntityId> unseen_entities(std::span<const Snapshot> history,
                                   std::span<const Quadruple> current_train,
                                   std::size_t vocab_size);

//! Inverse-relation reduction: (s, r, o, t) -> (o, r + num_relations, s, t).
inline Quadruple inverse_of(const Quadruple& q, std::size_t num_relations) {
  return {q.object, static_cast<RelationId>(q.relation + num_relations), q.subject, q.time};
}

//! Each quad followed by its inverse.
std::vector<Quadruple> with_inverses(std::span<const Quadruple> quads, std::size_t num_relations);

// ---- snapshot bundle ------------------------------------------------------

struct Bundle {
  Vocabulary vocab;
  SnapshotConfig config;
  std::vector<Snapshot> snapshots;
  std::vector<TaskSplit> tasks;

  std::size_t num_entities() const { return vocab.entities.size(); }
  std::size_t num_relations() const { return vocab.relations.size(); }
  //! All quads of all snapshots in time order.
  std::vector<Quadruple> all_quads() const;
};

Bundle make_bundle(Vocabulary vocab, std::span<const Quadruple> quads, const SnapshotConfig& cfg);

//! Writes `meta.json`, `entities.txt`, `relations.txt` and
//! `snapshot_<t>/{train,valid,test}.tsv`.
void write_bundle(const Bundle& bundle, const std::filesystem::path& dir);
Bundle read_bundle(const std::filesystem::path& dir);

}  // namespace tkg
