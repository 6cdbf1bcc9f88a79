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

// Model-agnostic enhancement layer.
//
// For a query (s, r, ?, t) the subject embedding handed to the scorer is
//
//   e_s = lambda * f(s) + phi(d_s) * (1 - lambda) * g(s, r, t)
//
// where f(s) is the base entity row, d_s the incremental degree of s, and
//
//   g(s, r, t) = sum_i w_i e_{s_i} / sum_i w_i,   w_i = 1 / (1 + exp(mu (t - t_i)))
//
// runs over the most recent subjects s_i of relation r with t_i < t, read
// from a per-relation FIFO of bounded length n. When no such subject exists
// the base row is used unchanged.

#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tkg/common.hpp"
#include "tkg/core.hpp"
#include "tkg/model.hpp"

namespace tkg {

enum class DegreeDecay { InverseLog, InverseLinear, ConstantOne };

std::string to_string(DegreeDecay mode);
DegreeDecay parse_degree_decay(const std::string& name);

struct EnhancementConfig {
  double lambda = 0.3;
  double mu = 0.1;
  std::size_t max_similar = 20;
  DegreeDecay decay = DegreeDecay::InverseLog;
  //! Stop gradients into the similar entities' rows.
  bool stop_gradient = false;
  //! Drop the query subject from its own similarity set.
  bool exclude_self = false;

  void validate() const;
};

struct SimilarEntry {
  EntityId subject = 0;
  Timestamp time = 0;

  friend bool operator==(const SimilarEntry&, const SimilarEntry&) = default;
};

//! Anything that can answer "which subjects of relation r were active
//! strictly before t", most recent last, at most n of them.
class SimilaritySource {
 public:
  virtual ~SimilaritySource() = default;
  virtual std::vector<SimilarEntry> similar(RelationId r, Timestamp t) const = 0;
};

//! Per-relation FIFO of the n most recent (subject, time) events.
class SimilarityIndex : public SimilaritySource {
 public:
  SimilarityIndex() = default;
  SimilarityIndex(std::size_t num_relations, std::size_t capacity);

  //! Appends (subject, time) under the quad's relation, evicting the oldest
  //! entry beyond capacity. Throws DataError if time goes backwards.
  void record(const Quadruple& q);
  void record(std::span<const Quadruple> quads);

  std::vector<SimilarEntry> similar(RelationId r, Timestamp t) const override;

  const std::deque<SimilarEntry>& buffer(RelationId r) const { return buffers_.at(r); }
  std::size_t num_relations() const { return buffers_.size(); }
  std::size_t capacity() const { return capacity_; }
  Timestamp last_time() const { return last_time_; }

  friend bool operator==(const SimilarityIndex& a, const SimilarityIndex& b) {
    return a.capacity_ == b.capacity_ && a.buffers_ == b.buffers_ && a.last_time_ == b.last_time_;
  }

  void write(std::ostream& out) const;
  static SimilarityIndex read(std::istream& in);

 private:
  std::size_t capacity_ = 0;
  std::vector<std::deque<SimilarEntry>> buffers_;
  Timestamp last_time_ = -1;
};

//! The index as it would look at any time inside a block of newer events:
//! base FIFO followed by `events`. Used while training on a task whose own
//! events must only be visible to strictly later queries.
class TemporalView : public SimilaritySource {
 public:
  TemporalView(const SimilarityIndex& base, std::span<const Quadruple> events);

  std::vector<SimilarEntry> similar(RelationId r, Timestamp t) const override;

 private:
  const SimilarityIndex& base_;
  std::vector<std::vector<SimilarEntry>> extra_;  // per relation, time-sorted
};

double recency_weight(double mu, Timestamp t, Timestamp t_i);
double degree_decay(std::uint64_t degree, DegreeDecay mode);

//! g(s, r, t) over `entries`; falls back to `base` when `entries` is empty.
std::vector<double> aggregate_similar(const ModelParams& params, std::span<const SimilarEntry> entries,
                                      Timestamp t, double mu, std::span<const double> base);

//! lambda * f + phi(d) * (1 - lambda) * g.
std::vector<double> combine(std::span<const double> f, std::span<const double> g, std::uint64_t degree,
                            const EnhancementConfig& cfg);

//! Work counters for the complexity contract.
struct EnhancementCounters {
  std::uint64_t queries = 0;
  std::uint64_t rows_retrieved = 0;
  std::uint64_t multiply_adds = 0;
};

//! Forward record for one enhanced query, kept for the backward pass.
struct EnhancedQuery {
  EntityId subject = 0;
  bool passthrough = true;
  double base_coeff = 1.0;                 // d e_s / d f(s)
  std::vector<EntityId> sources;           // similar subjects
  std::vector<double> source_coeffs;       // d e_s / d e_{s_i}
};

//! Batched enhancement with backpropagation into the entity table.
class Enhancer {
 public:
  Enhancer(const EnhancementConfig& cfg, const FrequencyTracker& tracker)
      : cfg_(cfg), tracker_(tracker) {}

  //! Writes enhanced subject embeddings (|queries| x d) into `out`.
  std::vector<EnhancedQuery> forward(const ModelParams& params, const SimilaritySource& source,
                                     std::span<const Quadruple> queries, std::span<double> out);

  //! Routes gradients w.r.t. the enhanced embeddings into entity rows.
  void backward(std::span<const EnhancedQuery> records, std::span<const double> override_grads,
                std::size_t dim, SparseGrads& grads) const;

  const EnhancementCounters& counters() const { return counters_; }
  void reset_counters() { counters_ = {}; }
  const EnhancementConfig& config() const { return cfg_; }

 private:
  EnhancementConfig cfg_;
  const FrequencyTracker& tracker_;
  EnhancementCounters counters_;
};

}  // namespace tkg
