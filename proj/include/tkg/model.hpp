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

// Base temporal scorer:
//
//   score(s, r, o, t) = sum_k e_s[k] * (w_r[k] + v_b(t)[k]) * e_o[k]
//
// a trilinear product whose relation vector carries an additive offset for
// the time bucket b(t) = clamp(t / bucket_width, 0, B - 1). Training uses a
// sampled softmax over the true object and K corrupted objects, with
// gradients written out by hand and applied by sparse Adagrad.

#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "tkg/common.hpp"

namespace tkg {

//! Row-major matrix of embedding rows.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::size_t rows, std::size_t dim) : rows_(rows), dim_(dim), data_(rows * dim, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t dim() const { return dim_; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

  //! Appends `count` zero rows.
  void append_rows(std::size_t count) {
    rows_ += count;
    data_.resize(rows_ * dim_, 0.0);
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

struct ModelParams {
  std::size_t dim = 0;
  Timestamp bucket_width = 1;
  EmbeddingTable entity;
  EmbeddingTable relation;  // rows = 2 * |R| (forward + inverse)
  EmbeddingTable time;      // rows = number of time buckets, >= 1

  std::size_t bucket_of(Timestamp t) const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

//! Fresh model. Entity and relation rows are uniform in
//! [-0.5/sqrt(d), 0.5/sqrt(d)]; the single initial time bucket is zero.
ModelParams init_params(std::size_t num_entities, std::size_t num_relation_rows, std::size_t dim,
                        Timestamp bucket_width, Rng& rng);

//! Appends freshly initialised entity rows up to `num_entities`.
void grow_entities(ModelParams& params, std::size_t num_entities, Rng& rng);
//! Appends zero time-bucket rows so that `t` maps to its own bucket.
void grow_time_buckets(ModelParams& params, Timestamp t);

double score(const ModelParams& params, EntityId s, RelationId r, EntityId o, Timestamp t,
             std::optional<std::span<const double>> subject_override = std::nullopt);

//! Scores every entity row as object. `out` must have params.entity.rows() slots.
void score_all_objects(const ModelParams& params, std::span<const double> subject, RelationId r,
                       Timestamp t, std::span<double> out);

//! Gradient rows keyed by row id; insertion order is preserved so iteration
//! is deterministic.
class SparseRows {
 public:
  explicit SparseRows(std::size_t dim = 0) : dim_(dim) {}

  //! Gradient row for `id`, zero-initialised on first access.
  std::span<double> row(std::uint32_t id);
  std::optional<std::span<const double>> find(std::uint32_t id) const;

  const std::vector<std::uint32_t>& ids() const { return ids_; }
  std::span<const double> row_at(std::size_t slot) const { return {values_.data() + slot * dim_, dim_}; }
  std::span<double> row_at(std::size_t slot) { return {values_.data() + slot * dim_, dim_}; }
  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }

 private:
  std::size_t dim_;
  std::unordered_map<std::uint32_t, std::size_t> slot_;
  std::vector<std::uint32_t> ids_;
  std::vector<double> values_;
};

struct SparseGrads {
  SparseRows entity;
  SparseRows relation;
  SparseRows time;

  explicit SparseGrads(std::size_t dim = 0) : entity(dim), relation(dim), time(dim) {}
  bool all_finite() const;
};

struct TrainBatch {
  std::vector<Quadruple> positives;
  std::size_t negatives_per_positive = 0;
  std::vector<EntityId> negatives;  // |positives| x K, row-major
};

struct LossResult {
  double loss = 0.0;
  SparseGrads grads;
  //! d-vectors, one per positive, when subject overrides were supplied.
  std::vector<double> override_grads;
};

//! Mean softmax cross-entropy over {true object} + K negatives. When
//! `subject_overrides` is non-empty (|positives| x d, row-major) it replaces
//! the subject rows and its gradient is returned in `override_grads` instead
//! of being accumulated into the entity table.
LossResult loss_and_grads(const ModelParams& params, const TrainBatch& batch,
                          std::span<const double> subject_overrides = {});

struct OptimizerState {
  double learning_rate = 0.05;
  double weight_decay = 0.0;
  double epsilon = 1e-8;
  EmbeddingTable entity_acc;
  EmbeddingTable relation_acc;
  EmbeddingTable time_acc;

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

OptimizerState init_optimizer(const ModelParams& params, double learning_rate, double weight_decay);
//! Extends accumulators with zero rows to match `params`.
void sync_optimizer(OptimizerState& state, const ModelParams& params);

//! Adagrad step on touched rows. Throws DivergenceError on a non-finite
//! gradient before modifying anything.
void apply_step(ModelParams& params, OptimizerState& state, const SparseGrads& grads);

//! K object ids drawn uniformly (with replacement) from [0, vocab_size)
//! excluding the true object.
std::vector<EntityId> sample_negatives(Rng& rng, const Quadruple& positive, std::size_t k,
                                       std::size_t vocab_size);

// Binary matrix dump used by checkpoints.
void write_params(std::ostream& out, const ModelParams& params);
ModelParams read_params(std::istream& in);
void write_optimizer(std::ostream& out, const OptimizerState& state);
OptimizerState read_optimizer(std::istream& in);

}  // namespace tkg
