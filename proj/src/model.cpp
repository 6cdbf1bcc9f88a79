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

#include "tkg/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

namespace tkg {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little endian");

std::size_t ModelParams::bucket_of(Timestamp t) const {
  const Timestamp b = bucket_width > 0 ? t / bucket_width : 0;
  const auto last = static_cast<Timestamp>(time.rows()) - 1;
  return static_cast<std::size_t>(std::clamp<Timestamp>(b, 0, std::max<Timestamp>(last, 0)));
}

namespace {

void fill_uniform(std::span<double> row, double bound, Rng& rng) {
  for (auto& v : row) v = rng.uniform(-bound, bound);
}

double init_bound(std::size_t dim) { return 0.5 / std::sqrt(static_cast<double>(dim)); }

}  // namespace

ModelParams init_params(std::size_t num_entities, std::size_t num_relation_rows, std::size_t dim,
                        Timestamp bucket_width, Rng& rng) {
  if (dim == 0) throw ConfigError("embedding dimension must be positive");
  if (bucket_width < 1) throw ConfigError("bucket width must be >= 1");
  ModelParams p;
  p.dim = dim;
  p.bucket_width = bucket_width;
  p.entity = EmbeddingTable(num_entities, dim);
  p.relation = EmbeddingTable(num_relation_rows, dim);
  p.time = EmbeddingTable(1, dim);
  const double bound = init_bound(dim);
  for (std::size_t i = 0; i < num_entities; ++i) fill_uniform(p.entity.row(i), bound, rng);
  for (std::size_t i = 0; i < num_relation_rows; ++i) fill_uniform(p.relation.row(i), bound, rng);
  return p;
}

void grow_entities(ModelParams& params, std::size_t num_entities, Rng& rng) {
  const std::size_t old = params.entity.rows();
  if (num_entities <= old) return;
  params.entity.append_rows(num_entities - old);
  const double bound = init_bound(params.dim);
  for (std::size_t i = old; i < num_entities; ++i) fill_uniform(params.entity.row(i), bound, rng);
}

void grow_time_buckets(ModelParams& params, Timestamp t) {
  const auto needed = static_cast<std::size_t>(std::max<Timestamp>(t, 0) / params.bucket_width) + 1;
  if (needed > params.time.rows()) params.time.append_rows(needed - params.time.rows());
}

namespace {

void check_ids(const ModelParams& p, EntityId s, RelationId r, EntityId o) {
  if (s >= p.entity.rows() || o >= p.entity.rows())
    throw DataError("entity id out of range: " + std::to_string(std::max(s, o)));
  if (r >= p.relation.rows()) throw DataError("relation id out of range: " + std::to_string(r));
}

}  // namespace

double score(const ModelParams& params, EntityId s, RelationId r, EntityId o, Timestamp t,
             std::optional<std::span<const double>> subject_override) {
  check_ids(params, s, r, o);
  const auto es = subject_override ? *subject_override : params.entity.row(s);
  if (es.size() != params.dim) throw DataError("subject override has wrong dimension");
  const auto wr = params.relation.row(r);
  const auto vb = params.time.row(params.bucket_of(t));
  const auto eo = params.entity.row(o);
  double acc = 0.0;
  for (std::size_t k = 0; k < params.dim; ++k) acc += es[k] * (wr[k] + vb[k]) * eo[k];
  return acc;
}

void score_all_objects(const ModelParams& params, std::span<const double> subject, RelationId r,
                       Timestamp t, std::span<double> out) {
  if (r >= params.relation.rows()) throw DataError("relation id out of range: " + std::to_string(r));
  const std::size_t d = params.dim;
  const auto wr = params.relation.row(r);
  const auto vb = params.time.row(params.bucket_of(t));
  std::vector<double> q(d);
  for (std::size_t k = 0; k < d; ++k) q[k] = subject[k] * (wr[k] + vb[k]);
  for (std::size_t o = 0; o < params.entity.rows(); ++o) {
    const auto eo = params.entity.row(o);
    double acc = 0.0;
    for (std::size_t k = 0; k < d; ++k) acc += q[k] * eo[k];
    out[o] = acc;
  }
}

std::span<double> SparseRows::row(std::uint32_t id) {
  auto [it, inserted] = slot_.try_emplace(id, ids_.size());
  if (inserted) {
    ids_.push_back(id);
    values_.resize(values_.size() + dim_, 0.0);
  }
  return {values_.data() + it->second * dim_, dim_};
}

std::optional<std::span<const double>> SparseRows::find(std::uint32_t id) const {
  if (auto it = slot_.find(id); it != slot_.end())
    return std::span<const double>(values_.data() + it->second * dim_, dim_);
  return std::nullopt;
}

bool SparseGrads::all_finite() const {
  for (const SparseRows* rows : {&entity, &relation, &time})
    for (std::size_t i = 0; i < rows->size(); ++i)
      for (double v : rows->row_at(i))
        if (!std::isfinite(v)) return false;
  return true;
}

LossResult loss_and_grads(const ModelParams& params, const TrainBatch& batch,
                          std::span<const double> subject_overrides) {
  const std::size_t n = batch.positives.size();
  const std::size_t k = batch.negatives_per_positive;
  const std::size_t d = params.dim;
  if (n == 0) throw DataError("loss_and_grads: empty batch");
  if (batch.negatives.size() != n * k) throw DataError("loss_and_grads: negatives shape mismatch");
  const bool overridden = !subject_overrides.empty();
  if (overridden && subject_overrides.size() != n * d)
    throw DataError("loss_and_grads: override shape mismatch");

  LossResult res{0.0, SparseGrads(d), {}};
  if (overridden) res.override_grads.assign(n * d, 0.0);

  std::vector<double> rel(d), scores(k + 1), es_rel(d);
  std::vector<EntityId> cand(k + 1);
  const double inv_n = 1.0 / static_cast<double>(n);

  for (std::size_t i = 0; i < n; ++i) {
    const auto& q = batch.positives[i];
    cand[0] = q.object;
    for (std::size_t j = 0; j < k; ++j) cand[j + 1] = batch.negatives[i * k + j];
    for (auto c : cand) check_ids(params, q.subject, q.relation, c);

    const auto es = overridden ? subject_overrides.subspan(i * d, d) : params.entity.row(q.subject);
    const auto wr = params.relation.row(q.relation);
    const std::size_t bucket = params.bucket_of(q.time);
    const auto vb = params.time.row(bucket);
    for (std::size_t m = 0; m < d; ++m) {
      rel[m] = wr[m] + vb[m];
      es_rel[m] = es[m] * rel[m];
    }

    double top = -INFINITY;
    for (std::size_t j = 0; j <= k; ++j) {
      const auto eo = params.entity.row(cand[j]);
      double acc = 0.0;
      for (std::size_t m = 0; m < d; ++m) acc += es_rel[m] * eo[m];
      scores[j] = acc;
      top = std::max(top, acc);
    }
    double z = 0.0;
    for (std::size_t j = 0; j <= k; ++j) z += std::exp(scores[j] - top);
    const double lse = top + std::log(z);
    res.loss += (lse - scores[0]) * inv_n;

    auto g_rel = res.grads.relation.row(q.relation);
    auto g_time = res.grads.time.row(static_cast<std::uint32_t>(bucket));
    std::span<double> g_es = overridden ? std::span<double>(res.override_grads).subspan(i * d, d)
                                        : res.grads.entity.row(q.subject);
    for (std::size_t j = 0; j <= k; ++j) {
      const double p = std::exp(scores[j] - lse);
      const double delta = (p - (j == 0 ? 1.0 : 0.0)) * inv_n;
      const auto eo = params.entity.row(cand[j]);
      // row() may reallocate the entity gradient storage, so g_es is
      // re-fetched after touching the candidate row.
      auto g_eo = res.grads.entity.row(cand[j]);
      for (std::size_t m = 0; m < d; ++m) g_eo[m] += delta * es_rel[m];
      if (!overridden) g_es = res.grads.entity.row(q.subject);
      for (std::size_t m = 0; m < d; ++m) {
        g_es[m] += delta * rel[m] * eo[m];
        const double gr = delta * es[m] * eo[m];
        g_rel[m] += gr;
        g_time[m] += gr;
      }
    }
  }
  return res;
}

OptimizerState init_optimizer(const ModelParams& params, double learning_rate, double weight_decay) {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight decay must be non-negative");
  OptimizerState s;
  s.learning_rate = learning_rate;
  s.weight_decay = weight_decay;
  s.entity_acc = EmbeddingTable(params.entity.rows(), params.dim);
  s.relation_acc = EmbeddingTable(params.relation.rows(), params.dim);
  s.time_acc = EmbeddingTable(params.time.rows(), params.dim);
  return s;
}

void sync_optimizer(OptimizerState& state, const ModelParams& params) {
  auto sync = [](EmbeddingTable& acc, const EmbeddingTable& t) {
    if (acc.rows() < t.rows()) acc.append_rows(t.rows() - acc.rows());
  };
  sync(state.entity_acc, params.entity);
  sync(state.relation_acc, params.relation);
  sync(state.time_acc, params.time);
}

namespace {

void adagrad_rows(EmbeddingTable& table, EmbeddingTable& acc, const SparseRows& grads,
                  const OptimizerState& st) {
  for (std::size_t slot = 0; slot < grads.size(); ++slot) {
    const auto id = grads.ids()[slot];
    const auto g = grads.row_at(slot);
    auto w = table.row(id);
    auto a = acc.row(id);
    for (std::size_t m = 0; m < g.size(); ++m) {
      a[m] += g[m] * g[m];
      const double decay = st.weight_decay * w[m];
      w[m] -= st.learning_rate * (g[m] / std::sqrt(a[m] + st.epsilon) + decay);
    }
  }
}

}  // namespace

void apply_step(ModelParams& params, OptimizerState& state, const SparseGrads& grads) {
  if (!grads.all_finite()) throw DivergenceError("non-finite gradient");
  sync_optimizer(state, params);
  adagrad_rows(params.entity, state.entity_acc, grads.entity, state);
  adagrad_rows(params.relation, state.relation_acc, grads.relation, state);
  adagrad_rows(params.time, state.time_acc, grads.time, state);
}

std::vector<EntityId> sample_negatives(Rng& rng, const Quadruple& positive, std::size_t k,
                                       std::size_t vocab_size) {
  if (k >= vocab_size)
    throw ConfigError("negatives per positive (" + std::to_string(k) +
                      ") must be smaller than the entity vocabulary (" + std::to_string(vocab_size) + ")");
  std::vector<EntityId> out(k);
  for (auto& id : out) {
    auto draw = static_cast<EntityId>(rng.uniform_index(vocab_size - 1));
    if (draw >= positive.object) ++draw;
    id = draw;
  }
  return out;
}

// ---- serialisation ---------------------------------------------------------

namespace {

constexpr char kParamsMagic[8] = {'T', 'K', 'G', 'P', 'A', 'R', 'M', '1'};
constexpr char kOptMagic[8] = {'T', 'K', 'G', 'O', 'P', 'T', 'M', '1'};

void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
void put_f64(std::ostream& out, double v) { out.write(reinterpret_cast<const char*>(&v), 8); }

std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 8)) throw DataError("truncated checkpoint");
  return v;
}

double get_f64(std::istream& in) {
  double v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 8)) throw DataError("truncated checkpoint");
  return v;
}

void put_table(std::ostream& out, const EmbeddingTable& t) {
  put_u64(out, t.rows());
  put_u64(out, t.dim());
  out.write(reinterpret_cast<const char*>(t.data().data()),
            static_cast<std::streamsize>(t.data().size() * sizeof(double)));
}

EmbeddingTable get_table(std::istream& in) {
  const auto rows = get_u64(in);
  const auto dim = get_u64(in);
  if (dim > (1u << 20) || rows > (1ull << 32)) throw DataError("implausible table shape in checkpoint");
  EmbeddingTable t(rows, dim);
  if (!in.read(reinterpret_cast<char*>(t.data().data()),
               static_cast<std::streamsize>(t.data().size() * sizeof(double))))
    throw DataError("truncated checkpoint");
  return t;
}

void expect_magic(std::istream& in, const char (&magic)[8]) {
  char buf[8];
  if (!in.read(buf, 8) || std::memcmp(buf, magic, 8) != 0) throw DataError("bad checkpoint section magic");
}

}  // namespace

void write_params(std::ostream& out, const ModelParams& p) {
  out.write(kParamsMagic, 8);
  put_u64(out, p.dim);
  put_u64(out, static_cast<std::uint64_t>(p.bucket_width));
  put_table(out, p.entity);
  put_table(out, p.relation);
  put_table(out, p.time);
}

ModelParams read_params(std::istream& in) {
  expect_magic(in, kParamsMagic);
  ModelParams p;
  p.dim = get_u64(in);
  p.bucket_width = static_cast<Timestamp>(get_u64(in));
  p.entity = get_table(in);
  p.relation = get_table(in);
  p.time = get_table(in);
  if (p.entity.dim() != p.dim || p.relation.dim() != p.dim || p.time.dim() != p.dim)
    throw DataError("checkpoint tables disagree on dimension");
  return p;
}

void write_optimizer(std::ostream& out, const OptimizerState& s) {
  out.write(kOptMagic, 8);
  put_f64(out, s.learning_rate);
  put_f64(out, s.weight_decay);
  put_f64(out, s.epsilon);
  put_table(out, s.entity_acc);
  put_table(out, s.relation_acc);
  put_table(out, s.time_acc);
}

OptimizerState read_optimizer(std::istream& in) {
  expect_magic(in, kOptMagic);
  OptimizerState s;
  s.learning_rate = get_f64(in);
  s.weight_decay = get_f64(in);
  s.epsilon = get_f64(in);
  s.entity_acc = get_table(in);
  s.relation_acc = get_table(in);
  s.time_acc = get_table(in);
  return s;
}

}  // namespace tkg
