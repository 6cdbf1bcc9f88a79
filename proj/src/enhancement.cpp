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

#include "tkg/enhancement.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

namespace tkg {

std::string to_string(DegreeDecay mode) {
  switch (mode) {
    case DegreeDecay::InverseLog: return "inverse-log";
    case DegreeDecay::InverseLinear: return "inverse-linear";
    case DegreeDecay::ConstantOne: return "constant-one";
  }
  return "?";
}

DegreeDecay parse_degree_decay(const std::string& name) {
  if (name == "inverse-log") return DegreeDecay::InverseLog;
  if (name == "inverse-linear") return DegreeDecay::InverseLinear;
  if (name == "constant-one") return DegreeDecay::ConstantOne;
  throw ConfigError("unknown degree decay '" + name +
                    "' (valid: inverse-log, inverse-linear, constant-one)");
}

void EnhancementConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("enhancement lambda must lie in [0, 1]");
  if (!(mu >= 0.0)) throw ConfigError("enhancement mu must be non-negative");
  if (max_similar < 1) throw ConfigError("enhancement max_similar must be >= 1");
}

SimilarityIndex::SimilarityIndex(std::size_t num_relations, std::size_t capacity)
    : capacity_(capacity), buffers_(num_relations) {
  if (capacity == 0) throw ConfigError("similarity index capacity must be >= 1");
}

void SimilarityIndex::record(const Quadruple& q) {
  if (q.time < last_time_)
    throw DataError("similarity index: time went backwards (" + std::to_string(q.time) + " < " +
                    std::to_string(last_time_) + ")");
  if (q.relation >= buffers_.size()) throw DataError("similarity index: relation id out of range");
  auto& buf = buffers_[q.relation];
  buf.push_back({q.subject, q.time});
  if (buf.size() > capacity_) buf.pop_front();
  last_time_ = q.time;
}

void SimilarityIndex::record(std::span<const Quadruple> quads) {
  for (const auto& q : quads) record(q);
}

std::vector<SimilarEntry> SimilarityIndex::similar(RelationId r, Timestamp t) const {
  if (r >= buffers_.size()) throw DataError("similarity index: relation id out of range");
  std::vector<SimilarEntry> out;
  for (const auto& e : buffers_[r])
    if (e.time < t) out.push_back(e);
  return out;
}

namespace {

constexpr char kIndexMagic[8] = {'T', 'K', 'G', 'S', 'I', 'D', 'X', '1'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw DataError("truncated similarity index");
  return v;
}

}  // namespace

void SimilarityIndex::write(std::ostream& out) const {
  out.write(kIndexMagic, 8);
  put<std::uint64_t>(out, capacity_);
  put<std::uint64_t>(out, buffers_.size());
  put<std::int64_t>(out, last_time_);
  for (const auto& buf : buffers_) {
    put<std::uint64_t>(out, buf.size());
    for (const auto& e : buf) {
      put<std::uint32_t>(out, e.subject);
      put<std::int64_t>(out, e.time);
    }
  }
}

SimilarityIndex SimilarityIndex::read(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kIndexMagic, 8) != 0)
    throw DataError("bad similarity index magic");
  SimilarityIndex idx;
  idx.capacity_ = get<std::uint64_t>(in);
  const auto n = get<std::uint64_t>(in);
  idx.last_time_ = get<std::int64_t>(in);
  if (n > (1u << 24)) throw DataError("implausible relation count in similarity index");
  idx.buffers_.resize(n);
  for (auto& buf : idx.buffers_) {
    const auto size = get<std::uint64_t>(in);
    if (size > idx.capacity_) throw DataError("similarity buffer exceeds capacity");
    for (std::uint64_t i = 0; i < size; ++i) {
      SimilarEntry e;
      e.subject = get<std::uint32_t>(in);
      e.time = get<std::int64_t>(in);
      buf.push_back(e);
    }
  }
  return idx;
}

TemporalView::TemporalView(const SimilarityIndex& base, std::span<const Quadruple> events)
    : base_(base), extra_(base.num_relations()) {
  Timestamp last = base.last_time();
  for (const auto& q : events) {
    if (q.time < last) throw DataError("temporal view: events must be time-ordered and follow the index");
    if (q.relation >= extra_.size()) throw DataError("temporal view: relation id out of range");
    extra_[q.relation].push_back({q.subject, q.time});
    last = q.time;
  }
}

std::vector<SimilarEntry> TemporalView::similar(RelationId r, Timestamp t) const {
  if (r >= extra_.size()) throw DataError("temporal view: relation id out of range");
  const auto& extra = extra_[r];
  const auto end = std::lower_bound(extra.begin(), extra.end(), t,
                                    [](const SimilarEntry& e, Timestamp v) { return e.time < v; });
  const auto n = base_.capacity();
  const auto from_extra = std::min<std::size_t>(n, static_cast<std::size_t>(end - extra.begin()));
  std::vector<SimilarEntry> out;
  if (from_extra < n) {
    auto older = base_.similar(r, t);
    const auto keep = std::min(older.size(), n - from_extra);
    out.assign(older.end() - static_cast<std::ptrdiff_t>(keep), older.end());
  }
  out.insert(out.end(), end - static_cast<std::ptrdiff_t>(from_extra), end);
  return out;
}

double recency_weight(double mu, Timestamp t, Timestamp t_i) {
  return 1.0 / (1.0 + std::exp(mu * static_cast<double>(t - t_i)));
}

double degree_decay(std::uint64_t degree, DegreeDecay mode) {
  const auto d = static_cast<double>(degree);
  switch (mode) {
    case DegreeDecay::InverseLog: return 1.0 / (1.0 + std::log1p(d));
    case DegreeDecay::InverseLinear: return 1.0 / (1.0 + d);
    case DegreeDecay::ConstantOne: return 1.0;
  }
  return 1.0;
}

std::vector<double> aggregate_similar(const ModelParams& params, std::span<const SimilarEntry> entries,
                                      Timestamp t, double mu, std::span<const double> base) {
  if (entries.empty()) return {base.begin(), base.end()};
  std::vector<double> g(params.dim, 0.0);
  double total = 0.0;
  for (const auto& e : entries) {
    const double w = recency_weight(mu, t, e.time);
    total += w;
    const auto row = params.entity.row(e.subject);
    for (std::size_t k = 0; k < params.dim; ++k) g[k] += w * row[k];
  }
  for (auto& v : g) v /= total;
  return g;
}

std::vector<double> combine(std::span<const double> f, std::span<const double> g, std::uint64_t degree,
                            const EnhancementConfig& cfg) {
  if (f.size() != g.size()) throw DataError("combine: dimension mismatch");
  const double a = cfg.lambda;
  const double b = degree_decay(degree, cfg.decay) * (1.0 - cfg.lambda);
  std::vector<double> out(f.size());
  for (std::size_t k = 0; k < f.size(); ++k) out[k] = a * f[k] + b * g[k];
  return out;
}

std::vector<EnhancedQuery> Enhancer::forward(const ModelParams& params, const SimilaritySource& source,
                                             std::span<const Quadruple> queries, std::span<double> out) {
  const std::size_t d = params.dim;
  std::vector<EnhancedQuery> records(queries.size());
  std::vector<double> weights;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto& q = queries[i];
    auto& rec = records[i];
    rec.subject = q.subject;
    auto dst = out.subspan(i * d, d);
    const auto f = params.entity.row(q.subject);
    ++counters_.queries;

    auto entries = source.similar(q.relation, q.time);
    if (cfg_.exclude_self)
      std::erase_if(entries, [&](const SimilarEntry& e) { return e.subject == q.subject; });
    if (entries.size() > cfg_.max_similar)
      entries.erase(entries.begin(), entries.end() - static_cast<std::ptrdiff_t>(cfg_.max_similar));
    if (entries.empty()) {
      std::copy(f.begin(), f.end(), dst.begin());
      rec.passthrough = true;
      rec.base_coeff = 1.0;
      continue;
    }

    weights.resize(entries.size());
    double total = 0.0;
    for (std::size_t j = 0; j < entries.size(); ++j) {
      weights[j] = recency_weight(cfg_.mu, q.time, entries[j].time);
      total += weights[j];
    }
    const double blend = degree_decay(tracker_.degree(q.subject), cfg_.decay) * (1.0 - cfg_.lambda);
    rec.passthrough = false;
    rec.base_coeff = cfg_.lambda;
    rec.sources.resize(entries.size());
    rec.source_coeffs.resize(entries.size());
    for (std::size_t k = 0; k < d; ++k) dst[k] = cfg_.lambda * f[k];
    for (std::size_t j = 0; j < entries.size(); ++j) {
      const double c = blend * weights[j] / total;
      rec.sources[j] = entries[j].subject;
      rec.source_coeffs[j] = c;
      const auto row = params.entity.row(entries[j].subject);
      for (std::size_t k = 0; k < d; ++k) dst[k] += c * row[k];
    }
    counters_.rows_retrieved += entries.size();
    counters_.multiply_adds += entries.size() * d;
  }
  return records;
}

void Enhancer::backward(std::span<const EnhancedQuery> records, std::span<const double> override_grads,
                        std::size_t dim, SparseGrads& grads) const {
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    const auto g = override_grads.subspan(i * dim, dim);
    {
      auto dst = grads.entity.row(rec.subject);
      for (std::size_t k = 0; k < dim; ++k) dst[k] += rec.base_coeff * g[k];
    }
    if (rec.passthrough || cfg_.stop_gradient) continue;
    for (std::size_t j = 0; j < rec.sources.size(); ++j) {
      auto dst = grads.entity.row(rec.sources[j]);
      const double c = rec.source_coeffs[j];
      for (std::size_t k = 0; k < dim; ++k) dst[k] += c * g[k];
    }
  }
}

}  // namespace tkg
