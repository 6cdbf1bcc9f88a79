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


#include "tkg/synth.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

namespace tkg {

void SynthConfig::validate() const {
  if (num_entities < 1 || num_relations < 1 || num_quads < 1 || num_days < 1)
    throw ConfigError("synth sizes must be >= 1");
  if (!(zipf_exponent > 0.0)) throw ConfigError("zipf exponent must be positive");
  if (!(similarity_signal >= 0.0 && similarity_signal <= 1.0)) throw ConfigError("similarity signal must lie in [0, 1]");
  if (!(drift_rate >= 0.0 && drift_rate <= 1.0)) throw ConfigError("drift rate must lie in [0, 1]");
  if (drift_period_days < 1) throw ConfigError("drift period must be >= 1 day");
  if (pool_size < 1) throw ConfigError("pool size must be >= 1");
  if (!parse_day(start_date)) throw ConfigError("start date must be YYYY-MM-DD: " + start_date);
}

namespace {

std::size_t draw_cdf(const std::vector<double>& cdf, Rng& rng) {
  const double u = rng.uniform01() * cdf.back();
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end()) --it;
  return static_cast<std::size_t>(it - cdf.begin());
}

void redraw_pool(std::vector<EntityId>& pool, std::size_t size, std::size_t num_entities, Rng& rng) {
  pool.clear();
  for (std::size_t i = 0; i < size; ++i) pool.push_back(static_cast<EntityId>(rng.uniform_index(num_entities)));
}

}  // namespace

std::vector<Quadruple> generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const std::size_t n = cfg.num_entities;

  // Zipf over ranks, mapped onto entities through a random permutation
  std::vector<double> cdf(n);
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    acc += std::pow(static_cast<double>(k + 1), -cfg.zipf_exponent);
    cdf[k] = acc;
  }
  std::vector<EntityId> by_rank(n);
  for (std::size_t i = 0; i < n; ++i) by_rank[i] = static_cast<EntityId>(i);
  rng.shuffle(by_rank.begin(), by_rank.end());

  std::vector<Timestamp> times(cfg.num_quads);
  for (auto& t : times) t = static_cast<Timestamp>(rng.uniform_index(cfg.num_days));
  std::sort(times.begin(), times.end());

  std::vector<std::vector<EntityId>> pools(cfg.num_relations);
  for (auto& p : pools) redraw_pool(p, cfg.pool_size, n, rng);
  std::size_t period = 0;

  std::vector<Quadruple> out;
  out.reserve(cfg.num_quads);
  for (const Timestamp t : times) {
    const auto p = static_cast<std::size_t>(t) / cfg.drift_period_days;
    for (; period < p; ++period)
      for (auto& pool : pools)
        if (rng.uniform01() < cfg.drift_rate) redraw_pool(pool, cfg.pool_size, n, rng);
    Quadruple q;
    q.time = t;
    q.subject = by_rank[draw_cdf(cdf, rng)];
    q.relation = static_cast<RelationId>(rng.uniform_index(cfg.num_relations));
    if (cfg.similarity_signal > 0.0 && rng.uniform01() < cfg.similarity_signal) {
      const auto& pool = pools[q.relation];
      q.object = pool[rng.uniform_index(pool.size())];
    } else {
      q.object = static_cast<EntityId>(rng.uniform_index(n));
    }
    out.push_back(q);
  }
  return out;
}

Vocabulary synth_vocabulary(const SynthConfig& cfg) {
  Vocabulary v;
  const auto ew = std::to_string(cfg.num_entities - 1).size();
  const auto rw = std::to_string(cfg.num_relations - 1).size();
  for (std::size_t i = 0; i < cfg.num_entities; ++i) v.entities.intern(fmt::format("e{:0{}}", i, ew));
  for (std::size_t i = 0; i < cfg.num_relations; ++i) v.relations.intern(fmt::format("r{:0{}}", i, rw));
  return v;
}

void write_tsv(std::ostream& out, std::span<const Quadruple> quads, const Vocabulary& vocab,
               const std::string& start_date) {
  const auto start = parse_day(start_date);
  if (!start) throw ConfigError("start date must be YYYY-MM-DD: " + start_date);
  for (const auto& q : quads) {
    const std::chrono::sys_days day{std::chrono::days{*start + q.time}};
    const std::chrono::year_month_day ymd{day};
    out << fmt::format("{}\t{}\t{}\t{:04}-{:02}-{:02}\n", vocab.entities.label(q.subject),
                       vocab.relations.label(q.relation), vocab.entities.label(q.object), int(ymd.year()),
                       unsigned(ymd.month()), unsigned(ymd.day()));
  }
}

void write_tsv(const std::filesystem::path& path, std::span<const Quadruple> quads, const Vocabulary& vocab,
               const std::string& start_date) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_tsv(out, quads, vocab, start_date);
  if (!out) throw DataError("write failed: " + path.string());
}

TailStats verify_tail(std::span<const Quadruple> quads, std::uint64_t rare_threshold) {
  if (quads.empty()) throw DataError("verify_tail: empty corpus");
  FrequencyTracker tracker;
  tracker.observe(quads);
  std::vector<std::uint64_t> freq;
  for (const auto f : tracker.frequencies())
    if (f > 0) freq.push_back(f);
  std::sort(freq.begin(), freq.end(), std::greater<>());

  TailStats s;
  s.num_entities = freq.size();
  s.rare_fraction = static_cast<double>(std::count_if(freq.begin(), freq.end(),
                                                      [&](std::uint64_t f) { return f < rare_threshold; })) /
                    static_cast<double>(freq.size());
  if (freq.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const auto m = static_cast<double>(freq.size());
    for (std::size_t i = 0; i < freq.size(); ++i) {
      const double x = std::log(static_cast<double>(i + 1));
      const double y = std::log(static_cast<double>(freq[i]));
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    s.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  }
  return s;
}

}  // namespace tkg
