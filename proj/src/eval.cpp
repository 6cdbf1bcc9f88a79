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

#include "tkg/eval.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <thread>

#include <fmt/format.h>

namespace tkg {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::size_t KnownFacts::KeyHash::operator()(const Key& k) const noexcept {
  std::uint64_t h = k.s;
  h = h * 0x9E3779B97F4A7C15ULL ^ k.r;
  h = h * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint64_t>(k.t);
  return static_cast<std::size_t>(h ^ (h >> 29));
}

void KnownFacts::add(const Quadruple& q) {
  auto& objs = facts_[{q.subject, q.relation, q.time}];
  auto it = std::lower_bound(objs.begin(), objs.end(), q.object);
  if (it == objs.end() || *it != q.object) objs.insert(it, q.object);
}

void KnownFacts::add(std::span<const Quadruple> quads) {
  for (const auto& q : quads) add(q);
}

std::span<const EntityId> KnownFacts::objects(EntityId s, RelationId r, Timestamp t) const {
  if (auto it = facts_.find({s, r, t}); it != facts_.end()) return it->second;
  return {};
}

std::size_t rank_from_scores(std::span<const double> scores, EntityId truth,
                             std::span<const EntityId> excluded) {
  const double target = scores[truth];
  std::size_t greater = 0;
  std::size_t ties = 0;
  auto ex = excluded.begin();
  for (std::size_t c = 0; c < scores.size(); ++c) {
    if (c == truth) continue;
    while (ex != excluded.end() && *ex < c) ++ex;
    if (ex != excluded.end() && *ex == c) continue;
    if (scores[c] > target)
      ++greater;
    else if (scores[c] == target)
      ++ties;
  }
  return 1 + greater + (ties + 1) / 2;
}

namespace {

QueryRanks rank_one(const ScoringView& view, Enhancer* enhancer, const Quadruple& q, const KnownFacts& facts,
                    std::vector<double>& scores, std::vector<double>& subject) {
  const auto& params = *view.params;
  if (q.relation >= params.relation.rows() ||
      (view.num_base_relations && q.relation >= 2 * view.num_base_relations))
    throw DataError("rank_query: unknown relation id " + std::to_string(q.relation));
  if (q.subject >= params.entity.rows() || q.object >= params.entity.rows())
    throw DataError("rank_query: entity id out of range");
  subject.resize(params.dim);
  if (enhancer) {
    enhancer->forward(params, *view.similarity, std::span(&q, 1), subject);
  } else {
    const auto row = params.entity.row(q.subject);
    std::copy(row.begin(), row.end(), subject.begin());
  }
  scores.resize(params.entity.rows());
  score_all_objects(params, subject, q.relation, q.time, scores);
  QueryRanks out;
  out.raw = {q, rank_from_scores(scores, q.object), false};
  out.filtered = {q, rank_from_scores(scores, q.object, facts.objects(q.subject, q.relation, q.time)), true};
  return out;
}

}  // namespace

QueryRanks rank_query(const ScoringView& view, const Quadruple& query, const KnownFacts& facts) {
  std::vector<double> scores, subject;
  if (view.similarity && view.enhancement && view.tracker) {
    Enhancer enhancer(*view.enhancement, *view.tracker);
    return rank_one(view, &enhancer, query, facts, scores, subject);
  }
  return rank_one(view, nullptr, query, facts, scores, subject);
}

std::vector<QueryRanks> rank_queries(const ScoringView& view, std::span<const Quadruple> queries,
                                     const KnownFacts& facts, std::size_t workers) {
  std::vector<QueryRanks> out(queries.size());
  const bool enhanced = view.similarity && view.enhancement && view.tracker;
  auto work = [&](std::size_t begin, std::size_t end) {
    std::vector<double> scores, subject;
    std::optional<Enhancer> enhancer;
    if (enhanced) enhancer.emplace(*view.enhancement, *view.tracker);
    for (std::size_t i = begin; i < end; ++i)
      out[i] = rank_one(view, enhancer ? &*enhancer : nullptr, queries[i], facts, scores, subject);
  };
  workers = std::max<std::size_t>(1, std::min(workers, queries.size() / 64 + 1));
  if (workers == 1) {
    work(0, queries.size());
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> threads;
    const std::size_t chunk = (queries.size() + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t b = std::min(queries.size(), w * chunk);
      const std::size_t e = std::min(queries.size(), b + chunk);
      threads.emplace_back([&, w, b, e] {
        try {
          work(b, e);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
  return out;
}

SetMetrics metrics(std::span<const std::size_t> ranks) {
  SetMetrics m;
  if (ranks.empty()) return m;
  for (auto r : ranks) {
    m.mrr += 1.0 / static_cast<double>(r);
    m.hit1 += r <= 1 ? 1.0 : 0.0;
    m.hit3 += r <= 3 ? 1.0 : 0.0;
    m.hit10 += r <= 10 ? 1.0 : 0.0;
  }
  const auto n = static_cast<double>(ranks.size());
  m.mrr /= n;
  m.hit1 /= n;
  m.hit3 /= n;
  m.hit10 /= n;
  m.count = ranks.size();
  return m;
}

SetMetrics metrics(std::span<const RankResult> ranks) {
  std::vector<std::size_t> r;
  r.reserve(ranks.size());
  for (const auto& x : ranks) r.push_back(x.rank);
  return metrics(r);
}

SetMetrics average(std::span<const SetMetrics> sets) {
  SetMetrics m;
  if (sets.empty()) return m;
  for (const auto& s : sets) {
    m.mrr += s.mrr;
    m.hit1 += s.hit1;
    m.hit3 += s.hit3;
    m.hit10 += s.hit10;
    m.count += s.count;
  }
  const auto n = static_cast<double>(sets.size());
  m.mrr /= n;
  m.hit1 /= n;
  m.hit3 /= n;
  m.hit10 /= n;
  return m;
}

double metric_value(const SetMetrics& m, const std::string& name) {
  if (name == "mrr") return m.mrr;
  if (name == "hit1") return m.hit1;
  if (name == "hit3") return m.hit3;
  if (name == "hit10") return m.hit10;
  throw ConfigError("unknown metric '" + name + "'");
}

ForgettingCurve forgetting_curve(const std::vector<std::vector<double>>& p) {
  ForgettingCurve c;
  c.p = p;
  for (std::size_t t = 0; t < p.size(); ++t) {
    if (p[t].size() != t + 1) throw DataError("forgetting_curve: matrix is not lower-triangular");
    double sum = 0.0;
    for (double v : p[t]) sum += v;
    c.P.push_back(sum / static_cast<double>(t + 1));
  }
  return c;
}

std::vector<Quadruple> inductive_subset(std::span<const Quadruple> test, const std::set<EntityId>& unseen,
                                        bool subject_only) {
  std::vector<Quadruple> out;
  for (const auto& q : test)
    if (unseen.contains(q.subject) || (!subject_only && unseen.contains(q.object))) out.push_back(q);
  return out;
}

BucketReport bucketize(std::span<const std::size_t> ranks, std::span<const std::uint64_t> frequencies,
                       std::span<const std::uint64_t> lower_bounds) {
  if (ranks.size() != frequencies.size()) throw DataError("bucketize: ranks/frequencies size mismatch");
  if (lower_bounds.empty() || lower_bounds.front() != 0 ||
      !std::is_sorted(lower_bounds.begin(), lower_bounds.end()) ||
      std::adjacent_find(lower_bounds.begin(), lower_bounds.end()) != lower_bounds.end())
    throw ConfigError("bucket bounds must start at 0 and strictly increase");
  std::vector<std::vector<std::size_t>> members(lower_bounds.size());
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    const auto it = std::upper_bound(lower_bounds.begin(), lower_bounds.end(), frequencies[i]);
    members[static_cast<std::size_t>(it - lower_bounds.begin()) - 1].push_back(ranks[i]);
  }
  BucketReport rep;
  for (std::size_t b = 0; b < lower_bounds.size(); ++b) {
    Bucket bucket;
    bucket.lo = lower_bounds[b];
    bucket.hi = b + 1 < lower_bounds.size() ? lower_bounds[b + 1] : std::numeric_limits<std::uint64_t>::max();
    bucket.metrics = metrics(members[b]);
    rep.buckets.push_back(bucket);
  }
  return rep;
}

SetMetrics StepMetrics::average(const std::string& protocol) const {
  return tkg::average(test.at(protocol));
}

void compute_curves(MetricReport& report) {
  report.curves.clear();
  for (const auto& name : metric_names()) {
    std::vector<std::vector<double>> p;
    for (const auto& step : report.steps) {
      std::vector<double> row;
      for (const auto& m : step.test.at("filtered")) row.push_back(metric_value(m, name));
      p.push_back(std::move(row));
    }
    report.curves[name] = forgetting_curve(p);
  }
}

// ---- JSON -------------------------------------------------------------------

namespace {

json set_json(const SetMetrics& m) {
  return {{"mrr", m.mrr}, {"hit1", m.hit1}, {"hit3", m.hit3}, {"hit10", m.hit10}, {"count", m.count}};
}

SetMetrics parse_set(const json& j) {
  return {j.at("mrr"), j.at("hit1"), j.at("hit3"), j.at("hit10"), j.at("count")};
}

std::string bound_string(std::uint64_t hi) {
  return hi == std::numeric_limits<std::uint64_t>::max() ? "inf" : std::to_string(hi);
}

// JSON null stands for an unbounded upper edge.
json bound_json(std::uint64_t hi) {
  return hi == std::numeric_limits<std::uint64_t>::max() ? json(nullptr) : json(hi);
}

std::uint64_t parse_bound(const json& j) {
  if (j.is_null()) return std::numeric_limits<std::uint64_t>::max();
  return j.get<std::uint64_t>();
}

}  // namespace

json step_metrics_json(const StepMetrics& step) {
  json out;
  out["meta"] = {{"step", step.step}, {"checkpoint", step.checkpoint}};
  for (const auto& [protocol, sets] : step.test) {
    json p;
    for (std::size_t j = 0; j < sets.size(); ++j) p["test_" + std::to_string(j + 1)] = set_json(sets[j]);
    p["current"] = set_json(step.current(protocol));
    p["average"] = set_json(step.average(protocol));
    if (auto it = step.valid_current.find(protocol); it != step.valid_current.end())
      p["valid_" + std::to_string(step.step)] = set_json(it->second);
    if (auto it = step.inductive_current.find(protocol); it != step.inductive_current.end())
      p["inductive_" + std::to_string(step.step)] = set_json(it->second);
    out[protocol] = p;
  }
  return out;
}

StepMetrics parse_step_metrics(const json& j) {
  StepMetrics s;
  s.step = j.at("meta").at("step");
  s.checkpoint = j.at("meta").at("checkpoint");
  for (const auto& [protocol, p] : j.items()) {
    if (protocol == "meta") continue;
    auto& sets = s.test[protocol];
    for (int k = 1; p.contains("test_" + std::to_string(k)); ++k)
      sets.push_back(parse_set(p.at("test_" + std::to_string(k))));
    const auto valid_key = "valid_" + std::to_string(s.step);
    if (p.contains(valid_key)) s.valid_current[protocol] = parse_set(p.at(valid_key));
    const auto ind_key = "inductive_" + std::to_string(s.step);
    if (p.contains(ind_key)) s.inductive_current[protocol] = parse_set(p.at(ind_key));
  }
  return s;
}

json report_json(const MetricReport& r) {
  json steps = json::array();
  for (const auto& s : r.steps) steps.push_back(step_metrics_json(s));
  json curves;
  for (const auto& [name, c] : r.curves) curves[name] = {{"p", c.p}, {"P", c.P}};
  json buckets = json::array();
  for (const auto& b : r.buckets.buckets)
    buckets.push_back({{"lo", b.lo}, {"hi", bound_json(b.hi)}, {"metrics", set_json(b.metrics)}});
  return {{"format", "tkg-report/1"},
          {"strategy", r.strategy},
          {"seed", r.seed},
          {"inputs_hash", r.inputs_hash},
          {"steps", steps},
          {"curves", curves},
          {"buckets", buckets},
          {"inductive", {{"first", set_json(r.inductive_first)}, {"average", set_json(r.inductive_average)}}}};
}

MetricReport parse_report(const json& j) {
  if (j.value("format", "") != "tkg-report/1") throw DataError("unsupported report format");
  MetricReport r;
  r.strategy = j.at("strategy");
  r.seed = j.at("seed");
  r.inputs_hash = j.at("inputs_hash");
  for (const auto& s : j.at("steps")) r.steps.push_back(parse_step_metrics(s));
  for (const auto& [name, c] : j.at("curves").items()) {
    ForgettingCurve curve;
    curve.p = c.at("p").get<std::vector<std::vector<double>>>();
    curve.P = c.at("P").get<std::vector<double>>();
    r.curves[name] = curve;
  }
  for (const auto& b : j.at("buckets"))
    r.buckets.buckets.push_back({b.at("lo"), parse_bound(b.at("hi")), parse_set(b.at("metrics"))});
  r.inductive_first = parse_set(j.at("inductive").at("first"));
  r.inductive_average = parse_set(j.at("inductive").at("average"));
  return r;
}

std::string curve_csv(std::span<const MetricReport> reports) {
  std::string out = "step,eval_set,metric,value,strategy,seed\n";
  for (const auto& r : reports) {
    for (const auto& [name, c] : r.curves) {
      for (std::size_t t = 0; t < c.p.size(); ++t) {
        for (std::size_t j = 0; j < c.p[t].size(); ++j)
          out += fmt::format("{},test_{},{},{},{},{}\n", t + 1, j + 1, name, c.p[t][j], r.strategy, r.seed);
        out += fmt::format("{},P,{},{},{},{}\n", t + 1, name, c.P[t], r.strategy, r.seed);
      }
    }
  }
  return out;
}

std::string buckets_csv(std::span<const MetricReport> reports) {
  std::string out = "bucket_lo,bucket_hi,metric,value,count,strategy,seed\n";
  for (const auto& r : reports)
    for (const auto& b : r.buckets.buckets)
      for (const auto& name : metric_names())
        out += fmt::format("{},{},{},{},{},{},{}\n", b.lo, bound_string(b.hi), name, metric_value(b.metrics, name),
                           b.metrics.count, r.strategy, r.seed);
  return out;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace

void emit_report(const MetricReport& report, const fs::path& dir) {
  if (report.steps.empty()) throw DataError("emit_report: report has no metrics");
  for (const auto& s : report.steps)
    for (const auto& [protocol, sets] : s.test)
      if (sets.empty()) throw DataError("emit_report: step " + std::to_string(s.step) + " has no test metrics");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
  write_text(dir / "report.json", report_json(report).dump(2) + "\n");
  const std::span<const MetricReport> one(&report, 1);
  write_text(dir / "curve.csv", curve_csv(one));
  write_text(dir / "buckets.csv", buckets_csv(one));
}

MetricReport read_report(const fs::path& dir) {
  std::ifstream in(dir / "report.json");
  if (!in) throw DataError("no report.json in " + dir.string());
  try {
    return parse_report(json::parse(in));
  } catch (const json::exception& e) {
    throw DataError(dir.string() + "/report.json: " + e.what());
  }
}

}  // namespace tkg
