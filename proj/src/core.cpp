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

#include "tkg/core.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace tkg {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  // splitmix64 finaliser over the combined value
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint32_t LabelMap::intern(std::string_view label) {
  std::string key(label);
  if (auto it = ids_.find(key); it != ids_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(labels_.size());
  labels_.push_back(key);
  ids_.emplace(std::move(key), id);
  return id;
}

std::optional<std::uint32_t> LabelMap::find(std::string_view label) const {
  if (auto it = ids_.find(std::string(label)); it != ids_.end()) return it->second;
  return std::nullopt;
}

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

template <typename T>
std::optional<T> parse_int(std::string_view s) {
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

}  // namespace

std::optional<Timestamp> parse_day(std::string_view field) {
  field = trim(field);
  if (field.empty()) return std::nullopt;
  if (field.size() == 10 && field[4] == '-' && field[7] == '-') {
    auto y = parse_int<int>(field.substr(0, 4));
    auto m = parse_int<unsigned>(field.substr(5, 2));
    auto d = parse_int<unsigned>(field.substr(8, 2));
    if (!y || !m || !d) return std::nullopt;
    const std::chrono::year_month_day ymd{std::chrono::year{*y}, std::chrono::month{*m},
                                          std::chrono::day{*d}};
    if (!ymd.ok()) return std::nullopt;
    return std::chrono::sys_days{ymd}.time_since_epoch().count();
  }
  return parse_int<Timestamp>(field);
}

std::vector<Quadruple> parse_quadruple_stream(std::istream& in, Vocabulary& vocab,
                                              const std::string& source_name) {
  struct Raw {
    EntityId s;
    RelationId r;
    EntityId o;
    Timestamp day;
  };
  std::vector<Raw> raw;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty()) continue;
    const auto fields = split_tabs(view);
    auto fail = [&](const std::string& why) {
      return DataError(source_name + ":" + std::to_string(line_no) + ": " + why);
    };
    if (fields.size() < 4) throw fail("expected at least 4 tab-separated fields");
    const auto s = trim(fields[0]);
    const auto r = trim(fields[1]);
    const auto o = trim(fields[2]);
    if (s.empty() || r.empty() || o.empty()) throw fail("empty subject, relation or object");
    const auto day = parse_day(fields[3]);
    if (!day) throw fail("unparseable date '" + std::string(fields[3]) + "'");
    const EntityId sid = vocab.entities.intern(s);
    const RelationId rid = vocab.relations.intern(r);
    const EntityId oid = vocab.entities.intern(o);
    raw.push_back({sid, rid, oid, *day});
  }
  if (raw.empty()) throw DataError(source_name + ": no quadruples");

  Timestamp origin = raw.front().day;
  for (const auto& q : raw) origin = std::min(origin, q.day);
  std::vector<Quadruple> quads;
  quads.reserve(raw.size());
  for (const auto& q : raw) quads.push_back({q.s, q.r, q.o, q.day - origin});
  std::stable_sort(quads.begin(), quads.end(),
                   [](const Quadruple& a, const Quadruple& b) { return a.time < b.time; });
  return quads;
}

std::vector<Quadruple> parse_quadruple_file(const fs::path& path, Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_quadruple_stream(in, vocab, path.string());
}

void SnapshotConfig::validate() const {
  if (!(initial_fraction > 0.0 && initial_fraction < 1.0))
    throw ConfigError("initial_fraction must lie in (0, 1)");
  if (window_days < 1) throw ConfigError("window_days must be >= 1");
  if (!(split.train > 0.0 && split.valid > 0.0 && split.test > 0.0))
    throw ConfigError("split fractions must all be positive");
  if (std::abs(split.train + split.valid + split.test - 1.0) > 1e-9)
    throw ConfigError("split fractions must sum to 1");
}

std::vector<Timestamp> distinct_times(std::span<const Quadruple> quads) {
  std::vector<Timestamp> times;
  times.reserve(quads.size());
  for (const auto& q : quads) times.push_back(q.time);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return times;
}

std::vector<Snapshot> build_snapshots(std::span<const Quadruple> quads, const SnapshotConfig& cfg) {
  cfg.validate();
  if (!std::is_sorted(quads.begin(), quads.end(),
                      [](const Quadruple& a, const Quadruple& b) { return a.time < b.time; }))
    throw DataError("build_snapshots: quads must be sorted by time");
  const auto days = distinct_times(quads);
  if (days.size() < 2) throw DataError("build_snapshots: need at least 2 distinct timestamps");

  const auto initial = static_cast<std::size_t>(
      std::ceil(cfg.initial_fraction * static_cast<double>(days.size()) - 1e-12));
  if (initial >= days.size())
    throw DataError("build_snapshots: initial snapshot would consume every timestamp");

  // Start day of every snapshot, as an index into `days`.
  std::vector<std::size_t> starts{0};
  for (std::size_t i = std::max<std::size_t>(initial, 1); i < days.size();
       i += static_cast<std::size_t>(cfg.window_days))
    starts.push_back(i);

  std::vector<Snapshot> out(starts.size());
  for (std::size_t k = 0; k < starts.size(); ++k) {
    out[k].index = static_cast<int>(k + 1);
    out[k].begin = days[starts[k]];
    out[k].end = k + 1 < starts.size() ? days[starts[k + 1]] : days.back() + 1;
  }
  std::size_t k = 0;
  for (const auto& q : quads) {
    while (q.time >= out[k].end) ++k;
    out[k].quads.push_back(q);
  }
  return out;
}

TaskSplit split_snapshot(const Snapshot& snapshot, const SplitFractions& f) {
  if (!(f.train > 0.0 && f.valid > 0.0 && f.test > 0.0))
    throw ConfigError("split fractions must all be positive");
  if (std::abs(f.train + f.valid + f.test - 1.0) > 1e-9)
    throw ConfigError("split fractions must sum to 1");
  const auto days = distinct_times(snapshot.quads);
  const std::size_t m = days.size();
  if (m < 3)
    throw DataError("snapshot " + std::to_string(snapshot.index) +
                    " has fewer than 3 distinct timestamps");
  auto count = [m](double frac) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(frac * static_cast<double>(m))));
  };
  std::size_t n_test = count(f.test);
  std::size_t n_valid = count(f.valid);
  while (n_test + n_valid > m - 1) {
    if (n_test >= n_valid && n_test > 1)
      --n_test;
    else
      --n_valid;
  }
  const std::size_t n_train = m - n_valid - n_test;
  const Timestamp valid_start = days[n_train];
  const Timestamp test_start = days[n_train + n_valid];

  TaskSplit split;
  for (const auto& q : snapshot.quads) {
    if (q.time < valid_start)
      split.train.push_back(q);
    else if (q.time < test_start)
      split.valid.push_back(q);
    else
      split.test.push_back(q);
  }
  return split;
}

void FrequencyTracker::grow(EntityId e) {
  if (e >= freq_.size()) {
    freq_.resize(e + 1, 0);
    subject_.resize(e + 1, 0);
    neighbours_.resize(e + 1);
  }
}

void FrequencyTracker::observe(const Quadruple& q) {
  grow(std::max(q.subject, q.object));
  ++freq_[q.subject];
  ++freq_[q.object];
  ++subject_[q.subject];
  neighbours_[q.subject].insert(q.object);
  neighbours_[q.object].insert(q.subject);
  ++total_;
}

void FrequencyTracker::observe(std::span<const Quadruple> quads) {
  for (const auto& q : quads) observe(q);
}

std::set<EntityId> unseen_entities(std::span<const Snapshot> history,
                                   std::span<const Quadruple> current_train,
                                   std::size_t vocab_size) {
  std::vector<char> seen(vocab_size, 0);
  auto mark = [&](const Quadruple& q) {
    if (q.subject < vocab_size) seen[q.subject] = 1;
    if (q.object < vocab_size) seen[q.object] = 1;
  };
  for (const auto& snap : history)
    for (const auto& q : snap.quads) mark(q);
  for (const auto& q : current_train) mark(q);
  std::set<EntityId> out;
  for (std::size_t e = 0; e < vocab_size; ++e)
    if (!seen[e]) out.insert(static_cast<EntityId>(e));
  return out;
}

std::vector<Quadruple> with_inverses(std::span<const Quadruple> quads, std::size_t num_relations) {
  std::vector<Quadruple> out;
  out.reserve(quads.size() * 2);
  for (const auto& q : quads) {
    out.push_back(q);
    out.push_back(inverse_of(q, num_relations));
  }
  return out;
}

std::vector<Quadruple> Bundle::all_quads() const {
  std::vector<Quadruple> out;
  for (const auto& s : snapshots) out.insert(out.end(), s.quads.begin(), s.quads.end());
  return out;
}

Bundle make_bundle(Vocabulary vocab, std::span<const Quadruple> quads, const SnapshotConfig& cfg) {
  Bundle b;
  b.vocab = std::move(vocab);
  b.config = cfg;
  b.snapshots = build_snapshots(quads, cfg);
  for (const auto& s : b.snapshots) b.tasks.push_back(split_snapshot(s, cfg.split));
  return b;
}

namespace {

void write_quads(const fs::path& path, std::span<const Quadruple> quads, const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& q : quads)
    out << vocab.entities.label(q.subject) << '\t' << vocab.relations.label(q.relation) << '\t'
        << vocab.entities.label(q.object) << '\t' << q.time << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<Quadruple> read_quads(const fs::path& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<Quadruple> quads;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty()) continue;
    const auto fields = split_tabs(view);
    auto fail = [&](const std::string& why) {
      return DataError(path.string() + ":" + std::to_string(line_no) + ": " + why);
    };
    if (fields.size() < 4) throw fail("expected at least 4 tab-separated fields");
    const auto s = vocab.entities.find(fields[0]);
    const auto r = vocab.relations.find(fields[1]);
    const auto o = vocab.entities.find(fields[2]);
    const auto t = parse_int<Timestamp>(trim(fields[3]));
    if (!s || !r || !o) throw fail("label not in bundle vocabulary");
    if (!t) throw fail("bundle timestamps must be integer day indexes");
    quads.push_back({*s, *r, *o, *t});
  }
  return quads;
}

void write_labels(const fs::path& path, const LabelMap& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& l : labels.labels()) out << l << '\n';
}

LabelMap read_labels(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  LabelMap labels;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (labels.find(line)) throw DataError(path.string() + ": duplicate label " + line);
    labels.intern(line);
  }
  return labels;
}

}  // namespace

void write_bundle(const Bundle& bundle, const fs::path& dir) {
  fs::create_directories(dir);
  write_labels(dir / "entities.txt", bundle.vocab.entities);
  write_labels(dir / "relations.txt", bundle.vocab.relations);

  json snaps = json::array();
  for (std::size_t k = 0; k < bundle.snapshots.size(); ++k) {
    const auto& snap = bundle.snapshots[k];
    const auto& task = bundle.tasks[k];
    const auto sub = dir / ("snapshot_" + std::to_string(snap.index));
    fs::create_directories(sub);
    write_quads(sub / "train.tsv", task.train, bundle.vocab);
    write_quads(sub / "valid.tsv", task.valid, bundle.vocab);
    write_quads(sub / "test.tsv", task.test, bundle.vocab);
    snaps.push_back({{"index", snap.index},
                     {"begin", snap.begin},
                     {"end", snap.end},
                     {"num_quads", snap.quads.size()},
                     {"num_train", task.train.size()},
                     {"num_valid", task.valid.size()},
                     {"num_test", task.test.size()}});
  }
  const auto& c = bundle.config;
  json meta = {{"format", "tkg-bundle/1"},
               {"num_snapshots", bundle.snapshots.size()},
               {"num_entities", bundle.num_entities()},
               {"num_relations", bundle.num_relations()},
               {"config",
                {{"initial_fraction", c.initial_fraction},
                 {"window_days", c.window_days},
                 {"train_fraction", c.split.train},
                 {"valid_fraction", c.split.valid},
                 {"test_fraction", c.split.test}}},
               {"snapshots", snaps}};
  std::ofstream out(dir / "meta.json", std::ios::binary);
  out << meta.dump(2) << '\n';
  if (!out) throw DataError("cannot write meta.json");
}

Bundle read_bundle(const fs::path& dir) {
  std::ifstream in(dir / "meta.json");
  if (!in) throw DataError("not a snapshot bundle: " + dir.string());
  json meta;
  try {
    meta = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("meta.json: " + std::string(e.what()));
  }
  if (meta.value("format", "") != "tkg-bundle/1") throw DataError("unsupported bundle format");
  Bundle b;
  b.vocab.entities = read_labels(dir / "entities.txt");
  b.vocab.relations = read_labels(dir / "relations.txt");
  if (b.vocab.entities.size() != meta.at("num_entities").get<std::size_t>() ||
      b.vocab.relations.size() != meta.at("num_relations").get<std::size_t>())
    throw DataError("bundle vocabulary does not match meta.json");
  const auto& c = meta.at("config");
  b.config.initial_fraction = c.at("initial_fraction");
  b.config.window_days = c.at("window_days");
  b.config.split = {c.at("train_fraction"), c.at("valid_fraction"), c.at("test_fraction")};
  for (const auto& s : meta.at("snapshots")) {
    Snapshot snap;
    snap.index = s.at("index");
    snap.begin = s.at("begin");
    snap.end = s.at("end");
    const auto sub = dir / ("snapshot_" + std::to_string(snap.index));
    TaskSplit task{read_quads(sub / "train.tsv", b.vocab), read_quads(sub / "valid.tsv", b.vocab),
                   read_quads(sub / "test.tsv", b.vocab)};
    snap.quads = task.train;
    snap.quads.insert(snap.quads.end(), task.valid.begin(), task.valid.end());
    snap.quads.insert(snap.quads.end(), task.test.begin(), task.test.end());
    b.snapshots.push_back(std::move(snap));
    b.tasks.push_back(std::move(task));
  }
  if (b.snapshots.size() != meta.at("num_snapshots").get<std::size_t>())
    throw DataError("bundle snapshot count does not match meta.json");
  return b;
}

}  // namespace tkg
