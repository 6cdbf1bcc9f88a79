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


// Acceptance suite: one PASS/FAIL line per criterion.
//
// Usage: acceptance [path-to-tkg-cli]

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <fmt/format.h>

#include "fixtures.hpp"
#include "gradient_checks.hpp"
#include "oracles.hpp"
#include "snapshot_checks.hpp"
#include "tkg/config.hpp"
#include "tkg/continual.hpp"
#include "tkg/enhancement.hpp"
#include "tkg/eval.hpp"
#include "tkg/sampling.hpp"
#include "tkg/synth.hpp"

using namespace tkg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

bool close(double a, double b, double tol = 1e-9) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

bool bit_equal(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- 1. formula oracles ------------------------------------------------------

Outcome formula_oracles() {
  Outcome o;
  const auto start = Clock::now();
  Rng rng(101);
  std::size_t instances = 0;
  for (int trial = 0; trial < 100; ++trial, ++instances) {
    const std::size_t d = 1 + rng.uniform_index(8);
    const auto p = oracle::random_params(rng, 12, 4, d);
    const double mu = rng.uniform(0.0, 1.0);
    const Timestamp t = 40;
    std::vector<SimilarEntry> entries;
    std::vector<std::vector<double>> rows;
    std::vector<Timestamp> times;
    for (std::size_t i = 0; i < 1 + rng.uniform_index(8); ++i) {
      const auto e = static_cast<EntityId>(rng.uniform_index(12));
      const auto ti = static_cast<Timestamp>(rng.uniform_index(40));
      entries.push_back({e, ti});
      rows.emplace_back(p.entity.row(e).begin(), p.entity.row(e).end());
      times.push_back(ti);
      o.require(close(recency_weight(mu, t, ti), oracle::sigmoid_weight(mu, t, ti)), "recency weight");
    }
    const auto g = aggregate_similar(p, entries, t, mu, p.entity.row(0));
    const auto want_g = oracle::weighted_mean(rows, times, t, mu);
    EnhancementConfig cfg;
    cfg.lambda = rng.uniform(0.0, 1.0);
    const auto degree = rng.uniform_index(50);
    const auto e = combine(p.entity.row(1), g, degree, cfg);
    const double phi = oracle::phi_inverse_log(static_cast<double>(degree));
    for (std::size_t k = 0; k < d; ++k) {
      o.require(close(g[k], want_g[k]), "aggregate g(s, r, t)");
      o.require(close(e[k], cfg.lambda * p.entity.row(1)[k] + phi * (1 - cfg.lambda) * want_g[k]), "combination");
    }

    FrequencyTracker tracker;
    const auto corpus = oracle::random_corpus(rng, 8, 2, 3, 6);
    tracker.observe(corpus);
    const auto& q = corpus[rng.uniform_index(corpus.size())];
    const double a = 1.0 / static_cast<double>(tracker.frequency(q.subject));
    const double b = 1.0 / static_cast<double>(tracker.frequency(q.object));
    o.require(close(quad_weight(tracker, q, PsiMode::Min), std::min(a, b)), "quad weight (min)");
    o.require(close(quad_weight(tracker, q, PsiMode::Max), std::max(a, b)), "quad weight (max)");
    o.require(close(quad_weight(tracker, q, PsiMode::Mean), (a + b) / 2), "quad weight (mean)");

    std::vector<double> w(1 + rng.uniform_index(10));
    for (auto& x : w) x = rng.uniform(0.01, 2.0);
    const double alpha = rng.uniform(0.0, 1.0);
    const auto mix = mixture_probabilities(w, alpha);
    const auto want_mix = oracle::two_phase_marginal(w, alpha);
    for (std::size_t i = 0; i < w.size(); ++i) o.require(close(mix[i], want_mix[i]), "mixture probabilities");

    std::vector<double> scores(2 + rng.uniform_index(30));
    for (auto& x : scores) x = static_cast<double>(rng.uniform_index(5));
    const auto truth = static_cast<EntityId>(rng.uniform_index(scores.size()));
    std::vector<EntityId> ex;
    std::vector<std::size_t> ex_idx;
    for (std::size_t c = 0; c < scores.size(); ++c)
      if (c != truth && rng.uniform01() < 0.2) {
        ex.push_back(static_cast<EntityId>(c));
        ex_idx.push_back(c);
      }
    o.require(rank_from_scores(scores, truth, ex) == oracle::rank_by_sort(scores, truth, ex_idx), "rank");

    std::vector<std::size_t> ranks(1 + rng.uniform_index(30));
    for (auto& r : ranks) r = 1 + rng.uniform_index(20);
    const auto m = metrics(ranks);
    const auto want_m = oracle::metrics(ranks);
    o.require(close(m.mrr, want_m.mrr) && close(m.hit1, want_m.hit1) && close(m.hit3, want_m.hit3) &&
                  close(m.hit10, want_m.hit10),
              "MRR / Hit@k");

    std::vector<std::vector<double>> pm(1 + rng.uniform_index(6));
    for (std::size_t i = 0; i < pm.size(); ++i)
      for (std::size_t j = 0; j <= i; ++j) pm[i].push_back(rng.uniform01());
    const auto curve = forgetting_curve(pm);
    const auto want_P = oracle::forgetting(pm);
    for (std::size_t i = 0; i < pm.size(); ++i) o.require(close(curve.P[i], want_P[i]), "P_t");
  }

  // samplers: chi-square goodness of fit against the mixture marginal
  std::vector<Quadruple> data;
  for (EntityId i = 0; i < 6; ++i) data.push_back({i, 0, 10, 0});
  FrequencyTracker t;
  t.observe(data);
  t.observe(std::vector<Quadruple>{{0, 0, 11, 0}, {0, 0, 11, 0}, {2, 0, 11, 0}});
  double worst_p = 1.0;
  for (const double alpha : {0.0, 0.3, 0.8}) {
    SamplerConfig cfg;
    cfg.alpha = alpha;
    cfg.epoch_size = 60;
    std::vector<double> w;
    for (const auto& q : data) w.push_back(quad_weight(t, q, cfg.psi));
    std::vector<double> h(6, 0.0);
    for (int e = 0; e < 1000; ++e)
      for (const auto& q : two_phase_sample(data, t, cfg, rng)) h[q.subject] += 1;
    std::vector<double> expected;
    for (double x : oracle::two_phase_marginal(w, alpha)) expected.push_back(x * 60000);
    worst_p = std::min(worst_p, oracle::chi_square_p(h, expected));
  }
  o.require(worst_p > 0.01, "two-phase sampler chi-square");
  const double secs = seconds_since(start);
  o.require(secs < 60, "runtime");
  o.detail = fmt::format("{} random instances per formula, min sampler p = {:.3f}, {:.1f}s{}", instances, worst_p,
                         secs, o.pass ? "" : " (failed: " + o.detail + ")");
  return o;
}

// ---- 2. gradients --------------------------------------------------------------

Outcome gradient_suite() {
  Outcome o;
  const auto start = Clock::now();
  double base = 0, enh = 0, ewc = 0;
  for (std::uint64_t seed = 0; seed < 16; ++seed) {
    const std::size_t d = 1 + seed % 8;
    base = std::max(base, checks::base_loss_check(1000 + seed, d).max_relative_error);
    enh = std::max(enh, checks::enhanced_loss_check(2000 + seed, d).max_relative_error);
    ewc = std::max(ewc, checks::ewc_penalty_check(3000 + seed, d).max_relative_error);
  }
  const double secs = seconds_since(start);
  o.require(base < 1e-4, "base loss");
  o.require(enh < 1e-4, "enhanced loss");
  o.require(ewc < 1e-4, "EWC penalty");
  o.require(secs < 60, "runtime");
  o.detail = fmt::format("max relative error base {:.1e}, enhanced {:.1e}, EWC {:.1e} (d <= 8, h = 1e-4), {:.1f}s",
                         base, enh, ewc, secs);
  return o;
}

// ---- 3. boundary identities --------------------------------------------------

std::vector<CheckpointPair> checkpoints(const Bundle& b, const RunConfig& cfg) {
  Trainer trainer(cfg, b.num_relations(), b.config.window_days);
  std::vector<CheckpointPair> out;
  for (const auto& task : b.tasks) out.push_back(trainer.train_task(task));
  return out;
}

Outcome boundary_identities() {
  Outcome o;
  Rng rng(303);
  // lambda = 1
  const auto p = oracle::random_params(rng, 30, 6, 8);
  const auto events = oracle::random_corpus(rng, 30, 6, 10, 8);
  SimilarityIndex idx(6, 20);
  idx.record(events);
  FrequencyTracker tracker;
  tracker.observe(events);
  EnhancementConfig ecfg;
  ecfg.lambda = 1.0;
  Enhancer enh(ecfg, tracker);
  std::vector<Quadruple> batch;
  for (EntityId s = 0; s < 30; ++s) batch.push_back({s, s % 6, 0, 12});
  std::vector<double> out(batch.size() * 8);
  enh.forward(p, idx, batch, out);
  for (std::size_t i = 0; i < batch.size(); ++i)
    o.require(bit_equal(std::span(out).subspan(i * 8, 8), p.entity.row(batch[i].subject)), "lambda = 1");

  // alpha = 0
  std::vector<Quadruple> data;
  for (EntityId i = 0; i < 10; ++i) data.push_back({i, 0, 20, 0});
  FrequencyTracker skew;
  skew.observe(data);
  for (int k = 0; k < 50; ++k) skew.observe(Quadruple{0, 0, 21, 0});
  SamplerConfig scfg;
  scfg.alpha = 0.0;
  scfg.epoch_size = 100000;
  std::vector<double> h(10, 0.0);
  for (const auto& q : two_phase_sample(data, skew, scfg, rng)) h[q.subject] += 1;
  const double p_uniform = oracle::chi_square_p(h, std::vector<double>(10, 10000.0));
  o.require(p_uniform > 0.01, "alpha = 0 uniform");

  // strategy degeneracies on a mid-sized synthetic bundle
  SynthConfig sc;
  sc.num_entities = 150;
  sc.num_relations = 8;
  sc.num_quads = 6000;
  sc.num_days = 35;
  const auto bundle = fixtures::synth_bundle(sc);
  RunConfig base;
  base.epochs_per_task = 3;
  base.model.dim = 16;
  base.seed = 5;
  const auto ft = checkpoints(bundle, base);
  auto ewc = base;
  ewc.strategy = Strategy::Ewc;
  ewc.ewc_strength = 0.0;
  auto replay = base;
  replay.strategy = Strategy::Replay;
  replay.replay_fraction = 0.0;
  const auto e = checkpoints(bundle, ewc);
  const auto r = checkpoints(bundle, replay);
  for (std::size_t t = 0; t < ft.size(); ++t) {
    o.require(e[t].eval == ft[t].eval && e[t].carry == ft[t].carry, "ewc-strength = 0");
    o.require(r[t].eval == ft[t].eval && r[t].carry == ft[t].carry, "replay-fraction = 0");
  }
  o.detail = fmt::format("lambda=1 bit-exact on {} queries; alpha=0 chi-square p = {:.3f}; ewc 0 and replay 0 match "
                         "fine-tuning on {} tasks x 2 checkpoints{}",
                         batch.size(), p_uniform, ft.size(), o.pass ? "" : " (failed: " + o.detail + ")");
  return o;
}

// ---- 4. snapshot protocol ----------------------------------------------------

Outcome snapshot_protocol() {
  Outcome o;
  Rng rng(404);
  int configs = 0, splits = 0;
  while (configs < 100) {
    SynthConfig sc;
    sc.num_entities = 30 + rng.uniform_index(100);
    sc.num_relations = 1 + rng.uniform_index(6);
    sc.num_days = 10 + rng.uniform_index(80);
    sc.num_quads = 200 + rng.uniform_index(2000);
    sc.seed = rng.next();
    const auto quads = generate(sc);
    SnapshotConfig cfg;
    cfg.initial_fraction = rng.uniform(0.1, 0.9);
    cfg.window_days = static_cast<int>(3 + rng.uniform_index(10));
    const double tr = rng.uniform(0.5, 0.9);
    const double va = rng.uniform(0.05, 1.0 - tr - 0.02);
    cfg.split = {tr, va, 1.0 - tr - va};
    std::vector<Snapshot> snaps;
    try {
      snaps = build_snapshots(quads, cfg);
    } catch (const DataError&) {
      continue;
    }
    ++configs;
    const auto v = checks::snapshot_violations(quads, cfg, snaps);
    o.require(v.empty(), v);
    for (const auto& s : snaps) {
      if (checks::count_days(s.quads) < 3) continue;
      const auto sv = checks::split_violations(s, split_snapshot(s, cfg.split));
      o.require(sv.empty(), sv);
      ++splits;
    }
  }
  std::string icews = "ICEWS14 raw file not supplied (set TKG_ICEWS14 to a raw TSV to run the statistics check)";
  if (const char* path = std::getenv("TKG_ICEWS14"); path && fs::exists(path)) {
    Vocabulary vocab;
    const auto quads = parse_quadruple_file(path, vocab);
    SnapshotConfig cfg;
    cfg.window_days = 7;
    // seven months of 2014 as the initial snapshot
    const auto days = distinct_times(quads);
    cfg.initial_fraction = std::min(0.99, 212.0 / static_cast<double>(days.size()));
    const auto bundle = make_bundle(std::move(vocab), quads, cfg);
    const auto& t1 = bundle.tasks.front();
    o.require(bundle.num_entities() == 7128, "ICEWS14 entity count");
    o.require(bundle.num_relations() == 230, "ICEWS14 relation count");
    o.require(bundle.snapshots.size() == 33, "ICEWS14 snapshot count");
    icews = fmt::format("ICEWS14: {} entities, {} relations, {} snapshots, snapshot 1 split {}/{}/{}",
                        bundle.num_entities(), bundle.num_relations(), bundle.snapshots.size(), t1.train.size(),
                        t1.valid.size(), t1.test.size());
  }
  o.detail = fmt::format("{} random configs, {} splits checked; {}{}", configs, splits, icews,
                         o.pass ? "" : " (failed: " + o.detail + ")");
  return o;
}

// ---- 5 and 6. directional claims -------------------------------------------

struct ArmResult {
  double rare_hit1 = 0;
  std::size_t rare_count = 0;
  double final_P_mrr = 0;
  double seconds = 0;
  MetricReport report;
};

ArmResult run_arm(const Bundle& bundle, Strategy s, std::uint64_t seed) {
  RunConfig cfg;
  cfg.strategy = s;
  cfg.seed = seed;
  const auto start = Clock::now();
  RunOptions opts;
  opts.save_checkpoints = false;
  auto res = incremental_run(bundle, cfg, opts);
  ArmResult out;
  out.seconds = seconds_since(start);
  out.rare_hit1 = res.report.buckets.buckets.front().metrics.hit1;
  out.rare_count = res.report.buckets.buckets.front().metrics.count;
  out.final_P_mrr = res.report.curves.at("mrr").P.back();
  out.report = std::move(res.report);
  return out;
}

// Parses curve.csv and checks the p matrix is lower-triangular with P_t in [0, 1].
bool curve_file_well_formed(const fs::path& file, std::size_t steps, std::string& why) {
  std::ifstream in(file);
  std::string line;
  std::getline(in, line);
  if (line != "step,eval_set,metric,value,strategy,seed") {
    why = "bad header";
    return false;
  }
  std::map<std::size_t, std::set<std::size_t>> cells;
  std::map<std::size_t, double> P;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string step, set, metric, value;
    std::getline(ss, step, ',');
    std::getline(ss, set, ',');
    std::getline(ss, metric, ',');
    std::getline(ss, value, ',');
    if (metric != "mrr") continue;
    const auto t = std::stoul(step);
    const double v = std::stod(value);
    if (set == "P") {
      P[t] = v;
    } else {
      cells[t].insert(std::stoul(set.substr(5)));
      if (v < 0 || v > 1) {
        why = "p value outside [0, 1]";
        return false;
      }
    }
  }
  for (std::size_t t = 1; t <= steps; ++t) {
    std::set<std::size_t> want;
    for (std::size_t j = 1; j <= t; ++j) want.insert(j);
    if (cells[t] != want) {
      why = "p matrix not lower-triangular at step " + std::to_string(t);
      return false;
    }
    if (!P.count(t) || P[t] < 0 || P[t] > 1) {
      why = "P_t missing or outside [0, 1]";
      return false;
    }
  }
  return true;
}

void directional_claims(Outcome& longtail, Outcome& forgetting) {
  SynthConfig sc;  // 500 entities, 20 relations, 50k quads, Zipf 1.2, signal 0.6
  const auto bundle = fixtures::synth_bundle(sc);
  longtail.require(bundle.snapshots.size() == 5, "bundle does not have 5 snapshots");

  std::string rows5, rows6;
  int wins5 = 0, wins6 = 0;
  double gain = 0, slowest = 0;
  bool curves_ok = true;
  std::string curve_issue;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto ft = run_arm(bundle, Strategy::Finetune, seed);
    const auto full = run_arm(bundle, Strategy::OursFull, seed);
    const auto enh = run_arm(bundle, Strategy::OursEnhancementOnly, seed);
    slowest = std::max({slowest, ft.seconds + full.seconds + enh.seconds});
    if (full.rare_hit1 > ft.rare_hit1) ++wins5;
    if (enh.final_P_mrr >= ft.final_P_mrr) ++wins6;
    gain += (full.rare_hit1 - ft.rare_hit1) / 3.0;
    rows5 += fmt::format(" seed {}: {:.4f} vs {:.4f} (n={});", seed, full.rare_hit1, ft.rare_hit1, ft.rare_count);
    rows6 += fmt::format(" seed {}: {:.4f} vs {:.4f};", seed, enh.final_P_mrr, ft.final_P_mrr);

    const auto dir = fs::temp_directory_path() / fmt::format("tkg_acceptance_curve_{}", seed);
    fs::remove_all(dir);
    emit_report(enh.report, dir);
    std::string why;
    if (!curve_file_well_formed(dir / "curve.csv", bundle.tasks.size(), why)) {
      curves_ok = false;
      curve_issue = why;
    }
    fs::remove_all(dir);
  }
  longtail.require(wins5 == 3, "full framework did not win every seed");
  longtail.require(gain > 0, "mean improvement not positive");
  longtail.require(slowest < 600, "runtime over 10 minutes per seed");
  longtail.detail = fmt::format("rare-bucket Hit@1 ours-full vs finetune:{} wins {}/3, mean gain {:+.4f}, slowest seed "
                                "{:.0f}s (three arms)",
                                rows5, wins5, gain, slowest);
  forgetting.require(wins6 >= 2, "enhancement arm below fine-tuning in more than one seed");
  forgetting.require(curves_ok, curve_issue);
  forgetting.detail = fmt::format("P_T(MRR) ours-enhancement-only vs finetune:{} wins {}/3; curve.csv {}", rows6, wins6,
                                  curves_ok ? "well-formed" : "malformed: " + curve_issue);
}

// ---- 7. complexity --------------------------------------------------------------

Outcome complexity_contract() {
  Outcome o;
  SynthConfig sc;
  sc.num_quads = 20000;
  const auto quads = generate(sc);
  const auto events = with_inverses(quads, sc.num_relations);
  Rng rng(707);
  const std::size_t d = 32;
  const auto p = oracle::random_params(rng, sc.num_entities, 2 * sc.num_relations, d);
  FrequencyTracker tracker;
  tracker.observe(quads);
  std::vector<Quadruple> batch;
  for (int i = 0; i < 256; ++i) {
    auto q = events[rng.uniform_index(events.size())];
    q.time = static_cast<Timestamp>(sc.num_days);
    batch.push_back(q);
  }
  std::map<std::size_t, EnhancementCounters> work;
  for (const std::size_t n : {10, 20, 40}) {
    SimilarityIndex idx(2 * sc.num_relations, n);
    idx.record(events);
    EnhancementConfig cfg;
    cfg.max_similar = n;
    Enhancer enh(cfg, tracker);
    std::vector<double> out(batch.size() * d);
    enh.forward(p, idx, batch, out);
    const auto& c = enh.counters();
    o.require(c.rows_retrieved <= batch.size() * n, "retrievals exceed |B| n");
    o.require(c.multiply_adds <= batch.size() * n * d, "multiply-adds exceed |B| n d");
    work[n] = c;
  }
  const double r1 = static_cast<double>(work[20].multiply_adds) / static_cast<double>(work[10].multiply_adds);
  const double r2 = static_cast<double>(work[40].multiply_adds) / static_cast<double>(work[20].multiply_adds);
  o.require(std::abs(r1 - 2) <= 0.4 && std::abs(r2 - 2) <= 0.4, "doubling n did not double the work");
  o.detail = fmt::format("|B|={} d={}: retrievals {}/{}/{} for n=10/20/40 (bound |B|n = {}/{}/{}); work ratios {:.3f}, "
                         "{:.3f}",
                         batch.size(), d, work[10].rows_retrieved, work[20].rows_retrieved, work[40].rows_retrieved,
                         batch.size() * 10, batch.size() * 20, batch.size() * 40, r1, r2);
  return o;
}

// ---- 8. reproducibility ------------------------------------------------------------

Outcome reproducibility(const std::string& cli) {
  Outcome o;
  const auto dir = fs::temp_directory_path() / "tkg_acceptance_repro";
  fs::remove_all(dir);
  fs::create_directories(dir);
  SynthConfig sc;
  sc.num_entities = 200;
  sc.num_quads = 8000;
  std::size_t tasks = 0;
  std::string how;
  if (!cli.empty() && fs::exists(cli)) {
    how = "tkg train";
    auto sh = [&](const std::string& args) {
      const auto cmd = fmt::format("\"{}\" {} > /dev/null", cli, args);
      return std::system(cmd.c_str()) == 0;
    };
    o.require(sh(fmt::format("synth --out {0}/c.tsv --synth.num_entities 200 --synth.num_quads 8000", dir.string())),
              "synth failed");
    o.require(sh(fmt::format("snapshots --input {0}/c.tsv --out {0}/bundle", dir.string())), "snapshots failed");
    for (const auto* run : {"run_a", "run_b"})
      o.require(sh(fmt::format("train --bundle {0}/bundle --out {0}/{1} --run.strategy ours-full --run.epochs 3 "
                               "--run.seed 17 --no-checkpoints",
                               dir.string(), run)),
                "train failed");
    tasks = read_bundle(dir / "bundle").tasks.size();
  } else {
    how = "library (CLI path not given)";
    const auto bundle = fixtures::synth_bundle(sc);
    RunConfig cfg;
    cfg.strategy = Strategy::OursFull;
    cfg.epochs_per_task = 3;
    cfg.seed = 17;
    for (const auto* run : {"run_a", "run_b"}) {
      RunOptions opts;
      opts.run_dir = dir / run;
      opts.save_checkpoints = false;
      incremental_run(bundle, cfg, opts);
    }
    tasks = bundle.tasks.size();
  }
  std::size_t identical = 0;
  for (std::size_t t = 1; t <= tasks; ++t) {
    const auto rel = fs::path("task_" + std::to_string(t)) / "metrics.json";
    const auto a = slurp(dir / "run_a" / rel);
    const bool same = !a.empty() && a == slurp(dir / "run_b" / rel);
    identical += same ? 1 : 0;
    o.require(same, "metrics.json differs for task " + std::to_string(t));
  }
  o.require(tasks > 0, "no tasks");
  o.detail = fmt::format("{}: {}/{} task metrics.json files byte-identical", how, identical, tasks);
  fs::remove_all(dir);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  std::vector<std::pair<std::string, std::function<Outcome()>>> criteria;
  Outcome longtail, forgetting;
  bool directional_done = false;
  auto directional = [&] {
    if (!directional_done) directional_claims(longtail, forgetting);
    directional_done = true;
  };
  criteria.emplace_back("formula oracles", formula_oracles);
  criteria.emplace_back("gradient suite", gradient_suite);
  criteria.emplace_back("boundary identities", boundary_identities);
  criteria.emplace_back("snapshot protocol", snapshot_protocol);
  criteria.emplace_back("long-tail direction", [&] {
    directional();
    return longtail;
  });
  criteria.emplace_back("forgetting direction", [&] {
    directional();
    return forgetting;
  });
  criteria.emplace_back("complexity contract", complexity_contract);
  criteria.emplace_back("reproducibility", [&] { return reproducibility(cli); });

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failures += o.pass ? 0 : 1;
    std::cout << fmt::format("[{}] criterion {} ({}): {}", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                             o.detail)
              << std::endl;
  }
  std::cout << fmt::format("{} of {} criteria passed", criteria.size() - failures, criteria.size()) << std::endl;
  return failures == 0 ? 0 : 1;
}
