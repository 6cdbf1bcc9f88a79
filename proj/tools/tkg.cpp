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


// Command-line entry point: snapshots, synth, train, grid, report.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "tkg/config.hpp"
#include "tkg/continual.hpp"
#include "tkg/core.hpp"
#include "tkg/eval.hpp"
#include "tkg/synth.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitDivergence = 4;

// Config file plus --section.key overrides for one subcommand.
struct ConfigOptions {
  std::string file;
  std::map<std::string, std::string> overrides;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App* app, const std::vector<std::string>& sections) {
    app->add_option("--config", file, "INI config file (overridden by --section.key flags)")->check(CLI::ExistingFile);
    for (const auto& k : tkg::config_schema()) {
      const auto section = k.key.substr(0, k.key.find('.'));
      if (std::find(sections.begin(), sections.end(), section) == sections.end()) continue;
      auto* opt = app->add_option("--" + k.key, overrides[k.key], k.help);
      opt->default_str(k.default_value)->group(section);
      options[k.key] = opt;
    }
  }

  tkg::ResolvedConfig resolve() const {
    tkg::ResolvedConfig c;
    if (!file.empty()) c.load_file(file);
    for (const auto& [key, opt] : options)
      if (opt->count() > 0) c.set(key, overrides.at(key));
    return c;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw tkg::DataError("cannot write " + path.string());
  out << text;
}

int cmd_snapshots(const std::string& input, const std::string& out, const ConfigOptions& opts) {
  const auto cfg = tkg::snapshot_config(opts.resolve());
  if (!fs::exists(input)) throw tkg::DataError("input not found: " + input);
  tkg::Vocabulary vocab;
  const auto quads = tkg::parse_quadruple_file(input, vocab);
  const auto bundle = tkg::make_bundle(std::move(vocab), quads, cfg);
  tkg::write_bundle(bundle, out);
  fmt::print("{} quads, {} entities, {} relations, {} snapshots\n", quads.size(), bundle.num_entities(),
             bundle.num_relations(), bundle.snapshots.size());
  for (std::size_t i = 0; i < bundle.tasks.size(); ++i)
    fmt::print("snapshot {}: days [{}, {}) train {} valid {} test {}\n", bundle.snapshots[i].index,
               bundle.snapshots[i].begin, bundle.snapshots[i].end, bundle.tasks[i].train.size(),
               bundle.tasks[i].valid.size(), bundle.tasks[i].test.size());
  return 0;
}

int cmd_synth(const std::string& out, const ConfigOptions& opts) {
  const auto cfg = tkg::synth_config(opts.resolve());
  const auto quads = tkg::generate(cfg);
  tkg::write_tsv(fs::path(out), quads, tkg::synth_vocabulary(cfg), cfg.start_date);
  const auto tail = tkg::verify_tail(quads);
  fmt::print("{} quads written to {}\n", quads.size(), out);
  fmt::print("entities seen {}, rare fraction (<18) {:.4f}, frequency-rank slope {:.4f}\n", tail.num_entities,
             tail.rare_fraction, tail.slope);
  return 0;
}

int cmd_train(const std::string& bundle_dir, const std::string& out, bool no_checkpoints,
              const ConfigOptions& opts) {
  const auto resolved = opts.resolve();
  const auto cfg = tkg::run_config(resolved);
  const auto bundle = tkg::read_bundle(bundle_dir);
  fs::create_directories(out);
  write_text(fs::path(out) / "config.ini", resolved.to_ini());
  tkg::RunOptions options;
  options.run_dir = fs::path(out);
  options.save_checkpoints = !no_checkpoints;
  options.extra_config = resolved.to_json();
  const auto result = tkg::incremental_run(bundle, cfg, options);
  const auto& last = result.report.steps.back();
  fmt::print("{} seed {}: {} tasks, current MRR {:.4f}, average MRR {:.4f}\n", result.report.strategy,
             cfg.seed, result.report.steps.size(), last.current("filtered").mrr, last.average("filtered").mrr);
  return 0;
}

int cmd_grid(const std::string& bundle_dir, const std::string& out, const ConfigOptions& opts) {
  auto resolved = opts.resolve();
  const auto cells = tkg::grid_cells(resolved);
  const auto base = tkg::run_config(resolved);
  const auto bundle = tkg::read_bundle(bundle_dir);
  fs::create_directories(out);

  std::string csv = "lambda,mu,max_similar,alpha,mean_valid_mrr\n";
  double best = -1.0;
  tkg::GridCell best_cell;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    auto cfg = base;
    tkg::apply(cells[i], cfg);
    tkg::RunOptions options;
    options.evaluate_test = false;
    options.save_checkpoints = false;
    const auto result = tkg::incremental_run(bundle, cfg, options);
    const auto& c = cells[i];
    csv += fmt::format("{},{},{},{},{:.6f}\n", c.lambda, c.mu, c.max_similar, c.alpha, result.mean_valid_mrr);
    fmt::print("[{}/{}] lambda={} mu={} n={} alpha={} valid MRR {:.4f}\n", i + 1, cells.size(), c.lambda, c.mu,
               c.max_similar, c.alpha, result.mean_valid_mrr);
    if (result.mean_valid_mrr > best) {
      best = result.mean_valid_mrr;
      best_cell = c;
    }
  }
  write_text(fs::path(out) / "grid.csv", csv);
  tkg::apply(best_cell, resolved);
  resolved.set("grid.preset", "none");
  for (const auto* k : {"grid.lambda", "grid.mu", "grid.max_similar", "grid.alpha"}) resolved.set(k, "");
  write_text(fs::path(out) / "best.ini", resolved.to_ini());
  fmt::print("best: lambda={} mu={} n={} alpha={} (mean validation MRR {:.4f})\n", best_cell.lambda, best_cell.mu,
             best_cell.max_similar, best_cell.alpha, best);
  return 0;
}

int cmd_report(const std::vector<std::string>& runs, const std::string& out) {
  std::vector<tkg::MetricReport> reports;
  for (const auto& dir : runs) reports.push_back(tkg::read_report(dir));
  for (const auto& r : reports)
    if (r.inputs_hash != reports.front().inputs_hash)
      throw tkg::DataError("runs were trained on different bundles (" + r.inputs_hash + " vs " +
                           reports.front().inputs_hash + ")");
  if (!out.empty()) {
    fs::create_directories(out);
    write_text(fs::path(out) / "curve.csv", tkg::curve_csv(reports));
    write_text(fs::path(out) / "buckets.csv", tkg::buckets_csv(reports));
  }
  fmt::print("{:<24} {:>6} {:>9} {:>9} {:>9} {:>9} {:>9}\n", "strategy", "seed", "cur.MRR", "cur.H@1", "avg.MRR",
             "avg.H@1", "P_T(MRR)");
  for (const auto& r : reports) {
    const auto& last = r.steps.back();
    const auto cur = last.current("filtered");
    const auto avg = last.average("filtered");
    const auto it = r.curves.find("mrr");
    const double pt = it != r.curves.end() && !it->second.P.empty() ? it->second.P.back() : 0.0;
    fmt::print("{:<24} {:>6} {:>9.4f} {:>9.4f} {:>9.4f} {:>9.4f} {:>9.4f}\n", r.strategy, r.seed, cur.mrr,
               cur.hit1, avg.mrr, avg.hit1, pt);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incremental temporal knowledge graph completion"};
  app.require_subcommand(1);
  const std::vector<std::string> training_sections{"model", "run", "enhancement", "sampler", "eval"};

  std::string input, out, bundle;
  bool no_checkpoints = false;
  std::vector<std::string> runs;

  ConfigOptions snap_opts, synth_opts, train_opts, grid_opts;

  auto* snap = app.add_subcommand("snapshots", "Split a raw quadruple TSV into a snapshot bundle");
  snap->add_option("--input", input, "raw TSV (subject, relation, object, date)")->required();
  snap->add_option("--out", out, "bundle directory")->required();
  snap_opts.attach(snap, {"snapshot"});

  auto* synth = app.add_subcommand("synth", "Generate a synthetic long-tail corpus");
  synth->add_option("--out", out, "output TSV")->required();
  synth_opts.attach(synth, {"synth"});

  auto* train = app.add_subcommand("train", "Run one strategy over a bundle");
  train->add_option("--bundle", bundle, "bundle directory")->required();
  train->add_option("--out", out, "run directory")->required();
  train->add_flag("--no-checkpoints", no_checkpoints, "skip writing checkpoint files");
  train_opts.attach(train, training_sections);

  auto* grid = app.add_subcommand("grid", "Select hyperparameters by mean validation MRR");
  grid->add_option("--bundle", bundle, "bundle directory")->required();
  grid->add_option("--out", out, "output directory for grid.csv and best.ini")->required();
  auto grid_sections = training_sections;
  grid_sections.emplace_back("grid");
  grid_opts.attach(grid, grid_sections);

  auto* report = app.add_subcommand("report", "Merge run reports and print a summary");
  report->add_option("runs", runs, "run directories")->required();
  report->add_option("--out", out, "directory for merged curve.csv and buckets.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*snap) return cmd_snapshots(input, out, snap_opts);
    if (*synth) return cmd_synth(out, synth_opts);
    if (*train) return cmd_train(bundle, out, no_checkpoints, train_opts);
    if (*grid) return cmd_grid(bundle, out, grid_opts);
    if (*report) return cmd_report(runs, out);
  } catch (const tkg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const tkg::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const tkg::DivergenceError& e) {
    std::cerr << "numerical divergence: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  }
  return 0;
}
