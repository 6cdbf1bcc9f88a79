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


#include "tkg/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

namespace tkg {

namespace {

std::string join(const std::vector<std::uint64_t>& v) {
  std::string out;
  for (const auto x : v) out += (out.empty() ? "" : ",") + std::to_string(x);
  return out;
}

std::string str(bool b) { return b ? "true" : "false"; }
std::string str(double d) { return fmt::format("{}", d); }

std::vector<ConfigKey> build_schema() {
  const SnapshotConfig s;
  const RunConfig r;
  const SynthConfig y;
  return {
      {"snapshot.initial_fraction", str(s.initial_fraction), "share of distinct days in the first snapshot"},
      {"snapshot.window_days", std::to_string(s.window_days), "distinct days per later snapshot"},
      {"snapshot.train_fraction", str(s.split.train), "train share of each snapshot's days"},
      {"snapshot.valid_fraction", str(s.split.valid), "validation share of each snapshot's days"},
      {"snapshot.test_fraction", str(s.split.test), "test share of each snapshot's days"},

      {"model.dim", std::to_string(r.model.dim), "embedding dimension"},
      {"model.learning_rate", str(r.model.learning_rate), "Adagrad learning rate"},
      {"model.weight_decay", str(r.model.weight_decay), "L2 weight decay"},
      {"model.negatives", std::to_string(r.model.negatives), "negative objects per query"},
      {"model.batch_size", std::to_string(r.model.batch_size), "quads per batch"},
      {"model.bucket_width", std::to_string(r.model.bucket_width), "days per time bucket (0: window size)"},

      {"run.strategy", to_string(r.strategy), "finetune|ewc|replay|ours-full|ours-sampling-only|ours-enhancement-only|first-snapshot-only"},
      {"run.epochs", std::to_string(r.epochs_per_task), "epochs per task on the training split"},
      {"run.post_eval_epochs", std::to_string(r.post_eval_epochs), "epochs on valid+test after evaluation"},
      {"run.ewc_strength", str(r.ewc_strength), "EWC penalty weight"},
      {"run.fisher_samples", std::to_string(r.fisher_samples), "quads used to estimate the Fisher diagonal"},
      {"run.replay_buffer_size", std::to_string(r.replay_buffer_size), "replay reservoir capacity"},
      {"run.replay_fraction", str(r.replay_fraction), "replayed quads per current quad"},
      {"run.include_current_frequencies", str(r.include_current_frequencies), "count the current task before weighting"},
      {"run.seed", std::to_string(r.seed), "random seed"},
      {"run.eval_workers", std::to_string(r.eval_workers), "ranking threads"},

      {"enhancement.lambda", str(r.enhancement.lambda), "weight of the entity's own embedding"},
      {"enhancement.mu", str(r.enhancement.mu), "recency steepness"},
      {"enhancement.max_similar", std::to_string(r.enhancement.max_similar), "similar events kept per relation"},
      {"enhancement.degree_decay", to_string(r.enhancement.decay), "inverse-log|inverse-linear|constant-one"},
      {"enhancement.stop_gradient", str(r.enhancement.stop_gradient), "no gradient into similar entities"},
      {"enhancement.exclude_self", str(r.enhancement.exclude_self), "drop the subject from its own similar set"},

      {"sampler.alpha", str(r.sampler.alpha), "weighted share of each epoch's draws"},
      {"sampler.psi", to_string(r.sampler.psi), "min|max|mean"},
      {"sampler.epoch_size", std::to_string(r.sampler.epoch_size), "draws per epoch (0: training set size)"},

      {"eval.bucket_bounds", join(r.bucket_bounds), "frequency bucket lower bounds"},
      {"eval.inductive_subject_only", str(r.inductive_subject_only), "unseen entity must be the subject"},

      {"synth.num_entities", std::to_string(y.num_entities), "entities"},
      {"synth.num_relations", std::to_string(y.num_relations), "relations"},
      {"synth.num_quads", std::to_string(y.num_quads), "quads"},
      {"synth.num_days", std::to_string(y.num_days), "days"},
      {"synth.zipf_exponent", str(y.zipf_exponent), "subject skew"},
      {"synth.similarity_signal", str(y.similarity_signal), "probability of a pool object"},
      {"synth.drift_rate", str(y.drift_rate), "pool redraw probability per drift period"},
      {"synth.drift_period_days", std::to_string(y.drift_period_days), "days per drift period"},
      {"synth.pool_size", std::to_string(y.pool_size), "preferred objects per relation"},
      {"synth.seed", std::to_string(y.seed), "generator seed"},
      {"synth.start_date", y.start_date, "date of day 0"},

      {"grid.preset", "none", "none|full"},
      {"grid.lambda", "", "comma-separated lambda values"},
      {"grid.mu", "", "comma-separated mu values"},
      {"grid.max_similar", "", "comma-separated n values"},
      {"grid.alpha", "", "comma-separated alpha values"},
  };
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || p != end || text.empty())
    throw ConfigError(fmt::format("{}: cannot parse '{}'", key, text));
  return v;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace

const std::vector<ConfigKey>& config_schema() {
  static const auto schema = build_schema();
  return schema;
}

ResolvedConfig::ResolvedConfig() {
  for (const auto& k : config_schema()) values_[k.key] = k.default_value;
}

void ResolvedConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(path.string() + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError(path.string() + ": key '" + section + "' outside a section");
    for (const auto& [key, value] : body) set(section + "." + key, value.data());
  }
}

void ResolvedConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = value;
}

const std::string& ResolvedConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

double ResolvedConfig::get_double(const std::string& key) const { return parse_number<double>(key, get(key)); }
std::int64_t ResolvedConfig::get_int(const std::string& key) const { return parse_number<std::int64_t>(key, get(key)); }
std::uint64_t ResolvedConfig::get_uint(const std::string& key) const {
  return parse_number<std::uint64_t>(key, get(key));
}

bool ResolvedConfig::get_bool(const std::string& key) const {
  const auto& v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(fmt::format("{}: expected a boolean, got '{}'", key, v));
}

std::vector<double> ResolvedConfig::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split_list(get(key))) out.push_back(parse_number<double>(key, item));
  return out;
}

nlohmann::json ResolvedConfig::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, value] : values_) {
    const auto dot = key.find('.');
    j[key.substr(0, dot)][key.substr(dot + 1)] = value;
  }
  return j;
}

std::string ResolvedConfig::to_ini() const {
  std::string out, section;
  for (const auto& k : config_schema()) {
    const auto dot = k.key.find('.');
    const auto sec = k.key.substr(0, dot);
    if (sec != section) {
      out += (section.empty() ? "" : "\n") + fmt::format("[{}]\n", sec);
      section = sec;
    }
    out += fmt::format("{} = {}\n", k.key.substr(dot + 1), values_.at(k.key));
  }
  return out;
}

SnapshotConfig snapshot_config(const ResolvedConfig& c) {
  SnapshotConfig s;
  s.initial_fraction = c.get_double("snapshot.initial_fraction");
  s.window_days = static_cast<int>(c.get_int("snapshot.window_days"));
  s.split.train = c.get_double("snapshot.train_fraction");
  s.split.valid = c.get_double("snapshot.valid_fraction");
  s.split.test = c.get_double("snapshot.test_fraction");
  s.validate();
  return s;
}

RunConfig run_config(const ResolvedConfig& c) {
  RunConfig r;
  r.model.dim = c.get_uint("model.dim");
  r.model.learning_rate = c.get_double("model.learning_rate");
  r.model.weight_decay = c.get_double("model.weight_decay");
  r.model.negatives = c.get_uint("model.negatives");
  r.model.batch_size = c.get_uint("model.batch_size");
  r.model.bucket_width = c.get_int("model.bucket_width");

  r.strategy = parse_strategy(c.get("run.strategy"));
  r.epochs_per_task = static_cast<int>(c.get_int("run.epochs"));
  r.post_eval_epochs = static_cast<int>(c.get_int("run.post_eval_epochs"));
  r.ewc_strength = c.get_double("run.ewc_strength");
  r.fisher_samples = c.get_uint("run.fisher_samples");
  r.replay_buffer_size = c.get_uint("run.replay_buffer_size");
  r.replay_fraction = c.get_double("run.replay_fraction");
  r.include_current_frequencies = c.get_bool("run.include_current_frequencies");
  r.seed = c.get_uint("run.seed");
  r.eval_workers = c.get_uint("run.eval_workers");

  r.enhancement.lambda = c.get_double("enhancement.lambda");
  r.enhancement.mu = c.get_double("enhancement.mu");
  r.enhancement.max_similar = c.get_uint("enhancement.max_similar");
  r.enhancement.decay = parse_degree_decay(c.get("enhancement.degree_decay"));
  r.enhancement.stop_gradient = c.get_bool("enhancement.stop_gradient");
  r.enhancement.exclude_self = c.get_bool("enhancement.exclude_self");

  r.sampler.alpha = c.get_double("sampler.alpha");
  r.sampler.psi = parse_psi_mode(c.get("sampler.psi"));
  r.sampler.epoch_size = c.get_uint("sampler.epoch_size");

  r.bucket_bounds.clear();
  for (const auto& item : split_list(c.get("eval.bucket_bounds")))
    r.bucket_bounds.push_back(parse_number<std::uint64_t>("eval.bucket_bounds", item));
  r.inductive_subject_only = c.get_bool("eval.inductive_subject_only");
  r.validate();
  return r;
}

SynthConfig synth_config(const ResolvedConfig& c) {
  SynthConfig y;
  y.num_entities = c.get_uint("synth.num_entities");
  y.num_relations = c.get_uint("synth.num_relations");
  y.num_quads = c.get_uint("synth.num_quads");
  y.num_days = c.get_uint("synth.num_days");
  y.zipf_exponent = c.get_double("synth.zipf_exponent");
  y.similarity_signal = c.get_double("synth.similarity_signal");
  y.drift_rate = c.get_double("synth.drift_rate");
  y.drift_period_days = c.get_uint("synth.drift_period_days");
  y.pool_size = c.get_uint("synth.pool_size");
  y.seed = c.get_uint("synth.seed");
  y.start_date = c.get("synth.start_date");
  y.validate();
  return y;
}

namespace {

std::vector<GridCell> product(const std::vector<double>& lambdas, const std::vector<double>& mus,
                              const std::vector<double>& ns, const std::vector<double>& alphas) {
  std::vector<GridCell> out;
  for (const double l : lambdas)
    for (const double m : mus)
      for (const double n : ns)
        for (const double a : alphas) {
          if (n < 1 || n != std::floor(n)) throw ConfigError("grid.max_similar values must be positive integers");
          out.push_back({l, m, static_cast<std::size_t>(n), a});
        }
  return out;
}

}  // namespace

std::vector<GridCell> full_grid() {
  return product({0.3, 0.5, 0.7}, {0.1, 0.3, 0.5}, {10, 15, 20, 25}, {0, 0.1, 0.2, 0.5, 0.8, 1});
}

std::vector<GridCell> grid_cells(const ResolvedConfig& c) {
  const auto& preset = c.get("grid.preset");
  if (preset == "full") return full_grid();
  if (preset != "none") throw ConfigError("unknown grid preset '" + preset + "' (valid: none, full)");
  auto values_or = [&](const std::string& key, const std::string& current) {
    auto v = c.get_doubles("grid." + key);
    if (v.empty()) v.push_back(parse_number<double>(current, c.get(current)));
    return v;
  };
  return product(values_or("lambda", "enhancement.lambda"), values_or("mu", "enhancement.mu"),
                 values_or("max_similar", "enhancement.max_similar"), values_or("alpha", "sampler.alpha"));
}

void apply(const GridCell& cell, RunConfig& cfg) {
  cfg.enhancement.lambda = cell.lambda;
  cfg.enhancement.mu = cell.mu;
  cfg.enhancement.max_similar = cell.max_similar;
  cfg.sampler.alpha = cell.alpha;
}

void apply(const GridCell& cell, ResolvedConfig& c) {
  c.set("enhancement.lambda", str(cell.lambda));
  c.set("enhancement.mu", str(cell.mu));
  c.set("enhancement.max_similar", std::to_string(cell.max_similar));
  c.set("sampler.alpha", str(cell.alpha));
}

}  // namespace tkg
