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

#include "tkg/continual.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

namespace tkg {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct StrategyName {
  Strategy strategy;
  const char* name;
};

constexpr StrategyName kStrategies[] = {
    {Strategy::Finetune, "finetune"},
    {Strategy::Ewc, "ewc"},
    {Strategy::Replay, "replay"},
    {Strategy::OursFull, "ours-full"},
    {Strategy::OursSamplingOnly, "ours-sampling-only"},
    {Strategy::OursEnhancementOnly, "ours-enhancement-only"},
    {Strategy::FirstSnapshotOnly, "first-snapshot-only"},
};

// Independent RNG streams derived from the run seed.
enum Stream : std::uint64_t { kTrainStream = 1, kInitStream = 2, kReplayStream = 3, kFisherStream = 4 };

}  // namespace

std::string to_string(Strategy s) {
  for (const auto& e : kStrategies)
    if (e.strategy == s) return e.name;
  return "?";
}

const std::vector<std::string>& strategy_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& e : kStrategies) out.emplace_back(e.name);
    return out;
  }();
  return names;
}

Strategy parse_strategy(const std::string& name) {
  for (const auto& e : kStrategies)
    if (name == e.name) return e.strategy;
  std::string valid;
  for (const auto& n : strategy_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ConfigError("unknown strategy '" + name + "' (valid: " + valid + ")");
}

void RunConfig::validate() const {
  if (epochs_per_task < 0) throw ConfigError("epochs_per_task must be >= 0");
  if (post_eval_epochs < 0) throw ConfigError("post_eval_epochs must be >= 0");
  if (ewc_strength < 0.0) throw ConfigError("ewc_strength must be non-negative");
  if (replay_buffer_size < 1) throw ConfigError("replay_buffer_size must be >= 1");
  if (!(replay_fraction >= 0.0 && replay_fraction <= 1.0)) throw ConfigError("replay_fraction must lie in [0, 1]");
  if (model.dim < 1) throw ConfigError("model dim must be >= 1");
  if (model.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (model.negatives < 1) throw ConfigError("negatives must be >= 1");
  if (!(model.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (model.weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
  if (model.bucket_width < 0) throw ConfigError("bucket_width must be >= 0");
  enhancement.validate();
  sampler.validate();
  if (bucket_bounds.empty() || bucket_bounds.front() != 0) throw ConfigError("bucket bounds must start at 0");
  for (std::size_t i = 1; i < bucket_bounds.size(); ++i)
    if (bucket_bounds[i] <= bucket_bounds[i - 1]) throw ConfigError("bucket bounds must strictly increase");
}

json to_json(const RunConfig& c) {
  return {{"strategy", to_string(c.strategy)},
          {"epochs_per_task", c.epochs_per_task},
          {"post_eval_epochs", c.post_eval_epochs},
          {"ewc_strength", c.ewc_strength},
          {"fisher_samples", c.fisher_samples},
          {"replay_buffer_size", c.replay_buffer_size},
          {"replay_fraction", c.replay_fraction},
          {"include_current_frequencies", c.include_current_frequencies},
          {"seed", c.seed},
          {"eval_workers", c.eval_workers},
          {"bucket_bounds", c.bucket_bounds},
          {"inductive_subject_only", c.inductive_subject_only},
          {"model",
           {{"dim", c.model.dim},
            {"learning_rate", c.model.learning_rate},
            {"weight_decay", c.model.weight_decay},
            {"negatives", c.model.negatives},
            {"batch_size", c.model.batch_size},
            {"bucket_width", c.model.bucket_width},
            {"init", "uniform(-0.5/sqrt(d), 0.5/sqrt(d)); time buckets zero"},
            {"inverse_relations", true}}},
          {"enhancement",
           {{"lambda", c.enhancement.lambda},
            {"mu", c.enhancement.mu},
            {"max_similar", c.enhancement.max_similar},
            {"degree_decay", to_string(c.enhancement.decay)},
            {"stop_gradient", c.enhancement.stop_gradient},
            {"exclude_self", c.enhancement.exclude_self}}},
          {"sampler",
           {{"alpha", c.sampler.alpha}, {"psi", to_string(c.sampler.psi)}, {"epoch_size", c.sampler.epoch_size}}}};
}

// ---- checkpoints --------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[8] = {'T', 'K', 'G', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw DataError("truncated checkpoint header");
  return v;
}

}  // namespace

void write_checkpoint(const fs::path& path, const CheckpointHeader& h, const ModelState& state) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(kCheckpointMagic, 8);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(h.tag.size()));
  out.write(h.tag.data(), static_cast<std::streamsize>(h.tag.size()));
  put<std::int32_t>(out, h.task);
  put<std::uint64_t>(out, h.seed);
  put<std::uint64_t>(out, h.num_entities);
  put<std::uint64_t>(out, h.num_relations);
  put<std::uint64_t>(out, state.steps);
  write_params(out, state.params);
  write_optimizer(out, state.optimizer);
  state.index.write(out);
  if (!out) throw DataError("write failed: " + path.string());
}

std::pair<CheckpointHeader, ModelState> read_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw DataError(path.string() + ": not a checkpoint");
  CheckpointHeader h;
  const auto tag_len = get<std::uint32_t>(in);
  if (tag_len > 64) throw DataError("implausible checkpoint tag");
  h.tag.resize(tag_len);
  in.read(h.tag.data(), tag_len);
  h.task = get<std::int32_t>(in);
  h.seed = get<std::uint64_t>(in);
  h.num_entities = get<std::uint64_t>(in);
  h.num_relations = get<std::uint64_t>(in);
  ModelState s;
  s.steps = get<std::uint64_t>(in);
  s.params = read_params(in);
  s.optimizer = read_optimizer(in);
  s.index = SimilarityIndex::read(in);
  return {h, std::move(s)};
}

// ---- replay -------------------------------------------------------------------

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be >= 1");
}

void ReplayBuffer::offer(const Quadruple& q, Rng& rng) {
  ++seen_;
  if (items_.size() < capacity_) {
    items_.push_back(q);
    return;
  }
  const auto j = rng.uniform_index(seen_);
  if (j < capacity_) items_[j] = q;
}

std::vector<Quadruple> replay_mix(std::span<const Quadruple> current, ReplayBuffer& buffer, double fraction,
                                  Rng& rng) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ConfigError("replay fraction must lie in [0, 1]");
  std::vector<Quadruple> out(current.begin(), current.end());
  if (fraction > 0.0 && !buffer.items().empty()) {
    const auto draws = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(current.size())));
    for (std::size_t i = 0; i < draws; ++i) out.push_back(buffer.items()[rng.uniform_index(buffer.items().size())]);
  }
  for (const auto& q : current) buffer.offer(q, rng);
  return out;
}

// ---- EWC ------------------------------------------------------------------------

namespace {

void extend_to(EmbeddingTable& t, std::size_t rows, std::size_t dim) {
  if (t.dim() != dim) t = EmbeddingTable(0, dim);
  if (t.rows() < rows) t.append_rows(rows - t.rows());
}

void accumulate_squares(EmbeddingTable& into, const SparseRows& g, double scale) {
  for (std::size_t slot = 0; slot < g.size(); ++slot) {
    auto dst = into.row(g.ids()[slot]);
    const auto src = g.row_at(slot);
    for (std::size_t k = 0; k < src.size(); ++k) dst[k] += scale * src[k] * src[k];
  }
}

double table_penalty(const EmbeddingTable& theta, const EmbeddingTable& anchor, const EmbeddingTable& fisher) {
  double acc = 0.0;
  for (std::size_t r = 0; r < fisher.rows(); ++r) {
    const auto w = theta.row(r);
    const auto a = anchor.row(r);
    const auto f = fisher.row(r);
    for (std::size_t k = 0; k < f.size(); ++k) acc += f[k] * (w[k] - a[k]) * (w[k] - a[k]);
  }
  return acc;
}

void table_gradient(const EmbeddingTable& theta, const EmbeddingTable& anchor, const EmbeddingTable& fisher,
                    double strength, SparseRows& grads) {
  for (std::size_t slot = 0; slot < grads.size(); ++slot) {
    const auto id = grads.ids()[slot];
    if (id >= fisher.rows()) continue;
    auto g = grads.row_at(slot);
    const auto w = theta.row(id);
    const auto a = anchor.row(id);
    const auto f = fisher.row(id);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += 2.0 * strength * f[k] * (w[k] - a[k]);
  }
}

}  // namespace

void ewc_consolidate(const ModelParams& params, FisherInfo& fisher, std::span<const Quadruple> sample,
                     std::size_t num_relations, std::size_t negatives, Rng& rng) {
  if (sample.empty()) throw DataError("ewc_consolidate: empty sample");
  const std::size_t d = params.dim;
  extend_to(fisher.entity, params.entity.rows(), d);
  extend_to(fisher.relation, params.relation.rows(), d);
  extend_to(fisher.time, params.time.rows(), d);

  const auto queries = with_inverses(sample, num_relations);
  const std::size_t k = std::min(negatives, params.entity.rows() - 1);
  const double scale = 1.0 / static_cast<double>(queries.size());
  for (const auto& q : queries) {
    TrainBatch batch{{q}, k, sample_negatives(rng, q, k, params.entity.rows())};
    const auto res = loss_and_grads(params, batch);
    accumulate_squares(fisher.entity, res.grads.entity, scale);
    accumulate_squares(fisher.relation, res.grads.relation, scale);
    accumulate_squares(fisher.time, res.grads.time, scale);
  }
  fisher.anchor = params;
  ++fisher.consolidations;
}

double ewc_penalty(const ModelParams& params, const FisherInfo& fisher, double strength) {
  if (fisher.consolidations == 0) return 0.0;
  return strength * (table_penalty(params.entity, fisher.anchor.entity, fisher.entity) +
                     table_penalty(params.relation, fisher.anchor.relation, fisher.relation) +
                     table_penalty(params.time, fisher.anchor.time, fisher.time));
}

void add_ewc_gradient(const ModelParams& params, const FisherInfo& fisher, double strength, SparseGrads& grads) {
  if (fisher.consolidations == 0 || strength == 0.0) return;
  table_gradient(params.entity, fisher.anchor.entity, fisher.entity, strength, grads.entity);
  table_gradient(params.relation, fisher.anchor.relation, fisher.relation, strength, grads.relation);
  table_gradient(params.time, fisher.anchor.time, fisher.time, strength, grads.time);
}

// ---- trainer ----------------------------------------------------------------------

Trainer::Trainer(const RunConfig& cfg, std::size_t num_relations, Timestamp bucket_width)
    : cfg_(cfg),
      num_relations_(num_relations),
      enhancer_(cfg.enhancement, tracker_),
      replay_(cfg.replay_buffer_size),
      rng_(derive_seed(cfg.seed, kTrainStream)),
      init_rng_(derive_seed(cfg.seed, kInitStream)),
      replay_rng_(derive_seed(cfg.seed, kReplayStream)),
      fisher_rng_(derive_seed(cfg.seed, kFisherStream)) {
  cfg_.validate();
  if (num_relations == 0) throw DataError("trainer: empty relation vocabulary");
  state_.params = init_params(0, 2 * num_relations, cfg.model.dim, bucket_width, init_rng_);
  state_.optimizer = init_optimizer(state_.params, cfg.model.learning_rate, cfg.model.weight_decay);
  state_.index = SimilarityIndex(2 * num_relations, cfg.enhancement.max_similar);
}

namespace {

std::vector<Quadruple> time_sorted(std::span<const Quadruple> a, std::span<const Quadruple> b = {}) {
  std::vector<Quadruple> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  std::stable_sort(out.begin(), out.end(), [](const Quadruple& x, const Quadruple& y) { return x.time < y.time; });
  return out;
}

Timestamp max_time(std::span<const Quadruple> quads) {
  Timestamp t = 0;
  for (const auto& q : quads) t = std::max(t, q.time);
  return t;
}

}  // namespace

void Trainer::prepare(const TaskSplit& task) {
  EntityId max_entity = 0;
  bool any = false;
  for (const auto* part : {&task.train, &task.valid, &task.test})
    for (const auto& q : *part) {
      max_entity = std::max({max_entity, q.subject, q.object});
      any = true;
    }
  if (!any) throw DataError("trainer: empty task");
  grow_entities(state_.params, static_cast<std::size_t>(max_entity) + 1, init_rng_);
  if (!task.train.empty()) grow_time_buckets(state_.params, max_time(task.train));
  sync_optimizer(state_.optimizer, state_.params);
}

void Trainer::run_epochs(std::span<const Quadruple> data, int epochs, const SimilaritySource* similarity,
                         const std::string& phase) {
  if (data.empty() || epochs <= 0) return;
  const bool weighted = cfg_.uses_weighted_sampling();
  SamplerConfig sampler = cfg_.sampler;
  if (!weighted) sampler.alpha = 0.0;
  const auto pre_task_freq = [this](EntityId e) -> std::uint64_t {
    return e < pre_task_freq_.size() ? pre_task_freq_[e] : 0;
  };
  std::vector<double> weights;
  if (weighted && weighted_draws(sampler.alpha, sampler.epoch_size ? sampler.epoch_size : data.size()) > 0) {
    weights.reserve(data.size());
    for (const auto& q : data) {
      if (cfg_.include_current_frequencies) {
        weights.push_back(quad_weight(tracker_, q, sampler.psi));
      } else {
        // frequencies from before this task; unseen entities count as 1
        const double a = 1.0 / static_cast<double>(std::max<std::uint64_t>(1, pre_task_freq(q.subject)));
        const double b = 1.0 / static_cast<double>(std::max<std::uint64_t>(1, pre_task_freq(q.object)));
        weights.push_back(sampler.psi == PsiMode::Min   ? std::min(a, b)
                          : sampler.psi == PsiMode::Max ? std::max(a, b)
                                                        : 0.5 * (a + b));
      }
    }
  }

  const std::size_t d = state_.params.dim;
  const std::size_t rows = state_.params.entity.rows();
  if (rows < 2) throw DataError("trainer: need at least two entities");
  const std::size_t k = std::min(cfg_.model.negatives, rows - 1);
  const bool ewc = cfg_.strategy == Strategy::Ewc && cfg_.ewc_strength > 0.0 && fisher_.consolidations > 0;

  std::vector<double> overrides;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const auto sample = two_phase_sample(data, weights, sampler, rng_);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < sample.size(); begin += cfg_.model.batch_size) {
      const std::size_t end = std::min(sample.size(), begin + cfg_.model.batch_size);
      TrainBatch batch;
      batch.positives = with_inverses(std::span(sample).subspan(begin, end - begin), num_relations_);
      batch.negatives_per_positive = k;
      batch.negatives.reserve(batch.positives.size() * k);
      for (const auto& q : batch.positives) {
        const auto neg = sample_negatives(rng_, q, k, rows);
        batch.negatives.insert(batch.negatives.end(), neg.begin(), neg.end());
      }

      std::vector<EnhancedQuery> records;
      if (similarity) {
        overrides.assign(batch.positives.size() * d, 0.0);
        records = enhancer_.forward(state_.params, *similarity, batch.positives, overrides);
      }
      auto res = loss_and_grads(state_.params, batch, similarity ? std::span<const double>(overrides)
                                                                 : std::span<const double>());
      if (!std::isfinite(res.loss))
        throw DivergenceError(fmt::format("non-finite loss in task {} ({} phase), epoch {}, batch {}",
                                          tasks_done_ + 1, phase, epoch + 1, batches + 1));
      if (similarity) enhancer_.backward(records, res.override_grads, d, res.grads);
      if (ewc) add_ewc_gradient(state_.params, fisher_, cfg_.ewc_strength, res.grads);
      try {
        apply_step(state_.params, state_.optimizer, res.grads);
      } catch (const DivergenceError& e) {
        throw DivergenceError(fmt::format("{} in task {} ({} phase), epoch {}, batch {}", e.what(), tasks_done_ + 1,
                                          phase, epoch + 1, batches + 1));
      }
      ++state_.steps;
      loss_sum += res.loss;
      ++batches;
    }
    last_epoch_loss_ = batches ? loss_sum / static_cast<double>(batches) : 0.0;
  }
}

CheckpointPair Trainer::train_task(const TaskSplit& task,
                                   const std::function<void(const ModelState&, const FrequencyTracker&)>& on_eval) {
  prepare(task);
  const bool frozen = cfg_.strategy == Strategy::FirstSnapshotOnly && tasks_done_ >= 1;
  const auto train = time_sorted(task.train);
  const auto carry_data = time_sorted(task.valid, task.test);
  // the index serves inverse queries too
  const auto train_events = with_inverses(train, num_relations_);
  const auto carry_events = with_inverses(carry_data, num_relations_);

  pre_task_freq_ = tracker_.frequencies();
  tracker_.observe(train);

  CheckpointPair pair;
  if (!frozen && !train.empty()) {
    std::vector<Quadruple> data = train;
    if (cfg_.strategy == Strategy::Replay) data = replay_mix(train, replay_, cfg_.replay_fraction, replay_rng_);
    if (cfg_.uses_enhancement()) {
      const TemporalView view(state_.index, train_events);
      run_epochs(data, cfg_.epochs_per_task, &view, "train");
    } else {
      run_epochs(data, cfg_.epochs_per_task, nullptr, "train");
    }
  }
  state_.index.record(train_events);
  pair.eval = state_;
  if (on_eval) on_eval(pair.eval, tracker_);

  pre_task_freq_ = tracker_.frequencies();
  tracker_.observe(carry_data);
  if (!carry_data.empty()) grow_time_buckets(state_.params, max_time(carry_data));
  sync_optimizer(state_.optimizer, state_.params);
  if (!frozen && !carry_data.empty()) {
    if (cfg_.uses_enhancement()) {
      const TemporalView view(state_.index, carry_events);
      run_epochs(carry_data, cfg_.post_eval_epochs, &view, "carry");
    } else {
      run_epochs(carry_data, cfg_.post_eval_epochs, nullptr, "carry");
    }
  }
  state_.index.record(carry_events);

  if (!frozen && cfg_.strategy == Strategy::Ewc && !train.empty()) {
    std::vector<Quadruple> sample = train;
    if (sample.size() > cfg_.fisher_samples) {
      fisher_rng_.shuffle(sample.begin(), sample.end());
      sample.resize(cfg_.fisher_samples);
    }
    ewc_consolidate(state_.params, fisher_, sample, num_relations_, cfg_.model.negatives, fisher_rng_);
  }
  pair.carry = state_;
  ++tasks_done_;
  return pair;
}

// ---- hashing --------------------------------------------------------------------

namespace {

std::string sha1_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha1(), nullptr) != 1)
    throw std::runtime_error("sha1 failed");
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

std::string git_blob_id(const std::string& content) {
  std::string blob = "blob " + std::to_string(content.size());
  blob.push_back('\0');
  blob += content;
  return sha1_hex(blob);
}

std::string tsv_text(std::span<const Quadruple> quads, const Vocabulary& v) {
  std::string out;
  for (const auto& q : quads)
    out += fmt::format("{}\t{}\t{}\t{}\n", v.entities.label(q.subject), v.relations.label(q.relation),
                       v.entities.label(q.object), q.time);
  return out;
}

std::string labels_text(const LabelMap& m) {
  std::string out;
  for (const auto& l : m.labels()) out += l + "\n";
  return out;
}

}  // namespace

std::string bundle_hash(const Bundle& b) {
  std::vector<std::pair<std::string, std::string>> entries;
  entries.emplace_back("entities.txt", git_blob_id(labels_text(b.vocab.entities)));
  entries.emplace_back("relations.txt", git_blob_id(labels_text(b.vocab.relations)));
  for (std::size_t k = 0; k < b.tasks.size(); ++k) {
    const auto dir = "snapshot_" + std::to_string(b.snapshots[k].index) + "/";
    entries.emplace_back(dir + "train.tsv", git_blob_id(tsv_text(b.tasks[k].train, b.vocab)));
    entries.emplace_back(dir + "valid.tsv", git_blob_id(tsv_text(b.tasks[k].valid, b.vocab)));
    entries.emplace_back(dir + "test.tsv", git_blob_id(tsv_text(b.tasks[k].test, b.vocab)));
  }
  std::sort(entries.begin(), entries.end());
  std::string listing;
  for (const auto& [path, id] : entries) listing += id + " " + path + "\n";
  return sha1_hex(listing);
}

// ---- incremental run ----------------------------------------------------------------

namespace {

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace

RunResult incremental_run(const Bundle& bundle, const RunConfig& cfg, const RunOptions& options) {
  cfg.validate();
  if (bundle.tasks.empty()) throw DataError("incremental_run: no tasks");
  const std::size_t num_rel = bundle.num_relations();
  const Timestamp width = cfg.model.bucket_width > 0 ? cfg.model.bucket_width : bundle.config.window_days;
  Trainer trainer(cfg, num_rel, width);

  KnownFacts facts;
  facts.add(with_inverses(bundle.all_quads(), num_rel));

  RunResult result;
  auto& report = result.report;
  report.strategy = to_string(cfg.strategy);
  report.seed = cfg.seed;
  report.inputs_hash = options.inputs_hash.empty() ? bundle_hash(bundle) : options.inputs_hash;

  if (options.run_dir) {
    fs::create_directories(*options.run_dir);
    json run = {{"format", "tkg-run/1"},
                {"seed", cfg.seed},
                {"inputs_hash", report.inputs_hash},
                {"num_tasks", bundle.tasks.size()},
                {"config", to_json(cfg)}};
    if (!options.extra_config.is_null()) run["resolved"] = options.extra_config;
    write_json(*options.run_dir / "run.json", run);
  }

  const std::size_t T = bundle.tasks.size();
  std::vector<SimilarityIndex> archived;
  std::vector<std::vector<Quadruple>> test_queries(T), inductive_queries(T);
  std::vector<std::vector<std::uint64_t>> query_freq(T);
  std::vector<std::size_t> final_ranks;
  std::vector<std::uint64_t> final_freqs;
  const bool enhanced = cfg.uses_enhancement();

  for (std::size_t t = 0; t < T; ++t) {
    const auto& task = bundle.tasks[t];
    StepMetrics step;
    step.step = static_cast<int>(t + 1);

    auto on_eval = [&](const ModelState& state, const FrequencyTracker& tracker) {
      archived.push_back(state.index);
      test_queries[t] = with_inverses(task.test, num_rel);
      for (const auto& q : test_queries[t]) query_freq[t].push_back(tracker.frequency(q.subject));
      const auto unseen = unseen_entities(std::span(bundle.snapshots).first(t), task.train, bundle.num_entities());
      inductive_queries[t] =
          with_inverses(inductive_subset(task.test, unseen, cfg.inductive_subject_only), num_rel);

      auto view_for = [&](std::size_t j) {
        return ScoringView{&state.params, enhanced ? &archived[j] : nullptr, &cfg.enhancement, &tracker, num_rel};
      };
      auto evaluate = [&](std::size_t j, std::span<const Quadruple> queries) {
        return rank_queries(view_for(j), queries, facts, cfg.eval_workers);
      };
      auto split_metrics = [](const std::vector<QueryRanks>& ranks) {
        std::vector<std::size_t> raw, filt;
        for (const auto& r : ranks) {
          raw.push_back(r.raw.rank);
          filt.push_back(r.filtered.rank);
        }
        return std::pair{metrics(filt), metrics(raw)};
      };

      if (options.evaluate_test) {
        for (std::size_t j = 0; j <= t; ++j) {
          const auto ranks = evaluate(j, test_queries[j]);
          const auto [filt, raw] = split_metrics(ranks);
          step.test["filtered"].push_back(filt);
          step.test["raw"].push_back(raw);
          if (t + 1 == T) {
            for (std::size_t i = 0; i < ranks.size(); ++i) {
              final_ranks.push_back(ranks[i].filtered.rank);
              final_freqs.push_back(query_freq[j][i]);
            }
          }
        }
        if (!inductive_queries[t].empty()) {
          const auto [filt, raw] = split_metrics(evaluate(t, inductive_queries[t]));
          step.inductive_current["filtered"] = filt;
          step.inductive_current["raw"] = raw;
          if (t == 0) report.inductive_first = filt;
        }
        if (t + 1 == T) {
          std::vector<std::size_t> ind;
          for (std::size_t j = 0; j <= t; ++j)
            for (const auto& r : evaluate(j, inductive_queries[j])) ind.push_back(r.filtered.rank);
          report.inductive_average = metrics(ind);
        }
      }
      if (!task.valid.empty()) {
        const auto [filt, raw] = split_metrics(evaluate(t, with_inverses(task.valid, num_rel)));
        step.valid_current["filtered"] = filt;
        step.valid_current["raw"] = raw;
      }
    };

    auto pair = trainer.train_task(task, on_eval);

    if (options.run_dir) {
      const auto dir = *options.run_dir / ("task_" + std::to_string(t + 1));
      fs::create_directories(dir);
      if (options.evaluate_test) write_json(dir / "metrics.json", step_metrics_json(step));
      if (options.save_checkpoints) {
        CheckpointHeader h{"eval", static_cast<int>(t + 1), cfg.seed, bundle.num_entities(), num_rel};
        write_checkpoint(dir / "checkpoint.eval", h, pair.eval);
        h.tag = "carry";
        write_checkpoint(dir / "checkpoint.carry", h, pair.carry);
      }
    }
    if (options.keep_checkpoints) result.checkpoints.push_back(std::move(pair));
    report.steps.push_back(std::move(step));
  }

  double valid_sum = 0.0;
  std::size_t valid_n = 0;
  for (const auto& s : report.steps)
    if (auto it = s.valid_current.find("filtered"); it != s.valid_current.end()) {
      valid_sum += it->second.mrr;
      ++valid_n;
    }
  result.mean_valid_mrr = valid_n ? valid_sum / static_cast<double>(valid_n) : 0.0;

  if (options.evaluate_test) {
    compute_curves(report);
    report.buckets = bucketize(final_ranks, final_freqs, cfg.bucket_bounds);
    if (options.run_dir) emit_report(report, *options.run_dir);
  }
  return result;
}

}  // namespace tkg
