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

// Incremental training over a snapshot sequence.
//
// Every task t produces two checkpoints: the eval checkpoint after training
// on D_t^train, which is the one scored, and the carry checkpoint after a few
// further epochs on D_t^valid + D_t^test, which seeds task t + 1.

#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tkg/core.hpp"
#include "tkg/enhancement.hpp"
#include "tkg/eval.hpp"
#include "tkg/model.hpp"
#include "tkg/sampling.hpp"

namespace tkg {

enum class Strategy {
  Finetune,
  Ewc,
  Replay,
  OursFull,
  OursSamplingOnly,
  OursEnhancementOnly,
  FirstSnapshotOnly,
};

std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& name);
const std::vector<std::string>& strategy_names();

struct ModelConfig {
  std::size_t dim = 32;
  double learning_rate = 0.05;
  double weight_decay = 0.0;
  std::size_t negatives = 32;
  std::size_t batch_size = 128;  // quads per batch; each yields two queries
  Timestamp bucket_width = 0;    // 0: use the bundle's window size
};

struct RunConfig {
  Strategy strategy = Strategy::Finetune;
  int epochs_per_task = 10;
  int post_eval_epochs = 2;
  double ewc_strength = 1.0;
  std::size_t fisher_samples = 1000;
  std::size_t replay_buffer_size = 5000;
  double replay_fraction = 0.5;
  //! Count the current task's training quads before computing sampling weights.
  bool include_current_frequencies = true;
  EnhancementConfig enhancement;
  SamplerConfig sampler;
  ModelConfig model;
  std::uint64_t seed = 0;
  std::size_t eval_workers = 1;
  std::vector<std::uint64_t> bucket_bounds = default_bucket_bounds();
  bool inductive_subject_only = false;

  bool uses_enhancement() const {
    return strategy == Strategy::OursFull || strategy == Strategy::OursEnhancementOnly;
  }
  bool uses_weighted_sampling() const {
    return strategy == Strategy::OursFull || strategy == Strategy::OursSamplingOnly;
  }
  void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);

struct ModelState {
  ModelParams params;
  OptimizerState optimizer;
  SimilarityIndex index;
  std::uint64_t steps = 0;

  friend bool operator==(const ModelState&, const ModelState&) = default;
};

struct CheckpointPair {
  ModelState eval;
  ModelState carry;
};

struct CheckpointHeader {
  std::string tag;  // "eval" or "carry"
  int task = 0;
  std::uint64_t seed = 0;
  std::uint64_t num_entities = 0;
  std::uint64_t num_relations = 0;

  friend bool operator==(const CheckpointHeader&, const CheckpointHeader&) = default;
};

void write_checkpoint(const std::filesystem::path& path, const CheckpointHeader& header, const ModelState& state);
std::pair<CheckpointHeader, ModelState> read_checkpoint(const std::filesystem::path& path);

//! Bounded reservoir over every quad ever offered.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 5000);

  void offer(const Quadruple& q, Rng& rng);
  const std::vector<Quadruple>& items() const { return items_; }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t seen() const { return seen_; }

 private:
  std::size_t capacity_;
  std::vector<Quadruple> items_;
  std::uint64_t seen_ = 0;
};

//! `current` followed by ceil(fraction * |current|) uniform draws from the
//! buffer (none when the buffer is empty); the buffer then absorbs `current`.
std::vector<Quadruple> replay_mix(std::span<const Quadruple> current, ReplayBuffer& buffer, double fraction,
                                  Rng& rng);

//! Diagonal Fisher importances with anchor parameters. Tables cover only the
//! rows that existed at the last consolidation.
struct FisherInfo {
  EmbeddingTable entity;
  EmbeddingTable relation;
  EmbeddingTable time;
  ModelParams anchor;
  int consolidations = 0;
};

//! Adds mean squared per-query gradients over `sample` (with inverse
//! queries) to the importances and re-anchors at `params`.
void ewc_consolidate(const ModelParams& params, FisherInfo& fisher, std::span<const Quadruple> sample,
                     std::size_t num_relations, std::size_t negatives, Rng& rng);

//! strength * sum F (theta - theta*)^2 over anchored rows.
double ewc_penalty(const ModelParams& params, const FisherInfo& fisher, double strength);

//! Adds 2 * strength * F (theta - theta*) to the gradient rows already
//! present in `grads` (rows outside the batch are left alone).
void add_ewc_gradient(const ModelParams& params, const FisherInfo& fisher, double strength, SparseGrads& grads);

//! Incremental learner state machine.
class Trainer {
 public:
  Trainer(const RunConfig& cfg, std::size_t num_relations, Timestamp bucket_width);
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  //! Trains on task.train and then on task.valid + task.test. `on_eval` sees
  //! the eval checkpoint (and the tracker as of that moment) before the
  //! carry epochs run.
  CheckpointPair train_task(const TaskSplit& task,
                            const std::function<void(const ModelState&, const FrequencyTracker&)>& on_eval = {});

  const ModelState& state() const { return state_; }
  ModelState& mutable_state() { return state_; }
  const FrequencyTracker& tracker() const { return tracker_; }
  const FisherInfo& fisher() const { return fisher_; }
  const ReplayBuffer& replay_buffer() const { return replay_; }
  const EnhancementCounters& enhancement_counters() const { return enhancer_.counters(); }
  int tasks_done() const { return tasks_done_; }
  //! Mean training loss of the last epoch run.
  double last_epoch_loss() const { return last_epoch_loss_; }

 private:
  void prepare(const TaskSplit& task);
  void run_epochs(std::span<const Quadruple> data, int epochs, const SimilaritySource* similarity,
                  const std::string& phase);

  RunConfig cfg_;
  std::size_t num_relations_;
  ModelState state_;
  FrequencyTracker tracker_;
  Enhancer enhancer_;
  ReplayBuffer replay_;
  FisherInfo fisher_;
  Rng rng_;
  Rng init_rng_;
  Rng replay_rng_;
  Rng fisher_rng_;
  std::vector<std::uint64_t> pre_task_freq_;
  int tasks_done_ = 0;
  double last_epoch_loss_ = 0.0;
};

struct RunOptions {
  //! When set, run.json, task_<t>/ and the report are written here.
  std::optional<std::filesystem::path> run_dir;
  bool save_checkpoints = true;
  bool keep_checkpoints = false;  // return CheckpointPairs in memory
  bool evaluate_test = true;      // false: validation only (model selection)
  std::string inputs_hash;
  //! Extra content for run.json (e.g. the resolved CLI config).
  nlohmann::json extra_config;
};

struct RunResult {
  MetricReport report;
  std::vector<CheckpointPair> checkpoints;
  //! Mean over steps of the current validation MRR (filtered).
  double mean_valid_mrr = 0.0;
};

RunResult incremental_run(const Bundle& bundle, const RunConfig& cfg, const RunOptions& options = {});

//! Git-style content hash of the bundle: SHA-1 over the blob ids of its
//! vocabulary and split files as they are laid out on disk.
std::string bundle_hash(const Bundle& bundle);

}  // namespace tkg
