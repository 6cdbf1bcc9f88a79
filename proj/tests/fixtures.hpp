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

#pragma once

#include "tkg/continual.hpp"
#include "tkg/core.hpp"
#include "tkg/synth.hpp"

namespace fixtures {

inline tkg::Bundle synth_bundle(const tkg::SynthConfig& cfg, const tkg::SnapshotConfig& snap = {}) {
  return tkg::make_bundle(tkg::synth_vocabulary(cfg), tkg::generate(cfg), snap);
}

//! A few hundred quads over four snapshots; trains in milliseconds.
inline tkg::Bundle tiny_bundle(std::uint64_t seed = 1) {
  tkg::SynthConfig cfg;
  cfg.num_entities = 40;
  cfg.num_relations = 4;
  cfg.num_quads = 600;
  cfg.num_days = 28;
  cfg.seed = seed;
  tkg::SnapshotConfig snap;
  snap.window_days = 5;
  return synth_bundle(cfg, snap);
}

inline tkg::RunConfig tiny_run(tkg::Strategy strategy, std::uint64_t seed = 0) {
  tkg::RunConfig r;
  r.strategy = strategy;
  r.seed = seed;
  r.epochs_per_task = 2;
  r.post_eval_epochs = 1;
  r.model.dim = 8;
  r.model.negatives = 8;
  r.model.batch_size = 32;
  r.fisher_samples = 100;
  r.replay_buffer_size = 100;
  return r;
}

}  // namespace fixtures
