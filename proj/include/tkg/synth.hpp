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

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tkg/common.hpp"
#include "tkg/core.hpp"

namespace tkg {

struct SynthConfig {
  std::size_t num_entities = 500;
  std::size_t num_relations = 20;
  std::size_t num_quads = 50000;
  std::size_t num_days = 56;
  double zipf_exponent = 1.2;
  //! Probability that an object comes from its relation's preferred pool.
  double similarity_signal = 0.6;
  //! Probability per drift period that a relation redraws its pool.
  double drift_rate = 0.2;
  std::size_t drift_period_days = 7;
  std::size_t pool_size = 5;
  std::uint64_t seed = 0;
  std::string start_date = "2014-01-01";

  void validate() const;
};

//! Time-sorted corpus over entity ids [0, num_entities) and relation ids
//! [0, num_relations); days start at 0.
std::vector<Quadruple> generate(const SynthConfig& cfg);

//! Labels "e0000..." and "r00..." for the generated ids.
Vocabulary synth_vocabulary(const SynthConfig& cfg);

//! Writes `subject<TAB>relation<TAB>object<TAB>YYYY-MM-DD` lines.
void write_tsv(std::ostream& out, std::span<const Quadruple> quads, const Vocabulary& vocab,
               const std::string& start_date);
void write_tsv(const std::filesystem::path& path, std::span<const Quadruple> quads, const Vocabulary& vocab,
               const std::string& start_date);

struct TailStats {
  std::size_t num_entities = 0;   // entities with non-zero frequency
  double rare_fraction = 0.0;     // of those, share with frequency < rare_threshold
  double slope = 0.0;             // least-squares slope of log freq against log rank
};

//! Total (subject + object) frequency statistics. Throws DataError on an
//! empty corpus.
TailStats verify_tail(std::span<const Quadruple> quads, std::uint64_t rare_threshold = 18);

}  // namespace tkg
