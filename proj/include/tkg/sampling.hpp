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

#include <span>
#include <string>
#include <vector>

#include "tkg/common.hpp"
#include "tkg/core.hpp"

namespace tkg {

enum class PsiMode { Min, Max, Mean };

std::string to_string(PsiMode mode);
PsiMode parse_psi_mode(const std::string& name);

struct SamplerConfig {
  double alpha = 0.5;
  PsiMode psi = PsiMode::Min;
  //! Draws per epoch; 0 means "size of the data".
  std::size_t epoch_size = 0;

  void validate() const;
};

//! psi(1/freq(s), 1/freq(o)). Throws DataError if either frequency is zero.
double quad_weight(const FrequencyTracker& tracker, const Quadruple& q, PsiMode psi);

//! Number of weighted draws for an epoch of `epoch_size` draws.
std::size_t weighted_draws(double alpha, std::size_t epoch_size);

//! Two-phase epoch: round(alpha * E) draws with probability proportional to
//! quad_weight, then E - round(alpha * E) uniform draws, both with
//! replacement, shuffled together.
std::vector<Quadruple> two_phase_sample(std::span<const Quadruple> data, const FrequencyTracker& tracker,
                                        const SamplerConfig& cfg, Rng& rng);

//! Same, with per-item weights supplied directly.
std::vector<Quadruple> two_phase_sample(std::span<const Quadruple> data, std::span<const double> weights,
                                        const SamplerConfig& cfg, Rng& rng);

//! Marginal draw probability of every item under the two-phase mixture.
std::vector<double> mixture_probabilities(std::span<const double> weights, double alpha);

}  // namespace tkg
