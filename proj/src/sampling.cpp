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

#include "tkg/sampling.hpp"

#include <algorithm>
#include <cmath>

namespace tkg {

std::string to_string(PsiMode mode) {
  switch (mode) {
    case PsiMode::Min: return "min";
    case PsiMode::Max: return "max";
    case PsiMode::Mean: return "mean";
  }
  return "?";
}

PsiMode parse_psi_mode(const std::string& name) {
  if (name == "min") return PsiMode::Min;
  if (name == "max") return PsiMode::Max;
  if (name == "mean") return PsiMode::Mean;
  throw ConfigError("unknown psi mode '" + name + "' (valid: min, max, mean)");
}

void SamplerConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("sampler alpha must lie in [0, 1]");
}

double quad_weight(const FrequencyTracker& tracker, const Quadruple& q, PsiMode psi) {
  const auto fs = tracker.frequency(q.subject);
  const auto fo = tracker.frequency(q.object);
  if (fs == 0 || fo == 0)
    throw DataError("quad_weight: entity " + std::to_string(fs == 0 ? q.subject : q.object) +
                    " has not been observed");
  const double a = 1.0 / static_cast<double>(fs);
  const double b = 1.0 / static_cast<double>(fo);
  switch (psi) {
    case PsiMode::Min: return std::min(a, b);
    case PsiMode::Max: return std::max(a, b);
    case PsiMode::Mean: return 0.5 * (a + b);
  }
  return a;
}

std::size_t weighted_draws(double alpha, std::size_t epoch_size) {
  return static_cast<std::size_t>(std::llround(alpha * static_cast<double>(epoch_size)));
}

std::vector<Quadruple> two_phase_sample(std::span<const Quadruple> data, const FrequencyTracker& tracker,
                                        const SamplerConfig& cfg, Rng& rng) {
  std::vector<double> weights;
  if (weighted_draws(cfg.alpha, cfg.epoch_size ? cfg.epoch_size : data.size()) > 0) {
    weights.reserve(data.size());
    for (const auto& q : data) weights.push_back(quad_weight(tracker, q, cfg.psi));
  }
  return two_phase_sample(data, weights, cfg, rng);
}

std::vector<Quadruple> two_phase_sample(std::span<const Quadruple> data, std::span<const double> weights,
                                        const SamplerConfig& cfg, Rng& rng) {
  cfg.validate();
  if (data.empty()) throw DataError("two_phase_sample: empty data");
  const std::size_t epoch = cfg.epoch_size ? cfg.epoch_size : data.size();
  const std::size_t n_weighted = weighted_draws(cfg.alpha, epoch);

  std::vector<Quadruple> out;
  out.reserve(epoch);
  if (n_weighted > 0) {
    if (weights.size() != data.size()) throw DataError("two_phase_sample: weights/data size mismatch");
    // inverse-transform sampling over the prefix sums
    std::vector<double> cdf(data.size());
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      total += weights[i];
      cdf[i] = total;
    }
    if (!(total > 0.0) || !std::isfinite(total)) throw DataError("two_phase_sample: weights must sum to a positive value");
    for (std::size_t k = 0; k < n_weighted; ++k) {
      const double u = rng.uniform01() * total;
      auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      if (it == cdf.end()) --it;
      out.push_back(data[static_cast<std::size_t>(it - cdf.begin())]);
    }
  }
  for (std::size_t k = n_weighted; k < epoch; ++k) out.push_back(data[rng.uniform_index(data.size())]);
  rng.shuffle(out.begin(), out.end());
  return out;
}

std::vector<double> mixture_probabilities(std::span<const double> weights, double alpha) {
  double total = 0.0;
  for (double w : weights) total += w;
  const auto n = static_cast<double>(weights.size());
  std::vector<double> p(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) p[i] = alpha * weights[i] / total + (1.0 - alpha) / n;
  return p;
}

}  // namespace tkg
