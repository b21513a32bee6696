/*
 * Copyright 2026 The mixopt Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef MIXOPT_MIXTURES_H_
#define MIXOPT_MIXTURES_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mixopt/mixture_weights.h"

namespace mixopt {

struct MixtureSamplerConfig {
  std::size_t k = 0;
  // Per-domain token frequencies; must lie on the simplex.
  std::vector<double> domain_freqs;
  // Weight of the uniform distribution in the concentration blend.
  double uniform_weight = 0.5;
  double scale_lo = 0.5;
  double scale_hi = 2.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// alpha = scale * (w * uniform + (1 - w) * domain_freqs).
std::vector<double> dirichlet_concentration(const MixtureSamplerConfig& cfg,
                                            double scale);

// Sample i draws scale ~ U[lo, hi] and lambda ~ Dirichlet(alpha(scale)) from
// RNG stream (seed, i), so every sample is reproducible on its own.
std::vector<MixtureWeights> sample_mixtures(const MixtureSamplerConfig& cfg,
                                            std::size_t n);

// Dirichlet(alpha) draw from normalized Gamma variates.
MixtureWeights sample_dirichlet(std::span<const double> alpha,
                                std::uint64_t seed, std::uint64_t stream);

// Returns [e_1, ..., e_k] followed by the non-corner entries of `mixtures`
// in their original order. Idempotent.
std::vector<MixtureWeights> include_expert_corners(
    const std::vector<MixtureWeights>& mixtures, std::size_t k);

// 0.99 * lambda + 0.01 * uniform.
MixtureWeights smooth_mixture(const MixtureWeights& lambda);

struct NamedMixture {
  std::string id;
  MixtureWeights weights;
};

// Ids "corner_<i>" for one-hot mixtures and "mix_<nnn>" otherwise.
std::vector<NamedMixture> name_mixtures(
    const std::vector<MixtureWeights>& mixtures);

// CSV header mixture_id,w_0,...,w_{k-1}; weights with 12 significant
// digits. Reading renormalizes each row to absorb the rounding.
std::string mixtures_to_csv(std::span<const NamedMixture> mixtures);
std::vector<NamedMixture> mixtures_from_csv(std::string_view csv);
void write_mixtures(const std::filesystem::path& path,
                    std::span<const NamedMixture> mixtures);
std::vector<NamedMixture> read_mixtures(const std::filesystem::path& path);

}  // namespace mixopt

#endif  // MIXOPT_MIXTURES_H_
