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

// Ground-truth measurements: proxy models trained on sampled mixtures and
// their per-domain validation losses.

#ifndef MIXOPT_PROXY_H_
#define MIXOPT_PROXY_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mixopt/corpus.h"
#include "mixopt/experts.h"
#include "mixopt/mde.h"
#include "mixopt/mixtures.h"

namespace mixopt {

// One proxy "scale": n-gram order, smoothing and training token budget.
struct ProxyConfig {
  int order = 2;
  SmoothingConfig smoothing;
  std::size_t token_budget = 200000;
  std::size_t segment_length = kDefaultSegmentLength;
};

// train_expert(sample_mixed_corpus(domains, lambda, budget, seed)).
NgramExpert train_proxy(std::span<const DomainCorpus> domains,
                        const MixtureWeights& lambda, const ProxyConfig& cfg,
                        std::uint64_t seed, std::string id = "proxy");

// Mean negative log-probability of the proxy on each validation domain.
LossVector measure(const NgramExpert& proxy,
                   std::span<const ValidationDomain> domains);

// Training seed of the proxy for `lambda` under `master_seed`. Depends only
// on the mixture's weights, so a one-hot mixture always reuses the seed of
// the corresponding data expert.
std::uint64_t mixture_seed(std::uint64_t master_seed,
                           const MixtureWeights& lambda);

struct MeasurementRecord {
  std::string mixture_id;
  MixtureWeights weights;
  LossVector losses;
};

struct MeasurementSet {
  std::vector<MeasurementRecord> records;
  int proxy_order = 0;
  std::size_t token_budget = 0;
  std::uint64_t master_seed = 0;

  // Ids unique, every record covers the same domains in the same order.
  void validate() const;
  std::vector<std::string> domains() const;
  std::size_t num_components() const;
};

// One proxy per mixture, trained in parallel; the result does not depend
// on `threads`.
MeasurementSet build_measurement_set(std::span<const DomainCorpus> domains,
                                     std::span<const ValidationDomain> val,
                                     std::span<const NamedMixture> mixtures,
                                     const ProxyConfig& cfg,
                                     std::uint64_t master_seed,
                                     unsigned threads = 1);

// Measurement CSV: mixture_id,domain_id,loss with 12 significant digits.
std::string measurements_to_csv(const MeasurementSet& set);
// Joins a measurement CSV with the mixtures it refers to.
MeasurementSet measurements_from_csv(std::string_view csv,
                                     std::span<const NamedMixture> mixtures);

}  // namespace mixopt

#endif  // MIXOPT_PROXY_H_
