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

// Mixture-of-data-experts loss estimates over cached per-token
// probabilities, loss aggregators, and the per-domain interpolation
// baseline.

#ifndef MIXOPT_MDE_H_
#define MIXOPT_MDE_H_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mixopt/experts.h"
#include "mixopt/mixture_weights.h"

namespace mixopt {

// Per-domain mean negative log-probability in nats per token.
struct LossVector {
  std::vector<std::string> domains;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  // Throws InvalidArgument if `domain` is absent.
  double at(const std::string& domain) const;
  std::optional<double> find(const std::string& domain) const;
  void push_back(std::string domain, double value);

  friend bool operator==(const LossVector&, const LossVector&) = default;
};

// g(L_1, ..., L_m). Groups are lists of validation domain ids.
struct Aggregator {
  enum class Kind { kAverage, kSumOfGroupAverages, kWeighted };

  std::string name;
  Kind kind = Kind::kAverage;
  // kAverage: one group. kSumOfGroupAverages: two or more groups.
  // kWeighted: one group aligned with `weights`.
  std::vector<std::vector<std::string>> groups;
  std::vector<double> weights;

  static Aggregator average(std::string name, std::vector<std::string> group);
  static Aggregator sum_of_averages(std::string name,
                                    std::vector<std::string> first,
                                    std::vector<std::string> second);
  static Aggregator weighted(std::string name, std::vector<std::string> group,
                             std::vector<double> weights);

  void validate() const;
  // Every domain id the aggregator reads, in first-seen order.
  std::vector<std::string> domains() const;

  nlohmann::json to_json() const;
  static Aggregator from_json(const nlohmann::json& j);
};

double aggregate(const LossVector& losses, const Aggregator& g);

// -(1/|V|) sum_t ln(sum_i lambda_i p_i(t)), accumulated in ascending token
// order with the inner sum in ascending expert order.
double mde_domain_loss(const ProbCache& cache, const MixtureWeights& lambda);

// One MDE loss per cache, in the order given. All caches must list the
// same experts in the same order.
std::vector<double> mde_features(std::span<const ProbCache> caches,
                                 const MixtureWeights& lambda);

// Same as mde_features but keyed by validation domain id.
LossVector mde_losses(std::span<const ProbCache> caches,
                      const MixtureWeights& lambda);

// Looks up the cache of `domain_id`; throws InvalidArgument if absent.
const ProbCache& find_cache(std::span<const ProbCache> caches,
                            const std::string& domain_id);

// Per-expert average realized-token probability on one domain.
std::vector<double> mean_token_probs(const ProbCache& cache);

// score_j = -ln(sum_i lambda_i mean_probs[j][i]). A ranking score built from
// dataset-level average probabilities, not a calibrated loss.
std::vector<double> per_domain_interpolation_loss(
    const std::vector<std::vector<double>>& mean_probs,
    const MixtureWeights& lambda);

}  // namespace mixopt

#endif  // MIXOPT_MDE_H_
