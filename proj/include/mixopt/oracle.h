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

// Exact computations on finite prefix/next-token distributions: the
// loss-minimizing model of a mixture, its expert-combination form, and the
// gap to the prefix-independent MDE combination.

#ifndef MIXOPT_ORACLE_H_
#define MIXOPT_ORACLE_H_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "mixopt/corpus.h"
#include "mixopt/mixture_weights.h"

namespace mixopt {

// D(x) over prefixes x in [0, |X|) and D(y|x) over tokens y in [0, |Y|).
struct FiniteDomain {
  std::vector<double> prefix_marginal;
  std::vector<std::vector<double>> conditionals;  // [x][y]

  std::size_t num_prefixes() const { return prefix_marginal.size(); }
  std::size_t vocab_size() const {
    return conditionals.empty() ? 0 : conditionals.front().size();
  }
  // Marginal and every row sum to 1 within 1e-12, entries non-negative.
  void validate() const;

  // Prefix = previous token of a Markov chain.
  static FiniteDomain from_markov(const SyntheticDomainSpec& spec);
};

// Row x is nullopt where the mixture puts no mass on x.
using ConditionalTable = std::vector<std::optional<std::vector<double>>>;

// p*(y|x) = sum_i lambda_i D_i(x) D_i(y|x) / sum_j lambda_j D_j(x).
ConditionalTable optimal_mixture_model(std::span<const FiniteDomain> domains,
                                       const MixtureWeights& lambda);

// lambda'_i(x) = D_i(x) lambda_i / sum_j D_j(x) lambda_j.
std::vector<std::optional<std::vector<double>>> prefix_weights(
    std::span<const FiniteDomain> domains, const MixtureWeights& lambda);

// sum_i lambda'_i(x) D_i(y|x).
ConditionalTable expert_combination(std::span<const FiniteDomain> domains,
                                    const MixtureWeights& lambda);

// sum_i lambda_i D_i(y|x), defined on every row.
ConditionalTable mde_combination(std::span<const FiniteDomain> domains,
                                 const MixtureWeights& lambda);

struct PropositionCheck {
  double max_abs_diff = 0.0;
  std::size_t defined_rows = 0;
  bool pass = false;
};

// Max |optimal_mixture_model - expert_combination| over defined rows.
PropositionCheck verify_proposition(std::span<const FiniteDomain> domains,
                                    const MixtureWeights& lambda,
                                    double tol = 1e-12);

struct GapReport {
  // Max over defined (x, y) of |p*(y|x) - sum_i lambda_i D_i(y|x)|.
  double max_pointwise_gap = 0.0;
  // Cross-entropy of the MDE combination minus that of p* under the
  // mixture distribution: sum_x D(x) KL(p*(.|x) || mde(.|x)) >= 0.
  double expected_loss_gap = 0.0;
  double optimal_loss = 0.0;
  double mde_loss = 0.0;
};

GapReport mde_gap(std::span<const FiniteDomain> domains,
                  const MixtureWeights& lambda);

struct RandomInstance {
  std::uint64_t seed = 0;
  std::vector<FiniteDomain> domains;
  MixtureWeights lambda = MixtureWeights::uniform(1);
};

// k in [1, max_k], |X| in [1, max_prefixes], |Y| in [2, max_vocab]; about a
// third of entries, weights and marginals are zeroed to exercise sparse
// supports.
RandomInstance random_instance(std::uint64_t seed, std::size_t max_k = 4,
                               std::size_t max_prefixes = 5,
                               std::size_t max_vocab = 6);

struct OracleInstanceResult {
  std::uint64_t seed = 0;
  std::size_t k = 0;
  std::size_t num_prefixes = 0;
  std::size_t vocab_size = 0;
  PropositionCheck check;
  GapReport gap;
};

struct OracleReport {
  std::uint64_t seed = 0;
  double tol = 0.0;
  std::vector<OracleInstanceResult> instances;
  double max_abs_diff = 0.0;
  std::size_t failures = 0;
  bool all_gaps_non_negative = true;

  bool pass() const { return failures == 0 && all_gaps_non_negative; }
  nlohmann::json to_json() const;
};

// verify_proposition and mde_gap on `n` random instances; instance i uses
// seed derive_seed(seed, i).
OracleReport verify_random_instances(std::uint64_t seed, std::size_t n,
                                     double tol = 1e-12,
                                     unsigned threads = 1);

}  // namespace mixopt

#endif  // MIXOPT_ORACLE_H_
