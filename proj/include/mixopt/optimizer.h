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

// Derivative-free search over the mixture simplex for the mixture with the
// lowest aggregated predicted loss.

#ifndef MIXOPT_OPTIMIZER_H_
#define MIXOPT_OPTIMIZER_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mixopt/mde.h"
#include "mixopt/mixture_weights.h"
#include "mixopt/regression.h"

namespace mixopt {

struct OptimizeConfig {
  std::size_t n_random = 4096;
  int n_refine_iters = 200;
  double step_init = 0.1;
  double tol = 1e-6;
  std::uint64_t seed = 0;
  // Also report smooth_mixture(best).
  bool smoothing = false;
  unsigned threads = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static OptimizeConfig from_json(const nlohmann::json& j);
};

// Must be safe to call concurrently.
using Objective = std::function<double(const MixtureWeights&)>;

// lambda -> aggregate(predictor.predict(lambda), g). Holds references to its
// arguments, which must outlive it.
Objective make_objective(const Predictor& predictor, const Aggregator& g,
                         std::span<const ProbCache> caches);

struct OptimizeResult {
  MixtureWeights best = MixtureWeights::uniform(1);
  double score = 0.0;
  std::optional<MixtureWeights> smoothed;
  // Every objective call, including ones that threw.
  std::size_t evaluations = 0;
  std::size_t skipped = 0;
  std::vector<std::string> skip_reasons;  // first few distinct messages
  std::size_t stage1_candidates = 0;
  std::size_t stage1_best_index = 0;
  int refine_iterations = 0;
  double final_step = 0.0;

  nlohmann::json to_json() const;
};

// Stage 1 scores n_random Dirichlet(1) draws, then the k corners, then the
// uniform mixture, keeping the lowest score (lowest index on ties). Stage 2
// runs exchange moves from the best candidate: for every ordered pair (a, b)
// move min(step, lambda_a) from a to b, take the best strict improvement,
// and halve the step when none exists, until step < tol or the iteration
// cap. Candidates whose evaluation throws are skipped and counted.
OptimizeResult optimize_objective(const Objective& objective, std::size_t k,
                                  const OptimizeConfig& cfg);

OptimizeResult optimize(const Predictor& predictor, const Aggregator& g,
                        std::span<const ProbCache> caches,
                        const OptimizeConfig& cfg);

}  // namespace mixopt

#endif  // MIXOPT_OPTIMIZER_H_
