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

// Ranking and error metrics, repeated train/test splits and learning curves.

#ifndef MIXOPT_EVAL_H_
#define MIXOPT_EVAL_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mixopt/mde.h"
#include "mixopt/proxy.h"
#include "mixopt/regression.h"

namespace mixopt {

double mse(std::span<const double> pred, std::span<const double> truth);

// Ranks starting at 1; tied values share the mean of their ranks.
std::vector<double> average_ranks(std::span<const double> values);

// Pearson correlation of average ranks. Throws NumericError("rank correlation
// undefined") if either side is constant.
double spearman(std::span<const double> pred, std::span<const double> truth);

// Over unordered pairs with distinct true values, the fraction ordered the
// same way by `pred`; prediction ties count one half.
double pairwise_ranking_accuracy(std::span<const double> pred,
                                 std::span<const double> truth);

// pred[g][i], truth[g][i] for aggregate g and mixture i. A pair is
// comparable when its true values differ under every aggregate and correct
// when every aggregate orders it correctly (ties are incorrect).
double joint_pairwise_accuracy(const std::vector<std::vector<double>>& pred,
                               const std::vector<std::vector<double>>& truth);

struct SplitPlan {
  std::size_t n_repeats = 5;
  // Training records per split, expert corners included.
  std::size_t train_size = 25;
  // Held-out records per split; all remaining records when unset.
  std::optional<std::size_t> test_size;
  std::uint64_t seed = 0;

  void validate(std::size_t total, std::size_t corners) const;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Corners always train. The other records, ordered by mixture id, are
// shuffled with stream (seed, repeat); training takes the front of the
// shuffle and the held-out set the back. The split does not depend on record
// order, and for a fixed test_size the held-out set does not depend on
// train_size.
Split make_split(const MeasurementSet& data, const SplitPlan& plan,
                 std::size_t repeat);

// A named predictor configuration, e.g. "Linear+MDE".
struct ModelSpec {
  std::string name;
  Family family = Family::kLinear;
  FeatureSpec features;

  static ModelSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct MetricSummary {
  std::vector<std::optional<double>> per_repeat;  // nullopt = undefined
  std::optional<double> mean;
  double ci95 = 0.0;  // 1.96 * sd / sqrt(n) over the defined repeats

  static MetricSummary from_values(std::vector<std::optional<double>> values);
  nlohmann::json to_json() const;
};

struct TargetMetrics {
  std::string target;  // aggregator name or validation domain id
  bool is_aggregate = false;
  MetricSummary mse;
  MetricSummary spearman;
  MetricSummary pairwise;
};

struct EvalReport {
  std::string model;
  Family family = Family::kLinear;
  std::string feature_mode;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::size_t n_repeats = 0;
  std::vector<TargetMetrics> targets;  // aggregates first, then domains
  std::optional<MetricSummary> joint_pairwise;
  std::vector<std::string> warnings;

  const TargetMetrics& target(const std::string& name) const;
  nlohmann::json to_json() const;
};

// Fits every model on each split's training records and scores it on the
// held-out records. Repeats run in parallel; results do not depend on
// `threads`.
std::vector<EvalReport> run_splits(const MeasurementSet& data,
                                   std::span<const ModelSpec> models,
                                   std::span<const Aggregator> aggregators,
                                   const SplitPlan& plan,
                                   std::span<const ProbCache> caches,
                                   const FitOptions& options = {},
                                   unsigned threads = 1);

// run_splits for one model at each training size.
std::vector<EvalReport> learning_curve(const MeasurementSet& data,
                                       const ModelSpec& model,
                                       std::span<const Aggregator> aggregators,
                                       std::span<const std::size_t> sizes,
                                       const SplitPlan& plan,
                                       std::span<const ProbCache> caches,
                                       const FitOptions& options = {},
                                       unsigned threads = 1);

// One row per report: MSE and Spearman rho (mean +- CI) per aggregate.
std::string render_table(std::span<const EvalReport> reports);

// One row per training size: mean rho per aggregate.
std::string render_learning_curve(std::span<const EvalReport> reports);

}  // namespace mixopt

#endif  // MIXOPT_EVAL_H_
