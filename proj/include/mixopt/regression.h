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

// Surrogate regressors mapping a mixture (optionally augmented with MDE
// loss features) to predicted per-domain validation losses.

#ifndef MIXOPT_REGRESSION_H_
#define MIXOPT_REGRESSION_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "mixopt/experts.h"
#include "mixopt/mde.h"
#include "mixopt/mixture_weights.h"
#include "mixopt/proxy.h"

namespace mixopt {

using FeatureRows = std::vector<std::vector<double>>;

enum class FeatureMode { kLambdaOnly, kMdeOnly, kLambdaMde };

struct FeatureSpec {
  FeatureMode mode = FeatureMode::kLambdaOnly;
  // Validation domains whose MDE losses become features, in this order.
  std::vector<std::string> mde_domains;

  bool uses_mde() const { return mode != FeatureMode::kLambdaOnly; }
  void validate() const;
  // "lambda", "mde" or "lambda+mde".
  std::string mode_name() const;

  static FeatureSpec lambda_only() { return {}; }
  static FeatureSpec with_mde(FeatureMode mode,
                              std::vector<std::string> domains) {
    return {mode, std::move(domains)};
  }

  nlohmann::json to_json() const;
  static FeatureSpec from_json(const nlohmann::json& j);
};

FeatureMode parse_feature_mode(std::string_view name);

// lambda-only: lambda. mde-only: MDE losses over spec.mde_domains.
// lambda+mde: [lambda || MDE]. Caches are not touched in lambda-only mode.
std::vector<double> build_features(const MixtureWeights& lambda,
                                   std::span<const ProbCache> caches,
                                   const FeatureSpec& spec);

enum class Family {
  kEmpiricalMean,
  kLinear,
  kGbm,
  kGp,
  kDml,
  kBimix,
  kMdeDirect,
};

std::string_view family_name(Family family);
Family parse_family(std::string_view name);

// Whether one-hot (expert) mixtures are used as training rows by default.
// Only GP benefits from them; linear and GBM exclude them.
bool default_include_corners(Family family);

// Per-feature affine map to zero mean and unit variance, estimated on the
// training rows only. Constant features keep scale 1.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const FeatureRows& rows);
  std::vector<double> apply(std::span<const double> x) const;
};

struct EmpiricalMeanModel {
  std::vector<double> means;
};

struct LinearModel {
  Standardizer standardizer;
  std::vector<double> ridge_alpha;          // per target
  std::vector<std::vector<double>> coef;    // per target, standardized space
  std::vector<double> intercept;            // per target
};

struct GbmConfig {
  int n_estimators = 100;
  double learning_rate = 0.1;
  int max_depth = 3;

  friend bool operator==(const GbmConfig&, const GbmConfig&) = default;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  double value = 0.0;
  int left = -1;
  int right = -1;
};

// x[feature] <= threshold goes left.
struct RegressionTree {
  std::vector<TreeNode> nodes;
  double predict(std::span<const double> x) const;
};

struct GbmTargetModel {
  GbmConfig config;
  double init = 0.0;
  std::vector<RegressionTree> trees;

  double predict(std::span<const double> x) const;
};

struct GbmModel {
  std::vector<GbmTargetModel> targets;
};

struct GpHyperparameters {
  double length_scale = 1.0;
  double signal_variance = 1.0;
  double noise = 1e-4;
};

struct GpModel {
  Standardizer standardizer;
  GpHyperparameters hyper;
  FeatureRows inputs;                       // standardized training inputs
  std::vector<double> means;                // per target
  std::vector<std::vector<double>> alpha;   // per target, K^-1 (y - mean)
  std::vector<double> cholesky;             // lower factor, row-major n x n
  double log_marginal_likelihood = 0.0;
};

struct DmlTargetParams {
  double c = 0.0;
  double k = 0.0;
  std::vector<double> t;
  bool converged = true;
};

struct DmlModel {
  std::vector<DmlTargetParams> targets;
};

struct BimixTargetParams {
  double a = 1.0;
  double alpha = 0.0;
  std::size_t weight_index = 0;
};

struct BimixModel {
  std::vector<BimixTargetParams> targets;
};

struct MdeDirectModel {};

using ModelParams = std::variant<EmpiricalMeanModel, LinearModel, GbmModel,
                                 GpModel, DmlModel, BimixModel, MdeDirectModel>;

struct Prediction {
  LossVector mean;
  // Latent posterior variance per target (GP only; empty otherwise).
  std::vector<double> variance;
};

class Predictor {
 public:
  Family family = Family::kEmpiricalMean;
  FeatureSpec features;
  std::vector<std::string> targets;
  ModelParams model;
  std::vector<std::string> warnings;
  std::string training_hash;
  std::size_t training_rows = 0;
  // Mixture dimension k seen at fit time; 0 when unchecked (mde-direct).
  std::size_t num_components = 0;

  // Deterministic. Throws InvalidArgument for BiMix at a zero weight and
  // when required caches are missing.
  Prediction predict(const MixtureWeights& lambda,
                     std::span<const ProbCache> caches) const;

  nlohmann::json to_json() const;
  static Predictor from_json(const nlohmann::json& j);
};

// Overrides for hyperparameter grids; empty vectors select the defaults.
struct FitOptions {
  std::size_t cv_folds = 5;
  std::uint64_t seed = 0;
  std::optional<bool> include_corners;
  std::vector<double> ridge_grid;
  std::vector<GbmConfig> gbm_grid;
  std::vector<double> gp_length_scales;
  std::vector<double> gp_signal_variances;
  std::vector<double> gp_noises;
  int dml_starts = 16;
  int dml_max_iterations = 500;
  // BiMix: validation domain id -> index of its training-domain weight.
  std::map<std::string, std::size_t> bimix_weight_index;
};

const std::vector<double>& default_ridge_grid();
const std::vector<GbmConfig>& default_gbm_grid();

Predictor fit_empirical_mean(const MeasurementSet& data);
Predictor fit_linear(const MeasurementSet& data, const FeatureSpec& spec,
                     std::span<const ProbCache> caches,
                     const FitOptions& options = {});
Predictor fit_gbm(const MeasurementSet& data, const FeatureSpec& spec,
                  std::span<const ProbCache> caches,
                  const FitOptions& options = {});
Predictor fit_gp(const MeasurementSet& data, const FeatureSpec& spec,
                 std::span<const ProbCache> caches,
                 const FitOptions& options = {});
Predictor fit_dml(const MeasurementSet& data, const FeatureSpec& spec,
                  std::span<const ProbCache> caches,
                  const FitOptions& options = {});
Predictor fit_bimix(const MeasurementSet& data, const FitOptions& options);
// Predicts mde_domain_loss for every target directly from the caches.
Predictor make_mde_direct(std::vector<std::string> targets);

// Dispatches on `family` after applying the corner policy
// (options.include_corners, else default_include_corners). Records the
// training hash and row count.
Predictor fit_predictor(Family family, const MeasurementSet& data,
                        const FeatureSpec& spec,
                        std::span<const ProbCache> caches,
                        const FitOptions& options = {});

// Building blocks, exposed for testing.

// Ridge regression with an unpenalized intercept on already standardized
// rows: minimizes ||y - b - Xw||^2 + alpha ||w||^2.
std::pair<std::vector<double>, double> fit_ridge(const FeatureRows& x,
                                                 std::span<const double> y,
                                                 double alpha);

// Least-squares regression tree, exhaustive split search, minimum one sample
// per leaf. Depth 0 is a single leaf.
RegressionTree fit_regression_tree(const FeatureRows& x,
                                   std::span<const double> y, int max_depth);

// Least-squares gradient boosting starting from the mean.
GbmTargetModel fit_boosting(const FeatureRows& x, std::span<const double> y,
                            const GbmConfig& config);

// Fold id per row for `folds`-fold CV. Rows are ranked by (features, target)
// and dealt round-robin, so the assignment does not depend on row order.
std::vector<std::size_t> cv_fold_ids(const FeatureRows& x,
                                     std::span<const double> y,
                                     std::size_t folds);

}  // namespace mixopt

#endif  // MIXOPT_REGRESSION_H_
