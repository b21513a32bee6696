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

#ifndef MIXOPT_SRC_REGRESSION_INTERNAL_H_
#define MIXOPT_SRC_REGRESSION_INTERNAL_H_

#include <span>
#include <string>
#include <vector>

#include "mixopt/regression.h"

namespace mixopt::regression_internal {

// Feature rows and per-target columns of a measurement set.
struct TrainingMatrix {
  FeatureRows x;
  std::vector<std::string> targets;
  std::vector<std::vector<double>> y;  // y[target][row]
};

TrainingMatrix training_matrix(const MeasurementSet& data,
                               const FeatureSpec& spec,
                               std::span<const ProbCache> caches);

double mean(std::span<const double> v);

// Posterior mean and latent variance per target at an unstandardized input.
void gp_predict(const GpModel& model, std::span<const double> raw_x,
                std::vector<double>& mean, std::vector<double>& variance);

// Mean squared error of a fit/predict routine under K-fold CV. `fit_predict`
// receives (train_x, train_y, test_x) and returns test predictions.
template <typename FitPredict>
double cv_mse(const FeatureRows& x, std::span<const double> y,
              std::size_t folds, FitPredict&& fit_predict) {
  const std::vector<std::size_t> fold = cv_fold_ids(x, y, folds);
  double se = 0.0;
  std::size_t count = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    FeatureRows tx, vx;
    std::vector<double> ty, vy;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (fold[i] == f) {
        vx.push_back(x[i]);
        vy.push_back(y[i]);
      } else {
        tx.push_back(x[i]);
        ty.push_back(y[i]);
      }
    }
    if (vx.empty() || tx.empty()) continue;
    const std::vector<double> pred = fit_predict(tx, ty, vx);
    for (std::size_t i = 0; i < vy.size(); ++i) {
      se += (pred[i] - vy[i]) * (pred[i] - vy[i]);
      ++count;
    }
  }
  return count == 0 ? 0.0 : se / static_cast<double>(count);
}

}  // namespace mixopt::regression_internal

#endif  // MIXOPT_SRC_REGRESSION_INTERNAL_H_
