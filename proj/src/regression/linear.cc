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

#include <Eigen/Dense>
#include <algorithm>
#include <limits>

#include "mixopt/error.h"
#include "mixopt/regression.h"
#include "regression/internal.h"

namespace mixopt {

const std::vector<double>& default_ridge_grid() {
  static const std::vector<double> grid = {1e-4, 1e-3, 1e-2, 1e-1,
                                           1.0,  10.0, 100.0};
  return grid;
}

std::pair<std::vector<double>, double> fit_ridge(const FeatureRows& x,
                                                 std::span<const double> y,
                                                 double alpha) {
  if (x.empty() || x.size() != y.size()) {
    throw InvalidArgument("ridge: need matching, non-empty rows and targets");
  }
  if (!(alpha > 0.0)) throw InvalidArgument("ridge: alpha must be positive");
  const Eigen::Index n = static_cast<Eigen::Index>(x.size());
  const Eigen::Index d = static_cast<Eigen::Index>(x.front().size());
  Eigen::MatrixXd xm(n, d);
  Eigen::VectorXd yv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < d; ++c) xm(i, c) = x[i][c];
    yv(i) = y[i];
  }
  const Eigen::RowVectorXd x_mean = xm.colwise().mean();
  const double y_mean = yv.mean();
  const Eigen::MatrixXd xc = xm.rowwise() - x_mean;
  const Eigen::VectorXd yc = yv.array() - y_mean;
  Eigen::MatrixXd gram = xc.transpose() * xc;
  gram.diagonal().array() += alpha;
  const Eigen::VectorXd w = gram.ldlt().solve(xc.transpose() * yc);
  const double intercept = y_mean - x_mean.dot(w);
  return {std::vector<double>(w.data(), w.data() + d), intercept};
}

namespace {

double dot_plus(std::span<const double> w, std::span<const double> x,
                double b) {
  double s = b;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[i];
  return s;
}

// Standardize on the training rows, then ridge.
std::vector<double> ridge_fit_predict(const FeatureRows& tx,
                                      std::span<const double> ty,
                                      const FeatureRows& vx, double alpha) {
  const Standardizer s = Standardizer::fit(tx);
  FeatureRows sx;
  sx.reserve(tx.size());
  for (const auto& r : tx) sx.push_back(s.apply(r));
  const auto [w, b] = fit_ridge(sx, ty, alpha);
  std::vector<double> out;
  out.reserve(vx.size());
  for (const auto& r : vx) out.push_back(dot_plus(w, s.apply(r), b));
  return out;
}

}  // namespace

Predictor fit_linear(const MeasurementSet& data, const FeatureSpec& spec,
                     std::span<const ProbCache> caches,
                     const FitOptions& options) {
  using regression_internal::cv_mse;
  const auto m = regression_internal::training_matrix(data, spec, caches);
  const std::vector<double>& grid =
      options.ridge_grid.empty() ? default_ridge_grid() : options.ridge_grid;
  const std::size_t n = m.x.size();
  const std::size_t dim = m.x.front().size();

  Predictor p;
  p.family = Family::kLinear;
  p.features = spec;
  p.targets = m.targets;
  if (n < std::max(options.cv_folds, dim + 1)) {
    p.warnings.push_back("linear: only " + std::to_string(n) +
                         " records for " + std::to_string(dim) +
                         " features and " + std::to_string(options.cv_folds) +
                         " folds");
  }
  LinearModel model;
  model.standardizer = Standardizer::fit(m.x);
  FeatureRows sx;
  for (const auto& r : m.x) sx.push_back(model.standardizer.apply(r));
  const std::size_t folds = std::min(options.cv_folds, n);
  for (std::size_t j = 0; j < m.targets.size(); ++j) {
    double best_alpha = grid.front();
    if (folds >= 2) {
      double best = std::numeric_limits<double>::infinity();
      for (double alpha : grid) {
        const double mse = cv_mse(
            m.x, m.y[j], folds,
            [alpha](const FeatureRows& tx, std::span<const double> ty,
                    const FeatureRows& vx) {
              return ridge_fit_predict(tx, ty, vx, alpha);
            });
        if (mse < best) {
          best = mse;
          best_alpha = alpha;
        }
      }
    }
    auto [w, b] = fit_ridge(sx, m.y[j], best_alpha);
    model.ridge_alpha.push_back(best_alpha);
    model.coef.push_back(std::move(w));
    model.intercept.push_back(b);
  }
  p.model = std::move(model);
  p.training_rows = n;
  p.num_components = data.num_components();
  return p;
}

}  // namespace mixopt
