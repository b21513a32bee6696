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

// Exact GP regression, one independent GP per target domain with shared
// squared-exponential kernel hyperparameters (a separable multi-task kernel
// with identity task covariance).

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "mixopt/error.h"
#include "mixopt/regression.h"
#include "regression/internal.h"

namespace mixopt {
namespace {

double se_kernel(std::span<const double> a, std::span<const double> b,
                 const GpHyperparameters& h) {
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
  return h.signal_variance *
         std::exp(-d2 / (2.0 * h.length_scale * h.length_scale));
}

struct GpFit {
  Eigen::MatrixXd lower;
  std::vector<Eigen::VectorXd> alpha;
  double lml = 0.0;
};

std::optional<GpFit> try_fit(const FeatureRows& x,
                             const std::vector<std::vector<double>>& centered,
                             const GpHyperparameters& h) {
  const Eigen::Index n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      k(i, j) = k(j, i) = se_kernel(x[i], x[j], h);
    }
    k(i, i) += h.noise;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) return std::nullopt;
  GpFit fit;
  fit.lower = llt.matrixL();
  // Exact duplicates without noise leave rounding-level pivots.
  const double pivot_floor = 1e-10 * (h.signal_variance + h.noise);
  double log_det_half = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = fit.lower(i, i);
    if (!(d * d > pivot_floor) || !std::isfinite(d)) return std::nullopt;
    log_det_half += std::log(d);
  }
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  for (const auto& y : centered) {
    const Eigen::VectorXd yv =
        Eigen::Map<const Eigen::VectorXd>(y.data(), n);
    Eigen::VectorXd a = llt.solve(yv);
    fit.lml += -0.5 * yv.dot(a) - log_det_half - 0.5 * n * log_2pi;
    fit.alpha.push_back(std::move(a));
  }
  if (!std::isfinite(fit.lml)) return std::nullopt;
  return fit;
}

}  // namespace

Predictor fit_gp(const MeasurementSet& data, const FeatureSpec& spec,
                 std::span<const ProbCache> caches,
                 const FitOptions& options) {
  // A single record is accepted; the GP then interpolates it exactly.
  const auto m = regression_internal::training_matrix(data, spec, caches);
  const std::vector<double> length_scales =
      options.gp_length_scales.empty() ? std::vector<double>{0.1, 0.3, 1.0, 3.0}
                                       : options.gp_length_scales;
  const std::vector<double> signal_variances =
      options.gp_signal_variances.empty() ? std::vector<double>{0.5, 1.0, 2.0}
                                          : options.gp_signal_variances;
  const std::vector<double> noises =
      options.gp_noises.empty() ? std::vector<double>{1e-6, 1e-4, 1e-2}
                                : options.gp_noises;

  GpModel model;
  model.standardizer = Standardizer::fit(m.x);
  for (const auto& r : m.x) model.inputs.push_back(model.standardizer.apply(r));
  std::vector<std::vector<double>> centered;
  for (const auto& y : m.y) {
    const double mu = regression_internal::mean(y);
    model.means.push_back(mu);
    std::vector<double> c(y.begin(), y.end());
    for (double& v : c) v -= mu;
    centered.push_back(std::move(c));
  }

  std::optional<GpFit> best;
  for (double ls : length_scales) {
    for (double sv : signal_variances) {
      for (double noise : noises) {
        const GpHyperparameters h{ls, sv, noise};
        auto fit = try_fit(model.inputs, centered, h);
        if (fit && (!best || fit->lml > best->lml)) {
          best = std::move(fit);
          model.hyper = h;
        }
      }
    }
  }
  if (!best) {
    throw NumericError(
        "gp: kernel matrix is singular for every hyperparameter setting "
        "(duplicate inputs?); raise the noise floor");
  }
  const std::size_t n = model.inputs.size();
  model.cholesky.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      model.cholesky[i * n + j] = best->lower(static_cast<Eigen::Index>(i),
                                              static_cast<Eigen::Index>(j));
    }
  }
  for (const auto& a : best->alpha) {
    model.alpha.emplace_back(a.data(), a.data() + a.size());
  }
  model.log_marginal_likelihood = best->lml;

  Predictor p;
  p.family = Family::kGp;
  p.features = spec;
  p.targets = m.targets;
  p.model = std::move(model);
  p.training_rows = n;
  p.num_components = data.num_components();
  return p;
}

// Used by Predictor::predict.
void regression_internal::gp_predict(const GpModel& model,
                                     std::span<const double> raw_x,
                                     std::vector<double>& mean,
                                     std::vector<double>& variance) {
  const std::vector<double> x = model.standardizer.apply(raw_x);
  const std::size_t n = model.inputs.size();
  Eigen::VectorXd ks(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    ks(static_cast<Eigen::Index>(i)) = se_kernel(model.inputs[i], x, model.hyper);
  }
  mean.clear();
  for (std::size_t j = 0; j < model.alpha.size(); ++j) {
    double m = model.means[j];
    for (std::size_t i = 0; i < n; ++i) m += ks(static_cast<Eigen::Index>(i)) * model.alpha[j][i];
    mean.push_back(m);
  }
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                       Eigen::RowMajor>>
      lower(model.cholesky.data(), static_cast<Eigen::Index>(n),
            static_cast<Eigen::Index>(n));
  const Eigen::VectorXd v =
      lower.triangularView<Eigen::Lower>().solve(ks);
  const double var = std::max(0.0, model.hyper.signal_variance - v.squaredNorm());
  variance.assign(model.alpha.size(), var);
}

}  // namespace mixopt
