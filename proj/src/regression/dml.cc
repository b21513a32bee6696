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

// L(x) = c + k * exp(t . x) fitted per target by least squares. k is
// parametrized as exp(kappa); the fit is a multi-start damped Gauss-Newton
// (Levenberg-Marquardt) seeded from a log-linear regression.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "mixopt/error.h"
#include "mixopt/regression.h"
#include "mixopt/rng.h"
#include "regression/internal.h"

namespace mixopt {
namespace {

constexpr double kMaxExponent = 700.0;

// Parameter layout: [c, kappa, t_0 .. t_{d-1}].
struct Problem {
  const FeatureRows& x;
  std::span<const double> y;

  double sse(const Eigen::VectorXd& p) const {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double z = p(1);
      for (std::size_t j = 0; j < x[i].size(); ++j) z += p(2 + j) * x[i][j];
      if (z > kMaxExponent) return std::numeric_limits<double>::infinity();
      const double r = p(0) + std::exp(z) - y[i];
      s += r * r;
    }
    return s;
  }

  void residual_jacobian(const Eigen::VectorXd& p, Eigen::VectorXd& r,
                         Eigen::MatrixXd& jac) const {
    const Eigen::Index n = static_cast<Eigen::Index>(x.size());
    r.resize(n);
    jac.resize(n, p.size());
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& xi = x[static_cast<std::size_t>(i)];
      double z = p(1);
      for (std::size_t j = 0; j < xi.size(); ++j) z += p(2 + j) * xi[j];
      const double e = std::exp(std::min(z, kMaxExponent));
      r(i) = p(0) + e - y[static_cast<std::size_t>(i)];
      jac(i, 0) = 1.0;
      jac(i, 1) = e;
      for (std::size_t j = 0; j < xi.size(); ++j) jac(i, 2 + j) = e * xi[j];
    }
  }
};

struct LmResult {
  Eigen::VectorXd params;
  double sse = 0.0;
  bool converged = false;
};

LmResult levenberg_marquardt(const Problem& prob, Eigen::VectorXd p,
                             int max_iterations) {
  LmResult out;
  double sse = prob.sse(p);
  double mu = 1e-3;
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  for (int it = 0; it < max_iterations; ++it) {
    prob.residual_jacobian(p, r, jac);
    const Eigen::VectorXd g = jac.transpose() * r;
    if (g.lpNorm<Eigen::Infinity>() <= 1e-14 * (1.0 + sse) || sse == 0.0) {
      out.converged = true;
      break;
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    bool improved = false;
    while (mu < 1e14) {
      Eigen::MatrixXd a = jtj;
      for (Eigen::Index d = 0; d < a.rows(); ++d) {
        a(d, d) += mu * (jtj(d, d) + 1e-12);
      }
      const Eigen::VectorXd step = a.ldlt().solve(-g);
      const Eigen::VectorXd trial = p + step;
      const double trial_sse = prob.sse(trial);
      if (trial_sse < sse) {
        const double rel = (sse - trial_sse) / std::max(sse, 1e-300);
        p = trial;
        sse = trial_sse;
        mu = std::max(mu / 3.0, 1e-15);
        improved = true;
        if (rel < 1e-15 || step.norm() <= 1e-15 * (1.0 + p.norm())) {
          out.converged = true;
        }
        break;
      }
      mu *= 4.0;
    }
    if (!improved) {
      // No descent step exists at any damping: a stationary point.
      out.converged = true;
      break;
    }
    if (out.converged) break;
  }
  out.params = std::move(p);
  out.sse = sse;
  return out;
}

DmlTargetParams fit_target(const FeatureRows& x, std::span<const double> y,
                           std::uint64_t seed, int starts, int max_iterations) {
  const std::size_t d = x.front().size();
  const double y_min = *std::min_element(y.begin(), y.end());
  const double y_max = *std::max_element(y.begin(), y.end());
  DmlTargetParams out;
  out.t.assign(d, 0.0);
  // Constant targets: the exponential term is unidentifiable; pick k = 0.
  if (y_max - y_min <= 1e-12 * std::max(1.0, std::abs(y_max))) {
    out.c = regression_internal::mean(y);
    out.k = 0.0;
    return out;
  }

  const double c0 = y_min > 0.0 ? 0.9 * y_min : y_min - 0.1 * (y_max - y_min);
  const Eigen::Index n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd design(n, static_cast<Eigen::Index>(d) + 1);
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    for (std::size_t j = 0; j < d; ++j) design(i, 1 + j) = x[i][j];
    z(i) = std::log(y[i] - c0);
  }
  const Eigen::VectorXd loglin =
      design.completeOrthogonalDecomposition().solve(z);
  Eigen::VectorXd init(static_cast<Eigen::Index>(d) + 2);
  init(0) = c0;
  init.tail(static_cast<Eigen::Index>(d) + 1) = loglin;

  const Problem prob{x, y};
  LmResult best;
  best.sse = std::numeric_limits<double>::infinity();
  const double spread = y_max - y_min;
  for (int s = 0; s < starts; ++s) {
    Eigen::VectorXd p = init;
    if (s > 0) {
      StreamRng rng(seed, static_cast<std::uint64_t>(s));
      p(0) = std::min(c0 + 0.5 * spread * sample_normal(rng), y_min - 1e-9);
      for (Eigen::Index j = 1; j < p.size(); ++j) {
        p(j) += 0.5 * sample_normal(rng);
      }
    }
    LmResult r = levenberg_marquardt(prob, p, max_iterations);
    if (r.sse < best.sse) best = std::move(r);
  }
  if (!std::isfinite(best.sse)) {
    throw NumericError("dml: every start diverged");
  }
  out.c = best.params(0);
  out.k = std::exp(best.params(1));
  for (std::size_t j = 0; j < d; ++j) out.t[j] = best.params(2 + j);
  out.converged = best.converged;
  return out;
}

}  // namespace

Predictor fit_dml(const MeasurementSet& data, const FeatureSpec& spec,
                  std::span<const ProbCache> caches,
                  const FitOptions& options) {
  const auto m = regression_internal::training_matrix(data, spec, caches);
  Predictor p;
  p.family = Family::kDml;
  p.features = spec;
  p.targets = m.targets;
  const std::size_t dim = m.x.front().size();
  if (m.x.size() < dim + 2) {
    p.warnings.push_back("dml: fewer than dim+2 records per domain");
  }
  DmlModel model;
  for (std::size_t j = 0; j < m.targets.size(); ++j) {
    DmlTargetParams t =
        fit_target(m.x, m.y[j], derive_seed(options.seed, j),
                   std::max(options.dml_starts, 1), options.dml_max_iterations);
    if (!t.converged) {
      p.warnings.push_back("dml: no convergence for " + m.targets[j] +
                           " after " +
                           std::to_string(options.dml_max_iterations) +
                           " iterations; using best-so-far");
    }
    model.targets.push_back(std::move(t));
  }
  p.model = std::move(model);
  p.training_rows = m.x.size();
  p.num_components = data.num_components();
  return p;
}

}  // namespace mixopt
