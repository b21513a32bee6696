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

// L_i(lambda) = A_i / lambda_w^alpha_i, one log-log OLS per target using the
// weight of the training domain the target is paired with.

#include <cmath>

#include "mixopt/error.h"
#include "mixopt/regression.h"

namespace mixopt {
namespace {

BimixTargetParams fit_target(const MeasurementSet& data, std::size_t target,
                             std::size_t weight_index,
                             std::vector<std::string>& warnings) {
  std::vector<double> lx, ly;
  std::size_t dropped = 0;
  for (const auto& r : data.records) {
    const double w = r.weights[weight_index];
    const double loss = r.losses.values[target];
    if (!(w > 0.0)) {
      ++dropped;
      continue;
    }
    if (!(loss > 0.0)) {
      throw NumericError("bimix: non-positive loss in record " + r.mixture_id);
    }
    lx.push_back(std::log(w));
    ly.push_back(std::log(loss));
  }
  const std::string& domain = data.records.front().losses.domains[target];
  if (dropped > 0) {
    warnings.push_back("bimix: excluded " + std::to_string(dropped) +
                       " records with zero weight for " + domain);
  }
  if (lx.empty()) {
    throw InvalidArgument("bimix: every record has zero weight for " + domain);
  }
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  BimixTargetParams out;
  out.weight_index = weight_index;
  // Rank-deficient design (one point, or one distinct weight): flat fit
  // through the geometric mean.
  const double slope = sxx > 1e-300 ? sxy / sxx : 0.0;
  out.alpha = -slope;
  out.a = std::exp(my - slope * mx);
  return out;
}

}  // namespace

Predictor fit_bimix(const MeasurementSet& data, const FitOptions& options) {
  if (data.records.empty()) throw InvalidArgument("bimix: no training records");
  data.validate();
  const std::vector<std::string> domains = data.domains();
  const std::size_t k = data.num_components();
  Predictor p;
  p.family = Family::kBimix;
  p.features = FeatureSpec::lambda_only();
  BimixModel model;
  for (std::size_t j = 0; j < domains.size(); ++j) {
    std::size_t index = 0;
    if (options.bimix_weight_index.empty()) {
      // Without a mapping, target j pairs with weight j.
      if (domains.size() != k) {
        throw ConfigError(
            "bimix: map each validation domain to a training domain "
            "(targets and components differ in number)");
      }
      index = j;
    } else {
      const auto it = options.bimix_weight_index.find(domains[j]);
      if (it == options.bimix_weight_index.end()) continue;
      index = it->second;
    }
    if (index >= k) {
      throw ConfigError("bimix: weight index out of range for " + domains[j]);
    }
    model.targets.push_back(fit_target(data, j, index, p.warnings));
    p.targets.push_back(domains[j]);
  }
  if (p.targets.empty()) {
    throw ConfigError("bimix: no validation domain is mapped to a weight");
  }
  p.model = std::move(model);
  p.training_rows = data.records.size();
  p.num_components = k;
  return p;
}

}  // namespace mixopt
