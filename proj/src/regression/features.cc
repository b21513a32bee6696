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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mixopt/error.h"
#include "mixopt/regression.h"
#include "regression/internal.h"

namespace mixopt {

void FeatureSpec::validate() const {
  if (uses_mde() && mde_domains.empty()) {
    throw InvalidArgument("feature spec uses MDE features but lists no domains");
  }
}

std::string FeatureSpec::mode_name() const {
  switch (mode) {
    case FeatureMode::kLambdaOnly:
      return "lambda";
    case FeatureMode::kMdeOnly:
      return "mde";
    case FeatureMode::kLambdaMde:
      return "lambda+mde";
  }
  return "?";
}

FeatureMode parse_feature_mode(std::string_view name) {
  if (name == "lambda" || name == "lambda-only") return FeatureMode::kLambdaOnly;
  if (name == "mde" || name == "mde-only") return FeatureMode::kMdeOnly;
  if (name == "lambda+mde") return FeatureMode::kLambdaMde;
  throw InvalidArgument("unknown feature mode '" + std::string(name) + "'");
}

nlohmann::json FeatureSpec::to_json() const {
  return {{"mode", mode_name()}, {"mde_domains", mde_domains}};
}

FeatureSpec FeatureSpec::from_json(const nlohmann::json& j) {
  FeatureSpec spec;
  spec.mode = parse_feature_mode(j.at("mode").get<std::string>());
  spec.mde_domains = j.value("mde_domains", std::vector<std::string>{});
  spec.validate();
  return spec;
}

std::vector<double> build_features(const MixtureWeights& lambda,
                                   std::span<const ProbCache> caches,
                                   const FeatureSpec& spec) {
  spec.validate();
  std::vector<double> out;
  if (spec.mode != FeatureMode::kMdeOnly) {
    out.assign(lambda.values().begin(), lambda.values().end());
  }
  if (spec.uses_mde()) {
    for (const auto& d : spec.mde_domains) {
      out.push_back(mde_domain_loss(find_cache(caches, d), lambda));
    }
  }
  return out;
}

Standardizer Standardizer::fit(const FeatureRows& rows) {
  if (rows.empty()) throw InvalidArgument("cannot standardize zero rows");
  const std::size_t d = rows.front().size();
  Standardizer s;
  s.mean.assign(d, 0.0);
  s.scale.assign(d, 1.0);
  const double n = static_cast<double>(rows.size());
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < d; ++c) s.mean[c] += r[c];
  }
  for (double& m : s.mean) m /= n;
  for (std::size_t c = 0; c < d; ++c) {
    double var = 0.0;
    for (const auto& r : rows) var += (r[c] - s.mean[c]) * (r[c] - s.mean[c]);
    var /= n;
    const double sd = std::sqrt(var);
    // Treat numerically constant columns as constant.
    s.scale[c] = sd > 1e-12 * std::max(1.0, std::abs(s.mean[c])) ? sd : 1.0;
  }
  return s;
}

std::vector<double> Standardizer::apply(std::span<const double> x) const {
  if (x.size() != mean.size()) {
    throw InvalidArgument("feature vector has the wrong dimension");
  }
  std::vector<double> out(x.size());
  for (std::size_t c = 0; c < x.size(); ++c) {
    out[c] = (x[c] - mean[c]) / scale[c];
  }
  return out;
}

std::vector<std::size_t> cv_fold_ids(const FeatureRows& x,
                                     std::span<const double> y,
                                     std::size_t folds) {
  if (folds == 0) throw InvalidArgument("need at least one fold");
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (x[a] != x[b]) return x[a] < x[b];
    return y[a] < y[b];
  });
  std::vector<std::size_t> fold(x.size());
  for (std::size_t r = 0; r < order.size(); ++r) fold[order[r]] = r % folds;
  return fold;
}

namespace regression_internal {

double mean(std::span<const double> v) {
  if (v.empty()) throw InvalidArgument("mean of empty vector");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

TrainingMatrix training_matrix(const MeasurementSet& data,
                               const FeatureSpec& spec,
                               std::span<const ProbCache> caches) {
  if (data.records.empty()) throw InvalidArgument("no training records");
  data.validate();
  TrainingMatrix m;
  m.targets = data.domains();
  m.y.assign(m.targets.size(), {});
  for (const auto& r : data.records) {
    m.x.push_back(build_features(r.weights, caches, spec));
    for (std::size_t j = 0; j < m.targets.size(); ++j) {
      m.y[j].push_back(r.losses.values[j]);
    }
  }
  return m;
}

}  // namespace regression_internal
}  // namespace mixopt
