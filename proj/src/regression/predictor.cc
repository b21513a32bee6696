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

#include <cmath>

#include "mixopt/error.h"
#include "mixopt/mixtures.h"
#include "mixopt/regression.h"
#include "mixopt/text_io.h"
#include "regression/internal.h"

namespace mixopt {

namespace {

constexpr std::pair<Family, std::string_view> kFamilyNames[] = {
    {Family::kEmpiricalMean, "empirical-mean"},
    {Family::kLinear, "linear-ridge"},
    {Family::kGbm, "gbm"},
    {Family::kGp, "gp"},
    {Family::kDml, "dml"},
    {Family::kBimix, "bimix"},
    {Family::kMdeDirect, "mde-direct"},
};

double dot_plus(std::span<const double> w, std::span<const double> x,
                double b) {
  double s = b;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[i];
  return s;
}

nlohmann::json standardizer_json(const Standardizer& s) {
  return {{"mean", s.mean}, {"scale", s.scale}};
}

Standardizer standardizer_from(const nlohmann::json& j) {
  return {j.at("mean").get<std::vector<double>>(),
          j.at("scale").get<std::vector<double>>()};
}

struct ParamsToJson {
  nlohmann::json operator()(const EmpiricalMeanModel& m) const {
    return {{"means", m.means}};
  }
  nlohmann::json operator()(const LinearModel& m) const {
    return {{"standardizer", standardizer_json(m.standardizer)},
            {"ridge_alpha", m.ridge_alpha},
            {"coef", m.coef},
            {"intercept", m.intercept}};
  }
  nlohmann::json operator()(const GbmModel& m) const {
    nlohmann::json targets = nlohmann::json::array();
    for (const auto& t : m.targets) {
      nlohmann::json trees = nlohmann::json::array();
      for (const auto& tree : t.trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& n : tree.nodes) {
          nodes.push_back({n.feature, n.threshold, n.value, n.left, n.right});
        }
        trees.push_back(std::move(nodes));
      }
      targets.push_back({{"n_estimators", t.config.n_estimators},
                         {"learning_rate", t.config.learning_rate},
                         {"max_depth", t.config.max_depth},
                         {"init", t.init},
                         {"trees", std::move(trees)}});
    }
    return {{"targets", std::move(targets)}};
  }
  nlohmann::json operator()(const GpModel& m) const {
    return {{"standardizer", standardizer_json(m.standardizer)},
            {"length_scale", m.hyper.length_scale},
            {"signal_variance", m.hyper.signal_variance},
            {"noise", m.hyper.noise},
            {"inputs", m.inputs},
            {"means", m.means},
            {"alpha", m.alpha},
            {"cholesky", m.cholesky},
            {"log_marginal_likelihood", m.log_marginal_likelihood}};
  }
  nlohmann::json operator()(const DmlModel& m) const {
    nlohmann::json targets = nlohmann::json::array();
    for (const auto& t : m.targets) {
      targets.push_back(
          {{"c", t.c}, {"k", t.k}, {"t", t.t}, {"converged", t.converged}});
    }
    return {{"targets", std::move(targets)}};
  }
  nlohmann::json operator()(const BimixModel& m) const {
    nlohmann::json targets = nlohmann::json::array();
    for (const auto& t : m.targets) {
      targets.push_back(
          {{"a", t.a}, {"alpha", t.alpha}, {"weight_index", t.weight_index}});
    }
    return {{"targets", std::move(targets)}};
  }
  nlohmann::json operator()(const MdeDirectModel&) const {
    return nlohmann::json::object();
  }
};

ModelParams params_from_json(Family family, const nlohmann::json& j) {
  switch (family) {
    case Family::kEmpiricalMean:
      return EmpiricalMeanModel{j.at("means").get<std::vector<double>>()};
    case Family::kLinear: {
      LinearModel m;
      m.standardizer = standardizer_from(j.at("standardizer"));
      m.ridge_alpha = j.at("ridge_alpha").get<std::vector<double>>();
      m.coef = j.at("coef").get<std::vector<std::vector<double>>>();
      m.intercept = j.at("intercept").get<std::vector<double>>();
      return m;
    }
    case Family::kGbm: {
      GbmModel m;
      for (const auto& t : j.at("targets")) {
        GbmTargetModel tm;
        tm.config = {t.at("n_estimators").get<int>(),
                     t.at("learning_rate").get<double>(),
                     t.at("max_depth").get<int>()};
        tm.init = t.at("init").get<double>();
        for (const auto& tree : t.at("trees")) {
          RegressionTree rt;
          for (const auto& n : tree) {
            rt.nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(),
                                n.at(2).get<double>(), n.at(3).get<int>(),
                                n.at(4).get<int>()});
          }
          tm.trees.push_back(std::move(rt));
        }
        m.targets.push_back(std::move(tm));
      }
      return m;
    }
    case Family::kGp: {
      GpModel m;
      m.standardizer = standardizer_from(j.at("standardizer"));
      m.hyper = {j.at("length_scale").get<double>(),
                 j.at("signal_variance").get<double>(),
                 j.at("noise").get<double>()};
      m.inputs = j.at("inputs").get<FeatureRows>();
      m.means = j.at("means").get<std::vector<double>>();
      m.alpha = j.at("alpha").get<std::vector<std::vector<double>>>();
      m.cholesky = j.at("cholesky").get<std::vector<double>>();
      m.log_marginal_likelihood = j.at("log_marginal_likelihood").get<double>();
      if (m.cholesky.size() != m.inputs.size() * m.inputs.size()) {
        throw ConfigError("gp predictor: cholesky factor has the wrong size");
      }
      return m;
    }
    case Family::kDml: {
      DmlModel m;
      for (const auto& t : j.at("targets")) {
        m.targets.push_back({t.at("c").get<double>(), t.at("k").get<double>(),
                             t.at("t").get<std::vector<double>>(),
                             t.value("converged", true)});
      }
      return m;
    }
    case Family::kBimix: {
      BimixModel m;
      for (const auto& t : j.at("targets")) {
        m.targets.push_back({t.at("a").get<double>(),
                             t.at("alpha").get<double>(),
                             t.at("weight_index").get<std::size_t>()});
      }
      return m;
    }
    case Family::kMdeDirect:
      return MdeDirectModel{};
  }
  throw ConfigError("unknown predictor family");
}

std::string training_hash(Family family, const FeatureSpec& spec,
                          const MeasurementSet& data) {
  std::vector<NamedMixture> mixtures;
  for (const auto& r : data.records) mixtures.push_back({r.mixture_id, r.weights});
  std::string bytes(family_name(family));
  bytes += '\n';
  bytes += spec.to_json().dump();
  bytes += '\n';
  bytes += mixtures_to_csv(mixtures);
  bytes += measurements_to_csv(data);
  return sha256_hex(bytes);
}

}  // namespace

std::string_view family_name(Family family) {
  for (const auto& [f, name] : kFamilyNames) {
    if (f == family) return name;
  }
  return "?";
}

Family parse_family(std::string_view name) {
  for (const auto& [f, n] : kFamilyNames) {
    if (n == name) return f;
  }
  if (name == "linear") return Family::kLinear;
  if (name == "empirical" || name == "mean") return Family::kEmpiricalMean;
  throw ConfigError("unknown regression family '" + std::string(name) + "'");
}

bool default_include_corners(Family family) {
  switch (family) {
    case Family::kLinear:
    case Family::kGbm:
      return false;
    default:
      return true;
  }
}

Prediction Predictor::predict(const MixtureWeights& lambda,
                              std::span<const ProbCache> caches) const {
  if (num_components != 0 && lambda.size() != num_components) {
    throw InvalidArgument("predict: mixture has " +
                          std::to_string(lambda.size()) +
                          " components, predictor expects " +
                          std::to_string(num_components));
  }
  Prediction out;
  const auto features = [&] { return build_features(lambda, caches, this->features); };
  switch (family) {
    case Family::kEmpiricalMean: {
      const auto& m = std::get<EmpiricalMeanModel>(model);
      for (std::size_t j = 0; j < targets.size(); ++j) {
        out.mean.push_back(targets[j], m.means[j]);
      }
      break;
    }
    case Family::kLinear: {
      const auto& m = std::get<LinearModel>(model);
      const std::vector<double> x = m.standardizer.apply(features());
      for (std::size_t j = 0; j < targets.size(); ++j) {
        out.mean.push_back(targets[j], dot_plus(m.coef[j], x, m.intercept[j]));
      }
      break;
    }
    case Family::kGbm: {
      const auto& m = std::get<GbmModel>(model);
      const std::vector<double> x = features();
      for (std::size_t j = 0; j < targets.size(); ++j) {
        out.mean.push_back(targets[j], m.targets[j].predict(x));
      }
      break;
    }
    case Family::kGp: {
      const auto& m = std::get<GpModel>(model);
      std::vector<double> mean;
      regression_internal::gp_predict(m, features(), mean, out.variance);
      for (std::size_t j = 0; j < targets.size(); ++j) {
        out.mean.push_back(targets[j], mean[j]);
      }
      break;
    }
    case Family::kDml: {
      const auto& m = std::get<DmlModel>(model);
      const std::vector<double> x = features();
      for (std::size_t j = 0; j < targets.size(); ++j) {
        const auto& t = m.targets[j];
        if (t.t.size() != x.size()) {
          throw InvalidArgument("predict: dml feature dimension mismatch");
        }
        out.mean.push_back(targets[j], t.c + t.k * std::exp(dot_plus(t.t, x, 0.0)));
      }
      break;
    }
    case Family::kBimix: {
      const auto& m = std::get<BimixModel>(model);
      for (std::size_t j = 0; j < targets.size(); ++j) {
        const auto& t = m.targets[j];
        const double w = lambda[t.weight_index];
        if (!(w > 0.0)) {
          throw InvalidArgument("power-law undefined at zero weight");
        }
        out.mean.push_back(targets[j], t.a / std::pow(w, t.alpha));
      }
      break;
    }
    case Family::kMdeDirect:
      for (const auto& d : targets) {
        out.mean.push_back(d, mde_domain_loss(find_cache(caches, d), lambda));
      }
      break;
  }
  return out;
}

nlohmann::json Predictor::to_json() const {
  return {{"family", std::string(family_name(family))},
          {"features", features.to_json()},
          {"targets", targets},
          {"warnings", warnings},
          {"training_hash", training_hash},
          {"training_rows", training_rows},
          {"num_components", num_components},
          {"params", std::visit(ParamsToJson{}, model)}};
}

Predictor Predictor::from_json(const nlohmann::json& j) {
  try {
    Predictor p;
    p.family = parse_family(j.at("family").get<std::string>());
    p.features = FeatureSpec::from_json(j.at("features"));
    p.targets = j.at("targets").get<std::vector<std::string>>();
    p.warnings = j.value("warnings", std::vector<std::string>{});
    p.training_hash = j.value("training_hash", std::string{});
    p.training_rows = j.value("training_rows", std::size_t{0});
    p.num_components = j.value("num_components", std::size_t{0});
    p.model = params_from_json(p.family, j.at("params"));
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed predictor: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("malformed predictor: ") + e.what());
  }
}

Predictor fit_empirical_mean(const MeasurementSet& data) {
  if (data.records.empty()) {
    throw InvalidArgument("empirical mean: no training records");
  }
  data.validate();
  Predictor p;
  p.family = Family::kEmpiricalMean;
  p.targets = data.domains();
  EmpiricalMeanModel m;
  for (std::size_t j = 0; j < p.targets.size(); ++j) {
    double s = 0.0;
    for (const auto& r : data.records) s += r.losses.values[j];
    m.means.push_back(s / static_cast<double>(data.records.size()));
  }
  p.model = std::move(m);
  p.training_rows = data.records.size();
  p.num_components = data.num_components();
  return p;
}

Predictor make_mde_direct(std::vector<std::string> targets) {
  if (targets.empty()) throw InvalidArgument("mde-direct: no targets");
  Predictor p;
  p.family = Family::kMdeDirect;
  p.features = FeatureSpec::with_mde(FeatureMode::kMdeOnly, targets);
  p.targets = std::move(targets);
  p.model = MdeDirectModel{};
  return p;
}

Predictor fit_predictor(Family family, const MeasurementSet& data,
                        const FeatureSpec& spec,
                        std::span<const ProbCache> caches,
                        const FitOptions& options) {
  const bool corners =
      options.include_corners.value_or(default_include_corners(family));
  MeasurementSet used = data;
  if (!corners) {
    std::erase_if(used.records, [](const MeasurementRecord& r) {
      return r.weights.corner_index().has_value();
    });
    if (used.records.empty() && !data.records.empty()) {
      throw InvalidArgument(std::string(family_name(family)) +
                            ": no training records left after dropping expert "
                            "mixtures");
    }
  }
  Predictor p;
  switch (family) {
    case Family::kEmpiricalMean:
      p = fit_empirical_mean(used);
      break;
    case Family::kLinear:
      p = fit_linear(used, spec, caches, options);
      break;
    case Family::kGbm:
      p = fit_gbm(used, spec, caches, options);
      break;
    case Family::kGp:
      p = fit_gp(used, spec, caches, options);
      break;
    case Family::kDml:
      p = fit_dml(used, spec, caches, options);
      break;
    case Family::kBimix:
      p = fit_bimix(used, options);
      break;
    case Family::kMdeDirect:
      if (data.records.empty()) throw InvalidArgument("mde-direct: no records");
      p = make_mde_direct(data.domains());
      p.num_components = data.num_components();
      break;
  }
  p.training_hash = training_hash(family, p.features, used);
  return p;
}

}  // namespace mixopt
