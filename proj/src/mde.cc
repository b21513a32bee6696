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

#include "mixopt/mde.h"

#include <algorithm>
#include <cmath>

#include "mixopt/error.h"

namespace mixopt {

double LossVector::at(const std::string& domain) const {
  if (auto v = find(domain)) return *v;
  throw InvalidArgument("loss vector has no domain '" + domain + "'");
}

std::optional<double> LossVector::find(const std::string& domain) const {
  for (std::size_t i = 0; i < domains.size(); ++i) {
    if (domains[i] == domain) return values[i];
  }
  return std::nullopt;
}

void LossVector::push_back(std::string domain, double value) {
  domains.push_back(std::move(domain));
  values.push_back(value);
}

Aggregator Aggregator::average(std::string name,
                               std::vector<std::string> group) {
  Aggregator g;
  g.name = std::move(name);
  g.kind = Kind::kAverage;
  g.groups = {std::move(group)};
  g.validate();
  return g;
}

Aggregator Aggregator::sum_of_averages(std::string name,
                                       std::vector<std::string> first,
                                       std::vector<std::string> second) {
  Aggregator g;
  g.name = std::move(name);
  g.kind = Kind::kSumOfGroupAverages;
  g.groups = {std::move(first), std::move(second)};
  g.validate();
  return g;
}

Aggregator Aggregator::weighted(std::string name,
                                std::vector<std::string> group,
                                std::vector<double> weights) {
  Aggregator g;
  g.name = std::move(name);
  g.kind = Kind::kWeighted;
  g.groups = {std::move(group)};
  g.weights = std::move(weights);
  g.validate();
  return g;
}

void Aggregator::validate() const {
  if (groups.empty()) throw InvalidArgument("aggregator " + name + " has no groups");
  for (const auto& group : groups) {
    if (group.empty()) {
      throw InvalidArgument("aggregator " + name + " has an empty group");
    }
  }
  switch (kind) {
    case Kind::kAverage:
      if (groups.size() != 1) {
        throw InvalidArgument("average aggregator takes exactly one group");
      }
      break;
    case Kind::kSumOfGroupAverages:
      if (groups.size() < 2) {
        throw InvalidArgument("sum-of-averages aggregator needs >= 2 groups");
      }
      break;
    case Kind::kWeighted:
      if (groups.size() != 1 || weights.size() != groups[0].size()) {
        throw InvalidArgument("weighted aggregator needs one weight per domain");
      }
      for (double w : weights) {
        if (!std::isfinite(w)) {
          throw InvalidArgument("aggregator weights must be finite");
        }
      }
      break;
  }
}

std::vector<std::string> Aggregator::domains() const {
  std::vector<std::string> out;
  for (const auto& group : groups) {
    for (const auto& d : group) {
      if (std::find(out.begin(), out.end(), d) == out.end()) out.push_back(d);
    }
  }
  return out;
}

nlohmann::json Aggregator::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  switch (kind) {
    case Kind::kAverage:
      j["kind"] = "avg";
      break;
    case Kind::kSumOfGroupAverages:
      j["kind"] = "sum-of-averages";
      break;
    case Kind::kWeighted:
      j["kind"] = "weighted";
      j["weights"] = weights;
      break;
  }
  j["groups"] = groups;
  return j;
}

Aggregator Aggregator::from_json(const nlohmann::json& j) {
  Aggregator g;
  try {
    g.name = j.at("name").get<std::string>();
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "avg") {
      g.kind = Kind::kAverage;
    } else if (kind == "sum-of-averages") {
      g.kind = Kind::kSumOfGroupAverages;
    } else if (kind == "weighted") {
      g.kind = Kind::kWeighted;
      g.weights = j.at("weights").get<std::vector<double>>();
    } else {
      throw InvalidArgument("unknown aggregator kind '" + kind + "'");
    }
    g.groups = j.at("groups").get<std::vector<std::vector<std::string>>>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed aggregator: ") + e.what());
  }
  g.validate();
  return g;
}

double aggregate(const LossVector& losses, const Aggregator& g) {
  auto group_mean = [&](const std::vector<std::string>& group) {
    double sum = 0.0;
    for (const auto& d : group) sum += losses.at(d);
    return sum / static_cast<double>(group.size());
  };
  switch (g.kind) {
    case Aggregator::Kind::kAverage:
      return group_mean(g.groups.front());
    case Aggregator::Kind::kSumOfGroupAverages: {
      double total = 0.0;
      for (const auto& group : g.groups) total += group_mean(group);
      return total;
    }
    case Aggregator::Kind::kWeighted: {
      double total = 0.0;
      for (std::size_t i = 0; i < g.weights.size(); ++i) {
        total += g.weights[i] * losses.at(g.groups.front()[i]);
      }
      return total;
    }
  }
  throw InvalidArgument("unknown aggregator kind");
}

double mde_domain_loss(const ProbCache& cache, const MixtureWeights& lambda) {
  const std::size_t k = cache.num_experts();
  if (lambda.size() != k) {
    throw InvalidArgument("mixture has " + std::to_string(lambda.size()) +
                          " weights but cache " + cache.domain_id() + " has " +
                          std::to_string(k) + " experts");
  }
  const std::span<const double> w = lambda.values();
  double sum = 0.0;
  for (std::size_t t = 0; t < cache.num_tokens(); ++t) {
    const auto row = cache.row(t);
    double mixed = 0.0;
    for (std::size_t i = 0; i < k; ++i) mixed += w[i] * row[i];
    if (!(mixed > 0.0)) {
      throw NumericError("corrupt cache " + cache.domain_id() +
                         ": non-positive mixed probability at token " +
                         std::to_string(t));
    }
    sum += -std::log(mixed);
  }
  return sum / static_cast<double>(cache.num_tokens());
}

namespace {

void check_same_experts(std::span<const ProbCache> caches) {
  for (const auto& c : caches) {
    if (c.expert_ids() != caches.front().expert_ids()) {
      throw InvalidArgument("cache " + c.domain_id() +
                            " lists different experts than cache " +
                            caches.front().domain_id());
    }
  }
}

}  // namespace

std::vector<double> mde_features(std::span<const ProbCache> caches,
                                 const MixtureWeights& lambda) {
  check_same_experts(caches);
  std::vector<double> out;
  out.reserve(caches.size());
  for (const auto& c : caches) out.push_back(mde_domain_loss(c, lambda));
  return out;
}

LossVector mde_losses(std::span<const ProbCache> caches,
                      const MixtureWeights& lambda) {
  const std::vector<double> values = mde_features(caches, lambda);
  LossVector out;
  for (std::size_t j = 0; j < caches.size(); ++j) {
    out.push_back(caches[j].domain_id(), values[j]);
  }
  return out;
}

const ProbCache& find_cache(std::span<const ProbCache> caches,
                            const std::string& domain_id) {
  for (const auto& c : caches) {
    if (c.domain_id() == domain_id) return c;
  }
  throw InvalidArgument("no probability cache for domain '" + domain_id + "'");
}

std::vector<double> mean_token_probs(const ProbCache& cache) {
  std::vector<double> sums(cache.num_experts(), 0.0);
  for (std::size_t t = 0; t < cache.num_tokens(); ++t) {
    const auto row = cache.row(t);
    for (std::size_t i = 0; i < row.size(); ++i) sums[i] += row[i];
  }
  for (double& s : sums) s /= static_cast<double>(cache.num_tokens());
  return sums;
}

std::vector<double> per_domain_interpolation_loss(
    const std::vector<std::vector<double>>& mean_probs,
    const MixtureWeights& lambda) {
  std::vector<double> out;
  out.reserve(mean_probs.size());
  for (std::size_t j = 0; j < mean_probs.size(); ++j) {
    const auto& row = mean_probs[j];
    if (row.size() != lambda.size()) {
      throw InvalidArgument("mean-probability row " + std::to_string(j) +
                            " does not match the mixture size");
    }
    double mixed = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (!(row[i] > 0.0)) {
        throw InvalidArgument("non-positive mean probability in row " +
                              std::to_string(j));
      }
      mixed += lambda[i] * row[i];
    }
    out.push_back(-std::log(mixed));
  }
  return out;
}

}  // namespace mixopt
