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

#include "mixopt/oracle.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mixopt/error.h"
#include "mixopt/parallel.h"
#include "mixopt/rng.h"

namespace mixopt {
namespace {

void check_sum(std::span<const double> v, const char* what) {
  double s = 0.0;
  for (double p : v) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw InvalidArgument(std::string(what) + " has a negative entry");
    }
    s += p;
  }
  if (std::abs(s - 1.0) > 1e-12) {
    throw InvalidArgument(std::string(what) + " does not sum to 1");
  }
}

void check_shapes(std::span<const FiniteDomain> domains,
                  const MixtureWeights& lambda) {
  if (domains.empty()) throw InvalidArgument("oracle: no domains");
  if (lambda.size() != domains.size()) {
    throw InvalidArgument("oracle: mixture and domain counts differ");
  }
  for (const auto& d : domains) {
    d.validate();
    if (d.num_prefixes() != domains.front().num_prefixes() ||
        d.vocab_size() != domains.front().vocab_size()) {
      throw InvalidArgument("oracle: domains must share prefixes and vocab");
    }
  }
}

// True when every domain with positive weight has the same mass on x; the
// prefix-dependent weights then equal lambda exactly.
bool shared_on_support(std::span<const FiniteDomain> domains,
                       const MixtureWeights& lambda, std::size_t x) {
  std::optional<double> m;
  for (std::size_t i = 0; i < domains.size(); ++i) {
    if (!(lambda[i] > 0.0)) continue;
    const double v = domains[i].prefix_marginal[x];
    if (m && *m != v) return false;
    m = v;
  }
  return true;
}

double mixture_mass(std::span<const FiniteDomain> domains,
                    const MixtureWeights& lambda, std::size_t x) {
  double s = 0.0;
  for (std::size_t i = 0; i < domains.size(); ++i) {
    s += lambda[i] * domains[i].prefix_marginal[x];
  }
  return s;
}

std::vector<double> lambda_combination(std::span<const FiniteDomain> domains,
                                       std::span<const double> w,
                                       std::size_t x) {
  std::vector<double> row(domains.front().vocab_size(), 0.0);
  for (std::size_t y = 0; y < row.size(); ++y) {
    double s = 0.0;
    for (std::size_t i = 0; i < domains.size(); ++i) {
      s += w[i] * domains[i].conditionals[x][y];
    }
    row[y] = s;
  }
  return row;
}

// Sample of a sparse probability vector: about a third of entries are
// zeroed, at least one survives.
std::vector<double> sparse_simplex(StreamRng& rng, std::size_t n) {
  std::vector<double> v(n);
  bool any = false;
  for (double& p : v) {
    const double u = rng.uniform();
    p = rng.uniform() < 1.0 / 3.0 ? 0.0 : -std::log1p(-u) + 1e-3;
    any = any || p > 0.0;
  }
  if (!any) v[rng.below(n)] = 1.0;
  double s = 0.0;
  for (double p : v) s += p;
  for (double& p : v) p /= s;
  return v;
}

}  // namespace

void FiniteDomain::validate() const {
  if (prefix_marginal.empty() || conditionals.size() != prefix_marginal.size()) {
    throw InvalidArgument("finite domain: one conditional row per prefix");
  }
  check_sum(prefix_marginal, "prefix marginal");
  for (const auto& row : conditionals) {
    if (row.size() != vocab_size() || row.empty()) {
      throw InvalidArgument("finite domain: ragged conditional table");
    }
    check_sum(row, "conditional row");
  }
}

FiniteDomain FiniteDomain::from_markov(const SyntheticDomainSpec& spec) {
  spec.validate();
  FiniteDomain d{spec.prefix_marginal, spec.conditionals};
  d.validate();
  return d;
}

ConditionalTable optimal_mixture_model(std::span<const FiniteDomain> domains,
                                       const MixtureWeights& lambda) {
  check_shapes(domains, lambda);
  ConditionalTable out(domains.front().num_prefixes());
  for (std::size_t x = 0; x < out.size(); ++x) {
    const double mass = mixture_mass(domains, lambda, x);
    if (!(mass > 0.0)) continue;
    if (shared_on_support(domains, lambda, x)) {
      out[x] = lambda_combination(domains, lambda.values(), x);
      continue;
    }
    std::vector<double> row(domains.front().vocab_size());
    for (std::size_t y = 0; y < row.size(); ++y) {
      double joint = 0.0;
      for (std::size_t i = 0; i < domains.size(); ++i) {
        joint += lambda[i] * domains[i].prefix_marginal[x] *
                 domains[i].conditionals[x][y];
      }
      row[y] = joint / mass;
    }
    out[x] = std::move(row);
  }
  return out;
}

std::vector<std::optional<std::vector<double>>> prefix_weights(
    std::span<const FiniteDomain> domains, const MixtureWeights& lambda) {
  check_shapes(domains, lambda);
  std::vector<std::optional<std::vector<double>>> out(
      domains.front().num_prefixes());
  for (std::size_t x = 0; x < out.size(); ++x) {
    const double mass = mixture_mass(domains, lambda, x);
    if (!(mass > 0.0)) continue;
    if (shared_on_support(domains, lambda, x)) {
      out[x] = std::vector<double>(lambda.values().begin(),
                                   lambda.values().end());
      continue;
    }
    std::vector<double> w(domains.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] = domains[i].prefix_marginal[x] * lambda[i] / mass;
    }
    out[x] = std::move(w);
  }
  return out;
}

ConditionalTable expert_combination(std::span<const FiniteDomain> domains,
                                    const MixtureWeights& lambda) {
  const auto weights = prefix_weights(domains, lambda);
  ConditionalTable out(weights.size());
  for (std::size_t x = 0; x < out.size(); ++x) {
    if (weights[x]) out[x] = lambda_combination(domains, *weights[x], x);
  }
  return out;
}

ConditionalTable mde_combination(std::span<const FiniteDomain> domains,
                                 const MixtureWeights& lambda) {
  check_shapes(domains, lambda);
  ConditionalTable out(domains.front().num_prefixes());
  for (std::size_t x = 0; x < out.size(); ++x) {
    out[x] = lambda_combination(domains, lambda.values(), x);
  }
  return out;
}

PropositionCheck verify_proposition(std::span<const FiniteDomain> domains,
                                    const MixtureWeights& lambda, double tol) {
  const ConditionalTable a = optimal_mixture_model(domains, lambda);
  const ConditionalTable b = expert_combination(domains, lambda);
  PropositionCheck c;
  for (std::size_t x = 0; x < a.size(); ++x) {
    if (a[x].has_value() != b[x].has_value()) {
      c.max_abs_diff = std::numeric_limits<double>::infinity();
      continue;
    }
    if (!a[x]) continue;
    ++c.defined_rows;
    for (std::size_t y = 0; y < a[x]->size(); ++y) {
      c.max_abs_diff = std::max(c.max_abs_diff, std::abs((*a[x])[y] - (*b[x])[y]));
    }
  }
  c.pass = c.max_abs_diff <= tol;
  return c;
}

GapReport mde_gap(std::span<const FiniteDomain> domains,
                  const MixtureWeights& lambda) {
  const ConditionalTable p = optimal_mixture_model(domains, lambda);
  const ConditionalTable q = mde_combination(domains, lambda);
  GapReport r;
  for (std::size_t x = 0; x < p.size(); ++x) {
    if (!p[x]) continue;
    const double mass = mixture_mass(domains, lambda, x);
    double kl = 0.0, h = 0.0, ce = 0.0;
    for (std::size_t y = 0; y < p[x]->size(); ++y) {
      const double pv = (*p[x])[y];
      const double qv = (*q[x])[y];
      r.max_pointwise_gap = std::max(r.max_pointwise_gap, std::abs(pv - qv));
      if (pv > 0.0) {
        // p * phi(q / p) with phi(u) = (u - 1) - ln u >= 0.
        const double d = qv / pv - 1.0;
        kl += pv * (d - std::log1p(d));
        h -= pv * std::log(pv);
        ce -= pv * std::log(qv);
      } else {
        kl += qv;
      }
    }
    r.expected_loss_gap += mass * kl;
    r.optimal_loss += mass * h;
    r.mde_loss += mass * ce;
  }
  return r;
}

RandomInstance random_instance(std::uint64_t seed, std::size_t max_k,
                               std::size_t max_prefixes,
                               std::size_t max_vocab) {
  if (max_k < 1 || max_prefixes < 1 || max_vocab < 2) {
    throw InvalidArgument("random instance: bad size limits");
  }
  StreamRng rng(seed, 0);
  RandomInstance inst;
  inst.seed = seed;
  const std::size_t k = 1 + rng.below(max_k);
  const std::size_t nx = 1 + rng.below(max_prefixes);
  const std::size_t ny = 2 + rng.below(max_vocab - 1);
  for (std::size_t i = 0; i < k; ++i) {
    FiniteDomain d;
    d.prefix_marginal = sparse_simplex(rng, nx);
    for (std::size_t x = 0; x < nx; ++x) {
      d.conditionals.push_back(sparse_simplex(rng, ny));
    }
    inst.domains.push_back(std::move(d));
  }
  inst.lambda = MixtureWeights(sparse_simplex(rng, k));
  return inst;
}

nlohmann::json OracleReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : instances) {
    rows.push_back({{"seed", r.seed},
                    {"k", r.k},
                    {"num_prefixes", r.num_prefixes},
                    {"vocab_size", r.vocab_size},
                    {"max_abs_diff", r.check.max_abs_diff},
                    {"pass", r.check.pass},
                    {"max_pointwise_gap", r.gap.max_pointwise_gap},
                    {"expected_loss_gap", r.gap.expected_loss_gap}});
  }
  return {{"seed", seed},
          {"tol", tol},
          {"num_instances", instances.size()},
          {"max_abs_diff", max_abs_diff},
          {"failures", failures},
          {"all_gaps_non_negative", all_gaps_non_negative},
          {"pass", pass()},
          {"instances", rows}};
}

OracleReport verify_random_instances(std::uint64_t seed, std::size_t n,
                                     double tol, unsigned threads) {
  OracleReport rep;
  rep.seed = seed;
  rep.tol = tol;
  rep.instances.resize(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const RandomInstance inst = random_instance(derive_seed(seed, i));
    OracleInstanceResult& r = rep.instances[i];
    r.seed = inst.seed;
    r.k = inst.domains.size();
    r.num_prefixes = inst.domains.front().num_prefixes();
    r.vocab_size = inst.domains.front().vocab_size();
    r.check = verify_proposition(inst.domains, inst.lambda, tol);
    r.gap = mde_gap(inst.domains, inst.lambda);
  });
  for (const auto& r : rep.instances) {
    rep.max_abs_diff = std::max(rep.max_abs_diff, r.check.max_abs_diff);
    if (!r.check.pass) ++rep.failures;
    if (!(r.gap.expected_loss_gap >= 0.0)) rep.all_gaps_non_negative = false;
  }
  return rep;
}

}  // namespace mixopt
