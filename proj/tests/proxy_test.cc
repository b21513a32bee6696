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

#include "mixopt/proxy.h"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "mixopt/error.h"
#include "mixopt/mixtures.h"

namespace mixopt {
namespace {

std::vector<DomainCorpus> make_domains(std::size_t k, std::uint32_t v,
                                       std::size_t n, std::uint64_t seed) {
  std::vector<DomainCorpus> out;
  const auto specs = make_shared_marginal_markov_specs(k, v, seed);
  for (std::size_t i = 0; i < k; ++i) {
    out.push_back(generate_synthetic_domain(specs[i], n,
                                            "d" + std::to_string(i)));
  }
  return out;
}

ValidationDomain as_validation(const DomainCorpus& c, std::string id) {
  ValidationDomain v;
  v.id = std::move(id);
  v.tokens = c.tokens;
  v.vocab_size = c.vocab_size;
  return v;
}

ProxyConfig small_proxy(std::size_t budget) {
  ProxyConfig cfg;
  cfg.token_budget = budget;
  return cfg;
}

TEST_CASE("one-hot proxy equals the data expert drawn with the same seed") {
  const auto d = make_domains(3, 8, 5000, 1);
  const ProxyConfig cfg = small_proxy(3000);
  for (std::size_t i = 0; i < 3; ++i) {
    const MixtureWeights e = MixtureWeights::one_hot(3, i);
    const NgramExpert proxy = train_proxy(d, e, cfg, 42, "p");
    const NgramExpert expert = NgramExpert::train(
        sample_mixed_corpus(d, e, cfg.token_budget, 42, cfg.segment_length),
        cfg.order, cfg.smoothing);
    CHECK(proxy.ngram_count(std::vector<TokenId>{0, 1}) ==
          expert.ngram_count(std::vector<TokenId>{0, 1}));
    for (TokenId x = 0; x < 8; ++x) {
      const TokenId ctx[] = {x};
      for (TokenId y = 0; y < 8; ++y) {
        REQUIRE(proxy.prob(ctx, y) == expert.prob(ctx, y));
      }
    }
  }
  CHECK(mixture_seed(7, MixtureWeights::one_hot(3, 1)) ==
        mixture_seed(7, MixtureWeights({0.0, 1.0, 0.0})));
  CHECK(mixture_seed(7, MixtureWeights::one_hot(3, 1)) !=
        mixture_seed(7, MixtureWeights::one_hot(3, 2)));
}

TEST_CASE("mixing two copies of a domain approximates that domain") {
  const auto d = make_domains(1, 6, 50000, 2);
  const std::vector<DomainCorpus> twice = {d[0], d[0]};
  const ProxyConfig cfg = small_proxy(50000);
  const NgramExpert mixed =
      train_proxy(twice, MixtureWeights({0.5, 0.5}), cfg, 3);
  const NgramExpert single = NgramExpert::train(d[0], 2, cfg.smoothing);
  double worst = 0.0;
  for (TokenId x = 0; x < 6; ++x) {
    const TokenId ctx[] = {x};
    for (TokenId y = 0; y < 6; ++y) {
      worst = std::max(worst, std::abs(mixed.prob(ctx, y) - single.prob(ctx, y)));
    }
  }
  CHECK(worst < 0.02);
}

TEST_CASE("a larger budget does not raise expected loss") {
  // Monte Carlo over 20 seeds; held-out text from the same mixture.
  const auto d = make_domains(2, 12, 40000, 3);
  const MixtureWeights lambda({0.4, 0.6});
  const std::vector<ValidationDomain> held = {as_validation(
      sample_mixed_corpus(d, lambda, 20000, 999), "held")};
  double small = 0.0, large = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    small += measure(train_proxy(d, lambda, small_proxy(1500), s), held)
                 .values[0];
    large += measure(train_proxy(d, lambda, small_proxy(3000), s), held)
                 .values[0];
  }
  CHECK(large <= small);
}

TEST_CASE("measure") {
  const NgramExpert u = NgramExpert::untrained("u", 10, 2, {});
  const auto d = make_domains(2, 10, 400, 4);
  const std::vector<ValidationDomain> val = {as_validation(d[0], "a"),
                                             as_validation(d[1], "b")};
  const LossVector l = measure(u, val);
  CHECK(l.domains == std::vector<std::string>{"a", "b"});
  for (double x : l.values) {
    CHECK(x == doctest::Approx(std::log(10.0)).epsilon(1e-12));
  }
  CHECK(measure(u, std::span<const ValidationDomain>{}).size() == 0);
  const NgramExpert other = NgramExpert::untrained("o", 7, 2, {});
  CHECK_THROWS_AS(measure(other, val), InvalidArgument);
}

TEST_CASE("a proxy of the matching generator scores its domain best") {
  const auto d = make_domains(2, 10, 60000, 5);
  const auto specs = make_shared_marginal_markov_specs(2, 10, 5);
  SyntheticDomainSpec s0 = specs[0];
  s0.seed += 1000;
  const std::vector<ValidationDomain> val = {
      as_validation(generate_synthetic_domain(s0, 5000), "v0")};
  const ProxyConfig cfg = small_proxy(20000);
  const double own =
      measure(train_proxy(d, MixtureWeights::one_hot(2, 0), cfg, 1), val)
          .values[0];
  const double far =
      measure(train_proxy(d, MixtureWeights::one_hot(2, 1), cfg, 1), val)
          .values[0];
  CHECK(own < far);
}

TEST_CASE("measurement sets") {
  const auto d = make_domains(2, 8, 4000, 6);
  const std::vector<ValidationDomain> val = {as_validation(d[0], "a"),
                                             as_validation(d[1], "b")};
  const auto mixtures = name_mixtures(include_expert_corners(
      {MixtureWeights({0.3, 0.7})}, 2));
  const ProxyConfig cfg = small_proxy(2000);
  const MeasurementSet m = build_measurement_set(d, val, mixtures, cfg, 9, 1);
  REQUIRE(m.records.size() == 3);
  CHECK(m.records[0].mixture_id != m.records[2].mixture_id);
  CHECK(m.domains() == std::vector<std::string>{"a", "b"});
  CHECK(m.num_components() == 2);

  const MeasurementSet again =
      build_measurement_set(d, val, mixtures, cfg, 9, 3);
  CHECK(measurements_to_csv(again) == measurements_to_csv(m));

  // The corner record is the expert's own measurement.
  const MixtureWeights e1 = MixtureWeights::one_hot(2, 1);
  const LossVector direct =
      measure(train_proxy(d, e1, cfg, mixture_seed(9, e1)), val);
  CHECK(m.records[1].losses == direct);

  const std::string csv = measurements_to_csv(m);
  CHECK(csv.rfind("mixture_id,domain_id,loss\n", 0) == 0);
  const MeasurementSet back = measurements_from_csv(csv, mixtures);
  REQUIRE(back.records.size() == 3);
  for (std::size_t n = 0; n < 3; ++n) {
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(back.records[n].losses.values[j] ==
            doctest::Approx(m.records[n].losses.values[j]).epsilon(1e-11));
    }
  }
  CHECK(measurements_to_csv(back) == csv);
}

}  // namespace
}  // namespace mixopt
