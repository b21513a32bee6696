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

#include "mixopt/experts.h"

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "mixopt/error.h"
#include "mixopt/rng.h"
#include "mixopt/text_io.h"
#include "test_util.h"

namespace mixopt {
namespace {

DomainCorpus corpus_of(std::vector<TokenId> tokens, std::uint32_t v) {
  DomainCorpus c;
  c.id = "c";
  c.tokens = std::move(tokens);
  c.vocab_size = v;
  return c;
}

ValidationDomain validation_of(std::vector<TokenId> tokens, std::uint32_t v) {
  ValidationDomain d;
  d.id = "v";
  d.tokens = std::move(tokens);
  d.vocab_size = v;
  return d;
}

// Brute-force interpolated estimate straight from the token list.
double naive_prob(const std::vector<TokenId>& corpus, int order, double delta,
                  const std::vector<double>& beta, std::uint32_t v,
                  const std::vector<TokenId>& history, TokenId next) {
  const std::size_t h = std::min<std::size_t>(history.size(), order - 1);
  double bsum = 0.0;
  for (std::size_t o = 1; o <= h + 1; ++o) bsum += beta[o - 1];
  double p = 0.0;
  for (std::size_t o = 1; o <= h + 1; ++o) {
    std::vector<TokenId> ctx(history.end() - (o - 1), history.end());
    double c_xy = 0.0, c_x = 0.0;
    for (std::size_t s = 0; s + o <= corpus.size(); ++s) {
      if (!std::equal(ctx.begin(), ctx.end(), corpus.begin() + s)) continue;
      c_x += 1.0;
      if (corpus[s + o - 1] == next) c_xy += 1.0;
    }
    p += beta[o - 1] / bsum * (c_xy + delta) / (c_x + delta * v);
  }
  return p;
}

TEST_CASE("bigram estimate on an alternating corpus") {
  SmoothingConfig sm{1.0, {0.0, 1.0}};
  const NgramExpert e = NgramExpert::train(corpus_of({0, 1, 0, 1}, 2), 2, sm);
  const TokenId ctx[] = {0};
  CHECK(e.prob(ctx, 1) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(e.ngram_count(std::vector<TokenId>{0, 1}) == 2);
  CHECK(e.context_total(std::vector<TokenId>{0}) == 2);

  const auto scores = score_tokens(e, validation_of({0, 1}, 2));
  REQUIRE(scores.size() == 2);
  CHECK(scores[1] == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("constant data with tiny delta is nearly deterministic") {
  SmoothingConfig sm{1e-9, {0.0, 1.0}};
  const NgramExpert e =
      NgramExpert::train(corpus_of(std::vector<TokenId>(200, 3), 5), 2, sm);
  const TokenId ctx[] = {3};
  CHECK(e.prob(ctx, 3) > 1.0 - 1e-8);
}

TEST_CASE("unseen context backs off to uniform when delta dominates") {
  SmoothingConfig sm{1e9, {}};
  const NgramExpert e =
      NgramExpert::train(corpus_of({0, 1, 0, 1, 2}, 4), 2, sm);
  const TokenId ctx[] = {3};
  for (TokenId y = 0; y < 4; ++y) {
    CHECK(e.prob(ctx, y) == doctest::Approx(0.25).epsilon(1e-6));
  }
}

TEST_CASE("trained probabilities match brute-force counting") {
  const auto specs = make_shared_marginal_markov_specs(1, 5, 3);
  const DomainCorpus c = generate_synthetic_domain(specs[0], 400);
  const std::vector<double> beta = {0.2, 0.3, 0.5};
  const NgramExpert e = NgramExpert::train(c, 3, {0.7, beta});
  StreamRng rng(1, 2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<TokenId> hist;
    const std::size_t len = rng.below(4);
    for (std::size_t i = 0; i < len; ++i) {
      hist.push_back(static_cast<TokenId>(rng.below(5)));
    }
    for (TokenId y = 0; y < 5; ++y) {
      CHECK(e.prob(hist, y) ==
            doctest::Approx(naive_prob(c.tokens, 3, 0.7, beta, 5, hist, y))
                .epsilon(1e-12));
    }
  }
}

TEST_CASE("conditionals are normalized and positive") {
  const auto specs = make_shared_marginal_markov_specs(1, 7, 8);
  const NgramExpert e =
      NgramExpert::train(generate_synthetic_domain(specs[0], 2000), 3, {});
  StreamRng rng(4, 0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<TokenId> hist;
    const std::size_t len = rng.below(3);
    for (std::size_t i = 0; i < len; ++i) {
      hist.push_back(static_cast<TokenId>(rng.below(7)));
    }
    double s = 0.0;
    for (TokenId y = 0; y < 7; ++y) {
      const double p = e.prob(hist, y);
      REQUIRE(p > 0.0);
      s += p;
    }
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
}

TEST_CASE("counts never cross sequence starts") {
  DomainCorpus c = corpus_of({0, 1, 1, 0}, 2);
  c.sequence_starts = {0, 2};
  const NgramExpert e = NgramExpert::train(c, 2, {});
  CHECK(e.ngram_count(std::vector<TokenId>{0, 1}) == 1);
  CHECK(e.ngram_count(std::vector<TokenId>{1, 1}) == 0);
  CHECK(e.ngram_count(std::vector<TokenId>{1, 0}) == 1);
}

TEST_CASE("training requires enough tokens") {
  CHECK_THROWS_AS(NgramExpert::train(corpus_of({0}, 2), 2, {}),
                  InvalidArgument);
  CHECK_THROWS_AS(NgramExpert::train(corpus_of({0, 1}, 2), 2, {0.0, {}}),
                  InvalidArgument);
}

TEST_CASE("untrained expert scores every token at 1/V") {
  const NgramExpert e = NgramExpert::untrained("u", 8, 2, {});
  for (double p : score_tokens(e, validation_of({0, 7, 3, 3, 1}, 8))) {
    CHECK(p == doctest::Approx(0.125).epsilon(1e-15));
  }
  CHECK_THROWS_AS(score_tokens(e, validation_of({0, 1}, 4)), InvalidArgument);
}

TEST_CASE("an expert scores its own domain best") {
  const auto specs = make_shared_marginal_markov_specs(3, 12, 21);
  std::vector<DomainCorpus> d;
  for (const auto& s : specs) d.push_back(generate_synthetic_domain(s, 30000));
  for (std::size_t i = 0; i < 3; ++i) {
    const ValidationDomain own = validation_of(d[i].tokens, 12);
    const double self = mean_negative_log(
        score_tokens(NgramExpert::train(d[i], 2, {}), own));
    for (std::size_t j = 0; j < 3; ++j) {
      if (j == i) continue;
      const double other = mean_negative_log(
          score_tokens(NgramExpert::train(d[j], 2, {}), own));
      CHECK(self <= other);
    }
  }
}

TEST_CASE("expert JSON round-trips") {
  const auto specs = make_shared_marginal_markov_specs(1, 6, 1);
  const NgramExpert e = NgramExpert::train(
      generate_synthetic_domain(specs[0], 500), 3, {0.25, {0.1, 0.2, 0.7}});
  CHECK(NgramExpert::from_json(e.to_json()) == e);
}

TEST_CASE("cache assembly") {
  const ProbCache c =
      testing::cache_from_rows("v", {{0.2, 0.6}, {0.4, 0.4}});
  CHECK(c.num_tokens() == 2);
  CHECK(c.num_experts() == 2);
  CHECK(c.prob(0, 1) == 0.6);
  CHECK(c.column(0) == std::vector<double>{0.2, 0.4});
  CHECK_THROWS_AS(testing::cache_from_rows("v", {{0.0, 0.5}}),
                  InvalidArgument);
  CHECK_THROWS_AS(testing::cache_from_rows("v", {{1.5, 0.5}}),
                  InvalidArgument);
}

TEST_CASE("single-expert cache equals score_tokens") {
  const auto specs = make_shared_marginal_markov_specs(2, 6, 13);
  const NgramExpert e =
      NgramExpert::train(generate_synthetic_domain(specs[0], 3000), 2, {});
  const ValidationDomain v =
      validation_of(generate_synthetic_domain(specs[1], 300).tokens, 6);
  const std::vector<NgramExpert> experts = {e};
  CHECK(build_prob_cache(experts, v).column(0) == score_tokens(e, v));
}

TEST_CASE("cache build is thread-count invariant and checks vocabularies") {
  const auto specs = make_shared_marginal_markov_specs(3, 6, 14);
  std::vector<NgramExpert> experts;
  for (const auto& s : specs) {
    experts.push_back(
        NgramExpert::train(generate_synthetic_domain(s, 2000), 2, {}));
  }
  const ValidationDomain v =
      validation_of(generate_synthetic_domain(specs[2], 500).tokens, 6);
  CHECK(build_prob_cache(experts, v, 1) == build_prob_cache(experts, v, 4));
  experts.push_back(NgramExpert::untrained("x", 7, 2, {}));
  CHECK_THROWS_AS(build_prob_cache(experts, v), InvalidArgument);
}

TEST_CASE("cache file round-trips at 12 significant digits") {
  testing::TempDir dir;
  const ProbCache c = testing::random_cache(5, 40, 3, "dom");
  const NgramExpert ref = NgramExpert::untrained("e0", 4, 2, {});
  write_cache(dir.path(), c, make_cache_manifest(c, ref));
  const std::string csv = read_file(dir.path() / "dom.cache.csv");
  CHECK(csv.rfind("token_index,expert_e0,expert_e1,expert_e2\n", 0) == 0);
  const ProbCache back = read_cache(dir.path(), "dom");
  REQUIRE(back.num_tokens() == 40);
  CHECK(back.expert_ids() == c.expert_ids());
  for (std::size_t t = 0; t < 40; ++t) {
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(back.prob(t, i) == doctest::Approx(c.prob(t, i)).epsilon(1e-11));
    }
  }
  CHECK(cache_to_csv(back) == csv);
  const CacheManifest m = CacheManifest::from_json(nlohmann::json::parse(
      read_file(dir.path() / "dom.cache.json")));
  CHECK(m.num_tokens == 40);
  CHECK(m.expert_order == 2);
}

TEST_CASE("sig12 formatting") {
  CHECK(format_sig12(0.75) == "7.50000000000e-01");
  CHECK(format_sig12(1.0 / 3.0) == "3.33333333333e-01");
}

}  // namespace
}  // namespace mixopt
