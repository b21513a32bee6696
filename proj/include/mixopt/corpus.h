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

// Token corpora: loading from disk, synthetic Markov-chain generators with
// known distributions, and segment-level sampling of mixed corpora.

#ifndef MIXOPT_CORPUS_H_
#define MIXOPT_CORPUS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mixopt/mixture_weights.h"

namespace mixopt {

using TokenId = std::uint32_t;

// Tokens of one training domain. `sequence_starts` lists the offsets at
// which an independent sequence begins (always starts with 0); n-gram
// statistics never cross a sequence start.
struct DomainCorpus {
  std::string id;
  std::vector<TokenId> tokens;
  std::uint32_t vocab_size = 0;
  std::vector<std::size_t> sequence_starts{0};

  // Throws InvalidArgument if the corpus is empty, a token is out of range,
  // or the sequence starts are malformed.
  void validate() const;
};

enum class DomainGroup { kPretrain, kEndTask };

// "SP-like" / "ET-like".
std::string_view group_name(DomainGroup group);
// Accepts "SP-like", "SP", "ET-like", "ET" (case-sensitive).
DomainGroup parse_group(std::string_view name);

// A held-out token sequence on which losses are measured.
struct ValidationDomain {
  std::string id;
  std::vector<TokenId> tokens;
  std::uint32_t vocab_size = 0;
  DomainGroup group = DomainGroup::kPretrain;

  void validate() const;
};

// Markov-chain generator: the first token is drawn from `prefix_marginal`
// and every following token from the row of `conditionals` selected by the
// previous token. When `prefix_marginal` is stationary for `conditionals`
// it is also the marginal of every context position.
struct SyntheticDomainSpec {
  std::uint32_t vocab_size = 0;
  std::vector<double> prefix_marginal;            // [vocab_size]
  std::vector<std::vector<double>> conditionals;  // [vocab_size][vocab_size]
  std::uint64_t seed = 0;

  // Rows and marginal must be non-negative and sum to 1 within 1e-12.
  void validate() const;
};

// Reads whitespace-separated unsigned decimal ids. Errors name the file, and
// for out-of-range ids the 0-based token position.
DomainCorpus load_domain(const std::filesystem::path& path,
                         std::uint32_t vocab_size, std::string id = "");

// Canonical text form: ids separated by single spaces, trailing newline.
std::string serialize_tokens(std::span<const TokenId> tokens);
void write_domain(const std::filesystem::path& path, const DomainCorpus& corpus);

DomainCorpus generate_synthetic_domain(const SyntheticDomainSpec& spec,
                                       std::size_t n_tokens,
                                       std::string id = "synthetic");

inline constexpr std::size_t kDefaultSegmentLength = 64;

// Draws ceil(n_tokens / segment_length) segments; segment j picks domain i
// with probability lambda_i and a uniformly random window of that domain,
// using RNG stream (seed, j). The last segment is truncated so the output
// has exactly n_tokens tokens. Every segment starts a new sequence.
DomainCorpus sample_mixed_corpus(std::span<const DomainCorpus> domains,
                                 const MixtureWeights& lambda,
                                 std::size_t n_tokens, std::uint64_t seed,
                                 std::size_t segment_length =
                                     kDefaultSegmentLength);

// JSON with fields vocab_size, prefix_marginal, conditionals, seed.
SyntheticDomainSpec parse_synthetic_spec(std::string_view json_text);
SyntheticDomainSpec load_synthetic_spec(const std::filesystem::path& path);
std::string synthetic_spec_to_json(const SyntheticDomainSpec& spec);

// Markov domains with doubly-stochastic transition matrices (convex
// combinations of `n_permutations` random permutation matrices) and a
// uniform start distribution. All such domains share the uniform stationary
// distribution, so their context marginals coincide while their
// conditionals differ.
std::vector<SyntheticDomainSpec> make_shared_marginal_markov_specs(
    std::size_t k, std::uint32_t vocab_size, std::uint64_t seed,
    std::size_t n_permutations = 3, double concentration = 0.5);

// Row-wise convex combination of the conditionals of `specs` with `weights`;
// keeps the shared uniform start distribution. Used to build end-task-like
// validation generators that lie between training domains.
SyntheticDomainSpec blend_specs(std::span<const SyntheticDomainSpec> specs,
                                std::span<const double> weights,
                                std::uint64_t seed);

}  // namespace mixopt

#endif  // MIXOPT_CORPUS_H_
