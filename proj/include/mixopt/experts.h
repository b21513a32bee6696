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

// Interpolated additive-smoothed n-gram "data experts" and the per-token
// probability cache they produce on validation domains.

#ifndef MIXOPT_EXPERTS_H_
#define MIXOPT_EXPERTS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "mixopt/corpus.h"

namespace mixopt {

// P(y|x) = sum_o beta_o * (c_o(x_o, y) + delta) / (c_o(x_o) + delta * V),
// where x_o is the last o-1 tokens of the history. An empty `order_weights`
// means uniform weights over orders 1..n.
struct SmoothingConfig {
  double delta = 0.5;
  std::vector<double> order_weights;

  // Resolves defaults and checks delta > 0 and the weights lie on the simplex.
  std::vector<double> resolved_weights(int order) const;
};

class NgramExpert {
 public:
  // `order` is the n of the n-gram (2 = bigram). Counts never cross the
  // corpus' sequence starts.
  static NgramExpert train(const DomainCorpus& corpus, int order,
                           const SmoothingConfig& smoothing);

  // A count-free model; every conditional is uniform.
  static NgramExpert untrained(std::string domain_id, std::uint32_t vocab_size,
                               int order, const SmoothingConfig& smoothing);

  // P(next | history). Only the last order-1 tokens of `history` are used;
  // shorter histories back off to the available lower orders with their
  // weights renormalized (the first token of a sequence is scored by the
  // unigram component alone).
  double prob(std::span<const TokenId> history, TokenId next) const;

  // Count of an n-gram of length 1..order, and the total count of n-grams
  // extending a context of length 0..order-1.
  std::uint64_t ngram_count(std::span<const TokenId> ngram) const;
  std::uint64_t context_total(std::span<const TokenId> context) const;

  const std::string& domain_id() const { return domain_id_; }
  int order() const { return order_; }
  std::uint32_t vocab_size() const { return vocab_size_; }
  double delta() const { return delta_; }
  const std::vector<double>& order_weights() const { return betas_; }

  nlohmann::json to_json() const;
  static NgramExpert from_json(const nlohmann::json& j);

  friend bool operator==(const NgramExpert&, const NgramExpert&) = default;

 private:
  struct Table {
    std::unordered_map<std::uint64_t, std::uint64_t> ngrams;
    std::unordered_map<std::uint64_t, std::uint64_t> contexts;
    friend bool operator==(const Table&, const Table&) = default;
  };

  NgramExpert(std::string domain_id, std::uint32_t vocab_size, int order,
              const SmoothingConfig& smoothing);
  std::uint64_t pack(std::span<const TokenId> tokens) const;

  std::string domain_id_;
  int order_ = 1;
  std::uint32_t vocab_size_ = 0;
  double delta_ = 0.5;
  std::vector<double> betas_;
  std::vector<Table> tables_;  // tables_[o - 1] holds order-o statistics.
};

// Per-position probability of the realized token; entry j conditions on
// the preceding tokens of the domain.
std::vector<double> score_tokens(const NgramExpert& expert,
                                 const ValidationDomain& domain);

// Mean of -ln(p) accumulated in ascending index order.
double mean_negative_log(std::span<const double> probs);

// Realized-token probabilities of k experts on one validation domain,
// stored row-major [num_tokens x k].
class ProbCache {
 public:
  // Throws InvalidArgument unless every entry is in (0, 1] and the matrix
  // shape matches.
  ProbCache(std::string domain_id, std::vector<std::string> expert_ids,
            std::size_t num_tokens, std::vector<double> probs);

  const std::string& domain_id() const { return domain_id_; }
  const std::vector<std::string>& expert_ids() const { return expert_ids_; }
  std::size_t num_tokens() const { return num_tokens_; }
  std::size_t num_experts() const { return expert_ids_.size(); }

  double prob(std::size_t token, std::size_t expert) const {
    return probs_[token * expert_ids_.size() + expert];
  }
  std::span<const double> row(std::size_t token) const {
    return {probs_.data() + token * expert_ids_.size(), expert_ids_.size()};
  }
  std::vector<double> column(std::size_t expert) const;

  friend bool operator==(const ProbCache&, const ProbCache&) = default;

 private:
  std::string domain_id_;
  std::vector<std::string> expert_ids_;
  std::size_t num_tokens_ = 0;
  std::vector<double> probs_;
};

// Column i is score_tokens(experts[i], domain). Experts are scored in
// parallel; the result does not depend on `threads`.
ProbCache build_prob_cache(std::span<const NgramExpert> experts,
                           const ValidationDomain& domain,
                           unsigned threads = 1);

struct CacheManifest {
  std::string domain_id;
  std::size_t num_tokens = 0;
  std::vector<std::string> expert_ids;
  int expert_order = 0;
  double delta = 0.0;
  std::vector<double> order_weights;

  nlohmann::json to_json() const;
  static CacheManifest from_json(const nlohmann::json& j);
};

CacheManifest make_cache_manifest(const ProbCache& cache,
                                  const NgramExpert& reference_expert);

// CSV: header token_index,expert_<id>,...; values with 12 significant digits.
std::string cache_to_csv(const ProbCache& cache);
ProbCache cache_from_csv(std::string_view csv, std::string domain_id);

// <dir>/<domain>.cache.csv and <dir>/<domain>.cache.json.
void write_cache(const std::filesystem::path& dir, const ProbCache& cache,
                 const CacheManifest& manifest);
ProbCache read_cache(const std::filesystem::path& dir,
                     const std::string& domain_id);

}  // namespace mixopt

#endif  // MIXOPT_EXPERTS_H_
