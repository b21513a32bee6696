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

#include "mixopt/corpus.h"

#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

#include "json.hpp"
#include "mixopt/error.h"
#include "mixopt/rng.h"
#include "mixopt/text_io.h"

namespace mixopt {
namespace {

constexpr double kTableTolerance = 1e-12;

void check_distribution(std::span<const double> p, const std::string& what) {
  double sum = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0) {
      throw InvalidArgument(what + " has a negative or non-finite entry");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > kTableTolerance) {
    throw InvalidArgument(what + " sums to " + std::to_string(sum) +
                          ", expected 1");
  }
}

std::vector<double> cumulative(std::span<const double> p) {
  std::vector<double> c(p.size());
  std::partial_sum(p.begin(), p.end(), c.begin());
  return c;
}

}  // namespace

void DomainCorpus::validate() const {
  if (vocab_size == 0) throw InvalidArgument("vocab_size must be positive");
  if (tokens.empty()) throw InvalidArgument("empty corpus");
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] >= vocab_size) {
      throw InvalidArgument("token id " + std::to_string(tokens[i]) +
                            " at position " + std::to_string(i) +
                            " is >= vocab_size " + std::to_string(vocab_size));
    }
  }
  if (sequence_starts.empty() || sequence_starts.front() != 0) {
    throw InvalidArgument("sequence_starts must begin with 0");
  }
  for (std::size_t i = 1; i < sequence_starts.size(); ++i) {
    if (sequence_starts[i] <= sequence_starts[i - 1] ||
        sequence_starts[i] >= tokens.size()) {
      throw InvalidArgument("sequence_starts must be increasing and in range");
    }
  }
}

std::string_view group_name(DomainGroup group) {
  return group == DomainGroup::kPretrain ? "SP-like" : "ET-like";
}

DomainGroup parse_group(std::string_view name) {
  if (name == "SP-like" || name == "SP") return DomainGroup::kPretrain;
  if (name == "ET-like" || name == "ET") return DomainGroup::kEndTask;
  throw InvalidArgument("unknown domain group '" + std::string(name) +
                        "' (expected SP-like or ET-like)");
}

void ValidationDomain::validate() const {
  if (vocab_size == 0) throw InvalidArgument("vocab_size must be positive");
  if (tokens.empty()) {
    throw InvalidArgument("validation domain " + id + " has no tokens");
  }
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] >= vocab_size) {
      throw InvalidArgument("validation domain " + id + ": token at position " +
                            std::to_string(i) + " is out of vocabulary");
    }
  }
}

void SyntheticDomainSpec::validate() const {
  if (vocab_size == 0) throw InvalidArgument("vocab_size must be positive");
  if (prefix_marginal.size() != vocab_size) {
    throw InvalidArgument("prefix_marginal must have vocab_size entries");
  }
  check_distribution(prefix_marginal, "prefix_marginal");
  if (conditionals.size() != vocab_size) {
    throw InvalidArgument("conditionals must have vocab_size rows");
  }
  for (std::size_t r = 0; r < conditionals.size(); ++r) {
    if (conditionals[r].size() != vocab_size) {
      throw InvalidArgument("conditionals row " + std::to_string(r) +
                            " must have vocab_size entries");
    }
    check_distribution(conditionals[r],
                       "conditionals row " + std::to_string(r));
  }
}

DomainCorpus load_domain(const std::filesystem::path& path,
                         std::uint32_t vocab_size, std::string id) {
  if (vocab_size == 0) throw InvalidArgument("vocab_size must be positive");
  if (!std::filesystem::exists(path)) {
    throw IoError("domain file not found: " + path.string());
  }
  const std::string text = read_file(path);
  DomainCorpus corpus;
  corpus.id = id.empty() ? path.stem().string() : std::move(id);
  corpus.vocab_size = vocab_size;
  std::size_t i = 0;
  while (i < text.size()) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    if (!std::isdigit(c)) {
      throw IoError(path.string() + ": unexpected character at byte " +
                    std::to_string(i));
    }
    std::uint64_t value = 0;
    while (i < text.size() &&
           std::isdigit(static_cast<unsigned char>(text[i]))) {
      value = value * 10 + static_cast<std::uint64_t>(text[i] - '0');
      if (value > std::numeric_limits<TokenId>::max()) {
        throw IoError(path.string() + ": token id overflows at position " +
                      std::to_string(corpus.tokens.size()));
      }
      ++i;
    }
    if (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) {
      throw IoError(path.string() + ": unexpected character at byte " +
                    std::to_string(i));
    }
    if (value >= vocab_size) {
      throw IoError(path.string() + ": token id " + std::to_string(value) +
                    " >= vocab_size " + std::to_string(vocab_size) +
                    " at position " + std::to_string(corpus.tokens.size()));
    }
    corpus.tokens.push_back(static_cast<TokenId>(value));
  }
  if (corpus.tokens.empty()) {
    throw IoError(path.string() + ": empty corpus");
  }
  return corpus;
}

std::string serialize_tokens(std::span<const TokenId> tokens) {
  std::string out;
  out.reserve(tokens.size() * 4);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += std::to_string(tokens[i]);
  }
  out.push_back('\n');
  return out;
}

void write_domain(const std::filesystem::path& path,
                  const DomainCorpus& corpus) {
  write_file(path, serialize_tokens(corpus.tokens));
}

DomainCorpus generate_synthetic_domain(const SyntheticDomainSpec& spec,
                                       std::size_t n_tokens, std::string id) {
  spec.validate();
  if (n_tokens == 0) throw InvalidArgument("n_tokens must be >= 1");
  const std::vector<double> start_cdf = cumulative(spec.prefix_marginal);
  std::vector<std::vector<double>> row_cdf;
  row_cdf.reserve(spec.conditionals.size());
  for (const auto& row : spec.conditionals) row_cdf.push_back(cumulative(row));

  // Token t consumes exactly draw t of the stream.
  const StreamRng rng(spec.seed, 0);
  DomainCorpus corpus;
  corpus.id = std::move(id);
  corpus.vocab_size = spec.vocab_size;
  corpus.tokens.resize(n_tokens);
  corpus.tokens[0] =
      static_cast<TokenId>(sample_index(start_cdf, rng.uniform_at(0)));
  for (std::size_t t = 1; t < n_tokens; ++t) {
    corpus.tokens[t] = static_cast<TokenId>(
        sample_index(row_cdf[corpus.tokens[t - 1]], rng.uniform_at(t)));
  }
  return corpus;
}

DomainCorpus sample_mixed_corpus(std::span<const DomainCorpus> domains,
                                 const MixtureWeights& lambda,
                                 std::size_t n_tokens, std::uint64_t seed,
                                 std::size_t segment_length) {
  if (domains.size() != lambda.size()) {
    throw InvalidArgument("mixture has " + std::to_string(lambda.size()) +
                          " weights for " + std::to_string(domains.size()) +
                          " domains");
  }
  if (n_tokens == 0) throw InvalidArgument("n_tokens must be >= 1");
  if (segment_length == 0) throw InvalidArgument("segment_length must be >= 1");
  const std::uint32_t vocab = domains.front().vocab_size;
  for (std::size_t i = 0; i < domains.size(); ++i) {
    if (domains[i].vocab_size != vocab) {
      throw InvalidArgument("domains do not share a vocabulary");
    }
    if (lambda[i] > 0.0 && domains[i].tokens.size() < segment_length) {
      throw InvalidArgument("domain " + domains[i].id +
                            " is shorter than one segment");
    }
  }
  const std::vector<double> cdf = cumulative(lambda.values());

  DomainCorpus mixed;
  mixed.id = "mixed";
  mixed.vocab_size = vocab;
  mixed.tokens.reserve(n_tokens);
  mixed.sequence_starts.clear();
  const std::size_t n_segments =
      (n_tokens + segment_length - 1) / segment_length;
  mixed.sequence_starts.reserve(n_segments);
  for (std::size_t j = 0; j < n_segments; ++j) {
    StreamRng rng(seed, j);
    const DomainCorpus& src = domains[sample_index(cdf, rng.uniform())];
    const std::size_t windows = src.tokens.size() - segment_length + 1;
    const std::size_t start = static_cast<std::size_t>(rng.below(windows));
    const std::size_t len =
        std::min(segment_length, n_tokens - mixed.tokens.size());
    mixed.sequence_starts.push_back(mixed.tokens.size());
    mixed.tokens.insert(mixed.tokens.end(), src.tokens.begin() + start,
                        src.tokens.begin() + start + len);
  }
  return mixed;
}

SyntheticDomainSpec parse_synthetic_spec(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("synthetic spec is not valid JSON: ") + e.what());
  }
  SyntheticDomainSpec spec;
  try {
    spec.vocab_size = j.at("vocab_size").get<std::uint32_t>();
    spec.prefix_marginal = j.at("prefix_marginal").get<std::vector<double>>();
    spec.conditionals =
        j.at("conditionals").get<std::vector<std::vector<double>>>();
    spec.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("synthetic spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

SyntheticDomainSpec load_synthetic_spec(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw IoError("synthetic spec not found: " + path.string());
  }
  return parse_synthetic_spec(read_file(path));
}

std::string synthetic_spec_to_json(const SyntheticDomainSpec& spec) {
  nlohmann::json j;
  j["vocab_size"] = spec.vocab_size;
  j["prefix_marginal"] = spec.prefix_marginal;
  j["conditionals"] = spec.conditionals;
  j["seed"] = spec.seed;
  return j.dump(1) + "\n";
}

std::vector<SyntheticDomainSpec> make_shared_marginal_markov_specs(
    std::size_t k, std::uint32_t vocab_size, std::uint64_t seed,
    std::size_t n_permutations, double concentration) {
  if (k == 0 || vocab_size == 0 || n_permutations == 0) {
    throw InvalidArgument("k, vocab_size and n_permutations must be positive");
  }
  std::vector<SyntheticDomainSpec> specs;
  specs.reserve(k);
  const double v = static_cast<double>(vocab_size);
  for (std::size_t d = 0; d < k; ++d) {
    StreamRng rng(seed, d);
    std::vector<double> w(n_permutations);
    double total = 0.0;
    while (!(total > 0.0)) {
      total = 0.0;
      for (double& x : w) total += x = sample_gamma(rng, concentration);
    }
    SyntheticDomainSpec spec;
    spec.vocab_size = vocab_size;
    spec.prefix_marginal.assign(vocab_size, 1.0 / v);
    spec.conditionals.assign(vocab_size, std::vector<double>(vocab_size, 0.0));
    std::vector<std::uint32_t> perm(vocab_size);
    for (std::size_t m = 0; m < n_permutations; ++m) {
      std::iota(perm.begin(), perm.end(), 0u);
      for (std::size_t i = vocab_size - 1; i > 0; --i) {
        std::swap(perm[i], perm[rng.below(i + 1)]);
      }
      for (std::uint32_t r = 0; r < vocab_size; ++r) {
        spec.conditionals[r][perm[r]] += w[m] / total;
      }
    }
    for (auto& row : spec.conditionals) {
      const double s = std::accumulate(row.begin(), row.end(), 0.0);
      for (double& x : row) x /= s;
    }
    spec.seed = derive_seed(seed, 1000 + d);
    specs.push_back(std::move(spec));
  }
  return specs;
}

SyntheticDomainSpec blend_specs(std::span<const SyntheticDomainSpec> specs,
                                std::span<const double> weights,
                                std::uint64_t seed) {
  if (specs.empty() || specs.size() != weights.size()) {
    throw InvalidArgument("blend_specs: need one weight per spec");
  }
  const MixtureWeights w(std::vector<double>(weights.begin(), weights.end()));
  SyntheticDomainSpec out;
  out.vocab_size = specs.front().vocab_size;
  out.prefix_marginal = specs.front().prefix_marginal;
  out.conditionals.assign(out.vocab_size,
                          std::vector<double>(out.vocab_size, 0.0));
  for (std::size_t s = 0; s < specs.size(); ++s) {
    if (specs[s].vocab_size != out.vocab_size) {
      throw InvalidArgument("blend_specs: vocabulary mismatch");
    }
    for (std::uint32_t r = 0; r < out.vocab_size; ++r) {
      for (std::uint32_t c = 0; c < out.vocab_size; ++c) {
        out.conditionals[r][c] += w[s] * specs[s].conditionals[r][c];
      }
    }
  }
  out.seed = seed;
  out.validate();
  return out;
}

}  // namespace mixopt
