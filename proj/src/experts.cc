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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mixopt/error.h"
#include "mixopt/parallel.h"
#include "mixopt/text_io.h"

namespace mixopt {

std::vector<double> SmoothingConfig::resolved_weights(int order) const {
  if (!(delta > 0.0) || !std::isfinite(delta)) {
    throw InvalidArgument("smoothing delta must be positive");
  }
  if (order < 1) throw InvalidArgument("n-gram order must be >= 1");
  if (order_weights.empty()) {
    return std::vector<double>(order, 1.0 / order);
  }
  if (order_weights.size() != static_cast<std::size_t>(order)) {
    throw InvalidArgument("need one interpolation weight per order");
  }
  double sum = 0.0;
  for (double b : order_weights) {
    if (!(b >= 0.0 && b <= 1.0)) {
      throw InvalidArgument("interpolation weights must lie in [0, 1]");
    }
    sum += b;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw InvalidArgument("interpolation weights must sum to 1");
  }
  return order_weights;
}

NgramExpert::NgramExpert(std::string domain_id, std::uint32_t vocab_size,
                         int order, const SmoothingConfig& smoothing)
    : domain_id_(std::move(domain_id)),
      order_(order),
      vocab_size_(vocab_size),
      delta_(smoothing.delta),
      betas_(smoothing.resolved_weights(order)),
      tables_(static_cast<std::size_t>(order)) {
  if (vocab_size_ == 0) throw InvalidArgument("vocab_size must be positive");
  unsigned __int128 span = 1;
  for (int o = 0; o < order_; ++o) {
    span *= vocab_size_;
    if (span > (static_cast<unsigned __int128>(1) << 64)) {
      throw InvalidArgument("vocab_size^order does not fit n-gram keys");
    }
  }
}

std::uint64_t NgramExpert::pack(std::span<const TokenId> tokens) const {
  std::uint64_t key = 0;
  for (TokenId t : tokens) key = key * vocab_size_ + t;
  return key;
}

NgramExpert NgramExpert::train(const DomainCorpus& corpus, int order,
                               const SmoothingConfig& smoothing) {
  corpus.validate();
  if (corpus.tokens.size() < static_cast<std::size_t>(std::max(order, 1))) {
    throw InvalidArgument("corpus " + corpus.id + " is shorter than order " +
                          std::to_string(order));
  }
  NgramExpert expert(corpus.id, corpus.vocab_size, order, smoothing);
  const std::span<const TokenId> tokens(corpus.tokens);
  std::size_t seq = 0;
  std::size_t seq_start = 0;
  for (std::size_t p = 0; p < tokens.size(); ++p) {
    while (seq + 1 < corpus.sequence_starts.size() &&
           corpus.sequence_starts[seq + 1] <= p) {
      seq_start = corpus.sequence_starts[++seq];
    }
    const std::size_t available = p - seq_start + 1;
    const int top = static_cast<int>(
        std::min<std::size_t>(available, static_cast<std::size_t>(order)));
    for (int o = 1; o <= top; ++o) {
      const auto gram = tokens.subspan(p + 1 - o, o);
      Table& table = expert.tables_[o - 1];
      ++table.ngrams[expert.pack(gram)];
      ++table.contexts[expert.pack(gram.first(o - 1))];
    }
  }
  return expert;
}

NgramExpert NgramExpert::untrained(std::string domain_id,
                                   std::uint32_t vocab_size, int order,
                                   const SmoothingConfig& smoothing) {
  return NgramExpert(std::move(domain_id), vocab_size, order, smoothing);
}

std::uint64_t NgramExpert::ngram_count(std::span<const TokenId> ngram) const {
  if (ngram.empty() || ngram.size() > static_cast<std::size_t>(order_)) {
    throw InvalidArgument("n-gram length out of range");
  }
  const Table& table = tables_[ngram.size() - 1];
  const auto it = table.ngrams.find(pack(ngram));
  return it == table.ngrams.end() ? 0 : it->second;
}

std::uint64_t NgramExpert::context_total(
    std::span<const TokenId> context) const {
  if (context.size() >= static_cast<std::size_t>(order_)) {
    throw InvalidArgument("context length out of range");
  }
  const Table& table = tables_[context.size()];
  const auto it = table.contexts.find(pack(context));
  return it == table.contexts.end() ? 0 : it->second;
}

double NgramExpert::prob(std::span<const TokenId> history,
                         TokenId next) const {
  if (next >= vocab_size_) throw InvalidArgument("token out of vocabulary");
  const std::size_t h =
      std::min(history.size(), static_cast<std::size_t>(order_ - 1));
  const int available = static_cast<int>(h) + 1;
  double beta_sum = 0.0;
  for (int o = 1; o <= available; ++o) beta_sum += betas_[o - 1];

  const double v = static_cast<double>(vocab_size_);
  const auto history_tail = history.last(h);
  TokenId gram_buf[64];
  std::vector<TokenId> gram_heap;
  std::span<TokenId> gram;
  if (h + 1 <= std::size(gram_buf)) {
    gram = std::span<TokenId>(gram_buf, h + 1);
  } else {
    gram_heap.resize(h + 1);
    gram = gram_heap;
  }
  std::copy(history_tail.begin(), history_tail.end(), gram.begin());
  gram[h] = next;

  auto component = [&](int o) {
    const auto g = std::span<const TokenId>(gram).last(o);
    const Table& table = tables_[o - 1];
    const auto ng = table.ngrams.find(pack(g));
    const auto ctx = table.contexts.find(pack(g.first(o - 1)));
    const double c_xy = ng == table.ngrams.end() ? 0.0 : double(ng->second);
    const double c_x = ctx == table.contexts.end() ? 0.0 : double(ctx->second);
    return (c_xy + delta_) / (c_x + delta_ * v);
  };

  if (!(beta_sum > 0.0)) return component(available);
  double p = 0.0;
  for (int o = 1; o <= available; ++o) {
    if (betas_[o - 1] > 0.0) p += (betas_[o - 1] / beta_sum) * component(o);
  }
  return p;
}

nlohmann::json NgramExpert::to_json() const {
  nlohmann::json j;
  j["domain_id"] = domain_id_;
  j["order"] = order_;
  j["vocab_size"] = vocab_size_;
  j["delta"] = delta_;
  j["order_weights"] = betas_;
  nlohmann::json tables = nlohmann::json::array();
  for (int o = 1; o <= order_; ++o) {
    // Only n-gram counts are stored; context totals are their marginals.
    std::vector<std::pair<std::uint64_t, std::uint64_t>> entries(
        tables_[o - 1].ngrams.begin(), tables_[o - 1].ngrams.end());
    std::sort(entries.begin(), entries.end());
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& [key, count] : entries) {
      std::vector<std::uint64_t> row(static_cast<std::size_t>(o) + 1);
      std::uint64_t rest = key;
      for (int i = o - 1; i >= 0; --i) {
        row[static_cast<std::size_t>(i)] = rest % vocab_size_;
        rest /= vocab_size_;
      }
      row.back() = count;
      rows.push_back(row);
    }
    tables.push_back({{"order", o}, {"counts", rows}});
  }
  j["tables"] = tables;
  return j;
}

NgramExpert NgramExpert::from_json(const nlohmann::json& j) {
  try {
    SmoothingConfig smoothing;
    smoothing.delta = j.at("delta").get<double>();
    smoothing.order_weights = j.at("order_weights").get<std::vector<double>>();
    NgramExpert expert(j.at("domain_id").get<std::string>(),
                       j.at("vocab_size").get<std::uint32_t>(),
                       j.at("order").get<int>(), smoothing);
    for (const auto& table : j.at("tables")) {
      const int o = table.at("order").get<int>();
      if (o < 1 || o > expert.order_) {
        throw IoError("expert table order out of range");
      }
      Table& t = expert.tables_[o - 1];
      for (const auto& row : table.at("counts")) {
        const auto v = row.get<std::vector<std::uint64_t>>();
        if (v.size() != static_cast<std::size_t>(o) + 1) {
          throw IoError("expert count row has wrong length");
        }
        std::vector<TokenId> gram(v.begin(), v.end() - 1);
        for (TokenId tok : gram) {
          if (tok >= expert.vocab_size_) {
            throw IoError("expert count row token out of vocabulary");
          }
        }
        t.ngrams[expert.pack(gram)] += v.back();
        t.contexts[expert.pack(std::span<const TokenId>(gram).first(o - 1))] +=
            v.back();
      }
    }
    return expert;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed expert file: ") + e.what());
  }
}

std::vector<double> score_tokens(const NgramExpert& expert,
                                 const ValidationDomain& domain) {
  if (domain.tokens.empty()) {
    throw InvalidArgument("validation domain " + domain.id + " is empty");
  }
  if (domain.vocab_size != expert.vocab_size()) {
    throw InvalidArgument("vocabulary mismatch between expert " +
                          expert.domain_id() + " and domain " + domain.id);
  }
  const std::span<const TokenId> tokens(domain.tokens);
  const std::size_t context = static_cast<std::size_t>(expert.order() - 1);
  std::vector<double> out(tokens.size());
  for (std::size_t j = 0; j < tokens.size(); ++j) {
    const std::size_t begin = j > context ? j - context : 0;
    out[j] = expert.prob(tokens.subspan(begin, j - begin), tokens[j]);
  }
  return out;
}

double mean_negative_log(std::span<const double> probs) {
  if (probs.empty()) throw InvalidArgument("no probabilities to average");
  double sum = 0.0;
  for (double p : probs) sum += -std::log(p);
  return sum / static_cast<double>(probs.size());
}

ProbCache::ProbCache(std::string domain_id, std::vector<std::string> expert_ids,
                     std::size_t num_tokens, std::vector<double> probs)
    : domain_id_(std::move(domain_id)),
      expert_ids_(std::move(expert_ids)),
      num_tokens_(num_tokens),
      probs_(std::move(probs)) {
  if (expert_ids_.empty()) throw InvalidArgument("cache needs >= 1 expert");
  if (num_tokens_ == 0) throw InvalidArgument("cache needs >= 1 token");
  if (probs_.size() != num_tokens_ * expert_ids_.size()) {
    throw InvalidArgument("cache matrix shape mismatch");
  }
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    if (!(probs_[i] > 0.0 && probs_[i] <= 1.0)) {
      throw InvalidArgument("cache " + domain_id_ + ": probability at row " +
                            std::to_string(i / expert_ids_.size()) +
                            " outside (0, 1]");
    }
  }
}

std::vector<double> ProbCache::column(std::size_t expert) const {
  if (expert >= expert_ids_.size()) throw InvalidArgument("no such expert");
  std::vector<double> col(num_tokens_);
  for (std::size_t t = 0; t < num_tokens_; ++t) col[t] = prob(t, expert);
  return col;
}

ProbCache build_prob_cache(std::span<const NgramExpert> experts,
                           const ValidationDomain& domain, unsigned threads) {
  if (experts.empty()) throw InvalidArgument("need at least one expert");
  for (const auto& e : experts) {
    if (e.vocab_size() != experts.front().vocab_size()) {
      throw InvalidArgument("experts have inconsistent vocabularies");
    }
  }
  domain.validate();
  const std::size_t k = experts.size();
  std::vector<std::vector<double>> columns(k);
  parallel_for(k, threads,
               [&](std::size_t i) { columns[i] = score_tokens(experts[i], domain); });
  const std::size_t n = domain.tokens.size();
  std::vector<double> probs(n * k);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t i = 0; i < k; ++i) probs[t * k + i] = columns[i][t];
  }
  std::vector<std::string> ids;
  ids.reserve(k);
  for (const auto& e : experts) ids.push_back(e.domain_id());
  return ProbCache(domain.id, std::move(ids), n, std::move(probs));
}

nlohmann::json CacheManifest::to_json() const {
  return {{"domain_id", domain_id},       {"num_tokens", num_tokens},
          {"expert_ids", expert_ids},     {"expert_order", expert_order},
          {"delta", delta},               {"order_weights", order_weights}};
}

CacheManifest CacheManifest::from_json(const nlohmann::json& j) {
  try {
    CacheManifest m;
    m.domain_id = j.at("domain_id").get<std::string>();
    m.num_tokens = j.at("num_tokens").get<std::size_t>();
    m.expert_ids = j.at("expert_ids").get<std::vector<std::string>>();
    m.expert_order = j.at("expert_order").get<int>();
    m.delta = j.at("delta").get<double>();
    m.order_weights = j.at("order_weights").get<std::vector<double>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed cache manifest: ") + e.what());
  }
}

CacheManifest make_cache_manifest(const ProbCache& cache,
                                  const NgramExpert& reference_expert) {
  CacheManifest m;
  m.domain_id = cache.domain_id();
  m.num_tokens = cache.num_tokens();
  m.expert_ids = cache.expert_ids();
  m.expert_order = reference_expert.order();
  m.delta = reference_expert.delta();
  m.order_weights = reference_expert.order_weights();
  return m;
}

std::string cache_to_csv(const ProbCache& cache) {
  std::string out = "token_index";
  for (const auto& id : cache.expert_ids()) out += ",expert_" + id;
  out += '\n';
  for (std::size_t t = 0; t < cache.num_tokens(); ++t) {
    out += std::to_string(t);
    for (double p : cache.row(t)) {
      out += ',';
      out += format_sig12(p);
    }
    out += '\n';
  }
  return out;
}

ProbCache cache_from_csv(std::string_view csv, std::string domain_id) {
  const auto lines = split_lines(csv);
  if (lines.empty()) throw IoError("cache file for " + domain_id + " is empty");
  const auto header = split_csv_line(lines.front());
  if (header.size() < 2 || header.front() != "token_index") {
    throw IoError("cache file for " + domain_id + " has a bad header");
  }
  std::vector<std::string> ids;
  for (std::size_t i = 1; i < header.size(); ++i) {
    if (header[i].rfind("expert_", 0) != 0) {
      throw IoError("cache header column '" + header[i] + "' is not expert_<id>");
    }
    ids.push_back(header[i].substr(7));
  }
  const std::size_t k = ids.size();
  const std::size_t n = lines.size() - 1;
  std::vector<double> probs;
  probs.reserve(n * k);
  for (std::size_t r = 0; r < n; ++r) {
    const auto fields = split_csv_line(lines[r + 1]);
    if (fields.size() != k + 1 || fields[0] != std::to_string(r)) {
      throw IoError("cache file for " + domain_id + ": malformed row " +
                    std::to_string(r));
    }
    for (std::size_t i = 1; i <= k; ++i) {
      probs.push_back(parse_double(fields[i], "cache " + domain_id));
    }
  }
  return ProbCache(std::move(domain_id), std::move(ids), n, std::move(probs));
}

void write_cache(const std::filesystem::path& dir, const ProbCache& cache,
                 const CacheManifest& manifest) {
  write_file(dir / (cache.domain_id() + ".cache.csv"), cache_to_csv(cache));
  write_file(dir / (cache.domain_id() + ".cache.json"),
             manifest.to_json().dump(2) + "\n");
}

ProbCache read_cache(const std::filesystem::path& dir,
                     const std::string& domain_id) {
  const auto csv_path = dir / (domain_id + ".cache.csv");
  if (!std::filesystem::exists(csv_path)) {
    throw IoError("cache file not found: " + csv_path.string());
  }
  ProbCache cache = cache_from_csv(read_file(csv_path), domain_id);
  const auto manifest_path = dir / (domain_id + ".cache.json");
  if (std::filesystem::exists(manifest_path)) {
    CacheManifest m;
    try {
      m = CacheManifest::from_json(
          nlohmann::json::parse(read_file(manifest_path)));
    } catch (const nlohmann::json::exception& e) {
      throw IoError("malformed cache manifest " + manifest_path.string() +
                    ": " + e.what());
    }
    if (m.num_tokens != cache.num_tokens() ||
        m.expert_ids != cache.expert_ids()) {
      throw IoError("cache manifest does not match " + csv_path.string());
    }
  }
  return cache;
}

}  // namespace mixopt
