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

#include <bit>
#include <map>

#include "mixopt/error.h"
#include "mixopt/parallel.h"
#include "mixopt/rng.h"
#include "mixopt/text_io.h"

namespace mixopt {

NgramExpert train_proxy(std::span<const DomainCorpus> domains,
                        const MixtureWeights& lambda, const ProxyConfig& cfg,
                        std::uint64_t seed, std::string id) {
  if (cfg.token_budget < static_cast<std::size_t>(std::max(cfg.order, 1))) {
    throw InvalidArgument("proxy token budget is smaller than the order");
  }
  DomainCorpus corpus = sample_mixed_corpus(domains, lambda, cfg.token_budget,
                                            seed, cfg.segment_length);
  corpus.id = std::move(id);
  return NgramExpert::train(corpus, cfg.order, cfg.smoothing);
}

LossVector measure(const NgramExpert& proxy,
                   std::span<const ValidationDomain> domains) {
  LossVector out;
  for (const auto& d : domains) {
    out.push_back(d.id, mean_negative_log(score_tokens(proxy, d)));
  }
  return out;
}

std::uint64_t mixture_seed(std::uint64_t master_seed,
                           const MixtureWeights& lambda) {
  std::uint64_t h = derive_seed(master_seed, lambda.size());
  for (double w : lambda.values()) {
    h = mix64(h ^ std::bit_cast<std::uint64_t>(w + 0.0));
  }
  return h;
}

void MeasurementSet::validate() const {
  std::map<std::string, int> ids;
  for (const auto& r : records) {
    if (++ids[r.mixture_id] > 1) {
      throw InvalidArgument("duplicate mixture id " + r.mixture_id);
    }
    if (r.losses.domains != records.front().losses.domains) {
      throw InvalidArgument("record " + r.mixture_id +
                            " covers a different domain set");
    }
    if (r.weights.size() != records.front().weights.size()) {
      throw InvalidArgument("record " + r.mixture_id +
                            " has a different number of components");
    }
  }
}

std::vector<std::string> MeasurementSet::domains() const {
  return records.empty() ? std::vector<std::string>{}
                         : records.front().losses.domains;
}

std::size_t MeasurementSet::num_components() const {
  return records.empty() ? 0 : records.front().weights.size();
}

MeasurementSet build_measurement_set(std::span<const DomainCorpus> domains,
                                     std::span<const ValidationDomain> val,
                                     std::span<const NamedMixture> mixtures,
                                     const ProxyConfig& cfg,
                                     std::uint64_t master_seed,
                                     unsigned threads) {
  if (mixtures.empty()) throw InvalidArgument("need at least one mixture");
  MeasurementSet set;
  set.proxy_order = cfg.order;
  set.token_budget = cfg.token_budget;
  set.master_seed = master_seed;
  std::vector<LossVector> losses(mixtures.size());
  parallel_for(mixtures.size(), threads, [&](std::size_t i) {
    const auto& m = mixtures[i];
    const NgramExpert proxy =
        train_proxy(domains, m.weights, cfg,
                    mixture_seed(master_seed, m.weights), m.id);
    losses[i] = measure(proxy, val);
  });
  set.records.reserve(mixtures.size());
  for (std::size_t i = 0; i < mixtures.size(); ++i) {
    set.records.push_back({mixtures[i].id, mixtures[i].weights,
                           std::move(losses[i])});
  }
  set.validate();
  return set;
}

std::string measurements_to_csv(const MeasurementSet& set) {
  std::string out = "mixture_id,domain_id,loss\n";
  for (const auto& r : set.records) {
    for (std::size_t j = 0; j < r.losses.size(); ++j) {
      out += r.mixture_id + "," + r.losses.domains[j] + "," +
             format_sig12(r.losses.values[j]) + "\n";
    }
  }
  return out;
}

MeasurementSet measurements_from_csv(std::string_view csv,
                                     std::span<const NamedMixture> mixtures) {
  const auto lines = split_lines(csv);
  if (lines.empty() || lines.front() != "mixture_id,domain_id,loss") {
    throw IoError("measurement file has a bad header");
  }
  MeasurementSet set;
  std::map<std::string, std::size_t> index;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto f = split_csv_line(lines[r]);
    if (f.size() != 3) {
      throw IoError("measurement file: malformed row " + std::to_string(r));
    }
    auto it = index.find(f[0]);
    if (it == index.end()) {
      const NamedMixture* found = nullptr;
      for (const auto& m : mixtures) {
        if (m.id == f[0]) found = &m;
      }
      if (!found) {
        throw IoError("measurement file refers to unknown mixture " + f[0]);
      }
      it = index.emplace(f[0], set.records.size()).first;
      set.records.push_back({f[0], found->weights, {}});
    }
    set.records[it->second].losses.push_back(
        f[1], parse_double(f[2], "measurement file"));
  }
  set.validate();
  return set;
}

}  // namespace mixopt
