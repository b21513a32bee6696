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

#include "mixopt/mixtures.h"

#include <cmath>
#include <cstdio>

#include "mixopt/error.h"
#include "mixopt/rng.h"
#include "mixopt/text_io.h"

namespace mixopt {

void MixtureSamplerConfig::validate() const {
  if (k == 0) throw InvalidArgument("sampler: k must be positive");
  if (domain_freqs.size() != k) {
    throw InvalidArgument("sampler: domain_freqs must have k entries");
  }
  double sum = 0.0;
  for (double f : domain_freqs) {
    if (!std::isfinite(f) || f < 0.0) {
      throw InvalidArgument("sampler: domain_freqs must be non-negative");
    }
    sum += f;
  }
  if (!(sum > 0.0)) throw InvalidArgument("sampler: domain_freqs is all zero");
  if (std::abs(sum - 1.0) > 1e-12) {
    throw InvalidArgument("sampler: domain_freqs must sum to 1");
  }
  if (!(uniform_weight >= 0.0 && uniform_weight <= 1.0)) {
    throw InvalidArgument("sampler: uniform_weight must lie in [0, 1]");
  }
  if (!(scale_lo > 0.0) || !(scale_lo <= scale_hi) || !std::isfinite(scale_hi)) {
    throw InvalidArgument("sampler: need 0 < scale_lo <= scale_hi");
  }
}

std::vector<double> dirichlet_concentration(const MixtureSamplerConfig& cfg,
                                            double scale) {
  cfg.validate();
  const double u = 1.0 / static_cast<double>(cfg.k);
  std::vector<double> alpha(cfg.k);
  for (std::size_t i = 0; i < cfg.k; ++i) {
    alpha[i] = scale * (cfg.uniform_weight * u +
                        (1.0 - cfg.uniform_weight) * cfg.domain_freqs[i]);
  }
  return alpha;
}

MixtureWeights sample_dirichlet(std::span<const double> alpha,
                                std::uint64_t seed, std::uint64_t stream) {
  StreamRng rng(seed, stream);
  std::vector<double> g(alpha.size(), 0.0);
  // Gamma draws with tiny shapes can underflow to zero; redraw in that case.
  for (int attempt = 0; attempt < 64; ++attempt) {
    double total = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
      g[i] = alpha[i] > 0.0 ? sample_gamma(rng, alpha[i]) : 0.0;
      total += g[i];
    }
    if (total > 0.0 && std::isfinite(total)) {
      return MixtureWeights::normalized(std::move(g));
    }
  }
  throw NumericError("Dirichlet draw underflowed repeatedly");
}

std::vector<MixtureWeights> sample_mixtures(const MixtureSamplerConfig& cfg,
                                            std::size_t n) {
  cfg.validate();
  if (n == 0) throw InvalidArgument("sampler: n must be >= 1");
  std::vector<MixtureWeights> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    StreamRng scale_rng(cfg.seed, 2 * i);
    const double scale =
        cfg.scale_lo + (cfg.scale_hi - cfg.scale_lo) * scale_rng.uniform();
    out.push_back(sample_dirichlet(dirichlet_concentration(cfg, scale),
                                   cfg.seed, 2 * i + 1));
  }
  return out;
}

std::vector<MixtureWeights> include_expert_corners(
    const std::vector<MixtureWeights>& mixtures, std::size_t k) {
  std::vector<MixtureWeights> out;
  out.reserve(k + mixtures.size());
  for (std::size_t i = 0; i < k; ++i) out.push_back(MixtureWeights::one_hot(k, i));
  for (const auto& m : mixtures) {
    if (m.size() != k) throw InvalidArgument("mixture size does not match k");
    if (!m.corner_index()) out.push_back(m);
  }
  return out;
}

MixtureWeights smooth_mixture(const MixtureWeights& lambda) {
  const double floor = 0.01 / static_cast<double>(lambda.size());
  std::vector<double> w(lambda.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.99 * lambda[i] + floor;
  return MixtureWeights(std::move(w));
}

std::vector<NamedMixture> name_mixtures(
    const std::vector<MixtureWeights>& mixtures) {
  std::vector<NamedMixture> out;
  out.reserve(mixtures.size());
  std::size_t n = 0;
  for (const auto& m : mixtures) {
    std::string id;
    if (auto c = m.corner_index()) {
      id = "corner_" + std::to_string(*c);
    } else {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "mix_%03zu", n++);
      id = buf;
    }
    out.push_back({std::move(id), m});
  }
  return out;
}

std::string mixtures_to_csv(std::span<const NamedMixture> mixtures) {
  std::string out = "mixture_id";
  const std::size_t k = mixtures.empty() ? 0 : mixtures.front().weights.size();
  for (std::size_t i = 0; i < k; ++i) out += ",w_" + std::to_string(i);
  out += '\n';
  for (const auto& m : mixtures) {
    if (m.weights.size() != k) {
      throw InvalidArgument("mixtures have different sizes");
    }
    out += m.id;
    for (double w : m.weights.values()) {
      out += ',';
      out += format_sig12(w);
    }
    out += '\n';
  }
  return out;
}

std::vector<NamedMixture> mixtures_from_csv(std::string_view csv) {
  const auto lines = split_lines(csv);
  if (lines.empty()) throw IoError("mixtures file is empty");
  const auto header = split_csv_line(lines.front());
  if (header.size() < 2 || header.front() != "mixture_id") {
    throw IoError("mixtures file has a bad header");
  }
  const std::size_t k = header.size() - 1;
  for (std::size_t i = 0; i < k; ++i) {
    if (header[i + 1] != "w_" + std::to_string(i)) {
      throw IoError("mixtures header column " + std::to_string(i + 1) +
                    " should be w_" + std::to_string(i));
    }
  }
  std::vector<NamedMixture> out;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = split_csv_line(lines[r]);
    if (fields.size() != k + 1 || fields[0].empty()) {
      throw IoError("mixtures file: malformed row " + std::to_string(r));
    }
    std::vector<double> w(k);
    for (std::size_t i = 0; i < k; ++i) {
      w[i] = parse_double(fields[i + 1], "mixtures file");
    }
    for (const auto& prev : out) {
      if (prev.id == fields[0]) {
        throw IoError("mixtures file: duplicate id " + fields[0]);
      }
    }
    out.push_back({fields[0], MixtureWeights::normalized(std::move(w))});
  }
  return out;
}

void write_mixtures(const std::filesystem::path& path,
                    std::span<const NamedMixture> mixtures) {
  write_file(path, mixtures_to_csv(mixtures));
}

std::vector<NamedMixture> read_mixtures(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw IoError("mixtures file not found: " + path.string());
  }
  return mixtures_from_csv(read_file(path));
}

}  // namespace mixopt
