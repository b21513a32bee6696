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

// Run configuration and the pipeline stages behind the mixopt commands.
// Every stage reads and writes plain files under one workspace directory.

#ifndef MIXOPT_PIPELINE_H_
#define MIXOPT_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mixopt/corpus.h"
#include "mixopt/eval.h"
#include "mixopt/experts.h"
#include "mixopt/mde.h"
#include "mixopt/mixtures.h"
#include "mixopt/optimizer.h"
#include "mixopt/proxy.h"
#include "mixopt/regression.h"

namespace mixopt {

// A training or validation domain read from a token file or generated from
// a Markov spec.
struct DomainSource {
  std::string id;
  std::filesystem::path path;
  std::optional<SyntheticDomainSpec> spec;
  std::size_t n_tokens = 0;  // generated domains only
  DomainGroup group = DomainGroup::kPretrain;
  // Validation only: training domain whose weight BiMix uses.
  std::optional<std::string> train_domain;
};

struct RunConfig {
  std::filesystem::path workspace;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0 = all cores
  std::uint32_t vocab_size = 0;
  std::vector<DomainSource> train;
  std::vector<DomainSource> validation;

  ProxyConfig proxy;  // experts are proxies of the one-hot mixtures
  std::size_t n_mixtures = 40;  // sampled mixtures, corners excluded
  double uniform_weight = 0.5;
  double scale_lo = 0.5;
  double scale_hi = 2.0;
  std::vector<double> domain_freqs;  // empty = token counts

  std::vector<ModelSpec> models;
  SplitPlan plan;
  std::vector<std::size_t> learning_curve_sizes;
  FitOptions fit;
  std::vector<Aggregator> aggregators;

  ModelSpec optimize_model;
  std::string optimize_aggregator;
  OptimizeConfig optimizer;

  std::size_t oracle_instances = 1000;

  // SHA-256 of the canonical experiment description (seed included;
  // workspace and thread count excluded).
  std::string hash;

  std::vector<std::string> train_ids() const;
  std::vector<std::string> validation_ids() const;
  // Seed of a named stochastic stage, derived from `seed`.
  std::uint64_t stage_seed(std::string_view stage) const;
};

// Parses a JSON config. Relative paths resolve against `base_dir`. Throws
// ConfigError naming the offending key.
RunConfig parse_config(const nlohmann::json& j,
                       const std::filesystem::path& base_dir,
                       std::optional<std::uint64_t> seed_override = {});
RunConfig load_config(const std::filesystem::path& path,
                      std::optional<std::uint64_t> seed_override = {});

std::vector<DomainCorpus> load_training_domains(const RunConfig& cfg);
std::vector<ValidationDomain> load_validation_domains(const RunConfig& cfg);

// Expert i is the proxy of mixture e_i.
std::vector<NgramExpert> train_experts(const RunConfig& cfg,
                                       std::span<const DomainCorpus> domains);

// Sampled mixtures with the expert corners first.
std::vector<NamedMixture> sample_config_mixtures(
    const RunConfig& cfg, std::span<const DomainCorpus> domains);

// Default "avg-SP", "avg-ET" and "avg-ALL" over the configured groups.
std::vector<Aggregator> default_aggregators(const RunConfig& cfg);

// Workspace layout.
struct Workspace {
  std::filesystem::path root;

  std::filesystem::path experts_dir() const { return root / "experts"; }
  std::filesystem::path caches_dir() const { return root / "caches"; }
  std::filesystem::path mixtures() const { return root / "mixtures.csv"; }
  std::filesystem::path measurements() const {
    return root / "measurements.csv";
  }
  std::filesystem::path reports_dir() const { return root / "reports"; }
  std::filesystem::path manifest(std::string_view stage) const {
    return root / "manifests" / (std::string(stage) + ".json");
  }
};

struct CommandOptions {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  bool force = false;
};

// Pipeline stages. Each writes its artifacts and a manifest recording the
// config hash and the SHA-256 of its inputs and outputs. Stages that read
// another stage's artifacts refuse a manifest with a different config hash
// unless `force`.
void cmd_train_experts(const RunConfig& cfg, bool force = false);
void cmd_build_caches(const RunConfig& cfg, bool force = false);
void cmd_sample_mixtures(const RunConfig& cfg, bool force = false);
void cmd_measure(const RunConfig& cfg, bool force = false);
void cmd_fit_eval(const RunConfig& cfg, bool force = false);
void cmd_optimize(const RunConfig& cfg, bool force = false);
void cmd_verify_prop1(const RunConfig& cfg, bool force = false);
// All of the above in order.
void cmd_run(const RunConfig& cfg, bool force = false);

// Names accepted by run_command.
const std::vector<std::string>& command_names();

// Loads the config, applies overrides and runs `command`. Returns the
// process exit code: 0 success, 1 numerical or internal failure, 2 config or
// I/O error. Messages go to stderr.
int run_command(const std::string& command, const CommandOptions& options);

}  // namespace mixopt

#endif  // MIXOPT_PIPELINE_H_
