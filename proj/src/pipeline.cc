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

#include "mixopt/pipeline.h"

#include <algorithm>
#include <iostream>
#include <map>
#include <set>

#include "mixopt/error.h"
#include "mixopt/oracle.h"
#include "mixopt/parallel.h"
#include "mixopt/rng.h"
#include "mixopt/text_io.h"

namespace mixopt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Reads j[key] as T, or `fallback` when absent; type errors name the key.
template <typename T>
T get_or(const json& j, const std::string& key, T fallback,
         const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + where + key + "' has the wrong type");
  }
}

template <typename T>
T get_required(const json& j, const std::string& key,
               const std::string& where) {
  if (!j.contains(key)) {
    throw ConfigError("config key '" + where + key + "' is required");
  }
  return get_or<T>(j, key, T{}, where);
}

const json& object_at(const json& j, const std::string& key,
                      const std::string& where) {
  static const json kEmpty = json::object();
  if (!j.contains(key)) return kEmpty;
  if (!j.at(key).is_object()) {
    throw ConfigError("config key '" + where + key + "' must be an object");
  }
  return j.at(key);
}

DomainGroup parse_group_key(const std::string& name, const std::string& where) {
  try {
    return parse_group(name);
  } catch (const Error&) {
    throw ConfigError("config key '" + where + "group': unknown group '" +
                      name + "'");
  }
}

DomainSource parse_domain(const json& d, const fs::path& base,
                          const std::string& where, bool validation) {
  if (!d.is_object()) throw ConfigError("config key '" + where + "' must be an object");
  DomainSource s;
  s.id = get_required<std::string>(d, "id", where + ".");
  if (d.contains("path")) {
    s.path = base / get_required<std::string>(d, "path", where + ".");
    if (!fs::exists(s.path)) {
      throw ConfigError("config key '" + where + ".path': domain file not found: " +
                        s.path.string());
    }
  } else if (d.contains("spec")) {
    const fs::path p = base / get_required<std::string>(d, "spec", where + ".");
    try {
      s.spec = load_synthetic_spec(p);
    } catch (const InvalidArgument& e) {
      throw ConfigError("config key '" + where + ".spec' (" + p.string() +
                        "): " + e.what());
    }
    s.n_tokens = get_required<std::size_t>(d, "n_tokens", where + ".");
  } else {
    throw ConfigError("config key '" + where + "' needs 'path' or 'spec'");
  }
  if (validation) {
    s.group = parse_group_key(get_or<std::string>(d, "group", "SP", where + "."),
                              where + ".");
    if (d.contains("train_domain")) {
      s.train_domain = get_required<std::string>(d, "train_domain", where + ".");
    }
  }
  return s;
}

void expand_synthetic(const json& syn, RunConfig& cfg) {
  const std::string w = "synthetic.";
  const std::size_t k = get_required<std::size_t>(syn, "k", w);
  if (k == 0) throw ConfigError("config key 'synthetic.k' must be positive");
  if (cfg.vocab_size == 0) {
    throw ConfigError("config key 'vocab_size' is required for synthetic data");
  }
  const std::uint64_t gen_seed = cfg.stage_seed("synthetic");
  std::vector<SyntheticDomainSpec> specs;
  try {
    specs = make_shared_marginal_markov_specs(
        k, cfg.vocab_size, gen_seed,
        get_or<std::size_t>(syn, "n_permutations", 3, w),
        get_or<double>(syn, "concentration", 0.5, w));
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("config key 'synthetic': ") + e.what());
  }
  std::vector<std::string> ids = get_or<std::vector<std::string>>(
      syn, "train_ids", std::vector<std::string>{}, w);
  if (ids.empty()) {
    for (std::size_t i = 0; i < k; ++i) ids.push_back("d" + std::to_string(i));
  }
  if (ids.size() != k) {
    throw ConfigError("config key 'synthetic.train_ids' must list k ids");
  }
  const std::size_t train_tokens =
      get_or<std::size_t>(syn, "train_tokens", 200000, w);
  const std::size_t val_tokens =
      get_or<std::size_t>(syn, "validation_tokens", 20000, w);
  for (std::size_t i = 0; i < k; ++i) {
    DomainSource s;
    s.id = ids[i];
    s.spec = specs[i];
    s.n_tokens = train_tokens;
    cfg.train.push_back(std::move(s));
  }
  const json vals = syn.contains("validation") ? syn.at("validation") : json::array();
  if (!vals.is_array()) {
    throw ConfigError("config key 'synthetic.validation' must be an array");
  }
  for (std::size_t j = 0; j < vals.size(); ++j) {
    const std::string where = w + "validation[" + std::to_string(j) + "].";
    const json& v = vals[j];
    DomainSource s;
    s.id = get_required<std::string>(v, "id", where);
    s.group = parse_group_key(get_or<std::string>(v, "group", "SP", where), where);
    s.n_tokens = get_or<std::size_t>(v, "n_tokens", val_tokens, where);
    if (v.contains("source")) {
      const std::string src = get_required<std::string>(v, "source", where);
      const auto it = std::find(ids.begin(), ids.end(), src);
      if (it == ids.end()) {
        throw ConfigError("config key '" + where + "source': unknown domain '" +
                          src + "'");
      }
      s.spec = specs[static_cast<std::size_t>(it - ids.begin())];
      s.spec->seed = derive_seed(gen_seed, 5000 + j);
      s.train_domain = src;
    } else if (v.contains("blend")) {
      const auto weights = get_required<std::vector<double>>(v, "blend", where);
      try {
        s.spec = blend_specs(specs, weights, derive_seed(gen_seed, 6000 + j));
      } catch (const InvalidArgument& e) {
        throw ConfigError("config key '" + where + "blend': " + e.what());
      }
    } else {
      throw ConfigError("config key '" + where + "' needs 'source' or 'blend'");
    }
    if (v.contains("train_domain")) {
      s.train_domain = get_required<std::string>(v, "train_domain", where);
    }
    cfg.validation.push_back(std::move(s));
  }
}

FeatureSpec parse_features(json f, const std::vector<std::string>& val_ids,
                           const std::string& where) {
  if (!f.is_object()) throw ConfigError("config key '" + where + "' must be an object");
  const FeatureMode mode = [&] {
    try {
      return parse_feature_mode(get_or<std::string>(f, "mode", "lambda", where + "."));
    } catch (const InvalidArgument& e) {
      throw ConfigError("config key '" + where + ".mode': " + e.what());
    }
  }();
  FeatureSpec spec;
  spec.mode = mode;
  if (spec.uses_mde()) {
    if (!f.contains("mde_domains") ||
        (f.at("mde_domains").is_string() && f.at("mde_domains") == "all")) {
      spec.mde_domains = val_ids;
    } else {
      spec.mde_domains = get_required<std::vector<std::string>>(
          f, "mde_domains", where + ".");
    }
    for (const auto& d : spec.mde_domains) {
      if (std::find(val_ids.begin(), val_ids.end(), d) == val_ids.end()) {
        throw ConfigError("config key '" + where +
                          ".mde_domains': unknown validation domain '" + d + "'");
      }
    }
    if (spec.mde_domains.empty()) {
      throw ConfigError("config key '" + where + ".mde_domains' is empty");
    }
  }
  return spec;
}

ModelSpec parse_model(const json& m, const std::vector<std::string>& val_ids,
                      const std::string& where) {
  if (!m.is_object()) throw ConfigError("config key '" + where + "' must be an object");
  ModelSpec spec;
  try {
    spec.family = parse_family(get_required<std::string>(m, "family", where + "."));
  } catch (const ConfigError& e) {
    throw ConfigError("config key '" + where + ".family': " + e.what());
  }
  spec.features = parse_features(
      m.contains("features") ? m.at("features") : json::object(), val_ids,
      where + ".features");
  if (spec.family == Family::kMdeDirect) {
    spec.features = FeatureSpec::with_mde(FeatureMode::kMdeOnly, val_ids);
  }
  spec.name = get_or<std::string>(
      m, "name",
      std::string(family_name(spec.family)) + "/" + spec.features.mode_name(),
      where + ".");
  return spec;
}

std::vector<std::string> ids_of(const std::vector<DomainSource>& v) {
  std::vector<std::string> out;
  for (const auto& d : v) out.push_back(d.id);
  return out;
}

// ---- manifests ----

std::string rel(const Workspace& ws, const fs::path& p) {
  return fs::relative(p, ws.root).generic_string();
}

json file_hashes(const Workspace& ws, const std::vector<fs::path>& files) {
  json out = json::object();
  for (const auto& f : files) out[rel(ws, f)] = sha256_hex(read_file(f));
  return out;
}

void write_manifest(const Workspace& ws, const RunConfig& cfg,
                    std::string_view stage, const std::vector<fs::path>& inputs,
                    const std::vector<fs::path>& outputs) {
  const json m = {{"stage", std::string(stage)},
                  {"config_hash", cfg.hash},
                  {"seed", cfg.seed},
                  {"inputs", file_hashes(ws, inputs)},
                  {"outputs", file_hashes(ws, outputs)}};
  write_file(ws.manifest(stage), m.dump(2) + "\n");
}

// Checks that `stage` ran under the same config.
void require_stage(const Workspace& ws, const RunConfig& cfg,
                   std::string_view stage, bool force) {
  const fs::path p = ws.manifest(stage);
  if (!fs::exists(p)) {
    throw IoError("missing " + p.string() + "; run `mixopt " +
                  std::string(stage) + "` first");
  }
  json m;
  try {
    m = json::parse(read_file(p));
  } catch (const json::exception& e) {
    throw IoError("malformed manifest " + p.string() + ": " + e.what());
  }
  const std::string hash = m.value("config_hash", std::string{});
  if (hash != cfg.hash && !force) {
    throw ConfigError("artifacts of `" + std::string(stage) +
                      "` were produced with config hash " + hash +
                      " but the current config hashes to " + cfg.hash +
                      "; rerun that stage or pass --force");
  }
}

std::vector<fs::path> expert_files(const Workspace& ws, const RunConfig& cfg) {
  std::vector<fs::path> out;
  for (const auto& id : cfg.train_ids()) {
    out.push_back(ws.experts_dir() / (id + ".json"));
  }
  return out;
}

std::vector<fs::path> cache_files(const Workspace& ws, const RunConfig& cfg) {
  std::vector<fs::path> out;
  for (const auto& id : cfg.validation_ids()) {
    out.push_back(ws.caches_dir() / (id + ".cache.csv"));
    out.push_back(ws.caches_dir() / (id + ".cache.json"));
  }
  return out;
}

std::vector<ProbCache> read_caches(const Workspace& ws, const RunConfig& cfg) {
  std::vector<ProbCache> out;
  for (const auto& id : cfg.validation_ids()) {
    out.push_back(read_cache(ws.caches_dir(), id));
  }
  return out;
}

MeasurementSet read_measurements(const Workspace& ws, const RunConfig& cfg) {
  const auto mixtures = read_mixtures(ws.mixtures());
  if (!fs::exists(ws.measurements())) {
    throw IoError("measurement file not found: " + ws.measurements().string());
  }
  MeasurementSet set = measurements_from_csv(read_file(ws.measurements()), mixtures);
  set.proxy_order = cfg.proxy.order;
  set.token_budget = cfg.proxy.token_budget;
  set.master_seed = cfg.seed;
  return set;
}

bool any_uses_mde(const RunConfig& cfg) {
  const auto uses = [](const ModelSpec& m) {
    return m.features.uses_mde() || m.family == Family::kMdeDirect;
  };
  return std::any_of(cfg.models.begin(), cfg.models.end(), uses) ||
         uses(cfg.optimize_model);
}

FitOptions fit_options(const RunConfig& cfg) {
  FitOptions o = cfg.fit;
  o.seed = cfg.stage_seed("fit");
  const auto train = cfg.train_ids();
  for (const auto& v : cfg.validation) {
    if (!v.train_domain) continue;
    const auto it = std::find(train.begin(), train.end(), *v.train_domain);
    if (it == train.end()) {
      throw ConfigError("validation domain '" + v.id +
                        "': train_domain '" + *v.train_domain + "' is unknown");
    }
    o.bimix_weight_index[v.id] = static_cast<std::size_t>(it - train.begin());
  }
  return o;
}

const Aggregator& find_aggregator(const std::vector<Aggregator>& aggs,
                                  const std::string& name) {
  for (const auto& g : aggs) {
    if (g.name == name) return g;
  }
  throw ConfigError("config key 'optimize.aggregator': unknown aggregator '" +
                    name + "'");
}

}  // namespace

std::vector<std::string> RunConfig::train_ids() const { return ids_of(train); }
std::vector<std::string> RunConfig::validation_ids() const {
  return ids_of(validation);
}

std::uint64_t RunConfig::stage_seed(std::string_view stage) const {
  return derive_seed(seed, hash_name(stage));
}

RunConfig parse_config(const json& j, const fs::path& base_dir,
                       std::optional<std::uint64_t> seed_override) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig cfg;
  cfg.workspace = base_dir / get_or<std::string>(j, "workspace", "workspace", "");
  cfg.seed = seed_override.value_or(get_or<std::uint64_t>(j, "seed", 0, ""));
  cfg.threads = get_or<unsigned>(j, "threads", 0, "");
  cfg.vocab_size = get_or<std::uint32_t>(j, "vocab_size", 0, "");

  if (j.contains("synthetic")) expand_synthetic(object_at(j, "synthetic", ""), cfg);
  if (j.contains("train_domains")) {
    const json& arr = j.at("train_domains");
    if (!arr.is_array()) throw ConfigError("config key 'train_domains' must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      cfg.train.push_back(parse_domain(
          arr[i], base_dir, "train_domains[" + std::to_string(i) + "]", false));
    }
  }
  if (j.contains("validation_domains")) {
    const json& arr = j.at("validation_domains");
    if (!arr.is_array()) {
      throw ConfigError("config key 'validation_domains' must be an array");
    }
    for (std::size_t i = 0; i < arr.size(); ++i) {
      cfg.validation.push_back(parse_domain(
          arr[i], base_dir, "validation_domains[" + std::to_string(i) + "]", true));
    }
  }
  if (cfg.train.empty()) throw ConfigError("config key 'train_domains' is empty");
  if (cfg.validation.empty()) {
    throw ConfigError("config key 'validation_domains' is empty");
  }
  if (cfg.vocab_size == 0) throw ConfigError("config key 'vocab_size' is required");
  {
    std::set<std::string> seen;
    for (const auto& d : cfg.train) {
      if (!seen.insert(d.id).second) {
        throw ConfigError("duplicate training domain id '" + d.id + "'");
      }
    }
    seen.clear();
    for (const auto& d : cfg.validation) {
      if (!seen.insert(d.id).second) {
        throw ConfigError("duplicate validation domain id '" + d.id + "'");
      }
    }
  }
  const auto val_ids = cfg.validation_ids();

  const json& proxy = object_at(j, "proxy", "");
  cfg.proxy.order = get_or<int>(proxy, "order", 2, "proxy.");
  cfg.proxy.smoothing.delta = get_or<double>(proxy, "delta", 0.5, "proxy.");
  cfg.proxy.smoothing.order_weights = get_or<std::vector<double>>(
      proxy, "order_weights", std::vector<double>{}, "proxy.");
  cfg.proxy.token_budget =
      get_or<std::size_t>(proxy, "token_budget", 200000, "proxy.");
  cfg.proxy.segment_length = get_or<std::size_t>(
      proxy, "segment_length", kDefaultSegmentLength, "proxy.");
  try {
    if (cfg.proxy.order < 1) throw InvalidArgument("order must be >= 1");
    cfg.proxy.smoothing.resolved_weights(cfg.proxy.order);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("config key 'proxy': ") + e.what());
  }

  const json& mix = object_at(j, "mixtures", "");
  cfg.n_mixtures = get_or<std::size_t>(mix, "n", 40, "mixtures.");
  cfg.uniform_weight = get_or<double>(mix, "uniform_weight", 0.5, "mixtures.");
  const auto scale = get_or<std::vector<double>>(
      mix, "scale", std::vector<double>{0.5, 2.0}, "mixtures.");
  if (scale.size() != 2) throw ConfigError("config key 'mixtures.scale' needs [lo, hi]");
  cfg.scale_lo = scale[0];
  cfg.scale_hi = scale[1];
  cfg.domain_freqs = get_or<std::vector<double>>(mix, "domain_freqs",
                                                 std::vector<double>{}, "mixtures.");

  const json& fit = object_at(j, "fit", "");
  cfg.fit.cv_folds = get_or<std::size_t>(fit, "cv_folds", 5, "fit.");
  if (fit.contains("include_corners") && !fit.at("include_corners").is_null()) {
    cfg.fit.include_corners = get_or<bool>(fit, "include_corners", false, "fit.");
  }
  cfg.fit.ridge_grid = get_or<std::vector<double>>(fit, "ridge_grid", {}, "fit.");
  cfg.fit.gp_length_scales =
      get_or<std::vector<double>>(fit, "gp_length_scales", {}, "fit.");
  cfg.fit.gp_signal_variances =
      get_or<std::vector<double>>(fit, "gp_signal_variances", {}, "fit.");
  cfg.fit.gp_noises = get_or<std::vector<double>>(fit, "gp_noises", {}, "fit.");
  cfg.fit.dml_starts = get_or<int>(fit, "dml_starts", 16, "fit.");
  cfg.fit.dml_max_iterations = get_or<int>(fit, "dml_max_iterations", 500, "fit.");

  if (j.contains("models")) {
    const json& arr = j.at("models");
    if (!arr.is_array()) throw ConfigError("config key 'models' must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      cfg.models.push_back(
          parse_model(arr[i], val_ids, "models[" + std::to_string(i) + "]"));
    }
  } else {
    cfg.models = {
        {"Linear", Family::kLinear, FeatureSpec::lambda_only()},
        {"Linear+MDE", Family::kLinear,
         FeatureSpec::with_mde(FeatureMode::kLambdaMde, val_ids)},
        {"MDE", Family::kMdeDirect,
         FeatureSpec::with_mde(FeatureMode::kMdeOnly, val_ids)},
    };
  }

  const json& splits = object_at(j, "splits", "");
  cfg.plan.n_repeats = get_or<std::size_t>(splits, "n_repeats", 5, "splits.");
  cfg.plan.train_size = get_or<std::size_t>(splits, "train_size", 25, "splits.");
  if (splits.contains("test_size")) {
    cfg.plan.test_size = get_or<std::size_t>(splits, "test_size", 0, "splits.");
  }
  cfg.plan.seed = cfg.stage_seed("splits");
  cfg.learning_curve_sizes = get_or<std::vector<std::size_t>>(
      j, "learning_curve", std::vector<std::size_t>{}, "");

  if (j.contains("aggregators")) {
    const json& arr = j.at("aggregators");
    if (!arr.is_array()) throw ConfigError("config key 'aggregators' must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      try {
        cfg.aggregators.push_back(Aggregator::from_json(arr[i]));
      } catch (const InvalidArgument& e) {
        throw ConfigError("config key 'aggregators[" + std::to_string(i) +
                          "]': " + e.what());
      }
      for (const auto& d : cfg.aggregators.back().domains()) {
        if (std::find(val_ids.begin(), val_ids.end(), d) == val_ids.end()) {
          throw ConfigError("config key 'aggregators[" + std::to_string(i) +
                            "]': unknown validation domain '" + d + "'");
        }
      }
    }
  } else {
    cfg.aggregators = default_aggregators(cfg);
  }

  const json& opt = object_at(j, "optimize", "");
  cfg.optimize_model =
      opt.contains("model")
          ? parse_model(opt.at("model"), val_ids, "optimize.model")
          : ModelSpec{"Linear+MDE", Family::kLinear,
                      FeatureSpec::with_mde(FeatureMode::kLambdaMde, val_ids)};
  cfg.optimize_aggregator = get_or<std::string>(
      opt, "aggregator", cfg.aggregators.back().name, "optimize.");
  find_aggregator(cfg.aggregators, cfg.optimize_aggregator);
  try {
    cfg.optimizer = OptimizeConfig::from_json(opt);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key 'optimize': ") + e.what());
  }
  cfg.optimizer.seed = cfg.stage_seed("optimizer");
  cfg.optimizer.smoothing = get_or<bool>(opt, "smoothing", true, "optimize.");

  const json& oracle = object_at(j, "oracle", "");
  cfg.oracle_instances = get_or<std::size_t>(oracle, "instances", 1000, "oracle.");

  json canon = j;
  canon.erase("workspace");
  canon.erase("threads");
  canon["seed"] = cfg.seed;
  cfg.hash = sha256_hex(canon.dump());
  return cfg;
}

RunConfig load_config(const fs::path& path,
                      std::optional<std::uint64_t> seed_override) {
  if (!fs::exists(path)) throw IoError("config file not found: " + path.string());
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j, path.parent_path(), seed_override);
}

std::vector<DomainCorpus> load_training_domains(const RunConfig& cfg) {
  std::vector<DomainCorpus> out;
  for (const auto& d : cfg.train) {
    if (d.spec) {
      if (d.spec->vocab_size != cfg.vocab_size) {
        throw ConfigError("domain '" + d.id + "': spec vocabulary differs from vocab_size");
      }
      out.push_back(generate_synthetic_domain(*d.spec, d.n_tokens, d.id));
    } else {
      out.push_back(load_domain(d.path, cfg.vocab_size, d.id));
    }
  }
  return out;
}

std::vector<ValidationDomain> load_validation_domains(const RunConfig& cfg) {
  std::vector<ValidationDomain> out;
  for (const auto& d : cfg.validation) {
    DomainCorpus c = d.spec ? generate_synthetic_domain(*d.spec, d.n_tokens, d.id)
                            : load_domain(d.path, cfg.vocab_size, d.id);
    ValidationDomain v{d.id, std::move(c.tokens), cfg.vocab_size, d.group};
    v.validate();
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<NgramExpert> train_experts(const RunConfig& cfg,
                                       std::span<const DomainCorpus> domains) {
  std::vector<NgramExpert> experts(domains.size(),
                                   NgramExpert::untrained("", 1, 1, {}));
  parallel_for(domains.size(), cfg.threads, [&](std::size_t i) {
    const auto corner = MixtureWeights::one_hot(domains.size(), i);
    experts[i] = train_proxy(domains, corner, cfg.proxy,
                             mixture_seed(cfg.seed, corner), domains[i].id);
  });
  return experts;
}

std::vector<NamedMixture> sample_config_mixtures(
    const RunConfig& cfg, std::span<const DomainCorpus> domains) {
  MixtureSamplerConfig s;
  s.k = domains.size();
  s.domain_freqs = cfg.domain_freqs;
  if (s.domain_freqs.empty()) {
    std::vector<double> counts;
    for (const auto& d : domains) counts.push_back(static_cast<double>(d.tokens.size()));
    const auto w = MixtureWeights::normalized(counts);
    s.domain_freqs.assign(w.values().begin(), w.values().end());
  }
  s.uniform_weight = cfg.uniform_weight;
  s.scale_lo = cfg.scale_lo;
  s.scale_hi = cfg.scale_hi;
  s.seed = cfg.stage_seed("mixtures");
  try {
    s.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("config key 'mixtures': ") + e.what());
  }
  return name_mixtures(
      include_expert_corners(sample_mixtures(s, cfg.n_mixtures), s.k));
}

std::vector<Aggregator> default_aggregators(const RunConfig& cfg) {
  std::vector<std::string> sp, et, all;
  for (const auto& v : cfg.validation) {
    (v.group == DomainGroup::kPretrain ? sp : et).push_back(v.id);
    all.push_back(v.id);
  }
  std::vector<Aggregator> out;
  if (!sp.empty() && !et.empty()) {
    out.push_back(Aggregator::average("avg-SP", sp));
    out.push_back(Aggregator::average("avg-ET", et));
  }
  out.push_back(Aggregator::average("avg-ALL", all));
  return out;
}

void cmd_train_experts(const RunConfig& cfg, bool) {
  const Workspace ws{cfg.workspace};
  const auto domains = load_training_domains(cfg);
  const auto experts = train_experts(cfg, domains);
  std::vector<fs::path> inputs, outputs;
  for (const auto& d : cfg.train) {
    if (!d.spec) inputs.push_back(d.path);
  }
  for (const auto& e : experts) {
    const fs::path p = ws.experts_dir() / (e.domain_id() + ".json");
    write_file(p, e.to_json().dump() + "\n");
    outputs.push_back(p);
  }
  // Inputs outside the workspace are recorded by absolute path.
  json in = json::object();
  for (const auto& p : inputs) in[p.generic_string()] = sha256_hex(read_file(p));
  const json m = {{"stage", "train-experts"},
                  {"config_hash", cfg.hash},
                  {"seed", cfg.seed},
                  {"inputs", in},
                  {"outputs", file_hashes(ws, outputs)}};
  write_file(ws.manifest("train-experts"), m.dump(2) + "\n");
}

void cmd_build_caches(const RunConfig& cfg, bool force) {
  const Workspace ws{cfg.workspace};
  require_stage(ws, cfg, "train-experts", force);
  std::vector<NgramExpert> experts;
  for (const auto& p : expert_files(ws, cfg)) {
    if (!fs::exists(p)) throw IoError("expert file not found: " + p.string());
    try {
      experts.push_back(NgramExpert::from_json(json::parse(read_file(p))));
    } catch (const json::exception& e) {
      throw IoError("malformed expert " + p.string() + ": " + e.what());
    }
  }
  const auto val = load_validation_domains(cfg);
  for (const auto& v : val) {
    const ProbCache cache = build_prob_cache(experts, v, cfg.threads);
    write_cache(ws.caches_dir(), cache, make_cache_manifest(cache, experts.front()));
  }
  write_manifest(ws, cfg, "build-caches", expert_files(ws, cfg), cache_files(ws, cfg));
}

void cmd_sample_mixtures(const RunConfig& cfg, bool) {
  const Workspace ws{cfg.workspace};
  const auto domains = load_training_domains(cfg);
  write_mixtures(ws.mixtures(), sample_config_mixtures(cfg, domains));
  write_manifest(ws, cfg, "sample-mixtures", {}, {ws.mixtures()});
}

void cmd_measure(const RunConfig& cfg, bool force) {
  const Workspace ws{cfg.workspace};
  require_stage(ws, cfg, "sample-mixtures", force);
  const auto mixtures = read_mixtures(ws.mixtures());
  const auto domains = load_training_domains(cfg);
  const auto val = load_validation_domains(cfg);
  const MeasurementSet set = build_measurement_set(domains, val, mixtures, cfg.proxy,
                                                   cfg.seed, cfg.threads);
  write_file(ws.measurements(), measurements_to_csv(set));
  write_manifest(ws, cfg, "measure", {ws.mixtures()}, {ws.measurements()});
}

void cmd_fit_eval(const RunConfig& cfg, bool force) {
  const Workspace ws{cfg.workspace};
  require_stage(ws, cfg, "measure", force);
  std::vector<fs::path> inputs = {ws.mixtures(), ws.measurements()};
  std::vector<ProbCache> caches;
  if (any_uses_mde(cfg)) {
    require_stage(ws, cfg, "build-caches", force);
    caches = read_caches(ws, cfg);
    const auto files = cache_files(ws, cfg);
    inputs.insert(inputs.end(), files.begin(), files.end());
  }
  const MeasurementSet data = read_measurements(ws, cfg);
  const FitOptions options = fit_options(cfg);
  const auto reports = run_splits(data, cfg.models, cfg.aggregators, cfg.plan,
                                  caches, options, cfg.threads);
  json rj = json::array();
  for (const auto& r : reports) rj.push_back(r.to_json());
  const fs::path eval_json = ws.reports_dir() / "eval.json";
  const fs::path eval_txt = ws.reports_dir() / "eval.txt";
  write_file(eval_json, json{{"config_hash", cfg.hash}, {"reports", rj}}.dump(2) + "\n");
  write_file(eval_txt, render_table(reports));
  std::vector<fs::path> outputs = {eval_json, eval_txt};

  if (!cfg.learning_curve_sizes.empty()) {
    json curves = json::array();
    std::string text;
    for (const auto& m : cfg.models) {
      const auto lc = learning_curve(data, m, cfg.aggregators,
                                     cfg.learning_curve_sizes, cfg.plan, caches,
                                     options, cfg.threads);
      json rows = json::array();
      for (const auto& r : lc) rows.push_back(r.to_json());
      curves.push_back({{"model", m.name}, {"points", rows}});
      text += m.name + "\n" + render_learning_curve(lc) + "\n";
    }
    const fs::path lc_json = ws.reports_dir() / "learning_curve.json";
    const fs::path lc_txt = ws.reports_dir() / "learning_curve.txt";
    write_file(lc_json, json{{"config_hash", cfg.hash}, {"curves", curves}}.dump(2) + "\n");
    write_file(lc_txt, text);
    outputs.push_back(lc_json);
    outputs.push_back(lc_txt);
  }
  write_manifest(ws, cfg, "fit-eval", inputs, outputs);
}

void cmd_optimize(const RunConfig& cfg, bool force) {
  const Workspace ws{cfg.workspace};
  require_stage(ws, cfg, "measure", force);
  std::vector<fs::path> inputs = {ws.mixtures(), ws.measurements()};
  std::vector<ProbCache> caches;
  const ModelSpec& model = cfg.optimize_model;
  if (model.features.uses_mde() || model.family == Family::kMdeDirect) {
    require_stage(ws, cfg, "build-caches", force);
    caches = read_caches(ws, cfg);
    const auto files = cache_files(ws, cfg);
    inputs.insert(inputs.end(), files.begin(), files.end());
  }
  const MeasurementSet data = read_measurements(ws, cfg);
  const Predictor predictor =
      fit_predictor(model.family, data, model.features, caches, fit_options(cfg));
  const Aggregator& g = find_aggregator(cfg.aggregators, cfg.optimize_aggregator);
  OptimizeConfig oc = cfg.optimizer;
  oc.threads = cfg.threads;
  const OptimizeResult result = optimize(predictor, g, caches, oc);

  const fs::path pred_path = ws.reports_dir() / "predictor.json";
  const fs::path report_path = ws.reports_dir() / "optimize.json";
  write_file(pred_path, predictor.to_json().dump(2) + "\n");
  json train_ids = cfg.train_ids();
  const json report = {{"config_hash", cfg.hash},
                       {"model", model.to_json()},
                       {"aggregator", g.to_json()},
                       {"domains", train_ids},
                       {"optimizer", cfg.optimizer.to_json()},
                       {"result", result.to_json()},
                       {"predictor_warnings", predictor.warnings}};
  write_file(report_path, report.dump(2) + "\n");
  write_manifest(ws, cfg, "optimize", inputs, {pred_path, report_path});
}

void cmd_verify_prop1(const RunConfig& cfg, bool) {
  const Workspace ws{cfg.workspace};
  const OracleReport rep = verify_random_instances(
      cfg.stage_seed("oracle"), cfg.oracle_instances, 1e-12, cfg.threads);
  json j = rep.to_json();
  j["config_hash"] = cfg.hash;
  // Exact gap of the configured synthetic training domains, if any.
  std::vector<FiniteDomain> finite;
  for (const auto& d : cfg.train) {
    if (!d.spec) break;
    finite.push_back(FiniteDomain::from_markov(*d.spec));
  }
  if (finite.size() == cfg.train.size()) {
    const GapReport gap = mde_gap(finite, MixtureWeights::uniform(finite.size()));
    j["synthetic_uniform_gap"] = {{"max_pointwise_gap", gap.max_pointwise_gap},
                                  {"expected_loss_gap", gap.expected_loss_gap}};
  }
  const fs::path out = ws.reports_dir() / "prop1.json";
  write_file(out, j.dump(2) + "\n");
  write_manifest(ws, cfg, "verify-prop1", {}, {out});
  if (!rep.pass()) {
    throw NumericError("proposition check failed on " +
                       std::to_string(rep.failures) + " instance(s); see " +
                       out.string());
  }
}

void cmd_run(const RunConfig& cfg, bool force) {
  cmd_train_experts(cfg, force);
  cmd_build_caches(cfg, force);
  cmd_sample_mixtures(cfg, force);
  cmd_measure(cfg, force);
  cmd_fit_eval(cfg, force);
  cmd_optimize(cfg, force);
  cmd_verify_prop1(cfg, force);
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {
      "train-experts", "build-caches", "sample-mixtures", "measure",
      "fit-eval",      "optimize",     "verify-prop1",    "run"};
  return names;
}

int run_command(const std::string& command, const CommandOptions& options) {
  using Fn = void (*)(const RunConfig&, bool);
  static const std::map<std::string, Fn> table = {
      {"train-experts", cmd_train_experts}, {"build-caches", cmd_build_caches},
      {"sample-mixtures", cmd_sample_mixtures}, {"measure", cmd_measure},
      {"fit-eval", cmd_fit_eval},           {"optimize", cmd_optimize},
      {"verify-prop1", cmd_verify_prop1},   {"run", cmd_run}};
  const auto it = table.find(command);
  if (it == table.end()) {
    std::cerr << "mixopt: unknown command '" << command << "'\n";
    return 2;
  }
  try {
    RunConfig cfg = load_config(options.config, options.seed);
    if (options.threads) cfg.threads = *options.threads;
    it->second(cfg, options.force);
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "mixopt " << command << ": config error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "mixopt " << command << ": I/O error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidArgument& e) {
    std::cerr << "mixopt " << command << ": invalid input: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "mixopt " << command << ": error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace mixopt
