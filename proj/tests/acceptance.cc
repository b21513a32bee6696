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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mixopt/eval.h"
#include "mixopt/mixtures.h"
#include "mixopt/optimizer.h"
#include "mixopt/oracle.h"
#include "mixopt/pipeline.h"
#include "mixopt/rng.h"
#include "mixopt/text_io.h"
#include "test_util.h"

namespace mixopt {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id = 0;
  std::string name;
  double time_limit = 0.0;  // seconds; 0 = none
  Outcome outcome;
  double seconds = 0.0;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

const fs::path kBundledConfig =
    fs::path(MIXOPT_SOURCE_DIR) / "data" / "synthetic3" / "config.json";

RunConfig bundled_config(std::uint64_t seed, const fs::path& workspace,
                         unsigned threads) {
  RunConfig cfg = load_config(kBundledConfig, seed);
  cfg.workspace = workspace;
  cfg.threads = threads;
  return cfg;
}

std::vector<ProbCache> read_caches(const RunConfig& cfg) {
  std::vector<ProbCache> out;
  for (const auto& id : cfg.validation_ids()) {
    out.push_back(read_cache(Workspace{cfg.workspace}.caches_dir(), id));
  }
  return out;
}

MeasurementSet read_measurements(const RunConfig& cfg) {
  const Workspace ws{cfg.workspace};
  const auto mixtures = read_mixtures(ws.mixtures());
  return measurements_from_csv(read_file(ws.measurements()), mixtures);
}

// ---- 1 ----
Outcome proposition_exactness() {
  const OracleReport rep = verify_random_instances(20260101, 1000, 1e-12, 1);
  std::size_t max_k = 0, max_x = 0, max_y = 0;
  for (const auto& r : rep.instances) {
    max_k = std::max(max_k, r.k);
    max_x = std::max(max_x, r.num_prefixes);
    max_y = std::max(max_y, r.vocab_size);
  }
  const bool shape = max_k <= 4 && max_x <= 5 && max_y <= 6;
  return {rep.failures == 0 && rep.max_abs_diff <= 1e-12 && shape,
          std::to_string(rep.instances.size()) + " instances, max_abs_diff=" +
              fmt("%.3g", rep.max_abs_diff) + ", failures=" +
              std::to_string(rep.failures)};
}

// ---- 2 ----
Outcome ideal_case_exactness() {
  double worst_gap = 0.0;
  double worst_loss = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto specs = make_shared_marginal_markov_specs(3, 16, 100 + s);
    // Blending with the uniform matrix keeps rows and columns stochastic and
    // makes every transition possible, so each expert scores every token.
    for (auto& sp : specs) {
      for (auto& row : sp.conditionals) {
        for (double& v : row) v = 0.9 * v + 0.1 / 16.0;
      }
    }
    std::vector<FiniteDomain> domains;
    for (const auto& sp : specs) domains.push_back(FiniteDomain::from_markov(sp));
    for (std::uint64_t l = 0; l < 50; ++l) {
      const MixtureWeights lambda =
          sample_dirichlet(std::vector<double>(3, 1.0), s, l);
      worst_gap = std::max(worst_gap,
                           std::abs(mde_gap(domains, lambda).expected_loss_gap));
    }

    // Experts that know their conditionals exactly, scored on a sequence
    // from a blend of the domains.
    const std::vector<double> blend = {0.5, 0.3, 0.2};
    const DomainCorpus seq =
        generate_synthetic_domain(blend_specs(specs, blend, 900 + s), 3000);
    const std::size_t n = seq.tokens.size() - 1;
    std::vector<double> flat;
    for (std::size_t t = 1; t <= n; ++t) {
      for (const auto& d : domains) {
        flat.push_back(d.conditionals[seq.tokens[t - 1]][seq.tokens[t]]);
      }
    }
    const ProbCache cache("seq", {"d0", "d1", "d2"}, n, flat);
    for (std::uint64_t l = 0; l < 20; ++l) {
      const MixtureWeights lambda =
          sample_dirichlet(std::vector<double>(3, 1.0), s + 1000, l);
      const ConditionalTable p = optimal_mixture_model(domains, lambda);
      double sum = 0.0;
      for (std::size_t t = 1; t <= n; ++t) {
        sum += -std::log((*p[seq.tokens[t - 1]])[seq.tokens[t]]);
      }
      const double optimal = sum / static_cast<double>(n);
      worst_loss =
          std::max(worst_loss, std::abs(mde_domain_loss(cache, lambda) - optimal));
    }
  }
  return {worst_gap <= 1e-12 && worst_loss <= 1e-9,
          "max |expected gap|=" + fmt("%.3g", worst_gap) +
              ", max |mde loss - optimal loss|=" + fmt("%.3g", worst_loss)};
}

// ---- 3 ----
Outcome one_hot_reduction(const std::vector<ProbCache>& pipeline_caches) {
  std::vector<ProbCache> caches = pipeline_caches;
  for (std::uint64_t s = 0; s < 20; ++s) {
    caches.push_back(testing::random_cache(s, 1000 + 37 * s, 1 + s % 5));
  }
  std::size_t checked = 0, mismatches = 0;
  for (const auto& c : caches) {
    for (std::size_t i = 0; i < c.num_experts(); ++i) {
      double sum = 0.0;
      for (std::size_t t = 0; t < c.num_tokens(); ++t) {
        sum += -std::log(c.prob(t, i));
      }
      const double expect = sum / static_cast<double>(c.num_tokens());
      const double got =
          mde_domain_loss(c, MixtureWeights::one_hot(c.num_experts(), i));
      ++checked;
      if (got != expect) ++mismatches;
    }
  }
  return {mismatches == 0 && !pipeline_caches.empty(),
          std::to_string(checked) + " (cache, expert) pairs over " +
              std::to_string(caches.size()) + " caches, " +
              std::to_string(mismatches) + " not bitwise equal"};
}

// ---- 4 and 5 ----
struct BenchmarkResult {
  std::vector<double> linear, linear_mde, mde;
  std::vector<ProbCache> caches;  // from the first seed
};

BenchmarkResult run_benchmark(const fs::path& root) {
  BenchmarkResult out;
  const std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  for (std::uint64_t seed : seeds) {
    const RunConfig cfg =
        bundled_config(seed, root / ("seed" + std::to_string(seed)), 1);
    cmd_train_experts(cfg);
    cmd_build_caches(cfg);
    cmd_sample_mixtures(cfg);
    cmd_measure(cfg);
    const MeasurementSet data = read_measurements(cfg);
    const std::vector<ProbCache> caches = read_caches(cfg);
    const std::vector<std::string> all = cfg.validation_ids();
    const std::vector<ModelSpec> models = {
        {"Linear", Family::kLinear, FeatureSpec::lambda_only()},
        {"Linear+MDE", Family::kLinear,
         FeatureSpec::with_mde(FeatureMode::kLambdaMde, all)},
        {"MDE", Family::kMdeDirect, {}}};
    const std::vector<Aggregator> g = {Aggregator::average("avg-ALL", all)};
    const auto reports = run_splits(data, models, g, cfg.plan, caches, cfg.fit, 1);
    out.linear.push_back(*reports[0].target("avg-ALL").spearman.mean);
    out.linear_mde.push_back(*reports[1].target("avg-ALL").spearman.mean);
    out.mde.push_back(*reports[2].target("avg-ALL").spearman.mean);
    if (out.caches.empty()) out.caches = caches;
  }
  return out;
}

// ---- 6 ----
Outcome closed_form_recovery() {
  MeasurementSet bimix;
  for (double w : {0.25, 0.5, 1.0}) {
    LossVector l;
    l.push_back("d", 2.0 / std::pow(w, 0.5));
    bimix.records.push_back(
        {"m" + fmt("%.2f", w), MixtureWeights({w, 1.0 - w}), l});
  }
  FitOptions opt;
  opt.bimix_weight_index = {{"d", 0}};
  const Predictor fitted = fit_bimix(bimix, opt);
  const auto& b = std::get<BimixModel>(fitted.model).targets[0];
  const double a_err = std::abs(b.a - 2.0);
  const double alpha_err = std::abs(b.alpha - 0.5);

  auto truth = [](const MixtureWeights& m) {
    return 1.0 + 0.5 * std::exp(-2.0 * m[0] - 1.0 * m[1]);
  };
  MeasurementSet dml;
  for (std::size_t i = 0; i < 20; ++i) {
    const MixtureWeights m = sample_dirichlet(std::vector<double>(2, 1.0), 61, i);
    LossVector l;
    l.push_back("d", truth(m));
    dml.records.push_back({"m" + std::to_string(i), m, l});
  }
  const Predictor p = fit_dml(dml, FeatureSpec::lambda_only(), {});
  double err = 0.0;
  const std::size_t n_test = 100;
  for (std::size_t i = 0; i < n_test; ++i) {
    const MixtureWeights m = sample_dirichlet(std::vector<double>(2, 1.0), 62, i);
    const double d = p.predict(m, {}).mean.values[0] - truth(m);
    err += d * d / n_test;
  }
  return {a_err <= 1e-9 && alpha_err <= 1e-9 && err <= 1e-6,
          "BiMix |A-2|=" + fmt("%.3g", a_err) + ", |alpha-0.5|=" +
              fmt("%.3g", alpha_err) + "; DML held-out MSE=" + fmt("%.3g", err)};
}

// ---- 7 ----
Outcome optimizer_correctness() {
  const std::vector<double> c = {0.2, 0.3, 0.5};
  const Objective quad = [&](const MixtureWeights& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < 3; ++i) s += (m[i] - c[i]) * (m[i] - c[i]);
    return s;
  };
  OptimizeConfig cfg;
  cfg.seed = 7;
  const OptimizeResult q = optimize_objective(quad, 3, cfg);
  double l1 = 0.0;
  for (std::size_t i = 0; i < 3; ++i) l1 += std::abs(q.best[i] - c[i]);

  const std::vector<double> w = {0.8, 0.35, 0.6, 0.9};
  const Objective lin = [&](const MixtureWeights& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < 4; ++i) s += w[i] * m[i];
    return s;
  };
  const OptimizeResult l = optimize_objective(lin, 4, cfg);
  const bool vertex = l.best.corner_index() == std::size_t{1};
  return {l1 <= 1e-3 && vertex,
          "quadratic L1 error=" + fmt("%.3g", l1) + "; linear optimum " +
              (vertex ? "is" : "is not") + " vertex e_1"};
}

// ---- 8 ----
Outcome smoothing_formula() {
  const MixtureWeights s = smooth_mixture(MixtureWeights({1.0, 0.0, 0.0}));
  const double hi = 0.99 * 1.0 + 0.01 / 3.0;
  const double lo = 0.99 * 0.0 + 0.01 / 3.0;
  const bool exact = s[0] == hi && s[1] == lo && s[2] == lo;
  const bool value = std::abs(s[0] - (0.99 + 1.0 / 300.0)) <= 1e-15 &&
                     std::abs(s[1] - 1.0 / 300.0) <= 1e-15;
  return {exact && value, "(" + fmt("%.15f", s[0]) + ", " + fmt("%.15f", s[1]) +
                              ", " + fmt("%.15f", s[2]) + ")"};
}

// ---- 9 ----
Outcome metric_suite() {
  const double rho = spearman(std::vector<double>{1, 2, 3, 4},
                              std::vector<double>{1, 2, 2, 3});
  StreamRng rng(909, 0);
  int violations = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng.below(30);
    std::vector<double> truth(n), pred(n), neg(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Distinct by construction: a shuffled ramp plus jitter below the gap.
      truth[i] = static_cast<double>(i) + 0.5 * rng.uniform();
      pred[i] = static_cast<double>((i * 7 + t) % n) + 0.5 * rng.uniform();
      neg[i] = -pred[i];
    }
    const double sum =
        pairwise_ranking_accuracy(pred, truth) + pairwise_ranking_accuracy(neg, truth);
    if (std::abs(sum - 1.0) > 1e-12) ++violations;
  }
  return {std::abs(rho - 0.948683) <= 1e-6 &&
              std::abs(rho - 4.5 / std::sqrt(22.5)) <= 1e-9 && violations == 0,
          "rho=" + fmt("%.9f", rho) + "; antisymmetry violations " +
              std::to_string(violations) + "/100"};
}

// ---- 10 ----
std::map<std::string, std::string> artifact_bytes(const fs::path& ws) {
  std::map<std::string, std::string> out;
  out["measurements.csv"] = read_file(ws / "measurements.csv");
  out["mixtures.csv"] = read_file(ws / "mixtures.csv");
  for (const auto& sub : {"reports", "caches"}) {
    for (const auto& e : fs::directory_iterator(ws / sub)) {
      out[std::string(sub) + "/" + e.path().filename().string()] =
          read_file(e.path());
    }
  }
  return out;
}

Outcome determinism(const fs::path& root) {
  std::vector<std::map<std::string, std::string>> runs;
  const std::vector<unsigned> threads = {1, 1, 8};
  for (std::size_t r = 0; r < threads.size(); ++r) {
    const RunConfig cfg =
        bundled_config(1, root / ("run" + std::to_string(r)), threads[r]);
    cmd_train_experts(cfg);
    cmd_build_caches(cfg);
    cmd_sample_mixtures(cfg);
    cmd_measure(cfg);
    cmd_fit_eval(cfg);
    cmd_optimize(cfg);
    runs.push_back(artifact_bytes(cfg.workspace));
  }
  std::vector<std::string> differing;
  for (std::size_t r = 1; r < runs.size(); ++r) {
    for (const auto& [name, bytes] : runs[0]) {
      const auto it = runs[r].find(name);
      if (it == runs[r].end() || it->second != bytes) differing.push_back(name);
    }
    if (runs[r].size() != runs[0].size()) differing.push_back("<file set>");
  }
  return {differing.empty() && runs[0].count("reports/optimize.json") == 1,
          std::to_string(runs[0].size()) +
              " files compared across runs at 1, 1 and 8 threads; " +
              (differing.empty() ? std::string("all identical")
                                 : "first difference: " + differing.front())};
}

template <typename F>
void timed(Criterion& c, F&& f) {
  const auto start = std::chrono::steady_clock::now();
  try {
    c.outcome = f();
  } catch (const std::exception& e) {
    c.outcome = {false, std::string("exception: ") + e.what()};
  }
  c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                            start)
                  .count();
  if (c.time_limit > 0.0 && c.seconds >= c.time_limit) {
    c.outcome.pass = false;
    c.outcome.detail += "; exceeded " + fmt("%.0f", c.time_limit) + " s";
  }
}

int run() {
  testing::TempDir scratch;
  std::vector<Criterion> cs(10);
  const char* names[] = {"optimal-model identity exactness",
                         "MDE ideal-case exactness",
                         "one-hot reduction",
                         "synthetic benchmark: Linear+MDE vs Linear",
                         "synthetic benchmark: MDE-direct ranking",
                         "BiMix and DML recovery",
                         "optimizer correctness",
                         "smoothing formula",
                         "metric suite",
                         "pipeline determinism"};
  const double limits[] = {5, 5, 0, 300, 300, 10, 10, 0, 0, 0};
  for (int i = 0; i < 10; ++i) cs[i] = {i + 1, names[i], limits[i], {}, 0.0};

  timed(cs[0], proposition_exactness);
  timed(cs[1], ideal_case_exactness);

  BenchmarkResult bench;
  timed(cs[3], [&] {
    bench = run_benchmark(scratch.path() / "benchmark");
    int ok = 0;
    std::string per_seed;
    for (std::size_t s = 0; s < bench.linear.size(); ++s) {
      const bool seed_ok = bench.linear_mde[s] >= bench.linear[s] + 0.05 &&
                           bench.linear_mde[s] >= 0.90;
      ok += seed_ok;
      per_seed += (s ? ", " : "") + fmt("%.3f", bench.linear[s]) + "->" +
                  fmt("%.3f", bench.linear_mde[s]);
    }
    return Outcome{ok >= 4, std::to_string(ok) +
                                "/5 seeds pass; mean rho Linear->Linear+MDE per seed: " +
                                per_seed};
  });
  cs[4].seconds = cs[3].seconds;
  if (bench.mde.empty()) {
    cs[4].outcome = {false, "benchmark did not run"};
  } else {
    double mean = 0.0, lo = 1.0;
    std::string per_seed;
    for (std::size_t s = 0; s < bench.mde.size(); ++s) {
      mean += bench.mde[s] / bench.mde.size();
      lo = std::min(lo, bench.mde[s]);
      per_seed += (s ? ", " : "") + fmt("%.3f", bench.mde[s]);
    }
    cs[4].outcome = {lo >= 0.85, "mean rho per seed: " + per_seed +
                                     " (overall " + fmt("%.3f", mean) + ")"};
  }

  timed(cs[2], [&] { return one_hot_reduction(bench.caches); });
  timed(cs[5], closed_form_recovery);
  timed(cs[6], optimizer_correctness);
  timed(cs[7], smoothing_formula);
  timed(cs[8], metric_suite);
  timed(cs[9], [&] { return determinism(scratch.path() / "determinism"); });

  int failed = 0;
  for (const auto& c : cs) {
    std::printf("%s  #%-2d %-44s %s (%.2f s)\n", c.outcome.pass ? "PASS" : "FAIL",
                c.id, c.name.c_str(), c.outcome.detail.c_str(), c.seconds);
    failed += !c.outcome.pass;
  }
  std::printf("%d/10 criteria passed\n", 10 - failed);
  return failed == 0 ? 0 : 1;
}

}  // namespace
}  // namespace mixopt

int main() { return mixopt::run(); }
