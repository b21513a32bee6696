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

#include "mixopt/optimizer.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mixopt/error.h"
#include "mixopt/mixtures.h"
#include "mixopt/parallel.h"

namespace mixopt {
namespace {

constexpr std::size_t kMaxSkipReasons = 8;

struct Evaluation {
  double score = 0.0;
  bool ok = false;
  std::string error;
};

Evaluation evaluate(const Objective& f, const MixtureWeights& lambda) {
  Evaluation e;
  try {
    e.score = f(lambda);
    e.ok = !std::isnan(e.score);
    if (!e.ok) e.error = "objective returned NaN";
  } catch (const std::exception& ex) {
    e.error = ex.what();
  }
  return e;
}

void note_skip(OptimizeResult& r, const std::string& reason) {
  ++r.skipped;
  if (r.skip_reasons.size() < kMaxSkipReasons &&
      std::find(r.skip_reasons.begin(), r.skip_reasons.end(), reason) ==
          r.skip_reasons.end()) {
    r.skip_reasons.push_back(reason);
  }
}

nlohmann::json weights_json(const MixtureWeights& w) {
  return std::vector<double>(w.values().begin(), w.values().end());
}

}  // namespace

void OptimizeConfig::validate() const {
  if (n_random < 1) throw ConfigError("optimizer: n_random must be >= 1");
  if (!(tol > 0.0)) throw ConfigError("optimizer: tol must be positive");
  if (!(step_init > 0.0)) {
    throw ConfigError("optimizer: step_init must be positive");
  }
  if (n_refine_iters < 0) {
    throw ConfigError("optimizer: n_refine_iters must be >= 0");
  }
}

nlohmann::json OptimizeConfig::to_json() const {
  return {{"n_random", n_random}, {"n_refine_iters", n_refine_iters},
          {"step_init", step_init}, {"tol", tol},
          {"seed", seed},         {"smoothing", smoothing}};
}

OptimizeConfig OptimizeConfig::from_json(const nlohmann::json& j) {
  OptimizeConfig c;
  c.n_random = j.value("n_random", c.n_random);
  c.n_refine_iters = j.value("n_refine_iters", c.n_refine_iters);
  c.step_init = j.value("step_init", c.step_init);
  c.tol = j.value("tol", c.tol);
  c.seed = j.value("seed", c.seed);
  c.smoothing = j.value("smoothing", c.smoothing);
  c.validate();
  return c;
}

nlohmann::json OptimizeResult::to_json() const {
  nlohmann::json j = {{"best", weights_json(best)},
                      {"score", score},
                      {"evaluations", evaluations},
                      {"skipped", skipped},
                      {"skip_reasons", skip_reasons},
                      {"stage1_candidates", stage1_candidates},
                      {"stage1_best_index", stage1_best_index},
                      {"refine_iterations", refine_iterations},
                      {"final_step", final_step}};
  j["smoothed"] = smoothed ? weights_json(*smoothed) : nlohmann::json(nullptr);
  return j;
}

Objective make_objective(const Predictor& predictor, const Aggregator& g,
                         std::span<const ProbCache> caches) {
  g.validate();
  for (const auto& d : g.domains()) {
    if (std::find(predictor.targets.begin(), predictor.targets.end(), d) ==
        predictor.targets.end()) {
      throw InvalidArgument("aggregator '" + g.name + "' reads domain '" + d +
                            "' which the predictor does not predict");
    }
  }
  return [&predictor, &g, caches](const MixtureWeights& lambda) {
    return aggregate(predictor.predict(lambda, caches).mean, g);
  };
}

OptimizeResult optimize_objective(const Objective& objective, std::size_t k,
                                  const OptimizeConfig& cfg) {
  cfg.validate();
  if (k == 0) throw InvalidArgument("optimizer: k must be positive");

  std::vector<MixtureWeights> candidates;
  candidates.reserve(cfg.n_random + k + 1);
  const std::vector<double> ones(k, 1.0);
  for (std::size_t i = 0; i < cfg.n_random; ++i) {
    candidates.push_back(sample_dirichlet(ones, cfg.seed, i));
  }
  for (std::size_t i = 0; i < k; ++i) {
    candidates.push_back(MixtureWeights::one_hot(k, i));
  }
  candidates.push_back(MixtureWeights::uniform(k));

  std::vector<Evaluation> evals(candidates.size());
  parallel_for(candidates.size(), cfg.threads, [&](std::size_t i) {
    evals[i] = evaluate(objective, candidates[i]);
  });

  OptimizeResult r;
  r.stage1_candidates = candidates.size();
  r.evaluations = candidates.size();
  std::optional<std::size_t> best_index;
  for (std::size_t i = 0; i < evals.size(); ++i) {
    if (!evals[i].ok) {
      note_skip(r, evals[i].error);
      continue;
    }
    if (!best_index || evals[i].score < evals[*best_index].score) best_index = i;
  }
  if (!best_index) {
    throw NumericError("optimizer: every stage-1 candidate failed (" +
                       (r.skip_reasons.empty() ? std::string("?")
                                               : r.skip_reasons.front()) +
                       ")");
  }
  r.stage1_best_index = *best_index;
  std::vector<double> lambda(candidates[*best_index].values().begin(),
                             candidates[*best_index].values().end());
  double score = evals[*best_index].score;

  double step = cfg.step_init;
  int it = 0;
  for (; it < cfg.n_refine_iters && step >= cfg.tol && k > 1; ++it) {
    std::optional<std::vector<double>> best_move;
    double best_score = score;
    for (std::size_t a = 0; a < k; ++a) {
      if (!(lambda[a] > 0.0)) continue;
      for (std::size_t b = 0; b < k; ++b) {
        if (a == b) continue;
        std::vector<double> trial = lambda;
        const double m = std::min(step, lambda[a]);
        trial[a] = m == lambda[a] ? 0.0 : lambda[a] - m;
        trial[b] += m;
        const MixtureWeights w = MixtureWeights::normalized(trial);
        ++r.evaluations;
        const Evaluation e = evaluate(objective, w);
        if (!e.ok) {
          note_skip(r, e.error);
          continue;
        }
        if (e.score < best_score) {
          best_score = e.score;
          best_move.emplace(w.values().begin(), w.values().end());
        }
      }
    }
    if (best_move) {
      lambda = std::move(*best_move);
      score = best_score;
    } else {
      step *= 0.5;
    }
  }
  r.refine_iterations = it;
  r.final_step = step;
  r.best = MixtureWeights(std::move(lambda));
  r.score = score;
  if (cfg.smoothing) r.smoothed = smooth_mixture(r.best);
  return r;
}

OptimizeResult optimize(const Predictor& predictor, const Aggregator& g,
                        std::span<const ProbCache> caches,
                        const OptimizeConfig& cfg) {
  std::size_t k = predictor.num_components;
  if (k == 0) {
    if (caches.empty()) {
      throw InvalidArgument("optimizer: cannot infer the mixture dimension");
    }
    k = caches.front().num_experts();
  }
  return optimize_objective(make_objective(predictor, g, caches), k, cfg);
}

}  // namespace mixopt
