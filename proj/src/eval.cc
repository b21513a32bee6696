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

#include "mixopt/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "mixopt/error.h"
#include "mixopt/parallel.h"
#include "mixopt/rng.h"

namespace mixopt {
namespace {

void check_lengths(std::span<const double> a, std::span<const double> b,
                   std::size_t min_len, const char* what) {
  if (a.size() != b.size()) {
    throw InvalidArgument(std::string(what) + ": length mismatch");
  }
  if (a.size() < min_len) {
    throw InvalidArgument(std::string(what) + ": need at least " +
                          std::to_string(min_len) + " values");
  }
}

int sign(double x) { return (x > 0.0) - (x < 0.0); }

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

double mse(std::span<const double> pred, std::span<const double> truth) {
  check_lengths(pred, truth, 1, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    s += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  }
  return s / static_cast<double>(pred.size());
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> pred, std::span<const double> truth) {
  check_lengths(pred, truth, 2, "spearman");
  const std::vector<double> a = average_ranks(pred);
  const std::vector<double> b = average_ranks(truth);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) {
    throw NumericError("rank correlation undefined");
  }
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double pairwise_ranking_accuracy(std::span<const double> pred,
                                 std::span<const double> truth) {
  check_lengths(pred, truth, 2, "pairwise accuracy");
  double correct = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < pred.size(); ++a) {
    for (std::size_t b = a + 1; b < pred.size(); ++b) {
      const int t = sign(truth[a] - truth[b]);
      if (t == 0) continue;
      ++pairs;
      const int p = sign(pred[a] - pred[b]);
      if (p == t) {
        correct += 1.0;
      } else if (p == 0) {
        correct += 0.5;
      }
    }
  }
  if (pairs == 0) throw NumericError("pairwise accuracy: no comparable pairs");
  return correct / static_cast<double>(pairs);
}

double joint_pairwise_accuracy(const std::vector<std::vector<double>>& pred,
                               const std::vector<std::vector<double>>& truth) {
  if (pred.empty() || pred.size() != truth.size()) {
    throw InvalidArgument("joint pairwise accuracy: aggregate count mismatch");
  }
  const std::size_t n = truth.front().size();
  for (std::size_t g = 0; g < pred.size(); ++g) {
    check_lengths(pred[g], truth[g], 2, "joint pairwise accuracy");
    if (truth[g].size() != n) {
      throw InvalidArgument("joint pairwise accuracy: length mismatch");
    }
  }
  std::size_t pairs = 0, correct = 0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      bool comparable = true, ok = true;
      for (std::size_t g = 0; g < pred.size() && comparable; ++g) {
        const int t = sign(truth[g][a] - truth[g][b]);
        if (t == 0) comparable = false;
        if (sign(pred[g][a] - pred[g][b]) != t) ok = false;
      }
      if (!comparable) continue;
      ++pairs;
      if (ok) ++correct;
    }
  }
  if (pairs == 0) {
    throw NumericError("joint pairwise accuracy: no comparable pairs");
  }
  return static_cast<double>(correct) / static_cast<double>(pairs);
}

void SplitPlan::validate(std::size_t total, std::size_t corners) const {
  if (n_repeats < 1) throw ConfigError("split plan: n_repeats must be >= 1");
  if (train_size >= total) {
    throw ConfigError("split plan: train_size " + std::to_string(train_size) +
                      " must be below the " + std::to_string(total) +
                      " available records");
  }
  if (train_size < corners) {
    throw ConfigError("split plan: train_size " + std::to_string(train_size) +
                      " cannot hold the " + std::to_string(corners) +
                      " expert mixtures");
  }
  if (test_size) {
    if (*test_size < 1 || *test_size > total - train_size) {
      throw ConfigError("split plan: test_size out of range");
    }
  }
}

Split make_split(const MeasurementSet& data, const SplitPlan& plan,
                 std::size_t repeat) {
  std::vector<std::size_t> corners, rest;
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    (data.records[i].weights.corner_index() ? corners : rest).push_back(i);
  }
  plan.validate(data.records.size(), corners.size());
  const auto by_id = [&](std::size_t a, std::size_t b) {
    return data.records[a].mixture_id < data.records[b].mixture_id;
  };
  std::sort(corners.begin(), corners.end(), by_id);
  std::sort(rest.begin(), rest.end(), by_id);
  StreamRng rng(plan.seed, repeat);
  for (std::size_t i = rest.size(); i > 1; --i) {
    std::swap(rest[i - 1], rest[rng.below(i)]);
  }
  Split s;
  s.train = corners;
  const std::size_t n_train_rest = plan.train_size - corners.size();
  s.train.insert(s.train.end(), rest.begin(), rest.begin() + n_train_rest);
  // Held-out records come from the end of the shuffle, so with a fixed
  // test_size every training size of a repeat is scored on the same set.
  const std::size_t n_test = plan.test_size.value_or(rest.size() - n_train_rest);
  s.test.assign(rest.end() - static_cast<std::ptrdiff_t>(n_test), rest.end());
  return s;
}

ModelSpec ModelSpec::from_json(const nlohmann::json& j) {
  ModelSpec m;
  m.family = parse_family(j.at("family").get<std::string>());
  if (j.contains("features")) m.features = FeatureSpec::from_json(j.at("features"));
  m.name = j.value("name", std::string(family_name(m.family)) + "/" +
                               m.features.mode_name());
  return m;
}

nlohmann::json ModelSpec::to_json() const {
  return {{"name", name},
          {"family", std::string(family_name(family))},
          {"features", features.to_json()}};
}

MetricSummary MetricSummary::from_values(
    std::vector<std::optional<double>> values) {
  MetricSummary s;
  s.per_repeat = std::move(values);
  std::vector<double> defined;
  for (const auto& v : s.per_repeat) {
    if (v) defined.push_back(*v);
  }
  if (defined.empty()) return s;
  const double n = static_cast<double>(defined.size());
  const double m = std::accumulate(defined.begin(), defined.end(), 0.0) / n;
  s.mean = std::clamp(m, *std::min_element(defined.begin(), defined.end()),
                      *std::max_element(defined.begin(), defined.end()));
  if (defined.size() > 1) {
    double ss = 0.0;
    for (double v : defined) ss += (v - m) * (v - m);
    s.ci95 = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return s;
}

nlohmann::json MetricSummary::to_json() const {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& v : per_repeat) {
    per.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
  }
  return {{"per_repeat", per},
          {"mean", mean ? nlohmann::json(*mean) : nlohmann::json(nullptr)},
          {"ci95", ci95}};
}

const TargetMetrics& EvalReport::target(const std::string& name) const {
  for (const auto& t : targets) {
    if (t.target == name) return t;
  }
  throw InvalidArgument("report has no target '" + name + "'");
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json ts = nlohmann::json::array();
  for (const auto& t : targets) {
    ts.push_back({{"target", t.target},
                  {"aggregate", t.is_aggregate},
                  {"mse", t.mse.to_json()},
                  {"spearman", t.spearman.to_json()},
                  {"pairwise_accuracy", t.pairwise.to_json()}});
  }
  nlohmann::json j = {{"model", model},
                      {"family", std::string(family_name(family))},
                      {"feature_mode", feature_mode},
                      {"train_size", train_size},
                      {"test_size", test_size},
                      {"n_repeats", n_repeats},
                      {"ci_method", "normal approximation 1.96*sd/sqrt(n)"},
                      {"targets", ts},
                      {"warnings", warnings}};
  j["joint_pairwise_accuracy"] =
      joint_pairwise ? joint_pairwise->to_json() : nlohmann::json(nullptr);
  return j;
}

namespace {

// Metrics of one model on one split, one entry per report target.
struct RepeatResult {
  std::vector<std::optional<double>> mse, rho, pairwise;
  std::optional<double> joint;
  std::vector<std::string> warnings;
};

template <typename F>
std::optional<double> defined_or_null(F&& f) {
  try {
    return f();
  } catch (const NumericError&) {
    return std::nullopt;
  }
}

RepeatResult evaluate_split(const MeasurementSet& data, const Split& split,
                            const ModelSpec& model,
                            std::span<const Aggregator> aggregators,
                            std::span<const ProbCache> caches,
                            const FitOptions& options,
                            std::size_t num_targets) {
  RepeatResult out;
  out.mse.assign(num_targets, std::nullopt);
  out.rho.assign(num_targets, std::nullopt);
  out.pairwise.assign(num_targets, std::nullopt);

  MeasurementSet train = data;
  train.records.clear();
  for (std::size_t i : split.train) train.records.push_back(data.records[i]);

  std::vector<LossVector> preds;
  try {
    const Predictor p =
        fit_predictor(model.family, train, model.features, caches, options);
    out.warnings = p.warnings;
    for (std::size_t i : split.test) {
      preds.push_back(p.predict(data.records[i].weights, caches).mean);
    }
  } catch (const InvalidArgument& e) {
    out.warnings.push_back(model.name + ": " + e.what());
    return out;
  } catch (const NumericError& e) {
    out.warnings.push_back(model.name + ": " + e.what());
    return out;
  }

  const auto score = [&](std::size_t slot, const std::vector<double>& pred,
                         const std::vector<double>& truth) {
    out.mse[slot] = mse(pred, truth);
    out.rho[slot] = defined_or_null([&] { return spearman(pred, truth); });
    out.pairwise[slot] =
        defined_or_null([&] { return pairwise_ranking_accuracy(pred, truth); });
  };

  std::vector<std::vector<double>> agg_pred, agg_truth;
  bool all_aggregates = true;
  for (std::size_t g = 0; g < aggregators.size(); ++g) {
    std::vector<double> pred, truth;
    try {
      for (std::size_t t = 0; t < split.test.size(); ++t) {
        pred.push_back(aggregate(preds[t], aggregators[g]));
        truth.push_back(
            aggregate(data.records[split.test[t]].losses, aggregators[g]));
      }
    } catch (const InvalidArgument&) {
      all_aggregates = false;
      continue;
    }
    score(g, pred, truth);
    agg_pred.push_back(std::move(pred));
    agg_truth.push_back(std::move(truth));
  }
  if (aggregators.size() >= 2 && all_aggregates) {
    out.joint = defined_or_null(
        [&] { return joint_pairwise_accuracy(agg_pred, agg_truth); });
  }

  const std::vector<std::string> domains = data.domains();
  for (std::size_t d = 0; d < domains.size(); ++d) {
    std::vector<double> pred, truth;
    bool ok = true;
    for (std::size_t t = 0; t < split.test.size() && ok; ++t) {
      const auto v = preds[t].find(domains[d]);
      if (!v) {
        ok = false;
        break;
      }
      pred.push_back(*v);
      truth.push_back(data.records[split.test[t]].losses.values[d]);
    }
    if (ok) score(aggregators.size() + d, pred, truth);
  }
  return out;
}

}  // namespace

std::vector<EvalReport> run_splits(const MeasurementSet& data,
                                   std::span<const ModelSpec> models,
                                   std::span<const Aggregator> aggregators,
                                   const SplitPlan& plan,
                                   std::span<const ProbCache> caches,
                                   const FitOptions& options,
                                   unsigned threads) {
  if (data.records.empty()) throw InvalidArgument("run_splits: no records");
  data.validate();
  for (const auto& g : aggregators) g.validate();
  const std::vector<std::string> domains = data.domains();
  const std::size_t num_targets = aggregators.size() + domains.size();

  std::vector<Split> splits;
  for (std::size_t r = 0; r < plan.n_repeats; ++r) {
    splits.push_back(make_split(data, plan, r));
  }
  // results[repeat * models + model]
  std::vector<RepeatResult> results(plan.n_repeats * models.size());
  parallel_for(results.size(), threads, [&](std::size_t i) {
    const std::size_t r = i / models.size();
    const std::size_t m = i % models.size();
    FitOptions o = options;
    o.seed = derive_seed(options.seed, r);
    results[i] = evaluate_split(data, splits[r], models[m], aggregators, caches,
                                o, num_targets);
  });

  std::vector<EvalReport> reports;
  for (std::size_t m = 0; m < models.size(); ++m) {
    EvalReport rep;
    rep.model = models[m].name;
    rep.family = models[m].family;
    rep.feature_mode = models[m].features.mode_name();
    rep.train_size = plan.train_size;
    rep.test_size = splits.front().test.size();
    rep.n_repeats = plan.n_repeats;
    for (std::size_t t = 0; t < num_targets; ++t) {
      TargetMetrics tm;
      tm.is_aggregate = t < aggregators.size();
      tm.target = tm.is_aggregate ? aggregators[t].name
                                  : domains[t - aggregators.size()];
      std::vector<std::optional<double>> e, rho, pw;
      for (std::size_t r = 0; r < plan.n_repeats; ++r) {
        const RepeatResult& res = results[r * models.size() + m];
        e.push_back(res.mse[t]);
        rho.push_back(res.rho[t]);
        pw.push_back(res.pairwise[t]);
      }
      tm.mse = MetricSummary::from_values(std::move(e));
      tm.spearman = MetricSummary::from_values(std::move(rho));
      tm.pairwise = MetricSummary::from_values(std::move(pw));
      rep.targets.push_back(std::move(tm));
    }
    if (aggregators.size() >= 2) {
      std::vector<std::optional<double>> joint;
      for (std::size_t r = 0; r < plan.n_repeats; ++r) {
        joint.push_back(results[r * models.size() + m].joint);
      }
      rep.joint_pairwise = MetricSummary::from_values(std::move(joint));
    }
    for (std::size_t r = 0; r < plan.n_repeats; ++r) {
      for (const auto& w : results[r * models.size() + m].warnings) {
        const std::string tagged = "repeat " + std::to_string(r) + ": " + w;
        rep.warnings.push_back(tagged);
      }
    }
    reports.push_back(std::move(rep));
  }
  return reports;
}

std::vector<EvalReport> learning_curve(const MeasurementSet& data,
                                       const ModelSpec& model,
                                       std::span<const Aggregator> aggregators,
                                       std::span<const std::size_t> sizes,
                                       const SplitPlan& plan,
                                       std::span<const ProbCache> caches,
                                       const FitOptions& options,
                                       unsigned threads) {
  std::vector<EvalReport> out;
  for (std::size_t size : sizes) {
    SplitPlan p = plan;
    p.train_size = size;
    auto reps = run_splits(data, std::span<const ModelSpec>(&model, 1),
                           aggregators, p, caches, options, threads);
    out.push_back(std::move(reps.front()));
  }
  return out;
}

namespace {

std::string cell(const MetricSummary& s, const char* spec) {
  if (!s.mean) return "N/A";
  return fmt(spec, *s.mean) + " +- " + fmt(spec, s.ci95);
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace

std::string render_table(std::span<const EvalReport> reports) {
  if (reports.empty()) return "";
  std::vector<std::string> header = {"model"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& t : reports.front().targets) {
    if (!t.is_aggregate) continue;
    header.push_back("MSE " + t.target);
    header.push_back("rho " + t.target);
  }
  for (const auto& rep : reports) {
    std::vector<std::string> row = {rep.model};
    for (const auto& t : rep.targets) {
      if (!t.is_aggregate) continue;
      row.push_back(cell(t.mse, "%.3g"));
      row.push_back(cell(t.spearman, "%.5f"));
    }
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& row : rows) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  const auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      out += c + 1 < cells.size() ? pad(cells[c], width[c] + 2) : cells[c];
    }
    out += '\n';
  };
  line(header);
  for (const auto& row : rows) line(row);
  return out;
}

std::string render_learning_curve(std::span<const EvalReport> reports) {
  if (reports.empty()) return "";
  std::string out = "train_size";
  for (const auto& t : reports.front().targets) {
    if (t.is_aggregate) out += "  rho " + t.target;
  }
  out += '\n';
  for (const auto& rep : reports) {
    out += pad(std::to_string(rep.train_size), 10);
    for (const auto& t : rep.targets) {
      if (!t.is_aggregate) continue;
      out += "  " + (t.spearman.mean ? fmt("%.5f", *t.spearman.mean)
                                     : std::string("N/A"));
    }
    out += '\n';
  }
  return out;
}

}  // namespace mixopt
