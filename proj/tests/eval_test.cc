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
#include <string>
#include <vector>

#include "doctest.h"
#include "mixopt/error.h"
#include "mixopt/mixtures.h"
#include "mixopt/rng.h"
#include "test_util.h"

namespace mixopt {
namespace {

// Direct Pearson correlation, independent of the library.
double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i] / a.size();
    mb += b[i] / b.size();
  }
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

std::vector<double> random_vector(StreamRng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform();
  return v;
}

struct Bench {
  std::vector<ProbCache> caches;
  MeasurementSet data;
  std::vector<Aggregator> aggregators;
};

// Losses are the MDE losses of random caches plus a smooth bias, so MDE
// features carry most of the signal.
Bench make_bench(std::size_t n_mixtures) {
  Bench b;
  b.caches = {testing::random_cache(1, 200, 3, "a"),
              testing::random_cache(2, 200, 3, "b")};
  std::vector<MixtureWeights> mixtures;
  for (std::size_t i = 0; i < n_mixtures; ++i) {
    mixtures.push_back(sample_dirichlet(std::vector<double>(3, 1.0), 9, i));
  }
  const auto named = name_mixtures(include_expert_corners(mixtures, 3));
  for (const auto& m : named) {
    LossVector l = mde_losses(b.caches, m.weights);
    for (double& v : l.values) v += 0.05 * m.weights[0] * m.weights[1];
    b.data.records.push_back({m.id, m.weights, l});
  }
  b.aggregators = {Aggregator::average("avg-ALL", {"a", "b"})};
  return b;
}

TEST_CASE("mse") {
  const std::vector<double> a = {1.0, 3.0};
  CHECK(mse(a, a) == 0.0);
  CHECK(mse(std::vector<double>{0.0, 0.0}, a) == 5.0);
  CHECK(mse(std::vector<double>{3.0, 1.0, 2.0}, std::vector<double>{1.0, 0.0, 2.0}) ==
        mse(std::vector<double>{2.0, 3.0, 1.0}, std::vector<double>{2.0, 1.0, 0.0}));
  CHECK_THROWS_AS(mse(a, std::vector<double>{1.0}), InvalidArgument);
}

TEST_CASE("average ranks") {
  CHECK(average_ranks(std::vector<double>{1, 2, 2, 3}) ==
        std::vector<double>{1, 2.5, 2.5, 4});
  CHECK(average_ranks(std::vector<double>{5, 1, 5, 5}) ==
        std::vector<double>{3, 1, 3, 3});
}

TEST_CASE("spearman") {
  const std::vector<double> up = {1, 2, 3, 4, 5};
  const std::vector<double> down = {9, 7, 5, 3, 1};
  CHECK(spearman(up, up) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(spearman(down, up) == doctest::Approx(-1.0).epsilon(1e-15));

  const std::vector<double> truth = {1, 2, 2, 3};
  const std::vector<double> pred = {1, 2, 3, 4};
  const double rho = spearman(pred, truth);
  CHECK(std::abs(rho - 0.948683) <= 1e-6);
  CHECK(std::abs(rho - 4.5 / std::sqrt(22.5)) <= 1e-12);
  CHECK(std::abs(rho - pearson({1, 2.5, 2.5, 4}, {1, 2, 3, 4})) <= 1e-12);

  std::vector<double> warped(pred);
  for (double& v : warped) v = std::exp(3.0 * v) - 7.0;
  CHECK(spearman(warped, truth) == doctest::Approx(rho).epsilon(1e-15));

  try {
    spearman(std::vector<double>{2, 2, 2}, std::vector<double>{1, 2, 3});
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()) == "rank correlation undefined");
  }
  CHECK_THROWS_AS(spearman(up, std::vector<double>{4, 4, 4, 4, 4}),
                  NumericError);
}

TEST_CASE("spearman agrees with Pearson of ranks on random data") {
  StreamRng rng(3, 0);
  for (int t = 0; t < 50; ++t) {
    auto a = random_vector(rng, 12);
    auto b = random_vector(rng, 12);
    a[3] = a[5];  // a tie
    CHECK(spearman(a, b) ==
          doctest::Approx(pearson(average_ranks(a), average_ranks(b)))
              .epsilon(1e-12));
  }
}

TEST_CASE("pairwise ranking accuracy") {
  const std::vector<double> truth = {1, 2, 3};
  CHECK(pairwise_ranking_accuracy(truth, truth) == 1.0);
  CHECK(pairwise_ranking_accuracy(std::vector<double>{1, 3, 2}, truth) ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(pairwise_ranking_accuracy(std::vector<double>{3, 2, 1}, truth) == 0.0);
  CHECK(pairwise_ranking_accuracy(std::vector<double>{1, 1, 1}, truth) == 0.5);
  // Pairs with tied truth are ignored.
  CHECK(pairwise_ranking_accuracy(std::vector<double>{2, 1, 3},
                                  std::vector<double>{1, 1, 2}) == 1.0);
  CHECK_THROWS_AS(pairwise_ranking_accuracy(std::vector<double>{1, 2},
                                            std::vector<double>{5, 5}),
                  NumericError);
}

TEST_CASE("pairwise accuracy of pred and -pred sums to one") {
  StreamRng rng(4, 0);
  for (int t = 0; t < 100; ++t) {
    const auto truth = random_vector(rng, 2 + t % 15);
    auto pred = random_vector(rng, truth.size());
    const double a = pairwise_ranking_accuracy(pred, truth);
    for (double& v : pred) v = -v;
    CHECK(a + pairwise_ranking_accuracy(pred, truth) ==
          doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("joint pairwise accuracy") {
  const std::vector<std::vector<double>> truth = {{1, 2, 3}, {1, 3, 2}};
  CHECK(joint_pairwise_accuracy(truth, truth) == 1.0);
  // The second aggregate misorders (1, 2); the first misorders none.
  const std::vector<std::vector<double>> pred = {{1, 2, 3}, {1, 2, 3}};
  CHECK(joint_pairwise_accuracy(pred, truth) ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  // Prediction ties count as wrong here.
  const std::vector<std::vector<double>> flat = {{1, 1, 1}, {1, 1, 1}};
  CHECK(joint_pairwise_accuracy(flat, truth) == 0.0);
}

TEST_CASE("splits keep corners in training and are deterministic") {
  const Bench b = make_bench(30);
  SplitPlan plan;
  plan.train_size = 12;
  plan.test_size = 10;
  plan.seed = 5;
  const Split s = make_split(b.data, plan, 0);
  CHECK(s.train.size() == 12);
  CHECK(s.test.size() == 10);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(std::find(s.train.begin(), s.train.end(), c) != s.train.end());
  }
  for (std::size_t i : s.test) {
    CHECK(std::find(s.train.begin(), s.train.end(), i) == s.train.end());
  }
  const Split again = make_split(b.data, plan, 0);
  CHECK(s.train == again.train);
  CHECK(s.test == again.test);
  CHECK(make_split(b.data, plan, 1).train != s.train);
  SplitPlan bigger = plan;
  bigger.train_size = 15;
  CHECK(make_split(b.data, bigger, 0).test == s.test);

  MeasurementSet shuffled = b.data;
  std::reverse(shuffled.records.begin(), shuffled.records.end());
  const Split r = make_split(shuffled, plan, 0);
  auto ids = [](const MeasurementSet& d, const std::vector<std::size_t>& idx) {
    std::vector<std::string> out;
    for (std::size_t i : idx) out.push_back(d.records[i].mixture_id);
    std::sort(out.begin(), out.end());
    return out;
  };
  CHECK(ids(b.data, s.train) == ids(shuffled, r.train));
  CHECK(ids(b.data, s.test) == ids(shuffled, r.test));

  plan.train_size = 2;
  CHECK_THROWS_AS(make_split(b.data, plan, 0), ConfigError);
  plan.train_size = 33;
  plan.test_size.reset();
  CHECK_THROWS_AS(make_split(b.data, plan, 0), ConfigError);
}

TEST_CASE("confidence intervals") {
  const MetricSummary one = MetricSummary::from_values({0.7});
  CHECK(one.ci95 == 0.0);
  CHECK(*one.mean == 0.7);
  const MetricSummary many = MetricSummary::from_values({1.0, 2.0, 3.0, 4.0});
  // sample sd = sqrt(5/3)
  CHECK(many.ci95 == doctest::Approx(1.96 * std::sqrt(5.0 / 3.0) / 2.0));
  const MetricSummary none = MetricSummary::from_values({std::nullopt});
  CHECK(!none.mean);
}

TEST_CASE("run_splits") {
  const Bench b = make_bench(37);
  SplitPlan plan;
  plan.train_size = 25;
  plan.test_size = 15;
  plan.seed = 2;
  const std::vector<ModelSpec> models = {
      {"Mean", Family::kEmpiricalMean, {}},
      {"Linear", Family::kLinear, {}},
      {"Linear+MDE", Family::kLinear,
       FeatureSpec::with_mde(FeatureMode::kLambdaMde, {"a", "b"})},
      {"MDE", Family::kMdeDirect, {}}};
  const auto reports =
      run_splits(b.data, models, b.aggregators, plan, b.caches);
  REQUIRE(reports.size() == 4);

  const auto& mean = reports[0].target("avg-ALL");
  CHECK(!mean.spearman.mean);
  CHECK(mean.mse.mean);

  for (const auto& r : reports) {
    CHECK(r.train_size == 25);
    CHECK(r.test_size == 15);
    for (const auto& t : r.targets) {
      std::vector<double> defined;
      for (const auto& v : t.mse.per_repeat) {
        if (v) defined.push_back(*v);
      }
      if (!t.mse.mean) continue;
      CHECK(*t.mse.mean >= *std::min_element(defined.begin(), defined.end()) - 1e-15);
      CHECK(*t.mse.mean <= *std::max_element(defined.begin(), defined.end()) + 1e-15);
      if (t.spearman.mean) {
        CHECK(std::abs(*t.spearman.mean) <= 1.0);
      }
      if (t.pairwise.mean) {
        CHECK(*t.pairwise.mean >= 0.0);
        CHECK(*t.pairwise.mean <= 1.0);
      }
    }
  }
  CHECK(*reports[2].target("avg-ALL").spearman.mean > 0.9);

  // Deterministic, thread-count invariant and independent of record order.
  const auto threaded =
      run_splits(b.data, models, b.aggregators, plan, b.caches, {}, 4);
  MeasurementSet reversed = b.data;
  std::reverse(reversed.records.begin(), reversed.records.end());
  const auto shuffled =
      run_splits(reversed, models, b.aggregators, plan, b.caches);
  for (std::size_t m = 0; m < reports.size(); ++m) {
    CHECK(reports[m].to_json() == threaded[m].to_json());
    CHECK(reports[m].to_json() == shuffled[m].to_json());
  }

  const std::string table = render_table(reports);
  CHECK(table.find("N/A") != std::string::npos);
  CHECK(table.find("Linear+MDE") != std::string::npos);
  CHECK(reports[0].to_json().at("ci_method").is_string());
}

TEST_CASE("a single repeat has a zero-width interval") {
  const Bench b = make_bench(20);
  SplitPlan plan;
  plan.n_repeats = 1;
  plan.train_size = 10;
  const std::vector<ModelSpec> models = {{"Linear", Family::kLinear, {}}};
  const auto r = run_splits(b.data, models, b.aggregators, plan, b.caches);
  CHECK(r[0].target("avg-ALL").spearman.ci95 == 0.0);
  CHECK(r[0].test_size == 13);
}

TEST_CASE("learning curves") {
  const Bench b = make_bench(37);
  SplitPlan plan;
  plan.train_size = 25;
  plan.test_size = 15;
  plan.seed = 8;
  const ModelSpec linear{"Linear+MDE", Family::kLinear,
                         FeatureSpec::with_mde(FeatureMode::kLambdaMde, {"a", "b"})};
  const std::vector<std::size_t> sizes = {5, 10, 20};
  const auto curve =
      learning_curve(b.data, linear, b.aggregators, sizes, plan, b.caches);
  REQUIRE(curve.size() == 3);
  CHECK(curve[1].train_size == 10);

  SplitPlan ten = plan;
  ten.train_size = 10;
  const std::vector<ModelSpec> one = {linear};
  const auto direct = run_splits(b.data, one, b.aggregators, ten, b.caches);
  CHECK(curve[1].to_json() == direct[0].to_json());

  const ModelSpec mde{"MDE", Family::kMdeDirect, {}};
  const auto flat =
      learning_curve(b.data, mde, b.aggregators, sizes, plan, b.caches);
  // The held-out sets do not change with the training size, and neither
  // does the predictor.
  for (const auto& r : flat) {
    CHECK(r.target("avg-ALL").spearman.per_repeat ==
          flat[0].target("avg-ALL").spearman.per_repeat);
  }
  const std::string text = render_learning_curve(curve);
  CHECK(text.find("avg-ALL") != std::string::npos);
}

}  // namespace
}  // namespace mixopt
