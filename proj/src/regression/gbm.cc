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

#include <algorithm>
#include <limits>
#include <numeric>

#include "mixopt/error.h"
#include "mixopt/regression.h"
#include "regression/internal.h"

namespace mixopt {

const std::vector<GbmConfig>& default_gbm_grid() {
  static const std::vector<GbmConfig> grid = [] {
    std::vector<GbmConfig> g;
    for (int n : {10, 50, 100}) {
      for (double lr : {0.01, 0.1}) {
        for (int depth : {2, 3, 4}) g.push_back({n, lr, depth});
      }
    }
    return g;
  }();
  return grid;
}

double RegressionTree::predict(std::span<const double> x) const {
  int i = 0;
  for (;;) {
    const TreeNode& node = nodes[static_cast<std::size_t>(i)];
    if (node.feature < 0) return node.value;
    i = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left
                                                                    : node.right;
  }
}

double GbmTargetModel::predict(std::span<const double> x) const {
  double f = init;
  for (const auto& tree : trees) f += config.learning_rate * tree.predict(x);
  return f;
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const FeatureRows& x, std::span<const double> y, int max_depth)
      : x_(x), y_(y), max_depth_(max_depth) {}

  RegressionTree build() {
    std::vector<std::size_t> rows(x_.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    grow(rows, 0);
    return std::move(tree_);
  }

 private:
  int grow(const std::vector<std::size_t>& rows, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    double sum = 0.0;
    for (std::size_t r : rows) sum += y_[r];
    const double n = static_cast<double>(rows.size());
    tree_.nodes[id].value = sum / n;
    double sse = 0.0;
    for (std::size_t r : rows) {
      const double d = y_[r] - tree_.nodes[id].value;
      sse += d * d;
    }
    if (depth >= max_depth_ || rows.size() < 2 || !(sse > 0.0)) return id;

    int best_feature = -1;
    double best_threshold = 0.0;
    // Gains within `tie` of the best count as ties and keep the earlier
    // split, so rounding noise cannot pick between equivalent splits.
    const double tie = 1e-12 * sse;
    double best_gain = tie;
    const std::size_t dim = x_.front().size();
    std::vector<std::size_t> sorted = rows;
    for (std::size_t f = 0; f < dim; ++f) {
      std::stable_sort(sorted.begin(), sorted.end(),
                       [&](std::size_t a, std::size_t b) {
                         return x_[a][f] < x_[b][f];
                       });
      double left_sum = 0.0;
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        left_sum += y_[sorted[i]];
        const double lo = x_[sorted[i]][f];
        const double hi = x_[sorted[i + 1]][f];
        if (!(lo < hi)) continue;
        const double nl = static_cast<double>(i + 1);
        const double nr = n - nl;
        const double right_sum = sum - left_sum;
        const double gain = left_sum * left_sum / nl +
                            right_sum * right_sum / nr - sum * sum / n;
        if (gain > best_gain + tie) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          best_threshold = lo + 0.5 * (hi - lo);
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) {
      (x_[r][static_cast<std::size_t>(best_feature)] <= best_threshold ? left
                                                                       : right)
          .push_back(r);
    }
    const int l = grow(left, depth + 1);
    const int rgt = grow(right, depth + 1);
    TreeNode& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = rgt;
    return id;
  }

  const FeatureRows& x_;
  std::span<const double> y_;
  int max_depth_;
  RegressionTree tree_;
};

}  // namespace

RegressionTree fit_regression_tree(const FeatureRows& x,
                                   std::span<const double> y, int max_depth) {
  if (x.empty() || x.size() != y.size()) {
    throw InvalidArgument("tree: need matching, non-empty rows and targets");
  }
  if (max_depth < 0) throw InvalidArgument("tree: max_depth must be >= 0");
  return TreeBuilder(x, y, max_depth).build();
}

GbmTargetModel fit_boosting(const FeatureRows& x, std::span<const double> y,
                            const GbmConfig& config) {
  if (config.n_estimators < 0 || !(config.learning_rate > 0.0)) {
    throw InvalidArgument("boosting: bad configuration");
  }
  GbmTargetModel model;
  model.config = config;
  model.init = regression_internal::mean(y);
  std::vector<double> f(y.size(), model.init);
  std::vector<double> residual(y.size());
  for (int m = 0; m < config.n_estimators; ++m) {
    for (std::size_t i = 0; i < y.size(); ++i) residual[i] = y[i] - f[i];
    RegressionTree tree = fit_regression_tree(x, residual, config.max_depth);
    for (std::size_t i = 0; i < y.size(); ++i) {
      f[i] += config.learning_rate * tree.predict(x[i]);
    }
    model.trees.push_back(std::move(tree));
  }
  return model;
}

Predictor fit_gbm(const MeasurementSet& data, const FeatureSpec& spec,
                  std::span<const ProbCache> caches,
                  const FitOptions& options) {
  const auto m = regression_internal::training_matrix(data, spec, caches);
  const std::vector<GbmConfig>& grid =
      options.gbm_grid.empty() ? default_gbm_grid() : options.gbm_grid;
  const std::size_t n = m.x.size();
  Predictor p;
  p.family = Family::kGbm;
  p.features = spec;
  p.targets = m.targets;
  if (n < options.cv_folds) {
    p.warnings.push_back("gbm: fewer records than CV folds");
  }
  const std::size_t folds = std::min(options.cv_folds, n);
  GbmModel model;
  for (std::size_t j = 0; j < m.targets.size(); ++j) {
    GbmConfig best_cfg = grid.front();
    if (folds >= 2 && grid.size() > 1) {
      double best = std::numeric_limits<double>::infinity();
      for (const GbmConfig& cfg : grid) {
        const double mse = regression_internal::cv_mse(
            m.x, m.y[j], folds,
            [&cfg](const FeatureRows& tx, std::span<const double> ty,
                   const FeatureRows& vx) {
              const GbmTargetModel fit = fit_boosting(tx, ty, cfg);
              std::vector<double> out;
              for (const auto& r : vx) out.push_back(fit.predict(r));
              return out;
            });
        if (mse < best) {
          best = mse;
          best_cfg = cfg;
        }
      }
    }
    model.targets.push_back(fit_boosting(m.x, m.y[j], best_cfg));
  }
  p.model = std::move(model);
  p.training_rows = n;
  p.num_components = data.num_components();
  return p;
}

}  // namespace mixopt
