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

#include "mixopt/mixture_weights.h"

#include <cmath>
#include <string>

#include "mixopt/error.h"

namespace mixopt {

MixtureWeights::MixtureWeights(std::vector<double> weights)
    : weights_(std::move(weights)) {
  if (weights_.empty()) throw InvalidArgument("mixture has no components");
  double sum = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    const double w = weights_[i];
    if (!std::isfinite(w) || w < 0.0) {
      throw InvalidArgument("mixture weight " + std::to_string(i) +
                            " is negative or not finite");
    }
    sum += w;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw InvalidArgument("mixture weights sum to " + std::to_string(sum) +
                          ", expected 1");
  }
}

MixtureWeights MixtureWeights::normalized(std::vector<double> raw) {
  double sum = 0.0;
  for (double w : raw) {
    if (!std::isfinite(w) || w < 0.0) {
      throw InvalidArgument("cannot normalize negative or non-finite weights");
    }
    sum += w;
  }
  if (!(sum > 0.0)) throw InvalidArgument("cannot normalize a zero vector");
  for (double& w : raw) w /= sum;
  return MixtureWeights(std::move(raw));
}

MixtureWeights MixtureWeights::one_hot(std::size_t k, std::size_t index) {
  if (index >= k) throw InvalidArgument("one-hot index out of range");
  std::vector<double> w(k, 0.0);
  w[index] = 1.0;
  return MixtureWeights(std::move(w));
}

MixtureWeights MixtureWeights::uniform(std::size_t k) {
  if (k == 0) throw InvalidArgument("mixture has no components");
  return MixtureWeights(std::vector<double>(k, 1.0 / static_cast<double>(k)));
}

std::optional<std::size_t> MixtureWeights::corner_index() const {
  std::optional<std::size_t> hit;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    if (weights_[i] == 1.0) {
      hit = i;
    } else if (weights_[i] != 0.0) {
      return std::nullopt;
    }
  }
  return hit;
}

}  // namespace mixopt
