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

#ifndef MIXOPT_MIXTURE_WEIGHTS_H_
#define MIXOPT_MIXTURE_WEIGHTS_H_

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace mixopt {

// A point on the (k-1)-simplex: k non-negative weights summing to one.
class MixtureWeights {
 public:
  static constexpr double kSumTolerance = 1e-12;

  // Validates the simplex invariants; throws InvalidArgument otherwise.
  explicit MixtureWeights(std::vector<double> weights);

  // Divides a non-negative, non-zero vector by its sum.
  static MixtureWeights normalized(std::vector<double> raw);
  static MixtureWeights one_hot(std::size_t k, std::size_t index);
  static MixtureWeights uniform(std::size_t k);

  std::size_t size() const { return weights_.size(); }
  double operator[](std::size_t i) const { return weights_[i]; }
  std::span<const double> values() const { return weights_; }

  // Index of the unit entry if this is a corner of the simplex.
  std::optional<std::size_t> corner_index() const;

  friend bool operator==(const MixtureWeights&, const MixtureWeights&) =
      default;

 private:
  std::vector<double> weights_;
};

}  // namespace mixopt

#endif  // MIXOPT_MIXTURE_WEIGHTS_H_
