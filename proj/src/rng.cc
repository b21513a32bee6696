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

#include "mixopt/rng.h"

#include <cmath>
#include <numbers>

#include "mixopt/error.h"

namespace mixopt {

double sample_normal(StreamRng& rng) {
  double u1 = rng.uniform();
  const double u2 = rng.uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

double sample_gamma(StreamRng& rng, double shape) {
  if (!(shape > 0.0) || !std::isfinite(shape)) {
    throw InvalidArgument("gamma shape must be positive and finite");
  }
  if (shape < 1.0) {
    const double g = sample_gamma(rng, shape + 1.0);
    double u = rng.uniform();
    if (u <= 0.0) u = 0x1.0p-53;
    return g * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = 0.0;
    double v = 0.0;
    do {
      x = sample_normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
      return d * v;
    }
  }
}

std::size_t sample_index(std::span<const double> cumulative, double u) {
  if (cumulative.empty()) throw InvalidArgument("empty distribution");
  for (std::size_t i = 0; i < cumulative.size(); ++i) {
    if (u < cumulative[i]) return i;
  }
  // u landed in the rounding gap above the final sum; use the last entry that
  // carries mass.
  std::size_t i = cumulative.size() - 1;
  while (i > 0 && cumulative[i] == cumulative[i - 1]) --i;
  return i;
}

}  // namespace mixopt
