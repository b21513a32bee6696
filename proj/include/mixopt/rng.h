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

#ifndef MIXOPT_RNG_H_
#define MIXOPT_RNG_H_

#include <cstdint>
#include <limits>
#include <span>
#include <string_view>

namespace mixopt {

// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives an independent seed for sub-stream `stream` of `seed`.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(seed ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

// FNV-1a over a byte string; used to turn names into stream ids.
constexpr std::uint64_t hash_name(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Counter-based generator: the i-th draw of stream (seed, stream) is
// mix64(key + (i + 1) * golden), so any draw can be computed independently of
// the others and sampling is independent of execution order. Satisfies
// UniformRandomBitGenerator so it can feed <random> distributions.
class StreamRng {
 public:
  using result_type = std::uint64_t;

  StreamRng(std::uint64_t seed, std::uint64_t stream)
      : key_(derive_seed(seed, stream)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() { return at(counter_++); }

  // Draw number `index` of this stream without advancing the counter.
  result_type at(std::uint64_t index) const {
    return mix64(key_ + (index + 1) * 0x9e3779b97f4a7c15ULL);
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return to_unit(operator()()); }
  double uniform_at(std::uint64_t index) const { return to_unit(at(index)); }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) %
           n;
  }

  std::uint64_t counter() const { return counter_; }

  static double to_unit(result_type bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Gamma(shape, 1) draw. Marsaglia-Tsang for shape >= 1 with the
// U^(1/shape) boost for shape < 1; consumes draws from `rng` only.
double sample_gamma(StreamRng& rng, double shape);

// Standard normal draw (Box-Muller, one value per two uniforms).
double sample_normal(StreamRng& rng);

// Index i with probability proportional to weights[i] given a uniform u in
// [0, 1). Zero-weight entries are never returned.
std::size_t sample_index(std::span<const double> cumulative, double u);

}  // namespace mixopt

#endif  // MIXOPT_RNG_H_
