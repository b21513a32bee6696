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

#ifndef MIXOPT_TESTS_TEST_UTIL_H_
#define MIXOPT_TESTS_TEST_UTIL_H_

#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "mixopt/experts.h"
#include "mixopt/proxy.h"
#include "mixopt/rng.h"

namespace mixopt::testing {

// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("mixopt_test_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Cache from per-token rows.
inline ProbCache cache_from_rows(const std::string& id,
                                 const std::vector<std::vector<double>>& rows) {
  std::vector<std::string> experts;
  for (std::size_t i = 0; i < rows.front().size(); ++i) {
    experts.push_back("e" + std::to_string(i));
  }
  std::vector<double> flat;
  for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
  return ProbCache(id, experts, rows.size(), flat);
}

// Cache with entries uniform in [0.01, 1).
inline ProbCache random_cache(std::uint64_t seed, std::size_t n,
                              std::size_t k, const std::string& id = "v") {
  StreamRng rng(seed, 0);
  std::vector<std::vector<double>> rows(n, std::vector<double>(k));
  for (auto& r : rows) {
    for (double& p : r) p = 0.01 + 0.99 * rng.uniform();
  }
  return cache_from_rows(id, rows);
}

// Measurement set with one target domain per loss column.
inline MeasurementSet make_measurements(
    const std::vector<std::vector<double>>& lambdas,
    const std::vector<std::vector<double>>& losses,
    const std::vector<std::string>& domains) {
  MeasurementSet set;
  for (std::size_t n = 0; n < lambdas.size(); ++n) {
    LossVector lv;
    for (std::size_t j = 0; j < domains.size(); ++j) {
      lv.push_back(domains[j], losses[n][j]);
    }
    char id[32];
    std::snprintf(id, sizeof(id), "mix_%03zu", n);
    set.records.push_back({id, MixtureWeights(lambdas[n]), lv});
  }
  return set;
}

}  // namespace mixopt::testing

#endif  // MIXOPT_TESTS_TEST_UTIL_H_
