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

// mixopt <command> --config <path> [--seed S] [--threads N] [--force]

#include <iostream>

#include "CLI11.hpp"
#include "mixopt/pipeline.h"

int main(int argc, char** argv) {
  CLI::App app{"Data mixture optimization with mixtures of data experts"};
  app.require_subcommand(1);

  mixopt::CommandOptions options;
  std::string config;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  for (const auto& name : mixopt::command_names()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "Run configuration (JSON)")->required();
    sub->add_option("--seed", seed, "Override the master seed");
    sub->add_option("--threads", threads, "Worker threads (0 = all cores)");
    sub->add_flag("--force", options.force,
                  "Accept artifacts produced under a different config");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  const CLI::App* sub = app.get_subcommands().front();
  options.config = config;
  if (sub->count("--seed") > 0) options.seed = seed;
  if (sub->count("--threads") > 0) options.threads = threads;
  return mixopt::run_command(sub->get_name(), options);
}
