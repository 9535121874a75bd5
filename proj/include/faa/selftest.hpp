/*
 * Copyright 2026 The FAA Lab Authors.
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

#pragma once

// Built-in verification suite: gradient checks, metric and loss oracles, and
// shard equivalence. Run by the `selftest` command.

#include <cstdint>
#include <string>
#include <vector>

#include "faa/json_config.hpp"

namespace faa {

struct SelftestCheck {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct SelftestReport {
  std::vector<SelftestCheck> checks;
  bool passed() const;
  // Names of failed checks.
  std::vector<std::string> failures() const;
};

struct SelftestOptions {
  std::uint64_t seed = 1;
  double grad_tolerance = 1e-4;
  std::size_t oracle_instances = 1000;
  std::size_t shard_pools = 100;
};

SelftestReport run_selftest(const SelftestOptions& options = {});

Json to_json(const SelftestReport& report);

}  // namespace faa
