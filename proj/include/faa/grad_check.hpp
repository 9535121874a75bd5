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

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "faa/autodiff.hpp"
#include "faa/params.hpp"

namespace faa {

using ScalarFunction = std::function<ad::Var(ad::Tape&, const ParamStore&)>;

struct ParamGradError {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradCheckReport {
  std::string function;
  std::vector<ParamGradError> params;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

// Relative error floor: |analytic - numeric| / max(|analytic|, |numeric|, floor).
inline constexpr double kGradCheckFloor = 1e-6;

// Compares tape gradients of `fn` against central finite differences for
// every element of the listed parameters. `fn` must produce a single-element
// tensor; anything else raises ContractError. Parameter values are restored
// before returning.
GradCheckReport grad_check(std::string function, const ScalarFunction& fn, ParamStore& params,
                           std::span<const ParamId> subset, double tolerance, double step = 1e-5);

// All parameters of the store.
GradCheckReport grad_check(std::string function, const ScalarFunction& fn, ParamStore& params, double tolerance,
                           double step = 1e-5);

}  // namespace faa

namespace faa {

// Gradient checks for every primitive op on random 64-bit inputs drawn from
// `seed`. Each report is named after the op it exercises.
std::vector<GradCheckReport> primitive_grad_checks(std::uint64_t seed, double tolerance = 1e-4);

}  // namespace faa
