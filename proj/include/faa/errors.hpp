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

#include <stdexcept>
#include <string>

namespace faa {

// Base of every error raised by the library. Subclasses name the failure
// category so callers (and the CLI) can map them to exit codes/messages.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes or vector dimensions.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Input that is well-formed but degenerate for the requested operation
// (zero-norm rows, single-class labels, empty modality, ...).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Wrong magic/version in a serialized artifact.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Serialized artifact is internally inconsistent or truncated.
class CorruptionError : public Error {
 public:
  using Error::Error;
};

// Caller violated an API contract (e.g. non-scalar function passed to
// grad_check).
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace faa
