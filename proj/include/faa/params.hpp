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

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "faa/tensor.hpp"

namespace faa {

using ParamId = std::size_t;

// Named, ordered collection of learnable tensors. Insertion order is the
// canonical order used for checkpoints and optimizer state.
class ParamStore {
 public:
  ParamId add(std::string name, Tensor value);

  bool contains(std::string_view name) const;
  ParamId id(std::string_view name) const;

  const std::string& name(ParamId id) const { return names_.at(id); }
  Tensor& value(ParamId id) { return values_.at(id); }
  const Tensor& value(ParamId id) const { return values_.at(id); }
  Tensor& value(std::string_view name) { return values_.at(id(name)); }
  const Tensor& value(std::string_view name) const { return values_.at(id(name)); }

  std::size_t size() const { return values_.size(); }
  std::size_t total_elements() const;

  friend bool operator==(const ParamStore& a, const ParamStore& b) {
    return a.names_ == b.names_ && a.values_ == b.values_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::map<std::string, ParamId, std::less<>> index_;
};

}  // namespace faa
