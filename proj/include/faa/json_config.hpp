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

// JSON mapping for configuration structs. Missing keys keep their defaults;
// unknown keys and ill-typed values raise ConfigError naming the field.

#include <initializer_list>
#include <string>

#include "faa/errors.hpp"
#include "faa/synthworld.hpp"
#include "json.hpp"

namespace faa {

using Json = nlohmann::json;

namespace json_detail {

inline void reject_unknown(const Json& j, const std::string& where, std::initializer_list<const char*> known) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError(where + "." + key + ": unknown field");
  }
}

template <typename T>
void read(const Json& j, const std::string& where, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->template get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

}  // namespace json_detail

Json to_json(const WorldConfig& c);
WorldConfig world_config_from_json(const Json& j);

}  // namespace faa
