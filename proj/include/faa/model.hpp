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
#include <vector>

#include "faa/encoders.hpp"
#include "faa/fusion.hpp"
#include "faa/params.hpp"

namespace faa {

struct ModelConfig {
  EncoderConfig encoder;
  FusionConfig fusion;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// All learnable parameters: both unimodal encoders, the fusion transformer
// and its matching head.
struct Model {
  ModelConfig config;
  ParamStore params;

  friend bool operator==(const Model&, const Model&) = default;
};

// Deterministic initialization from `seed`.
Model init_model(const ModelConfig& config, std::uint64_t seed);

Tensor embed(const Model& model, Modality m, const Tensor& batch);

// Fusion probability for row-aligned (face, voice) embedding pairs.
std::vector<double> fusion_scores(const Model& model, const Tensor& face_embs, const Tensor& voice_embs);

}  // namespace faa
