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
#include <string>

#include "faa/autodiff.hpp"
#include "faa/params.hpp"
#include "faa/rng.hpp"

namespace faa {

enum class Modality { kFace, kVoice };
std::string modality_name(Modality m);

// Per-modality MLP: input -> hidden (x depth-1) -> embed_dim, GELU after each
// layer, then a linear projection embed_dim -> embed_dim and row-wise L2
// normalization.
struct EncoderConfig {
  std::size_t face_dim = 24;
  std::size_t voice_dim = 16;
  std::size_t hidden = 64;
  std::size_t embed_dim = 64;
  std::size_t depth = 2;

  std::size_t input_dim(Modality m) const { return m == Modality::kFace ? face_dim : voice_dim; }
  void validate() const;

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

// Registers "encoder.<modality>.*" parameters. Weights ~ N(0, 1/fan_in),
// biases zero.
void add_encoder_params(ParamStore& store, const EncoderConfig& config, Modality m, Rng& rng);

// batch: [b x input_dim(m)] -> [b x embed_dim] with unit-norm rows.
ad::Var encode(ad::Tape& tape, const ParamStore& store, const EncoderConfig& config, Modality m, ad::Var batch);

// Inference convenience.
Tensor encode(const ParamStore& store, const EncoderConfig& config, Modality m, const Tensor& batch);

}  // namespace faa
