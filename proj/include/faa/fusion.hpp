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
#include <vector>

#include "faa/autodiff.hpp"
#include "faa/params.hpp"
#include "faa/rng.hpp"

namespace faa {

// Multimodal fusion encoder: a pre-norm transformer over the two modality
// tokens of a (face, voice) pair, pooled into a joint representation and
// classified by a 2-way head.
struct FusionConfig {
  std::size_t embed_dim = 64;
  std::size_t hidden = 64;
  std::size_t heads = 4;
  std::size_t layers = 1;
  std::size_t ff_mult = 4;
  // Prepend a learned CLS token and pool from it instead of mean pooling.
  bool use_cls = false;
  double ln_eps = 1e-5;

  void validate() const;
  std::size_t seq_len() const { return use_cls ? 3 : 2; }

  // 256 hidden, 4 heads, 4 layers.
  static FusionConfig full_scale(std::size_t embed_dim);

  friend bool operator==(const FusionConfig&, const FusionConfig&) = default;
};

// Registers "fusion.*" parameters. The classification head starts at zero so
// an untrained model scores every pair 0.5.
void add_fusion_params(ParamStore& store, const FusionConfig& config, Rng& rng);

// faces/voices: [B x embed_dim] -> [B x hidden].
ad::Var joint_representation(ad::Tape& tape, const ParamStore& store, const FusionConfig& config, ad::Var faces,
                             ad::Var voices);

// Positive-class logits pair: [B x 2].
ad::Var match_logits(ad::Tape& tape, const ParamStore& store, const FusionConfig& config, ad::Var faces,
                     ad::Var voices);

// Probability that each pair shares an identity: [B x 1].
ad::Var match_probability(ad::Tape& tape, const ParamStore& store, const FusionConfig& config, ad::Var faces,
                          ad::Var voices);

// Inference over row-aligned pairs, evaluated in chunks.
std::vector<double> match_scores(const ParamStore& store, const FusionConfig& config, const Tensor& faces,
                                 const Tensor& voices);

}  // namespace faa
