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

#include "faa/model.hpp"

#include "faa/errors.hpp"
#include "faa/rng.hpp"

namespace faa {

void ModelConfig::validate() const {
  encoder.validate();
  fusion.validate();
  if (fusion.embed_dim != encoder.embed_dim) throw ConfigError("fusion.embed_dim must equal encoder.embed_dim");
}

Model init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Model model;
  model.config = config;
  Rng face_rng(derive_seed(seed, {10}));
  Rng voice_rng(derive_seed(seed, {11}));
  Rng fusion_rng(derive_seed(seed, {12}));
  add_encoder_params(model.params, config.encoder, Modality::kFace, face_rng);
  add_encoder_params(model.params, config.encoder, Modality::kVoice, voice_rng);
  add_fusion_params(model.params, config.fusion, fusion_rng);
  return model;
}

Tensor embed(const Model& model, Modality m, const Tensor& batch) {
  return encode(model.params, model.config.encoder, m, batch);
}

std::vector<double> fusion_scores(const Model& model, const Tensor& face_embs, const Tensor& voice_embs) {
  return match_scores(model.params, model.config.fusion, face_embs, voice_embs);
}

}  // namespace faa
