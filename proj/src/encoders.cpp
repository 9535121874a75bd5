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

#include "faa/encoders.hpp"

#include <cmath>

#include "faa/errors.hpp"

namespace faa {

std::string modality_name(Modality m) { return m == Modality::kFace ? "face" : "voice"; }

void EncoderConfig::validate() const {
  if (face_dim < 1 || voice_dim < 1) throw ConfigError("encoder: input dims must be >= 1");
  if (hidden < 1) throw ConfigError("encoder.hidden: must be >= 1");
  if (embed_dim < 2) throw ConfigError("encoder.embed_dim: must be >= 2");
  if (depth < 1) throw ConfigError("encoder.depth: must be >= 1");
}

namespace {

std::string prefix(Modality m) { return "encoder." + modality_name(m) + "."; }

Tensor init_weight(Rng& rng, std::size_t in, std::size_t out) {
  Tensor w({in, out});
  const double scale = 1.0 / std::sqrt(static_cast<double>(in));
  for (double& v : w.data()) v = scale * rng.normal();
  return w;
}

}  // namespace

void add_encoder_params(ParamStore& store, const EncoderConfig& config, Modality m, Rng& rng) {
  config.validate();
  const std::string p = prefix(m);
  std::size_t in = config.input_dim(m);
  for (std::size_t l = 0; l < config.depth; ++l) {
    const std::size_t out = l + 1 == config.depth ? config.embed_dim : config.hidden;
    store.add(p + "layer" + std::to_string(l) + ".weight", init_weight(rng, in, out));
    store.add(p + "layer" + std::to_string(l) + ".bias", Tensor({out}));
    in = out;
  }
  store.add(p + "proj.weight", init_weight(rng, config.embed_dim, config.embed_dim));
  store.add(p + "proj.bias", Tensor({config.embed_dim}));
}

ad::Var encode(ad::Tape& tape, const ParamStore& store, const EncoderConfig& config, Modality m, ad::Var batch) {
  if (batch.value().rank() != 2 || batch.value().cols() != config.input_dim(m)) {
    throw DimensionError("encode(" + modality_name(m) + "): expected [b x " + std::to_string(config.input_dim(m)) +
                         "] input, got " + shape_to_string(batch.value().shape()));
  }
  const std::string p = prefix(m);
  ad::Var h = batch;
  for (std::size_t l = 0; l < config.depth; ++l) {
    const std::string layer = p + "layer" + std::to_string(l);
    h = ad::gelu(ad::add_row(ad::matmul(h, tape.param(store, layer + ".weight")), tape.param(store, layer + ".bias")));
  }
  h = ad::add_row(ad::matmul(h, tape.param(store, p + "proj.weight")), tape.param(store, p + "proj.bias"));
  return ad::l2_normalize_rows(h);
}

Tensor encode(const ParamStore& store, const EncoderConfig& config, Modality m, const Tensor& batch) {
  ad::Tape tape(false);
  return encode(tape, store, config, m, tape.constant(batch)).value();
}

}  // namespace faa
