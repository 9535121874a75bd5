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

#include "faa/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "faa/errors.hpp"

namespace faa {

void FusionConfig::validate() const {
  if (embed_dim < 1) throw ConfigError("fusion.embed_dim: must be >= 1");
  if (hidden < 1) throw ConfigError("fusion.hidden: must be >= 1");
  if (heads < 1 || hidden % heads != 0) throw ConfigError("fusion.heads: hidden must be divisible by heads");
  if (layers < 1) throw ConfigError("fusion.layers: must be >= 1");
  if (ff_mult < 1) throw ConfigError("fusion.ff_mult: must be >= 1");
  if (!(ln_eps > 0.0)) throw ConfigError("fusion.ln_eps: must be positive");
}

FusionConfig FusionConfig::full_scale(std::size_t embed_dim) {
  FusionConfig c;
  c.embed_dim = embed_dim;
  c.hidden = 256;
  c.heads = 4;
  c.layers = 4;
  return c;
}

namespace {

Tensor init_weight(Rng& rng, std::size_t in, std::size_t out) {
  Tensor w({in, out});
  const double scale = 1.0 / std::sqrt(static_cast<double>(in));
  for (double& v : w.data()) v = scale * rng.normal();
  return w;
}

Tensor small_vector(Rng& rng, std::size_t n) {
  Tensor t({n});
  for (double& v : t.data()) v = 0.02 * rng.normal();
  return t;
}

std::string layer_prefix(std::size_t l) { return "fusion.layer" + std::to_string(l) + "."; }

ad::Var linear(ad::Tape& tape, const ParamStore& store, const std::string& name, ad::Var x) {
  return ad::add_row(ad::matmul(x, tape.param(store, name + ".weight")), tape.param(store, name + ".bias"));
}

ad::Var norm(ad::Tape& tape, const ParamStore& store, const std::string& name, ad::Var x, double eps) {
  return ad::layer_norm(x, tape.param(store, name + ".gain"), tape.param(store, name + ".bias"), eps);
}

}  // namespace

void add_fusion_params(ParamStore& store, const FusionConfig& c, Rng& rng) {
  c.validate();
  const std::size_t h = c.hidden, ff = c.hidden * c.ff_mult;
  store.add("fusion.token_proj.weight", init_weight(rng, c.embed_dim, h));
  store.add("fusion.token_proj.bias", Tensor({h}));
  store.add("fusion.type_face", small_vector(rng, h));
  store.add("fusion.type_voice", small_vector(rng, h));
  if (c.use_cls) store.add("fusion.cls", small_vector(rng, h));
  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::string p = layer_prefix(l);
    store.add(p + "ln1.gain", Tensor({h}, 1.0));
    store.add(p + "ln1.bias", Tensor({h}));
    for (const char* proj : {"attn.q", "attn.k", "attn.v", "attn.o"}) {
      store.add(p + proj + ".weight", init_weight(rng, h, h));
      store.add(p + proj + ".bias", Tensor({h}));
    }
    store.add(p + "ln2.gain", Tensor({h}, 1.0));
    store.add(p + "ln2.bias", Tensor({h}));
    store.add(p + "ff1.weight", init_weight(rng, h, ff));
    store.add(p + "ff1.bias", Tensor({ff}));
    store.add(p + "ff2.weight", init_weight(rng, ff, h));
    store.add(p + "ff2.bias", Tensor({h}));
  }
  store.add("fusion.ln_final.gain", Tensor({h}, 1.0));
  store.add("fusion.ln_final.bias", Tensor({h}));
  store.add("fusion.head.weight", Tensor({h, 2}));
  store.add("fusion.head.bias", Tensor({2}));
}

ad::Var joint_representation(ad::Tape& tape, const ParamStore& store, const FusionConfig& c, ad::Var faces,
                             ad::Var voices) {
  const Tensor& fv = faces.value();
  if (fv.rank() != 2 || fv.cols() != c.embed_dim || voices.value().shape() != fv.shape()) {
    throw DimensionError("joint_representation: expected matching [B x " + std::to_string(c.embed_dim) +
                         "] inputs, got " + shape_to_string(fv.shape()) + " and " +
                         shape_to_string(voices.value().shape()));
  }
  const std::size_t batch = fv.rows();
  ad::Var face_tok = ad::add_row(linear(tape, store, "fusion.token_proj", faces), tape.param(store, "fusion.type_face"));
  ad::Var voice_tok =
      ad::add_row(linear(tape, store, "fusion.token_proj", voices), tape.param(store, "fusion.type_voice"));
  std::vector<ad::Var> parts;
  if (c.use_cls) {
    parts.push_back(ad::add_row(tape.constant(Tensor({batch, c.hidden})), tape.param(store, "fusion.cls")));
  }
  parts.push_back(face_tok);
  parts.push_back(voice_tok);
  ad::Var x = ad::interleave_rows(parts);
  const std::size_t L = c.seq_len();

  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::string p = layer_prefix(l);
    ad::Var h = norm(tape, store, p + "ln1", x, c.ln_eps);
    ad::Var attn = ad::multi_head_attention(linear(tape, store, p + "attn.q", h), linear(tape, store, p + "attn.k", h),
                                            linear(tape, store, p + "attn.v", h), L, c.heads);
    x = ad::add(x, linear(tape, store, p + "attn.o", attn));
    ad::Var h2 = norm(tape, store, p + "ln2", x, c.ln_eps);
    x = ad::add(x, linear(tape, store, p + "ff2", ad::gelu(linear(tape, store, p + "ff1", h2))));
  }
  x = norm(tape, store, "fusion.ln_final", x, c.ln_eps);

  if (c.use_cls) {
    std::vector<std::size_t> cls_rows(batch);
    for (std::size_t b = 0; b < batch; ++b) cls_rows[b] = b * L;
    return ad::take_rows(x, std::move(cls_rows));
  }
  return ad::group_mean_rows(x, L);
}

ad::Var match_logits(ad::Tape& tape, const ParamStore& store, const FusionConfig& c, ad::Var faces, ad::Var voices) {
  return linear(tape, store, "fusion.head", joint_representation(tape, store, c, faces, voices));
}

ad::Var match_probability(ad::Tape& tape, const ParamStore& store, const FusionConfig& c, ad::Var faces,
                          ad::Var voices) {
  return ad::column(ad::softmax_rows(match_logits(tape, store, c, faces, voices)), 1);
}

std::vector<double> match_scores(const ParamStore& store, const FusionConfig& c, const Tensor& faces,
                                 const Tensor& voices) {
  if (faces.shape() != voices.shape()) throw DimensionError("match_scores: face/voice batches differ in shape");
  constexpr std::size_t kChunk = 512;
  std::vector<double> out;
  out.reserve(faces.rows());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < faces.rows(); start += kChunk) {
    const std::size_t end = std::min(faces.rows(), start + kChunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    ad::Tape tape(false);
    ad::Var p = match_probability(tape, store, c, tape.constant(take_rows(faces, idx)),
                                  tape.constant(take_rows(voices, idx)));
    out.insert(out.end(), p.value().data().begin(), p.value().data().end());
  }
  return out;
}

}  // namespace faa
