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

#include "faa/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "faa/errors.hpp"

namespace faa {

void MiningConfig::validate() const {
  if (!(epsilon >= 0.0)) throw ConfigError("mining.epsilon: must be >= 0");
  if (!(alpha > 0.0)) throw ConfigError("mining.alpha: must be > 0");
  if (!(beta > 0.0)) throw ConfigError("mining.beta: must be > 0");
  if (!std::isfinite(lambda)) throw ConfigError("mining.lambda: must be finite");
}

bool PairSelection::empty() const {
  for (const auto& p : positives)
    if (!p.empty()) return false;
  for (const auto& n : negatives)
    if (!n.empty()) return false;
  return true;
}

namespace {

void check_labels(const Tensor& s, std::size_t labels, const char* op) {
  if (s.rank() != 2 || s.rows() != s.cols()) {
    throw DimensionError(std::string(op) + ": similarity must be square, got " + shape_to_string(s.shape()));
  }
  if (labels != s.rows()) {
    throw DimensionError(std::string(op) + ": " + std::to_string(labels) + " labels for a batch of " +
                         std::to_string(s.rows()));
  }
}

}  // namespace

PairSelection mine_pairs(const Tensor& s, std::span<const int> labels, const MiningConfig& config) {
  check_labels(s, labels.size(), "mine_pairs");
  const std::size_t n = labels.size();
  PairSelection sel;
  sel.positives.resize(n);
  sel.negatives.resize(n);
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    double min_pos = inf, min_neg = inf, max_neg = -inf;
    bool has_pos = false, has_neg = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double v = s.at(i, j);
      if (labels[j] == labels[i]) {
        has_pos = true;
        min_pos = std::min(min_pos, v);
      } else {
        has_neg = true;
        min_neg = std::min(min_neg, v);
        max_neg = std::max(max_neg, v);
      }
    }
    if (!has_pos || !has_neg) continue;
    const double neg_threshold = min_pos - config.epsilon;
    const double pos_threshold = (config.rule == MiningRule::kMsOriginal ? max_neg : min_neg) + config.epsilon;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double v = s.at(i, j);
      if (labels[j] == labels[i]) {
        if (!config.enabled || v < pos_threshold) sel.positives[i].push_back(j);
      } else {
        if (!config.enabled || v > neg_threshold) sel.negatives[i].push_back(j);
      }
    }
  }
  return sel;
}

double ms_loss_value(const Tensor& s, std::span<const int> labels, const MiningConfig& config) {
  config.validate();
  const PairSelection sel = mine_pairs(s, labels, config);
  const std::size_t n = labels.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double pos = 0.0, neg = 0.0;
    for (std::size_t k : sel.positives[i]) pos += std::exp(-config.alpha * (s.at(i, k) - config.lambda));
    for (std::size_t k : sel.negatives[i]) neg += std::exp(config.beta * (s.at(i, k) - config.lambda));
    total += std::log1p(pos) / config.alpha + std::log1p(neg) / config.beta;
  }
  return total / static_cast<double>(n);
}

ad::Var ms_loss_from_similarity(ad::Var similarity, std::vector<int> labels, const MiningConfig& config) {
  config.validate();
  const Tensor& s = similarity.value();
  const double loss = ms_loss_value(s, labels, config);
  PairSelection sel = mine_pairs(s, labels, config);
  return similarity.tape().record(
      "ms_loss", Tensor::scalar(loss), {similarity},
      [similarity, sel = std::move(sel), config](const Tensor& g, std::vector<Tensor>& gin) {
        const Tensor& s = similarity.value();
        const std::size_t n = s.rows();
        const double scale = g[0] / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
          double pos = 0.0, neg = 0.0;
          for (std::size_t k : sel.positives[i]) pos += std::exp(-config.alpha * (s.at(i, k) - config.lambda));
          for (std::size_t k : sel.negatives[i]) neg += std::exp(config.beta * (s.at(i, k) - config.lambda));
          for (std::size_t k : sel.positives[i])
            gin[0].at(i, k) -= scale * std::exp(-config.alpha * (s.at(i, k) - config.lambda)) / (1.0 + pos);
          for (std::size_t k : sel.negatives[i])
            gin[0].at(i, k) += scale * std::exp(config.beta * (s.at(i, k) - config.lambda)) / (1.0 + neg);
        }
      });
}

ad::Var ms_loss(ad::Var embeddings, std::vector<int> labels, const MiningConfig& config) {
  if (embeddings.value().rows() < 2) throw DimensionError("ms_loss: batch needs at least 2 embeddings");
  ad::Var s = ad::matmul(embeddings, ad::transpose(embeddings));
  return ms_loss_from_similarity(s, std::move(labels), config);
}

ad::Var contrastive_loss(ad::Var embeddings, std::vector<int> labels, const ContrastiveConfig& config) {
  const std::size_t n = embeddings.value().rows();
  if (n < 2) throw DimensionError("contrastive_loss: batch needs at least 2 embeddings");
  ad::Var sim = ad::matmul(embeddings, ad::transpose(embeddings));
  const Tensor& s = sim.value();
  check_labels(s, labels.size(), "contrastive_loss");
  const double pairs = static_cast<double>(n * (n - 1) / 2);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = 1.0 - s.at(i, j);
      if (labels[i] == labels[j]) {
        total += d * d;
      } else {
        const double h = std::max(0.0, config.margin - d);
        total += h * h;
      }
    }
  }
  return sim.tape().record(
      "contrastive_loss", Tensor::scalar(total / pairs), {sim},
      [sim, labels = std::move(labels), config, pairs](const Tensor& g, std::vector<Tensor>& gin) {
        const Tensor& s = sim.value();
        const std::size_t n = s.rows();
        const double scale = g[0] / pairs;
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = i + 1; j < n; ++j) {
            const double d = 1.0 - s.at(i, j);
            // dL/dS = -dL/dd
            const double grad = labels[i] == labels[j] ? -2.0 * d : 2.0 * std::max(0.0, config.margin - d);
            gin[0].at(i, j) += scale * grad;
          }
        }
      });
}

std::vector<IndexPair> HardNegatives::pairs() const {
  std::vector<IndexPair> out;
  for (std::size_t v = 0; v < faces_for_voice.size(); ++v)
    for (std::size_t f : faces_for_voice[v]) out.emplace_back(f, v);
  for (std::size_t f = 0; f < voices_for_face.size(); ++f)
    for (std::size_t v : voices_for_face[f]) out.emplace_back(f, v);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

HardNegatives mine_hard_negatives(const Tensor& face_embs, const Tensor& voice_embs, std::span<const int> labels_f,
                                  std::span<const int> labels_v, std::size_t k, std::span<const std::uint64_t> ids_f,
                                  std::span<const std::uint64_t> ids_v) {
  if (k < 1) throw ConfigError("mine_hard_negatives: k must be >= 1");
  const std::size_t nf = face_embs.rows(), nv = voice_embs.rows();
  if (labels_f.size() != nf || labels_v.size() != nv) throw DimensionError("mine_hard_negatives: label count mismatch");
  if ((!ids_f.empty() && ids_f.size() != nf) || (!ids_v.empty() && ids_v.size() != nv)) {
    throw DimensionError("mine_hard_negatives: id count mismatch");
  }
  const Tensor s = cosine_similarity_matrix(face_embs, voice_embs);
  auto id_f = [&](std::size_t i) { return ids_f.empty() ? static_cast<std::uint64_t>(i) : ids_f[i]; };
  auto id_v = [&](std::size_t i) { return ids_v.empty() ? static_cast<std::uint64_t>(i) : ids_v[i]; };

  HardNegatives out;
  out.faces_for_voice.resize(nv);
  out.voices_for_face.resize(nf);
  std::vector<std::size_t> cand;
  for (std::size_t v = 0; v < nv; ++v) {
    cand.clear();
    for (std::size_t f = 0; f < nf; ++f)
      if (labels_f[f] != labels_v[v]) cand.push_back(f);
    if (cand.empty()) throw DegenerateInputError("mine_hard_negatives: voice " + std::to_string(v) + " has no opposite-label face");
    const std::size_t take = std::min(k, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(),
                      [&](std::size_t a, std::size_t b) {
                        if (s.at(a, v) != s.at(b, v)) return s.at(a, v) > s.at(b, v);
                        return id_f(a) < id_f(b);
                      });
    out.faces_for_voice[v].assign(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take));
  }
  for (std::size_t f = 0; f < nf; ++f) {
    cand.clear();
    for (std::size_t v = 0; v < nv; ++v)
      if (labels_v[v] != labels_f[f]) cand.push_back(v);
    if (cand.empty()) throw DegenerateInputError("mine_hard_negatives: face " + std::to_string(f) + " has no opposite-label voice");
    const std::size_t take = std::min(k, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(),
                      [&](std::size_t a, std::size_t b) {
                        if (s.at(f, a) != s.at(f, b)) return s.at(f, a) > s.at(f, b);
                        return id_v(a) < id_v(b);
                      });
    out.voices_for_face[f].assign(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take));
  }
  return out;
}

double matching_ce_loss(std::span<const double> probs, std::span<const int> targets) {
  if (probs.size() != targets.size()) throw DimensionError("matching_ce_loss: probs/targets length mismatch");
  if (probs.empty()) throw DimensionError("matching_ce_loss: empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    total += targets[i] ? std::log(p) : std::log(1.0 - p);
  }
  return -total / static_cast<double>(probs.size());
}

ad::Var matching_ce_loss(ad::Var probs, std::vector<int> targets) {
  const double loss = matching_ce_loss(probs.value().data(), targets);
  return probs.tape().record("matching_ce_loss", Tensor::scalar(loss), {probs},
                             [probs, targets = std::move(targets)](const Tensor& g, std::vector<Tensor>& gin) {
                               const auto p = probs.value().data();
                               const double scale = g[0] / static_cast<double>(p.size());
                               for (std::size_t i = 0; i < p.size(); ++i) {
                                 if (p[i] < kProbabilityClamp || p[i] > 1.0 - kProbabilityClamp) continue;
                                 gin[0][i] = targets[i] ? -scale / p[i] : scale / (1.0 - p[i]);
                               }
                             });
}

namespace {
void check_delta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta: must lie in (0, 1), got " + std::to_string(delta));
}
}  // namespace

double combined_loss(double l_ms, double l_ce, double delta) {
  check_delta(delta);
  return delta * l_ms + (1.0 - delta) * l_ce;
}

ad::Var combined_loss(ad::Var l_ms, ad::Var l_ce, double delta) {
  check_delta(delta);
  return ad::add(ad::scale(l_ms, delta), ad::scale(l_ce, 1.0 - delta));
}

}  // namespace faa
