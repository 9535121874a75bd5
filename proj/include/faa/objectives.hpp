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
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "faa/autodiff.hpp"
#include "faa/tensor.hpp"

namespace faa {

// Positive-pair threshold used by mine_pairs.
//  kMsOriginal: keep positive j iff S_ij < max over negatives S_im + eps.
//  kMinNegative: keep positive j iff S_ij < min over negatives S_im + eps.
enum class MiningRule { kMinNegative, kMsOriginal };

struct MiningConfig {
  double epsilon = 0.1;
  double alpha = 2.0;
  double beta = 40.0;
  double lambda = 1.0;
  MiningRule rule = MiningRule::kMsOriginal;
  // false selects every positive and negative (no mining).
  bool enabled = true;

  void validate() const;
  friend bool operator==(const MiningConfig&, const MiningConfig&) = default;
};

// Per anchor: indices of the selected positives and negatives.
struct PairSelection {
  std::vector<std::vector<std::size_t>> positives;
  std::vector<std::vector<std::size_t>> negatives;

  bool empty() const;
};

// S: symmetric [n x n] similarity over the batch; the diagonal is never
// selected. Negative j of anchor i is kept iff S_ij > min_{y_m = y_i, m != i}
// S_im - eps; positives follow config.rule. Anchors with no positives or no
// negatives get empty selections.
PairSelection mine_pairs(const Tensor& similarity, std::span<const int> labels, const MiningConfig& config);

// Multi-similarity loss evaluated on a precomputed similarity matrix.
double ms_loss_value(const Tensor& similarity, std::span<const int> labels, const MiningConfig& config);

// Differentiable multi-similarity loss over a similarity matrix variable.
// Mining is done on the forward values and treated as constant.
ad::Var ms_loss_from_similarity(ad::Var similarity, std::vector<int> labels, const MiningConfig& config);

// embeddings: [n x d], unit-norm rows (similarity = dot product).
ad::Var ms_loss(ad::Var embeddings, std::vector<int> labels, const MiningConfig& config);

// Pairwise contrastive baseline on cosine distance d = 1 - S over all
// pairs i < j: same label -> d^2, different label -> max(0, margin - d)^2,
// averaged over pairs.
struct ContrastiveConfig {
  double margin = 1.0;
  friend bool operator==(const ContrastiveConfig&, const ContrastiveConfig&) = default;
};
ad::Var contrastive_loss(ad::Var embeddings, std::vector<int> labels, const ContrastiveConfig& config);

using IndexPair = std::pair<std::size_t, std::size_t>;  // (face index, voice index)

struct HardNegatives {
  // faces_for_voice[v]: the k most similar opposite-label faces, similarity
  // descending. voices_for_face likewise.
  std::vector<std::vector<std::size_t>> faces_for_voice;
  std::vector<std::vector<std::size_t>> voices_for_face;

  // Union of both directions as sorted, de-duplicated (face, voice) pairs.
  std::vector<IndexPair> pairs() const;
};

// Cross-modal hard negatives over a gathered pool. Similarity ties are
// broken by the lower id; ids default to pool indices. Throws
// DegenerateInputError when an anchor has no opposite-label candidate.
HardNegatives mine_hard_negatives(const Tensor& face_embs, const Tensor& voice_embs, std::span<const int> labels_f,
                                  std::span<const int> labels_v, std::size_t k,
                                  std::span<const std::uint64_t> ids_f = {},
                                  std::span<const std::uint64_t> ids_v = {});

inline constexpr double kProbabilityClamp = 1e-12;

// Binary cross-entropy with probabilities clamped to [1e-12, 1 - 1e-12].
double matching_ce_loss(std::span<const double> probs, std::span<const int> targets);
// probs: [N x 1] (or [N]) variable.
ad::Var matching_ce_loss(ad::Var probs, std::vector<int> targets);

// delta * l_ms + (1 - delta) * l_ce; delta must lie in (0, 1).
double combined_loss(double l_ms, double l_ce, double delta);
ad::Var combined_loss(ad::Var l_ms, ad::Var l_ce, double delta);

}  // namespace faa
