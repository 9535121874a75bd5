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
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "faa/clustering.hpp"
#include "faa/errors.hpp"
#include "faa/evalsuite.hpp"
#include "faa/model.hpp"
#include "faa/objectives.hpp"
#include "faa/rng.hpp"
#include "faa/synthworld.hpp"

namespace faa {

enum class AlignmentLoss { kMultiSimilarity, kContrastive };
enum class PairSelectionMode { kProgressiveHardNegatives, kFixedRandomNegatives };

struct TrainConfig {
  std::size_t batch_size = 32;
  double learning_rate = 3e-3;
  double weight_decay = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t max_epochs = 30;
  std::size_t patience = 3;
  double delta = 0.9;
  MiningConfig mining;
  ContrastiveConfig contrastive;
  AlignmentLoss loss = AlignmentLoss::kMultiSimilarity;
  // Off: no matching loss; validation and evaluation score by cosine.
  bool fusion_scoring = true;
  PairSelectionMode pair_selection = PairSelectionMode::kProgressiveHardNegatives;
  std::size_t fixed_clusters = 16;
  // 0 starts from one cluster per training video.
  std::size_t initial_clusters = 0;
  std::size_t min_clusters = 2;
  std::size_t hard_negatives_k = 3;
  std::size_t num_workers = 1;
  bool reset_moments_on_halving = true;
  std::size_t val_pairs = 2000;  // per class
  std::uint64_t val_seed = 99;
  std::uint64_t seed = 42;
  std::size_t threads = 1;
  // Debug: poison the loss of this (epoch, batch); epoch 0 disables.
  std::size_t debug_nan_epoch = 0;
  std::size_t debug_nan_batch = 1;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct AdamWConfig {
  double learning_rate = 1e-4, weight_decay = 0.01, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

// Adaptive moments with weight decay applied directly to the parameters,
// outside the moment estimates.
class AdamW {
 public:
  AdamW(const ParamStore& params, AdamWConfig config);
  // Parameters missing from `grads` are treated as having zero gradient.
  void step(ParamStore& params, const std::map<ParamId, Tensor>& grads);
  void reset();
  std::size_t steps() const { return steps_; }

 private:
  AdamWConfig config_;
  std::vector<Tensor> m_, v_;
  std::size_t steps_ = 0;
};

// One simulated worker's share of a batch.
struct MiningShard {
  Tensor faces, voices;  // unset when the shard is empty
  std::vector<int> labels;
  std::vector<std::uint64_t> ids;

  bool empty() const { return labels.empty(); }
};

// Concatenates shards in order, skipping empty ones. Throws DimensionError on
// inconsistent widths or row counts.
MiningShard gather_global_pool(const std::vector<MiningShard>& shards);

struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t clusters = 0;
  double loss_alignment = 0.0, loss_matching = 0.0, loss_total = 0.0;
  double val_auc = 0.0;
  std::size_t batches = 0, skipped_matching_batches = 0;
  std::size_t matching_positives = 0, matching_negatives = 0;
  bool improved = false, halved = false;
};

Json to_json(const EpochRecord& r);

struct NonFiniteLoss : Error {
  NonFiniteLoss(std::size_t epoch, std::size_t batch, double alignment, double matching, double total);
  std::size_t epoch, batch;
  double alignment, matching, total;
  Json diagnostic() const;
};

struct TrainResult {
  Model best_model;
  std::size_t best_epoch = 0;
  double best_val_auc = 0.0;
  std::size_t initial_clusters = 0;
  ProgressState final_state;
  PseudoLabeling final_labels;
  std::vector<EpochRecord> history;
  std::vector<double> epoch_seconds;
};

// Training objective for one batch: alignment loss over the stacked face and
// voice embeddings, plus the weighted matching loss when fusion scoring is on.
struct BatchLoss {
  ad::Var alignment;
  ad::Var total;
  double matching_value = 0.0;
  bool matching_skipped = false;  // every row carried one label
  std::size_t positives = 0, negatives = 0;
};

// `negative_rng` is drawn from only in fixed/random-negative mode.
BatchLoss batch_objective(ad::Tape& tape, const Model& model, const TrainConfig& config, const Tensor& face_rows,
                          const Tensor& voice_rows, const std::vector<int>& labels, Rng& negative_rng);

using EpochCallback = std::function<void(const EpochRecord&, const PseudoLabeling&, double seconds)>;

// Only the train and val partitions are read.
TrainResult train(const Dataset& data, const ModelConfig& model_config, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

// Verification AUC on a fixed, seeded trial list.
double validate(const Model& model, const SampleIndex& val, Scoring scoring, std::size_t pairs, std::uint64_t seed);

// ---- Checkpoints -----------------------------------------------------------

struct Checkpoint {
  Model model;
  std::size_t epoch = 0;
  double val_metric = 0.0;
  ProgressState progress;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string checkpoint_bytes(const Checkpoint& c);
// FormatError on bad magic or version, CorruptionError on truncation or
// inconsistent entries.
Checkpoint parse_checkpoint(const std::string& bytes);
void write_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

Json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const Json& j);
Json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const Json& j);

}  // namespace faa
