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

// End-to-end wiring shared by the command-line tool and the acceptance run:
// the run configuration file, the fixed ablation grid, and its trend checks.

#include <array>
#include <string>
#include <vector>

#include "faa/evalsuite.hpp"
#include "faa/json_config.hpp"
#include "faa/synthworld.hpp"
#include "faa/trainer.hpp"

namespace faa {

// One structured file describing a whole run. Every section is optional and
// falls back to defaults. Encoder input dims default to the world's.
struct RunConfig {
  WorldConfig world;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;

  void validate() const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

Json to_json(const RunConfig& c);
RunConfig run_config_from_json(const Json& j);
// Hash of the canonical JSON form.
std::string config_hash(const RunConfig& c);

struct AblationSetting {
  AlignmentLoss loss = AlignmentLoss::kMultiSimilarity;
  bool fusion_scoring = true;
  PairSelectionMode pair_selection = PairSelectionMode::kProgressiveHardNegatives;

  std::string label() const;
  friend bool operator==(const AblationSetting&, const AblationSetting&) = default;
};

// Loss x scoring x pair selection rows in table order: contrastive without
// and with fusion, then multi-similarity over the remaining four.
std::array<AblationSetting, 6> ablation_grid();

TrainConfig apply_setting(TrainConfig base, const AblationSetting& s);

struct AblationRow {
  AblationSetting setting;
  EvalReport report;
  std::size_t best_epoch = 0;
  std::size_t final_clusters = 0;
  double seconds = 0.0;

  double matching_acc() const;  // mean of both directions, U
  double retrieval_map() const;  // mean of both directions
};

// Trains on train/val and evaluates on test with the row's scoring.
AblationRow run_ablation_row(const Dataset& data, const RunConfig& config, const AblationSetting& setting);

struct TrendCheck {
  std::string name;
  bool holds = false;
  std::string detail;
};

inline constexpr double kWideMatchingMargin = 0.05;

// Direction-only comparisons between rows of one grid run:
// loss: each contrastive row has lower mAP than the multi-similarity row with
//   the same scoring and pair selection.
// fusion: fusion ACC exceeds cosine ACC by `wide_margin` under contrastive
//   loss and is at least cosine ACC under multi-similarity loss.
// pair_selection: progressive clustering with hard negatives reaches at least
//   the mAP of fixed clusters with random negatives, at equal scoring.
std::vector<TrendCheck> ablation_trends(const std::vector<AblationRow>& rows,
                                        double wide_margin = kWideMatchingMargin);

Json to_json(const AblationRow& row);
std::string ablation_markdown(const std::vector<AblationRow>& rows);

}  // namespace faa
