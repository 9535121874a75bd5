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

#include "faa/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <sstream>

namespace faa {

void RunConfig::validate() const {
  world.validate();
  model.validate();
  train.validate();
  eval.validate();
  if (model.encoder.face_dim != world.face_dim || model.encoder.voice_dim != world.voice_dim)
    throw ConfigError("model.encoder: face_dim/voice_dim must match world (" + std::to_string(world.face_dim) + ", " +
                      std::to_string(world.voice_dim) + ")");
}

Json to_json(const RunConfig& c) {
  return {{"world", to_json(c.world)}, {"model", to_json(c.model)}, {"train", to_json(c.train)},
          {"eval", to_json(c.eval)}};
}

RunConfig run_config_from_json(const Json& j) {
  json_detail::reject_unknown(j, "config", {"world", "model", "train", "eval"});
  RunConfig c;
  if (j.contains("world")) c.world = world_config_from_json(j["world"]);
  Json model = j.value("model", Json::object());
  if (!model.is_object()) throw ConfigError("model: expected an object");
  Json& enc = model["encoder"];
  if (enc.is_null()) enc = Json::object();
  if (!enc.is_object()) throw ConfigError("model.encoder: expected an object");
  if (!enc.contains("face_dim")) enc["face_dim"] = c.world.face_dim;
  if (!enc.contains("voice_dim")) enc["voice_dim"] = c.world.voice_dim;
  Json& fus = model["fusion"];
  if (fus.is_null()) fus = Json::object();
  if (!fus.is_object()) throw ConfigError("model.fusion: expected an object");
  if (!fus.contains("embed_dim")) fus["embed_dim"] = enc.value("embed_dim", c.model.encoder.embed_dim);
  c.model = model_config_from_json(model);
  if (j.contains("train")) c.train = train_config_from_json(j["train"]);
  if (j.contains("eval")) c.eval = eval_config_from_json(j["eval"]);
  c.validate();
  return c;
}

std::string config_hash(const RunConfig& c) { return fnv1a_hex(to_json(c).dump()); }

std::string AblationSetting::label() const {
  std::string out = loss == AlignmentLoss::kMultiSimilarity ? "ms" : "contrastive";
  out += fusion_scoring ? "+fusion" : "+cosine";
  out += pair_selection == PairSelectionMode::kProgressiveHardNegatives ? "+progressive" : "+fixed";
  return out;
}

std::array<AblationSetting, 6> ablation_grid() {
  using L = AlignmentLoss;
  using P = PairSelectionMode;
  return {{{L::kContrastive, false, P::kFixedRandomNegatives},
           {L::kContrastive, true, P::kFixedRandomNegatives},
           {L::kMultiSimilarity, false, P::kFixedRandomNegatives},
           {L::kMultiSimilarity, false, P::kProgressiveHardNegatives},
           {L::kMultiSimilarity, true, P::kFixedRandomNegatives},
           {L::kMultiSimilarity, true, P::kProgressiveHardNegatives}}};
}

TrainConfig apply_setting(TrainConfig base, const AblationSetting& s) {
  base.loss = s.loss;
  base.fusion_scoring = s.fusion_scoring;
  base.pair_selection = s.pair_selection;
  return base;
}

double AblationRow::matching_acc() const { return 0.5 * (report.acc_v2f_u.value() + report.acc_f2v_u.value()); }
double AblationRow::retrieval_map() const { return 0.5 * (report.map_v2f.value() + report.map_f2v.value()); }

AblationRow run_ablation_row(const Dataset& data, const RunConfig& config, const AblationSetting& setting) {
  const auto start = std::chrono::steady_clock::now();
  const TrainResult tr = train(data, config.model, apply_setting(config.train, setting));
  AblationRow row;
  row.setting = setting;
  EvalConfig ec = config.eval;
  ec.verification = ec.matching = ec.retrieval = true;
  row.report = evaluate(&tr.best_model, index_samples(data.partition(Partition::kTest)), ec,
                        setting.fusion_scoring ? Scoring::kFusion : Scoring::kCosine);
  row.best_epoch = tr.best_epoch;
  row.final_clusters = tr.final_state.clusters;
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

namespace {

const AblationRow& find_row(const std::vector<AblationRow>& rows, const AblationSetting& s) {
  for (const auto& r : rows)
    if (r.setting == s) return r;
  throw ConfigError("ablation: missing row " + s.label());
}

std::string fmt(const char* pattern, double a, double b) {
  char buf[96];
  std::snprintf(buf, sizeof buf, pattern, a, b);
  return buf;
}

}  // namespace

std::vector<TrendCheck> ablation_trends(const std::vector<AblationRow>& rows, double wide_margin) {
  using L = AlignmentLoss;
  using P = PairSelectionMode;
  const P fixed = P::kFixedRandomNegatives, prog = P::kProgressiveHardNegatives;
  std::vector<TrendCheck> out;

  TrendCheck loss{"ms_beats_contrastive_map", true, ""};
  for (bool fusion : {false, true}) {
    const double c = find_row(rows, {L::kContrastive, fusion, fixed}).retrieval_map();
    const double m = find_row(rows, {L::kMultiSimilarity, fusion, fixed}).retrieval_map();
    loss.holds = loss.holds && m > c;
    loss.detail += fmt(fusion ? "fusion: ms %.4f vs contrastive %.4f" : "cosine: ms %.4f vs contrastive %.4f; ", m, c);
  }
  out.push_back(loss);

  TrendCheck fusion{"fusion_beats_cosine_acc", true, ""};
  {
    const double on = find_row(rows, {L::kContrastive, true, fixed}).matching_acc();
    const double off = find_row(rows, {L::kContrastive, false, fixed}).matching_acc();
    fusion.holds = on >= off + wide_margin;
    fusion.detail = fmt("contrastive: fusion %.4f vs cosine %.4f; ", on, off);
  }
  for (P sel : {fixed, prog}) {
    const double on = find_row(rows, {L::kMultiSimilarity, true, sel}).matching_acc();
    const double off = find_row(rows, {L::kMultiSimilarity, false, sel}).matching_acc();
    fusion.holds = fusion.holds && on >= off;
    fusion.detail += fmt(sel == fixed ? "ms fixed: fusion %.4f vs cosine %.4f; " : "ms progressive: fusion %.4f vs cosine %.4f",
                         on, off);
  }
  out.push_back(fusion);

  TrendCheck selection{"progressive_not_below_fixed_map", true, ""};
  for (bool f : {false, true}) {
    const double p = find_row(rows, {L::kMultiSimilarity, f, prog}).retrieval_map();
    const double x = find_row(rows, {L::kMultiSimilarity, f, fixed}).retrieval_map();
    selection.holds = selection.holds && p >= x;
    selection.detail += fmt(f ? "fusion: progressive %.4f vs fixed %.4f" : "cosine: progressive %.4f vs fixed %.4f; ", p, x);
  }
  out.push_back(selection);
  return out;
}

Json to_json(const AblationRow& row) {
  return {{"setting", row.setting.label()},
          {"loss", row.setting.loss == AlignmentLoss::kMultiSimilarity ? "ms" : "contrastive"},
          {"fusion_scoring", row.setting.fusion_scoring},
          {"pair_selection", row.setting.pair_selection == PairSelectionMode::kProgressiveHardNegatives
                                 ? "progressive_hard_negatives"
                                 : "fixed_random_negatives"},
          {"best_epoch", row.best_epoch},
          {"final_clusters", row.final_clusters},
          {"report", to_json(row.report)}};
}

std::string ablation_markdown(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "| Alignment loss | Fusion scoring | Pair selection | ACC V2F (U) | ACC F2V (U) | mAP V2F | mAP F2V |\n"
     << "|---|---|---|---|---|---|---|\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "| %s | %s | %s | %.2f | %.2f | %.2f | %.2f |\n",
                  r.setting.loss == AlignmentLoss::kMultiSimilarity ? "multi-similarity" : "contrastive",
                  r.setting.fusion_scoring ? "yes" : "no",
                  r.setting.pair_selection == PairSelectionMode::kProgressiveHardNegatives ? "progressive + hard"
                                                                                            : "fixed + random",
                  100 * r.report.acc_v2f_u.value(), 100 * r.report.acc_f2v_u.value(), 100 * r.report.map_v2f.value(),
                  100 * r.report.map_f2v.value());
    os << buf;
  }
  return os.str();
}

}  // namespace faa
