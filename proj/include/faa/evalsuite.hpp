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
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "faa/json_config.hpp"
#include "faa/model.hpp"
#include "faa/synthworld.hpp"

namespace faa {

// ---- Metric primitives ----------------------------------------------------

// Mann-Whitney U / (n_pos * n_neg), ties counted half. Throws
// DegenerateInputError unless both classes are present.
double auc(std::span<const double> scores, std::span<const int> labels);

// Point where the false-accept and false-reject rates meet, linearly
// interpolated between adjacent ROC operating points.
double eer(std::span<const double> scores, std::span<const int> labels);

// Mean of precision@rank over the relevant items of a full ranking.
// `order` lists gallery indices best first; returns 0 when nothing is relevant.
double average_precision(std::span<const std::size_t> order, const std::vector<bool>& relevant);

// Gallery ranked by the first-stage scores (ties to the lower index), then the
// top `k` re-sorted by the second stage. Ties in the second stage keep the
// first-stage order. `k` is clamped to the gallery size.
std::vector<std::size_t> two_stage_ranking(
    std::span<const double> first_stage,
    const std::function<std::vector<double>(std::span<const std::size_t>)>& second_stage, std::size_t k);

// ---- Samples and trials -----------------------------------------------------

enum class Protocol { kVerification, kMatching, kRetrieval };
enum class Direction { kVoiceToFace, kFaceToVoice, kSymmetric };
enum class Restriction { kUnrestricted, kSameGroup };

std::string direction_name(Direction d);
std::string restriction_name(Restriction r);

// Every face and voice sample of a partition, flattened.
struct SampleIndex {
  Tensor faces, voices;
  std::vector<std::uint64_t> face_identity, voice_identity;
  std::vector<int> face_group, voice_group;

  std::size_t num_faces() const { return face_identity.size(); }
  std::size_t num_voices() const { return voice_identity.size(); }
};

SampleIndex index_samples(std::span<const VideoRecord> videos);

struct VerificationTrial {
  std::size_t face = 0, voice = 0;
  int label = 0;
};

struct MatchingTrial {
  std::size_t probe = 0;
  std::size_t candidates[2] = {0, 0};
  std::size_t answer = 0;  // index into candidates
};

struct RetrievalTrial {
  std::size_t probe = 0;
  std::vector<bool> relevant;  // one flag per gallery sample
};

struct TrialList {
  Protocol protocol = Protocol::kVerification;
  Direction direction = Direction::kSymmetric;
  Restriction restriction = Restriction::kUnrestricted;
  std::uint64_t seed = 0;
  std::vector<VerificationTrial> verification;
  std::vector<MatchingTrial> matching;
  std::vector<RetrievalTrial> retrieval;

  std::size_t size() const;
};

// Verification: `count` positives then `count` negatives. Matching: `count`
// trials with the answer slot drawn at random. Retrieval: every probe-side
// sample against the full opposite-modality gallery; `count` is ignored.
// Same-group restriction throws ConfigError unless every group holds at least
// two identities.
TrialList build_trials(const SampleIndex& samples, Protocol protocol, Direction direction, Restriction restriction,
                       std::size_t count, std::uint64_t seed);

// ---- Scorers ---------------------------------------------------------------

// Scores (face sample, voice sample) pairs; higher means more likely the same
// identity.
class PairScorer {
 public:
  virtual ~PairScorer() = default;
  virtual std::vector<double> score(std::span<const std::size_t> faces, std::span<const std::size_t> voices) const = 0;
};

enum class Scoring { kFusion, kCosine, kOracle };
std::string scoring_name(Scoring s);
Scoring parse_scoring(const std::string& name);

// Embeds the samples once with the model's encoders.
std::unique_ptr<PairScorer> make_scorer(Scoring kind, const Model* model, const SampleIndex& samples);

double verification_auc(const TrialList& trials, const PairScorer& scorer);
double verification_eer(const TrialList& trials, const PairScorer& scorer);
// Exact score ties between the two candidates earn half credit.
double matching_accuracy(const TrialList& trials, const PairScorer& scorer);
double retrieval_map(const TrialList& trials, const PairScorer& shortlist, const PairScorer& rerank,
                     std::size_t shortlist_k);

// ---- Report ----------------------------------------------------------------

struct EvalConfig {
  std::size_t verification_pairs = 2000;  // per class
  std::size_t matching_trials = 2000;
  std::size_t shortlist_k = 50;
  std::uint64_t seed = 2024;
  bool verification = true, matching = true, retrieval = true;

  void validate() const;
  friend bool operator==(const EvalConfig&, const EvalConfig&) = default;
};

Json to_json(const EvalConfig& c);
EvalConfig eval_config_from_json(const Json& j);

struct EvalReport {
  Scoring scoring = Scoring::kFusion;
  std::optional<double> auc_u, auc_g, eer_u;
  std::optional<double> acc_v2f_u, acc_v2f_g, acc_f2v_u, acc_f2v_g;
  std::optional<double> map_v2f, map_f2v;
  // Mean fraction of relevant gallery items, the expected AP of a random ranking.
  std::optional<double> map_random_v2f, map_random_f2v;
  Json trial_counts = Json::object();
  std::uint64_t seed = 0;
  std::string config_hash, checkpoint_hash;
};

// Runs the selected protocols on `samples`. `model` may be null only for the
// oracle scorer.
EvalReport evaluate(const Model* model, const SampleIndex& samples, const EvalConfig& config, Scoring scoring);

Json to_json(const EvalReport& r);

// FNV-1a 64, rendered as 16 hex digits.
std::string fnv1a_hex(std::span<const unsigned char> bytes);
std::string fnv1a_hex(const std::string& text);

}  // namespace faa
