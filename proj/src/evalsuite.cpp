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

#include "faa/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>

#include "faa/errors.hpp"
#include "faa/rng.hpp"

namespace faa {

namespace {

void check_binary(std::span<const double> scores, std::span<const int> labels, const char* what,
                  std::size_t& pos, std::size_t& neg) {
  if (scores.size() != labels.size()) throw DimensionError(std::string(what) + ": scores and labels differ in length");
  pos = neg = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw DegenerateInputError(std::string(what) + ": labels must be 0 or 1");
    if (!std::isfinite(scores[i])) throw DegenerateInputError(std::string(what) + ": non-finite score");
    (labels[i] ? pos : neg)++;
  }
  if (pos == 0 || neg == 0) throw DegenerateInputError(std::string(what) + ": both classes must be present");
}

std::vector<std::size_t> descending_order(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

}  // namespace

double auc(std::span<const double> scores, std::span<const int> labels) {
  std::size_t pos, neg;
  check_binary(scores, labels, "auc", pos, neg);
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the U statistic stays an integer, so the ratio is exact.
  std::uint64_t twice_u = 0, neg_below = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    std::uint64_t p = 0, q = 0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) (labels[idx[j++]] ? p : q)++;
    twice_u += 2 * p * neg_below + p * q;
    neg_below += q;
    i = j;
  }
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

double eer(std::span<const double> scores, std::span<const int> labels) {
  std::size_t pos, neg;
  check_binary(scores, labels, "eer", pos, neg);
  const std::vector<std::size_t> idx = descending_order(scores);
  double far0 = 0.0, frr0 = 1.0;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) (labels[idx[j++]] ? tp : fp)++;
    i = j;
    const double far1 = static_cast<double>(fp) / static_cast<double>(neg);
    const double frr1 = 1.0 - static_cast<double>(tp) / static_cast<double>(pos);
    const double d0 = frr0 - far0, d1 = frr1 - far1;
    if (d1 <= 0.0) return far0 + d0 / (d0 - d1) * (far1 - far0);
    far0 = far1;
    frr0 = frr1;
  }
  throw ContractError("eer: ROC never crossed the diagonal");
}

double average_precision(std::span<const std::size_t> order, const std::vector<bool>& relevant) {
  const std::size_t total = static_cast<std::size_t>(std::count(relevant.begin(), relevant.end(), true));
  if (total == 0) return 0.0;
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (!relevant.at(order[r])) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  return sum / static_cast<double>(total);
}

std::vector<std::size_t> two_stage_ranking(
    std::span<const double> first_stage,
    const std::function<std::vector<double>(std::span<const std::size_t>)>& second_stage, std::size_t k) {
  if (first_stage.empty()) throw DegenerateInputError("two_stage_ranking: empty gallery");
  if (k < 1) throw ConfigError("shortlist_k: must be >= 1");
  std::vector<std::size_t> order = descending_order(first_stage);
  k = std::min(k, order.size());
  const std::vector<std::size_t> head(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  const std::vector<double> rescored = second_stage(head);
  if (rescored.size() != k) throw DimensionError("two_stage_ranking: second stage returned the wrong count");
  std::vector<std::size_t> pos(k);
  std::iota(pos.begin(), pos.end(), 0);
  std::stable_sort(pos.begin(), pos.end(), [&](std::size_t a, std::size_t b) { return rescored[a] > rescored[b]; });
  for (std::size_t r = 0; r < k; ++r) order[r] = head[pos[r]];
  return order;
}

std::string direction_name(Direction d) {
  switch (d) {
    case Direction::kVoiceToFace: return "v2f";
    case Direction::kFaceToVoice: return "f2v";
    case Direction::kSymmetric: return "symmetric";
  }
  return "?";
}

std::string restriction_name(Restriction r) { return r == Restriction::kUnrestricted ? "u" : "g"; }

SampleIndex index_samples(std::span<const VideoRecord> videos) {
  if (videos.empty()) throw DegenerateInputError("index_samples: no videos");
  SampleIndex s;
  std::vector<double> f, v;
  std::size_t fd = 0, vd = 0;
  for (const VideoRecord& rec : videos) {
    fd = rec.faces.cols();
    vd = rec.voices.cols();
    f.insert(f.end(), rec.faces.data().begin(), rec.faces.data().end());
    v.insert(v.end(), rec.voices.data().begin(), rec.voices.data().end());
    for (std::size_t i = 0; i < rec.faces.rows(); ++i) {
      s.face_identity.push_back(rec.identity_id);
      s.face_group.push_back(rec.group);
    }
    for (std::size_t i = 0; i < rec.voices.rows(); ++i) {
      s.voice_identity.push_back(rec.identity_id);
      s.voice_group.push_back(rec.group);
    }
  }
  s.faces = Tensor({s.face_identity.size(), fd}, std::move(f));
  s.voices = Tensor({s.voice_identity.size(), vd}, std::move(v));
  return s;
}

std::size_t TrialList::size() const {
  switch (protocol) {
    case Protocol::kVerification: return verification.size();
    case Protocol::kMatching: return matching.size();
    case Protocol::kRetrieval: return retrieval.size();
  }
  return 0;
}

namespace {

// Samples of one modality grouped by identity, in identity order.
struct Pools {
  std::map<std::uint64_t, std::vector<std::size_t>> by_identity;
  std::map<std::uint64_t, int> group_of;
};

Pools pools(std::span<const std::uint64_t> ids, std::span<const int> groups) {
  Pools p;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    p.by_identity[ids[i]].push_back(i);
    p.group_of[ids[i]] = groups[i];
  }
  return p;
}

void require_group_pairs(const SampleIndex& s) {
  std::map<int, std::set<std::uint64_t>> members;
  for (std::size_t i = 0; i < s.num_faces(); ++i) members[s.face_group[i]].insert(s.face_identity[i]);
  for (std::size_t i = 0; i < s.num_voices(); ++i) members[s.voice_group[i]].insert(s.voice_identity[i]);
  for (const auto& [group, ids] : members)
    if (ids.size() < 2)
      throw ConfigError("restriction g: group " + std::to_string(group) + " has " + std::to_string(ids.size()) +
                        " identity; at least 2 are needed");
}

// Draws `count` items from `n` candidates: without replacement when n >= count.
std::vector<std::size_t> draw(Rng& rng, std::size_t n, std::size_t count) {
  std::vector<std::size_t> out;
  if (n == 0) return out;
  if (count <= n) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    for (std::size_t i = 0; i < count; ++i) std::swap(all[i], all[i + rng.uniform_index(n - i)]);
    out.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(count));
  } else {
    for (std::size_t i = 0; i < count; ++i) out.push_back(rng.uniform_index(n));
  }
  return out;
}

bool allowed_negative(const SampleIndex& s, Restriction r, std::size_t face, std::size_t voice) {
  if (s.face_identity[face] == s.voice_identity[voice]) return false;
  return r == Restriction::kUnrestricted || s.face_group[face] == s.voice_group[voice];
}

}  // namespace

TrialList build_trials(const SampleIndex& s, Protocol protocol, Direction direction, Restriction restriction,
                       std::size_t count, std::uint64_t seed) {
  if (s.num_faces() == 0 || s.num_voices() == 0) throw DegenerateInputError("build_trials: empty sample index");
  if (restriction == Restriction::kSameGroup) require_group_pairs(s);
  TrialList t;
  t.protocol = protocol;
  t.direction = direction;
  t.restriction = restriction;
  t.seed = seed;
  Rng rng(seed);

  if (protocol == Protocol::kVerification) {
    if (count < 1) throw ConfigError("verification_pairs: must be >= 1");
    std::vector<std::pair<std::size_t, std::size_t>> positives, negatives;
    for (std::size_t f = 0; f < s.num_faces(); ++f) {
      for (std::size_t v = 0; v < s.num_voices(); ++v) {
        if (s.face_identity[f] == s.voice_identity[v])
          positives.emplace_back(f, v);
        else if (allowed_negative(s, restriction, f, v))
          negatives.emplace_back(f, v);
      }
    }
    if (negatives.empty()) throw ConfigError("build_trials: no eligible negative pairs");
    for (std::size_t i : draw(rng, positives.size(), count))
      t.verification.push_back({positives[i].first, positives[i].second, 1});
    for (std::size_t i : draw(rng, negatives.size(), count))
      t.verification.push_back({negatives[i].first, negatives[i].second, 0});
    return t;
  }

  if (direction == Direction::kSymmetric) throw ConfigError("build_trials: matching and retrieval need a direction");
  const bool voice_probe = direction == Direction::kVoiceToFace;
  const auto& probe_ids = voice_probe ? s.voice_identity : s.face_identity;
  const auto& probe_groups = voice_probe ? s.voice_group : s.face_group;
  const Pools targets = voice_probe ? pools(s.face_identity, s.face_group) : pools(s.voice_identity, s.voice_group);

  if (protocol == Protocol::kRetrieval) {
    const auto& target_ids = voice_probe ? s.face_identity : s.voice_identity;
    for (std::size_t p = 0; p < probe_ids.size(); ++p) {
      RetrievalTrial trial;
      trial.probe = p;
      trial.relevant.resize(target_ids.size());
      for (std::size_t g = 0; g < target_ids.size(); ++g) trial.relevant[g] = target_ids[g] == probe_ids[p];
      t.retrieval.push_back(std::move(trial));
    }
    return t;
  }

  if (count < 1) throw ConfigError("matching_trials: must be >= 1");
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t probe = rng.uniform_index(probe_ids.size());
    const std::uint64_t id = probe_ids[probe];
    std::vector<std::uint64_t> imposters;
    for (const auto& [other, group] : targets.group_of) {
      if (other == id) continue;
      if (restriction == Restriction::kSameGroup && group != probe_groups[probe]) continue;
      imposters.push_back(other);
    }
    auto own = targets.by_identity.find(id);
    if (own == targets.by_identity.end() || imposters.empty())
      throw ConfigError("build_trials: identity " + std::to_string(id) + " has no valid matching candidates");
    const auto& imposter_pool = targets.by_identity.at(imposters[rng.uniform_index(imposters.size())]);
    const std::size_t correct = own->second[rng.uniform_index(own->second.size())];
    const std::size_t wrong = imposter_pool[rng.uniform_index(imposter_pool.size())];
    MatchingTrial trial;
    trial.probe = probe;
    trial.answer = rng.uniform_index(2);
    trial.candidates[trial.answer] = correct;
    trial.candidates[1 - trial.answer] = wrong;
    t.matching.push_back(trial);
  }
  return t;
}

std::string scoring_name(Scoring s) {
  switch (s) {
    case Scoring::kFusion: return "fusion";
    case Scoring::kCosine: return "cosine";
    case Scoring::kOracle: return "oracle";
  }
  return "?";
}

Scoring parse_scoring(const std::string& name) {
  if (name == "fusion") return Scoring::kFusion;
  if (name == "cosine") return Scoring::kCosine;
  if (name == "oracle") return Scoring::kOracle;
  throw ConfigError("scoring: expected fusion, cosine or oracle, got '" + name + "'");
}

namespace {

void check_pair_lists(std::span<const std::size_t> faces, std::span<const std::size_t> voices) {
  if (faces.size() != voices.size()) throw DimensionError("scorer: face and voice index lists differ in length");
}

class OracleScorer : public PairScorer {
 public:
  explicit OracleScorer(const SampleIndex& s) : s_(s) {}
  std::vector<double> score(std::span<const std::size_t> f, std::span<const std::size_t> v) const override {
    check_pair_lists(f, v);
    std::vector<double> out(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) out[i] = s_.face_identity.at(f[i]) == s_.voice_identity.at(v[i]);
    return out;
  }

 private:
  const SampleIndex& s_;
};

class EmbeddingScorer : public PairScorer {
 public:
  EmbeddingScorer(const Model& model, const SampleIndex& s, bool fusion)
      : model_(model),
        faces_(embed(model, Modality::kFace, s.faces)),
        voices_(embed(model, Modality::kVoice, s.voices)),
        fusion_(fusion) {}

  std::vector<double> score(std::span<const std::size_t> f, std::span<const std::size_t> v) const override {
    check_pair_lists(f, v);
    if (fusion_) return fusion_scores(model_, take_rows(faces_, f), take_rows(voices_, v));
    std::vector<double> out(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
      auto a = faces_.row(f[i]);
      auto b = voices_.row(v[i]);
      double dot = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) dot += a[k] * b[k];
      out[i] = dot;
    }
    return out;
  }

 private:
  const Model& model_;
  Tensor faces_, voices_;
  bool fusion_;
};

}  // namespace

std::unique_ptr<PairScorer> make_scorer(Scoring kind, const Model* model, const SampleIndex& samples) {
  if (kind == Scoring::kOracle) return std::make_unique<OracleScorer>(samples);
  if (model == nullptr) throw ContractError("make_scorer: " + scoring_name(kind) + " scoring needs a model");
  return std::make_unique<EmbeddingScorer>(*model, samples, kind == Scoring::kFusion);
}

namespace {

void verification_scores(const TrialList& t, const PairScorer& scorer, std::vector<double>& scores,
                         std::vector<int>& labels) {
  if (t.protocol != Protocol::kVerification) throw ContractError("expected a verification trial list");
  std::vector<std::size_t> f, v;
  for (const auto& tr : t.verification) {
    f.push_back(tr.face);
    v.push_back(tr.voice);
    labels.push_back(tr.label);
  }
  scores = scorer.score(f, v);
}

}  // namespace

double verification_auc(const TrialList& t, const PairScorer& scorer) {
  std::vector<double> s;
  std::vector<int> y;
  verification_scores(t, scorer, s, y);
  return auc(s, y);
}

double verification_eer(const TrialList& t, const PairScorer& scorer) {
  std::vector<double> s;
  std::vector<int> y;
  verification_scores(t, scorer, s, y);
  return eer(s, y);
}

double matching_accuracy(const TrialList& t, const PairScorer& scorer) {
  if (t.protocol != Protocol::kMatching) throw ContractError("expected a matching trial list");
  if (t.matching.empty()) throw DegenerateInputError("matching_accuracy: no trials");
  const bool voice_probe = t.direction == Direction::kVoiceToFace;
  std::vector<std::size_t> f, v;
  for (const auto& tr : t.matching) {
    for (std::size_t c : tr.candidates) {
      f.push_back(voice_probe ? c : tr.probe);
      v.push_back(voice_probe ? tr.probe : c);
    }
  }
  const std::vector<double> s = scorer.score(f, v);
  double correct = 0.0;
  for (std::size_t i = 0; i < t.matching.size(); ++i) {
    const double a = s[2 * i + t.matching[i].answer], b = s[2 * i + 1 - t.matching[i].answer];
    correct += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
  }
  return correct / static_cast<double>(t.matching.size());
}

double retrieval_map(const TrialList& t, const PairScorer& shortlist, const PairScorer& rerank, std::size_t k) {
  if (t.protocol != Protocol::kRetrieval) throw ContractError("expected a retrieval trial list");
  if (t.retrieval.empty()) throw DegenerateInputError("retrieval_map: no probes");
  const bool voice_probe = t.direction == Direction::kVoiceToFace;
  double total = 0.0;
  for (const RetrievalTrial& tr : t.retrieval) {
    const std::size_t g = tr.relevant.size();
    auto pairs = [&](std::span<const std::size_t> gallery, const PairScorer& scorer) {
      std::vector<std::size_t> probe(gallery.size(), tr.probe);
      return voice_probe ? scorer.score(gallery, probe) : scorer.score(probe, gallery);
    };
    std::vector<std::size_t> all(g);
    std::iota(all.begin(), all.end(), 0);
    const std::vector<double> first = pairs(all, shortlist);
    const auto order =
        two_stage_ranking(first, [&](std::span<const std::size_t> head) { return pairs(head, rerank); }, k);
    total += average_precision(order, tr.relevant);
  }
  return total / static_cast<double>(t.retrieval.size());
}

void EvalConfig::validate() const {
  if (verification_pairs < 1) throw ConfigError("eval.verification_pairs: must be >= 1");
  if (matching_trials < 1) throw ConfigError("eval.matching_trials: must be >= 1");
  if (shortlist_k < 1) throw ConfigError("eval.shortlist_k: must be >= 1");
  if (!verification && !matching && !retrieval) throw ConfigError("eval: no protocol selected");
}

Json to_json(const EvalConfig& c) {
  return Json{{"verification_pairs", c.verification_pairs},
              {"matching_trials", c.matching_trials},
              {"shortlist_k", c.shortlist_k},
              {"seed", c.seed}};
}

EvalConfig eval_config_from_json(const Json& j) {
  using json_detail::read;
  json_detail::reject_unknown(j, "eval", {"verification_pairs", "matching_trials", "shortlist_k", "seed"});
  EvalConfig c;
  read(j, "eval", "verification_pairs", c.verification_pairs);
  read(j, "eval", "matching_trials", c.matching_trials);
  read(j, "eval", "shortlist_k", c.shortlist_k);
  read(j, "eval", "seed", c.seed);
  c.validate();
  return c;
}

EvalReport evaluate(const Model* model, const SampleIndex& samples, const EvalConfig& config, Scoring scoring) {
  config.validate();
  EvalReport r;
  r.scoring = scoring;
  r.seed = config.seed;
  const std::unique_ptr<PairScorer> scorer = make_scorer(scoring, model, samples);
  // Retrieval shortlists by embedding similarity unless the oracle is asked for.
  const std::unique_ptr<PairScorer> cosine =
      scoring == Scoring::kOracle ? make_scorer(Scoring::kOracle, nullptr, samples)
                                  : make_scorer(Scoring::kCosine, model, samples);
  auto seed_for = [&](Protocol p, Direction d, Restriction x) {
    return derive_seed(config.seed, {static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(d),
                                     static_cast<std::uint64_t>(x)});
  };

  if (config.verification) {
    for (Restriction x : {Restriction::kUnrestricted, Restriction::kSameGroup}) {
      const TrialList t = build_trials(samples, Protocol::kVerification, Direction::kSymmetric, x,
                                       config.verification_pairs, seed_for(Protocol::kVerification, Direction::kSymmetric, x));
      r.trial_counts["verification_" + restriction_name(x)] = t.size();
      std::vector<double> s;
      std::vector<int> y;
      verification_scores(t, *scorer, s, y);
      if (x == Restriction::kUnrestricted) {
        r.auc_u = auc(s, y);
        r.eer_u = eer(s, y);
      } else {
        r.auc_g = auc(s, y);
      }
    }
  }
  if (config.matching) {
    for (Direction d : {Direction::kVoiceToFace, Direction::kFaceToVoice}) {
      for (Restriction x : {Restriction::kUnrestricted, Restriction::kSameGroup}) {
        const TrialList t =
            build_trials(samples, Protocol::kMatching, d, x, config.matching_trials, seed_for(Protocol::kMatching, d, x));
        r.trial_counts["matching_" + direction_name(d) + "_" + restriction_name(x)] = t.size();
        const double acc = matching_accuracy(t, *scorer);
        const bool v2f = d == Direction::kVoiceToFace, u = x == Restriction::kUnrestricted;
        (v2f ? (u ? r.acc_v2f_u : r.acc_v2f_g) : (u ? r.acc_f2v_u : r.acc_f2v_g)) = acc;
      }
    }
  }
  if (config.retrieval) {
    for (Direction d : {Direction::kVoiceToFace, Direction::kFaceToVoice}) {
      const TrialList t = build_trials(samples, Protocol::kRetrieval, d, Restriction::kUnrestricted, 0,
                                       seed_for(Protocol::kRetrieval, d, Restriction::kUnrestricted));
      r.trial_counts["retrieval_" + direction_name(d)] = t.size();
      const double map = retrieval_map(t, *cosine, *scorer, config.shortlist_k);
      double baseline = 0.0;
      for (const RetrievalTrial& tr : t.retrieval)
        baseline += static_cast<double>(std::count(tr.relevant.begin(), tr.relevant.end(), true)) /
                    static_cast<double>(tr.relevant.size());
      baseline /= static_cast<double>(t.retrieval.size());
      if (d == Direction::kVoiceToFace) {
        r.map_v2f = map;
        r.map_random_v2f = baseline;
      } else {
        r.map_f2v = map;
        r.map_random_f2v = baseline;
      }
    }
  }
  return r;
}

Json to_json(const EvalReport& r) {
  Json metrics = Json::object();
  auto put = [&](const char* key, const std::optional<double>& v) {
    if (v) metrics[key] = *v;
  };
  put("auc_u", r.auc_u);
  put("auc_g", r.auc_g);
  put("eer_u", r.eer_u);
  put("acc_v2f_u", r.acc_v2f_u);
  put("acc_v2f_g", r.acc_v2f_g);
  put("acc_f2v_u", r.acc_f2v_u);
  put("acc_f2v_g", r.acc_f2v_g);
  put("map_v2f", r.map_v2f);
  put("map_f2v", r.map_f2v);
  Json baselines = Json::object();
  if (r.map_random_v2f) baselines["map_v2f"] = *r.map_random_v2f;
  if (r.map_random_f2v) baselines["map_f2v"] = *r.map_random_f2v;
  return Json{{"format", "faa-eval-report"},
              {"version", 1},
              {"scoring", scoring_name(r.scoring)},
              {"metrics", metrics},
              {"random_baselines", baselines},
              {"trial_counts", r.trial_counts},
              {"seed", r.seed},
              {"config_hash", r.config_hash},
              {"checkpoint_hash", r.checkpoint_hash}};
}

std::string fnv1a_hex(std::span<const unsigned char> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string fnv1a_hex(const std::string& text) {
  return fnv1a_hex(std::span<const unsigned char>(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

}  // namespace faa
