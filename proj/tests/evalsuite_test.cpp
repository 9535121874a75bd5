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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "faa/errors.hpp"
#include "faa/evalsuite.hpp"
#include "faa/rng.hpp"
#include "gtest/gtest.h"

namespace faa {
namespace {

// Pair counting: every (positive, negative) pair scores 2, 1 or 0.
double brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
  std::uint64_t twice = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        ++pairs;
        twice += s[i] > s[j] ? 2 : (s[i] == s[j] ? 1 : 0);
      }
  return static_cast<double>(twice) / (2.0 * static_cast<double>(pairs));
}

// Sweeps every distinct threshold, recomputing both error rates by counting,
// then bisects along the segment where they cross.
double sweep_eer(const std::vector<double>& s, const std::vector<int>& y) {
  std::vector<double> th(s.begin(), s.end());
  std::sort(th.begin(), th.end(), std::greater<>());
  th.erase(std::unique(th.begin(), th.end()), th.end());
  th.insert(th.begin(), std::numeric_limits<double>::infinity());
  const double pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
  const double neg = static_cast<double>(y.size()) - pos;
  auto rates = [&](double t) {
    double fa = 0, fr = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (y[i] == 0 && s[i] >= t) ++fa;
      if (y[i] == 1 && s[i] < t) ++fr;
    }
    return std::pair<double, double>(fa / neg, fr / pos);
  };
  for (std::size_t i = 1; i < th.size(); ++i) {
    const auto [fa0, fr0] = rates(th[i - 1]);
    const auto [fa1, fr1] = rates(th[i]);
    if (fr1 - fa1 > 0) continue;
    double lo = 0, hi = 1;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double gap = (fr0 + mid * (fr1 - fr0)) - (fa0 + mid * (fa1 - fa0));
      (gap > 0 ? lo : hi) = mid;
    }
    return fa0 + lo * (fa1 - fa0);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

// Precision at every relevant rank, from the definition.
double brute_ap(const std::vector<std::size_t>& order, const std::vector<bool>& rel) {
  double sum = 0;
  int total = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (!rel[order[r]]) continue;
    ++total;
    int hits = 0;
    for (std::size_t q = 0; q <= r; ++q) hits += rel[order[q]];
    sum += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  return total ? sum / total : 0.0;
}

void random_instance(Rng& rng, std::vector<double>& s, std::vector<int>& y) {
  const std::size_t n = 2 + rng.uniform_index(49);
  s.resize(n);
  y.resize(n);
  const bool coarse = rng.bernoulli(0.5);  // coarse scores force ties
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = coarse ? static_cast<double>(rng.uniform_index(5)) : rng.normal();
    y[i] = rng.bernoulli(0.5);
  }
  y[0] = 1;
  y[1] = 0;
}

TEST(Auc, HandValues) {
  EXPECT_EQ(auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1}), 0.75);
  EXPECT_EQ(auc(std::vector<double>{1, 2, 3, 4}, std::vector<int>{0, 0, 1, 1}), 1.0);
  EXPECT_EQ(auc(std::vector<double>{7, 7, 7, 7}, std::vector<int>{0, 1, 0, 1}), 0.5);
  EXPECT_THROW(auc(std::vector<double>{1, 2}, std::vector<int>{1, 1}), DegenerateInputError);
}

TEST(Auc, MatchesPairCountingExactly) {
  Rng rng(1);
  std::vector<double> s;
  std::vector<int> y;
  for (int trial = 0; trial < 1000; ++trial) {
    random_instance(rng, s, y);
    EXPECT_EQ(auc(s, y), brute_auc(s, y));
  }
}

TEST(Auc, ComplementAndMonotoneInvariance) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(30), neg(30), warped(30);
    std::vector<int> y(30);
    for (std::size_t i = 0; i < 30; ++i) {
      s[i] = rng.normal();
      neg[i] = -s[i];
      warped[i] = std::exp(3 * s[i]) + 1;
      y[i] = i % 2;
    }
    EXPECT_NEAR(auc(s, y) + auc(neg, y), 1.0, 1e-15);
    EXPECT_EQ(auc(s, y), auc(warped, y));
  }
}

TEST(Eer, HandValues) {
  EXPECT_EQ(eer(std::vector<double>{0.9, 0.8, 0.3, 0.2}, std::vector<int>{1, 0, 1, 0}), 0.5);
  EXPECT_EQ(eer(std::vector<double>{4, 3, 2, 1}, std::vector<int>{1, 1, 0, 0}), 0.0);
}

TEST(Eer, CoinFlipLabelsGiveOneHalf) {
  Rng rng(3);
  std::vector<double> s(10000);
  std::vector<int> y(10000);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = rng.uniform();
    y[i] = rng.bernoulli(0.5);
  }
  EXPECT_NEAR(eer(s, y), 0.5, 0.05);
}

TEST(Eer, MatchesThresholdSweep) {
  Rng rng(4);
  std::vector<double> s;
  std::vector<int> y;
  for (int trial = 0; trial < 1000; ++trial) {
    random_instance(rng, s, y);
    EXPECT_NEAR(eer(s, y), sweep_eer(s, y), 1e-9);
  }
}

TEST(Eer, SymmetricUnderNegationAndLabelFlip) {
  Rng rng(5);
  std::vector<double> s;
  std::vector<int> y;
  for (int trial = 0; trial < 300; ++trial) {
    random_instance(rng, s, y);
    std::vector<double> ns(s.size());
    std::vector<int> ny(y.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      ns[i] = -s[i];
      ny[i] = 1 - y[i];
    }
    EXPECT_NEAR(eer(s, y), eer(ns, ny), 1e-12);
  }
}

TEST(AveragePrecision, HandValues) {
  EXPECT_EQ(average_precision(std::vector<std::size_t>{0, 1, 2}, {true, false, false}), 1.0);
  EXPECT_NEAR(average_precision(std::vector<std::size_t>{0, 1, 2}, {true, false, true}), (1.0 + 2.0 / 3.0) / 2.0,
              1e-15);
  EXPECT_EQ(average_precision(std::vector<std::size_t>{0, 1}, {false, false}), 0.0);
}

TEST(AveragePrecision, MatchesDefinition) {
  Rng rng(6);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(50);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    std::vector<bool> rel(n);
    for (std::size_t i = 0; i < n; ++i) rel[i] = rng.bernoulli(0.3);
    EXPECT_EQ(average_precision(order, rel), brute_ap(order, rel));
  }
}

TEST(TwoStageRanking, SameScorerIsANoOp) {
  Rng rng(7);
  std::vector<double> s(40);
  for (double& v : s) v = static_cast<double>(rng.uniform_index(10));
  const auto same = [&](std::span<const std::size_t> idx) {
    std::vector<double> out;
    for (std::size_t i : idx) out.push_back(s[i]);
    return out;
  };
  const auto plain = two_stage_ranking(s, same, 1);
  for (std::size_t k : {1u, 5u, 40u, 100u}) EXPECT_EQ(two_stage_ranking(s, same, k), plain);
}

TEST(TwoStageRanking, FullShortlistFollowsSecondStage) {
  Rng rng(8);
  std::vector<double> first(25), second(25);
  for (std::size_t i = 0; i < 25; ++i) {
    first[i] = rng.normal();
    second[i] = rng.normal();
  }
  const auto rescore = [&](std::span<const std::size_t> idx) {
    std::vector<double> out;
    for (std::size_t i : idx) out.push_back(second[i]);
    return out;
  };
  std::vector<double> other_first(25);
  for (double& v : other_first) v = rng.normal();
  EXPECT_EQ(two_stage_ranking(first, rescore, 25), two_stage_ranking(other_first, rescore, 25));
  const auto head = two_stage_ranking(first, rescore, 3);
  std::vector<std::size_t> cosine_order(25);
  std::iota(cosine_order.begin(), cosine_order.end(), 0);
  std::stable_sort(cosine_order.begin(), cosine_order.end(),
                   [&](std::size_t a, std::size_t b) { return first[a] > first[b]; });
  EXPECT_EQ(std::set<std::size_t>(head.begin(), head.begin() + 3),
            std::set<std::size_t>(cosine_order.begin(), cosine_order.begin() + 3));
  EXPECT_TRUE(std::equal(head.begin() + 3, head.end(), cosine_order.begin() + 3));
}

class TrialTest : public ::testing::Test {
 protected:
  void SetUp() override {
    world_ = generate_world(WorldConfig{});
    samples_ = index_samples(world_.partition(Partition::kTest));
  }
  Dataset world_;
  SampleIndex samples_;
};

class ConstantScorer : public PairScorer {
 public:
  std::vector<double> score(std::span<const std::size_t> f, std::span<const std::size_t>) const override {
    return std::vector<double>(f.size(), 0.3);
  }
};

class AntiOracle : public PairScorer {
 public:
  explicit AntiOracle(const SampleIndex& s) : s_(s) {}
  std::vector<double> score(std::span<const std::size_t> f, std::span<const std::size_t> v) const override {
    std::vector<double> out;
    for (std::size_t i = 0; i < f.size(); ++i) out.push_back(s_.face_identity[f[i]] != s_.voice_identity[v[i]]);
    return out;
  }

 private:
  const SampleIndex& s_;
};

TEST_F(TrialTest, VerificationIsBalancedAndSeeded) {
  for (Restriction r : {Restriction::kUnrestricted, Restriction::kSameGroup}) {
    const TrialList t = build_trials(samples_, Protocol::kVerification, Direction::kSymmetric, r, 500, 9);
    ASSERT_EQ(t.verification.size(), 1000u);
    std::size_t pos = 0;
    for (const auto& tr : t.verification) {
      pos += tr.label;
      EXPECT_EQ(tr.label == 1, samples_.face_identity[tr.face] == samples_.voice_identity[tr.voice]);
      if (r == Restriction::kSameGroup) EXPECT_EQ(samples_.face_group[tr.face], samples_.voice_group[tr.voice]);
    }
    EXPECT_EQ(pos, 500u);
    const TrialList again = build_trials(samples_, Protocol::kVerification, Direction::kSymmetric, r, 500, 9);
    for (std::size_t i = 0; i < t.verification.size(); ++i) {
      EXPECT_EQ(t.verification[i].face, again.verification[i].face);
      EXPECT_EQ(t.verification[i].voice, again.verification[i].voice);
    }
  }
}

TEST_F(TrialTest, MatchingHasOneCorrectCandidate) {
  for (Direction d : {Direction::kVoiceToFace, Direction::kFaceToVoice}) {
    for (Restriction r : {Restriction::kUnrestricted, Restriction::kSameGroup}) {
      const TrialList t = build_trials(samples_, Protocol::kMatching, d, r, 400, 10);
      const bool vp = d == Direction::kVoiceToFace;
      std::size_t answer_first = 0;
      for (const auto& tr : t.matching) {
        const std::uint64_t pid = vp ? samples_.voice_identity[tr.probe] : samples_.face_identity[tr.probe];
        const int pg = vp ? samples_.voice_group[tr.probe] : samples_.face_group[tr.probe];
        auto id = [&](std::size_t c) { return vp ? samples_.face_identity[c] : samples_.voice_identity[c]; };
        auto grp = [&](std::size_t c) { return vp ? samples_.face_group[c] : samples_.voice_group[c]; };
        EXPECT_EQ(id(tr.candidates[tr.answer]), pid);
        EXPECT_NE(id(tr.candidates[1 - tr.answer]), pid);
        if (r == Restriction::kSameGroup) {
          EXPECT_EQ(grp(tr.candidates[0]), pg);
          EXPECT_EQ(grp(tr.candidates[1]), pg);
        }
        answer_first += tr.answer == 0;
      }
      EXPECT_GT(answer_first, 150u);
      EXPECT_LT(answer_first, 250u);
    }
  }
}

TEST_F(TrialTest, MatchingScorerConventions) {
  const TrialList t = build_trials(samples_, Protocol::kMatching, Direction::kVoiceToFace, Restriction::kUnrestricted,
                                   300, 11);
  EXPECT_EQ(matching_accuracy(t, *make_scorer(Scoring::kOracle, nullptr, samples_)), 1.0);
  EXPECT_EQ(matching_accuracy(t, ConstantScorer{}), 0.5);
  EXPECT_EQ(matching_accuracy(t, AntiOracle{samples_}), 0.0);
}

TEST_F(TrialTest, RetrievalCoversTheWholeGallery) {
  const TrialList t = build_trials(samples_, Protocol::kRetrieval, Direction::kFaceToVoice, Restriction::kUnrestricted,
                                   0, 12);
  ASSERT_EQ(t.retrieval.size(), samples_.num_faces());
  for (const auto& tr : t.retrieval) {
    ASSERT_EQ(tr.relevant.size(), samples_.num_voices());
    EXPECT_EQ(static_cast<std::size_t>(std::count(tr.relevant.begin(), tr.relevant.end(), true)),
              world_.config.videos_per_identity * world_.config.voices_per_video);
  }
  const auto oracle = make_scorer(Scoring::kOracle, nullptr, samples_);
  EXPECT_EQ(retrieval_map(t, *oracle, *oracle, 50), 1.0);
}

TEST_F(TrialTest, SameGroupNeedsTwoIdentitiesPerGroup) {
  std::vector<VideoRecord> videos = world_.partition(Partition::kTest);
  const int lone_group = videos.front().group;
  const std::uint64_t keep = videos.front().identity_id;
  std::erase_if(videos, [&](const VideoRecord& v) { return v.group == lone_group && v.identity_id != keep; });
  const SampleIndex lone = index_samples(videos);
  EXPECT_THROW(build_trials(lone, Protocol::kMatching, Direction::kVoiceToFace, Restriction::kSameGroup, 10, 1),
               ConfigError);
  EXPECT_NO_THROW(
      build_trials(lone, Protocol::kMatching, Direction::kVoiceToFace, Restriction::kUnrestricted, 10, 1));
}

TEST_F(TrialTest, OracleReportIsPerfectAndComplete) {
  const EvalReport r = evaluate(nullptr, samples_, EvalConfig{}, Scoring::kOracle);
  const Json j = to_json(r);
  EXPECT_EQ(j["metrics"].size(), 9u);
  for (const char* key : {"auc_u", "auc_g", "acc_v2f_u", "acc_v2f_g", "acc_f2v_u", "acc_f2v_g", "map_v2f", "map_f2v"})
    EXPECT_EQ(j["metrics"][key].get<double>(), 1.0) << key;
  EXPECT_EQ(j["metrics"]["eer_u"].get<double>(), 0.0);
  EXPECT_EQ(j.dump(), to_json(evaluate(nullptr, samples_, EvalConfig{}, Scoring::kOracle)).dump());
}

TEST_F(TrialTest, UntrainedFusionIsUninformative) {
  const Model model = init_model(ModelConfig{}, 3);
  const auto scorer = make_scorer(Scoring::kFusion, &model, samples_);
  const TrialList t =
      build_trials(samples_, Protocol::kVerification, Direction::kSymmetric, Restriction::kUnrestricted, 200, 4);
  EXPECT_EQ(verification_auc(t, *scorer), 0.5);
}

TEST(Hash, KnownFnvVectors) {
  EXPECT_EQ(fnv1a_hex(std::string("")), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex(std::string("a")), "af63dc4c8601ec8c");
}

}  // namespace
}  // namespace faa
