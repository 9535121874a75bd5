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
#include <numeric>
#include <set>

#include "faa/errors.hpp"
#include "faa/grad_check.hpp"
#include "faa/objectives.hpp"
#include "faa/rng.hpp"
#include "gtest/gtest.h"

namespace faa {
namespace {

Tensor random_unit_rows(Rng& rng, std::size_t n, std::size_t d) {
  Tensor t({n, d});
  for (double& v : t.data()) v = rng.normal();
  return l2_normalize_rows(t);
}

std::vector<int> random_labels(Rng& rng, std::size_t n, int classes) {
  std::vector<int> out(n);
  for (int& l : out) l = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(classes)));
  return out;
}

// Independent O(n^2) reference written straight from the loss definition:
// explicit dot products, thresholds recomputed per candidate pair.
double brute_force_ms_loss(const Tensor& x, const std::vector<int>& y, const MiningConfig& c) {
  const std::size_t n = x.rows(), d = x.cols();
  auto sim = [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) s += x.at(i, k) * x.at(j, k);
    return s;
  };
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> pos, neg;
    for (std::size_t m = 0; m < n; ++m) {
      if (m == i) continue;
      (y[m] == y[i] ? pos : neg).push_back(sim(i, m));
    }
    if (pos.empty() || neg.empty()) continue;
    const double hardest_pos = *std::min_element(pos.begin(), pos.end());
    const double hardest_neg = c.rule == MiningRule::kMsOriginal ? *std::max_element(neg.begin(), neg.end())
                                                                 : *std::min_element(neg.begin(), neg.end());
    double sp = 0.0, sn = 0.0;
    for (double s : pos)
      if (s < hardest_neg + c.epsilon) sp += std::exp(-c.alpha * (s - c.lambda));
    for (double s : neg)
      if (s > hardest_pos - c.epsilon) sn += std::exp(c.beta * (s - c.lambda));
    total += std::log(1.0 + sp) / c.alpha + std::log(1.0 + sn) / c.beta;
  }
  return total / static_cast<double>(n);
}

double ms_loss_of(const Tensor& x, const std::vector<int>& y, const MiningConfig& c) {
  ad::Tape tape;
  return ms_loss(tape.constant(x), y, c).value().item();
}

TEST(MinePairs, HandExampleMsOriginal) {
  // Anchor 0: positives {1: 0.8, 2: 0.6}, negatives {3: 0.55, 4: 0.3}.
  Tensor s({5, 5});
  const double row0[] = {1.0, 0.8, 0.6, 0.55, 0.3};
  for (std::size_t j = 0; j < 5; ++j) {
    s.at(0, j) = row0[j];
    s.at(j, 0) = row0[j];
    s.at(j, j) = 1.0;
  }
  const std::vector<int> labels = {0, 0, 0, 1, 1};
  MiningConfig c;
  const PairSelection sel = mine_pairs(s, labels, c);
  EXPECT_EQ(sel.negatives[0], std::vector<std::size_t>({3}));
  EXPECT_EQ(sel.positives[0], std::vector<std::size_t>({2}));
}

TEST(MinePairs, SingleLabelBatchSelectsNothing) {
  Rng rng(1);
  const Tensor x = random_unit_rows(rng, 6, 4);
  const std::vector<int> labels(6, 3);
  EXPECT_TRUE(mine_pairs(matmul(x, transpose(x)), labels, MiningConfig{}).empty());
}

TEST(MinePairs, LargeEpsilonSelectsEverything) {
  Rng rng(2);
  const Tensor x = random_unit_rows(rng, 10, 4);
  const std::vector<int> labels = {0, 0, 1, 1, 1, 2, 2, 0, 1, 2};
  MiningConfig c;
  c.epsilon = 2.0;
  const PairSelection sel = mine_pairs(matmul(x, transpose(x)), labels, c);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::size_t pos = 0, neg = 0;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (j == i) continue;
      (labels[j] == labels[i] ? pos : neg)++;
    }
    EXPECT_EQ(sel.positives[i].size(), pos);
    EXPECT_EQ(sel.negatives[i].size(), neg);
  }
}

TEST(MinePairs, LiteralRuleIsSubsetOfMsOriginal) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor x = random_unit_rows(rng, 12, 3);
    const auto labels = random_labels(rng, 12, 3);
    const Tensor s = matmul(x, transpose(x));
    MiningConfig literal;
    literal.rule = MiningRule::kMinNegative;
    const PairSelection a = mine_pairs(s, labels, literal);
    const PairSelection b = mine_pairs(s, labels, MiningConfig{});
    for (std::size_t i = 0; i < labels.size(); ++i) {
      EXPECT_TRUE(std::includes(b.positives[i].begin(), b.positives[i].end(), a.positives[i].begin(),
                                a.positives[i].end()));
      EXPECT_EQ(a.negatives[i], b.negatives[i]);
    }
  }
}

TEST(MinePairs, DisjointAndLabelConsistent) {
  Rng rng(4);
  const Tensor x = random_unit_rows(rng, 16, 5);
  const auto labels = random_labels(rng, 16, 4);
  const PairSelection sel = mine_pairs(matmul(x, transpose(x)), labels, MiningConfig{});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j : sel.positives[i]) {
      EXPECT_EQ(labels[j], labels[i]);
      EXPECT_NE(j, i);
    }
    for (std::size_t j : sel.negatives[i]) EXPECT_NE(labels[j], labels[i]);
  }
}

TEST(MinePairs, LabelLengthMismatchIsShapeError) {
  EXPECT_THROW(mine_pairs(Tensor({3, 3}), std::vector<int>{0, 1}, MiningConfig{}), DimensionError);
}

TEST(MsLoss, EmptySelectionGivesZero) {
  Rng rng(5);
  const Tensor x = random_unit_rows(rng, 6, 4);
  EXPECT_EQ(ms_loss_of(x, std::vector<int>(6, 0), MiningConfig{}), 0.0);
}

TEST(MsLoss, HandEvaluation) {
  // Anchors 0 and 1 each see one positive and one negative at S = 1; anchor 2
  // has no positives.
  const Tensor x = Tensor::matrix({{1, 0}, {1, 0}, {1, 0}});
  const double per_anchor = 0.5 * std::log(2.0) + std::log(2.0) / 40.0;
  EXPECT_NEAR(ms_loss_of(x, {0, 0, 1}, MiningConfig{}), 2.0 * per_anchor / 3.0, 1e-15);
}

TEST(MsLoss, MatchesBruteForceReference) {
  Rng rng(6);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + 2 * rng.uniform_index(16);
    const Tensor x = random_unit_rows(rng, n, 1 + rng.uniform_index(6));
    const auto labels = random_labels(rng, n, 1 + static_cast<int>(rng.uniform_index(5)));
    MiningConfig c;
    c.rule = trial % 2 ? MiningRule::kMinNegative : MiningRule::kMsOriginal;
    EXPECT_NEAR(ms_loss_of(x, labels, c), brute_force_ms_loss(x, labels, c), 1e-10);
  }
}

TEST(MsLoss, NonNegativeAndZeroOnlyWhenNothingSelected) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor x = random_unit_rows(rng, 8, 3);
    const auto labels = random_labels(rng, 8, 3);
    const double loss = ms_loss_of(x, labels, MiningConfig{});
    EXPECT_GE(loss, 0.0);
    const bool empty = mine_pairs(matmul(x, transpose(x)), labels, MiningConfig{}).empty();
    EXPECT_EQ(loss == 0.0, empty);
  }
}

TEST(MsLoss, MovesInTheRightDirection) {
  Rng rng(8);
  const Tensor x = random_unit_rows(rng, 10, 4);
  const std::vector<int> labels = {0, 0, 0, 1, 1, 1, 2, 2, 3, 3};
  MiningConfig c;
  c.epsilon = 2.0;  // select everything so a small nudge cannot change the selection
  Tensor s = matmul(x, transpose(x));
  // Put one negative near the margin; far negatives weigh below double resolution.
  s.at(0, 5) = 0.95;
  const double base = ms_loss_value(s, labels, c);
  Tensor up_pos = s;
  up_pos.at(0, 1) += 1e-4;
  EXPECT_LT(ms_loss_value(up_pos, labels, c), base);
  Tensor up_neg = s;
  up_neg.at(0, 5) += 1e-4;
  EXPECT_GT(ms_loss_value(up_neg, labels, c), base);
}

TEST(MsLoss, GradCheckOnRandomBatch) {
  Rng rng(9);
  ParamStore store;
  Tensor raw({8, 5});
  for (double& v : raw.data()) v = rng.normal();
  store.add("x", raw);
  const std::vector<int> labels = {0, 0, 1, 1, 2, 2, 0, 1};
  const ScalarFunction fn = [&](ad::Tape& t, const ParamStore& s) {
    return ms_loss(ad::l2_normalize_rows(t.param(s, "x")), labels, MiningConfig{});
  };
  const auto report = grad_check("ms_loss", fn, store, 1e-4);
  EXPECT_TRUE(report.passed) << report.max_rel_error;
}

TEST(ContrastiveLoss, GradCheckAndZeroForPerfectAlignment) {
  Rng rng(10);
  ParamStore store;
  Tensor raw({8, 5});
  for (double& v : raw.data()) v = rng.normal();
  store.add("x", raw);
  const std::vector<int> labels = {0, 0, 1, 1, 2, 2, 0, 1};
  const ScalarFunction fn = [&](ad::Tape& t, const ParamStore& s) {
    return contrastive_loss(ad::l2_normalize_rows(t.param(s, "x")), labels, ContrastiveConfig{});
  };
  EXPECT_TRUE(grad_check("contrastive_loss", fn, store, 1e-4).passed);

  ad::Tape tape;
  const Tensor aligned = Tensor::matrix({{1, 0}, {1, 0}, {-1, 0}, {-1, 0}});
  EXPECT_NEAR(contrastive_loss(tape.constant(aligned), {0, 0, 1, 1}, ContrastiveConfig{}).value().item(), 0.0, 1e-15);
}

TEST(HardNegatives, PicksMostSimilarOppositeLabelFace) {
  // Voice anchor [1, 0]; faces 0-1 share its label, faces 2-3 do not.
  // A second voice with another label gives every face a candidate.
  const Tensor voices = Tensor::matrix({{1, 0}, {0, -1}});
  const Tensor faces = Tensor::matrix({{1, 0}, {0.99, 0.1}, {0.9, std::sqrt(1 - 0.81)}, {0.1, std::sqrt(1 - 0.01)}});
  const std::vector<int> lf = {5, 5, 1, 2}, lv = {5, 7};
  const HardNegatives hn = mine_hard_negatives(faces, voices, lf, lv, 1);
  EXPECT_EQ(hn.faces_for_voice[0], std::vector<std::size_t>({2}));
  const HardNegatives all = mine_hard_negatives(faces, voices, lf, lv, 10);
  EXPECT_EQ(all.faces_for_voice[0], std::vector<std::size_t>({2, 3}));
}

TEST(HardNegatives, TiesBreakByLowerId) {
  const Tensor voices = Tensor::matrix({{1, 0}, {-1, 0}});
  const Tensor faces = Tensor::matrix({{0, 1}, {0, 1}, {1, 0}});
  const std::vector<int> lf = {1, 2, 0}, lv = {0, 9};
  EXPECT_EQ(mine_hard_negatives(faces, voices, lf, lv, 1).faces_for_voice[0], std::vector<std::size_t>({0}));
  const std::vector<std::uint64_t> ids_f = {9, 4, 0};
  EXPECT_EQ(mine_hard_negatives(faces, voices, lf, lv, 1, ids_f).faces_for_voice[0], std::vector<std::size_t>({1}));
}

TEST(HardNegatives, PoolOrderDoesNotChangeIdPairs) {
  Rng rng(12);
  const std::size_t n = 24;
  const Tensor faces = random_unit_rows(rng, n, 4), voices = random_unit_rows(rng, n, 4);
  const auto labels = random_labels(rng, n, 5);
  std::vector<std::uint64_t> ids(n);
  std::iota(ids.begin(), ids.end(), 100);
  auto id_pairs = [](const HardNegatives& hn, std::span<const std::uint64_t> idf, std::span<const std::uint64_t> idv) {
    std::set<std::pair<std::uint64_t, std::uint64_t>> out;
    for (auto [f, v] : hn.pairs()) out.emplace(idf[f], idv[v]);
    return out;
  };
  const auto base = id_pairs(mine_hard_negatives(faces, voices, labels, labels, 2, ids, ids), ids, ids);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  std::vector<int> pl(n);
  std::vector<std::uint64_t> pids(n);
  for (std::size_t i = 0; i < n; ++i) {
    pl[i] = labels[perm[i]];
    pids[i] = ids[perm[i]];
  }
  const Tensor pf = take_rows(faces, perm), pv = take_rows(voices, perm);
  EXPECT_EQ(id_pairs(mine_hard_negatives(pf, pv, pl, pl, 2, pids, pids), pids, pids), base);
}

TEST(HardNegatives, NoOppositeLabelIsDegenerate) {
  const Tensor x = Tensor::matrix({{1, 0}, {0, 1}});
  const std::vector<int> same = {3, 3};
  EXPECT_THROW(mine_hard_negatives(x, x, same, same, 1), DegenerateInputError);
}

TEST(MatchingCe, PerfectPredictionIsClampLimited) {
  const double loss = matching_ce_loss(std::vector<double>{1.0, 0.0}, std::vector<int>{1, 0});
  EXPECT_GT(loss, 0.0);
  EXPECT_LT(loss, 1e-10);
}

TEST(MatchingCe, UninformativeAndHandValues) {
  EXPECT_NEAR(matching_ce_loss(std::vector<double>{0.5, 0.5, 0.5}, std::vector<int>{1, 0, 1}), std::log(2.0), 1e-15);
  EXPECT_NEAR(matching_ce_loss(std::vector<double>{0.9, 0.2}, std::vector<int>{1, 0}),
              -(std::log(0.9) + std::log(0.8)) / 2.0, 1e-15);
  EXPECT_NEAR(matching_ce_loss(std::vector<double>{0.9, 0.2}, std::vector<int>{1, 0}), 0.1643, 1e-4);
}

TEST(MatchingCe, PermutationInvariantAndLengthChecked) {
  Rng rng(13);
  std::vector<double> p(20);
  std::vector<int> y(20);
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = rng.uniform();
    y[i] = rng.bernoulli(0.5);
  }
  const double base = matching_ce_loss(p, y);
  std::vector<std::size_t> perm(20);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  std::vector<double> pp(20);
  std::vector<int> py(20);
  for (std::size_t i = 0; i < 20; ++i) {
    pp[i] = p[perm[i]];
    py[i] = y[perm[i]];
  }
  EXPECT_NEAR(matching_ce_loss(pp, py), base, 1e-14);
  EXPECT_THROW(matching_ce_loss(std::vector<double>{0.5}, std::vector<int>{1, 0}), DimensionError);
}

TEST(MatchingCe, GradCheck) {
  Rng rng(14);
  ParamStore store;
  Tensor logits({6, 2});
  for (double& v : logits.data()) v = rng.normal();
  store.add("logits", logits);
  const ScalarFunction fn = [](ad::Tape& t, const ParamStore& s) {
    return matching_ce_loss(ad::column(ad::softmax_rows(t.param(s, "logits")), 1), {1, 0, 0, 1, 1, 0});
  };
  EXPECT_TRUE(grad_check("matching_ce_loss", fn, store, 1e-4).passed);
}

TEST(CombinedLoss, Arithmetic) {
  EXPECT_NEAR(combined_loss(1.0, 0.5, 0.9), 0.95, 1e-15);
  for (double d : {0.1, 0.5, 0.9}) EXPECT_NEAR(combined_loss(0.7, 0.7, d), 0.7, 1e-15);
  EXPECT_THROW(combined_loss(1, 1, 0.0), ConfigError);
  EXPECT_THROW(combined_loss(1, 1, 1.0), ConfigError);
  EXPECT_THROW(combined_loss(1, 1, -0.5), ConfigError);
}

TEST(CombinedLoss, MatchingGradientVanishesAsDeltaApproachesOne) {
  for (double delta : {0.9, 0.99, 0.999999}) {
    ad::Tape tape;
    ad::Var ms = tape.variable(Tensor::scalar(1.0));
    ad::Var ce = tape.variable(Tensor::scalar(0.5));
    tape.backward(combined_loss(ms, ce, delta));
    EXPECT_NEAR(tape.grad(ce).item(), 1.0 - delta, 1e-15);
    EXPECT_NEAR(tape.grad(ms).item(), delta, 1e-15);
  }
}

}  // namespace
}  // namespace faa
