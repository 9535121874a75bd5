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

#include "faa/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <set>

#include "faa/autodiff.hpp"
#include "faa/evalsuite.hpp"
#include "faa/grad_check.hpp"
#include "faa/objectives.hpp"
#include "faa/rng.hpp"
#include "faa/trainer.hpp"

namespace faa {

namespace {

Tensor random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  Tensor t({rows, cols});
  for (double& v : t.data()) v = rng.normal();
  return t;
}

std::vector<int> random_labels(Rng& rng, std::size_t n, std::size_t classes) {
  std::vector<int> out(n);
  for (int& l : out) l = static_cast<int>(rng.uniform_index(classes));
  return out;
}

ModelConfig small_model() {
  ModelConfig m;
  m.encoder.hidden = 6;
  m.encoder.embed_dim = 5;
  m.encoder.face_dim = 4;
  m.encoder.voice_dim = 3;
  m.fusion.embed_dim = 5;
  m.fusion.hidden = 4;
  m.fusion.heads = 2;
  m.fusion.layers = 1;
  m.fusion.ff_mult = 2;
  return m;
}

// Fresh models start with a zero matching head, which would hide every
// gradient upstream of it.
Model jittered_model(const ModelConfig& config, Rng& rng) {
  Model m = init_model(config, rng.next_u64());
  for (ParamId id = 0; id < m.params.size(); ++id)
    for (double& v : m.params.value(id).data()) v += 0.3 * rng.normal();
  return m;
}

// Independent double-loop reference for the multi-similarity loss: explicit
// dot products, thresholds recomputed per anchor.
double reference_ms_loss(const Tensor& x, const std::vector<int>& y, const MiningConfig& c) {
  const std::size_t n = x.rows(), d = x.cols();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> pos, neg;
    for (std::size_t m = 0; m < n; ++m) {
      if (m == i) continue;
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += x.at(i, k) * x.at(m, k);
      (y[m] == y[i] ? pos : neg).push_back(s);
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

double reference_auc(const std::vector<double>& s, const std::vector<int>& y) {
  std::uint64_t twice = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        ++pairs;
        twice += s[i] > s[j] ? 2 : (s[i] == s[j] ? 1 : 0);
      }
  return static_cast<double>(twice) / (2.0 * static_cast<double>(pairs));
}

// Counts both error rates at every distinct threshold and bisects the
// segment where they cross.
double reference_eer(const std::vector<double>& s, const std::vector<int>& y) {
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

double reference_ap(const std::vector<std::size_t>& order, const std::vector<bool>& rel) {
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

void scored_instance(Rng& rng, std::vector<double>& s, std::vector<int>& y) {
  const std::size_t n = 2 + rng.uniform_index(49);
  s.resize(n);
  y.resize(n);
  const bool coarse = rng.bernoulli(0.5);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = coarse ? static_cast<double>(rng.uniform_index(5)) : rng.normal();
    y[i] = rng.bernoulli(0.5);
  }
  y[0] = 1;
  y[1] = 0;
}

SelftestCheck from_grad_report(const GradCheckReport& r) {
  std::string worst;
  double worst_err = -1.0;
  for (const auto& p : r.params)
    if (p.max_rel_error > worst_err) {
      worst_err = p.max_rel_error;
      worst = p.name;
    }
  char buf[160];
  std::snprintf(buf, sizeof buf, "max rel error %.3g (tolerance %.1g, worst input %s)", r.max_rel_error, r.tolerance,
                worst.c_str());
  return {"grad:" + r.function, r.passed, buf, 0.0};
}

std::vector<SelftestCheck> model_grad_checks(const SelftestOptions& opt) {
  Rng rng(derive_seed(opt.seed, {2}));
  const ModelConfig config = small_model();
  std::vector<SelftestCheck> out;

  for (Modality m : {Modality::kFace, Modality::kVoice}) {
    Model model = jittered_model(config, rng);
    const Tensor input = random_matrix(rng, 4, config.encoder.input_dim(m));
    const Tensor probe = random_matrix(rng, 4, config.encoder.embed_dim);
    const ScalarFunction fn = [&](ad::Tape& t, const ParamStore& s) {
      return ad::sum(ad::mul(encode(t, s, config.encoder, m, t.constant(input)), t.constant(probe)));
    };
    out.push_back(from_grad_report(grad_check("encoder_" + modality_name(m), fn, model.params, opt.grad_tolerance)));
  }

  for (bool cls : {false, true}) {
    ModelConfig c = config;
    c.fusion.use_cls = cls;
    Model model = jittered_model(c, rng);
    const Tensor faces = l2_normalize_rows(random_matrix(rng, 5, c.fusion.embed_dim));
    const Tensor voices = l2_normalize_rows(random_matrix(rng, 5, c.fusion.embed_dim));
    const std::vector<int> targets = {1, 0, 1, 0, 0};
    const ScalarFunction fn = [&](ad::Tape& t, const ParamStore& s) {
      return matching_ce_loss(match_probability(t, s, c.fusion, t.constant(faces), t.constant(voices)), targets);
    };
    out.push_back(from_grad_report(
        grad_check(cls ? "fusion_matching_ce_cls" : "fusion_matching_ce", fn, model.params, opt.grad_tolerance)));
  }

  // The full training objective: alignment loss plus weighted matching loss,
  // through both encoders and the fusion transformer.
  const struct {
    const char* name;
    AlignmentLoss loss;
    PairSelectionMode selection;
  } variants[] = {
      {"objective_ms_hard_negatives", AlignmentLoss::kMultiSimilarity, PairSelectionMode::kProgressiveHardNegatives},
      {"objective_ms_random_negatives", AlignmentLoss::kMultiSimilarity, PairSelectionMode::kFixedRandomNegatives},
      {"objective_contrastive_hard_negatives", AlignmentLoss::kContrastive,
       PairSelectionMode::kProgressiveHardNegatives},
  };
  for (const auto& v : variants) {
    Model model = jittered_model(config, rng);
    TrainConfig tc;
    tc.loss = v.loss;
    tc.pair_selection = v.selection;
    tc.num_workers = 2;
    // A wide mining margin keeps pair selection away from its switching
    // points under finite-difference steps.
    tc.mining.epsilon = 10.0;
    const Tensor faces = random_matrix(rng, 6, config.encoder.face_dim);
    const Tensor voices = random_matrix(rng, 6, config.encoder.voice_dim);
    const std::vector<int> labels = {0, 1, 0, 2, 1, 2};
    const std::uint64_t neg_seed = rng.next_u64();
    const ScalarFunction fn = [&](ad::Tape& t, const ParamStore& s) {
      Model view{model.config, s};
      Rng neg(neg_seed);
      return batch_objective(t, view, tc, faces, voices, labels, neg).total;
    };
    out.push_back(from_grad_report(grad_check(v.name, fn, model.params, opt.grad_tolerance)));
  }
  return out;
}

SelftestCheck ms_oracle_check(const SelftestOptions& opt) {
  Rng rng(derive_seed(opt.seed, {3}));
  double worst = 0.0;
  for (std::size_t trial = 0; trial < opt.oracle_instances; ++trial) {
    const std::size_t n = 2 + 2 * rng.uniform_index(16);
    const Tensor x = l2_normalize_rows(random_matrix(rng, n, 1 + rng.uniform_index(6)));
    const std::vector<int> y = random_labels(rng, n, 1 + rng.uniform_index(5));
    MiningConfig c;
    c.rule = trial % 2 ? MiningRule::kMinNegative : MiningRule::kMsOriginal;
    ad::Tape tape(false);
    const double got = ms_loss(tape.constant(x), y, c).value().item();
    worst = std::max(worst, std::abs(got - reference_ms_loss(x, y, c)));
  }
  return {"oracle:ms_loss", worst <= 1e-10, "max abs deviation " + std::to_string(worst), 0.0};
}

SelftestCheck metric_oracle_check(const SelftestOptions& opt, const std::string& metric) {
  Rng rng(derive_seed(opt.seed, {4}));
  std::vector<double> s;
  std::vector<int> y;
  double worst = 0.0;
  for (std::size_t trial = 0; trial < opt.oracle_instances; ++trial) {
    scored_instance(rng, s, y);
    double dev = 0.0;
    if (metric == "auc") {
      dev = auc(s, y) == reference_auc(s, y) ? 0.0 : std::abs(auc(s, y) - reference_auc(s, y));
    } else if (metric == "eer") {
      dev = std::abs(eer(s, y) - reference_eer(s, y));
    } else {
      std::vector<std::size_t> order(s.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      rng.shuffle(order);
      std::vector<bool> rel(y.begin(), y.end());
      const double got = average_precision(order, rel), want = reference_ap(order, rel);
      dev = got == want ? 0.0 : std::abs(got - want);
    }
    if (!(dev <= worst)) worst = dev;
  }
  const double tolerance = metric == "eer" ? 1e-9 : 0.0;
  return {"oracle:" + metric, worst <= tolerance, "max abs deviation " + std::to_string(worst), 0.0};
}

SelftestCheck shard_check(const SelftestOptions& opt) {
  Rng rng(derive_seed(opt.seed, {5}));
  std::size_t mismatches = 0;
  for (std::size_t pool = 0; pool < opt.shard_pools; ++pool) {
    const std::size_t n = 8 + rng.uniform_index(25), k = 1 + rng.uniform_index(3);
    const Tensor faces = l2_normalize_rows(random_matrix(rng, n, 4));
    // Coarse voices make exact similarity ties common.
    Tensor voices = random_matrix(rng, n, 4);
    for (double& v : voices.data()) v = std::round(v);
    for (std::size_t i = 0; i < n; ++i) voices.at(i, 0) += 0.5;
    voices = l2_normalize_rows(voices);
    std::vector<int> labels = random_labels(rng, n, 4);
    labels[0] = 0;
    labels[1] = 1;
    std::set<std::pair<std::uint64_t, std::uint64_t>> reference;
    for (std::size_t workers : {1, 2, 4}) {
      std::vector<MiningShard> shards(workers);
      for (std::size_t w = 0; w < workers; ++w)
        for (std::size_t r = w * n / workers; r < (w + 1) * n / workers; ++r) {
          std::vector<std::size_t> one = {r};
          MiningShard& s = shards[w];
          s.faces = s.faces.size() ? concat_rows(s.faces, take_rows(faces, one)) : take_rows(faces, one);
          s.voices = s.voices.size() ? concat_rows(s.voices, take_rows(voices, one)) : take_rows(voices, one);
          s.labels.push_back(labels[r]);
          s.ids.push_back(r);
        }
      std::reverse(shards.begin(), shards.end());
      const MiningShard merged = gather_global_pool(shards);
      const HardNegatives hn =
          mine_hard_negatives(merged.faces, merged.voices, merged.labels, merged.labels, k, merged.ids, merged.ids);
      std::set<std::pair<std::uint64_t, std::uint64_t>> got;
      for (auto [f, v] : hn.pairs()) got.emplace(merged.ids[f], merged.ids[v]);
      if (workers == 1) {
        reference = got;
      } else if (got != reference) {
        ++mismatches;
      }
    }
  }
  return {"shard_equivalence", mismatches == 0,
          std::to_string(opt.shard_pools) + " pools, 1/2/4 workers, " + std::to_string(mismatches) + " mismatches",
          0.0};
}

template <typename F>
void timed(std::vector<SelftestCheck>& out, F&& run) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<SelftestCheck> got = run();
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (auto& c : got) {
    c.seconds = seconds / static_cast<double>(got.size());
    out.push_back(std::move(c));
  }
}

}  // namespace

bool SelftestReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const SelftestCheck& c) { return c.passed; });
}

std::vector<std::string> SelftestReport::failures() const {
  std::vector<std::string> out;
  for (const auto& c : checks)
    if (!c.passed) out.push_back(c.name);
  return out;
}

SelftestReport run_selftest(const SelftestOptions& opt) {
  SelftestReport report;
  timed(report.checks, [&] {
    std::vector<SelftestCheck> out;
    for (const auto& r : primitive_grad_checks(derive_seed(opt.seed, {1}), opt.grad_tolerance))
      out.push_back(from_grad_report(r));
    return out;
  });
  timed(report.checks, [&] { return model_grad_checks(opt); });
  timed(report.checks, [&] { return std::vector<SelftestCheck>{ms_oracle_check(opt)}; });
  for (const char* m : {"auc", "eer", "average_precision"})
    timed(report.checks, [&] { return std::vector<SelftestCheck>{metric_oracle_check(opt, m)}; });
  timed(report.checks, [&] { return std::vector<SelftestCheck>{shard_check(opt)}; });
  return report;
}

Json to_json(const SelftestReport& report) {
  Json checks = Json::array();
  for (const auto& c : report.checks)
    checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}, {"seconds", c.seconds}});
  return {{"passed", report.passed()}, {"checks", checks}};
}

}  // namespace faa
