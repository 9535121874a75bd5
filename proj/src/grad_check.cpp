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

#include "faa/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "faa/errors.hpp"
#include "faa/rng.hpp"

namespace faa {

namespace {

double evaluate(const ScalarFunction& fn, const ParamStore& params) {
  ad::Tape tape;
  ad::Var out = fn(tape, params);
  if (out.value().size() != 1) {
    throw ContractError("grad_check: function must be scalar-valued, got shape " +
                        shape_to_string(out.value().shape()));
  }
  return out.value()[0];
}

}  // namespace

GradCheckReport grad_check(std::string function, const ScalarFunction& fn, ParamStore& params,
                           std::span<const ParamId> subset, double tolerance, double step) {
  GradCheckReport report;
  report.function = std::move(function);
  report.tolerance = tolerance;

  std::map<ParamId, Tensor> analytic;
  {
    ad::Tape tape;
    ad::Var out = fn(tape, params);
    if (out.value().size() != 1) {
      throw ContractError("grad_check: function must be scalar-valued, got shape " +
                          shape_to_string(out.value().shape()));
    }
    tape.backward(out);
    analytic = tape.param_grads();
  }

  for (ParamId id : subset) {
    ParamGradError entry;
    entry.name = params.name(id);
    Tensor& value = params.value(id);
    const Tensor zeros(value.shape());
    const Tensor& grad = analytic.contains(id) ? analytic.at(id) : zeros;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      value[i] = saved + step;
      const double up = evaluate(fn, params);
      value[i] = saved - step;
      const double down = evaluate(fn, params);
      value[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double abs_err = std::abs(grad[i] - numeric);
      const double denom = std::max({std::abs(grad[i]), std::abs(numeric), kGradCheckFloor});
      entry.max_abs_error = std::max(entry.max_abs_error, abs_err);
      entry.max_rel_error = std::max(entry.max_rel_error, abs_err / denom);
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.params.push_back(std::move(entry));
  }
  report.passed = report.max_rel_error <= tolerance;
  return report;
}

GradCheckReport grad_check(std::string function, const ScalarFunction& fn, ParamStore& params, double tolerance,
                           double step) {
  std::vector<ParamId> all(params.size());
  std::iota(all.begin(), all.end(), ParamId{0});
  return grad_check(std::move(function), fn, params, all, tolerance, step);
}

namespace {

Tensor random_tensor(Rng& rng, Shape shape, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = scale * rng.normal();
  return t;
}

// Reduces an op output to a scalar through a fixed random weighting so
// every output element carries a distinct gradient.
ad::Var weighted_sum(ad::Var x, std::uint64_t seed) {
  Rng rng(seed);
  ad::Var w = x.tape().constant(random_tensor(rng, x.value().shape()));
  return ad::sum(ad::mul(x, w));
}

}  // namespace

std::vector<GradCheckReport> primitive_grad_checks(std::uint64_t seed, double tolerance) {
  Rng rng(seed);
  ParamStore store;
  const ParamId a = store.add("a", random_tensor(rng, {4, 3}));
  const ParamId b = store.add("b", random_tensor(rng, {3, 5}));
  const ParamId c = store.add("c", random_tensor(rng, {4, 3}));
  const ParamId bias = store.add("bias", random_tensor(rng, {3}));
  const ParamId gain = store.add("gain", random_tensor(rng, {3}));
  const ParamId q = store.add("q", random_tensor(rng, {6, 4}));
  const ParamId k = store.add("k", random_tensor(rng, {6, 4}));
  const ParamId v = store.add("v", random_tensor(rng, {6, 4}));
  const std::uint64_t ws = derive_seed(seed, {1});

  struct Case {
    std::string name;
    std::vector<ParamId> params;
    ScalarFunction fn;
  };
  auto P = [](ad::Tape& t, const ParamStore& s, ParamId id) { return t.param(s, id); };
  std::vector<Case> cases = {
      {"matmul", {a, b}, [&](ad::Tape& t, const ParamStore& s) { return weighted_sum(ad::matmul(P(t, s, a), P(t, s, b)), ws); }},
      {"transpose", {a}, [&](ad::Tape& t, const ParamStore& s) { return weighted_sum(ad::transpose(P(t, s, a)), ws); }},
      {"add", {a, c}, [&](ad::Tape& t, const ParamStore& s) { return weighted_sum(ad::add(P(t, s, a), P(t, s, c)), ws); }},
      {"sub", {a, c}, [&](ad::Tape& t, const ParamStore& s) { return weighted_sum(ad::sub(P(t, s, a), P(t, s, c)), ws); }},
      {"mul", {a, c}, [&](ad::Tape& t, const ParamStore& s) { return weighted_sum(ad::mul(P(t, s, a), P(t, s, c)), ws); }},
      {"scale", {a}, [&](ad::Tape& t, const ParamStore& s) { return weighted_sum(ad::scale(P(t, s, a), -1.7), ws); }},
      {"add_row", {a, bias}, [&](ad::Tape& t, const ParamStore& s) { return weighted_sum(ad::add_row(P(t, s, a), P(t, s, bias)), ws); }},
      {"gelu", {a}, [&](ad::Tape& t, const ParamStore& s) { return weighted_sum(ad::gelu(P(t, s, a)), ws); }},
      {"softmax_rows", {a}, [&](ad::Tape& t, const ParamStore& s) { return weighted_sum(ad::softmax_rows(P(t, s, a)), ws); }},
      {"layer_norm", {a, gain, bias}, [&](ad::Tape& t, const ParamStore& s) {
         return weighted_sum(ad::layer_norm(P(t, s, a), P(t, s, gain), P(t, s, bias), 1e-5), ws);
       }},
      {"l2_normalize_rows", {a}, [&](ad::Tape& t, const ParamStore& s) { return weighted_sum(ad::l2_normalize_rows(P(t, s, a)), ws); }},
      {"cosine_similarity_matrix", {a, c}, [&](ad::Tape& t, const ParamStore& s) {
         return weighted_sum(ad::cosine_similarity_matrix(P(t, s, a), P(t, s, c)), ws);
       }},
      {"concat_rows", {a, c}, [&](ad::Tape& t, const ParamStore& s) { return weighted_sum(ad::concat_rows(P(t, s, a), P(t, s, c)), ws); }},
      {"take_rows", {a}, [&](ad::Tape& t, const ParamStore& s) { return weighted_sum(ad::take_rows(P(t, s, a), {3, 0, 3, 1}), ws); }},
      {"interleave_rows", {a, c}, [&](ad::Tape& t, const ParamStore& s) {
         return weighted_sum(ad::interleave_rows({P(t, s, a), P(t, s, c)}), ws);
       }},
      {"group_mean_rows", {a}, [&](ad::Tape& t, const ParamStore& s) { return weighted_sum(ad::group_mean_rows(P(t, s, a), 2), ws); }},
      {"column", {a}, [&](ad::Tape& t, const ParamStore& s) { return weighted_sum(ad::column(P(t, s, a), 1), ws); }},
      {"mean", {a}, [&](ad::Tape& t, const ParamStore& s) { return ad::mean(ad::mul(P(t, s, a), P(t, s, a))); }},
      {"multi_head_attention", {q, k, v}, [&](ad::Tape& t, const ParamStore& s) {
         return weighted_sum(ad::multi_head_attention(P(t, s, q), P(t, s, k), P(t, s, v), 3, 2), ws);
       }},
  };

  std::vector<GradCheckReport> reports;
  reports.reserve(cases.size());
  for (auto& cs : cases) reports.push_back(grad_check(cs.name, cs.fn, store, cs.params, tolerance));
  return reports;
}

}  // namespace faa
