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
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "faa/params.hpp"
#include "faa/tensor.hpp"

namespace faa::ad {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid as long as the
// tape is alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  Tape& tape() const { return *tape_; }
  std::size_t index() const { return index_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}

  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
};

// Receives the gradient flowing into an op's output and must write the
// gradient contribution for each input into `input_grads` (pre-sized and
// zero-filled to the input shapes).
using BackwardFn = std::function<void(const Tensor& output_grad, std::vector<Tensor>& input_grads)>;

// Ordered record of primitive operations. Backward replays it in reverse
// and accumulates a gradient for every recorded node that depends on a
// parameter or variable.
class Tape {
 public:
  Tape() = default;
  // With record_gradients == false, parameters bind as constants and no
  // backward closures are kept (inference).
  explicit Tape(bool record_gradients) : record_gradients_(record_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Differentiable leaf not bound to a parameter store.
  Var variable(Tensor value);
  // Differentiable leaf bound to store[id]. Repeated calls return the same
  // node.
  Var param(const ParamStore& store, ParamId id);
  Var param(const ParamStore& store, std::string_view name);

  Var record(std::string op, Tensor value, std::vector<Var> inputs, BackwardFn backward);

  // Seeds d(output)/d(output) = 1 and propagates. `output` must hold a
  // single element.
  void backward(Var output);

  // Gradient accumulated for v (zeros if none reached it).
  Tensor grad(Var v) const;
  std::map<ParamId, Tensor> param_grads() const;

  std::size_t size() const { return nodes_.size(); }
  const std::string& op_name(std::size_t index) const { return nodes_.at(index).op; }
  const Tensor& value_at(std::size_t index) const { return nodes_.at(index).value; }

 private:
  struct Node {
    std::string op;
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    std::optional<ParamId> param;
    Tensor grad;
  };

  Var push(Node node);

  std::vector<Node> nodes_;
  std::map<ParamId, std::size_t> param_nodes_;
  const ParamStore* store_ = nullptr;
  bool record_gradients_ = true;
};

// Debug fault injection: while set, the backward pass of every node whose op
// name equals `op` is perturbed by a relative 1e-2. Used by the self test to
// prove that gradient checks catch a broken op.
void set_gradient_fault(std::string op);
void clear_gradient_fault();

// ---- primitive ops ----

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
// a[m x n] + bias[n] added to every row.
Var add_row(Var a, Var bias);
Var gelu(Var a);
Var softmax_rows(Var x);
Var layer_norm(Var x, Var gain, Var bias, double eps);
Var l2_normalize_rows(Var x);
Var cosine_similarity_matrix(Var a, Var b);
Var concat_rows(Var a, Var b);
Var take_rows(Var x, std::vector<std::size_t> indices);
// Rows p0[0], p1[0], ..., p0[1], p1[1], ... for equally shaped parts.
Var interleave_rows(const std::vector<Var>& parts);
// Averages each run of `group` consecutive rows.
Var group_mean_rows(Var x, std::size_t group);
// Column j as an [m x 1] tensor.
Var column(Var x, std::size_t j);
Var sum(Var x);
Var mean(Var x);

// Scaled dot-product self-attention over independent sequences of
// `seq_len` consecutive rows. q/k/v are [B*seq_len x hidden]; hidden is split
// into `heads` equal slices.
Var multi_head_attention(Var q, Var k, Var v, std::size_t seq_len, std::size_t heads);

}  // namespace faa::ad
