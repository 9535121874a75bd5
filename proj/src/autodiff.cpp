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

#include "faa/autodiff.hpp"

#include <cmath>
#include <utility>

#include "faa/errors.hpp"

namespace faa::ad {

namespace {

std::string& fault_op() {
  static std::string op;
  return op;
}

void require_same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw ContractError("operands recorded on different tapes");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
}

}  // namespace

void set_gradient_fault(std::string op) { fault_op() = std::move(op); }
void clear_gradient_fault() { fault_op().clear(); }

const Tensor& Var::value() const { return tape_->value_at(index_); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.op = "constant";
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::variable(Tensor value) {
  Node n;
  n.op = "variable";
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::param(const ParamStore& store, ParamId id) {
  if (store_ != nullptr && store_ != &store) throw ContractError("a tape may bind parameters of one store only");
  store_ = &store;
  if (auto it = param_nodes_.find(id); it != param_nodes_.end()) return Var(this, it->second);
  Node n;
  n.op = "param";
  n.value = store.value(id);
  n.requires_grad = record_gradients_;
  n.param = id;
  Var v = push(std::move(n));
  param_nodes_.emplace(id, v.index());
  return v;
}

Var Tape::param(const ParamStore& store, std::string_view name) { return param(store, store.id(name)); }

Var Tape::record(std::string op, Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  Node n;
  n.op = std::move(op);
  n.value = std::move(value);
  for (const Var& in : inputs) {
    if (&in.tape() != this) throw ContractError(n.op + ": input recorded on a different tape");
    n.inputs.push_back(in.index());
    n.requires_grad = n.requires_grad || nodes_[in.index()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

void Tape::backward(Var output) {
  if (&output.tape() != this) throw ContractError("backward: output belongs to another tape");
  Node& out = nodes_.at(output.index());
  if (out.value.size() != 1) {
    throw ContractError("backward: output must be scalar, got shape " + shape_to_string(out.value.shape()));
  }
  for (Node& n : nodes_) n.grad = Tensor();
  out.grad = Tensor(out.value.shape(), 1.0);

  const std::string& faulty = fault_op();
  for (std::size_t i = output.index() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.requires_grad || !node.backward || node.grad.empty()) continue;
    if (!faulty.empty() && node.op == faulty) {
      for (double& g : node.grad.data()) g *= 1.01;
    }
    std::vector<Tensor> input_grads;
    input_grads.reserve(node.inputs.size());
    for (std::size_t in : node.inputs) input_grads.emplace_back(nodes_[in].value.shape());
    node.backward(node.grad, input_grads);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      Node& in = nodes_[node.inputs[k]];
      if (!in.requires_grad) continue;
      if (in.grad.empty()) {
        in.grad = std::move(input_grads[k]);
      } else {
        auto dst = in.grad.data();
        auto src = input_grads[k].data();
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
      }
    }
  }
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.index());
  if (n.grad.empty()) return Tensor(n.value.shape());
  return n.grad;
}

std::map<ParamId, Tensor> Tape::param_grads() const {
  std::map<ParamId, Tensor> out;
  for (const auto& [id, index] : param_nodes_) {
    const Node& n = nodes_[index];
    out.emplace(id, n.grad.empty() ? Tensor(n.value.shape()) : n.grad);
  }
  return out;
}

// ---- ops ----

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  return a.tape().record("matmul", faa::matmul(a.value(), b.value()), {a, b},
                         [a, b](const Tensor& g, std::vector<Tensor>& gin) {
                           gin[0] = faa::matmul(g, faa::transpose(b.value()));
                           gin[1] = faa::matmul(faa::transpose(a.value()), g);
                         });
}

Var transpose(Var a) {
  return a.tape().record("transpose", faa::transpose(a.value()), {a},
                         [](const Tensor& g, std::vector<Tensor>& gin) { gin[0] = faa::transpose(g); });
}

Var add(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return a.tape().record("add", std::move(out), {a, b}, [](const Tensor& g, std::vector<Tensor>& gin) {
    gin[0] = g;
    gin[1] = g;
  });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return a.tape().record("sub", std::move(out), {a, b}, [](const Tensor& g, std::vector<Tensor>& gin) {
    gin[0] = g;
    for (std::size_t i = 0; i < g.size(); ++i) gin[1][i] = -g[i];
  });
}

Var mul(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.tape().record("mul", std::move(out), {a, b}, [a, b](const Tensor& g, std::vector<Tensor>& gin) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      gin[0][i] = g[i] * b.value()[i];
      gin[1][i] = g[i] * a.value()[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= factor;
  return a.tape().record("scale", std::move(out), {a}, [factor](const Tensor& g, std::vector<Tensor>& gin) {
    for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] = g[i] * factor;
  });
}

Var add_row(Var a, Var bias) {
  require_same_tape(a, bias);
  const std::size_t n = a.value().cols();
  if (bias.value().size() != n) {
    throw DimensionError("add_row: bias of shape " + shape_to_string(bias.value().shape()) +
                         " does not match row length " + std::to_string(n));
  }
  Tensor out = a.value();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t j = 0; j < n; ++j) row[j] += bias.value()[j];
  }
  return a.tape().record("add_row", std::move(out), {a, bias}, [n](const Tensor& g, std::vector<Tensor>& gin) {
    gin[0] = g;
    for (std::size_t r = 0; r < g.rows(); ++r) {
      auto row = g.row(r);
      for (std::size_t j = 0; j < n; ++j) gin[1][j] += row[j];
    }
  });
}

Var gelu(Var a) {
  Tensor out = a.value();
  for (double& v : out.data()) v = faa::gelu(v);
  return a.tape().record("gelu", std::move(out), {a}, [a](const Tensor& g, std::vector<Tensor>& gin) {
    for (std::size_t i = 0; i < g.size(); ++i) gin[0][i] = g[i] * faa::gelu_grad(a.value()[i]);
  });
}

Var softmax_rows(Var x) {
  Tensor y = faa::softmax_rows(x.value());
  Var out = x.tape().record("softmax_rows", y, {x}, [y](const Tensor& g, std::vector<Tensor>& gin) {
    for (std::size_t r = 0; r < g.rows(); ++r) {
      auto gr = g.row(r);
      auto yr = y.row(r);
      double dot = 0.0;
      for (std::size_t j = 0; j < gr.size(); ++j) dot += gr[j] * yr[j];
      auto dr = gin[0].row(r);
      for (std::size_t j = 0; j < gr.size(); ++j) dr[j] = yr[j] * (gr[j] - dot);
    }
  });
  return out;
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  require_same_tape(x, gain);
  require_same_tape(x, bias);
  Tensor y = faa::layer_norm(x.value(), gain.value(), bias.value(), eps);
  return x.tape().record(
      "layer_norm", std::move(y), {x, gain, bias}, [x, gain, eps](const Tensor& g, std::vector<Tensor>& gin) {
        const Tensor& xv = x.value();
        const std::size_t d = xv.cols();
        std::vector<double> xhat(d), dxhat(d);
        for (std::size_t r = 0; r < xv.rows(); ++r) {
          auto in = xv.row(r);
          auto gr = g.row(r);
          double mu = 0.0;
          for (double v : in) mu += v;
          mu /= static_cast<double>(d);
          double var = 0.0;
          for (double v : in) var += (v - mu) * (v - mu);
          var /= static_cast<double>(d);
          const double inv = 1.0 / std::sqrt(var + eps);
          double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            xhat[j] = (in[j] - mu) * inv;
            dxhat[j] = gr[j] * gain.value()[j];
            mean_dxhat += dxhat[j];
            mean_dxhat_xhat += dxhat[j] * xhat[j];
            gin[1][j] += gr[j] * xhat[j];
            gin[2][j] += gr[j];
          }
          mean_dxhat /= static_cast<double>(d);
          mean_dxhat_xhat /= static_cast<double>(d);
          auto dx = gin[0].row(r);
          for (std::size_t j = 0; j < d; ++j) dx[j] = inv * (dxhat[j] - mean_dxhat - xhat[j] * mean_dxhat_xhat);
        }
      });
}

Var l2_normalize_rows(Var x) {
  Tensor y = faa::l2_normalize_rows(x.value());
  return x.tape().record("l2_normalize_rows", y, {x}, [x, y](const Tensor& g, std::vector<Tensor>& gin) {
    for (std::size_t r = 0; r < g.rows(); ++r) {
      auto xr = x.value().row(r);
      auto yr = y.row(r);
      auto gr = g.row(r);
      double norm = 0.0, dot = 0.0;
      for (std::size_t j = 0; j < xr.size(); ++j) {
        norm += xr[j] * xr[j];
        dot += gr[j] * yr[j];
      }
      norm = std::sqrt(norm);
      auto dr = gin[0].row(r);
      for (std::size_t j = 0; j < xr.size(); ++j) dr[j] = (gr[j] - yr[j] * dot) / norm;
    }
  });
}

Var cosine_similarity_matrix(Var a, Var b) {
  return matmul(l2_normalize_rows(a), transpose(l2_normalize_rows(b)));
}

Var concat_rows(Var a, Var b) {
  require_same_tape(a, b);
  const std::size_t split = a.value().size();
  return a.tape().record("concat_rows", faa::concat_rows(a.value(), b.value()), {a, b},
                         [split](const Tensor& g, std::vector<Tensor>& gin) {
                           std::copy_n(g.data().begin(), split, gin[0].data().begin());
                           std::copy(g.data().begin() + static_cast<std::ptrdiff_t>(split), g.data().end(),
                                     gin[1].data().begin());
                         });
}

Var take_rows(Var x, std::vector<std::size_t> indices) {
  Tensor out = faa::take_rows(x.value(), indices);
  return x.tape().record("take_rows", std::move(out), {x},
                         [indices = std::move(indices)](const Tensor& g, std::vector<Tensor>& gin) {
                           for (std::size_t i = 0; i < indices.size(); ++i) {
                             auto src = g.row(i);
                             auto dst = gin[0].row(indices[i]);
                             for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
                           }
                         });
}

Var interleave_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("interleave_rows: no parts");
  const Tensor& first = parts.front().value();
  if (first.rank() != 2) throw DimensionError("interleave_rows: parts must be matrices");
  const std::size_t m = first.rows(), n = first.cols(), k = parts.size();
  for (const Var& p : parts) {
    require_same_tape(parts.front(), p);
    require_same_shape(first, p.value(), "interleave_rows");
  }
  Tensor out({m * k, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) std::copy_n(parts[p].value().row(i).begin(), n, out.row(i * k + p).begin());
  return parts.front().tape().record("interleave_rows", std::move(out), parts,
                                     [m, n, k](const Tensor& g, std::vector<Tensor>& gin) {
                                       for (std::size_t i = 0; i < m; ++i)
                                         for (std::size_t p = 0; p < k; ++p)
                                           std::copy_n(g.row(i * k + p).begin(), n, gin[p].row(i).begin());
                                     });
}

Var group_mean_rows(Var x, std::size_t group) {
  const Tensor& xv = x.value();
  if (group == 0 || xv.rows() % group != 0) {
    throw DimensionError("group_mean_rows: " + std::to_string(xv.rows()) + " rows not divisible into groups of " +
                         std::to_string(group));
  }
  const std::size_t out_rows = xv.rows() / group, n = xv.cols();
  Tensor out({out_rows, n});
  const double w = 1.0 / static_cast<double>(group);
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    auto src = xv.row(r);
    auto dst = out.row(r / group);
    for (std::size_t j = 0; j < n; ++j) dst[j] += src[j] * w;
  }
  return x.tape().record("group_mean_rows", std::move(out), {x}, [group, w](const Tensor& g, std::vector<Tensor>& gin) {
    for (std::size_t r = 0; r < gin[0].rows(); ++r) {
      auto src = g.row(r / group);
      auto dst = gin[0].row(r);
      for (std::size_t j = 0; j < src.size(); ++j) dst[j] = src[j] * w;
    }
  });
}

Var column(Var x, std::size_t j) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || j >= xv.cols()) throw DimensionError("column: index out of range");
  Tensor out({xv.rows(), 1});
  for (std::size_t r = 0; r < xv.rows(); ++r) out[r] = xv.at(r, j);
  return x.tape().record("column", std::move(out), {x}, [j](const Tensor& g, std::vector<Tensor>& gin) {
    for (std::size_t r = 0; r < g.size(); ++r) gin[0].at(r, j) = g[r];
  });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return x.tape().record("sum", Tensor::scalar(s), {x}, [](const Tensor& g, std::vector<Tensor>& gin) {
    for (double& v : gin[0].data()) v = g[0];
  });
}

Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

Var multi_head_attention(Var q, Var k, Var v, std::size_t seq_len, std::size_t heads) {
  require_same_tape(q, k);
  require_same_tape(q, v);
  require_same_shape(q.value(), k.value(), "multi_head_attention");
  require_same_shape(q.value(), v.value(), "multi_head_attention");
  const std::size_t rows = q.value().rows(), hidden = q.value().cols();
  if (seq_len == 0 || rows % seq_len != 0) throw DimensionError("multi_head_attention: rows not divisible by seq_len");
  if (heads == 0 || hidden % heads != 0) throw DimensionError("multi_head_attention: hidden not divisible by heads");
  const std::size_t dh = hidden / heads, nseq = rows / seq_len, L = seq_len;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  // probs[(s * heads + h) * L * L + i * L + j]
  std::vector<double> probs(nseq * heads * L * L);
  Tensor out({rows, hidden});
  const Tensor& Q = q.value();
  const Tensor& K = k.value();
  const Tensor& V = v.value();
  std::vector<double> logits(L);
  for (std::size_t s = 0; s < nseq; ++s) {
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * dh;
      double* P = probs.data() + (s * heads + h) * L * L;
      for (std::size_t i = 0; i < L; ++i) {
        auto qi = Q.row(s * L + i);
        double mx = -INFINITY;
        for (std::size_t j = 0; j < L; ++j) {
          auto kj = K.row(s * L + j);
          double dot = 0.0;
          for (std::size_t c = 0; c < dh; ++c) dot += qi[off + c] * kj[off + c];
          logits[j] = dot * inv_sqrt;
          mx = std::max(mx, logits[j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < L; ++j) {
          P[i * L + j] = std::exp(logits[j] - mx);
          z += P[i * L + j];
        }
        auto oi = out.row(s * L + i);
        for (std::size_t j = 0; j < L; ++j) {
          P[i * L + j] /= z;
          auto vj = V.row(s * L + j);
          for (std::size_t c = 0; c < dh; ++c) oi[off + c] += P[i * L + j] * vj[off + c];
        }
      }
    }
  }

  return q.tape().record(
      "multi_head_attention", std::move(out), {q, k, v},
      [q, k, v, probs = std::move(probs), L, heads, dh, nseq, inv_sqrt](const Tensor& g, std::vector<Tensor>& gin) {
        const Tensor& Q = q.value();
        const Tensor& K = k.value();
        const Tensor& V = v.value();
        std::vector<double> dP(L * L), dS(L * L);
        for (std::size_t s = 0; s < nseq; ++s) {
          for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t off = h * dh;
            const double* P = probs.data() + (s * heads + h) * L * L;
            for (std::size_t i = 0; i < L; ++i) {
              auto gi = g.row(s * L + i);
              for (std::size_t j = 0; j < L; ++j) {
                auto vj = V.row(s * L + j);
                auto dvj = gin[2].row(s * L + j);
                double acc = 0.0;
                for (std::size_t c = 0; c < dh; ++c) {
                  acc += gi[off + c] * vj[off + c];
                  dvj[off + c] += P[i * L + j] * gi[off + c];
                }
                dP[i * L + j] = acc;
              }
              double dot = 0.0;
              for (std::size_t j = 0; j < L; ++j) dot += dP[i * L + j] * P[i * L + j];
              for (std::size_t j = 0; j < L; ++j) dS[i * L + j] = P[i * L + j] * (dP[i * L + j] - dot) * inv_sqrt;
            }
            for (std::size_t i = 0; i < L; ++i) {
              auto qi = Q.row(s * L + i);
              auto dqi = gin[0].row(s * L + i);
              for (std::size_t j = 0; j < L; ++j) {
                const double w = dS[i * L + j];
                if (w == 0.0) continue;
                auto kj = K.row(s * L + j);
                auto dkj = gin[1].row(s * L + j);
                for (std::size_t c = 0; c < dh; ++c) {
                  dqi[off + c] += w * kj[off + c];
                  dkj[off + c] += w * qi[off + c];
                }
              }
            }
          }
        }
      });
}

}  // namespace faa::ad
