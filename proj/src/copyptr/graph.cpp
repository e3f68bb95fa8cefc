// Copyright 2026 The copyptr Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "copyptr/graph.hpp"

#include <algorithm>
#include <cmath>

#include "copyptr/error.hpp"

namespace copyptr::ad {

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  const std::size_t n = std::accumulate(shape_.begin(), shape_.end(),
                                        std::size_t{1}, std::multiplies<>());
  if (n != values_.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "shape " + shape_string() + " holds " + std::to_string(n) +
                    " values, got " + std::to_string(values_.size()));
  }
}

std::string Tensor::shape_string() const {
  std::string out = "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape_[i]);
  }
  return out + "]";
}

// ---------------------------------------------------------------------------
// ParameterSet

std::size_t ParameterSet::add(std::string name, Tensor init) {
  if (index_.count(name)) {
    throw Error(ErrorCode::kInvalidConfig, "duplicate parameter " + name);
  }
  const std::size_t i = params_.size();
  index_.emplace(name, i);
  Tensor grad(init.shape(), std::vector<double>(init.size(), 0.0));
  params_.push_back(Parameter{std::move(name), std::move(init), std::move(grad)});
  return i;
}

Parameter* ParameterSet::find(std::string_view name) {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : &params_[it->second];
}

const Parameter* ParameterSet::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : &params_[it->second];
}

void ParameterSet::zero_grad() {
  for (Parameter& p : params_) p.grad.fill(0.0);
}

std::vector<Tensor> ParameterSet::snapshot() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const Parameter& p : params_) out.push_back(p.value);
  return out;
}

void ParameterSet::restore(const std::vector<Tensor>& values) {
  if (values.size() != params_.size()) {
    throw Error(ErrorCode::kShapeMismatch, "snapshot has " +
                                               std::to_string(values.size()) +
                                               " tensors, expected " +
                                               std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!values[i].same_shape(params_[i].value)) {
      throw Error(ErrorCode::kShapeMismatch,
                  params_[i].name + ": " + values[i].shape_string() + " vs " +
                      params_[i].value.shape_string());
    }
  }
  for (std::size_t i = 0; i < values.size(); ++i) params_[i].value = values[i];
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += p.value.size();
  return n;
}

// ---------------------------------------------------------------------------
// Graph

const Tensor& Var::value() const { return graph_->value(*this); }
const Tensor& Var::grad() const { return graph_->grad(*this); }
bool Var::requires_grad() const { return graph_->requires_grad(*this); }

Graph::Graph(Mode mode, std::uint64_t dropout_seed, bool record_gradients)
    : mode_(mode), record_gradients_(record_gradients), rng_(dropout_seed) {}

Var Graph::param(const Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var(this, it->second);
  Node node;
  node.external = &p.value;
  node.param = &p;
  node.requires_grad = record_gradients_;
  nodes_.push_back(std::move(node));
  const auto id = static_cast<std::uint32_t>(nodes_.size() - 1);
  param_nodes_.emplace(&p, id);
  return Var(this, id);
}

Var Graph::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Graph::leaf(Tensor value) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = record_gradients_;
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

const Tensor& Graph::value(Var v) const {
  const Node& n = nodes_[v.id()];
  return n.external ? *n.external : n.value;
}

const Tensor& Graph::grad(Var v) const { return nodes_[v.id()].grad; }

Tensor& Graph::grad_buffer(Var v) {
  Node& n = nodes_[v.id()];
  if (n.grad.empty()) {
    const Tensor& val = n.external ? *n.external : n.value;
    n.grad = Tensor(val.shape(), std::vector<double>(val.size(), 0.0));
  }
  return n.grad;
}

Var Graph::record(Tensor value, std::initializer_list<Var> inputs,
                  BackwardFn fn) {
  return record(std::move(value),
                std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(fn));
}

Var Graph::record(Tensor value, std::span<const Var> inputs, BackwardFn fn) {
  for (double v : value.values()) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kNumericalOverflow,
                  "non-finite value in a " + value.shape_string() + " result");
    }
  }
  Node node;
  node.value = std::move(value);
  if (record_gradients_) {
    for (const Var& in : inputs) {
      if (nodes_[in.id()].requires_grad) {
        node.requires_grad = true;
        break;
      }
    }
    if (node.requires_grad) node.backward = std::move(fn);
  }
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

void Graph::backward(Var loss) {
  if (backward_done_) {
    throw Error(ErrorCode::kGraphReuse, "backward already ran on this graph");
  }
  if (!record_gradients_) {
    throw Error(ErrorCode::kGraphReuse, "graph was built without gradients");
  }
  const Tensor& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1 || lv.rank() != 2) {
    throw Error(ErrorCode::kNonScalarLoss, "loss shape " + lv.shape_string());
  }
  backward_done_ = true;
  if (!nodes_[loss.id()].requires_grad) return;
  grad_buffer(loss)[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) {
      n.backward(*this, Var(this, static_cast<std::uint32_t>(i)));
    } else if (n.param) {
      Tensor& pg = n.param->grad;
      if (pg.empty()) pg = Tensor(n.grad.shape(), std::vector<double>(n.grad.size(), 0.0));
      for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += n.grad[k];
    }
  }
}

// ---------------------------------------------------------------------------
// Operations

namespace {

void require(bool ok, const char* op, const Tensor& a, const Tensor& b) {
  if (!ok) {
    throw Error(ErrorCode::kShapeMismatch, std::string(op) + ": " +
                                               a.shape_string() + " vs " +
                                               b.shape_string());
  }
}

Graph& graph_of(Var a, Var b) {
  if (a.graph() != b.graph()) {
    throw Error(ErrorCode::kShapeMismatch, "operands from different graphs");
  }
  return *a.graph();
}

// Elementwise unary op with derivative expressed through input and output.
template <typename F, typename D>
Var unary(Var a, F f, D dfdx) {
  Graph& g = *a.graph();
  const Tensor& x = a.value();
  Tensor y(x.shape(), std::vector<double>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return g.record(std::move(y), {a}, [a, dfdx](Graph& g, Var self) {
    if (!a.requires_grad()) return;
    const Tensor& x = a.value();
    const Tensor& y = self.value();
    const Tensor& gy = g.grad(self);
    Tensor& gx = g.grad_buffer(a);
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] += gy[i] * dfdx(x[i], y[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require(A.cols() == B.rows(), "matmul", A, B);
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  Tensor C(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    double* c = C.data() + i * n;
    const double* arow = A.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = B.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
    }
  }
  return g.record(std::move(C), {a, b}, [a, b, m, k, n](Graph& g, Var self) {
    const Tensor& gC = g.grad(self);
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    if (a.requires_grad()) {
      Tensor& gA = g.grad_buffer(a);
      for (std::size_t i = 0; i < m; ++i) {
        const double* gc = gC.data() + i * n;
        double* ga = gA.data() + i * k;
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = B.data() + p * n;
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += gc[j] * brow[j];
          ga[p] += s;
        }
      }
    }
    if (b.requires_grad()) {
      Tensor& gB = g.grad_buffer(b);
      for (std::size_t i = 0; i < m; ++i) {
        const double* gc = gC.data() + i * n;
        const double* arow = A.data() + i * k;
        for (std::size_t p = 0; p < k; ++p) {
          const double av = arow[p];
          if (av == 0.0) continue;
          double* gb = gB.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) gb[j] += av * gc[j];
        }
      }
    }
  });
}

namespace {

enum class Broadcast { kSame, kRow, kScalar };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op,
                         bool allow_row) {
  if (a.same_shape(b)) return Broadcast::kSame;
  if (b.rows() == 1 && b.cols() == 1 && b.rank() == 2) return Broadcast::kScalar;
  if (allow_row && b.rows() == 1 && b.cols() == a.cols()) return Broadcast::kRow;
  require(false, op, a, b);
  return Broadcast::kSame;
}

Var add_scaled(Var a, Var b, double sign) {
  Graph& g = graph_of(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const Broadcast kind = broadcast_kind(A, B, "add", true);
  Tensor C = A;
  const std::size_t cols = A.cols();
  for (std::size_t i = 0; i < C.size(); ++i) {
    const double bv = kind == Broadcast::kSame   ? B[i]
                      : kind == Broadcast::kRow ? B[i % cols]
                                                : B[0];
    C[i] += sign * bv;
  }
  return g.record(std::move(C), {a, b},
                  [a, b, kind, cols, sign](Graph& g, Var self) {
                    const Tensor& gC = g.grad(self);
                    if (a.requires_grad()) {
                      Tensor& gA = g.grad_buffer(a);
                      for (std::size_t i = 0; i < gC.size(); ++i) gA[i] += gC[i];
                    }
                    if (b.requires_grad()) {
                      Tensor& gB = g.grad_buffer(b);
                      for (std::size_t i = 0; i < gC.size(); ++i) {
                        const std::size_t j = kind == Broadcast::kSame  ? i
                                              : kind == Broadcast::kRow ? i % cols
                                                                        : 0;
                        gB[j] += sign * gC[i];
                      }
                    }
                  });
}

}  // namespace

Var add(Var a, Var b) { return add_scaled(a, b, 1.0); }
Var sub(Var a, Var b) { return add_scaled(a, b, -1.0); }

Var mul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const bool scalar = broadcast_kind(A, B, "mul", false) == Broadcast::kScalar;
  Tensor C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C[i] *= scalar ? B[0] : B[i];
  return g.record(std::move(C), {a, b}, [a, b, scalar](Graph& g, Var self) {
    const Tensor& gC = g.grad(self);
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    if (a.requires_grad()) {
      Tensor& gA = g.grad_buffer(a);
      for (std::size_t i = 0; i < gC.size(); ++i) {
        gA[i] += gC[i] * (scalar ? B[0] : B[i]);
      }
    }
    if (b.requires_grad()) {
      Tensor& gB = g.grad_buffer(b);
      for (std::size_t i = 0; i < gC.size(); ++i) {
        gB[scalar ? 0 : i] += gC[i] * A[i];
      }
    }
  });
}

Var scale(Var a, double c) {
  return unary(
      a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Var one_minus(Var a) {
  return unary(
      a, [](double x) { return 1.0 - x; }, [](double, double) { return -1.0; });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw Error(ErrorCode::kShapeMismatch, "concat of nothing");
  Graph& g = *parts[0].graph();
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    require(p.rows() == rows && p.graph() == &g, "concat_cols",
            parts[0].value(), p.value());
    cols += p.cols();
  }
  Tensor out(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v.data() + r * v.cols(), v.cols(),
                  out.data() + r * cols + offset);
    }
    offset += v.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return g.record(std::move(out), parts,
                  [inputs, rows, cols](Graph& g, Var self) {
                    const Tensor& go = g.grad(self);
                    std::size_t offset = 0;
                    for (const Var& p : inputs) {
                      const std::size_t c = p.cols();
                      if (p.requires_grad()) {
                        Tensor& gp = g.grad_buffer(p);
                        for (std::size_t r = 0; r < rows; ++r) {
                          for (std::size_t j = 0; j < c; ++j) {
                            gp[r * c + j] += go[r * cols + offset + j];
                          }
                        }
                      }
                      offset += c;
                    }
                  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw Error(ErrorCode::kShapeMismatch, "concat of nothing");
  Graph& g = *parts[0].graph();
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  for (const Var& p : parts) {
    require(p.cols() == cols && p.graph() == &g, "concat_rows",
            parts[0].value(), p.value());
    rows += p.rows();
  }
  Tensor out(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    std::copy_n(v.data(), v.size(), out.data() + offset);
    offset += v.size();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return g.record(std::move(out), parts, [inputs](Graph& g, Var self) {
    const Tensor& go = g.grad(self);
    std::size_t offset = 0;
    for (const Var& p : inputs) {
      const std::size_t n = p.value().size();
      if (p.requires_grad()) {
        Tensor& gp = g.grad_buffer(p);
        for (std::size_t i = 0; i < n; ++i) gp[i] += go[offset + i];
      }
      offset += n;
    }
  });
}

Var slice_cols(Var a, std::size_t start, std::size_t count) {
  Graph& g = *a.graph();
  const Tensor& A = a.value();
  if (start + count > A.cols() || count == 0) {
    throw Error(ErrorCode::kShapeMismatch,
                "slice_cols [" + std::to_string(start) + ", +" +
                    std::to_string(count) + ") of " + A.shape_string());
  }
  const std::size_t rows = A.rows(), cols = A.cols();
  Tensor out(rows, count);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(A.data() + r * cols + start, count, out.data() + r * count);
  }
  return g.record(std::move(out), {a},
                  [a, start, count, rows, cols](Graph& g, Var self) {
                    if (!a.requires_grad()) return;
                    const Tensor& go = g.grad(self);
                    Tensor& ga = g.grad_buffer(a);
                    for (std::size_t r = 0; r < rows; ++r) {
                      for (std::size_t j = 0; j < count; ++j) {
                        ga[r * cols + start + j] += go[r * count + j];
                      }
                    }
                  });
}

Var slice_rows(Var a, std::size_t start, std::size_t count) {
  Graph& g = *a.graph();
  const Tensor& A = a.value();
  if (start + count > A.rows() || count == 0) {
    throw Error(ErrorCode::kShapeMismatch,
                "slice_rows [" + std::to_string(start) + ", +" +
                    std::to_string(count) + ") of " + A.shape_string());
  }
  const std::size_t cols = A.cols();
  Tensor out(count, cols);
  std::copy_n(A.data() + start * cols, count * cols, out.data());
  return g.record(std::move(out), {a}, [a, start, cols](Graph& g, Var self) {
    if (!a.requires_grad()) return;
    const Tensor& go = g.grad(self);
    Tensor& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < go.size(); ++i) ga[start * cols + i] += go[i];
  });
}

Var transpose(Var a) {
  Graph& g = *a.graph();
  const Tensor& A = a.value();
  const std::size_t m = A.rows(), n = A.cols();
  Tensor out(n, m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out(j, i) = A(i, j);
  }
  return g.record(std::move(out), {a}, [a, m, n](Graph& g, Var self) {
    if (!a.requires_grad()) return;
    const Tensor& go = g.grad(self);
    Tensor& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += go[j * m + i];
    }
  });
}

Var embedding(Var table, std::span<const int> ids) {
  Graph& g = *table.graph();
  const Tensor& T = table.value();
  const std::size_t d = T.cols();
  Tensor out(ids.size(), d);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= T.rows()) {
      throw Error(ErrorCode::kShapeMismatch,
                  "embedding id " + std::to_string(ids[r]) + " outside " +
                      T.shape_string());
    }
    std::copy_n(T.data() + ids[r] * d, d, out.data() + r * d);
  }
  std::vector<int> rows(ids.begin(), ids.end());
  return g.record(std::move(out), {table},
                  [table, rows = std::move(rows), d](Graph& g, Var self) {
                    if (!table.requires_grad()) return;
                    const Tensor& go = g.grad(self);
                    Tensor& gt = g.grad_buffer(table);
                    for (std::size_t r = 0; r < rows.size(); ++r) {
                      for (std::size_t j = 0; j < d; ++j) {
                        gt[rows[r] * d + j] += go[r * d + j];
                      }
                    }
                  });
}

Var tanh(Var a) {
  return unary(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var relu(Var a) {
  return unary(
      a, [](double x) { return x > 0 ? x : 0.0; },
      [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var log(Var a) {
  return unary(
      a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Var softmax_rows(Var a) {
  Graph& g = *a.graph();
  const Tensor& A = a.value();
  const std::size_t rows = A.rows(), cols = A.cols();
  Tensor out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = A.data() + r * cols;
    double* y = out.data() + r * cols;
    const double mx = *std::max_element(x, x + cols);
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      y[j] = std::exp(x[j] - mx);
      z += y[j];
    }
    for (std::size_t j = 0; j < cols; ++j) y[j] /= z;
  }
  return g.record(std::move(out), {a}, [a, rows, cols](Graph& g, Var self) {
    if (!a.requires_grad()) return;
    const Tensor& y = self.value();
    const Tensor& gy = g.grad(self);
    Tensor& ga = g.grad_buffer(a);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t o = r * cols;
      double dot = 0.0;
      for (std::size_t j = 0; j < cols; ++j) dot += gy[o + j] * y[o + j];
      for (std::size_t j = 0; j < cols; ++j) {
        ga[o + j] += y[o + j] * (gy[o + j] - dot);
      }
    }
  });
}

Var dropout(Var a, double p) {
  if (p < 0.0 || p >= 1.0) {
    throw Error(ErrorCode::kInvalidConfig,
                "dropout probability " + std::to_string(p) + " outside [0, 1)");
  }
  Graph& g = *a.graph();
  if (!g.training() || p == 0.0) return a;
  const Tensor& A = a.value();
  std::vector<double> mask(A.size());
  std::bernoulli_distribution keep(1.0 - p);
  const double s = 1.0 / (1.0 - p);
  for (double& m : mask) m = keep(g.rng()) ? s : 0.0;
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return g.record(std::move(out), {a},
                  [a, mask = std::move(mask)](Graph& g, Var self) {
                    if (!a.requires_grad()) return;
                    const Tensor& go = g.grad(self);
                    Tensor& ga = g.grad_buffer(a);
                    for (std::size_t i = 0; i < go.size(); ++i) {
                      ga[i] += go[i] * mask[i];
                    }
                  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  Graph& g = *x.graph();
  const Tensor& X = x.value();
  const std::size_t rows = X.rows(), cols = X.cols();
  require(gain.rows() == 1 && gain.cols() == cols, "layer_norm", X, gain.value());
  require(bias.rows() == 1 && bias.cols() == cols, "layer_norm", X, bias.value());
  const Tensor& G = gain.value();
  const Tensor& B = bias.value();
  Tensor xhat(rows, cols);
  std::vector<double> rstd(rows);
  Tensor out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = X.data() + r * cols;
    double mu = 0.0;
    for (std::size_t j = 0; j < cols; ++j) mu += xr[j];
    mu /= cols;
    double var = 0.0;
    for (std::size_t j = 0; j < cols; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= cols;
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < cols; ++j) {
      xhat(r, j) = (xr[j] - mu) * rstd[r];
      out(r, j) = xhat(r, j) * G[j] + B[j];
    }
  }
  return g.record(
      std::move(out), {x, gain, bias},
      [x, gain, bias, xhat = std::move(xhat), rstd = std::move(rstd), rows,
       cols](Graph& g, Var self) {
        const Tensor& gy = g.grad(self);
        const Tensor& G = gain.value();
        if (gain.requires_grad()) {
          Tensor& gg = g.grad_buffer(gain);
          for (std::size_t i = 0; i < gy.size(); ++i) gg[i % cols] += gy[i] * xhat[i];
        }
        if (bias.requires_grad()) {
          Tensor& gb = g.grad_buffer(bias);
          for (std::size_t i = 0; i < gy.size(); ++i) gb[i % cols] += gy[i];
        }
        if (x.requires_grad()) {
          Tensor& gx = g.grad_buffer(x);
          for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t o = r * cols;
            double mean_d = 0.0, mean_dx = 0.0;
            for (std::size_t j = 0; j < cols; ++j) {
              const double d = gy[o + j] * G[j];
              mean_d += d;
              mean_dx += d * xhat[o + j];
            }
            mean_d /= cols;
            mean_dx /= cols;
            for (std::size_t j = 0; j < cols; ++j) {
              const double d = gy[o + j] * G[j];
              gx[o + j] += rstd[r] * (d - mean_d - xhat[o + j] * mean_dx);
            }
          }
        }
      });
}

Var sum(Var a) {
  Graph& g = *a.graph();
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return g.record(Tensor::scalar(s), {a}, [a](Graph& g, Var self) {
    if (!a.requires_grad()) return;
    const double go = g.grad(self)[0];
    Tensor& ga = g.grad_buffer(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go;
  });
}

Var mean_rows(Var a) {
  Graph& g = *a.graph();
  const Tensor& A = a.value();
  const std::size_t rows = A.rows(), cols = A.cols();
  Tensor out(1, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < cols; ++j) out[j] += A(r, j);
  }
  for (std::size_t j = 0; j < cols; ++j) out[j] /= rows;
  return g.record(std::move(out), {a}, [a, rows, cols](Graph& g, Var self) {
    if (!a.requires_grad()) return;
    const Tensor& go = g.grad(self);
    Tensor& ga = g.grad_buffer(a);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < cols; ++j) ga[r * cols + j] += go[j] / rows;
    }
  });
}

Var nll(Var dist, std::size_t target) {
  Graph& g = *dist.graph();
  const Tensor& D = dist.value();
  if (D.rows() != 1 || target >= D.cols()) {
    throw Error(ErrorCode::kShapeMismatch,
                "nll target " + std::to_string(target) + " for " +
                    D.shape_string());
  }
  const double p = D[target];
  if (!(p > 0.0)) {
    throw Error(ErrorCode::kNumericalOverflow,
                "zero probability assigned to the target");
  }
  return g.record(Tensor::scalar(-std::log(p)), {dist},
                  [dist, target](Graph& g, Var self) {
                    if (!dist.requires_grad()) return;
                    const double go = g.grad(self)[0];
                    Tensor& gd = g.grad_buffer(dist);
                    gd[target] -= go / dist.value()[target];
                  });
}

}  // namespace copyptr::ad
