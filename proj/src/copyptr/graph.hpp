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

// Tape-based reverse-mode differentiation over rank-2 tensors.
//
// A Graph records every operation in creation order, which is a topological
// order, so backward() simply walks the tape in reverse. Parameters live
// outside any graph in a ParameterSet; the graph's parameter leaves read
// their values in place and add into Parameter::grad during backward().

#ifndef COPYPTR_GRAPH_HPP_
#define COPYPTR_GRAPH_HPP_

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "copyptr/random.hpp"
#include "copyptr/tensor.hpp"

namespace copyptr::ad {

struct Parameter {
  std::string name;
  Tensor value;
  // Accumulator written by Graph::backward(); not part of the logical value.
  mutable Tensor grad;
};

// Ordered, name-addressable parameter collection. Element addresses are
// stable under add().
class ParameterSet {
 public:
  // Throws kInvalidConfig on duplicate names.
  std::size_t add(std::string name, Tensor init);

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();
  std::vector<Tensor> snapshot() const;
  // Throws kShapeMismatch unless the snapshot matches in count and shapes.
  void restore(const std::vector<Tensor>& values);
  std::size_t scalar_count() const;

 private:
  std::deque<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

class Graph;

// Handle to a graph node. Cheap to copy; only valid while its graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, std::uint32_t id) : graph_(graph), id_(id) {}

  const Tensor& value() const;
  const Tensor& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double item() const { return value()[0]; }
  bool requires_grad() const;

  Graph* graph() const { return graph_; }
  std::uint32_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  Graph* graph_ = nullptr;
  std::uint32_t id_ = 0;
};

class Graph {
 public:
  enum class Mode { kTrain, kEval };
  using BackwardFn = std::function<void(Graph&, Var self)>;

  // With `record_gradients` false no backward closures are kept and
  // backward() is unavailable (inference).
  explicit Graph(Mode mode = Mode::kEval, std::uint64_t dropout_seed = 0,
                 bool record_gradients = true);
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool training() const { return mode_ == Mode::kTrain; }
  Rng& rng() { return rng_; }

  // Leaf reading `p.value` in place; one node per parameter per graph.
  Var param(const Parameter& p);
  Var constant(Tensor value);
  // Differentiable leaf whose gradient is kept (inputs under test).
  Var leaf(Tensor value);

  // Runs reverse accumulation from a 1x1 loss. Throws kNonScalarLoss, and
  // kGraphReuse on a second call.
  void backward(Var loss);

  const Tensor& value(Var v) const;
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }
  std::size_t node_count() const { return nodes_.size(); }

  // Gradient buffer of `v`, zero-initialized on first access.
  Tensor& grad_buffer(Var v);

  // Records an operation result. `fn` runs during backward() when the
  // result requires a gradient; it reads the output gradient with
  // grad(self) and adds into the inputs' grad_buffer().
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn fn);

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    const Parameter* param = nullptr;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Mode mode_;
  bool record_gradients_;
  Rng rng_;
  bool backward_done_ = false;
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, std::uint32_t> param_nodes_;
};

// ---------------------------------------------------------------------------
// Operations. All throw kShapeMismatch on incompatible shapes and
// kNumericalOverflow on non-finite results.

Var matmul(Var a, Var b);
// b may have a's shape, be a 1 x cols row (broadcast over rows) or 1 x 1.
Var add(Var a, Var b);
Var sub(Var a, Var b);
// Elementwise; b may have a's shape or be 1 x 1.
Var mul(Var a, Var b);
Var scale(Var a, double c);
// 1 - a
Var one_minus(Var a);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
inline Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}
inline Var concat_rows(std::initializer_list<Var> parts) {
  return concat_rows(std::span<const Var>(parts.begin(), parts.size()));
}
Var slice_cols(Var a, std::size_t start, std::size_t count);
Var slice_rows(Var a, std::size_t start, std::size_t count);
Var transpose(Var a);
// Rows `ids` of `table`.
Var embedding(Var table, std::span<const int> ids);
Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var log(Var a);
// Softmax over each row.
Var softmax_rows(Var a);
// Inverted dropout; the identity outside training mode or for p == 0.
Var dropout(Var a, double p);
// Per-row normalization to zero mean / unit variance, then gain and bias
// (both 1 x cols).
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
Var sum(Var a);
// Column-wise mean over rows: [m, n] -> [1, n].
Var mean_rows(Var a);
// -log(dist[0, target]) for a 1 x V probability row.
Var nll(Var dist, std::size_t target);

}  // namespace copyptr::ad

#endif  // COPYPTR_GRAPH_HPP_
