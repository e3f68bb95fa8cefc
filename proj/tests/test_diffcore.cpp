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


#include <cmath>
#include <filesystem>
#include <functional>
#include <vector>

#include "copyptr/error.hpp"
#include "copyptr/graph.hpp"
#include "copyptr/optim.hpp"
#include "doctest.h"
#include "gradcheck.hpp"
#include "test_util.hpp"

namespace copyptr::ad {
namespace {

using testing::check_inputs;

Tensor random_tensor(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0,
                     double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(r, c);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(rng);
  return t;
}

// Weighted sum so every output element gets a distinct upstream gradient.
Var weighted_sum(Var x) {
  Graph& g = *x.graph();
  Tensor w(x.rows(), x.cols());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.3 + 0.1 * static_cast<double>(i % 7);
  return sum(mul(x, g.constant(w)));
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kIo;
}

TEST_SUITE("diffcore") {

TEST_CASE("tensor shape invariant") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5)), Error);
  Tensor t({2, 3}, std::vector<double>(6, 1.0));
  CHECK(t.size() == 6);
  CHECK(t.shape_string() == "[2, 3]");
}

TEST_CASE("softmax and sigmoid values") {
  Graph g;
  Var s = softmax_rows(g.constant(Tensor(1, 3, 0.0)));
  for (int i = 0; i < 3; ++i) CHECK(s.value()[i] == doctest::Approx(1.0 / 3.0));
  CHECK(sigmoid(g.constant(Tensor::scalar(0.0))).item() == 0.5);
  Var big = sigmoid(g.constant(Tensor::row({-800.0, 800.0})));
  CHECK(big.value()[0] == 0.0);
  CHECK(big.value()[1] == 1.0);

  Rng rng(1);
  Var r = softmax_rows(g.constant(random_tensor(rng, 4, 9, -30, 30)));
  for (std::size_t i = 0; i < 4; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < 9; ++j) {
      CHECK(r.value()(i, j) >= 0.0);
      total += r.value()(i, j);
    }
    CHECK(std::abs(total - 1.0) < 1e-9);
  }
}

TEST_CASE("matmul against a triple-loop oracle") {
  Rng rng(2);
  Tensor a = random_tensor(rng, 3, 4);
  Tensor b = random_tensor(rng, 4, 2);
  Graph g;
  Var c = matmul(g.constant(a), g.constant(b));
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      double want = 0.0;
      for (std::size_t k = 0; k < 4; ++k) want += a(i, k) * b(k, j);
      CHECK(c.value()(i, j) == doctest::Approx(want).epsilon(1e-14));
    }
  }
  CHECK(code_of([&] { matmul(g.constant(a), g.constant(a)); }) ==
        ErrorCode::kShapeMismatch);
}

TEST_CASE("analytic gradient of sum of squares") {
  Graph g;
  Var x = g.leaf(Tensor::row({1, 2, 3}));
  g.backward(sum(mul(x, x)));
  CHECK(x.grad() == Tensor::row({2, 4, 6}));
}

TEST_CASE("constant loss gives zero gradients") {
  Graph g;
  Var x = g.leaf(Tensor::row({1, 2}));
  Var loss = add(scale(sum(x), 0.0), g.constant(Tensor::scalar(3.0)));
  g.backward(loss);
  CHECK(x.grad() == Tensor::row({0, 0}));
}

TEST_CASE("backward errors") {
  Graph g;
  Var x = g.leaf(Tensor::row({1, 2}));
  CHECK(code_of([&] { g.backward(x); }) == ErrorCode::kNonScalarLoss);
  Var l = sum(x);
  g.backward(l);
  CHECK(code_of([&] { g.backward(l); }) == ErrorCode::kGraphReuse);
  Graph frozen(Graph::Mode::kEval, 0, false);
  Var y = frozen.constant(Tensor::scalar(1.0));
  CHECK_THROWS_AS(frozen.backward(y), Error);
}

TEST_CASE("overflow is reported") {
  Graph g;
  Var x = g.constant(Tensor::scalar(0.0));
  CHECK(code_of([&] { log(x); }) == ErrorCode::kNumericalOverflow);
  Var p = g.constant(Tensor::row({0.0, 1.0}));
  CHECK(code_of([&] { nll(p, 0); }) == ErrorCode::kNumericalOverflow);
}

TEST_CASE("primitive gradients match finite differences") {
  Rng rng(3);
  auto A = [&](std::size_t r, std::size_t c) { return random_tensor(rng, r, c); };
  auto P = [&](std::size_t r, std::size_t c) {
    return random_tensor(rng, r, c, 0.2, 1.5);
  };
  const double tol = 1e-6;
  using V = std::vector<Var>;
  CHECK(check_inputs([](Graph&, const V& v) { return weighted_sum(matmul(v[0], v[1])); },
                     {A(3, 4), A(4, 2)}) < tol);
  CHECK(check_inputs([](Graph&, const V& v) { return weighted_sum(add(v[0], v[1])); },
                     {A(3, 4), A(3, 4)}) < tol);
  CHECK(check_inputs([](Graph&, const V& v) { return weighted_sum(add(v[0], v[1])); },
                     {A(3, 4), A(1, 4)}) < tol);
  CHECK(check_inputs([](Graph&, const V& v) { return weighted_sum(sub(v[0], v[1])); },
                     {A(3, 4), A(1, 1)}) < tol);
  CHECK(check_inputs([](Graph&, const V& v) { return weighted_sum(mul(v[0], v[1])); },
                     {A(2, 3), A(2, 3)}) < tol);
  CHECK(check_inputs([](Graph&, const V& v) { return weighted_sum(mul(v[0], v[1])); },
                     {A(2, 3), A(1, 1)}) < tol);
  CHECK(check_inputs([](Graph&, const V& v) { return weighted_sum(scale(v[0], -2.5)); },
                     {A(2, 3)}) < tol);
  CHECK(check_inputs([](Graph&, const V& v) { return weighted_sum(one_minus(v[0])); },
                     {A(2, 3)}) < tol);
  CHECK(check_inputs(
            [](Graph&, const V& v) { return weighted_sum(concat_cols({v[0], v[1]})); },
            {A(2, 3), A(2, 1)}) < tol);
  CHECK(check_inputs(
            [](Graph&, const V& v) { return weighted_sum(concat_rows({v[0], v[1]})); },
            {A(2, 3), A(1, 3)}) < tol);
  CHECK(check_inputs([](Graph&, const V& v) { return weighted_sum(slice_cols(v[0], 1, 2)); },
                     {A(3, 4)}) < tol);
  CHECK(check_inputs([](Graph&, const V& v) { return weighted_sum(slice_rows(v[0], 1, 2)); },
                     {A(3, 4)}) < tol);
  CHECK(check_inputs([](Graph&, const V& v) { return weighted_sum(transpose(v[0])); },
                     {A(3, 4)}) < tol);
  CHECK(check_inputs(
            [](Graph&, const V& v) {
              const std::vector<int> ids = {2, 0, 2};
              return weighted_sum(embedding(v[0], ids));
            },
            {A(4, 3)}) < tol);
  CHECK(check_inputs([](Graph&, const V& v) { return weighted_sum(tanh(v[0])); },
                     {A(2, 3)}) < tol);
  CHECK(check_inputs([](Graph&, const V& v) { return weighted_sum(sigmoid(v[0])); },
                     {A(2, 3)}) < tol);
  CHECK(check_inputs([](Graph&, const V& v) { return weighted_sum(relu(v[0])); },
                     {Tensor::row({-0.7, -0.2, 0.3, 0.9})}) < tol);
  CHECK(check_inputs([](Graph&, const V& v) { return weighted_sum(log(v[0])); },
                     {P(2, 3)}) < tol);
  CHECK(check_inputs([](Graph&, const V& v) { return weighted_sum(softmax_rows(v[0])); },
                     {A(3, 5)}) < tol);
  CHECK(check_inputs(
            [](Graph&, const V& v) { return weighted_sum(layer_norm(v[0], v[1], v[2])); },
            {A(3, 5), P(1, 5), A(1, 5)}) < tol);
  CHECK(check_inputs([](Graph&, const V& v) { return weighted_sum(mean_rows(v[0])); },
                     {A(3, 5)}) < tol);
  CHECK(check_inputs([](Graph&, const V& v) { return sum(v[0]); }, {A(3, 5)}) < tol);
  CHECK(check_inputs([](Graph&, const V& v) { return nll(softmax_rows(v[0]), 2); },
                     {A(1, 5)}) < tol);
}

TEST_CASE("dropout gradient with a fixed mask") {
  Rng rng(4);
  Tensor x = random_tensor(rng, 3, 6);
  Graph g(Graph::Mode::kTrain, 99);
  Var leaf = g.leaf(x);
  g.backward(weighted_sum(dropout(leaf, 0.5)));
  Graph again(Graph::Mode::kTrain, 99);
  Var mask = dropout(again.constant(Tensor(3, 6, 1.0)), 0.5);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = 0.3 + 0.1 * static_cast<double>(i % 7);
    CHECK(leaf.grad()[i] == doctest::Approx(w * mask.value()[i]));
  }
}

TEST_CASE("composite graphs match finite differences") {
  Rng rng(5);
  auto A = [&](std::size_t r, std::size_t c) { return random_tensor(rng, r, c); };
  using V = std::vector<Var>;
  // attention-like
  CHECK(check_inputs(
            [](Graph&, const V& v) {
              Var a = softmax_rows(matmul(v[0], transpose(v[1])));
              return weighted_sum(tanh(matmul(a, v[1])));
            },
            {A(2, 4), A(5, 4)}) < 1e-6);
  // gated mixture with a scalar gate
  CHECK(check_inputs(
            [](Graph&, const V& v) {
              Var p = sigmoid(matmul(v[0], v[1]));
              Var mix = concat_cols({mul(softmax_rows(v[0]), one_minus(p)),
                                     mul(softmax_rows(v[2]), p)});
              return nll(mix, 4);
            },
            {A(1, 3), A(3, 1), A(1, 4)}) < 1e-6);
  // normalized residual block
  CHECK(check_inputs(
            [](Graph& g, const V& v) {
              Var h = add(v[0], relu(matmul(v[0], v[1])));
              Var n = layer_norm(h, g.constant(Tensor(1, 3, 1.0)),
                                 g.constant(Tensor(1, 3, 0.0)));
              return sum(mul(mean_rows(n), mean_rows(n)));
            },
            {A(4, 3), A(3, 3)}) < 1e-6);
}

TEST_CASE("dropout semantics") {
  Rng rng(6);
  Tensor x = random_tensor(rng, 4, 8);
  Graph train(Graph::Mode::kTrain, 1);
  CHECK(dropout(train.constant(x), 0.0).value() == x);
  Graph eval(Graph::Mode::kEval, 1);
  CHECK(dropout(eval.constant(x), 0.7).value() == x);
  Var d = dropout(train.constant(Tensor(1, 1000, 1.0)), 0.4);
  for (double v : d.value().values()) {
    CHECK((v == 0.0 || std::abs(v - 1.0 / 0.6) < 1e-12));
  }
  CHECK(code_of([&] { dropout(train.constant(x), 1.0); }) ==
        ErrorCode::kInvalidConfig);
}

TEST_CASE("schedule") {
  LrSchedule s{1e-4, 4000};
  CHECK(s.rate(4000) == doctest::Approx(1e-4));
  CHECK(s.rate(2000) == doctest::Approx(0.5e-4));
  CHECK(s.rate(16000) == doctest::Approx(0.5e-4));
  for (std::int64_t u : {1, 10, 3999, 4001, 100000}) CHECK(s.rate(u) > 0.0);
  CHECK(LrSchedule{2e-3, 0}.rate(17) == 2e-3);
}

TEST_CASE("adam against a scalar oracle") {
  ParameterSet ps;
  ps.add("w", Tensor::scalar(1.0));
  AdamState st;
  double m = 0.0, v = 0.0, w = 1.0;
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8, lr = 0.1;
  const double grads[] = {1.0, -0.5, 2.0, 0.25};
  for (int t = 1; t <= 4; ++t) {
    const double gr = grads[t - 1];
    ps[0].grad = Tensor::scalar(gr);
    adam_step(ps, st, lr);
    m = b1 * m + (1 - b1) * gr;
    v = b2 * v + (1 - b2) * gr * gr;
    w -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
    CHECK(ps[0].value[0] == doctest::Approx(w).epsilon(1e-12));
    if (t == 1) CHECK(ps[0].value[0] == doctest::Approx(0.9).epsilon(1e-6));
  }
  CHECK(st.step == 4);
}

TEST_CASE("adam edge cases") {
  ParameterSet ps;
  ps.add("a", Tensor::row({1, 2, 3}));
  ps.zero_grad();
  AdamState st;
  adam_step(ps, st, 0.1);
  CHECK(ps[0].value == Tensor::row({1, 2, 3}));
  CHECK(st.step == 1);
  ps[0].grad = Tensor::row({1, -1, 2});
  adam_step(ps, st, 0.0);
  CHECK(ps[0].value == Tensor::row({1, 2, 3}));

  ParameterSet other;
  other.add("a", Tensor::row({1, 2}));
  other.add("b", Tensor::row({1, 2}));
  other.zero_grad();
  CHECK(code_of([&] { adam_step(other, st, 0.1); }) == ErrorCode::kShapeMismatch);

  ParameterSet x, y;
  x.add("p", Tensor::row({0.5, -0.5}));
  y.add("p", Tensor::row({0.5, -0.5}));
  AdamState sx, sy;
  for (int i = 0; i < 3; ++i) {
    x[0].grad = Tensor::row({0.1 * i, 1.0});
    y[0].grad = Tensor::row({0.1 * i, 1.0});
    adam_step(x, sx, 0.01);
    adam_step(y, sy, 0.01);
  }
  CHECK(x[0].value == y[0].value);
}

TEST_CASE("parameter set") {
  ParameterSet ps;
  CHECK(ps.add("a", Tensor(2, 2)) == 0);
  CHECK(ps.add("b", Tensor(1, 3)) == 1);
  CHECK(code_of([&] { ps.add("a", Tensor(1, 1)); }) == ErrorCode::kInvalidConfig);
  CHECK(ps.scalar_count() == 7);
  CHECK(ps.find("b") == &ps[1]);
  CHECK(ps.find("zz") == nullptr);
  auto snap = ps.snapshot();
  ps[0].value[0] = 5.0;
  ps.restore(snap);
  CHECK(ps[0].value[0] == 0.0);
  CHECK(code_of([&] { ps.restore({Tensor(1, 1)}); }) == ErrorCode::kShapeMismatch);
}

TEST_CASE("checkpoint round trip is bit exact") {
  testing::TempDir dir("ckpt");
  Rng rng(8);
  ParameterSet ps;
  ps.add("w", random_tensor(rng, 3, 4));
  ps.add("b", random_tensor(rng, 1, 4));
  save_checkpoint(ps, dir.path() / "p.bin");

  ParameterSet back;
  back.add("b", Tensor(1, 4));
  back.add("w", Tensor(3, 4));
  load_checkpoint(back, dir.path() / "p.bin");
  CHECK(back.find("w")->value == ps[0].value);
  CHECK(back.find("b")->value == ps[1].value);

  ParameterSet wrong;
  wrong.add("w", Tensor(4, 3));
  wrong.add("b", Tensor(1, 4));
  CHECK(code_of([&] { load_checkpoint(wrong, dir.path() / "p.bin"); }) ==
        ErrorCode::kCheckpointMismatch);
  ParameterSet missing;
  missing.add("w", Tensor(3, 4));
  CHECK(code_of([&] { load_checkpoint(missing, dir.path() / "p.bin"); }) ==
        ErrorCode::kCheckpointMismatch);
  CHECK(code_of([&] { load_checkpoint(back, dir.path() / "none.bin"); }) ==
        ErrorCode::kFileNotFound);
}

}  // TEST_SUITE

}  // namespace
}  // namespace copyptr::ad
