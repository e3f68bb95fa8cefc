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
#include <functional>
#include <random>
#include <set>
#include <vector>

#include "copyptr/error.hpp"
#include "copyptr/train.hpp"
#include "doctest.h"

namespace copyptr {
namespace {

using ad::Graph;
using ad::ParameterSet;
using ad::Tensor;
using ad::Var;

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kIo;
}

Var accumulate(Var total, Var term) { return total.valid() ? ad::add(total, term) : term; }

// mean_i ||w - x_i||^2 over the batch, gradient 2 (w - mean x).
Task quadratic_task(ParameterSet& params, std::size_t w, std::vector<Tensor> points,
                    std::string domain = "q", double dropout = 0.0) {
  const std::size_t n = points.size();
  return Task{std::move(domain), n,
              [&params, w, dropout, pts = std::move(points)](Graph& g, const Batch& b) {
                Var wv = ad::dropout(g.param(params[w]), dropout);
                Var total;
                for (std::size_t i : b) {
                  Var d = ad::sub(wv, g.constant(pts[i]));
                  total = accumulate(total, ad::sum(ad::mul(d, d)));
                }
                return ad::scale(total, 1.0 / static_cast<double>(b.size()));
              }};
}

std::vector<Tensor> points_around(Rng& rng, std::vector<double> center, int count,
                                  double spread) {
  std::normal_distribution<double> noise(0.0, spread);
  std::vector<Tensor> out;
  for (int i = 0; i < count; ++i) {
    std::vector<double> v = center;
    for (double& x : v) x += noise(rng);
    out.push_back(Tensor::row(v));
  }
  return out;
}

double distance(const Tensor& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

TEST_SUITE("train") {

TEST_CASE("regime names round trip") {
  for (Regime r : {Regime::kFtOnly, Regime::kStFt, Regime::kJt, Regime::kReptileFt,
                   Regime::kFomamlFt}) {
    CHECK(regime_from_name(regime_name(r)) == r);
  }
  CHECK(regime_from_name("reptile-ft") == Regime::kReptileFt);
  CHECK_FALSE(regime_from_name("maml").has_value());
}

TEST_CASE("config validation") {
  TrainConfig t;
  t.batch_size = 0;
  CHECK(code_of([&] { t.validate(); }) == ErrorCode::kInvalidConfig);
  ReptileConfig r;
  r.outer_lr = 1.5;
  CHECK(code_of([&] { r.validate(); }) == ErrorCode::kInvalidConfig);
  r.outer_lr = 0.5;
  r.k = 0;
  CHECK(code_of([&] { r.validate(); }) == ErrorCode::kInvalidConfig);
  FomamlConfig f;
  f.patience = 0;
  CHECK(code_of([&] { f.validate(); }) == ErrorCode::kInvalidConfig);
}

TEST_CASE("batch stream passes are permutations") {
  BatchStream a(10, 4, 7), b(10, 4, 7);
  for (int pass = 0; pass < 3; ++pass) {
    std::multiset<std::size_t> seen;
    std::vector<std::size_t> sizes;
    do {
      Batch x = a.next();
      CHECK(x == b.next());
      sizes.push_back(x.size());
      seen.insert(x.begin(), x.end());
    } while (!a.at_epoch_start());
    CHECK(sizes == std::vector<std::size_t>{4, 4, 2});
    CHECK(seen == std::multiset<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
    CHECK(a.epoch() == pass + 1);
  }
  CHECK(code_of([] { BatchStream(0, 4, 1); }) == ErrorCode::kEmptyCorpus);
}

TEST_CASE("supervised training approaches the data mean") {
  ParameterSet params;
  const std::size_t w = params.add("w", Tensor::row({3.0, -2.0}));
  Rng rng(1);
  Task task = quadratic_task(params, w, points_around(rng, {0.5, 0.5}, 40, 0.1));
  TrainConfig config;
  config.batch_size = 8;
  config.max_epochs = 60;
  config.lr = 0.05;
  const TrainHistory h = supervised_train(params, task, config);
  CHECK(h.updates == 60 * 5);
  CHECK(h.epoch_loss.back() < h.epoch_loss.front());
  CHECK(distance(params[w].value, {0.5, 0.5}) < 0.1);
}

TEST_CASE("early stopping honours patience and restores the best") {
  ParameterSet params;
  const std::size_t w = params.add("w", Tensor::row({1.0}));
  Rng rng(2);
  Task task = quadratic_task(params, w, points_around(rng, {0.0}, 16, 0.1));
  TrainConfig config;
  config.batch_size = 4;
  config.max_epochs = 20;
  config.lr = 0.01;

  SUBCASE("constant score") {
    config.patience = 1;
    int calls = 0;
    const TrainHistory h = supervised_train(params, task, config, [&] {
      ++calls;
      return 0.5;
    });
    CHECK(calls == 2);
    CHECK(h.validations.size() == 2);
    CHECK(h.early_stopped);
  }
  SUBCASE("best snapshot") {
    config.patience = 2;
    const std::vector<double> scores = {0.1, 0.5, 0.2, 0.3, 0.9};
    std::vector<Tensor> seen;
    const TrainHistory h = supervised_train(params, task, config, [&] {
      seen.push_back(params[w].value);
      return scores[seen.size() - 1];
    });
    CHECK(h.validations.size() == 4);
    CHECK(h.early_stopped);
    CHECK(h.best_score == 0.5);
    CHECK(params[w].value[0] == seen[1][0]);
  }
}

TEST_CASE("supervised training is deterministic in its seed") {
  auto run = [](std::uint64_t seed) {
    ParameterSet params;
    const std::size_t w = params.add("w", Tensor::row({1.0, 1.0, 1.0}));
    Rng rng(3);
    Task task = quadratic_task(params, w, points_around(rng, {0, 0, 0}, 20, 1.0), "q", 0.3);
    TrainConfig config;
    config.batch_size = 3;
    config.max_epochs = 3;
    config.lr = 0.01;
    config.seed = seed;
    supervised_train(params, task, config);
    return std::vector<double>(params[w].value.values().begin(),
                               params[w].value.values().end());
  };
  CHECK(run(5) == run(5));
  CHECK(run(5) != run(6));
}

TEST_CASE("non-finite loss is a divergence") {
  ParameterSet params;
  params.add("w", Tensor::row({1.0}));
  Task task{"q", 1, [&](Graph& g, const Batch&) {
              return ad::log(ad::scale(g.param(params[0]), 0.0));
            }};
  CHECK(code_of([&] { compute_gradient(params, task, {0}, 0); }) ==
        ErrorCode::kDivergedLoss);
  TrainConfig config;
  CHECK(code_of([&] { supervised_train(params, task, config); }) ==
        ErrorCode::kDivergedLoss);
}

TEST_CASE("reptile episode with k=1 and unit outer rate is one Adam step") {
  ParameterSet params;
  const std::size_t w = params.add("w", Tensor::row({0.3, -0.7}));
  Rng rng(4);
  const std::vector<Tensor> pts = points_around(rng, {1.0, 1.0}, 8, 0.5);
  Task task = quadratic_task(params, w, pts);
  ReptileConfig config;
  config.k = 1;
  config.inner_lr = 0.01;
  config.outer_lr = 1.0;
  const Batch batch = {0, 3, 5};

  ParameterSet manual;
  manual.add("w", params[w].value);
  Task manual_task = quadratic_task(manual, 0, pts);
  compute_gradient(manual, manual_task, batch, 0);
  ad::AdamState adam;
  ad::adam_step(manual, adam, 0.01);

  reptile_episode(params, task, std::span<const Batch>(&batch, 1), config, 0, 1);
  CHECK(params[w].value[0] == manual[0].value[0]);
  CHECK(params[w].value[1] == manual[0].value[1]);
}

TEST_CASE("reptile outer rate bounds") {
  Rng rng(5);
  const std::vector<Tensor> pts = points_around(rng, {2.0, -1.0, 0.5}, 12, 0.3);
  const std::vector<Batch> batches = {{0, 1}, {2, 3}, {4, 5}};
  auto episode = [&](double alpha) {
    ParameterSet params;
    params.add("w", Tensor::row({0.1, 0.2, 0.3}));
    Task task = quadratic_task(params, 0, pts);
    ReptileConfig config;
    config.k = 3;
    config.inner_lr = 0.05;
    config.outer_lr = alpha;
    reptile_episode(params, task, batches, config, 0, 1);
    return params[0].value;
  };
  const Tensor start = Tensor::row({0.1, 0.2, 0.3});
  const Tensor adapted = episode(1.0);
  for (double alpha : {0.1, 0.5, 0.9}) {
    const Tensor mixed = episode(alpha);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(mixed[i] >= std::min(start[i], adapted[i]));
      CHECK(mixed[i] <= std::max(start[i], adapted[i]));
      CHECK(mixed[i] == doctest::Approx(start[i] + alpha * (adapted[i] - start[i])).epsilon(1e-12));
    }
  }
  ParameterSet frozen;
  frozen.add("w", start);
  Task task = quadratic_task(frozen, 0, pts);
  ReptileConfig config;
  config.k = 3;
  config.outer_lr = 0.0;
  reptile_episode(frozen, task, batches, config, 0, 1);
  for (std::size_t i = 0; i < 3; ++i) CHECK(frozen[0].value[i] == start[i]);

  config.k = 2;
  CHECK(code_of([&] { reptile_episode(frozen, task, batches, config, 0, 1); }) ==
        ErrorCode::kBatchCountMismatch);
}

TEST_CASE("reptile moves towards a single task optimum") {
  ParameterSet params;
  const std::size_t w = params.add("w", Tensor::row({-2.0, 2.0}));
  Rng rng(6);
  std::vector<Task> tasks = {quadratic_task(params, w, points_around(rng, {1.0, 0.0}, 30, 0.05))};
  ReptileConfig config;
  config.k = 5;
  config.inner_lr = 0.05;
  config.outer_lr = 0.5;
  config.batch_size = 5;
  config.episodes = 10;
  std::vector<double> dist = {distance(params[w].value, {1.0, 0.0})};
  reptile_train(params, tasks, config, {}, [&](std::int64_t, double) {
    dist.push_back(distance(params[w].value, {1.0, 0.0}));
  });
  REQUIRE(dist.size() == 11);
  for (std::size_t i = 1; i < dist.size(); ++i) CHECK(dist[i] < dist[i - 1]);
}

TEST_CASE("zero episodes leave parameters unchanged") {
  ParameterSet params;
  params.add("w", Tensor::row({0.25, 0.5}));
  Rng rng(7);
  std::vector<Task> tasks = {quadratic_task(params, 0, points_around(rng, {1, 1}, 4, 0.1))};
  ReptileConfig r;
  r.episodes = 0;
  const TrainHistory h = reptile_train(params, tasks, r);
  CHECK(h.updates == 0);
  FomamlConfig f;
  f.episodes = 0;
  fomaml_train(params, tasks, f);
  CHECK(params[0].value[0] == 0.25);
  CHECK(params[0].value[1] == 0.5);
}

TEST_CASE("fomaml episode matches the closed form") {
  const std::vector<Tensor> pts = {Tensor::row({1.0, 2.0}), Tensor::row({3.0, 0.0}),
                                   Tensor::row({-1.0, 1.0}), Tensor::row({0.0, -3.0})};
  const std::vector<double> theta = {0.5, -0.5};
  const double eta = 0.1, beta = 0.2;
  // grad of the batch loss at w is 2 (w - mean x)
  const std::vector<double> s_mean = {2.0, 1.0}, q_mean = {-0.5, -1.0};
  auto run = [&](double inner, double outer) {
    ParameterSet params;
    params.add("w", Tensor::row(theta));
    Task task = quadratic_task(params, 0, pts, "d");
    fomaml_episode(params, task, {0, 1}, task, {2, 3}, inner, outer, 9);
    return params[0].value;
  };
  const Tensor got = run(eta, beta);
  const Tensor sgd_only = run(0.0, beta);
  const Tensor frozen = run(eta, 0.0);
  for (std::size_t i = 0; i < 2; ++i) {
    const double adapted = theta[i] - eta * 2.0 * (theta[i] - s_mean[i]);
    const double expect = theta[i] - beta * 2.0 * (adapted - q_mean[i]);
    CHECK(std::abs(got[i] - expect) < 1e-8);
    CHECK(std::abs(sgd_only[i] - (theta[i] - beta * 2.0 * (theta[i] - q_mean[i]))) < 1e-8);
    CHECK(frozen[i] == theta[i]);
  }

  ParameterSet params;
  params.add("w", Tensor::row(theta));
  Task a = quadratic_task(params, 0, pts, "a");
  Task b = quadratic_task(params, 0, pts, "b");
  CHECK(code_of([&] { fomaml_episode(params, a, {0}, b, {1}, eta, beta, 0); }) ==
        ErrorCode::kDomainMismatch);
}

TEST_CASE("reptile with k=1 and unit outer rate follows supervised training") {
  Rng rng(8);
  const std::vector<Tensor> pts = points_around(rng, {1.0, -1.0, 0.5, 2.0}, 37, 0.7);
  const Tensor init = Tensor::row({0.0, 0.1, 0.2, 0.3});

  std::vector<Tensor> supervised;
  {
    ParameterSet params;
    params.add("w", init);
    Task task = quadratic_task(params, 0, pts, "d", 0.25);
    TrainConfig config;
    config.batch_size = 6;
    config.lr = 0.02;
    config.max_epochs = 100;
    config.max_updates = 40;
    config.seed = 11;
    supervised_train(params, task, config, {},
                     [&](std::int64_t, double) { supervised.push_back(params[0].value); });
  }
  std::vector<Tensor> reptile;
  {
    ParameterSet params;
    params.add("w", init);
    std::vector<Task> tasks = {quadratic_task(params, 0, pts, "d", 0.25)};
    ReptileConfig config;
    config.k = 1;
    config.inner_lr = 0.02;
    config.outer_lr = 1.0;
    config.batch_size = 6;
    config.episodes = 40;
    config.inner_policy = InnerAdamPolicy::kPersist;
    config.seed = 11;
    reptile_train(params, tasks, config, {},
                  [&](std::int64_t, double) { reptile.push_back(params[0].value); });
  }
  REQUIRE(supervised.size() == 40);
  REQUIRE(reptile.size() == 40);
  for (std::size_t u = 0; u < 40; ++u) {
    for (std::size_t i = 0; i < 4; ++i) CHECK(reptile[u][i] == supervised[u][i]);
  }
}

// Regression tasks y = a sin(x + b) with a model linear in
// [sin x, cos x, 1]; a meta-learned start adapts better than zero.
TEST_CASE("reptile learns a useful initialization for sinusoid tasks") {
  constexpr int kPoints = 20;
  auto make_task = [&](ParameterSet& params, Rng& rng, const std::string& name) {
    std::uniform_real_distribution<double> amp(1.0, 2.0), phase(0.0, 0.5), xs(-3.0, 3.0);
    const double a = amp(rng), b = phase(rng);
    std::vector<Tensor> feats;
    std::vector<double> ys;
    for (int i = 0; i < kPoints; ++i) {
      const double x = xs(rng);
      feats.push_back(Tensor::row({std::sin(x), std::cos(x), 1.0}));
      ys.push_back(a * std::sin(x + b));
    }
    return Task{name, kPoints, [&params, feats, ys](Graph& g, const Batch& batch) {
                  Var w = g.param(params[0]);
                  Var total;
                  for (std::size_t i : batch) {
                    Var err = ad::sub(ad::matmul(g.constant(feats[i]), w),
                                      g.constant(Tensor::scalar(ys[i])));
                    total = accumulate(total, ad::mul(err, err));
                  }
                  return ad::scale(total, 1.0 / static_cast<double>(batch.size()));
                }};
  };
  auto adapted_loss = [&](const Tensor& start, std::uint64_t seed) {
    ParameterSet params;
    params.add("w", start);
    Rng rng(seed);
    Task task = make_task(params, rng, "held-out");
    Batch all(kPoints);
    for (int i = 0; i < kPoints; ++i) all[i] = static_cast<std::size_t>(i);
    for (int s = 0; s < 2; ++s) {
      compute_gradient(params, task, all, 0);
      ad::sgd_step(params, 0.1);
    }
    return compute_gradient(params, task, all, 0);
  };
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ParameterSet params;
    params.add("w", Tensor(3, 1));
    Rng rng(100 + seed);
    std::vector<Task> tasks;
    for (int t = 0; t < 8; ++t) tasks.push_back(make_task(params, rng, "t" + std::to_string(t)));
    ReptileConfig config;
    config.k = 5;
    config.inner_lr = 0.05;
    config.outer_lr = 0.5;
    config.batch_size = 10;
    config.episodes = 200;
    config.seed = seed;
    reptile_train(params, tasks, config);
    const double meta = adapted_loss(params[0].value, 900 + seed);
    const double scratch = adapted_loss(Tensor(3, 1), 900 + seed);
    CHECK(meta < scratch);
  }
}

}  // TEST_SUITE

}  // namespace
}  // namespace copyptr
