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


// Training loops over a generic differentiable objective.
//
// A Task is anything with `size` examples and a function that builds the
// mean loss of a batch of example indices into a graph. The parser wires
// its sequence loss in through experiment.hpp; tests use closed-form
// objectives.

#ifndef COPYPTR_TRAIN_HPP_
#define COPYPTR_TRAIN_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "copyptr/graph.hpp"
#include "copyptr/optim.hpp"
#include "copyptr/random.hpp"

namespace copyptr {

enum class Regime { kFtOnly, kStFt, kJt, kReptileFt, kFomamlFt };

const char* regime_name(Regime regime);
// Accepts the upper-case names ("REPTILE_FT") and lower-case aliases.
std::optional<Regime> regime_from_name(std::string_view name);

struct TrainConfig {
  int batch_size = 32;
  int max_epochs = 10;
  double lr = 1e-3;
  std::int64_t warmup = 0;
  // Consecutive non-improving validations before stopping.
  int patience = 10;
  // Epochs between validations.
  int val_interval = 1;
  // Hard cap on updates; 0 means none.
  std::int64_t max_updates = 0;
  int upsample = 1;
  std::uint64_t seed = 0;

  // Throws kInvalidConfig.
  void validate() const;
};

enum class InnerAdamPolicy {
  kReset,    // fresh inner optimizer state every episode
  kPersist,  // one inner state carried across episodes
};

struct ReptileConfig {
  int k = 5;
  double inner_lr = 5e-5;
  double outer_lr = 5e-5;
  int batch_size = 32;
  int episodes = 100;
  // Episodes between validations.
  int val_interval = 10;
  int patience = 10;
  InnerAdamPolicy inner_policy = InnerAdamPolicy::kReset;
  std::uint64_t seed = 0;

  void validate() const;
};

struct FomamlConfig {
  double inner_lr = 5e-5;
  double outer_lr = 5e-5;
  int batch_size = 32;
  int episodes = 100;
  int val_interval = 10;
  int patience = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

using Batch = std::vector<std::size_t>;
// Builds the mean loss of `batch` into the graph.
using Objective = std::function<ad::Var(ad::Graph&, const Batch&)>;
// Scores the current parameters; higher is better.
using Validator = std::function<double()>;

struct Task {
  std::string domain;
  std::size_t size = 0;
  Objective objective;
};

// Endless stream of shuffled mini-batches over [0, n): every pass is a
// fresh permutation cut into consecutive batches, the last one possibly
// short.
class BatchStream {
 public:
  BatchStream(std::size_t n, std::size_t batch_size, std::uint64_t seed);

  Batch next();
  // Passes completed so far.
  std::int64_t epoch() const { return epoch_; }
  bool at_epoch_start() const { return position_ == 0; }

 private:
  void reshuffle();

  std::size_t n_;
  std::size_t batch_size_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t position_ = 0;
  std::int64_t epoch_ = 0;
};

struct ValidationRecord {
  std::int64_t update = 0;
  std::int64_t epoch = 0;  // or episode for meta-training
  double score = 0.0;
};

struct TrainHistory {
  std::vector<double> epoch_loss;  // mean training loss per epoch
  std::vector<ValidationRecord> validations;
  std::int64_t updates = 0;
  double best_score = 0.0;
  bool early_stopped = false;
};

// Per-update hook (update index, batch loss), e.g. for trajectory checks.
using UpdateHook = std::function<void(std::int64_t, double)>;

// Teacher-forced mini-batch training with Adam under the warmup /
// inverse-sqrt schedule, validation every `val_interval` epochs and early
// stopping; the best-by-validation parameters are restored at the end.
// Without a validator the final parameters are kept. Throws kEmptyCorpus
// and kDivergedLoss.
TrainHistory supervised_train(ad::ParameterSet& params, const Task& task,
                              const TrainConfig& config,
                              const Validator& validator = {},
                              const UpdateHook& on_update = {});

// One Reptile episode: k Adam steps at rate inner_lr on a copy of the
// parameters, then theta <- theta + outer_lr * (theta_d - theta). Uses
// `inner_state` when given (persisted policy), a fresh state otherwise.
// Throws kBatchCountMismatch unless batches.size() == k.
void reptile_episode(ad::ParameterSet& params, const Task& task,
                     std::span<const Batch> batches, const ReptileConfig& config,
                     std::uint64_t dropout_seed_base, std::int64_t first_update,
                     ad::AdamState* inner_state = nullptr);

// Episodes sample a domain uniformly, draw k batches from that domain's
// stream and apply reptile_episode. Validation every val_interval
// episodes with early stopping; best parameters restored.
TrainHistory reptile_train(ad::ParameterSet& params, std::span<const Task> domains,
                           const ReptileConfig& config,
                           const Validator& validator = {},
                           const UpdateHook& on_update = {});

// First-order MAML: theta_d = theta - inner_lr * grad L(theta; support),
// theta <- theta - outer_lr * grad L(theta_d; query). Throws
// kDomainMismatch when the batches come from different domains.
void fomaml_episode(ad::ParameterSet& params, const Task& support_task,
                    const Batch& support, const Task& query_task,
                    const Batch& query, double inner_lr, double outer_lr,
                    std::uint64_t dropout_seed);

TrainHistory fomaml_train(ad::ParameterSet& params, std::span<const Task> domains,
                          const FomamlConfig& config,
                          const Validator& validator = {});

// Loss and gradient of one batch into `params` (gradients zeroed first).
// Throws kDivergedLoss on a non-finite loss.
double compute_gradient(ad::ParameterSet& params, const Task& task,
                        const Batch& batch, std::uint64_t dropout_seed);

}  // namespace copyptr

#endif  // COPYPTR_TRAIN_HPP_
