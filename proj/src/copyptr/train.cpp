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

#include "copyptr/train.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

#include "copyptr/error.hpp"

namespace copyptr {

namespace {

constexpr std::uint64_t kStreamTag = 0x5EED;
constexpr std::uint64_t kDropoutTag = 0xD50F;
constexpr std::uint64_t kDomainTag = 0xD0A1;

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) {
  return derive_seed(derive_seed(seed, kStreamTag), index);
}

std::uint64_t dropout_seed(std::uint64_t seed, std::int64_t update) {
  return derive_seed(derive_seed(seed, kDropoutTag), static_cast<std::uint64_t>(update));
}

void invalid(const std::string& msg) { throw Error(ErrorCode::kInvalidConfig, msg); }

// Best-by-validation bookkeeping shared by every loop.
class EarlyStopper {
 public:
  EarlyStopper(const ad::ParameterSet& params, int patience)
      : params_(params), patience_(patience) {}

  // Returns true when training should stop.
  bool observe(double score, std::int64_t update, std::int64_t epoch,
               TrainHistory& history) {
    history.validations.push_back({update, epoch, score});
    if (!seen_ || score > best_) {
      seen_ = true;
      best_ = score;
      best_params_ = params_.snapshot();
      stale_ = 0;
      history.best_score = score;
      return false;
    }
    if (++stale_ >= patience_) {
      history.early_stopped = true;
      return true;
    }
    return false;
  }

  void restore_best(ad::ParameterSet& params) const {
    if (seen_) params.restore(best_params_);
  }

 private:
  const ad::ParameterSet& params_;
  int patience_;
  bool seen_ = false;
  double best_ = -std::numeric_limits<double>::infinity();
  int stale_ = 0;
  std::vector<ad::Tensor> best_params_;
};

}  // namespace

const char* regime_name(Regime regime) {
  switch (regime) {
    case Regime::kFtOnly: return "FT_ONLY";
    case Regime::kStFt: return "ST_FT";
    case Regime::kJt: return "JT";
    case Regime::kReptileFt: return "REPTILE_FT";
    case Regime::kFomamlFt: return "FOMAML_FT";
  }
  return "?";
}

std::optional<Regime> regime_from_name(std::string_view name) {
  std::string upper(name);
  for (char& c : upper) {
    c = c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  for (Regime r : {Regime::kFtOnly, Regime::kStFt, Regime::kJt,
                   Regime::kReptileFt, Regime::kFomamlFt}) {
    if (upper == regime_name(r)) return r;
  }
  return std::nullopt;
}

void TrainConfig::validate() const {
  if (batch_size < 1) invalid("batch size must be >= 1");
  if (max_epochs < 0) invalid("max epochs must be >= 0");
  if (!(lr >= 0.0) || !std::isfinite(lr)) invalid("learning rate must be >= 0");
  if (warmup < 0) invalid("warmup must be >= 0");
  if (patience < 1) invalid("patience must be >= 1");
  if (val_interval < 1) invalid("validation interval must be >= 1");
  if (max_updates < 0) invalid("max updates must be >= 0");
  if (upsample < 1) invalid("upsample factor must be >= 1");
}

void ReptileConfig::validate() const {
  if (k < 1) invalid("reptile k must be >= 1");
  if (!(inner_lr > 0.0)) invalid("reptile inner learning rate must be > 0");
  if (!(outer_lr > 0.0 && outer_lr <= 1.0)) invalid("reptile outer rate must be in (0, 1]");
  if (batch_size < 1) invalid("batch size must be >= 1");
  if (episodes < 0) invalid("episodes must be >= 0");
  if (val_interval < 1) invalid("validation interval must be >= 1");
  if (patience < 1) invalid("patience must be >= 1");
}

void FomamlConfig::validate() const {
  if (!(inner_lr >= 0.0)) invalid("fomaml inner learning rate must be >= 0");
  if (!(outer_lr >= 0.0)) invalid("fomaml outer learning rate must be >= 0");
  if (batch_size < 1) invalid("batch size must be >= 1");
  if (episodes < 0) invalid("episodes must be >= 0");
  if (val_interval < 1) invalid("validation interval must be >= 1");
  if (patience < 1) invalid("patience must be >= 1");
}

// ---------------------------------------------------------------------------
// BatchStream

BatchStream::BatchStream(std::size_t n, std::size_t batch_size, std::uint64_t seed)
    : n_(n), batch_size_(batch_size), rng_(seed), order_(n) {
  if (n == 0) throw Error(ErrorCode::kEmptyCorpus, "no examples to batch");
  if (batch_size == 0) invalid("batch size must be >= 1");
  reshuffle();
}

void BatchStream::reshuffle() {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::shuffle(order_.begin(), order_.end(), rng_);
}

Batch BatchStream::next() {
  const std::size_t end = std::min(n_, position_ + batch_size_);
  Batch b(order_.begin() + static_cast<std::ptrdiff_t>(position_),
          order_.begin() + static_cast<std::ptrdiff_t>(end));
  position_ = end;
  if (position_ == n_) {
    position_ = 0;
    ++epoch_;
    reshuffle();
  }
  return b;
}

// ---------------------------------------------------------------------------
// Loops

double compute_gradient(ad::ParameterSet& params, const Task& task,
                        const Batch& batch, std::uint64_t seed) {
  params.zero_grad();
  ad::Graph g(ad::Graph::Mode::kTrain, seed);
  try {
    ad::Var loss = task.objective(g, batch);
    const double value = loss.item();
    if (!std::isfinite(value)) throw Error(ErrorCode::kDivergedLoss, "non-finite loss");
    g.backward(loss);
    return value;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kNumericalOverflow) {
      throw Error(ErrorCode::kDivergedLoss, e.what());
    }
    throw;
  }
}

TrainHistory supervised_train(ad::ParameterSet& params, const Task& task,
                              const TrainConfig& config,
                              const Validator& validator,
                              const UpdateHook& on_update) {
  config.validate();
  if (task.size == 0) throw Error(ErrorCode::kEmptyCorpus, "empty training corpus");
  BatchStream stream(task.size, static_cast<std::size_t>(config.batch_size),
                     stream_seed(config.seed, 0));
  ad::AdamState adam;
  const ad::LrSchedule schedule{config.lr, config.warmup};
  EarlyStopper stopper(params, config.patience);
  TrainHistory history;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    double total = 0.0;
    std::size_t batches = 0;
    bool capped = false;
    do {
      const Batch batch = stream.next();
      ++history.updates;
      const double loss = compute_gradient(params, task, batch,
                                           dropout_seed(config.seed, history.updates));
      ad::adam_step(params, adam, schedule.rate(history.updates));
      if (on_update) on_update(history.updates, loss);
      total += loss;
      ++batches;
      capped = config.max_updates > 0 && history.updates >= config.max_updates;
    } while (!stream.at_epoch_start() && !capped);
    history.epoch_loss.push_back(total / static_cast<double>(batches));

    const bool last = capped || epoch == config.max_epochs;
    if (validator && (epoch % config.val_interval == 0 || last)) {
      if (stopper.observe(validator(), history.updates, epoch, history)) break;
    }
    if (capped) break;
  }
  if (validator) stopper.restore_best(params);
  return history;
}

void reptile_episode(ad::ParameterSet& params, const Task& task,
                     std::span<const Batch> batches, const ReptileConfig& config,
                     std::uint64_t dropout_seed_base, std::int64_t first_update,
                     ad::AdamState* inner_state) {
  if (batches.size() != static_cast<std::size_t>(config.k)) {
    throw Error(ErrorCode::kBatchCountMismatch,
                "episode has " + std::to_string(batches.size()) + " batches, k = " +
                    std::to_string(config.k));
  }
  const std::vector<ad::Tensor> theta = params.snapshot();
  ad::AdamState fresh;
  ad::AdamState& adam = inner_state ? *inner_state : fresh;
  for (std::size_t i = 0; i < batches.size(); ++i) {
    const std::int64_t update = first_update + static_cast<std::int64_t>(i);
    compute_gradient(params, task, batches[i], dropout_seed(dropout_seed_base, update));
    ad::adam_step(params, adam, config.inner_lr);
  }
  // theta <- (1 - a) theta + a theta_d, clamped to the segment so rounding
  // never leaves it; a = 1 yields theta_d and a = 0 yields theta exactly.
  const double a = config.outer_lr;
  for (std::size_t k = 0; k < params.size(); ++k) {
    ad::Tensor& p = params[k].value;
    const ad::Tensor& t = theta[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double lo = std::min(t[i], p[i]);
      const double hi = std::max(t[i], p[i]);
      p[i] = std::clamp((1.0 - a) * t[i] + a * p[i], lo, hi);
    }
  }
}

TrainHistory reptile_train(ad::ParameterSet& params, std::span<const Task> domains,
                           const ReptileConfig& config, const Validator& validator,
                           const UpdateHook& on_update) {
  config.validate();
  if (domains.empty()) throw Error(ErrorCode::kEmptyCorpus, "no source domains");
  std::vector<BatchStream> streams;
  for (std::size_t d = 0; d < domains.size(); ++d) {
    if (domains[d].size == 0) {
      throw Error(ErrorCode::kEmptyCorpus, "empty source domain " + domains[d].domain);
    }
    streams.emplace_back(domains[d].size, static_cast<std::size_t>(config.batch_size),
                         stream_seed(config.seed, d));
  }
  Rng domain_rng(derive_seed(config.seed, kDomainTag));
  ad::AdamState persistent;
  EarlyStopper stopper(params, config.patience);
  TrainHistory history;

  for (int episode = 1; episode <= config.episodes; ++episode) {
    const std::size_t d = uniform_index(domain_rng, domains.size());
    std::vector<Batch> batches;
    for (int i = 0; i < config.k; ++i) batches.push_back(streams[d].next());
    reptile_episode(params, domains[d], batches, config, config.seed, history.updates + 1,
                    config.inner_policy == InnerAdamPolicy::kPersist ? &persistent : nullptr);
    history.updates += config.k;
    if (on_update) on_update(episode, 0.0);
    const bool last = episode == config.episodes;
    if (validator && (episode % config.val_interval == 0 || last)) {
      if (stopper.observe(validator(), history.updates, episode, history)) break;
    }
  }
  if (validator) stopper.restore_best(params);
  return history;
}

void fomaml_episode(ad::ParameterSet& params, const Task& support_task,
                    const Batch& support, const Task& query_task,
                    const Batch& query, double inner_lr, double outer_lr,
                    std::uint64_t seed) {
  if (support_task.domain != query_task.domain) {
    throw Error(ErrorCode::kDomainMismatch,
                "support from " + support_task.domain + ", query from " + query_task.domain);
  }
  const std::vector<ad::Tensor> theta = params.snapshot();
  compute_gradient(params, support_task, support, derive_seed(seed, 0));
  ad::sgd_step(params, inner_lr);
  compute_gradient(params, query_task, query, derive_seed(seed, 1));
  params.restore(theta);
  ad::sgd_step(params, outer_lr);
}

TrainHistory fomaml_train(ad::ParameterSet& params, std::span<const Task> domains,
                          const FomamlConfig& config, const Validator& validator) {
  config.validate();
  if (domains.empty()) throw Error(ErrorCode::kEmptyCorpus, "no source domains");
  std::vector<BatchStream> streams;
  for (std::size_t d = 0; d < domains.size(); ++d) {
    if (domains[d].size == 0) {
      throw Error(ErrorCode::kEmptyCorpus, "empty source domain " + domains[d].domain);
    }
    streams.emplace_back(domains[d].size, static_cast<std::size_t>(config.batch_size),
                         stream_seed(config.seed, d));
  }
  Rng domain_rng(derive_seed(config.seed, kDomainTag));
  EarlyStopper stopper(params, config.patience);
  TrainHistory history;
  for (int episode = 1; episode <= config.episodes; ++episode) {
    const std::size_t d = uniform_index(domain_rng, domains.size());
    const Batch support = streams[d].next();
    const Batch query = streams[d].next();
    fomaml_episode(params, domains[d], support, domains[d], query, config.inner_lr,
                   config.outer_lr, dropout_seed(config.seed, episode));
    ++history.updates;
    const bool last = episode == config.episodes;
    if (validator && (episode % config.val_interval == 0 || last)) {
      if (stopper.observe(validator(), history.updates, episode, history)) break;
    }
  }
  if (validator) stopper.restore_best(params);
  return history;
}

}  // namespace copyptr
