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


#include "copyptr/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "copyptr/error.hpp"
#include "json.hpp"

namespace copyptr {

namespace {

[[noreturn]] void bad(const std::string& msg) {
  throw Error(ErrorCode::kInvalidConfig, msg);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_integer(std::string_view key, std::string_view text) {
  T v{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    bad(std::string(key) + ": expected an integer, got '" + std::string(text) + "'");
  }
  return v;
}

double parse_real(std::string_view key, std::string_view text) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    bad(std::string(key) + ": expected a number, got '" + std::string(text) + "'");
  }
  return v;
}

std::string real_text(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

struct Field {
  std::string key;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T, typename Access>
Field integer_field(std::string key, Access access) {
  return {key,
          [key, access](ExperimentConfig& c, std::string_view v) {
            access(c) = parse_integer<T>(key, v);
          },
          [access](const ExperimentConfig& c) {
            return std::to_string(access(const_cast<ExperimentConfig&>(c)));
          }};
}

template <typename Access>
Field real_field(std::string key, Access access) {
  return {key,
          [key, access](ExperimentConfig& c, std::string_view v) {
            access(c) = parse_real(key, v);
          },
          [access](const ExperimentConfig& c) {
            return real_text(access(const_cast<ExperimentConfig&>(c)));
          }};
}

void add_train_fields(std::vector<Field>& out, const std::string& prefix,
                      TrainConfig ExperimentConfig::*member) {
  auto cfg = [member](ExperimentConfig& c) -> TrainConfig& { return c.*member; };
  out.push_back(real_field(prefix + "lr", [cfg](ExperimentConfig& c) -> double& {
    return cfg(c).lr;
  }));
  out.push_back(integer_field<std::int64_t>(
      prefix + "warmup", [cfg](ExperimentConfig& c) -> std::int64_t& { return cfg(c).warmup; }));
  out.push_back(integer_field<int>(
      prefix + "epochs", [cfg](ExperimentConfig& c) -> int& { return cfg(c).max_epochs; }));
  out.push_back(integer_field<int>(
      prefix + "batch", [cfg](ExperimentConfig& c) -> int& { return cfg(c).batch_size; }));
  out.push_back(integer_field<int>(
      prefix + "patience", [cfg](ExperimentConfig& c) -> int& { return cfg(c).patience; }));
  out.push_back(integer_field<int>(prefix + "val_interval", [cfg](ExperimentConfig& c) -> int& {
    return cfg(c).val_interval;
  }));
  out.push_back(integer_field<std::int64_t>(
      prefix + "max_updates",
      [cfg](ExperimentConfig& c) -> std::int64_t& { return cfg(c).max_updates; }));
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"encoder",
                 [](ExperimentConfig& c, std::string_view v) {
                   const auto kind = encoder_kind_from_name(v);
                   if (!kind) bad("encoder: unknown kind '" + std::string(v) + "'");
                   c.model.kind = *kind;
                 },
                 [](const ExperimentConfig& c) {
                   return std::string(encoder_kind_name(c.model.kind));
                 }});
    f.push_back(integer_field<int>("layers", [](ExperimentConfig& c) -> int& {
      return c.model.layers;
    }));
    f.push_back(integer_field<int>("hidden", [](ExperimentConfig& c) -> int& {
      return c.model.hidden;
    }));
    f.push_back(integer_field<int>("embed", [](ExperimentConfig& c) -> int& {
      return c.model.embed;
    }));
    f.push_back(integer_field<int>("heads", [](ExperimentConfig& c) -> int& {
      return c.model.heads;
    }));
    f.push_back(real_field("dropout", [](ExperimentConfig& c) -> double& {
      return c.model.dropout;
    }));
    add_train_fields(f, "st.", &ExperimentConfig::source);
    add_train_fields(f, "ft.", &ExperimentConfig::target);
    f.push_back(integer_field<int>("jt.upsample", [](ExperimentConfig& c) -> int& {
      return c.jt_upsample;
    }));
    f.push_back(integer_field<int>("reptile.k", [](ExperimentConfig& c) -> int& {
      return c.reptile.k;
    }));
    f.push_back(real_field("reptile.inner_lr", [](ExperimentConfig& c) -> double& {
      return c.reptile.inner_lr;
    }));
    f.push_back(real_field("reptile.outer_lr", [](ExperimentConfig& c) -> double& {
      return c.reptile.outer_lr;
    }));
    f.push_back(integer_field<int>("reptile.batch", [](ExperimentConfig& c) -> int& {
      return c.reptile.batch_size;
    }));
    f.push_back(integer_field<int>("reptile.episodes", [](ExperimentConfig& c) -> int& {
      return c.reptile.episodes;
    }));
    f.push_back(integer_field<int>("reptile.val_interval", [](ExperimentConfig& c) -> int& {
      return c.reptile.val_interval;
    }));
    f.push_back(integer_field<int>("reptile.patience", [](ExperimentConfig& c) -> int& {
      return c.reptile.patience;
    }));
    f.push_back({"reptile.inner_adam",
                 [](ExperimentConfig& c, std::string_view v) {
                   if (v == "reset") {
                     c.reptile.inner_policy = InnerAdamPolicy::kReset;
                   } else if (v == "persist") {
                     c.reptile.inner_policy = InnerAdamPolicy::kPersist;
                   } else {
                     bad("reptile.inner_adam: expected reset or persist");
                   }
                 },
                 [](const ExperimentConfig& c) {
                   return std::string(c.reptile.inner_policy == InnerAdamPolicy::kReset
                                          ? "reset"
                                          : "persist");
                 }});
    f.push_back(real_field("fomaml.inner_lr", [](ExperimentConfig& c) -> double& {
      return c.fomaml.inner_lr;
    }));
    f.push_back(real_field("fomaml.outer_lr", [](ExperimentConfig& c) -> double& {
      return c.fomaml.outer_lr;
    }));
    f.push_back(integer_field<int>("fomaml.batch", [](ExperimentConfig& c) -> int& {
      return c.fomaml.batch_size;
    }));
    f.push_back(integer_field<int>("fomaml.episodes", [](ExperimentConfig& c) -> int& {
      return c.fomaml.episodes;
    }));
    f.push_back(integer_field<int>("fomaml.val_interval", [](ExperimentConfig& c) -> int& {
      return c.fomaml.val_interval;
    }));
    f.push_back(integer_field<int>("fomaml.patience", [](ExperimentConfig& c) -> int& {
      return c.fomaml.patience;
    }));
    f.push_back(integer_field<int>("decode.beam", [](ExperimentConfig& c) -> int& {
      return c.decode.beam_width;
    }));
    f.push_back(integer_field<int>("decode.max_len", [](ExperimentConfig& c) -> int& {
      return c.decode.max_len;
    }));
    f.push_back(integer_field<int>("spis", [](ExperimentConfig& c) -> int& { return c.spis; }));
    f.push_back(integer_field<int>("valid_spis", [](ExperimentConfig& c) -> int& {
      return c.valid_spis;
    }));
    f.push_back(integer_field<int>("source_valid_cap", [](ExperimentConfig& c) -> int& {
      return c.source_valid_cap;
    }));
    f.push_back(integer_field<std::uint64_t>("seed", [](ExperimentConfig& c) -> std::uint64_t& {
      return c.seed;
    }));
    f.push_back(integer_field<std::uint64_t>(
        "data_seed", [](ExperimentConfig& c) -> std::uint64_t& { return c.data_seed; }));
    return f;
  }();
  return table;
}

}  // namespace

// ---------------------------------------------------------------------------
// ExperimentConfig

std::vector<std::string> ExperimentConfig::preset_names() {
  return {"desk-scale", "paper-default", "paper-transformer"};
}

ExperimentConfig ExperimentConfig::preset(std::string_view name) {
  ExperimentConfig c;
  if (name == "paper-default" || name == "paper-transformer") {
    const bool lstm = name == "paper-default";
    c.model.kind = lstm ? EncoderKind::kRecurrent : EncoderKind::kAttention;
    c.model.layers = lstm ? 2 : 3;
    c.model.hidden = lstm ? 512 : 256;
    c.model.embed = c.model.hidden;
    c.model.heads = lstm ? 4 : 8;
    c.model.dropout = lstm ? 0.4 : 0.3;
    c.source = {.batch_size = 128, .max_epochs = 100, .lr = lstm ? 1e-3 : 1e-4,
                .warmup = lstm ? 0 : 4000, .patience = 10, .val_interval = 1};
    c.target = {.batch_size = lstm ? 64 : 32, .max_epochs = 2000, .lr = lstm ? 5e-4 : 5e-5,
                .warmup = lstm ? 0 : 2000, .patience = 20, .val_interval = 10};
    c.reptile = {.k = 5, .inner_lr = 5e-5, .outer_lr = 5e-5, .batch_size = 32,
                 .episodes = 20000, .val_interval = 200, .patience = 10};
    c.fomaml = {.inner_lr = 5e-5, .outer_lr = 5e-5, .batch_size = 32, .episodes = 20000,
                .val_interval = 200, .patience = 10};
    c.spis = 25;
    c.valid_spis = 25;
    c.source_valid_cap = 0;
    return c;
  }
  if (name == "desk-scale") {
    c.model.kind = EncoderKind::kRecurrent;
    c.model.layers = 1;
    c.model.hidden = 32;
    c.model.embed = 32;
    c.model.heads = 2;
    c.model.dropout = 0.2;
    c.source = {.batch_size = 16, .max_epochs = 8, .lr = 5e-3, .warmup = 0, .patience = 3,
                .val_interval = 1};
    c.target = {.batch_size = 8, .max_epochs = 300, .lr = 3e-3, .warmup = 0, .patience = 10,
                .val_interval = 10};
    c.reptile = {.k = 5, .inner_lr = 5e-3, .outer_lr = 0.7, .batch_size = 16,
                 .episodes = 300, .val_interval = 30, .patience = 4};
    c.fomaml = {.inner_lr = 0.05, .outer_lr = 0.05, .batch_size = 16, .episodes = 600,
                .val_interval = 50, .patience = 4};
    c.spis = 2;
    c.valid_spis = 25;
    c.source_valid_cap = 120;
    return c;
  }
  bad("unknown preset '" + std::string(name) + "'");
}

void ExperimentConfig::set(std::string_view key, std::string_view value) {
  const std::string k = trim(key);
  const std::string v = trim(value);
  for (const Field& f : fields()) {
    if (f.key == k) {
      f.set(*this, v);
      return;
    }
  }
  bad("unknown config key '" + k + "'");
}

void ExperimentConfig::apply_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kInvalidConfig, "expected key=value: " + t, number);
    }
    try {
      set(t.substr(0, eq), t.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(e.code(), e.what(), number);
    }
  }
}

void ExperimentConfig::apply_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kFileNotFound, path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  apply_text(buffer.str());
}

std::string ExperimentConfig::to_text() const {
  std::string out;
  for (const Field& f : fields()) out += f.key + "=" + f.get(*this) + "\n";
  return out;
}

std::vector<std::string> ExperimentConfig::keys() {
  std::vector<std::string> out;
  for (const Field& f : fields()) out.push_back(f.key);
  return out;
}

void ExperimentConfig::validate() const {
  ModelConfig m = model;
  m.source_vocab = std::max(m.source_vocab, 1);
  m.ontology_vocab = std::max(m.ontology_vocab, 1);
  m.close_index = 0;
  m.validate();
  source.validate();
  target.validate();
  reptile.validate();
  fomaml.validate();
  if (jt_upsample < 1) bad("jt.upsample must be >= 1");
  if (decode.beam_width < 1) bad("decode.beam must be >= 1");
  if (decode.max_len < 0) bad("decode.max_len must be >= 0");
  if (spis < 1 || valid_spis < 1) {
    throw Error(ErrorCode::kInvalidSpis, "spis must be >= 1");
  }
  if (source_valid_cap < 0) bad("source_valid_cap must be >= 0");
}

// ---------------------------------------------------------------------------
// Data

namespace {

Corpus spis_union(const Corpus& pool, std::span<const std::string> domains, int spis,
                  std::uint64_t seed) {
  std::vector<std::size_t> picked;
  for (std::size_t d = 0; d < domains.size(); ++d) {
    const auto idx = spis_select(pool, domains[d], spis, derive_seed(seed, d));
    picked.insert(picked.end(), idx.begin(), idx.end());
  }
  std::sort(picked.begin(), picked.end());
  return pool.subset(picked);
}

Corpus capped(const Corpus& corpus, std::size_t cap, std::uint64_t seed) {
  if (cap == 0 || corpus.size() <= cap) return corpus;
  std::vector<std::size_t> idx(corpus.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  return corpus.subset(idx);
}

}  // namespace

ExperimentData prepare_data(const std::filesystem::path& dir,
                            std::span<const std::string> sources,
                            std::span<const std::string> targets,
                            const ExperimentConfig& config) {
  if (targets.empty()) bad("no target domain given");
  for (const std::string& t : targets) {
    if (std::find(sources.begin(), sources.end(), t) != sources.end()) {
      bad("domain " + t + " is both a source and a target");
    }
  }
  ExperimentData data;
  data.sources.assign(sources.begin(), sources.end());
  data.targets.assign(targets.begin(), targets.end());

  std::vector<Corpus> valid_parts;
  const std::size_t per_domain_cap =
      config.source_valid_cap == 0 || sources.empty()
          ? 0
          : (static_cast<std::size_t>(config.source_valid_cap) + sources.size() - 1) /
                sources.size();
  for (std::size_t d = 0; d < sources.size(); ++d) {
    data.source_train.push_back(load_domain_split(dir, sources[d], Split::kTrain));
    valid_parts.push_back(capped(load_domain_split(dir, sources[d], Split::kValid),
                                 per_domain_cap, derive_seed(config.data_seed, 100 + d)));
  }
  data.source_valid = concat(valid_parts);

  std::vector<Corpus> pool, valid, test;
  for (const std::string& t : targets) {
    pool.push_back(load_domain_split(dir, t, Split::kTrain));
    valid.push_back(load_domain_split(dir, t, Split::kValid));
    test.push_back(load_domain_split(dir, t, Split::kTest));
  }
  data.target_pool = concat(pool);
  data.target_valid_pool = concat(valid);
  data.target_test = concat(test);

  std::vector<Corpus> vocab_parts = data.source_train;
  vocab_parts.push_back(data.target_pool);
  data.vocab = Vocabulary::build(concat(vocab_parts));
  resample_target(data, config.spis, config.valid_spis, config.data_seed);
  return data;
}

TargetSample sample_targets(const Corpus& train_pool, const Corpus& valid_pool,
                            std::span<const std::string> domains, int spis,
                            int valid_spis, std::uint64_t data_seed) {
  return {spis_union(train_pool, domains, spis, derive_seed(data_seed, 1)),
          spis_union(valid_pool, domains, valid_spis, derive_seed(data_seed, 2))};
}

void resample_target(ExperimentData& data, int spis, int valid_spis,
                     std::uint64_t data_seed) {
  TargetSample sample = sample_targets(data.target_pool, data.target_valid_pool, data.targets,
                                       spis, valid_spis, data_seed);
  data.spis = spis;
  data.target_train = std::move(sample.train);
  data.target_valid = std::move(sample.valid);
}

std::vector<EncodedExample> encode_corpus(const Corpus& corpus, const Vocabulary& vocab) {
  std::vector<EncodedExample> out;
  out.reserve(corpus.size());
  for (const Example& ex : corpus.examples()) {
    out.push_back({encode_source(ex.utterance, vocab), encode_example(ex, vocab)});
  }
  return out;
}

Task parser_task(const CopyPtrModel& model,
                 std::shared_ptr<const std::vector<EncodedExample>> examples,
                 std::string domain) {
  const std::size_t n = examples->size();
  return Task{std::move(domain), n,
              [&model, examples = std::move(examples)](ad::Graph& g, const Batch& batch) {
                ad::Var total;
                for (std::size_t i : batch) {
                  const EncodedExample& ex = (*examples)[i];
                  ad::Var loss = model.sequence_loss(g, ex.source, ex.target);
                  total = total.valid() ? ad::add(total, loss) : loss;
                }
                return ad::scale(total, 1.0 / static_cast<double>(batch.size()));
              }};
}

Validator parser_validator(const CopyPtrModel& model, const Vocabulary& vocab,
                           const Corpus& corpus) {
  auto encoded = std::make_shared<std::vector<EncodedExample>>(encode_corpus(corpus, vocab));
  return [&model, &vocab, &corpus, encoded] {
    const EvalReport report = evaluate(model, vocab, corpus, DecodeSettings{});
    double token_accuracy = 0.0;
    for (const EncodedExample& ex : *encoded) {
      token_accuracy += model.teacher_forced_accuracy(ex.source, ex.target);
    }
    token_accuracy /= static_cast<double>(encoded->size());
    return report.exact_match() + 1e-3 * token_accuracy;
  };
}

ModelConfig model_config_for(const ExperimentConfig& config, const Vocabulary& vocab) {
  ModelConfig m = config.model;
  m.source_vocab = vocab.source_size();
  m.ontology_vocab = vocab.ontology_size();
  m.close_index = vocab.close_index();
  return m;
}

// ---------------------------------------------------------------------------
// Regimes

const std::vector<ad::Tensor>* SourceStageCache::find(const std::string& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

void SourceStageCache::store(const std::string& key, std::vector<ad::Tensor> params) {
  entries_[key] = std::move(params);
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Config lines that influence source-side stages.
std::string source_stage_key(const std::string& stage, const ExperimentData& data,
                             const ExperimentConfig& config) {
  std::string key = stage + "|";
  for (const std::string& s : data.sources) key += s + ",";
  key += "|";
  std::istringstream in(config.to_text());
  std::string line;
  while (std::getline(in, line)) {
    if (line.starts_with("ft.") || line.starts_with("spis=") ||
        line.starts_with("valid_spis=") || line.starts_with("decode.") ||
        line.starts_with("jt.")) {
      continue;
    }
    key += line + ";";
  }
  return key;
}

void require_nonempty(const Corpus& corpus, const std::string& what) {
  if (corpus.empty()) throw Error(ErrorCode::kEmptyCorpus, "no " + what + " examples");
}

nlohmann::json history_json(const StageReport& s) {
  nlohmann::json v = nlohmann::json::array();
  for (const ValidationRecord& r : s.history.validations) {
    v.push_back({{"update", r.update}, {"epoch", r.epoch}, {"score", r.score}});
  }
  return {{"stage", s.name},
          {"cached", s.cached},
          {"seconds", s.seconds},
          {"updates", s.history.updates},
          {"epoch_loss", s.history.epoch_loss},
          {"validations", v},
          {"best_score", s.history.best_score},
          {"early_stopped", s.history.early_stopped}};
}

void finetune_stage(const ExperimentData& data, const ExperimentConfig& config,
                    RunResult& result) {
  CopyPtrModel& model = *result.model;
  TrainConfig ft = config.target;
  ft.seed = derive_seed(config.seed, 16);
  StageReport stage{"finetune", {}, 0.0, false};
  const auto start = std::chrono::steady_clock::now();
  auto examples = std::make_shared<const std::vector<EncodedExample>>(
      encode_corpus(data.target_train, data.vocab));
  stage.history = supervised_train(model.params(), parser_task(model, examples, "target"), ft,
                                   parser_validator(model, data.vocab, data.target_valid));
  stage.seconds = seconds_since(start);
  result.stages.push_back(std::move(stage));
}

void finish(const ExperimentData& data, const ExperimentConfig& config, RunResult& result) {
  const CopyPtrModel& model = *result.model;
  result.valid_exact_match =
      evaluate(model, data.vocab, data.target_valid, DecodeSettings{}).exact_match();
  result.test = evaluate(model, data.vocab, data.target_test, config.decode);
}

}  // namespace

std::string RunResult::report_json() const {
  nlohmann::json j;
  j["regime"] = regime_name(regime);
  j["seed"] = seed;
  if (!init_from.empty()) j["init_from"] = init_from;
  j["config"] = config_text;
  nlohmann::json stages_json = nlohmann::json::array();
  for (const StageReport& s : stages) stages_json.push_back(history_json(s));
  j["stages"] = stages_json;
  j["valid_exact_match"] = valid_exact_match;
  j["test"] = nlohmann::json::parse(test.to_json());
  return j.dump(2);
}

RunResult run_regime(const ExperimentData& data, Regime regime,
                     const ExperimentConfig& config, SourceStageCache* cache) {
  config.validate();
  require_nonempty(data.target_train, "target training");
  require_nonempty(data.target_valid, "target validation");
  require_nonempty(data.target_test, "target test");

  RunResult result;
  result.regime = regime;
  result.seed = config.seed;
  result.config_text = config.to_text();
  result.model = std::make_unique<CopyPtrModel>(model_config_for(config, data.vocab),
                                                derive_seed(config.seed, 11));
  CopyPtrModel& model = *result.model;
  ad::ParameterSet& params = model.params();

  auto encoded = [&](const Corpus& c) {
    return std::make_shared<const std::vector<EncodedExample>>(encode_corpus(c, data.vocab));
  };
  auto target_validator = [&] { return parser_validator(model, data.vocab, data.target_valid); };

  auto source_stage = [&](const std::string& name, const std::function<TrainHistory()>& run) {
    if (data.sources.empty()) throw Error(ErrorCode::kEmptyCorpus, "no source domains");
    require_nonempty(data.source_valid, "source validation");
    const std::string key = source_stage_key(name, data, config);
    StageReport stage{name, {}, 0.0, false};
    const auto start = std::chrono::steady_clock::now();
    if (const auto* hit = cache ? cache->find(key) : nullptr) {
      params.restore(*hit);
      stage.cached = true;
    } else {
      stage.history = run();
      if (cache) cache->store(key, params.snapshot());
    }
    stage.seconds = seconds_since(start);
    result.stages.push_back(std::move(stage));
  };
  auto source_tasks = [&] {
    std::vector<Task> tasks;
    for (std::size_t d = 0; d < data.sources.size(); ++d) {
      require_nonempty(data.source_train[d], data.sources[d] + " training");
      tasks.push_back(parser_task(model, encoded(data.source_train[d]), data.sources[d]));
    }
    return tasks;
  };
  auto source_validator = [&] { return parser_validator(model, data.vocab, data.source_valid); };

  switch (regime) {
    case Regime::kFtOnly:
      break;
    case Regime::kStFt:
      source_stage("source", [&] {
        TrainConfig st = config.source;
        st.seed = derive_seed(config.seed, 12);
        const Corpus all = concat(data.source_train);
        require_nonempty(all, "source training");
        return supervised_train(params, parser_task(model, encoded(all), "sources"), st,
                                source_validator());
      });
      break;
    case Regime::kReptileFt:
      source_stage("reptile", [&] {
        ReptileConfig rc = config.reptile;
        rc.seed = derive_seed(config.seed, 13);
        const std::vector<Task> tasks = source_tasks();
        return reptile_train(params, tasks, rc, source_validator());
      });
      break;
    case Regime::kFomamlFt:
      source_stage("fomaml", [&] {
        FomamlConfig fc = config.fomaml;
        fc.seed = derive_seed(config.seed, 14);
        const std::vector<Task> tasks = source_tasks();
        return fomaml_train(params, tasks, fc, source_validator());
      });
      break;
    case Regime::kJt: {
      if (data.sources.empty()) throw Error(ErrorCode::kEmptyCorpus, "no source domains");
      TrainConfig jt = config.source;
      jt.upsample = config.jt_upsample;
      jt.seed = derive_seed(config.seed, 15);
      std::vector<Corpus> parts = data.source_train;
      parts.push_back(upsample(data.target_train, config.jt_upsample));
      StageReport stage{"joint", {}, 0.0, false};
      const auto start = std::chrono::steady_clock::now();
      stage.history = supervised_train(params, parser_task(model, encoded(concat(parts)), "joint"),
                                       jt, target_validator());
      stage.seconds = seconds_since(start);
      result.stages.push_back(std::move(stage));
      break;
    }
  }

  if (regime != Regime::kJt) finetune_stage(data, config, result);
  finish(data, config, result);
  return result;
}

RunResult run_finetune(const ExperimentData& data, const CopyPtrModel& init,
                       const ExperimentConfig& config) {
  config.validate();
  require_nonempty(data.target_train, "target training");
  require_nonempty(data.target_valid, "target validation");
  require_nonempty(data.target_test, "target test");
  const ModelConfig& m = init.config();
  if (m.source_vocab != data.vocab.source_size() ||
      m.ontology_vocab != data.vocab.ontology_size() ||
      m.close_index != data.vocab.close_index()) {
    throw Error(ErrorCode::kCheckpointMismatch, "model was built for another vocabulary");
  }
  RunResult result;
  result.regime = Regime::kFtOnly;
  result.seed = config.seed;
  result.config_text = config.to_text();
  result.init_from = "checkpoint";
  result.model = std::make_unique<CopyPtrModel>(m, 0);
  result.model->params().restore(init.params().snapshot());
  finetune_stage(data, config, result);
  finish(data, config, result);
  return result;
}

// ---------------------------------------------------------------------------
// Curves

std::vector<CurvePoint> spis_curve(ExperimentData& data, Regime regime,
                                   const ExperimentConfig& config,
                                   std::span<const int> spis_values,
                                   std::span<const std::uint64_t> seeds,
                                   SourceStageCache* cache, const CurveProgress& progress) {
  if (spis_values.empty()) throw Error(ErrorCode::kInvalidSpis, "empty SPIS list");
  for (std::size_t i = 0; i < spis_values.size(); ++i) {
    if (spis_values[i] < 1 || (i > 0 && spis_values[i] <= spis_values[i - 1])) {
      throw Error(ErrorCode::kInvalidSpis, "SPIS values must be positive and ascending");
    }
  }
  if (seeds.empty()) bad("no seeds given");
  std::vector<CurvePoint> points;
  for (int spis : spis_values) {
    resample_target(data, spis, config.valid_spis, config.data_seed);
    CurvePoint point;
    point.spis = spis;
    double best_valid = -1.0;
    for (std::uint64_t seed : seeds) {
      ExperimentConfig run = config;
      run.spis = spis;
      run.seed = seed;
      const RunResult r = run_regime(data, regime, run, cache);
      point.seeds.push_back(seed);
      point.valid_em.push_back(r.valid_exact_match);
      point.test_em.push_back(r.test.exact_match());
      if (r.valid_exact_match > best_valid) {
        best_valid = r.valid_exact_match;
        point.best_em = r.test.exact_match();
      }
      if (progress) progress(spis, seed, r);
    }
    point.mean_em = std::accumulate(point.test_em.begin(), point.test_em.end(), 0.0) /
                    static_cast<double>(point.test_em.size());
    points.push_back(std::move(point));
  }
  return points;
}

std::string curve_series(std::span<const CurvePoint> points) {
  std::ostringstream out;
  out << "# spis best_em\n";
  out.precision(6);
  for (const CurvePoint& p : points) out << p.spis << " " << 100.0 * p.best_em << "\n";
  return out.str();
}

std::string curve_json(std::span<const CurvePoint> points) {
  nlohmann::json j = nlohmann::json::array();
  for (const CurvePoint& p : points) {
    j.push_back({{"spis", p.spis},
                 {"seeds", p.seeds},
                 {"valid_em", p.valid_em},
                 {"test_em", p.test_em},
                 {"mean_em", p.mean_em},
                 {"best_em", p.best_em}});
  }
  return j.dump(2);
}

}  // namespace copyptr
