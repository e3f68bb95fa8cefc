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


// Source/target experiments: configuration, data preparation, the five
// training regimes and accuracy-vs-SPIS curves.

#ifndef COPYPTR_EXPERIMENT_HPP_
#define COPYPTR_EXPERIMENT_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "copyptr/corpus.hpp"
#include "copyptr/eval.hpp"
#include "copyptr/model.hpp"
#include "copyptr/train.hpp"

namespace copyptr {

inline constexpr int kDefaultSpisList[] = {10, 25, 50, 100};

struct ExperimentConfig {
  // Only kind, layers, hidden, embed, heads and dropout are read; the
  // vocabulary sizes come from the data.
  ModelConfig model;
  TrainConfig source;  // source training and joint training ("st.")
  TrainConfig target;  // fine-tuning ("ft.")
  int jt_upsample = 1;
  ReptileConfig reptile;
  FomamlConfig fomaml;
  DecodeSettings decode;
  int spis = 25;
  int valid_spis = 25;
  // Held-out source examples used for validation; 0 keeps all.
  int source_valid_cap = 0;
  std::uint64_t seed = 0;
  // Seeds the SPIS samples and the source validation subset.
  std::uint64_t data_seed = 0;

  // "desk-scale", "paper-default" or "paper-transformer". Throws
  // kInvalidConfig.
  static ExperimentConfig preset(std::string_view name);
  static std::vector<std::string> preset_names();

  // Throws kInvalidConfig for unknown keys and bad values.
  void set(std::string_view key, std::string_view value);
  // key=value lines; blank lines and '#' comments are skipped.
  void apply_text(const std::string& text);
  void apply_file(const std::filesystem::path& path);
  std::string to_text() const;
  static std::vector<std::string> keys();

  void validate() const;
};

struct ExperimentData {
  std::vector<std::string> sources;
  std::vector<std::string> targets;
  std::vector<Corpus> source_train;  // one per source domain
  Corpus source_valid;
  Corpus target_pool;        // full target train split
  Corpus target_valid_pool;  // full target valid split
  Corpus target_test;
  Corpus target_train;  // SPIS samples
  Corpus target_valid;
  int spis = 0;
  Vocabulary vocab;
};

// Loads <dir>/<domain>_<split>.tsv for every listed domain, builds the
// vocabulary from the source train splits and the full target train split,
// and draws the SPIS samples. Throws kInvalidConfig when the domain sets
// overlap or no target is given, plus the loader's errors.
ExperimentData prepare_data(const std::filesystem::path& dir,
                            std::span<const std::string> sources,
                            std::span<const std::string> targets,
                            const ExperimentConfig& config);

struct TargetSample {
  Corpus train;
  Corpus valid;
};

// The SPIS samples an experiment seeded with `data_seed` trains and
// validates on: per domain, independent seeds for the two splits.
TargetSample sample_targets(const Corpus& train_pool, const Corpus& valid_pool,
                            std::span<const std::string> domains, int spis,
                            int valid_spis, std::uint64_t data_seed);

// Redraws the target train / valid samples at another SPIS.
void resample_target(ExperimentData& data, int spis, int valid_spis,
                     std::uint64_t data_seed);

struct EncodedExample {
  std::vector<int> source;
  EncodedTarget target;
};

std::vector<EncodedExample> encode_corpus(const Corpus& corpus, const Vocabulary& vocab);

// Mean sequence loss of the model over batches of `examples`.
Task parser_task(const CopyPtrModel& model,
                 std::shared_ptr<const std::vector<EncodedExample>> examples,
                 std::string domain);

// Exact match on `corpus` under greedy decoding, plus 1e-3 times the
// teacher-forced token accuracy to order checkpoints with equal exact match.
Validator parser_validator(const CopyPtrModel& model, const Vocabulary& vocab,
                           const Corpus& corpus);

ModelConfig model_config_for(const ExperimentConfig& config, const Vocabulary& vocab);

struct StageReport {
  std::string name;
  TrainHistory history;
  double seconds = 0.0;
  bool cached = false;
};

struct RunResult {
  Regime regime = Regime::kFtOnly;
  std::uint64_t seed = 0;
  std::string config_text;
  // Set for runs that start from a saved model.
  std::string init_from;
  std::unique_ptr<CopyPtrModel> model;
  std::vector<StageReport> stages;
  double valid_exact_match = 0.0;
  EvalReport test;

  std::string report_json() const;
};

// Parameters after source-side stages, keyed by everything they depend on.
class SourceStageCache {
 public:
  const std::vector<ad::Tensor>* find(const std::string& key) const;
  void store(const std::string& key, std::vector<ad::Tensor> params);
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, std::vector<ad::Tensor>> entries_;
};

// FT_ONLY trains on the target sample alone; ST_FT trains on the sources
// and then fine-tunes; JT trains once on sources plus the upsampled target
// sample; REPTILE_FT and FOMAML_FT meta-train on the sources and then
// fine-tune. Fine-tuning starts with fresh optimizer state. Source stages
// validate on held-out source data, everything else on the target valid
// sample. Throws kEmptyCorpus and the training errors.
RunResult run_regime(const ExperimentData& data, Regime regime,
                     const ExperimentConfig& config,
                     SourceStageCache* cache = nullptr);

// Fine-tunes a copy of `init` on the target sample. Throws
// kCheckpointMismatch unless the model was built for `data.vocab`.
RunResult run_finetune(const ExperimentData& data, const CopyPtrModel& init,
                       const ExperimentConfig& config);

struct CurvePoint {
  int spis = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> valid_em;
  std::vector<double> test_em;
  double mean_em = 0.0;
  // Test exact match of the run with the best validation score.
  double best_em = 0.0;
};

using CurveProgress = std::function<void(int spis, std::uint64_t seed, const RunResult&)>;

// Runs `regime` for every SPIS value and seed. Throws kInvalidSpis unless
// the values are positive and strictly ascending.
std::vector<CurvePoint> spis_curve(ExperimentData& data, Regime regime,
                                   const ExperimentConfig& config,
                                   std::span<const int> spis_values,
                                   std::span<const std::uint64_t> seeds,
                                   SourceStageCache* cache = nullptr,
                                   const CurveProgress& progress = {});

// "spis best_em" lines for plotting, best_em in percent.
std::string curve_series(std::span<const CurvePoint> points);
std::string curve_json(std::span<const CurvePoint> points);

}  // namespace copyptr

#endif  // COPYPTR_EXPERIMENT_HPP_
