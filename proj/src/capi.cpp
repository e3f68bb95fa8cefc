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


#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "copyptr/copyptr.h"
#include "copyptr/corpus.hpp"
#include "copyptr/error.hpp"
#include "copyptr/eval.hpp"
#include "copyptr/experiment.hpp"
#include "copyptr/synth.hpp"
#include "copyptr/tree.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace copyptr;

struct cp_config {
  ExperimentConfig value;
};

struct cp_data {
  ExperimentData value;
};

struct cp_run {
  RunResult result;
  Vocabulary vocab;
};

struct cp_model {
  std::unique_ptr<CopyPtrModel> model;
  Vocabulary vocab;
  std::string dir;
};

namespace {

thread_local std::string last_error;

cp_status status_of(ErrorCode code) { return static_cast<cp_status>(static_cast<int>(code) + 1); }

template <typename Fn>
cp_status guarded(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return CP_OK;
  } catch (const Error& e) {
    last_error = e.what();
    return status_of(e.code());
  } catch (const std::exception& e) {
    last_error = e.what();
    return CP_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::kInvalidConfig, what);
}

#define CP_REQUIRE_ARG(cond, name)                 \
  do {                                             \
    if (!(cond)) {                                 \
      last_error = std::string("null argument: ") + (name); \
      return CP_INVALID_ARGUMENT;                  \
    }                                              \
  } while (0)

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::vector<std::string> split_list(const char* text) {
  std::vector<std::string> out;
  if (text == nullptr) return out;
  std::string item;
  for (const char* p = text;; ++p) {
    if (*p == ',' || *p == '\0') {
      const auto b = item.find_first_not_of(" \t");
      if (b != std::string::npos) {
        out.push_back(item.substr(b, item.find_last_not_of(" \t") - b + 1));
      }
      item.clear();
      if (*p == '\0') break;
    } else {
      item += *p;
    }
  }
  return out;
}

Regime parse_regime(const char* name) {
  const auto r = regime_from_name(name == nullptr ? "" : name);
  if (!r) throw Error(ErrorCode::kUnknownRegime, name == nullptr ? "" : name);
  return *r;
}

nlohmann::json coverage_json(const Corpus& full, const Corpus& selected,
                             const std::string& domain) {
  nlohmann::json rows = nlohmann::json::array();
  for (const CoverageRow& r : coverage_audit(full, selected, domain)) {
    rows.push_back({{"label", r.label}, {"selected", r.selected}, {"available", r.available}});
  }
  return rows;
}

}  // namespace

extern "C" {

const char* cp_version(void) { return "1.0.0"; }

const char* cp_status_name(cp_status status) {
  switch (status) {
    case CP_OK: return "Ok";
    case CP_INVALID_ARGUMENT: return "InvalidArgument";
    case CP_INTERNAL: return "Internal";
    default: break;
  }
  const int code = static_cast<int>(status) - 1;
  if (code >= 0 && code <= static_cast<int>(ErrorCode::kIo)) {
    return error_code_name(static_cast<ErrorCode>(code));
  }
  return "Unknown";
}

cp_error_class cp_status_class(cp_status status) {
  switch (status) {
    case CP_OK:
      return CP_CLASS_NONE;
    case CP_INVALID_CONFIG:
    case CP_INVALID_SPIS:
    case CP_UNKNOWN_REGIME:
    case CP_UNKNOWN_DOMAIN:
    case CP_INVALID_ARGUMENT:
      return CP_CLASS_USAGE;
    case CP_EMPTY_INPUT:
    case CP_UNBALANCED_BRACKETS:
    case CP_ALTERNATION_VIOLATION:
    case CP_TOKEN_OUTSIDE_TREE:
    case CP_INVALID_LABEL:
    case CP_EMPTY_CORPUS:
    case CP_FILE_NOT_FOUND:
    case CP_MALFORMED_RECORD:
    case CP_PARSE_ERROR:
    case CP_TOKEN_NOT_IN_SOURCE:
    case CP_CHECKPOINT_MISMATCH:
    case CP_IO:
      return CP_CLASS_DATA;
    default:
      return CP_CLASS_TRAINING;
  }
}

const char* cp_last_error(void) { return last_error.c_str(); }

void cp_string_free(char* s) { std::free(s); }

cp_status cp_canonicalize(const char* serialized_parse, char** out) {
  CP_REQUIRE_ARG(serialized_parse && out, "serialized_parse/out");
  return guarded([&] { *out = dup_string(serialize(canonicalize(parse_serialized(serialized_parse)))); });
}

cp_status cp_corpus_stats(const char* corpus_dir, const char* domains, char** stats_json) {
  CP_REQUIRE_ARG(corpus_dir && stats_json, "corpus_dir/stats_json");
  return guarded([&] {
    const std::vector<std::string> names = split_list(domains);
    require(!names.empty(), "no domains given");
    nlohmann::json rows = nlohmann::json::array();
    for (const std::string& d : names) {
      const Corpus train = load_domain_split(corpus_dir, d, Split::kTrain);
      const Corpus valid = load_domain_split(corpus_dir, d, Split::kValid);
      const Corpus test = load_domain_split(corpus_dir, d, Split::kTest);
      std::vector<ParseTree> trees;
      for (const Example& e : train.examples()) trees.push_back(e.parse);
      const TreeStats stats = tree_stats(trees);
      const LabelInventory inv = label_inventory(train, d);
      rows.push_back({{"domain", d},
                      {"train", train.size()},
                      {"valid", valid.size()},
                      {"test", test.size()},
                      {"intents", inv.intents.size()},
                      {"slots", inv.slots.size()},
                      {"flat_percent", stats.flat_percentage()},
                      {"depth", stats.mean_depth}});
    }
    *stats_json = dup_string(rows.dump(2));
  });
}

cp_status cp_sample(const char* corpus_dir, const char* domain, int spis, int valid_spis,
                    uint64_t seed, const char* out_dir, char** audit_json) {
  CP_REQUIRE_ARG(corpus_dir && domain && out_dir, "corpus_dir/domain/out_dir");
  return guarded([&] {
    const Corpus train = load_domain_split(corpus_dir, domain, Split::kTrain);
    const Corpus valid = load_domain_split(corpus_dir, domain, Split::kValid);
    const std::vector<std::string> names = {domain};
    const TargetSample sample = sample_targets(train, valid, names, spis, valid_spis, seed);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorCode::kIo, std::string("cannot create ") + out_dir);
    write_corpus(sample.train, domain_split_path(out_dir, domain, Split::kTrain));
    write_corpus(sample.valid, domain_split_path(out_dir, domain, Split::kValid));
    if (audit_json != nullptr) {
      nlohmann::json j{{"domain", domain},
                       {"spis", spis},
                       {"valid_spis", valid_spis},
                       {"seed", seed},
                       {"train", {{"selected", sample.train.size()},
                                  {"coverage", coverage_json(train, sample.train, domain)}}},
                       {"valid", {{"selected", sample.valid.size()},
                                  {"coverage", coverage_json(valid, sample.valid, domain)}}}};
      *audit_json = dup_string(j.dump(2));
    }
  });
}

cp_status cp_synth_write(const char* out_dir, const char* domains, int train, int valid,
                         int test, uint64_t seed) {
  CP_REQUIRE_ARG(out_dir, "out_dir");
  return guarded([&] {
    require(train >= 1 && valid >= 1 && test >= 1, "split sizes must be >= 1");
    SynthSizes sizes{static_cast<std::size_t>(train), static_cast<std::size_t>(valid),
                     static_cast<std::size_t>(test)};
    write_synth_corpus(out_dir, split_list(domains), sizes, seed);
  });
}

cp_status cp_synth_domains(char** domains) {
  CP_REQUIRE_ARG(domains, "domains");
  return guarded([&] { *domains = dup_string(join(synth_domains(), ",")); });
}

cp_status cp_config_new(const char* preset, cp_config** out) {
  CP_REQUIRE_ARG(out, "out");
  return guarded([&] {
    auto c = std::make_unique<cp_config>();
    if (preset != nullptr && *preset != '\0') c->value = ExperimentConfig::preset(preset);
    *out = c.release();
  });
}

void cp_config_free(cp_config* config) { delete config; }

cp_status cp_config_set(cp_config* config, const char* key, const char* value) {
  CP_REQUIRE_ARG(config && key && value, "config/key/value");
  return guarded([&] { config->value.set(key, value); });
}

cp_status cp_config_apply_file(cp_config* config, const char* path) {
  CP_REQUIRE_ARG(config && path, "config/path");
  return guarded([&] { config->value.apply_file(path); });
}

cp_status cp_config_text(const cp_config* config, char** text) {
  CP_REQUIRE_ARG(config && text, "config/text");
  return guarded([&] { *text = dup_string(config->value.to_text()); });
}

cp_status cp_preset_names(char** names) {
  CP_REQUIRE_ARG(names, "names");
  return guarded([&] { *names = dup_string(join(ExperimentConfig::preset_names(), ",")); });
}

cp_status cp_data_load(const char* corpus_dir, const char* sources, const char* targets,
                       const cp_config* config, cp_data** out) {
  CP_REQUIRE_ARG(corpus_dir && config && out, "corpus_dir/config/out");
  return guarded([&] {
    config->value.validate();
    auto d = std::make_unique<cp_data>();
    d->value = prepare_data(corpus_dir, split_list(sources), split_list(targets), config->value);
    *out = d.release();
  });
}

void cp_data_free(cp_data* data) { delete data; }

cp_status cp_data_summary(const cp_data* data, char** summary_json) {
  CP_REQUIRE_ARG(data && summary_json, "data/summary_json");
  return guarded([&] {
    const ExperimentData& d = data->value;
    std::size_t source_train = 0;
    for (const Corpus& c : d.source_train) source_train += c.size();
    nlohmann::json j{{"sources", d.sources},
                     {"targets", d.targets},
                     {"source_train", source_train},
                     {"source_valid", d.source_valid.size()},
                     {"spis", d.spis},
                     {"target_train", d.target_train.size()},
                     {"target_valid", d.target_valid.size()},
                     {"target_test", d.target_test.size()},
                     {"source_vocab", d.vocab.source_size()},
                     {"ontology_vocab", d.vocab.ontology_size()}};
    *summary_json = dup_string(j.dump(2));
  });
}

cp_status cp_run_regime(const cp_data* data, const char* regime, const cp_config* config,
                        cp_run** out) {
  CP_REQUIRE_ARG(data && config && out, "data/config/out");
  return guarded([&] {
    const Regime r = parse_regime(regime);
    auto run = std::make_unique<cp_run>();
    run->result = run_regime(data->value, r, config->value);
    run->vocab = data->value.vocab;
    *out = run.release();
  });
}

cp_status cp_run_finetune(const cp_data* data, const cp_model* init, const cp_config* config,
                          cp_run** out) {
  CP_REQUIRE_ARG(data && init && config && out, "data/init/config/out");
  return guarded([&] {
    ExperimentData d = data->value;
    d.vocab = init->vocab;
    auto run = std::make_unique<cp_run>();
    run->result = run_finetune(d, *init->model, config->value);
    run->result.init_from = init->dir;
    run->vocab = init->vocab;
    *out = run.release();
  });
}

void cp_run_free(cp_run* run) { delete run; }

cp_status cp_run_report(const cp_run* run, char** report_json) {
  CP_REQUIRE_ARG(run && report_json, "run/report_json");
  return guarded([&] { *report_json = dup_string(run->result.report_json()); });
}

cp_status cp_run_test_exact_match(const cp_run* run, double* em) {
  CP_REQUIRE_ARG(run && em, "run/em");
  *em = run->result.test.exact_match();
  return CP_OK;
}

cp_status cp_run_save_model(const cp_run* run, const char* dir) {
  CP_REQUIRE_ARG(run && dir, "run/dir");
  return guarded([&] {
    run->result.model->save(dir);
    run->vocab.save(fs::path(dir) / "vocab.txt");
  });
}

cp_status cp_model_load(const char* dir, cp_model** out) {
  CP_REQUIRE_ARG(dir && out, "dir/out");
  return guarded([&] {
    auto m = std::make_unique<cp_model>();
    m->model = std::make_unique<CopyPtrModel>(CopyPtrModel::load(dir));
    m->vocab = Vocabulary::load(fs::path(dir) / "vocab.txt");
    const ModelConfig& c = m->model->config();
    if (c.source_vocab != m->vocab.source_size() ||
        c.ontology_vocab != m->vocab.ontology_size() ||
        c.close_index != m->vocab.close_index()) {
      throw Error(ErrorCode::kCheckpointMismatch, "vocab.txt disagrees with model.cfg");
    }
    m->dir = dir;
    *out = m.release();
  });
}

void cp_model_free(cp_model* model) { delete model; }

cp_status cp_model_evaluate(const cp_model* model, const char* corpus_path, int beam_width,
                            int max_len, char** report_json, double* exact_match) {
  CP_REQUIRE_ARG(model && corpus_path, "model/corpus_path");
  return guarded([&] {
    const Corpus corpus = load_corpus(corpus_path, Split::kTest);
    const EvalReport report =
        evaluate(*model->model, model->vocab, corpus, DecodeSettings{beam_width, max_len});
    if (report_json != nullptr) *report_json = dup_string(report.to_json(true));
    if (exact_match != nullptr) *exact_match = report.exact_match();
  });
}

cp_status cp_model_parse(const cp_model* model, const char* utterance, int beam_width,
                         char** parse) {
  CP_REQUIRE_ARG(model && utterance && parse, "model/utterance/parse");
  return guarded([&] {
    require(beam_width >= 1, "beam width must be >= 1");
    const std::vector<std::string> tokens = split_whitespace(lowercase(utterance));
    if (tokens.empty()) throw Error(ErrorCode::kEmptyInput, "empty utterance");
    const std::vector<int> source = encode_source(tokens, model->vocab);
    const int budget = DecodeSettings{}.budget(source.size());
    const Decoded out = beam_width > 1
                            ? beam_decode(*model->model, source, beam_width, budget)
                            : greedy_decode(*model->model, source, budget);
    const auto tree = render_prediction(out.symbols, tokens, model->vocab);
    *parse = dup_string(tree ? serialize(*tree) : std::string());
  });
}

cp_status cp_curve(cp_data* data, const char* regime, const cp_config* config,
                   const char* spis_values, const char* seeds, char** curve_json,
                   char** series) {
  CP_REQUIRE_ARG(data && config && spis_values && seeds, "data/config/spis_values/seeds");
  return guarded([&] {
    const Regime r = parse_regime(regime);
    std::vector<int> spis;
    for (const std::string& s : split_list(spis_values)) {
      try {
        std::size_t used = 0;
        spis.push_back(std::stoi(s, &used));
        if (used != s.size()) throw std::invalid_argument(s);
      } catch (const std::logic_error&) {
        throw Error(ErrorCode::kInvalidSpis, "bad SPIS value '" + s + "'");
      }
    }
    std::vector<std::uint64_t> seed_list;
    for (const std::string& s : split_list(seeds)) {
      try {
        std::size_t used = 0;
        seed_list.push_back(std::stoull(s, &used));
        if (used != s.size()) throw std::invalid_argument(s);
      } catch (const std::logic_error&) {
        throw Error(ErrorCode::kInvalidConfig, "bad seed '" + s + "'");
      }
    }
    SourceStageCache cache;
    const std::vector<CurvePoint> points =
        spis_curve(data->value, r, config->value, spis, seed_list, &cache);
    if (curve_json != nullptr) *curve_json = dup_string(copyptr::curve_json(points));
    if (series != nullptr) *series = dup_string(curve_series(points));
  });
}

}  // extern "C"
