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


// copyptr command-line tool. Talks to the library only through the C API.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "copyptr/copyptr.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

constexpr const char* kCorpusEnv = "COPYPTR_CORPUS_DIR";

enum Exit { kOk = 0, kUsage = 1, kData = 2, kTraining = 3 };

// Failure carrying the process exit code.
struct Failure {
  int exit_code;
  std::string message;
};

void check(cp_status status) {
  if (status == CP_OK) return;
  const int code = static_cast<int>(cp_status_class(status));
  throw Failure{code == 0 ? kTraining : code,
                std::string(cp_status_name(status)) + ": " + cp_last_error()};
}

[[noreturn]] void usage(const std::string& message) { throw Failure{kUsage, message}; }

// Owns a string returned by the C API.
std::string take(char* s) {
  std::string out = s == nullptr ? "" : s;
  cp_string_free(s);
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const std::string& s : items) out += (out.empty() ? "" : ",") + s;
  return out;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Failure{kData, "cannot write " + path.string()};
  out << text;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Failure{kData, "cannot create " + dir.string()};
}

struct ConfigHandle {
  cp_config* ptr = nullptr;
  ~ConfigHandle() { cp_config_free(ptr); }
};
struct DataHandle {
  cp_data* ptr = nullptr;
  ~DataHandle() { cp_data_free(ptr); }
};
struct RunHandle {
  cp_run* ptr = nullptr;
  ~RunHandle() { cp_run_free(ptr); }
};
struct ModelHandle {
  cp_model* ptr = nullptr;
  ~ModelHandle() { cp_model_free(ptr); }
};

// Flags shared by the experiment commands.
struct RunSpec {
  std::string corpus_dir;
  std::vector<std::string> domains;
  std::vector<std::string> targets;
  std::string regime;
  std::vector<int> spis;
  std::vector<std::uint64_t> seeds;
  std::string config_path;
  std::string out;
  std::optional<int> beam_width;
  std::string preset = "desk-scale";
  std::vector<std::string> overrides;  // --set key=value
};

void add_corpus_flag(CLI::App* cmd, std::string& dir) {
  cmd->add_option("--corpus-dir", dir,
                  std::string("Directory of <domain>_<split>.tsv files (default $") +
                      kCorpusEnv + ")");
}

std::string corpus_dir_or_env(const std::string& given) {
  if (!given.empty()) return given;
  if (const char* env = std::getenv(kCorpusEnv); env != nullptr && *env != '\0') return env;
  usage(std::string("no corpus directory: pass --corpus-dir or set ") + kCorpusEnv);
}

void add_run_flags(CLI::App* cmd, RunSpec& spec, bool with_regime, bool multi_spis) {
  add_corpus_flag(cmd, spec.corpus_dir);
  cmd->add_option("--domains", spec.domains, "Source domains")->delimiter(',');
  cmd->add_option("--target-domains", spec.targets, "Target domains")->delimiter(',');
  if (with_regime) {
    cmd->add_option("--regime", spec.regime, "FT_ONLY, ST_FT, JT, REPTILE_FT or FOMAML_FT");
  }
  cmd->add_option("--spis", spec.spis,
                  multi_spis ? "Ascending SPIS values" : "Samples per intent and slot")
      ->delimiter(',');
  cmd->add_option("--seed", spec.seeds, multi_spis ? "Run seeds" : "Run seed")->delimiter(',');
  cmd->add_option("--config", spec.config_path, "key=value config file");
  cmd->add_option("--out", spec.out, "Output directory")->required();
  cmd->add_option("--beam-width", spec.beam_width, "Beam width for test decoding (1 = greedy)");
  cmd->add_option("--preset", spec.preset, "desk-scale, paper-default or paper-transformer");
  cmd->add_option("--set", spec.overrides, "Extra key=value config overrides");
}

void build_config(const RunSpec& spec, ConfigHandle& config) {
  check(cp_config_new(spec.preset.c_str(), &config.ptr));
  if (!spec.config_path.empty()) {
    if (!fs::exists(spec.config_path)) usage("config file not found: " + spec.config_path);
    check(cp_config_apply_file(config.ptr, spec.config_path.c_str()));
  }
  for (const std::string& kv : spec.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) usage("--set expects key=value, got " + kv);
    check(cp_config_set(config.ptr, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
  }
  if (spec.spis.size() == 1) {
    check(cp_config_set(config.ptr, "spis", std::to_string(spec.spis[0]).c_str()));
  }
  if (spec.seeds.size() == 1) {
    check(cp_config_set(config.ptr, "seed", std::to_string(spec.seeds[0]).c_str()));
  }
  if (spec.beam_width) {
    check(cp_config_set(config.ptr, "decode.beam", std::to_string(*spec.beam_width).c_str()));
  }
}

void load_data(const RunSpec& spec, const ConfigHandle& config, DataHandle& data) {
  const std::string dir = corpus_dir_or_env(spec.corpus_dir);
  if (!fs::is_directory(dir)) throw Failure{kData, "corpus directory not found: " + dir};
  if (spec.targets.empty()) usage("--target-domains is required");
  for (const std::string& t : spec.targets) {
    for (const std::string& s : spec.domains) {
      if (s == t) usage("domain " + t + " is both a source and a target");
    }
  }
  check(cp_data_load(dir.c_str(), join(spec.domains).c_str(), join(spec.targets).c_str(),
                     config.ptr, &data.ptr));
}

void finish_run(const RunSpec& spec, const ConfigHandle& config, const RunHandle& run) {
  const fs::path out(spec.out);
  make_dir(out);
  char* text = nullptr;
  check(cp_config_text(config.ptr, &text));
  write_file(out / "config.txt", take(text));
  char* report = nullptr;
  check(cp_run_report(run.ptr, &report));
  const std::string report_text = take(report);
  write_file(out / "report.json", report_text);
  check(cp_run_save_model(run.ptr, (out / "model").string().c_str()));

  const auto j = nlohmann::json::parse(report_text);
  const auto& test = j["test"];
  std::cout << j["regime"].get<std::string>() << " seed " << j["seed"].get<std::uint64_t>()
            << "\n  valid exact match  " << j["valid_exact_match"].get<double>()
            << "\n  test exact match   " << test["exact_match"].get<double>() << "\n";
  for (const char* stratum : {"flat", "compositional"}) {
    const auto& s = test[stratum];
    std::cout << "  " << stratum << "  " << s["correct"] << "/" << s["count"] << "\n";
  }
  std::cout << "  written to " << out.string() << "\n";
}

int cmd_stats(const std::string& corpus_dir, const std::vector<std::string>& domains,
              const std::string& out) {
  if (domains.empty()) usage("--domains must list at least one domain");
  const std::string dir = corpus_dir_or_env(corpus_dir);
  char* json = nullptr;
  check(cp_corpus_stats(dir.c_str(), join(domains).c_str(), &json));
  const std::string text = take(json);
  std::printf("%-14s %8s %8s %8s %5s %5s %7s %6s\n", "domain", "#train", "#valid", "#test",
              "#int", "#slt", "flat%", "depth");
  for (const auto& row : nlohmann::json::parse(text)) {
    std::printf("%-14s %8zu %8zu %8zu %5zu %5zu %7.1f %6.2f\n",
                row["domain"].get<std::string>().c_str(), row["train"].get<std::size_t>(),
                row["valid"].get<std::size_t>(), row["test"].get<std::size_t>(),
                row["intents"].get<std::size_t>(), row["slots"].get<std::size_t>(),
                row["flat_percent"].get<double>(), row["depth"].get<double>());
  }
  if (!out.empty()) write_file(out, text);
  return kOk;
}

int cmd_sample(const std::string& corpus_dir, const std::vector<std::string>& domains, int spis,
               int valid_spis, std::uint64_t seed, const std::string& out) {
  if (domains.size() != 1) usage("sample takes exactly one domain");
  if (spis < 1 || valid_spis < 1) usage("InvalidSpis: spis must be >= 1");
  const std::string dir = corpus_dir_or_env(corpus_dir);
  char* audit = nullptr;
  check(cp_sample(dir.c_str(), domains[0].c_str(), spis, valid_spis, seed, out.c_str(), &audit));
  const std::string text = take(audit);
  write_file(fs::path(out) / (domains[0] + "_coverage.json"), text);
  const auto j = nlohmann::json::parse(text);
  for (const char* split : {"train", "valid"}) {
    std::cout << split << ": " << j[split]["selected"] << " examples\n";
    for (const auto& row : j[split]["coverage"]) {
      std::cout << "  " << row["label"].get<std::string>() << "  " << row["selected"] << "/"
                << row["available"] << "\n";
    }
  }
  return kOk;
}

int cmd_train(const RunSpec& spec, const std::vector<std::string>& allowed) {
  if (spec.spis.size() > 1 || spec.seeds.size() > 1) usage("use curve for several SPIS/seeds");
  bool ok = false;
  for (const std::string& r : allowed) ok = ok || r == spec.regime;
  if (!ok) usage("regime must be one of " + join(allowed));
  ConfigHandle config;
  build_config(spec, config);
  DataHandle data;
  load_data(spec, config, data);
  RunHandle run;
  check(cp_run_regime(data.ptr, spec.regime.c_str(), config.ptr, &run.ptr));
  finish_run(spec, config, run);
  return kOk;
}

int cmd_finetune(const RunSpec& spec, const std::string& init) {
  if (init.empty() || !fs::is_directory(init)) usage("--init must name a saved model directory");
  ConfigHandle config;
  build_config(spec, config);
  DataHandle data;
  load_data(spec, config, data);
  ModelHandle model;
  check(cp_model_load(init.c_str(), &model.ptr));
  RunHandle run;
  check(cp_run_finetune(data.ptr, model.ptr, config.ptr, &run.ptr));
  finish_run(spec, config, run);
  return kOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& corpus, int beam, int max_len,
             const std::string& out) {
  if (!fs::is_directory(checkpoint)) usage("checkpoint directory not found: " + checkpoint);
  ModelHandle model;
  check(cp_model_load(checkpoint.c_str(), &model.ptr));
  char* report = nullptr;
  double em = 0.0;
  check(cp_model_evaluate(model.ptr, corpus.c_str(), beam, max_len, &report, &em));
  const std::string text = take(report);
  if (!out.empty()) write_file(out, text);
  const auto j = nlohmann::json::parse(text);
  std::cout << "exact match    " << em << "  (" << j["count"] << " examples, "
            << j["decoder"].get<std::string>() << ")\n";
  for (const char* stratum : {"flat", "compositional"}) {
    const auto& s = j[stratum];
    std::cout << stratum << "  " << s["correct"] << "/" << s["count"];
    if (!s["accuracy"].is_null()) std::cout << "  " << s["accuracy"].get<double>();
    std::cout << "\n";
  }
  std::cout << "invalid output " << j["invalid_output_rate"].get<double>() << "\n";
  return kOk;
}

int cmd_parse(const std::string& checkpoint, const std::string& utterance, int beam) {
  ModelHandle model;
  check(cp_model_load(checkpoint.c_str(), &model.ptr));
  char* parse = nullptr;
  check(cp_model_parse(model.ptr, utterance.c_str(), beam, &parse));
  const std::string text = take(parse);
  std::cout << (text.empty() ? "(no valid parse)" : text) << "\n";
  return kOk;
}

int cmd_curve(RunSpec spec) {
  if (spec.spis.empty()) spec.spis = {10, 25, 50, 100};
  if (spec.seeds.empty()) spec.seeds = {0, 1, 2, 3, 4};
  for (std::size_t i = 0; i < spec.spis.size(); ++i) {
    if (spec.spis[i] < 1 || (i > 0 && spec.spis[i] <= spec.spis[i - 1])) {
      usage("InvalidSpis: --spis must be positive and ascending");
    }
  }
  std::vector<int> spis = spec.spis;
  std::vector<std::uint64_t> seeds = spec.seeds;
  spec.spis = {spis.front()};
  spec.seeds = {seeds.front()};
  ConfigHandle config;
  build_config(spec, config);
  DataHandle data;
  load_data(spec, config, data);
  std::string spis_text, seed_text;
  for (int s : spis) spis_text += (spis_text.empty() ? "" : ",") + std::to_string(s);
  for (auto s : seeds) seed_text += (seed_text.empty() ? "" : ",") + std::to_string(s);
  char* json = nullptr;
  char* series = nullptr;
  check(cp_curve(data.ptr, spec.regime.c_str(), config.ptr, spis_text.c_str(), seed_text.c_str(),
                 &json, &series));
  const fs::path out(spec.out);
  make_dir(out);
  const std::string series_text = take(series);
  char* text = nullptr;
  check(cp_config_text(config.ptr, &text));
  write_file(out / "config.txt", take(text));
  write_file(out / "curve.json", take(json));
  write_file(out / ("curve_" + spec.regime + ".dat"), series_text);
  std::cout << series_text;
  return kOk;
}

int cmd_synth(const std::string& out, const std::vector<std::string>& domains, int train,
              int valid, int test, std::uint64_t seed) {
  check(cp_synth_write(out.c_str(), join(domains).c_str(), train, valid, test, seed));
  std::cout << "wrote synthetic corpus to " << out << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Copy-pointer semantic parsing: corpus tools, training regimes, evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", cp_version());

  std::string corpus_dir, out;
  std::vector<std::string> domains;

  auto* stats = app.add_subcommand("stats", "Per-domain corpus statistics");
  add_corpus_flag(stats, corpus_dir);
  stats->add_option("--domains", domains, "Domains to summarize")->delimiter(',');
  stats->add_option("--out", out, "Also write the table as JSON");

  int spis = 25, valid_spis = 25;
  std::uint64_t seed = 0;
  auto* sample = app.add_subcommand("sample", "Draw SPIS train/valid subsets of one domain");
  add_corpus_flag(sample, corpus_dir);
  sample->add_option("--domains", domains, "Domain to sample")->delimiter(',');
  sample->add_option("--spis", spis, "Train samples per intent and slot");
  sample->add_option("--valid-spis", valid_spis, "Valid samples per intent and slot");
  sample->add_option("--seed", seed, "Sampling seed");
  sample->add_option("--out", out, "Output directory")->required();

  RunSpec train_spec;
  train_spec.regime = "ST_FT";
  auto* train = app.add_subcommand("train", "Run FT_ONLY, ST_FT or JT");
  add_run_flags(train, train_spec, true, false);

  RunSpec meta_spec;
  meta_spec.regime = "REPTILE_FT";
  auto* meta = app.add_subcommand("meta", "Meta-train on sources (REPTILE_FT, FOMAML_FT), fine-tune");
  add_run_flags(meta, meta_spec, true, false);

  RunSpec ft_spec;
  std::string init;
  auto* finetune = app.add_subcommand("finetune", "Fine-tune a saved model on the target sample");
  add_run_flags(finetune, ft_spec, false, false);
  finetune->add_option("--init", init, "Saved model directory")->required();

  std::string checkpoint, corpus;
  int beam = 1, max_len = 0;
  auto* eval = app.add_subcommand("eval", "Exact-match evaluation of a saved model");
  eval->add_option("--checkpoint", checkpoint, "Saved model directory")->required();
  eval->add_option("--corpus", corpus, "TSV file to evaluate")->required();
  eval->add_option("--beam-width", beam, "Beam width (1 = greedy)");
  eval->add_option("--max-len", max_len, "Symbol budget (0 = from source length)");
  eval->add_option("--out", out, "Report file");

  std::string utterance;
  auto* parse = app.add_subcommand("parse", "Parse one utterance with a saved model");
  parse->add_option("--checkpoint", checkpoint, "Saved model directory")->required();
  parse->add_option("--beam-width", beam, "Beam width (1 = greedy)");
  parse->add_option("utterance", utterance, "Utterance")->required();

  RunSpec curve_spec;
  curve_spec.regime = "ST_FT";
  auto* curve = app.add_subcommand("curve", "Accuracy against SPIS over several seeds");
  add_run_flags(curve, curve_spec, true, true);

  int n_train = 300, n_valid = 60, n_test = 100;
  auto* synth = app.add_subcommand("synth", "Write the synthetic multi-domain toy corpus");
  synth->add_option("--out", out, "Output directory")->required();
  synth->add_option("--domains", domains, "Domains (default all)")->delimiter(',');
  synth->add_option("--train", n_train, "Train examples per domain");
  synth->add_option("--valid", n_valid, "Valid examples per domain");
  synth->add_option("--test", n_test, "Test examples per domain");
  synth->add_option("--seed", seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*stats) return cmd_stats(corpus_dir, domains, out);
    if (*sample) return cmd_sample(corpus_dir, domains, spis, valid_spis, seed, out);
    if (*train) return cmd_train(train_spec, {"FT_ONLY", "ST_FT", "JT"});
    if (*meta) return cmd_train(meta_spec, {"REPTILE_FT", "FOMAML_FT"});
    if (*finetune) return cmd_finetune(ft_spec, init);
    if (*eval) return cmd_eval(checkpoint, corpus, beam, max_len, out);
    if (*parse) return cmd_parse(checkpoint, utterance, beam);
    if (*curve) return cmd_curve(curve_spec);
    if (*synth) return cmd_synth(out, domains, n_train, n_valid, n_test, seed);
  } catch (const Failure& f) {
    std::cerr << "copyptr: " << f.message << "\n";
    return f.exit_code;
  }
  return kUsage;
}
