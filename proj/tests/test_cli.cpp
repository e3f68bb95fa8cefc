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

// Runs the command-line tool as a subprocess and checks exit codes and
// outputs.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct ScratchDir {
  fs::path path = fs::temp_directory_path() / ("copyptr_cli_" + std::to_string(::getpid()));
  ScratchDir() {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

const fs::path& scratch() {
  static const ScratchDir dir;
  return dir.path;
}

std::string path(const std::string& child) { return (scratch() / child).string(); }

// Exit status of the tool run with `args`; stdout goes to `log`.
int run(const std::string& args, const std::string& log = "last.log") {
  const std::string cmd =
      std::string(COPYPTR_CLI) + " " + args + " > " + path(log) + " 2> " + path("stderr.log");
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

const std::string& corpus() {
  static const std::string dir = [] {
    const std::string d = path("corpus");
    REQUIRE(run("synth --out " + d + " --domains alarm,timer,weather --train 30 --valid 10 "
                "--test 10 --seed 4") == 0);
    std::ofstream(path("tiny.cfg")) << "hidden=8\nembed=8\nst.epochs=2\nft.epochs=4\n"
                                       "ft.val_interval=2\nvalid_spis=1\nsource_valid_cap=6\n"
                                       "reptile.episodes=4\nfomaml.episodes=4\n";
    return d;
  }();
  return dir;
}

std::string common_args(const std::string& out) {
  return "--corpus-dir " + corpus() + " --domains alarm,timer --target-domains weather "
         "--config " + path("tiny.cfg") + " --out " + path(out);
}

std::string train_args(const std::string& out) { return common_args(out) + " --spis 1 --seed 3"; }

TEST_SUITE("cli") {

TEST_CASE("usage errors exit with 1") {
  CHECK(run("") == 1);
  CHECK(run("frobnicate") == 1);
  CHECK(run("--help") == 0);
  CHECK(run("stats --corpus-dir " + corpus()) == 1);
  CHECK(run("sample --corpus-dir " + corpus() + " --domains alarm --spis 0 --out " +
            path("s0")) == 1);
  CHECK(run("train " + train_args("bad") + " --regime REPTILE_FT") == 1);
  CHECK(run("train --corpus-dir " + corpus() +
            " --domains alarm,weather --target-domains weather --out " + path("o")) == 1);
  CHECK(run("train " + train_args("bad") + " --preset enormous") == 1);
  CHECK(run("curve " + common_args("bad") + " --spis 8,2") == 1);
}

TEST_CASE("data errors exit with 2") {
  CHECK(run("stats --corpus-dir " + path("nowhere") + " --domains alarm") == 2);
  CHECK(run("train --corpus-dir " + path("nowhere") +
            " --domains alarm --target-domains weather --out " + path("o")) == 2);
  CHECK(run("eval --checkpoint " + corpus() + " --corpus " + corpus() + "/alarm_test.tsv") == 2);
}

TEST_CASE("stats and sample") {
  REQUIRE(run("stats --corpus-dir " + corpus() + " --domains alarm,weather --out " +
              path("stats.json")) == 0);
  const auto j = nlohmann::json::parse(slurp(path("stats.json")));
  CHECK(j[0]["train"] == 30);
  CHECK(slurp(path("last.log")).find("weather") != std::string::npos);

  REQUIRE(run("sample --corpus-dir " + corpus() + " --domains timer --spis 2 --seed 5 --out " +
              path("s1")) == 0);
  REQUIRE(run("sample --corpus-dir " + corpus() + " --domains timer --spis 2 --seed 5 --out " +
              path("s2")) == 0);
  CHECK(slurp(path("s1/timer_train.tsv")) == slurp(path("s2/timer_train.tsv")));
  CHECK(slurp(path("s1/timer_valid.tsv")) == slurp(path("s2/timer_valid.tsv")));
  CHECK(!slurp(path("s1/timer_train.tsv")).empty());
}

TEST_CASE("corpus directory from the environment") {
  ::setenv("COPYPTR_CORPUS_DIR", corpus().c_str(), 1);
  CHECK(run("stats --domains timer") == 0);
  ::unsetenv("COPYPTR_CORPUS_DIR");
  CHECK(run("stats --domains timer") == 1);
}

TEST_CASE("train, evaluate, fine-tune and rerun") {
  REQUIRE(run("train " + train_args("st") + " --regime ST_FT") == 0);
  for (const char* f : {"config.txt", "report.json", "model/model.cfg", "model/params.bin",
                        "model/vocab.txt"}) {
    CHECK(fs::exists(scratch() / "st" / f));
  }
  REQUIRE(run("train " + train_args("st2") + " --regime ST_FT") == 0);
  const auto a = nlohmann::json::parse(slurp(path("st/report.json")));
  const auto b = nlohmann::json::parse(slurp(path("st2/report.json")));
  CHECK(a["test"] == b["test"]);
  CHECK(a["valid_exact_match"] == b["valid_exact_match"]);

  REQUIRE(run("eval --checkpoint " + path("st/model") + " --corpus " + corpus() +
              "/weather_test.tsv --out " + path("eval.json")) == 0);
  const auto e = nlohmann::json::parse(slurp(path("eval.json")));
  CHECK(e["exact_match"] == a["test"]["exact_match"]);
  CHECK(slurp(path("last.log")).find("compositional") != std::string::npos);

  CHECK(run("parse --checkpoint " + path("st/model") + " \"set a timer for 5 minutes\"") == 0);
  CHECK(run("finetune " + train_args("ft") + " --init " + path("st/model")) == 0);
  CHECK(run("meta " + train_args("fomaml") + " --regime FOMAML_FT") == 0);
  CHECK(run("train " + train_args("jt") + " --regime JT --beam-width 2") == 0);
  CHECK(nlohmann::json::parse(slurp(path("jt/report.json")))["test"]["beam_width"] == 2);
}

TEST_CASE("training failure exits with 3") {
  CHECK(run("train " + train_args("diverge") +
            " --regime FT_ONLY --set ft.lr=1e300 --set ft.epochs=3") == 3);
}

TEST_CASE("curve writes a plot series") {
  REQUIRE(run("curve " + common_args("curve") + " --regime FT_ONLY --spis 1,2 --seed 0,1") == 0);
  const std::string series = slurp(path("curve/curve_FT_ONLY.dat"));
  CHECK(series.starts_with("# spis best_em\n1 "));
  CHECK(nlohmann::json::parse(slurp(path("curve/curve.json"))).size() == 2);
}

}  // TEST_SUITE

}  // namespace
