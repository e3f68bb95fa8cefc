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


#include <algorithm>
#include <fstream>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "copyptr/corpus.hpp"
#include "copyptr/error.hpp"
#include "doctest.h"
#include "test_util.hpp"

namespace copyptr {
namespace {

using testing::TempDir;

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kIo;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

Example ex(const std::string& domain, const std::string& utt,
           const std::string& parse) {
  return make_example(domain, utt, parse);
}

TEST_SUITE("corpus") {

TEST_CASE("loads a small file") {
  TempDir dir("load");
  const auto path = dir.path() / "alarm_train.tsv";
  write_file(path,
             "alarm\tSet alarm for noon tomorrow\t[IN:CREATE_ALARM "
             "[SL:DATE_TIME for noon tomorrow ] ]\n"
             "alarm\tdelete my alarm\t[IN:DELETE_ALARM ]\n"
             "alarm\tsnooze it for 5 minutes\t[IN:SNOOZE_ALARM for [SL:DURATION "
             "5 minutes ] ]\n");
  Corpus c = load_corpus(path);
  REQUIRE(c.size() == 3);
  CHECK(c.split() == Split::kTrain);
  CHECK(c[0].utterance ==
        std::vector<std::string>{"set", "alarm", "for", "noon", "tomorrow"});
  CHECK(serialize(c[2].parse) == "[IN:SNOOZE_ALARM [SL:DURATION 5 minutes ] ]");
  LabelInventory inv = label_inventory(c, "alarm");
  CHECK(inv.intents ==
        std::set<std::string>{"CREATE_ALARM", "DELETE_ALARM", "SNOOZE_ALARM"});
  CHECK(inv.slots == std::set<std::string>{"DATE_TIME", "DURATION"});
  CHECK(c.domains().size() == 1);
  CHECK(c.has_domain("alarm"));
}

TEST_CASE("load errors carry line numbers") {
  TempDir dir("err");
  write_file(dir.path() / "empty_train.tsv", "");
  CHECK(code_of([&] { load_corpus(dir.path() / "empty_train.tsv"); }) ==
        ErrorCode::kEmptyCorpus);
  CHECK(code_of([&] { load_corpus(dir.path() / "missing_train.tsv"); }) ==
        ErrorCode::kFileNotFound);

  write_file(dir.path() / "bad_train.tsv",
             "a\tx y\t[IN:A [SL:B x ] ]\nonly two\tfields\n");
  try {
    load_corpus(dir.path() / "bad_train.tsv");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMalformedRecord);
    CHECK(e.line() == 2);
  }
  write_file(dir.path() / "parse_train.tsv",
             "a\tx\t[IN:A [SL:B x ] ]\na\tx\t[IN:A [SL:B x ]\n");
  try {
    load_corpus(dir.path() / "parse_train.tsv");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kParseError);
    CHECK(e.line() == 2);
  }
}

TEST_CASE("write and reload") {
  TempDir dir("rw");
  Corpus c({ex("d", "b a", "[IN:X [SL:Z a ] [SL:Y b ] ]"),
            ex("d", "c", "[IN:X [SL:Y c ] ]")});
  write_corpus(c, domain_split_path(dir.path(), "d", Split::kValid));
  Corpus back = load_domain_split(dir.path(), "d", Split::kValid);
  CHECK(back.split() == Split::kValid);
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].utterance == c[i].utterance);
    CHECK(back[i].parse == c[i].parse);
  }
}

TEST_CASE("domain registry") {
  Corpus c({ex("a", "x", "[IN:A ]"), ex("b", "y", "[IN:B ]"),
            ex("a", "z", "[IN:C ]")});
  CHECK(c.domains() == std::set<std::string, std::less<>>{"a", "b"});
  CHECK(c.domain("a").size() == 2);
  CHECK(code_of([&] { c.domain("q"); }) == ErrorCode::kUnknownDomain);
  CHECK(code_of([&] { label_inventory(c, "q"); }) == ErrorCode::kUnknownDomain);
  LabelInventory one = label_inventory(
      Corpus({ex("d", "x", "[IN:A [SL:B x ] ]")}), "d");
  CHECK(one.intents == std::set<std::string>{"A"});
  CHECK(one.slots == std::set<std::string>{"B"});
}

TEST_CASE("upsample") {
  std::vector<Example> five;
  for (int i = 0; i < 5; ++i) five.push_back(ex("d", "x", "[IN:A ]"));
  Corpus c(five);
  CHECK(upsample(c, 10).size() == 50);
  Corpus same = upsample(c, 1);
  CHECK(same.size() == 5);
  CHECK(code_of([&] { upsample(c, 0); }) == ErrorCode::kInvalidConfig);
  std::vector<Example> many(493, ex("d", "x", "[IN:A ]"));
  CHECK(upsample(Corpus(many), 100).size() == 49300);
}

TEST_CASE("spis on disjoint labels selects quota times labels") {
  std::vector<Example> examples;
  for (int l = 0; l < 100; ++l) {
    for (int k = 0; k < 30; ++k) {
      examples.push_back(Example{"d", {"w"}, ParseTree{intent("L" + std::to_string(l))}});
    }
  }
  Corpus c(examples);
  CHECK(spis_sample(c, "d", 25, 1).size() == 2500);
}

TEST_CASE("spis quota clips at availability") {
  std::vector<Example> examples(5, Example{"d", {"w"}, ParseTree{intent("L")}});
  CHECK(spis_sample(Corpus(examples), "d", 25, 3).size() == 5);
}

TEST_CASE("spis coverage against a brute-force counter") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Corpus c(testing::random_domain(rng, "d", 80, 4, 8));
    const auto available = testing::brute_force_label_counts(c.examples());
    for (int spis : {1, 3, 10}) {
      Corpus s = spis_sample(c, "d", spis, 100 + trial);
      const auto selected = testing::brute_force_label_counts(s.examples());
      for (const auto& [label, n] : available) {
        const auto it = selected.find(label);
        const std::size_t got = it == selected.end() ? 0 : it->second;
        CHECK(got >= std::min<std::size_t>(spis, n));
      }
    }
  }
}

TEST_CASE("spis is deterministic and respects exclusions") {
  Rng rng(9);
  Corpus c(testing::random_domain(rng, "d", 60, 3, 6));
  CHECK(spis_select(c, "d", 3, 42) == spis_select(c, "d", 3, 42));
  std::vector<std::size_t> train = spis_select(c, "d", 2, 1);
  std::vector<std::size_t> valid = spis_select(c, "d", 2, 2, train);
  for (std::size_t i : valid) {
    CHECK_FALSE(std::binary_search(train.begin(), train.end(), i));
  }
  CHECK(code_of([&] { spis_select(c, "d", 0, 1); }) == ErrorCode::kInvalidSpis);
  CHECK(code_of([&] { spis_select(c, "nope", 1, 1); }) ==
        ErrorCode::kUnknownDomain);
}

TEST_CASE("spis subset size grows with spis on average") {
  Rng rng(13);
  Corpus c(testing::random_domain(rng, "d", 200, 5, 10));
  double small = 0, large = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    small += static_cast<double>(spis_sample(c, "d", 2, seed).size());
    large += static_cast<double>(spis_sample(c, "d", 8, seed).size());
  }
  CHECK(large > small);
}

TEST_CASE("coverage audit") {
  Corpus c({ex("d", "x", "[IN:A [SL:B x ] ]"), ex("d", "y", "[IN:A ]")});
  Corpus s = c.subset(std::vector<std::size_t>{1});
  auto rows = coverage_audit(c, s, "d");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].label == "IN:A");
  CHECK(rows[0].selected == 1);
  CHECK(rows[0].available == 2);
  CHECK(rows[1].label == "SL:B");
  CHECK(rows[1].selected == 0);
}

TEST_CASE("vocabulary") {
  Corpus c({ex("d", "x y", "[IN:A [SL:B x ] ]")});
  Vocabulary v = Vocabulary::build(c);
  CHECK(v.ontology_tokens() == std::vector<std::string>{"[IN:A", "[SL:B", "]"});
  CHECK(v.close_index() == 2);
  CHECK(v.source_index("never-seen") == v.unk_index());
  CHECK(v.source_token(v.unk_index()) == "<unk>");
  CHECK(v.source_id("x") >= v.ontology_size());
  CHECK(Vocabulary::build(c) == v);
  CHECK(code_of([] { Vocabulary::build(Corpus{}); }) == ErrorCode::kEmptyCorpus);

  std::set<int> ids;
  for (const auto& t : v.ontology_tokens()) ids.insert(*v.ontology_id(t));
  for (const auto& t : v.source_tokens()) ids.insert(v.source_id(t));
  CHECK(ids.size() == v.source_tokens().size() + v.ontology_tokens().size());

  TempDir dir("vocab");
  v.save(dir.path() / "vocab.txt");
  CHECK(Vocabulary::load(dir.path() / "vocab.txt") == v);
}

TEST_CASE("encode the alarm example") {
  Example e = ex("alarm", "set alarm for noon tomorrow",
                 "[IN:CREATE_ALARM [SL:DATE_TIME for noon tomorrow ] ]");
  Vocabulary v = Vocabulary::build(Corpus({e}));
  const int in = *v.ontology_index("[IN:CREATE_ALARM");
  const int sl = *v.ontology_index("[SL:DATE_TIME");
  const int close = v.close_index();
  EncodedTarget want = {Symbol::generate(in), Symbol::generate(sl),
                        Symbol::copy(2),      Symbol::copy(3),
                        Symbol::copy(4),      Symbol::generate(close),
                        Symbol::generate(close)};
  CHECK(encode_example(e, v) == want);
}

TEST_CASE("encode uses the leftmost unconsumed position") {
  Example e = ex("d", "a b a", "[IN:X [SL:Y a a ] ]");
  Vocabulary v = Vocabulary::build(Corpus({e}));
  EncodedTarget t = encode_example(e, v);
  REQUIRE(t.size() == 6);
  CHECK(t[2] == Symbol::copy(0));
  CHECK(t[3] == Symbol::copy(2));

  Example bare = ex("d", "hello", "[IN:X ]");
  for (const Symbol& s : encode_example(bare, v)) CHECK_FALSE(s.is_copy());
}

TEST_CASE("encode rejects tokens missing from the source") {
  Example e{"d", {"a"}, parse_serialized("[IN:X [SL:Y b ] ]")};
  Vocabulary v = Vocabulary::build(Corpus({ex("d", "b", "[IN:X [SL:Y b ] ]")}));
  CHECK(code_of([&] { encode_example(e, v); }) == ErrorCode::kTokenNotInSource);
}

TEST_CASE("render inverts encode") {
  Rng rng(21);
  Corpus c(testing::random_domain(rng, "d", 50, 3, 5));
  Vocabulary v = Vocabulary::build(c);
  for (const Example& e : c.examples()) {
    EncodedTarget t = encode_example(e, v);
    ParseTree back = parse_tokens(render_target(t, e.utterance, v));
    CHECK(canonicalize(back) == e.parse);
  }
  std::vector<Symbol> bad = {Symbol::copy(7)};
  CHECK(code_of([&] { render_target(bad, c[0].utterance, v); }) ==
        ErrorCode::kTargetSourceMismatch);
}

}  // TEST_SUITE

}  // namespace
}  // namespace copyptr
