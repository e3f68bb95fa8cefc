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
#include <vector>

#include "copyptr/error.hpp"
#include "copyptr/eval.hpp"
#include "copyptr/experiment.hpp"
#include "doctest.h"
#include "test_util.hpp"

namespace copyptr {
namespace {

Corpus small_corpus() {
  return Corpus({
      make_example("messaging", "message bob hi there",
                   "[IN:SEND_MESSAGE [SL:RECIPIENT bob ] [SL:CONTENT hi there ] ]"),
      make_example("messaging", "text ann",
                   "[IN:SEND_MESSAGE [SL:RECIPIENT ann ] ]"),
      make_example("alarm", "wake me at 7",
                   "[IN:CREATE_ALARM [SL:DATE_TIME at 7 ] ]"),
      make_example("reminder", "remind me to call ann at 5",
                   "[IN:CREATE_REMINDER [SL:TODO [IN:SEND_MESSAGE [SL:RECIPIENT ann ] ] ] "
                   "[SL:DATE_TIME at 5 ] ]"),
  });
}

Symbol gen(const Vocabulary& v, const std::string& token) {
  return Symbol::generate(*v.ontology_index(token));
}

ModelConfig model_for(const Vocabulary& v, int hidden = 8) {
  ModelConfig c;
  c.layers = 1;
  c.hidden = hidden;
  c.embed = hidden;
  c.heads = 2;
  c.dropout = 0.0;
  c.source_vocab = v.source_size();
  c.ontology_vocab = v.ontology_size();
  c.close_index = v.close_index();
  return c;
}

TEST_SUITE("eval") {

TEST_CASE("gold symbols are an exact match") {
  const Corpus corpus = small_corpus();
  const Vocabulary vocab = Vocabulary::build(corpus);
  for (const Example& ex : corpus.examples()) {
    const EncodedTarget gold = encode_example(ex, vocab);
    CHECK(exact_match(gold, ex.parse, ex.utterance, vocab));
  }
}

TEST_CASE("sibling order does not matter") {
  const Corpus corpus = small_corpus();
  const Vocabulary vocab = Vocabulary::build(corpus);
  const Example& ex = corpus[0];  // message bob hi there
  const int close = vocab.close_index();
  const EncodedTarget swapped = {
      gen(vocab, "[IN:SEND_MESSAGE"), gen(vocab, "[SL:CONTENT"), Symbol::copy(2),
      Symbol::copy(3), Symbol::generate(close), gen(vocab, "[SL:RECIPIENT"), Symbol::copy(1),
      Symbol::generate(close), Symbol::generate(close)};
  CHECK(exact_match(swapped, ex.parse, ex.utterance, vocab));

  EncodedTarget wrong_word = swapped;
  wrong_word[2] = Symbol::copy(0);
  CHECK_FALSE(exact_match(wrong_word, ex.parse, ex.utterance, vocab));
}

TEST_CASE("malformed predictions score false") {
  const Corpus corpus = small_corpus();
  const Vocabulary vocab = Vocabulary::build(corpus);
  const Example& ex = corpus[1];
  EncodedTarget gold = encode_example(ex, vocab);
  EncodedTarget unbalanced(gold.begin(), gold.end() - 1);
  CHECK_FALSE(exact_match(unbalanced, ex.parse, ex.utterance, vocab));
  CHECK_FALSE(render_prediction(unbalanced, ex.utterance, vocab).has_value());
  EncodedTarget copy_first = gold;
  copy_first.insert(copy_first.begin(), Symbol::copy(0));
  CHECK_FALSE(exact_match(copy_first, ex.parse, ex.utterance, vocab));
  EncodedTarget out_of_range = gold;
  out_of_range[2] = Symbol::copy(17);
  CHECK_FALSE(exact_match(out_of_range, ex.parse, ex.utterance, vocab));
  CHECK_FALSE(exact_match({}, ex.parse, ex.utterance, vocab));
}

TEST_CASE("report identities and no side effects") {
  const Corpus corpus = small_corpus();
  const Vocabulary vocab = Vocabulary::build(corpus);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const CopyPtrModel model(model_for(vocab), seed);
    const std::vector<ad::Tensor> before = model.params().snapshot();
    for (int beam : {1, 3}) {
      const EvalReport r = evaluate(model, vocab, corpus, DecodeSettings{beam, 0});
      const std::vector<ad::Tensor> after = model.params().snapshot();
      for (std::size_t i = 0; i < before.size(); ++i) {
        CHECK(std::equal(before[i].values().begin(), before[i].values().end(),
                         after[i].values().begin()));
      }
      CHECK(r.overall.count == corpus.size());
      CHECK(r.flat.count + r.compositional.count == r.overall.count);
      CHECK(r.overall.correct == r.flat.correct + r.compositional.correct);
      const double weighted =
          (r.flat.count * r.flat.accuracy().value_or(0.0) +
           r.compositional.count * r.compositional.accuracy().value_or(0.0)) /
          static_cast<double>(r.overall.count);
      CHECK(r.exact_match() == doctest::Approx(weighted).epsilon(1e-12));
      const double valid_fraction =
          static_cast<double>(r.overall.count - r.invalid) / static_cast<double>(r.overall.count);
      CHECK(r.invalid_output_rate() + valid_fraction == doctest::Approx(1.0));
      CHECK(r.exact_match() >= 0.0);
      CHECK(r.exact_match() <= 1.0);
      CHECK(r.predictions.size() == corpus.size());
      std::size_t per_intent = 0;
      for (const auto& [name, s] : r.per_intent) per_intent += s.count;
      CHECK(per_intent == corpus.size());
    }
  }
}

TEST_CASE("empty strata are absent") {
  std::vector<Example> flat = {small_corpus()[0], small_corpus()[1]};
  const Corpus corpus(flat);
  const Vocabulary vocab = Vocabulary::build(corpus);
  const CopyPtrModel model(model_for(vocab), 3);
  const EvalReport r = evaluate(model, vocab, corpus, DecodeSettings{});
  CHECK(r.flat.count == 2);
  CHECK_FALSE(r.compositional.accuracy().has_value());
  CHECK(r.to_json().find("\"compositional\"") != std::string::npos);
  bool threw = false;
  try {
    evaluate(model, vocab, Corpus(), DecodeSettings{});
  } catch (const Error& e) {
    threw = e.code() == ErrorCode::kEmptyCorpus;
  }
  CHECK(threw);
}

TEST_CASE("memorized corpus scores one") {
  const Corpus corpus = small_corpus();
  const Vocabulary vocab = Vocabulary::build(corpus);
  CopyPtrModel model(model_for(vocab, 16), 1);
  auto examples = std::make_shared<const std::vector<EncodedExample>>(encode_corpus(corpus, vocab));
  TrainConfig config;
  config.batch_size = 4;
  config.max_epochs = 400;
  config.lr = 1e-2;
  const TrainHistory h = supervised_train(model.params(), parser_task(model, examples, "all"),
                                          config);
  CHECK(h.epoch_loss.back() < 0.05);
  const EvalReport r = evaluate(model, vocab, corpus, DecodeSettings{});
  CHECK(r.exact_match() == 1.0);
  CHECK(r.invalid == 0);
  CHECK(evaluate(model, vocab, corpus, DecodeSettings{4, 0}).exact_match() == 1.0);
}

}  // TEST_SUITE

}  // namespace
}  // namespace copyptr
