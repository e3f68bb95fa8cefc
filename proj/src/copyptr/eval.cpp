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


#include "copyptr/eval.hpp"

#include "copyptr/error.hpp"
#include "json.hpp"

namespace copyptr {

int DecodeSettings::budget(std::size_t source_length) const {
  if (max_len > 0) return max_len;
  return 2 * static_cast<int>(source_length) + 24;
}

std::optional<ParseTree> render_prediction(std::span<const Symbol> predicted,
                                           std::span<const std::string> utterance,
                                           const Vocabulary& vocab) {
  if (!well_formed(predicted, vocab.close_index())) return std::nullopt;
  try {
    const std::vector<std::string> tokens = render_target(predicted, utterance, vocab);
    return canonicalize(parse_tokens(tokens));
  } catch (const Error&) {
    return std::nullopt;
  }
}

bool exact_match(std::span<const Symbol> predicted, const ParseTree& gold,
                 std::span<const std::string> utterance, const Vocabulary& vocab) {
  const std::optional<ParseTree> tree = render_prediction(predicted, utterance, vocab);
  return tree && *tree == canonicalize(gold);
}

std::optional<double> Stratum::accuracy() const {
  if (count == 0) return std::nullopt;
  return static_cast<double>(correct) / static_cast<double>(count);
}

double EvalReport::invalid_output_rate() const {
  return overall.count == 0 ? 0.0
                            : static_cast<double>(invalid) / static_cast<double>(overall.count);
}

namespace {

nlohmann::json stratum_json(const Stratum& s) {
  nlohmann::json j{{"count", s.count}, {"correct", s.correct}};
  const auto acc = s.accuracy();
  j["accuracy"] = acc ? nlohmann::json(*acc) : nlohmann::json(nullptr);
  return j;
}

}  // namespace

std::string EvalReport::to_json(bool with_predictions) const {
  nlohmann::json j;
  j["exact_match"] = exact_match();
  j["count"] = overall.count;
  j["flat"] = stratum_json(flat);
  j["compositional"] = stratum_json(compositional);
  j["invalid_output_rate"] = invalid_output_rate();
  j["decoder"] = settings.beam_width > 1 ? "beam" : "greedy";
  j["beam_width"] = settings.beam_width;
  j["max_len"] = settings.max_len;
  nlohmann::json intents = nlohmann::json::object();
  for (const auto& [name, s] : per_intent) intents[name] = stratum_json(s);
  j["per_intent"] = std::move(intents);
  if (with_predictions) j["predictions"] = predictions;
  return j.dump(2);
}

EvalReport evaluate(const CopyPtrModel& model, const Vocabulary& vocab,
                    const Corpus& corpus, const DecodeSettings& settings) {
  if (corpus.empty()) throw Error(ErrorCode::kEmptyCorpus, "nothing to evaluate");
  if (settings.beam_width < 1) {
    throw Error(ErrorCode::kInvalidConfig, "beam width must be >= 1");
  }
  EvalReport report;
  report.settings = settings;
  for (const Example& ex : corpus.examples()) {
    const std::vector<int> source = encode_source(ex.utterance, vocab);
    const int budget = settings.budget(source.size());
    const Decoded out = settings.beam_width > 1
                            ? beam_decode(model, source, settings.beam_width, budget)
                            : greedy_decode(model, source, budget);
    const std::optional<ParseTree> tree = render_prediction(out.symbols, ex.utterance, vocab);
    const bool hit = tree && *tree == canonicalize(ex.parse);
    if (!tree) ++report.invalid;
    report.predictions.push_back(tree ? serialize(*tree) : std::string());

    Stratum& stratum = is_flat(ex.parse) ? report.flat : report.compositional;
    Stratum& intent = report.per_intent[ex.parse.root.label.name];
    for (Stratum* s : {&report.overall, &stratum, &intent}) {
      ++s->count;
      if (hit) ++s->correct;
    }
  }
  return report;
}

}  // namespace copyptr
