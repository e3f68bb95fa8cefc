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


// Exact-match scoring of decoded parses on canonical forms.

#ifndef COPYPTR_EVAL_HPP_
#define COPYPTR_EVAL_HPP_

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "copyptr/corpus.hpp"
#include "copyptr/model.hpp"

namespace copyptr {

struct DecodeSettings {
  int beam_width = 1;  // 1 = greedy
  // Symbol budget per example; 0 derives it from the source length.
  int max_len = 0;

  int budget(std::size_t source_length) const;
};

// Renders `predicted` against the utterance, parses and canonicalizes it and
// compares with the canonicalized gold. Malformed renderings score false.
bool exact_match(std::span<const Symbol> predicted, const ParseTree& gold,
                 std::span<const std::string> utterance, const Vocabulary& vocab);

// Parse of a decoded symbol sequence, or nullopt when it is not a tree.
std::optional<ParseTree> render_prediction(std::span<const Symbol> predicted,
                                           std::span<const std::string> utterance,
                                           const Vocabulary& vocab);

struct Stratum {
  std::size_t count = 0;
  std::size_t correct = 0;

  // Absent for an empty stratum.
  std::optional<double> accuracy() const;
};

struct EvalReport {
  Stratum overall;
  Stratum flat;
  Stratum compositional;
  std::size_t invalid = 0;
  // Keyed by the gold root intent.
  std::map<std::string, Stratum> per_intent;
  DecodeSettings settings;
  // Serialized prediction per example, "" for invalid output.
  std::vector<std::string> predictions;

  double exact_match() const { return overall.accuracy().value_or(0.0); }
  double invalid_output_rate() const;
  std::string to_json(bool with_predictions = false) const;
};

// Decodes every example; the model is not modified. Throws kEmptyCorpus.
EvalReport evaluate(const CopyPtrModel& model, const Vocabulary& vocab,
                    const Corpus& corpus, const DecodeSettings& settings);

}  // namespace copyptr

#endif  // COPYPTR_EVAL_HPP_
