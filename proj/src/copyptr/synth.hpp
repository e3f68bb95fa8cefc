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


// Synthetic multi-domain intent/slot grammars.
//
// Eight small domains modeled on assistant traffic (alarm, event, messaging,
// music, navigation, reminder, timer, weather). Domains share slot types and
// value pools, and several embed intents of another domain inside a slot, so
// a model trained on some domains has something to transfer to the others.

#ifndef COPYPTR_SYNTH_HPP_
#define COPYPTR_SYNTH_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "copyptr/corpus.hpp"

namespace copyptr {

std::vector<std::string> synth_domains();

struct SynthSizes {
  std::size_t train = 300;
  std::size_t valid = 60;
  std::size_t test = 100;
};

// One generated record before loading: an utterance with original casing
// and the full (non-canonical) parse, tokens outside leaf slots included.
struct SynthRecord {
  std::string domain;
  std::string utterance;
  std::string parse;
};

// Throws kUnknownDomain.
std::vector<SynthRecord> synth_records(std::string_view domain,
                                       std::size_t count, std::uint64_t seed);

// Writes <dir>/<domain>_{train,valid,test}.tsv for every domain in
// `domains` (all of synth_domains() when empty).
void write_synth_corpus(const std::filesystem::path& dir,
                        const std::vector<std::string>& domains,
                        const SynthSizes& sizes, std::uint64_t seed);

}  // namespace copyptr

#endif  // COPYPTR_SYNTH_HPP_
