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

#ifndef COPYPTR_CORPUS_HPP_
#define COPYPTR_CORPUS_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "copyptr/tree.hpp"

namespace copyptr {

enum class Split { kTrain, kValid, kTest };

const char* split_name(Split split);
std::optional<Split> split_from_name(std::string_view name);

struct Example {
  std::string domain;
  std::vector<std::string> utterance;  // lower-cased source tokens
  ParseTree parse;                     // canonical form
};

class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Example> examples, Split split = Split::kTrain);

  const std::vector<Example>& examples() const { return examples_; }
  std::size_t size() const { return examples_.size(); }
  bool empty() const { return examples_.empty(); }
  Split split() const { return split_; }
  const Example& operator[](std::size_t i) const { return examples_[i]; }

  // Sorted registry of every domain with at least one example.
  const std::set<std::string, std::less<>>& domains() const { return domains_; }
  bool has_domain(std::string_view domain) const;

  // Examples of one domain; throws kUnknownDomain.
  Corpus domain(std::string_view name) const;
  Corpus subset(std::span<const std::size_t> indices) const;

 private:
  std::vector<Example> examples_;
  std::set<std::string, std::less<>> domains_;
  Split split_ = Split::kTrain;
};

Corpus concat(std::span<const Corpus> parts);
Corpus upsample(const Corpus& corpus, int factor);

// One "domain \t utterance \t serialized_parse" record per line. An optional
// header line starting with "domain\t" is skipped. Throws kFileNotFound,
// kMalformedRecord, kParseError (with line numbers) and kEmptyCorpus.
Corpus load_corpus(const std::filesystem::path& path, Split split);
Corpus load_corpus(const std::filesystem::path& path);
// Loads <dir>/<domain>_<split>.tsv.
Corpus load_domain_split(const std::filesystem::path& dir,
                         std::string_view domain, Split split);
std::filesystem::path domain_split_path(const std::filesystem::path& dir,
                                        std::string_view domain, Split split);

// Writes records in the loadable format, canonical parses included.
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);

// Builds an Example from raw fields. Throws kParseError / kMalformedRecord.
Example make_example(std::string_view domain, std::string_view utterance,
                     std::string_view serialized_parse);

struct LabelInventory {
  std::set<std::string> intents;  // names without the "IN:" prefix
  std::set<std::string> slots;
};

LabelInventory label_inventory(const Corpus& corpus, std::string_view domain);

// Distinct serialized labels ("IN:X", "SL:Y") of one example.
std::set<std::string> example_labels(const Example& example);

// Greedy-random SPIS selection: labels are visited in a seeded random order
// and every label still short of `spis` covering examples draws random
// unselected examples containing it until the quota (clipped at
// availability) is met. Indices are into `corpus` and returned sorted.
// `exclude` lists indices that may not be selected.
std::vector<std::size_t> spis_select(const Corpus& corpus,
                                     std::string_view domain, int spis,
                                     std::uint64_t seed,
                                     std::span<const std::size_t> exclude = {});
Corpus spis_sample(const Corpus& corpus, std::string_view domain, int spis,
                   std::uint64_t seed);

struct CoverageRow {
  std::string label;
  std::size_t selected = 0;
  std::size_t available = 0;
};

// Per-label selected/available counts of a domain, sorted by label.
std::vector<CoverageRow> coverage_audit(const Corpus& full,
                                        const Corpus& selected,
                                        std::string_view domain);

// Source tokens and ontology tokens live in disjoint id ranges: ontology ids
// are [0, ontology_size()), source ids [ontology_size(), ontology_size() +
// source_size()). Both id spaces are sorted for reproducibility.
class Vocabulary {
 public:
  static constexpr std::string_view kUnk = "<unk>";
  static constexpr std::string_view kClose = "]";

  Vocabulary() = default;
  Vocabulary(std::vector<std::string> source_tokens,
             std::vector<std::string> ontology_tokens);

  // Throws kEmptyCorpus.
  static Vocabulary build(const Corpus& corpus);

  int source_size() const { return static_cast<int>(source_tokens_.size()); }
  int ontology_size() const {
    return static_cast<int>(ontology_tokens_.size());
  }

  // Index within the source space, UNK for unseen tokens.
  int source_index(std::string_view token) const;
  int unk_index() const { return unk_index_; }
  std::optional<int> ontology_index(std::string_view token) const;
  int close_index() const { return close_index_; }
  bool is_open_label(int ontology_index) const {
    return ontology_index != close_index_;
  }

  int source_id(std::string_view token) const {
    return ontology_size() + source_index(token);
  }
  std::optional<int> ontology_id(std::string_view token) const {
    return ontology_index(token);
  }

  const std::string& source_token(int index) const {
    return source_tokens_.at(index);
  }
  const std::string& ontology_token(int index) const {
    return ontology_tokens_.at(index);
  }
  const std::vector<std::string>& source_tokens() const {
    return source_tokens_;
  }
  const std::vector<std::string>& ontology_tokens() const {
    return ontology_tokens_;
  }

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.source_tokens_ == b.source_tokens_ &&
           a.ontology_tokens_ == b.ontology_tokens_;
  }

 private:
  std::vector<std::string> source_tokens_;
  std::vector<std::string> ontology_tokens_;
  std::unordered_map<std::string, int> source_lookup_;
  std::unordered_map<std::string, int> ontology_lookup_;
  int unk_index_ = 0;
  int close_index_ = 0;
};

// One output symbol: an ontology token, or a copy of source position `index`.
struct Symbol {
  enum class Kind { kGenerate, kCopy };
  Kind kind = Kind::kGenerate;
  int index = 0;

  static Symbol generate(int ontology_index) {
    return {Kind::kGenerate, ontology_index};
  }
  static Symbol copy(int position) { return {Kind::kCopy, position}; }
  bool is_copy() const { return kind == Kind::kCopy; }

  friend bool operator==(const Symbol&, const Symbol&) = default;
};

using EncodedTarget = std::vector<Symbol>;

// Labels and "]" become Generate symbols, leaf-slot tokens become Copy of the
// leftmost source position not yet consumed within the same slot. Throws
// kTokenNotInSource.
EncodedTarget encode_example(const Example& example, const Vocabulary& vocab);

std::vector<int> encode_source(std::span<const std::string> utterance,
                               const Vocabulary& vocab);

// Token stream of a symbol sequence (Copy(i) -> utterance[i]). Throws
// kTargetSourceMismatch for out-of-range symbols.
std::vector<std::string> render_target(std::span<const Symbol> symbols,
                                       std::span<const std::string> utterance,
                                       const Vocabulary& vocab);

std::string lowercase(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
std::string join(std::span<const std::string> tokens, std::string_view sep = " ");

}  // namespace copyptr

#endif  // COPYPTR_CORPUS_HPP_
