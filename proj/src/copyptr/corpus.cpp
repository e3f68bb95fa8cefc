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

#include "copyptr/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "copyptr/error.hpp"
#include "copyptr/random.hpp"

namespace copyptr {

namespace fs = std::filesystem;

const char* split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "train";
}

std::optional<Split> split_from_name(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "valid" || name == "eval" || name == "dev") return Split::kValid;
  if (name == "test") return Split::kTest;
  return std::nullopt;
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  for (std::string t; in >> t;) out.push_back(std::move(t));
  return out;
}

std::string join(std::span<const std::string> tokens, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Corpus

Corpus::Corpus(std::vector<Example> examples, Split split)
    : examples_(std::move(examples)), split_(split) {
  for (const Example& e : examples_) domains_.insert(e.domain);
}

bool Corpus::has_domain(std::string_view domain) const {
  return domains_.find(domain) != domains_.end();
}

Corpus Corpus::domain(std::string_view name) const {
  if (!has_domain(name)) {
    throw Error(ErrorCode::kUnknownDomain, std::string(name));
  }
  std::vector<Example> out;
  for (const Example& e : examples_) {
    if (e.domain == name) out.push_back(e);
  }
  return Corpus(std::move(out), split_);
}

Corpus Corpus::subset(std::span<const std::size_t> indices) const {
  std::vector<Example> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(examples_.at(i));
  return Corpus(std::move(out), split_);
}

Corpus concat(std::span<const Corpus> parts) {
  std::vector<Example> out;
  Split split = parts.empty() ? Split::kTrain : parts.front().split();
  for (const Corpus& c : parts) {
    out.insert(out.end(), c.examples().begin(), c.examples().end());
  }
  return Corpus(std::move(out), split);
}

Corpus upsample(const Corpus& corpus, int factor) {
  if (factor < 1) {
    throw Error(ErrorCode::kInvalidConfig, "upsample factor must be >= 1");
  }
  std::vector<Example> out;
  out.reserve(corpus.size() * factor);
  for (int r = 0; r < factor; ++r) {
    out.insert(out.end(), corpus.examples().begin(), corpus.examples().end());
  }
  return Corpus(std::move(out), corpus.split());
}

// ---------------------------------------------------------------------------
// Loading

namespace {

bool utterance_covers(const std::vector<std::string>& utterance,
                      const ParseTree& canonical) {
  for (const auto& group : leaf_slot_tokens(canonical)) {
    for (const std::string& t : group) {
      if (std::find(utterance.begin(), utterance.end(), t) == utterance.end()) {
        return false;
      }
    }
  }
  return true;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

}  // namespace

Example make_example(std::string_view domain, std::string_view utterance,
                     std::string_view serialized_parse) {
  if (domain.empty()) {
    throw Error(ErrorCode::kMalformedRecord, "empty domain");
  }
  std::vector<std::string> parse_tokens_raw = split_whitespace(serialized_parse);
  // Utterance tokens inside the parse are lower-cased; labels keep case.
  for (std::string& t : parse_tokens_raw) {
    if (!t.starts_with('[') && t != "]") t = lowercase(t);
  }
  ParseTree original;
  try {
    original = parse_tokens(parse_tokens_raw);
  } catch (const Error& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
  Example ex;
  ex.domain = std::string(domain);
  ex.parse = canonicalize(original);
  ex.utterance = split_whitespace(lowercase(utterance));
  // Raw utterances may carry punctuation the parse tokenization split off;
  // the parse's own token sequence is the tokenized utterance in that case.
  if (!utterance_covers(ex.utterance, ex.parse)) {
    ex.utterance = tokens(original);
  }
  if (ex.utterance.empty()) {
    throw Error(ErrorCode::kMalformedRecord, "empty utterance");
  }
  return ex;
}

Corpus load_corpus(const fs::path& path, Split split) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kFileNotFound, path.string());
  std::vector<Example> examples;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string> fields = split_tabs(line);
    if (line_no == 1 && fields.size() >= 1 && fields[0] == "domain") continue;
    if (fields.size() != 3) {
      throw Error(ErrorCode::kMalformedRecord,
                  path.string() + ": expected 3 tab-separated fields, got " +
                      std::to_string(fields.size()),
                  line_no);
    }
    try {
      examples.push_back(make_example(fields[0], fields[1], fields[2]));
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ": " + e.what(), line_no);
    }
  }
  if (examples.empty()) {
    throw Error(ErrorCode::kEmptyCorpus, path.string());
  }
  return Corpus(std::move(examples), split);
}

Corpus load_corpus(const fs::path& path) {
  Split split = Split::kTrain;
  const std::string stem = path.stem().string();
  const auto underscore = stem.rfind('_');
  if (underscore != std::string::npos) {
    if (auto s = split_from_name(stem.substr(underscore + 1))) split = *s;
  }
  return load_corpus(path, split);
}

fs::path domain_split_path(const fs::path& dir, std::string_view domain,
                           Split split) {
  return dir / (std::string(domain) + "_" + split_name(split) + ".tsv");
}

Corpus load_domain_split(const fs::path& dir, std::string_view domain,
                         Split split) {
  return load_corpus(domain_split_path(dir, domain, split), split);
}

void write_corpus(const Corpus& corpus, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  for (const Example& e : corpus.examples()) {
    out << e.domain << '\t' << join(e.utterance) << '\t' << serialize(e.parse)
        << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Labels and SPIS sampling

std::set<std::string> example_labels(const Example& example) {
  std::set<std::string> out;
  for (const Label& l : labels(example.parse)) out.insert(l.serialized());
  return out;
}

LabelInventory label_inventory(const Corpus& corpus, std::string_view domain) {
  if (!corpus.has_domain(domain)) {
    throw Error(ErrorCode::kUnknownDomain, std::string(domain));
  }
  LabelInventory inv;
  for (const Example& e : corpus.examples()) {
    if (e.domain != domain) continue;
    for (const Label& l : labels(e.parse)) {
      (l.is_intent() ? inv.intents : inv.slots).insert(l.name);
    }
  }
  return inv;
}

std::vector<std::size_t> spis_select(const Corpus& corpus,
                                     std::string_view domain, int spis,
                                     std::uint64_t seed,
                                     std::span<const std::size_t> exclude) {
  if (spis < 1) {
    throw Error(ErrorCode::kInvalidSpis,
                "spis must be >= 1, got " + std::to_string(spis));
  }
  if (!corpus.has_domain(domain)) {
    throw Error(ErrorCode::kUnknownDomain, std::string(domain));
  }
  const std::unordered_set<std::size_t> excluded(exclude.begin(),
                                                 exclude.end());

  // label -> candidate example indices, in corpus order
  std::map<std::string, std::vector<std::size_t>> by_label;
  std::vector<std::vector<std::string>> labels_of(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Example& e = corpus[i];
    if (e.domain != domain) continue;
    std::set<std::string> ls = example_labels(e);
    labels_of[i].assign(ls.begin(), ls.end());
    for (const std::string& l : ls) {
      auto& list = by_label[l];
      if (!excluded.count(i)) list.push_back(i);
    }
  }

  Rng rng(seed);
  std::vector<std::string> order;
  for (const auto& [label, _] : by_label) order.push_back(label);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<bool> selected(corpus.size(), false);
  std::map<std::string, std::size_t> covered;
  for (const std::string& label : order) {
    if (covered[label] >= static_cast<std::size_t>(spis)) continue;
    std::vector<std::size_t> candidates;
    for (std::size_t i : by_label[label]) {
      if (!selected[i]) candidates.push_back(i);
    }
    std::shuffle(candidates.begin(), candidates.end(), rng);
    for (std::size_t i : candidates) {
      if (covered[label] >= static_cast<std::size_t>(spis)) break;
      selected[i] = true;
      for (const std::string& l : labels_of[i]) ++covered[l];
    }
  }

  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (selected[i]) out.push_back(i);
  }
  return out;
}

Corpus spis_sample(const Corpus& corpus, std::string_view domain, int spis,
                   std::uint64_t seed) {
  return corpus.subset(spis_select(corpus, domain, spis, seed));
}

std::vector<CoverageRow> coverage_audit(const Corpus& full,
                                        const Corpus& selected,
                                        std::string_view domain) {
  std::map<std::string, CoverageRow> rows;
  for (const Example& e : full.examples()) {
    if (e.domain != domain) continue;
    for (const std::string& l : example_labels(e)) {
      rows[l].label = l;
      ++rows[l].available;
    }
  }
  for (const Example& e : selected.examples()) {
    if (e.domain != domain) continue;
    for (const std::string& l : example_labels(e)) {
      rows[l].label = l;
      ++rows[l].selected;
    }
  }
  std::vector<CoverageRow> out;
  for (auto& [_, row] : rows) out.push_back(row);
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary(std::vector<std::string> source_tokens,
                       std::vector<std::string> ontology_tokens)
    : source_tokens_(std::move(source_tokens)),
      ontology_tokens_(std::move(ontology_tokens)) {
  for (std::size_t i = 0; i < source_tokens_.size(); ++i) {
    source_lookup_.emplace(source_tokens_[i], static_cast<int>(i));
  }
  for (std::size_t i = 0; i < ontology_tokens_.size(); ++i) {
    ontology_lookup_.emplace(ontology_tokens_[i], static_cast<int>(i));
  }
  auto unk = source_lookup_.find(std::string(kUnk));
  auto close = ontology_lookup_.find(std::string(kClose));
  if (unk == source_lookup_.end() || close == ontology_lookup_.end()) {
    throw Error(ErrorCode::kInvalidConfig,
                "vocabulary lacks the unknown or closing token");
  }
  unk_index_ = unk->second;
  close_index_ = close->second;
}

Vocabulary Vocabulary::build(const Corpus& corpus) {
  if (corpus.empty()) throw Error(ErrorCode::kEmptyCorpus, "build_vocab");
  std::set<std::string> source{std::string(kUnk)};
  std::set<std::string> ontology{std::string(kClose)};
  for (const Example& e : corpus.examples()) {
    source.insert(e.utterance.begin(), e.utterance.end());
    for (const Label& l : labels(e.parse)) ontology.insert(l.open_token());
  }
  return Vocabulary({source.begin(), source.end()},
                    {ontology.begin(), ontology.end()});
}

int Vocabulary::source_index(std::string_view token) const {
  auto it = source_lookup_.find(std::string(token));
  return it == source_lookup_.end() ? unk_index_ : it->second;
}

std::optional<int> Vocabulary::ontology_index(std::string_view token) const {
  auto it = ontology_lookup_.find(std::string(token));
  if (it == ontology_lookup_.end()) return std::nullopt;
  return it->second;
}

void Vocabulary::save(const fs::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << "copyptr-vocab 1\n";
  out << "ontology " << ontology_tokens_.size() << '\n';
  for (const auto& t : ontology_tokens_) out << t << '\n';
  out << "source " << source_tokens_.size() << '\n';
  for (const auto& t : source_tokens_) out << t << '\n';
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

Vocabulary Vocabulary::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kFileNotFound, path.string());
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "copyptr-vocab" || version != 1) {
    throw Error(ErrorCode::kCheckpointMismatch,
                "not a vocabulary file: " + path.string());
  }
  auto read_section = [&](const char* name) {
    std::string header;
    std::size_t n = 0;
    in >> header >> n;
    if (header != name) {
      throw Error(ErrorCode::kCheckpointMismatch,
                  "missing vocabulary section " + std::string(name));
    }
    std::vector<std::string> tokens(n);
    for (auto& t : tokens) in >> t;
    return tokens;
  };
  auto ontology = read_section("ontology");
  auto source = read_section("source");
  if (!in) throw Error(ErrorCode::kCheckpointMismatch, "truncated vocabulary");
  return Vocabulary(std::move(source), std::move(ontology));
}

// ---------------------------------------------------------------------------
// Target encoding

EncodedTarget encode_example(const Example& example, const Vocabulary& vocab) {
  EncodedTarget out;
  const auto& utt = example.utterance;
  std::vector<bool> consumed;
  bool in_leaf_slot = false;

  const std::vector<std::string> stream = serialize_tokens(example.parse);
  for (std::size_t k = 0; k < stream.size(); ++k) {
    const std::string& t = stream[k];
    if (auto id = vocab.ontology_index(t)) {
      out.push_back(Symbol::generate(*id));
      if (t != Vocabulary::kClose) {
        consumed.assign(utt.size(), false);
        in_leaf_slot = true;
      } else {
        in_leaf_slot = false;
      }
      continue;
    }
    if (t.starts_with('[')) {
      throw Error(ErrorCode::kTargetSourceMismatch,
                  "label " + t + " missing from the ontology vocabulary");
    }
    if (!in_leaf_slot) {
      throw Error(ErrorCode::kTokenNotInSource, "token '" + t + "' outside a slot");
    }
    std::size_t pos = 0;
    while (pos < utt.size() && (consumed[pos] || utt[pos] != t)) ++pos;
    if (pos == utt.size()) {
      throw Error(ErrorCode::kTokenNotInSource,
                  "'" + t + "' not in utterance '" + join(utt) + "'");
    }
    consumed[pos] = true;
    out.push_back(Symbol::copy(static_cast<int>(pos)));
  }
  return out;
}

std::vector<int> encode_source(std::span<const std::string> utterance,
                               const Vocabulary& vocab) {
  std::vector<int> ids;
  ids.reserve(utterance.size());
  for (const auto& t : utterance) ids.push_back(vocab.source_index(t));
  return ids;
}

std::vector<std::string> render_target(std::span<const Symbol> symbols,
                                       std::span<const std::string> utterance,
                                       const Vocabulary& vocab) {
  std::vector<std::string> out;
  out.reserve(symbols.size());
  for (const Symbol& s : symbols) {
    if (s.is_copy()) {
      if (s.index < 0 || static_cast<std::size_t>(s.index) >= utterance.size()) {
        throw Error(ErrorCode::kTargetSourceMismatch,
                    "copy position " + std::to_string(s.index));
      }
      out.push_back(utterance[s.index]);
    } else {
      if (s.index < 0 || s.index >= vocab.ontology_size()) {
        throw Error(ErrorCode::kTargetSourceMismatch,
                    "ontology index " + std::to_string(s.index));
      }
      out.push_back(vocab.ontology_token(s.index));
    }
  }
  return out;
}

}  // namespace copyptr
