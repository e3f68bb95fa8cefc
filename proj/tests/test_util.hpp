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

// Generators and independent oracles shared by the unit and acceptance tests.

#ifndef COPYPTR_TESTS_TEST_UTIL_HPP_
#define COPYPTR_TESTS_TEST_UTIL_HPP_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <unistd.h>

#include "copyptr/corpus.hpp"
#include "copyptr/random.hpp"
#include "copyptr/tree.hpp"

namespace copyptr::testing {

inline const std::vector<std::string>& intent_pool() {
  static const std::vector<std::string> pool = {
      "CREATE_ALARM", "GET_EVENT", "GET_WEATHER", "SEND_MESSAGE", "GET_INFO"};
  return pool;
}

inline const std::vector<std::string>& slot_pool() {
  static const std::vector<std::string> pool = {
      "DATE_TIME", "LOCATION", "RECIPIENT", "CONTENT_EXACT", "NAME_EVENT",
      "CAT_EVENT"};
  return pool;
}

inline const std::vector<std::string>& word_pool() {
  static const std::vector<std::string> pool = {
      "the", "for", "noon", "tomorrow", "bill", "mindy", "yes", "game",
      "eagles", "to", "at", "rain"};
  return pool;
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& pool) {
  return pool[uniform_index(rng, pool.size())];
}

inline Node random_node(Rng& rng, bool is_intent, int depth_left) {
  Node n;
  n.label.kind = is_intent ? LabelKind::kIntent : LabelKind::kSlot;
  n.label.name = pick(rng, is_intent ? intent_pool() : slot_pool());
  const std::size_t count = uniform_index(rng, 4);
  for (std::size_t i = 0; i < count; ++i) {
    const bool node_child = depth_left > 1 && uniform_index(rng, 3) != 0;
    if (node_child && (is_intent || uniform_index(rng, 2) == 0)) {
      n.children.push_back(Child::of(random_node(rng, !is_intent, depth_left - 1)));
    } else {
      n.children.push_back(Child::of(pick(rng, word_pool())));
    }
  }
  return n;
}

// Random valid tree with at most `max_depth` label levels.
inline ParseTree random_tree(Rng& rng, int max_depth = 5) {
  return ParseTree{random_node(rng, true, max_depth)};
}

inline void shuffle_siblings(Node& n, Rng& rng) {
  // Permute node children among the positions held by node children, so the
  // token layout is left alone.
  std::vector<std::size_t> slots;
  std::vector<Node> nodes;
  for (std::size_t i = 0; i < n.children.size(); ++i) {
    if (n.children[i].is_node()) {
      slots.push_back(i);
      nodes.push_back(*n.children[i].node);
    }
  }
  std::shuffle(nodes.begin(), nodes.end(), rng);
  for (std::size_t k = 0; k < slots.size(); ++k) {
    shuffle_siblings(nodes[k], rng);
    n.children[slots[k]] = Child::of(std::move(nodes[k]));
  }
}

inline int depth_oracle(const Node& n) {
  int best = 0;
  for (const Child& c : n.children) {
    if (c.is_node()) best = std::max(best, depth_oracle(*c.node));
  }
  return best + 1;
}

inline void label_multiset(const Node& n, std::multiset<std::string>& out) {
  out.insert(n.label.serialized());
  for (const Child& c : n.children) {
    if (c.is_node()) label_multiset(*c.node, out);
  }
}

// Count of examples containing each serialized label, by direct scan.
inline std::map<std::string, std::size_t> brute_force_label_counts(
    const std::vector<Example>& examples) {
  std::map<std::string, std::size_t> counts;
  for (const Example& e : examples) {
    std::multiset<std::string> all;
    label_multiset(e.parse.root, all);
    std::set<std::string> distinct(all.begin(), all.end());
    for (const std::string& l : distinct) ++counts[l];
  }
  return counts;
}

// Random domain whose examples carry 1-3 leaf slots drawn from `labels`.
inline std::vector<Example> random_domain(Rng& rng, const std::string& domain,
                                          std::size_t size,
                                          std::size_t intent_count,
                                          std::size_t slot_count) {
  std::vector<Example> out;
  for (std::size_t i = 0; i < size; ++i) {
    Node root = intent("I" + std::to_string(uniform_index(rng, intent_count)));
    std::vector<std::string> words = {"w" + std::to_string(i)};
    const std::size_t slots = 1 + uniform_index(rng, 3);
    for (std::size_t s = 0; s < slots; ++s) {
      const std::string word = "v" + std::to_string(uniform_index(rng, 20));
      words.push_back(word);
      root.children.push_back(
          sub(slot("S" + std::to_string(uniform_index(rng, slot_count)),
                   {tok(word)})));
    }
    out.push_back(Example{domain, words, canonicalize(ParseTree{root})});
  }
  return out;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("copyptr_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace copyptr::testing

#endif  // COPYPTR_TESTS_TEST_UTIL_HPP_
