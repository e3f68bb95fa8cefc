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

// Intent/slot parse trees in the bracketed TOP serialization:
//
//   [IN:GET_DIRECTIONS [SL:DESTINATION [IN:GET_EVENT [SL:CAT_EVENT game ] ] ] ]
//
// Every "[IN:X" or "[SL:Y" opens a node, a standalone "]" closes the
// innermost open node, and anything else is an utterance token. Intents and
// slots strictly alternate along every root-to-leaf path.

#ifndef COPYPTR_TREE_HPP_
#define COPYPTR_TREE_HPP_

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace copyptr {

enum class LabelKind { kIntent, kSlot };

struct Label {
  LabelKind kind = LabelKind::kIntent;
  std::string name;

  // "[IN:" + name or "[SL:" + name, i.e. the opening token.
  std::string open_token() const;
  // "IN:" + name or "SL:" + name.
  std::string serialized() const;

  bool is_intent() const { return kind == LabelKind::kIntent; }
  bool is_slot() const { return kind == LabelKind::kSlot; }

  // Parses an opening token ("[IN:X"); nullopt if `token` is not one.
  // Throws InvalidLabel for "[IN:" / "[SL:" prefixes with a bad name.
  static std::optional<Label> from_open_token(std::string_view token);

  friend bool operator==(const Label&, const Label&) = default;
};

struct Child;

struct Node {
  Label label;
  std::vector<Child> children;

  bool has_node_children() const;
  friend bool operator==(const Node&, const Node&) = default;
};

// A child is either a nested node or an utterance token.
struct Child {
  std::optional<Node> node;
  std::string token;

  static Child of(Node n);
  static Child of(std::string t);

  bool is_node() const { return node.has_value(); }
  friend bool operator==(const Child&, const Child&) = default;
};

struct ParseTree {
  Node root;
  friend bool operator==(const ParseTree&, const ParseTree&) = default;
};

// Construction helpers, mainly for tests and generators.
Node intent(std::string name, std::vector<Child> children = {});
Node slot(std::string name, std::vector<Child> children = {});
Child tok(std::string token);
inline Child sub(Node node) { return Child::of(std::move(node)); }

// Throws Error with kEmptyInput, kUnbalancedBrackets, kAlternationViolation,
// kTokenOutsideTree or kInvalidLabel.
ParseTree parse_serialized(std::string_view text);
// Same, from an already whitespace-split token stream.
ParseTree parse_tokens(std::span<const std::string> tokens);

std::string serialize(const ParseTree& tree);
std::string serialize(const Node& node);
std::vector<std::string> serialize_tokens(const ParseTree& tree);

// Validates the structural invariants of a programmatically built tree.
void validate(const ParseTree& tree);

// Keeps tokens only under leaf slots and sorts node children by
// (serialized label, serialized subtree). Idempotent.
ParseTree canonicalize(const ParseTree& tree);

// Number of label nodes on the deepest root-to-leaf path (>= 1).
int depth(const ParseTree& tree);
inline bool is_flat(const ParseTree& tree) { return depth(tree) <= 2; }

struct TreeStats {
  double flat_fraction = 0.0;  // in [0, 1]
  double mean_depth = 0.0;
  std::size_t count = 0;

  double flat_percentage() const { return 100.0 * flat_fraction; }
};

// Throws kEmptyCorpus on an empty list.
TreeStats tree_stats(std::span<const ParseTree> trees);

// Utterance tokens under leaf slots, in serialization order, grouped per
// leaf slot.
std::vector<std::vector<std::string>> leaf_slot_tokens(const ParseTree& tree);

// All labels in pre-order.
std::vector<Label> labels(const ParseTree& tree);

// All tokens in serialization order.
std::vector<std::string> tokens(const ParseTree& tree);

}  // namespace copyptr

#endif  // COPYPTR_TREE_HPP_
