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

#include "copyptr/tree.hpp"

#include <algorithm>
#include <sstream>

#include "copyptr/error.hpp"

namespace copyptr {

namespace {

constexpr std::string_view kIntentPrefix = "[IN:";
constexpr std::string_view kSlotPrefix = "[SL:";
constexpr std::string_view kClose = "]";

bool has_bracket_or_space(std::string_view s) {
  for (char c : s) {
    if (c == '[' || c == ']' || c == ' ' || c == '\t' || c == '\n' ||
        c == '\r') {
      return true;
    }
  }
  return false;
}

void check_token(std::string_view token) {
  if (token.empty() || has_bracket_or_space(token)) {
    throw Error(ErrorCode::kInvalidLabel,
                "malformed utterance token '" + std::string(token) + "'");
  }
}

void serialize_into(const Node& node, std::string& out) {
  out += node.label.open_token();
  for (const Child& c : node.children) {
    out += ' ';
    if (c.is_node()) {
      serialize_into(*c.node, out);
    } else {
      out += c.token;
    }
  }
  out += " ]";
}

void validate_node(const Node& node) {
  if (node.label.name.empty() || has_bracket_or_space(node.label.name)) {
    throw Error(ErrorCode::kInvalidLabel,
                "bad label name '" + node.label.name + "'");
  }
  for (const Child& c : node.children) {
    if (c.is_node()) {
      if (c.node->label.kind == node.label.kind) {
        throw Error(ErrorCode::kAlternationViolation,
                    c.node->label.serialized() + " directly under " +
                        node.label.serialized());
      }
      validate_node(*c.node);
    } else {
      check_token(c.token);
    }
  }
}

int node_depth(const Node& node) {
  int best = 0;
  for (const Child& c : node.children) {
    if (c.is_node()) best = std::max(best, node_depth(*c.node));
  }
  return best + 1;
}

Node canonical_node(const Node& node) {
  Node out{node.label, {}};
  const bool leaf_slot = node.label.is_slot() && !node.has_node_children();
  if (leaf_slot) {
    out.children = node.children;
    return out;
  }
  std::vector<std::pair<std::string, Node>> keyed;
  for (const Child& c : node.children) {
    if (!c.is_node()) continue;
    Node child = canonical_node(*c.node);
    keyed.emplace_back(serialize(child), std::move(child));
  }
  std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
    const std::string la = a.second.label.serialized();
    const std::string lb = b.second.label.serialized();
    if (la != lb) return la < lb;
    return a.first < b.first;
  });
  out.children.reserve(keyed.size());
  for (auto& [key, child] : keyed) out.children.push_back(Child::of(std::move(child)));
  return out;
}

void collect_leaf_tokens(const Node& node,
                         std::vector<std::vector<std::string>>& out) {
  if (node.label.is_slot() && !node.has_node_children()) {
    std::vector<std::string> group;
    for (const Child& c : node.children) group.push_back(c.token);
    out.push_back(std::move(group));
    return;
  }
  for (const Child& c : node.children) {
    if (c.is_node()) collect_leaf_tokens(*c.node, out);
  }
}

void collect_labels(const Node& node, std::vector<Label>& out) {
  out.push_back(node.label);
  for (const Child& c : node.children) {
    if (c.is_node()) collect_labels(*c.node, out);
  }
}

void collect_tokens(const Node& node, std::vector<std::string>& out) {
  for (const Child& c : node.children) {
    if (c.is_node()) {
      collect_tokens(*c.node, out);
    } else {
      out.push_back(c.token);
    }
  }
}

}  // namespace

std::string Label::open_token() const {
  return std::string(is_intent() ? kIntentPrefix : kSlotPrefix) + name;
}

std::string Label::serialized() const {
  return (is_intent() ? "IN:" : "SL:") + name;
}

std::optional<Label> Label::from_open_token(std::string_view token) {
  LabelKind kind;
  if (token.starts_with(kIntentPrefix)) {
    kind = LabelKind::kIntent;
  } else if (token.starts_with(kSlotPrefix)) {
    kind = LabelKind::kSlot;
  } else {
    return std::nullopt;
  }
  std::string_view name = token.substr(kIntentPrefix.size());
  if (name.empty() || has_bracket_or_space(name)) {
    throw Error(ErrorCode::kInvalidLabel,
                "bad label token '" + std::string(token) + "'");
  }
  return Label{kind, std::string(name)};
}

bool Node::has_node_children() const {
  return std::any_of(children.begin(), children.end(),
                     [](const Child& c) { return c.is_node(); });
}

Child Child::of(Node n) {
  Child c;
  c.node = std::move(n);
  return c;
}

Child Child::of(std::string t) {
  Child c;
  c.token = std::move(t);
  return c;
}

Node intent(std::string name, std::vector<Child> children) {
  return Node{Label{LabelKind::kIntent, std::move(name)}, std::move(children)};
}

Node slot(std::string name, std::vector<Child> children) {
  return Node{Label{LabelKind::kSlot, std::move(name)}, std::move(children)};
}

Child tok(std::string token) { return Child::of(std::move(token)); }

ParseTree parse_tokens(std::span<const std::string> tokens) {
  if (tokens.empty()) throw Error(ErrorCode::kEmptyInput, "no tokens");

  std::vector<Node> stack;
  std::optional<Node> root;
  for (const std::string& token : tokens) {
    if (root && token == kClose) {
      throw Error(ErrorCode::kUnbalancedBrackets, "unmatched ']'");
    }
    if (root) {
      throw Error(ErrorCode::kTokenOutsideTree,
                  "'" + token + "' after the root node closed");
    }
    if (token == kClose) {
      if (stack.empty()) {
        throw Error(ErrorCode::kUnbalancedBrackets, "unmatched ']'");
      }
      Node done = std::move(stack.back());
      stack.pop_back();
      if (stack.empty()) {
        root = std::move(done);
      } else {
        stack.back().children.push_back(Child::of(std::move(done)));
      }
      continue;
    }
    if (std::optional<Label> label = Label::from_open_token(token)) {
      if (stack.empty()) {
        if (!label->is_intent()) {
          throw Error(ErrorCode::kAlternationViolation,
                      "root must be an intent, got " + label->serialized());
        }
      } else if (stack.back().label.kind == label->kind) {
        throw Error(ErrorCode::kAlternationViolation,
                    label->serialized() + " directly under " +
                        stack.back().label.serialized());
      }
      stack.push_back(Node{std::move(*label), {}});
      continue;
    }
    if (stack.empty()) {
      throw Error(ErrorCode::kTokenOutsideTree,
                  "'" + token + "' before any open node");
    }
    check_token(token);
    stack.back().children.push_back(Child::of(token));
  }
  if (!root) {
    throw Error(ErrorCode::kUnbalancedBrackets,
                std::to_string(stack.size()) + " unclosed node(s)");
  }
  return ParseTree{std::move(*root)};
}

ParseTree parse_serialized(std::string_view text) {
  std::vector<std::string> tokens;
  std::istringstream in{std::string(text)};
  for (std::string t; in >> t;) tokens.push_back(std::move(t));
  return parse_tokens(tokens);
}

std::string serialize(const Node& node) {
  std::string out;
  serialize_into(node, out);
  return out;
}

std::string serialize(const ParseTree& tree) { return serialize(tree.root); }

std::vector<std::string> serialize_tokens(const ParseTree& tree) {
  std::vector<std::string> out;
  std::istringstream in(serialize(tree));
  for (std::string t; in >> t;) out.push_back(std::move(t));
  return out;
}

void validate(const ParseTree& tree) {
  if (!tree.root.label.is_intent()) {
    throw Error(ErrorCode::kAlternationViolation, "root must be an intent");
  }
  validate_node(tree.root);
}

ParseTree canonicalize(const ParseTree& tree) {
  return ParseTree{canonical_node(tree.root)};
}

int depth(const ParseTree& tree) { return node_depth(tree.root); }

TreeStats tree_stats(std::span<const ParseTree> trees) {
  if (trees.empty()) throw Error(ErrorCode::kEmptyCorpus, "no trees");
  TreeStats stats;
  std::size_t flat = 0;
  double total_depth = 0.0;
  for (const ParseTree& t : trees) {
    const int d = depth(t);
    total_depth += d;
    if (d <= 2) ++flat;
  }
  stats.count = trees.size();
  stats.flat_fraction = static_cast<double>(flat) / trees.size();
  stats.mean_depth = total_depth / trees.size();
  return stats;
}

std::vector<std::vector<std::string>> leaf_slot_tokens(const ParseTree& tree) {
  std::vector<std::vector<std::string>> out;
  collect_leaf_tokens(tree.root, out);
  return out;
}

std::vector<Label> labels(const ParseTree& tree) {
  std::vector<Label> out;
  collect_labels(tree.root, out);
  return out;
}

std::vector<std::string> tokens(const ParseTree& tree) {
  std::vector<std::string> out;
  collect_tokens(tree.root, out);
  return out;
}

}  // namespace copyptr
