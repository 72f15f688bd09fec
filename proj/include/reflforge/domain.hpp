#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "reflforge/rational.hpp"

namespace reflforge {

// ---------------------------------------------------------------------------
// Option letters
// ---------------------------------------------------------------------------

// MCQ corpora here use at most ten options; MedQA itself uses A-E.
inline constexpr char kMinOption = 'A';
inline constexpr char kMaxOption = 'J';

inline bool is_option_letter(char c) { return c >= kMinOption && c <= kMaxOption; }

// Sentinel stored as a leaf's final answer when no option letter could be
// extracted from the model output. Never equal to any gold letter, so such
// leaves always count as incorrect.
inline constexpr char kUnextractableAnswer = '?';

// ---------------------------------------------------------------------------
// Question
// ---------------------------------------------------------------------------

enum class Split { train, test, other };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::test: return "test";
    case Split::other: return "other";
  }
  return "other";
}

inline std::optional<Split> split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  if (s == "other") return Split::other;
  return std::nullopt;
}

struct Question {
  std::string id;
  std::string stem;
  std::map<char, std::string> options;  // letter -> option text, contiguous from 'A'
  char gold = 0;
  Split split = Split::train;

  // Empty result means the invariants hold: 2..10 options, letters
  // contiguous from 'A', gold is one of them.
  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    if (id.empty()) out.push_back("question id empty");
    if (stem.empty()) out.push_back("stem empty");
    if (options.size() < 2 || options.size() > 10)
      out.push_back("option count " + std::to_string(options.size()) + " outside 2..10");
    char expect = kMinOption;
    for (const auto& [letter, text] : options) {
      if (letter != expect) {
        out.push_back(std::string("option letters not contiguous from A (saw '") + letter + "')");
        break;
      }
      ++expect;
    }
    if (options.find(gold) == options.end())
      out.push_back(std::string("gold '") + gold + "' is not an option letter");
    return out;
  }

  bool valid() const { return problems().empty(); }
};

// ---------------------------------------------------------------------------
// Reasoning tree
// ---------------------------------------------------------------------------

struct LeafCounts {
  std::int64_t n_total = 0;
  std::int64_t n_correct = 0;
  std::int64_t n_incorrect = 0;
};

// One node of the reasoning tree. The root is synthetic (depth 0, empty
// text, stands for the unanswered question); real reasoning steps start at
// depth 1. Counts and v_step are filled by scoring::propagate_values.
struct StepNode {
  std::string node_id;
  std::optional<std::string> parent;  // none for the root
  std::string text;
  int depth = 0;
  std::vector<std::string> children;  // ordered
  bool terminal = false;
  std::optional<char> final_answer;  // present iff terminal
  LeafCounts counts;
  Rational v_step;

  bool is_leaf() const { return children.empty(); }
};

struct ReasoningTree {
  std::string question_id;
  std::string root;
  std::map<std::string, StepNode> nodes;
  int k_max = 0;      // depth cap for leaves
  int branching = 0;  // max candidate expansions per node

  const StepNode* find(const std::string& id) const {
    auto it = nodes.find(id);
    return it == nodes.end() ? nullptr : &it->second;
  }
  StepNode* find(const std::string& id) {
    auto it = nodes.find(id);
    return it == nodes.end() ? nullptr : &it->second;
  }

  // Leaf node ids in deterministic (lexicographic) order.
  std::vector<std::string> leaf_ids() const {
    std::vector<std::string> out;
    for (const auto& [id, node] : nodes)
      if (node.is_leaf()) out.push_back(id);
    return out;
  }

  // Root-to-node path of node ids (inclusive).
  std::vector<std::string> path_to(const std::string& id) const {
    std::vector<std::string> rev;
    const StepNode* n = find(id);
    while (n != nullptr) {
      rev.push_back(n->node_id);
      if (!n->parent) break;
      n = find(*n->parent);
    }
    return {rev.rbegin(), rev.rend()};
  }
};

// Node ids are "<question_id>/<sibling chain>": the root is "<qid>/0" and
// each child appends ".<sibling index>". Depth is readable off the id and
// lexicographic order of ids is the tie-break order used everywhere.
inline std::string root_node_id(const std::string& question_id) { return question_id + "/0"; }

inline std::string child_node_id(const std::string& parent_id, std::size_t sibling_index) {
  return parent_id + "." + std::to_string(sibling_index);
}

// Node id without the question prefix ("q1/0.2" -> "0.2"); the context key
// scripted backends are indexed by.
inline std::string node_script_key(const std::string& node_id) {
  const auto slash = node_id.find('/');
  return slash == std::string::npos ? node_id : node_id.substr(slash + 1);
}

// ---------------------------------------------------------------------------
// Trajectory
// ---------------------------------------------------------------------------

struct JudgeScores {
  double r_logic = 0.0;      // r_L in [0, 5]
  double r_knowledge = 0.0;  // r_K in [0, 5]
};

// A root-to-leaf path. steps includes the synthetic root, so length() is
// the path length the quality mean runs over.
struct Trajectory {
  std::string question_id;
  std::vector<std::string> steps;  // node ids, root first
  char final_answer = kUnextractableAnswer;
  bool correct = false;
  Rational v_sol;
  std::optional<JudgeScores> judge;
  std::optional<double> v_cot;

  std::size_t length() const { return steps.size(); }
  const std::string& leaf_id() const { return steps.back(); }
  bool scored() const { return judge.has_value() && v_cot.has_value(); }
};

// ---------------------------------------------------------------------------
// Weights
// ---------------------------------------------------------------------------

struct Weights {
  // lambda scales the three deltas of the action value.
  double lambda_step = 1.0 / 3.0;
  double lambda_sol = 1.0 / 3.0;
  double lambda_rem = 1.0 / 3.0;
  // w blends v_sol with the two judge scores into the CoT value.
  double w_sol = 1.0;
  double w_logic = 0.1;
  double w_knowledge = 0.1;

  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    auto bad = [](double v) { return !(v >= 0.0) || v > 1e300; };
    if (bad(lambda_step) || bad(lambda_sol) || bad(lambda_rem))
      out.push_back("lambda components must be finite and >= 0");
    if (bad(w_sol) || bad(w_logic) || bad(w_knowledge))
      out.push_back("w components must be finite and >= 0");
    if (lambda_step + lambda_sol + lambda_rem <= 0.0)
      out.push_back("at least one lambda component must be > 0");
    if (w_sol + w_logic + w_knowledge <= 0.0)
      out.push_back("at least one w component must be > 0");
    return out;
  }
};

// ---------------------------------------------------------------------------
// Reflection candidates
// ---------------------------------------------------------------------------

enum class ReflectionShape { mid_reasoning, post_reasoning };

inline const char* to_string(ReflectionShape s) {
  return s == ReflectionShape::mid_reasoning ? "mid_reasoning" : "post_reasoning";
}

struct QualityDeltas {
  double dv_step = 0.0;
  double dv_sol = 0.0;
  double dv_rem = 0.0;
};

// One candidate reflection trajectory: shared prefix, the erroneous
// segment (single step for mid-reasoning, full tail for post-reasoning),
// the reflection text bridging it, and the continuation.
struct ReflectionCandidate {
  std::string question_id;
  ReflectionShape shape = ReflectionShape::mid_reasoning;
  std::vector<std::string> s_pub;      // node ids, common prefix incl. root
  std::vector<std::string> erroneous;  // node ids
  std::string reflection_text;
  std::vector<std::string> s_new;  // node ids of the continuation
  double v_act = 0.0;
  QualityDeltas deltas;
};

// ---------------------------------------------------------------------------
// Preference pairs
// ---------------------------------------------------------------------------

enum class PairKind { reasoning, reflection_mid, reflection_post };

inline const char* to_string(PairKind k) {
  switch (k) {
    case PairKind::reasoning: return "reasoning";
    case PairKind::reflection_mid: return "reflection_mid";
    case PairKind::reflection_post: return "reflection_post";
  }
  return "reasoning";
}

inline std::optional<PairKind> pair_kind_from_string(const std::string& s) {
  if (s == "reasoning") return PairKind::reasoning;
  if (s == "reflection_mid") return PairKind::reflection_mid;
  if (s == "reflection_post") return PairKind::reflection_post;
  return std::nullopt;
}

// Retained so the emitted file can be re-checked against the exact
// concatenation order the reflection trajectory was assembled in.
struct AssemblyMeta {
  ReflectionShape shape = ReflectionShape::mid_reasoning;
  std::vector<std::string> s_pub_ids;
  std::vector<std::string> erroneous_ids;
  std::vector<std::string> s_new_ids;
  std::string reflection_text;
  std::vector<std::string> sequence_texts;  // assembled order, pre-rewrite
};

struct PairMeta {
  double chosen_score = 0.0;    // V_CoT for reasoning pairs, v_act for reflection pairs
  double rejected_score = 0.0;
  std::vector<std::string> seed_trajectory_ids;  // chosen leaf, rejected leaf
  std::optional<AssemblyMeta> chosen_assembly;
  std::optional<AssemblyMeta> rejected_assembly;
};

struct PreferencePair {
  std::string pair_id;
  std::string question_id;
  PairKind kind = PairKind::reasoning;
  std::string prompt;
  std::string chosen;
  std::string rejected;
  PairMeta meta;

  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    if (prompt.empty()) out.push_back("prompt empty");
    if (chosen.empty()) out.push_back("chosen empty");
    if (rejected.empty()) out.push_back("rejected empty");
    if (!chosen.empty() && chosen == rejected) out.push_back("chosen equals rejected");
    return out;
  }
};

// ---------------------------------------------------------------------------
// Tree validation
// ---------------------------------------------------------------------------

// Total check of every structural and count invariant. Empty result means
// the tree is valid; each violation names the offending node and rule.
inline std::vector<std::string> validate_tree(const ReasoningTree& tree) {
  std::vector<std::string> v;
  auto flag = [&v](const std::string& id, const std::string& rule) {
    v.push_back("node " + id + ": " + rule);
  };

  const auto root_it = tree.nodes.find(tree.root);
  if (root_it == tree.nodes.end()) {
    v.push_back("tree: root '" + tree.root + "' not present");
    return v;
  }
  if (root_it->second.parent) flag(tree.root, "root must have no parent");

  for (const auto& [id, node] : tree.nodes) {
    if (id != node.node_id) flag(id, "map key differs from node_id");
    if (id != tree.root && !node.parent) flag(id, "non-root node without parent");

    // terminal <=> no children <=> final answer present
    if (node.terminal != node.children.empty())
      flag(id, "terminal flag inconsistent with children");
    if (node.terminal != node.final_answer.has_value())
      flag(id, "final_answer present iff terminal");

    if (node.parent) {
      const StepNode* p = tree.find(*node.parent);
      if (p == nullptr) {
        flag(id, "parent '" + *node.parent + "' not present");
      } else {
        bool listed = false;
        for (const auto& c : p->children) listed = listed || c == id;
        if (!listed) flag(id, "not listed among parent's children");
        if (node.depth != p->depth + 1) flag(id, "depth must be parent depth + 1");
      }
    } else if (node.depth != 0) {
      flag(id, "root depth must be 0");
    }

    for (const auto& c : node.children) {
      const StepNode* ch = tree.find(c);
      if (ch == nullptr)
        flag(id, "child '" + c + "' not present");
      else if (!ch->parent || *ch->parent != id)
        flag(c, "parent link does not match '" + id + "'");
    }

    if (node.is_leaf()) {
      if (node.depth > tree.k_max) flag(id, "leaf depth exceeds k_max");
      if (node.counts.n_total != 1) flag(id, "leaf n_total must be 1");
    } else {
      LeafCounts sum;
      for (const auto& c : node.children) {
        if (const StepNode* ch = tree.find(c)) {
          sum.n_total += ch->counts.n_total;
          sum.n_correct += ch->counts.n_correct;
          sum.n_incorrect += ch->counts.n_incorrect;
        }
      }
      if (sum.n_total != node.counts.n_total || sum.n_correct != node.counts.n_correct ||
          sum.n_incorrect != node.counts.n_incorrect)
        flag(id, "counts must equal sum over children");
    }

    if (node.counts.n_total != node.counts.n_correct + node.counts.n_incorrect)
      flag(id, "n_total must equal n_correct + n_incorrect");
    if (node.counts.n_correct < 0 || node.counts.n_incorrect < 0) flag(id, "negative count");

    if (node.counts.n_total > 0) {
      const Rational expect(node.counts.n_correct - node.counts.n_incorrect,
                            node.counts.n_total);
      if (node.v_step != expect)
        flag(id, "v_step must equal (n_correct - n_incorrect) / n_total");
      if (node.v_step < Rational(-1) || node.v_step > Rational(1))
        flag(id, "v_step outside [-1, 1]");
    }
  }

  // Reachability and acyclicity: walk from the root following child links.
  std::map<std::string, bool> seen;
  std::vector<const StepNode*> stack = {&root_it->second};
  bool cycle = false;
  while (!stack.empty()) {
    const StepNode* n = stack.back();
    stack.pop_back();
    if (seen[n->node_id]) {
      cycle = true;
      continue;
    }
    seen[n->node_id] = true;
    for (const auto& c : n->children)
      if (const StepNode* ch = tree.find(c)) stack.push_back(ch);
  }
  if (cycle) v.push_back("tree: cycle detected among child links");
  for (const auto& [id, node] : tree.nodes)
    if (!seen[id]) flag(id, "unreachable from root");

  return v;
}

}  // namespace reflforge
