#pragma once

#include <algorithm>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "reflforge/domain.hpp"
#include "reflforge/errors.hpp"
#include "reflforge/gateway.hpp"
#include "reflforge/prompts.hpp"
#include "reflforge/scoring.hpp"

namespace reflforge {

// ---------------------------------------------------------------------------
// Search parameters
// ---------------------------------------------------------------------------

struct SearchParams {
  int k_max = 10;       // depth cap for leaves
  int branching = 3;    // max candidate expansions per node
  int max_leaves = 12;  // stop expanding once this many leaves exist
  // Candidate-promise ordering (the SelectBestStep slot). Candidates are
  // ordered before truncation to `branching`; no candidate is pruned on a
  // guessed score. Default keeps proposal order (what a scripted backend
  // dictates); "lexical" gives live backends a model-free stable order.
  std::function<void(std::vector<std::string>&)> order_candidates;

  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    if (k_max < 1) out.push_back("k_max must be >= 1");
    if (branching < 1) out.push_back("branching must be >= 1");
    if (max_leaves < 2) out.push_back("max_leaves must be >= 2");
    return out;
  }
};

inline std::function<void(std::vector<std::string>&)> lexical_candidate_order() {
  return [](std::vector<std::string>& c) { std::sort(c.begin(), c.end()); };
}

// ---------------------------------------------------------------------------
// Tree builder
// ---------------------------------------------------------------------------

// Builds one ReasoningTree per question by breadth-first branching step
// proposal. Each proposed child is terminal-checked immediately; terminal
// children get a final answer through the extraction role. Externally
// single-threaded per tree.
class TreeBuilder {
 public:
  TreeBuilder(Backend& backend, Question question, SearchParams params, GenOptions options)
      : backend_(backend),
        question_(std::move(question)),
        params_(std::move(params)),
        options_(options),
        rendered_question_(render_question(question_)) {}

  // First-step candidates for the question, deduplicated and truncated to
  // the branching width. Empty output after an empty backend response is
  // the Failure-to-Start outcome.
  std::vector<std::string> propose_initial() {
    ChatRequest req = make_request(RoleTag::propose_initial,
                                   {{"question", rendered_question_},
                                    {"max_candidates", std::to_string(params_.branching)}},
                                   node_script_key(root_node_id(question_.id)));
    req.temperature = options_.temperature;
    auto candidates = parse_candidates(backend_.complete(req).text);
    if (params_.order_candidates) params_.order_candidates(candidates);
    truncate(candidates);
    if (candidates.empty())
      throw StartFailure("no usable first step for question " + question_.id);
    return candidates;
  }

  // Appends up to `branching` children to a non-terminal node below the
  // depth cap. Children landing on the cap are forcibly terminal. Returns
  // the new child ids; empty means the node dead-ends.
  std::vector<std::string> expand(ReasoningTree& tree, const std::string& node_id,
                                  bool correction_phase = false) {
    const StepNode* node = tree.find(node_id);
    if (node == nullptr) throw std::invalid_argument("expand: unknown node " + node_id);
    if (node->terminal) throw std::invalid_argument("expand: node is terminal: " + node_id);
    if (node->depth >= params_.k_max)
      throw std::invalid_argument("expand: node at depth cap: " + node_id);

    const auto prior = path_texts(tree, tree.path_to(node_id));
    ChatRequest req = make_request(RoleTag::propose_next,
                                   {{"question", rendered_question_},
                                    {"prior_steps", render_steps(prior)},
                                    {"max_candidates", std::to_string(params_.branching)}},
                                   node_script_key(node_id) + (correction_phase ? "#corr" : ""));
    req.temperature = options_.temperature;
    auto candidates = parse_candidates(backend_.complete(req).text);
    if (params_.order_candidates) params_.order_candidates(candidates);
    // Drop candidates that duplicate an existing child of this node.
    std::erase_if(candidates, [&](const std::string& text) {
      for (const auto& child_id : tree.find(node_id)->children)
        if (tree.find(child_id)->text == text) return true;
      return false;
    });
    truncate(candidates);
    return add_children(tree, node_id, candidates);
  }

  // Breadth-first expansion until every frontier node is terminal or
  // dead-ended or the leaf budget is met, then labeling and value
  // propagation. The result passes validate_tree.
  ReasoningTree build_tree() {
    ReasoningTree tree;
    tree.question_id = question_.id;
    tree.root = root_node_id(question_.id);
    tree.k_max = params_.k_max;
    tree.branching = params_.branching;
    StepNode root;
    root.node_id = tree.root;
    root.depth = 0;
    tree.nodes.emplace(tree.root, std::move(root));

    std::deque<std::string> frontier;
    for (const auto& id : add_children(tree, tree.root, propose_initial()))
      if (!tree.find(id)->terminal) frontier.push_back(id);

    while (!frontier.empty() && leaf_budget_left(tree)) {
      const std::string node_id = frontier.front();
      frontier.pop_front();
      for (const auto& id : expand(tree, node_id))
        if (!tree.find(id)->terminal) frontier.push_back(id);
    }

    prune_dead_ends(tree);
    if (tree.find(tree.root)->children.empty())
      throw AllPathsDeadEnd("no root-to-leaf path reached an answer for " + question_.id);

    label_leaves(tree, question_.gold);
    propagate_values(tree);
    return tree;
  }

  // Shared with the correction-exploration path of the reflection
  // builder: creates children under `parent_id` from candidate texts,
  // terminal-checking and answer-extracting each one. Respects the leaf
  // budget unless the caller opts out (corrections must be able to finish
  // their descent on an already-full tree).
  std::vector<std::string> add_children(ReasoningTree& tree, const std::string& parent_id,
                                        const std::vector<std::string>& candidates,
                                        bool enforce_leaf_budget = true) {
    std::vector<std::string> created;
    for (const auto& text : candidates) {
      if (enforce_leaf_budget && !leaf_budget_left(tree)) break;
      StepNode* parent = tree.find(parent_id);
      StepNode child;
      child.node_id = child_node_id(parent_id, parent->children.size());
      child.parent = parent_id;
      child.text = text;
      child.depth = parent->depth + 1;
      const bool forced_terminal = child.depth >= params_.k_max;
      parent->children.push_back(child.node_id);
      auto [it, inserted] = tree.nodes.emplace(child.node_id, std::move(child));
      StepNode& stored = it->second;

      std::vector<std::string> full_path = path_texts(tree, tree.path_to(stored.node_id));
      if (forced_terminal || check_terminal(stored.node_id, full_path)) {
        stored.terminal = true;
        stored.final_answer = extract_answer(stored.node_id, render_steps(full_path));
      }
      created.push_back(stored.node_id);
    }
    return created;
  }

  const SearchParams& params() const { return params_; }
  const Question& question() const { return question_; }

 private:
  bool leaf_budget_left(const ReasoningTree& tree) const {
    int leaves = 0;
    for (const auto& [id, node] : tree.nodes)
      if (node.terminal) ++leaves;
    return leaves < params_.max_leaves;
  }

  bool check_terminal(const std::string& node_id, const std::vector<std::string>& path) {
    ChatRequest req = make_request(
        RoleTag::terminal_check,
        {{"question", rendered_question_}, {"steps", render_steps(path)}},
        node_script_key(node_id));
    return parse_terminal(backend_.complete(req).text);
  }

  // Answer letter for a finished chain; the unextractable sentinel keeps
  // the leaf usable but never correct.
  char extract_answer(const std::string& node_id, const std::string& chain_text) {
    ChatRequest req = make_request(RoleTag::extract_answer, {{"text", chain_text}},
                                   node_script_key(node_id));
    const auto letter = parse_answer_letter(backend_.complete(req).text);
    return letter.value_or(kUnextractableAnswer);
  }

  ChatRequest make_request(RoleTag role, const std::map<std::string, std::string>& context,
                           std::string script_key) {
    ChatRequest req;
    req.role_tag = role;
    req.rendered_prompt = render_prompt(role, context);
    req.temperature = options_.judge_temperature;
    req.max_tokens = options_.max_tokens;
    req.seed = options_.seed;
    req.question_id = question_.id;
    req.script_key = std::move(script_key);
    return req;
  }

  void truncate(std::vector<std::string>& candidates) const {
    if (candidates.size() > static_cast<std::size_t>(params_.branching))
      candidates.resize(static_cast<std::size_t>(params_.branching));
  }

  // Repeatedly removes childless non-terminal nodes (dead ends and
  // frontier nodes abandoned by the leaf budget). The root stays.
  static void prune_dead_ends(ReasoningTree& tree) {
    bool changed = true;
    while (changed) {
      changed = false;
      std::vector<std::string> doomed;
      for (const auto& [id, node] : tree.nodes)
        if (id != tree.root && !node.terminal && node.children.empty()) doomed.push_back(id);
      for (const auto& id : doomed) {
        const StepNode& node = tree.nodes.at(id);
        if (node.parent) {
          auto& siblings = tree.find(*node.parent)->children;
          std::erase(siblings, id);
        }
        tree.nodes.erase(id);
        changed = true;
      }
    }
  }

  Backend& backend_;
  Question question_;
  SearchParams params_;
  GenOptions options_;
  std::string rendered_question_;
};

// ---------------------------------------------------------------------------
// Trajectory enumeration
// ---------------------------------------------------------------------------

// One trajectory per leaf, in lexicographic leaf-id order, with v_sol
// computed as the exact mean of step values along the path (root
// inclusive). The tree must be labeled and value-propagated.
inline std::vector<Trajectory> enumerate_trajectories(const ReasoningTree& tree) {
  std::vector<Trajectory> out;
  for (const auto& leaf_id : tree.leaf_ids()) {
    const StepNode& leaf = *tree.find(leaf_id);
    Trajectory t;
    t.question_id = tree.question_id;
    t.steps = tree.path_to(leaf_id);
    t.final_answer = leaf.final_answer.value_or(kUnextractableAnswer);
    t.correct = leaf.counts.n_correct == 1;
    t.v_sol = solution_quality(path_values(tree, t.steps));
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace reflforge
