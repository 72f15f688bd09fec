#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "reflforge/domain.hpp"
#include "reflforge/errors.hpp"
#include "reflforge/gateway.hpp"
#include "reflforge/prompts.hpp"
#include "reflforge/rational.hpp"

namespace reflforge {

// ---------------------------------------------------------------------------
// Step value propagation
// ---------------------------------------------------------------------------

// Sets each leaf's counts from its final answer: {1,1,0} when it matches
// gold, {1,0,1} otherwise (including the unextractable sentinel).
inline void label_leaves(ReasoningTree& tree, char gold) {
  for (auto& [id, node] : tree.nodes) {
    if (!node.is_leaf()) continue;
    const bool correct = node.final_answer && *node.final_answer == gold;
    node.counts = LeafCounts{1, correct ? 1 : 0, correct ? 0 : 1};
  }
}

// Single bottom-up pass filling counts and v_step on every node. A node's
// value is (N_correct - N_incorrect) / N over the root-to-leaf paths in
// its subtree, which equals the leaf tally because each leaf closes
// exactly one path. Leaves must already be labeled.
inline void propagate_values(ReasoningTree& tree) {
  std::vector<StepNode*> by_depth;
  by_depth.reserve(tree.nodes.size());
  for (auto& [id, node] : tree.nodes) by_depth.push_back(&node);
  std::sort(by_depth.begin(), by_depth.end(), [](const StepNode* a, const StepNode* b) {
    return a->depth > b->depth || (a->depth == b->depth && a->node_id < b->node_id);
  });

  for (StepNode* node : by_depth) {
    if (node->is_leaf()) {
      const LeafCounts& c = node->counts;
      if (c.n_total != 1 || c.n_correct + c.n_incorrect != 1)
        throw UnlabeledLeaf("leaf " + node->node_id + " has no correctness label");
    } else {
      LeafCounts sum;
      for (const auto& child_id : node->children) {
        const StepNode* child = tree.find(child_id);
        if (child == nullptr) throw std::logic_error("dangling child " + child_id);
        sum.n_total += child->counts.n_total;
        sum.n_correct += child->counts.n_correct;
        sum.n_incorrect += child->counts.n_incorrect;
      }
      node->counts = sum;
    }
    node->v_step = Rational(node->counts.n_correct - node->counts.n_incorrect,
                            node->counts.n_total);
  }
}

// ---------------------------------------------------------------------------
// Path quality (exact)
// ---------------------------------------------------------------------------

// Mean step value along a whole path.
inline Rational solution_quality(std::span<const Rational> path_values) {
  if (path_values.empty()) throw EmptyPath("solution_quality on empty path");
  Rational sum;
  for (const Rational& v : path_values) sum += v;
  return sum / Rational(static_cast<std::int64_t>(path_values.size()));
}

// Mean step value over the suffix starting at 1-based index j.
inline Rational remaining_quality(std::span<const Rational> path_values, std::size_t j) {
  if (path_values.empty()) throw EmptyPath("remaining_quality on empty path");
  if (j < 1 || j > path_values.size())
    throw IndexOutOfRange("remaining_quality: j=" + std::to_string(j) + " outside 1.." +
                          std::to_string(path_values.size()));
  return solution_quality(path_values.subspan(j - 1));
}

// v_step values along a trajectory's steps, root first.
inline std::vector<Rational> path_values(const ReasoningTree& tree,
                                         const std::vector<std::string>& step_ids) {
  std::vector<Rational> out;
  out.reserve(step_ids.size());
  for (const auto& id : step_ids) {
    const StepNode* node = tree.find(id);
    if (node == nullptr) throw std::logic_error("path references missing node " + id);
    out.push_back(node->v_step);
  }
  return out;
}

// Step texts along a path, root first (the root's text is empty and is
// skipped by render_steps).
inline std::vector<std::string> path_texts(const ReasoningTree& tree,
                                           const std::vector<std::string>& step_ids) {
  std::vector<std::string> out;
  out.reserve(step_ids.size());
  for (const auto& id : step_ids) {
    const StepNode* node = tree.find(id);
    if (node == nullptr) throw std::logic_error("path references missing node " + id);
    out.push_back(node->text);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Action value and CoT value
// ---------------------------------------------------------------------------

// Weighted sum of the three quality deltas across a reflection transition.
inline double action_value(const QualityDeltas& deltas, const Weights& weights) {
  return weights.lambda_step * deltas.dv_step + weights.lambda_sol * deltas.dv_sol +
         weights.lambda_rem * deltas.dv_rem;
}

// Composite trajectory score blending solution quality with judge scores.
inline double cot_value(double v_sol, double r_logic, double r_knowledge,
                        const Weights& weights) {
  return weights.w_sol * v_sol + weights.w_logic * r_logic + weights.w_knowledge * r_knowledge;
}

// ---------------------------------------------------------------------------
// LLM judging
// ---------------------------------------------------------------------------

struct GenOptions {
  double temperature = 0.7;        // proposal-style calls
  double judge_temperature = 0.0;  // judge / extraction / rewrite calls
  int max_tokens = 768;
  std::optional<int> seed;
};

// Two judge calls (logic, knowledge). The rendered path shows numbered
// steps and the question but never the gold letter. Returns nullopt when
// either score is unparseable; the caller leaves the trajectory unscored.
inline std::optional<JudgeScores> judge_trajectory(Backend& backend, const Question& question,
                                                   const ReasoningTree& tree,
                                                   const Trajectory& trajectory,
                                                   const GenOptions& options) {
  const std::string rendered_path = render_steps(path_texts(tree, trajectory.steps));
  const std::map<std::string, std::string> context = {
      {"question", render_question(question)}, {"path", rendered_path}};
  auto ask = [&](RoleTag role) -> std::optional<double> {
    ChatRequest req;
    req.role_tag = role;
    req.rendered_prompt = render_prompt(role, context);
    req.temperature = options.judge_temperature;
    req.max_tokens = options.max_tokens;
    req.seed = options.seed;
    req.question_id = question.id;
    req.script_key = node_script_key(trajectory.leaf_id());
    return parse_score(backend.complete(req).text);
  };
  const auto logic = ask(RoleTag::judge_logic);
  if (!logic) return std::nullopt;
  const auto knowledge = ask(RoleTag::judge_knowledge);
  if (!knowledge) return std::nullopt;
  return JudgeScores{*logic, *knowledge};
}

// Judges every trajectory and fills v_cot. Unscored trajectories keep
// judge == nullopt and are excluded from ranking.
inline void score_trajectories(Backend& backend, const Question& question,
                               const ReasoningTree& tree, std::vector<Trajectory>& trajectories,
                               const Weights& weights, const GenOptions& options) {
  for (Trajectory& t : trajectories) {
    t.judge = judge_trajectory(backend, question, tree, t, options);
    if (t.judge)
      t.v_cot = cot_value(t.v_sol.to_double(), t.judge->r_logic, t.judge->r_knowledge, weights);
    else
      t.v_cot.reset();
  }
}

// Ranking order for scored trajectories: higher v_cot first, ties broken
// by exact v_sol, then by lexicographic leaf id. Scale-invariant in w.
inline bool ranks_before(const Trajectory& a, const Trajectory& b) {
  const double va = a.v_cot.value_or(0.0);
  const double vb = b.v_cot.value_or(0.0);
  if (va != vb) return va > vb;
  if (a.v_sol != b.v_sol) return b.v_sol < a.v_sol;
  return a.leaf_id() < b.leaf_id();
}

}  // namespace reflforge
