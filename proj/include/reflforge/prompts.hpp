#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "reflforge/domain.hpp"
#include "reflforge/errors.hpp"
#include "reflforge/util.hpp"

namespace reflforge {

// ---------------------------------------------------------------------------
// Roles
// ---------------------------------------------------------------------------

// Every LLM role the pipeline talks to. answer_question is the
// evaluation-time role (the question prompt the model under test sees);
// the rest drive search, judging, rewriting and reflection generation.
enum class RoleTag {
  propose_initial,
  propose_next,
  terminal_check,
  judge_logic,
  judge_knowledge,
  rewrite_first_person,
  rewrite_with_reflection,
  generate_reflection,
  locate_error,
  extract_answer,
  answer_question,
};

inline constexpr std::array<RoleTag, 11> kAllRoles = {
    RoleTag::propose_initial,       RoleTag::propose_next,
    RoleTag::terminal_check,        RoleTag::judge_logic,
    RoleTag::judge_knowledge,       RoleTag::rewrite_first_person,
    RoleTag::rewrite_with_reflection, RoleTag::generate_reflection,
    RoleTag::locate_error,          RoleTag::extract_answer,
    RoleTag::answer_question,
};

inline const char* to_string(RoleTag r) {
  switch (r) {
    case RoleTag::propose_initial: return "propose_initial";
    case RoleTag::propose_next: return "propose_next";
    case RoleTag::terminal_check: return "terminal_check";
    case RoleTag::judge_logic: return "judge_logic";
    case RoleTag::judge_knowledge: return "judge_knowledge";
    case RoleTag::rewrite_first_person: return "rewrite_first_person";
    case RoleTag::rewrite_with_reflection: return "rewrite_with_reflection";
    case RoleTag::generate_reflection: return "generate_reflection";
    case RoleTag::locate_error: return "locate_error";
    case RoleTag::extract_answer: return "extract_answer";
    case RoleTag::answer_question: return "answer_question";
  }
  return "unknown";
}

inline std::optional<RoleTag> role_from_string(std::string_view s) {
  for (RoleTag r : kAllRoles)
    if (s == to_string(r)) return r;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Templates
// ---------------------------------------------------------------------------

struct PromptTemplate {
  std::vector<std::string> required_slots;  // checked in this order
  std::string text;                         // "{slot}" placeholders
};

// Templates ask for machine-parseable trailer lines (STEP:, TERMINAL:,
// SCORE:, ANSWER:) so the corresponding parsers stay trivial and robust.
inline const std::map<RoleTag, PromptTemplate>& prompt_registry() {
  static const std::map<RoleTag, PromptTemplate> registry = {
      {RoleTag::propose_initial,
       {{"question", "max_candidates"},
        "You are a careful clinician working through a multiple-choice question.\n\n"
        "{question}\n\n"
        "Propose up to {max_candidates} distinct first reasoning steps that could begin a "
        "step-by-step solution. Each candidate must be a single self-contained step, not a "
        "full solution, and must not state a final answer yet. Write one candidate per "
        "line, each prefixed with \"STEP: \"."}},
      {RoleTag::propose_next,
       {{"question", "prior_steps", "max_candidates"},
        "You are a careful clinician working through a multiple-choice question.\n\n"
        "{question}\n\n"
        "Reasoning so far:\n{prior_steps}\n\n"
        "Propose up to {max_candidates} distinct next reasoning steps that continue from "
        "the steps above. A step may conclude with a final option choice when the "
        "reasoning is complete. Write one candidate per line, each prefixed with "
        "\"STEP: \"."}},
      {RoleTag::terminal_check,
       {{"question", "steps"},
        "{question}\n\n"
        "Reasoning steps so far:\n{steps}\n\n"
        "Does this chain of reasoning already commit to a final answer to the question? "
        "Reply with exactly one line: \"TERMINAL: yes\" if the last step states or "
        "directly implies a final option choice, otherwise \"TERMINAL: no\"."}},
      {RoleTag::judge_logic,
       {{"question", "path"},
        "You are grading the logical coherence of a candidate reasoning path for a "
        "medical multiple-choice question.\n\n"
        "{question}\n\n"
        "Candidate reasoning path:\n{path}\n\n"
        "Rate ONLY the logical coherence of the path: do the steps follow from one "
        "another without gaps or contradictions? Ignore whether the medical content is "
        "correct. Score from 0 (incoherent) to 5 (fully coherent).\n"
        "Reply with exactly one line in the form \"SCORE: <n>\"."}},
      {RoleTag::judge_knowledge,
       {{"question", "path"},
        "You are grading the medical knowledge correctness of a candidate reasoning path "
        "for a medical multiple-choice question.\n\n"
        "{question}\n\n"
        "Candidate reasoning path:\n{path}\n\n"
        "Rate ONLY the medical knowledge: are the facts, mechanisms and clinical claims "
        "in the steps correct? Ignore stylistic issues. Score from 0 (dangerously wrong) "
        "to 5 (fully correct).\n"
        "Reply with exactly one line in the form \"SCORE: <n>\"."}},
      {RoleTag::rewrite_first_person,
       {{"question", "path"},
        "Rewrite the explicit reasoning path below as one natural first-person chain of "
        "thought, as if you were thinking through the question yourself.\n\n"
        "{question}\n\n"
        "Reasoning path:\n{path}\n\n"
        "Keep every substantive inference and keep the same conclusion. Do not mention "
        "the path or that you are rewriting. End with a sentence of the form "
        "\"the answer is <letter>\"."}},
      {RoleTag::rewrite_with_reflection,
       {{"question", "path"},
        "Rewrite the reasoning sequence below, which contains a reflection, as one "
        "natural first-person chain of thought. The reflection must stay at the same "
        "position in the flow: think, notice, then continue.\n\n"
        "{question}\n\n"
        "Reasoning sequence:\n{path}\n\n"
        "Keep every substantive inference, keep the reflection's content, and keep the "
        "sequence's conclusion. End with a sentence of the form "
        "\"the answer is <letter>\"."}},
      {RoleTag::generate_reflection,
       {{"question", "prefix", "flawed", "corrected"},
        "Two continuations of the same partial reasoning are shown for the question "
        "below. The first continuation is flawed; the second is the corrected line of "
        "reasoning.\n\n"
        "{question}\n\n"
        "Shared steps so far:\n{prefix}\n\n"
        "Flawed continuation:\n{flawed}\n\n"
        "Corrected continuation:\n{corrected}\n\n"
        "Write a short first-person reflection that notices what is wrong in the flawed "
        "continuation and pivots to the corrected line of reasoning. Do not mention that "
        "two continuations were shown. Write only the reflection text."}},
      {RoleTag::locate_error,
       {{"question", "gold", "path"},
        "The reasoning path below answers a medical multiple-choice question "
        "incorrectly.\n\n"
        "{question}\n\n"
        "The correct answer is {gold}.\n\n"
        "Numbered reasoning steps:\n{path}\n\n"
        "Identify the FIRST step that is already medically or logically wrong. Reply "
        "with exactly one line in the form \"STEP: <k>\" giving that step's number."}},
      {RoleTag::extract_answer,
       {{"text"},
        "Read the following response to a multiple-choice question and extract the "
        "single option letter it finally chooses.\n\n"
        "Response:\n{text}\n\n"
        "Reply with exactly one line in the form \"ANSWER: <letter>\". If the response "
        "never chooses an option, reply \"ANSWER: none\"."}},
      {RoleTag::answer_question,
       {{"question"},
        "Please answer the following multiple-choice question. Think through the "
        "problem step by step before deciding, then state your final choice as "
        "\"the answer is <letter>\".\n\n"
        "{question}"}},
  };
  return registry;
}

// Deterministic "{slot}" substitution. Throws MissingSlot naming the first
// absent slot in the template's declared order.
inline std::string render_prompt(RoleTag role, const std::map<std::string, std::string>& context) {
  const PromptTemplate& tmpl = prompt_registry().at(role);
  for (const auto& slot : tmpl.required_slots)
    if (context.find(slot) == context.end()) throw MissingSlot(slot);
  std::string out = tmpl.text;
  for (const auto& [slot, value] : context) {
    const std::string needle = "{" + slot + "}";
    std::size_t pos = 0;
    while ((pos = out.find(needle, pos)) != std::string::npos) {
      out.replace(pos, needle.size(), value);
      pos += value.size();
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Question / path rendering
// ---------------------------------------------------------------------------

inline std::string render_question(const Question& q) {
  std::string out = q.stem;
  out += "\n";
  for (const auto& [letter, text] : q.options) {
    out += "\n";
    out += letter;
    out += ". ";
    out += text;
  }
  return out;
}

// Numbered step list. Skips empty texts, i.e. the synthetic root, so the
// model sees steps numbered from 1.
inline std::string render_steps(const std::vector<std::string>& texts) {
  std::string out;
  std::size_t n = 0;
  for (const auto& t : texts) {
    if (t.empty()) continue;
    if (n) out += "\n";
    out += std::to_string(++n);
    out += ". ";
    out += t;
  }
  return out.empty() ? "(start of reasoning)" : out;
}

enum class EvalPromptMode { step_by_step, reflect_after_think };

inline const char* to_string(EvalPromptMode m) {
  return m == EvalPromptMode::step_by_step ? "step_by_step" : "reflect_after_think";
}

inline std::optional<EvalPromptMode> eval_mode_from_string(const std::string& s) {
  if (s == "step_by_step") return EvalPromptMode::step_by_step;
  if (s == "reflect_after_think") return EvalPromptMode::reflect_after_think;
  return std::nullopt;
}

// Evaluation-time question prompt. The step-by-step wording is also what
// emitted preference pairs carry as their prompt field, so the data
// matches inference-time formatting. reflect_after_think additionally
// directs an explicit post-hoc review of the reasoning.
inline std::string render_eval_prompt(const Question& q, EvalPromptMode mode) {
  if (mode == EvalPromptMode::step_by_step)
    return render_prompt(RoleTag::answer_question, {{"question", render_question(q)}});
  return "Please answer the following multiple-choice question. Think through the problem "
         "step by step, then explicitly reflect on your reasoning to check for mistakes, "
         "and only then state your final choice as \"the answer is <letter>\".\n\n" +
         render_question(q);
}

// ---------------------------------------------------------------------------
// Response parsers (total on any text; failure is nullopt)
// ---------------------------------------------------------------------------

// First numeric score in a judge response, clamped to [0, 5].
inline std::optional<double> parse_score(std::string_view raw) {
  std::size_t i = 0;
  while (i < raw.size()) {
    const char c = raw[i];
    if (c >= '0' && c <= '9') break;
    // A minus sign only counts when a digit follows it.
    if (c == '-' && i + 1 < raw.size() && raw[i + 1] >= '0' && raw[i + 1] <= '9') break;
    ++i;
  }
  if (i >= raw.size()) return std::nullopt;
  bool neg = raw[i] == '-';
  if (neg) ++i;
  double value = 0.0;
  while (i < raw.size() && raw[i] >= '0' && raw[i] <= '9') {
    value = value * 10.0 + (raw[i] - '0');
    ++i;
  }
  if (i < raw.size() && raw[i] == '.') {
    ++i;
    double scale = 0.1;
    while (i < raw.size() && raw[i] >= '0' && raw[i] <= '9') {
      value += (raw[i] - '0') * scale;
      scale *= 0.1;
      ++i;
    }
  }
  if (neg) value = -value;
  if (value < 0.0) return 0.0;
  if (value > 5.0) return 5.0;
  return value;
}

// Option letter from an answer-extraction response. Prefers an
// "ANSWER: X" trailer, then "the answer is X", then the last standalone
// capital letter in range. Total: nullopt when nothing usable appears.
inline std::optional<char> parse_answer_letter(std::string_view raw) {
  const std::string lower = to_lower(raw);
  auto letter_at = [&](std::size_t pos) -> std::optional<char> {
    while (pos < raw.size() &&
           (raw[pos] == ' ' || raw[pos] == ':' || raw[pos] == '(' || raw[pos] == '*' ||
            raw[pos] == '"' || raw[pos] == '\''))
      ++pos;
    if (pos >= raw.size()) return std::nullopt;
    const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(raw[pos])));
    if (!is_option_letter(c)) return std::nullopt;
    if (pos + 1 < raw.size() && std::isalnum(static_cast<unsigned char>(raw[pos + 1])))
      return std::nullopt;  // start of a word, not a bare letter
    return c;
  };
  for (std::string_view marker : {std::string_view("answer:"), std::string_view("answer is")}) {
    std::size_t pos = lower.rfind(marker);
    if (pos != std::string::npos) {
      if (auto c = letter_at(pos + marker.size())) return c;
    }
  }
  std::optional<char> last;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!is_option_letter(raw[i])) continue;
    const bool left_ok = i == 0 || !std::isalnum(static_cast<unsigned char>(raw[i - 1]));
    const bool right_ok =
        i + 1 >= raw.size() || !std::isalnum(static_cast<unsigned char>(raw[i + 1]));
    if (left_ok && right_ok) last = raw[i];
  }
  return last;
}

// Terminal check: defaults to "not terminal" unless the reply says yes.
inline bool parse_terminal(std::string_view raw) {
  const std::string lower = to_lower(raw);
  const std::size_t tag = lower.find("terminal:");
  if (tag != std::string::npos) {
    const auto rest = trim(std::string_view(lower).substr(tag + 9));
    return rest.substr(0, 3) == "yes";
  }
  const auto head = trim(lower);
  return head.substr(0, 3) == "yes";
}

// Candidate steps from a proposal response: one per "STEP:" line. A
// non-empty response without any STEP lines counts as a single candidate.
// Duplicates (after trimming) are dropped, keeping first occurrence.
inline std::vector<std::string> parse_candidates(std::string_view raw) {
  std::vector<std::string> out;
  auto push_unique = [&out](std::string_view s) {
    const auto t = trim(s);
    if (t.empty()) return;
    for (const auto& existing : out)
      if (existing == t) return;
    out.emplace_back(t);
  };
  for (std::string_view line : split_lines(raw)) {
    const auto t = trim(line);
    if (t.size() >= 5 && to_lower(t.substr(0, 5)) == "step:") push_unique(t.substr(5));
  }
  if (out.empty()) push_unique(raw);
  return out;
}

// 1-based step number from a locator response ("STEP: 3", "step 3", or the
// first bare integer).
inline std::optional<int> parse_step_index(std::string_view raw) {
  const std::string lower = to_lower(raw);
  std::size_t pos = lower.find("step");
  if (pos == std::string::npos) pos = 0;
  while (pos < lower.size() && !(lower[pos] >= '0' && lower[pos] <= '9')) ++pos;
  if (pos >= lower.size()) return std::nullopt;
  long value = 0;
  while (pos < lower.size() && lower[pos] >= '0' && lower[pos] <= '9') {
    value = value * 10 + (lower[pos] - '0');
    if (value > 1'000'000) return std::nullopt;
    ++pos;
  }
  return static_cast<int>(value);
}

}  // namespace reflforge
