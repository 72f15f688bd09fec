#pragma once

#include <stdexcept>
#include <string>

namespace reflforge {

// Hard failures are exceptions; per-question soft failures travel as
// SkipReason values so a batch run can log them and move on.

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Network / timeout failure after the retry budget is exhausted.
struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Backend answered, but not in the shape the wire protocol promises.
struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Optional global token cap was hit.
struct BudgetExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A prompt template slot was not supplied.
struct MissingSlot : std::runtime_error {
  explicit MissingSlot(const std::string& slot)
      : std::runtime_error("missing prompt slot: " + slot), slot_name(slot) {}
  std::string slot_name;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FileNotFound : IoError {
  using IoError::IoError;
};

struct EmptyCorpus : IoError {
  using IoError::IoError;
};

struct CorruptCheckpoint : IoError {
  using IoError::IoError;
};

// Tree construction failures (Algorithm outcomes).
struct StartFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AllPathsDeadEnd : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnlabeledLeaf : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyPath : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct IndexOutOfRange : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Why a question produced no pair of some kind. Recorded, never fatal.
enum class SkipReason {
  no_correct_branch,
  no_incorrect_branch,
  unscored,
  rewrite_answer_drift,
  rewrite_empty,
  locator_parse_error,
  locator_out_of_range,
  no_correct_continuation,
  empty_reflection,
  action_value_order,
  start_failure,
  all_paths_dead_end,
  gateway_error,
};

inline const char* to_string(SkipReason r) {
  switch (r) {
    case SkipReason::no_correct_branch: return "no_correct_branch";
    case SkipReason::no_incorrect_branch: return "no_incorrect_branch";
    case SkipReason::unscored: return "unscored";
    case SkipReason::rewrite_answer_drift: return "rewrite_answer_drift";
    case SkipReason::rewrite_empty: return "rewrite_empty";
    case SkipReason::locator_parse_error: return "locator_parse_error";
    case SkipReason::locator_out_of_range: return "locator_out_of_range";
    case SkipReason::no_correct_continuation: return "no_correct_continuation";
    case SkipReason::empty_reflection: return "empty_reflection";
    case SkipReason::action_value_order: return "action_value_order";
    case SkipReason::start_failure: return "start_failure";
    case SkipReason::all_paths_dead_end: return "all_paths_dead_end";
    case SkipReason::gateway_error: return "gateway_error";
  }
  return "unknown";
}

}  // namespace reflforge
