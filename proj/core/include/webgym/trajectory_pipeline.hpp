#pragma once

#include "webgym/episode.hpp"
#include "webgym/reward_judge.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace webgym {

enum class Role { system, user, assistant, tool };

std::string_view to_string(Role role);
std::optional<Role> role_from_string(std::string_view s);

struct Message {
    Role role = Role::user;
    std::string text;
};

// Teacher-model episode in message form: system, user, then alternating
// assistant/tool turns.
struct RawTrajectory {
    std::vector<Message> messages;
    std::string gold_answer;
};

std::string raw_trajectory_to_json(const RawTrajectory& t);
std::optional<RawTrajectory> raw_trajectory_from_json(const std::string& line);

enum class RejectReasonCode {
    F1_wrong,
    F2_repetition,
    F3_too_few_calls,
    F4_interpreter,
    F5_artifacts,
    F6_tool_errors,
    F7_missing_think,
};

std::string_view to_string(RejectReasonCode code);

struct FilterResult {
    bool accepted = false;
    std::optional<RejectReasonCode> reason;  // first failing rule in F1..F7 order
    bool judge_flagged = false;
};

struct FilterOptions {
    std::string interpreter_tool_name = "PythonInterpreter";  // F4
    int max_identical_calls = 3;                              // F2: reject if repeated more
    int min_tool_calls = 2;                                   // F3
    int max_tool_errors = 2;                                  // F6
    // F6 patterns beyond the gateway marker (case-insensitive substrings).
    std::vector<std::string> tool_error_patterns = {"timeout", "page not found",
                                                    "access denied", "invalid"};
};

// Failed tool observations imported from the gateway carry this prefix; F6
// counts it as an error marker alongside the text patterns.
inline constexpr std::string_view kToolErrorMarker = "[tool_error]";

// Applies F1..F7 in order and reports the first violation:
//   F1 final answer judged wrong, F2 an identical tool call (same name,
//   byte-equal arguments) repeated more than 3 times, F3 fewer than 2 tool
//   calls, F4 interpreter tool present, F5 encoding artifacts or boxed-answer
//   markup, F6 more than 2 tool-error observations, F7 a tool call without a
//   preceding think block in the same assistant message.
FilterResult filter_trajectory(const RawTrajectory& t, JudgeClient* judge_client = nullptr,
                               const FilterOptions& options = {});

struct CleanOptions {
    std::size_t max_answer_chars = 100;  // C2 threshold
    std::vector<std::string> reminder_prefixes = {"Reminder:"};  // C3 detection
};

// C1 system prompt replaced, C2 overlong final answer swapped for the gold
// answer, C3 reminder user-messages merged into the preceding assistant turn,
// C4 everything after the closing answer tag dropped. Idempotent; requires a
// filtered-in trajectory (no answer tag is a hard error).
RawTrajectory clean_trajectory(const RawTrajectory& t,
                               const std::string& standard_system_prompt,
                               const std::string& gold_answer,
                               const CleanOptions& options = {});

struct PipelineStats {
    std::size_t total = 0;
    std::size_t accepted = 0;
    std::map<RejectReasonCode, std::size_t> rejects_by_rule;
    double acceptance_rate = 0.0;
    std::map<std::size_t, std::size_t> token_length_histogram;  // pow2 bucket -> count
    std::map<std::size_t, std::size_t> turn_count_histogram;    // pow2 bucket -> count
};

PipelineStats pipeline_stats(const std::vector<RawTrajectory>& inputs,
                             const std::vector<FilterResult>& results);

// Bridge from environment episodes to the message form this pipeline
// consumes; failed observations get the tool-error marker prefix.
RawTrajectory to_raw_trajectory(const Trajectory& episode,
                                const std::string& system_prompt,
                                const std::string& gold_answer);

}  // namespace webgym
