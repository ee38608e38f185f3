#pragma once

#include "webgym/tool_gateway.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace webgym {

enum class ActionKind { search, browse, answer, invalid };

struct Action {
    ActionKind kind = ActionKind::invalid;
    std::string query;   // search, browse
    std::string url;     // browse
    std::string text;    // answer: raw content between the answer tags
    std::string reason;  // invalid
};

struct Step {
    std::string thought;
    Action action;
    std::string observation;
    bool observation_ok = true;
    bool compressed = false;  // observation replaced by its one-sentence summary
};

enum class Termination { answered, max_turns, context_overflow, policy_error };

std::string_view to_string(Termination t);
std::optional<Termination> termination_from_string(std::string_view s);

// One complete ReAct episode with the per-token log-probabilities recorded
// under the rollout policy.
struct Trajectory {
    std::string query_id;
    std::string question;
    std::vector<Step> steps;
    std::optional<std::string> final_answer;  // present iff termination == answered
    Termination termination = Termination::policy_error;
    std::vector<double> token_logprobs;
    std::size_t total_tokens = 0;
};

struct PolicyResponse {
    std::string message;
    std::vector<double> token_logprobs;
};

class PolicyClient {
public:
    virtual ~PolicyClient() = default;
    virtual PolicyResponse generate(const std::string& rendered_history) = 0;
};

// One policy instance per rollout, keyed by rollout seed; how difficulty
// assessment and ablations get K distinct deterministic rollouts.
using PolicyFactory = std::function<std::unique_ptr<PolicyClient>(std::uint64_t seed)>;

using TokenCounter = std::function<std::size_t(std::string_view)>;
using ObservationSummarizer = std::function<std::string(std::string_view)>;

struct EpisodeConfig {
    int max_turns = 40;                       // 40 stage 1, 60 stage 2
    std::size_t context_budget_tokens = 32768;  // 32768 stage 1, 49152 stage 2
    bool memory_enabled = false;
    int max_consecutive_invalid = 3;
    TokenCounter token_counter;               // defaults to approx_token_count
    ObservationSummarizer memory_summarizer;  // defaults to first_sentence

    std::size_t count_tokens(std::string_view text) const;
    std::string summarize_observation(std::string_view text) const;
};

// Wire markup: thoughts in <think></think>, tool calls as JSON
// {"name","arguments"} inside <tool_call></tool_call>, answers in
// <answer></answer>.
//
// Parse rules: the thought is the first think block; the action is the first
// tool-call or answer block after it. A tool call without a preceding think
// block is Invalid("missing_thought"); unparseable tool JSON is
// Invalid("malformed_call"); a message with no action block at all is
// Invalid("missing_action"). Failures never throw.
std::pair<std::string, Action> parse_message(const std::string& message);

// Inverse of parse_message on well-formed actions.
std::string render_action(const Action& action);
std::string render_message(const std::string& thought, const Action& action);

// Prompt text the policy sees: the question followed by each step's think,
// action and observation blocks.
std::string render_history(const std::string& question, const std::vector<Step>& steps);

struct CompressResult {
    bool under_budget = false;
    std::size_t compressed_steps = 0;
};

// Replaces prior observations with one-sentence summaries, oldest first,
// until the rendered history fits the context budget or every observation is
// compressed. Thoughts and actions stay verbatim. A history already under
// budget is returned unchanged.
CompressResult compress_history(const std::string& question, std::vector<Step>& steps,
                                const EpisodeConfig& config);

// The ReAct loop: render -> generate -> parse -> execute until an answer,
// the turn budget, or context overflow. Invalid actions consume a turn and
// observe "invalid action format: <reason>"; `max_consecutive_invalid` of
// them in a row end the episode as policy_error, as does a policy transport
// failure after one retry.
Trajectory run_episode(const std::string& question, const std::string& episode_id,
                       PolicyClient& policy, ToolGateway& gateway,
                       const EpisodeConfig& config);

std::string trajectory_to_json(const Trajectory& t);
std::optional<Trajectory> trajectory_from_json(const std::string& line);

inline constexpr std::string_view kInvalidActionPrefix = "invalid action format: ";

}  // namespace webgym
