#include "webgym/trajectory_pipeline.hpp"

#include "webgym/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <stdexcept>

namespace webgym {

using nlohmann::json;

std::string_view to_string(Role role) {
    switch (role) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
        case Role::tool: return "tool";
    }
    return "user";
}

std::optional<Role> role_from_string(std::string_view s) {
    if (s == "system") return Role::system;
    if (s == "user") return Role::user;
    if (s == "assistant") return Role::assistant;
    if (s == "tool") return Role::tool;
    return std::nullopt;
}

std::string raw_trajectory_to_json(const RawTrajectory& t) {
    json j;
    json messages = json::array();
    for (const auto& m : t.messages) {
        messages.push_back({{"role", std::string(to_string(m.role))}, {"text", m.text}});
    }
    j["messages"] = std::move(messages);
    j["gold_answer"] = t.gold_answer;
    return j.dump();
}

std::optional<RawTrajectory> raw_trajectory_from_json(const std::string& line) {
    json j = json::parse(line, nullptr, false);
    if (!j.is_object() || !j.contains("messages")) return std::nullopt;
    RawTrajectory t;
    for (const auto& m : j["messages"]) {
        auto role = role_from_string(m.value("role", ""));
        if (!role) return std::nullopt;
        t.messages.push_back({*role, m.value("text", "")});
    }
    t.gold_answer = j.value("gold_answer", "");
    return t;
}

std::string_view to_string(RejectReasonCode code) {
    switch (code) {
        case RejectReasonCode::F1_wrong: return "F1_wrong";
        case RejectReasonCode::F2_repetition: return "F2_repetition";
        case RejectReasonCode::F3_too_few_calls: return "F3_too_few_calls";
        case RejectReasonCode::F4_interpreter: return "F4_interpreter";
        case RejectReasonCode::F5_artifacts: return "F5_artifacts";
        case RejectReasonCode::F6_tool_errors: return "F6_tool_errors";
        case RejectReasonCode::F7_missing_think: return "F7_missing_think";
    }
    return "F1_wrong";
}

namespace {

struct ToolCallOccurrence {
    std::size_t message_index = 0;
    std::size_t position = 0;      // offset of "<tool_call>" within the message
    std::string payload;           // trimmed bytes between the tags
};

std::vector<ToolCallOccurrence> extract_tool_calls(const RawTrajectory& t) {
    static constexpr std::string_view kOpen = "<tool_call>";
    static constexpr std::string_view kClose = "</tool_call>";
    std::vector<ToolCallOccurrence> calls;
    for (std::size_t i = 0; i < t.messages.size(); ++i) {
        if (t.messages[i].role != Role::assistant) continue;
        const std::string& text = t.messages[i].text;
        std::size_t from = 0;
        while (true) {
            auto open = text.find(kOpen, from);
            if (open == std::string::npos) break;
            auto close = text.find(kClose, open + kOpen.size());
            if (close == std::string::npos) break;
            calls.push_back(
                {i, open,
                 trim(text.substr(open + kOpen.size(), close - open - kOpen.size()))});
            from = close + kClose.size();
        }
    }
    return calls;
}

std::optional<std::string> last_answer_anywhere(const RawTrajectory& t) {
    std::optional<std::string> answer;
    for (const auto& m : t.messages) {
        if (m.role != Role::assistant) continue;
        if (auto a = extract_answer(m.text)) answer = a;
    }
    return answer;
}

bool has_encoding_artifacts(const std::string& text) {
    if (text.find("\xEF\xBF\xBD") != std::string::npos) return true;  // U+FFFD
    for (std::size_t i = 0; i + 1 < text.size(); ++i) {
        // UTF-8 never encodes surrogates; 0xED 0xA0..0xBF is an unpaired one.
        if (static_cast<unsigned char>(text[i]) == 0xED) {
            const auto next = static_cast<unsigned char>(text[i + 1]);
            if (next >= 0xA0 && next <= 0xBF) return true;
        }
    }
    return false;
}

bool is_tool_error(const std::string& text, const FilterOptions& options) {
    if (text.rfind(kToolErrorMarker, 0) == 0) return true;
    const std::string lowered = to_lower(text);
    for (const auto& pattern : options.tool_error_patterns) {
        if (lowered.find(to_lower(pattern)) != std::string::npos) return true;
    }
    return false;
}

const std::string& question_of(const RawTrajectory& t) {
    static const std::string kEmpty;
    for (const auto& m : t.messages) {
        if (m.role == Role::user) return m.text;
    }
    return kEmpty;
}

}  // namespace

FilterResult filter_trajectory(const RawTrajectory& t, JudgeClient* judge_client,
                               const FilterOptions& options) {
    FilterResult result;

    // F1: the final answer must be judged correct.
    const auto answer = last_answer_anywhere(t);
    const auto outcome = judge(question_of(t), t.gold_answer, answer, judge_client);
    result.judge_flagged = outcome.flagged;
    if (outcome.reward != 1) {
        result.reason = RejectReasonCode::F1_wrong;
        return result;
    }

    const auto calls = extract_tool_calls(t);

    // F2: an identical call (same name, byte-equal arguments) repeated > 3x.
    std::map<std::string, int> call_counts;
    for (const auto& c : calls) {
        if (++call_counts[c.payload] > options.max_identical_calls) {
            result.reason = RejectReasonCode::F2_repetition;
            return result;
        }
    }

    if (calls.size() < static_cast<std::size_t>(options.min_tool_calls)) {
        result.reason = RejectReasonCode::F3_too_few_calls;
        return result;
    }

    for (const auto& m : t.messages) {
        if (m.text.find(options.interpreter_tool_name) != std::string::npos) {
            result.reason = RejectReasonCode::F4_interpreter;
            return result;
        }
    }

    for (const auto& m : t.messages) {
        if (has_encoding_artifacts(m.text) ||
            m.text.find("\\boxed{") != std::string::npos) {
            result.reason = RejectReasonCode::F5_artifacts;
            return result;
        }
    }

    int tool_errors = 0;
    for (const auto& m : t.messages) {
        if (m.role == Role::tool && is_tool_error(m.text, options)) ++tool_errors;
    }
    if (tool_errors > options.max_tool_errors) {
        result.reason = RejectReasonCode::F6_tool_errors;
        return result;
    }

    // F7: each tool call needs a think block closed before it in its message.
    for (const auto& c : calls) {
        const std::string& text = t.messages[c.message_index].text;
        bool preceded = false;
        std::size_t from = 0;
        while (true) {
            auto open = text.find("<think>", from);
            if (open == std::string::npos || open >= c.position) break;
            auto close = text.find("</think>", open);
            if (close != std::string::npos && close + 8 <= c.position) {
                preceded = true;
                break;
            }
            from = open + 7;
        }
        if (!preceded) {
            result.reason = RejectReasonCode::F7_missing_think;
            return result;
        }
    }

    result.accepted = true;
    return result;
}

namespace {

struct AnswerLocation {
    std::size_t message_index = 0;
    std::size_t content_begin = 0;
    std::size_t content_end = 0;
    bool found = false;
};

AnswerLocation locate_last_answer(const std::vector<Message>& messages) {
    static constexpr std::string_view kOpen = "<answer>";
    static constexpr std::string_view kClose = "</answer>";
    AnswerLocation loc;
    for (std::size_t i = 0; i < messages.size(); ++i) {
        if (messages[i].role != Role::assistant) continue;
        const std::string& text = messages[i].text;
        std::size_t from = 0;
        while (true) {
            auto open = text.find(kOpen, from);
            if (open == std::string::npos) break;
            auto close = text.find(kClose, open + kOpen.size());
            if (close == std::string::npos) break;
            loc = {i, open + kOpen.size(), close, true};
            from = close + kClose.size();
        }
    }
    return loc;
}

}  // namespace

RawTrajectory clean_trajectory(const RawTrajectory& t,
                               const std::string& standard_system_prompt,
                               const std::string& gold_answer,
                               const CleanOptions& options) {
    if (t.messages.empty() || t.messages.front().role != Role::system) {
        throw std::invalid_argument("clean_trajectory: first message must be system");
    }
    if (!locate_last_answer(t.messages).found) {
        throw std::invalid_argument(
            "clean_trajectory: accepted trajectory has no answer tag");
    }
    RawTrajectory out = t;
    out.gold_answer = gold_answer;

    // C1: standardize the system prompt.
    out.messages.front().text = standard_system_prompt;

    // C2: overlong final answers are replaced by the gold answer.
    {
        const auto loc = locate_last_answer(out.messages);
        const std::size_t len = loc.content_end - loc.content_begin;
        if (len > options.max_answer_chars) {
            out.messages[loc.message_index].text.replace(loc.content_begin, len,
                                                         gold_answer);
        }
    }

    // C3: merge reminder user-messages into the preceding assistant turn.
    {
        std::vector<Message> merged;
        merged.reserve(out.messages.size());
        for (auto& msg : out.messages) {
            bool is_reminder = false;
            if (msg.role == Role::user) {
                const std::string trimmed = trim(msg.text);
                for (const auto& prefix : options.reminder_prefixes) {
                    if (trimmed.rfind(prefix, 0) == 0) {
                        is_reminder = true;
                        break;
                    }
                }
            }
            bool absorbed = false;
            if (is_reminder) {
                for (auto it = merged.rbegin(); it != merged.rend(); ++it) {
                    if (it->role == Role::assistant) {
                        it->text += "\n\n" + msg.text;
                        absorbed = true;
                        break;
                    }
                }
            }
            if (!absorbed) merged.push_back(std::move(msg));
        }
        out.messages = std::move(merged);
    }

    // C4: nothing survives past the closing answer tag.
    {
        const auto loc = locate_last_answer(out.messages);
        out.messages[loc.message_index].text.resize(loc.content_end +
                                                    std::string_view("</answer>").size());
        out.messages.resize(loc.message_index + 1);
    }
    return out;
}

namespace {

std::size_t pow2_bucket(std::size_t value) {
    std::size_t bucket = 1;
    while (bucket < value) bucket *= 2;
    return bucket;
}

}  // namespace

PipelineStats pipeline_stats(const std::vector<RawTrajectory>& inputs,
                             const std::vector<FilterResult>& results) {
    if (inputs.size() != results.size()) {
        throw std::invalid_argument("pipeline_stats: size mismatch");
    }
    PipelineStats stats;
    stats.total = inputs.size();
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (results[i].accepted) {
            ++stats.accepted;
        } else if (results[i].reason) {
            ++stats.rejects_by_rule[*results[i].reason];
        }
        std::size_t tokens = 0;
        std::size_t turns = 0;
        for (const auto& m : inputs[i].messages) {
            tokens += approx_token_count(m.text);
            if (m.role == Role::assistant) ++turns;
        }
        ++stats.token_length_histogram[pow2_bucket(tokens)];
        ++stats.turn_count_histogram[pow2_bucket(turns)];
    }
    stats.acceptance_rate =
        stats.total > 0 ? static_cast<double>(stats.accepted) / stats.total : 0.0;
    return stats;
}

RawTrajectory to_raw_trajectory(const Trajectory& episode,
                                const std::string& system_prompt,
                                const std::string& gold_answer) {
    RawTrajectory raw;
    raw.gold_answer = gold_answer;
    raw.messages.push_back({Role::system, system_prompt});
    raw.messages.push_back({Role::user, episode.question});
    for (const auto& step : episode.steps) {
        raw.messages.push_back(
            {Role::assistant, render_message(step.thought, step.action)});
        if (step.action.kind == ActionKind::answer) continue;
        std::string obs = step.observation;
        if (!step.observation_ok) obs = std::string(kToolErrorMarker) + " " + obs;
        raw.messages.push_back({Role::tool, std::move(obs)});
    }
    return raw;
}

}  // namespace webgym
