#include "webgym/episode.hpp"

#include "webgym/text.hpp"

#include <nlohmann/json.hpp>

#include <sstream>

namespace webgym {

using nlohmann::json;

std::string_view to_string(Termination t) {
    switch (t) {
        case Termination::answered: return "answered";
        case Termination::max_turns: return "max_turns";
        case Termination::context_overflow: return "context_overflow";
        case Termination::policy_error: return "policy_error";
    }
    return "policy_error";
}

std::optional<Termination> termination_from_string(std::string_view s) {
    if (s == "answered") return Termination::answered;
    if (s == "max_turns") return Termination::max_turns;
    if (s == "context_overflow") return Termination::context_overflow;
    if (s == "policy_error") return Termination::policy_error;
    return std::nullopt;
}

std::size_t EpisodeConfig::count_tokens(std::string_view text) const {
    return token_counter ? token_counter(text) : approx_token_count(text);
}

std::string EpisodeConfig::summarize_observation(std::string_view text) const {
    return memory_summarizer ? memory_summarizer(text) : first_sentence(text);
}

namespace {

struct Block {
    std::size_t begin = std::string::npos;  // position of the opening tag
    std::size_t content_begin = 0;
    std::size_t content_end = 0;
    bool found = false;
};

Block find_block(const std::string& text, std::string_view open, std::string_view close,
                 std::size_t from) {
    Block b;
    auto o = text.find(open, from);
    if (o == std::string::npos) return b;
    auto c = text.find(close, o + open.size());
    if (c == std::string::npos) return b;
    b.begin = o;
    b.content_begin = o + open.size();
    b.content_end = c;
    b.found = true;
    return b;
}

Action invalid_action(std::string reason) {
    Action a;
    a.kind = ActionKind::invalid;
    a.reason = std::move(reason);
    return a;
}

Action parse_tool_call(const std::string& payload) {
    json j = json::parse(payload, nullptr, /*allow_exceptions=*/false);
    if (!j.is_object() || !j.contains("name") || !j["name"].is_string()) {
        return invalid_action("malformed_call");
    }
    const std::string name = j["name"].get<std::string>();
    const json args = j.value("arguments", json::object());
    if (!args.is_object()) return invalid_action("malformed_call");

    if (name == "search") {
        if (!args.contains("query") || !args["query"].is_string()) {
            return invalid_action("malformed_call");
        }
        Action a;
        a.kind = ActionKind::search;
        a.query = args["query"].get<std::string>();
        return a;
    }
    if (name == "browse") {
        if (!args.contains("url") || !args["url"].is_string()) {
            return invalid_action("malformed_call");
        }
        Action a;
        a.kind = ActionKind::browse;
        a.url = args["url"].get<std::string>();
        if (args.contains("query") && args["query"].is_string()) {
            a.query = args["query"].get<std::string>();
        }
        return a;
    }
    return invalid_action("unknown_tool");
}

}  // namespace

std::pair<std::string, Action> parse_message(const std::string& message) {
    const Block think = find_block(message, "<think>", "</think>", 0);
    const std::string thought =
        think.found
            ? message.substr(think.content_begin, think.content_end - think.content_begin)
            : std::string{};

    // First action block outside the think content.
    auto next_outside = [&](std::string_view open, std::string_view close) {
        std::size_t from = 0;
        while (true) {
            Block b = find_block(message, open, close, from);
            if (!b.found) return b;
            const bool inside_think =
                think.found && b.begin > think.begin && b.begin < think.content_end;
            if (!inside_think) return b;
            from = b.content_end;
        }
    };
    const Block tool = next_outside("<tool_call>", "</tool_call>");
    const Block answer = next_outside("<answer>", "</answer>");

    if (!tool.found && !answer.found) {
        const bool dangling = message.find("<tool_call>") != std::string::npos ||
                              message.find("<answer>") != std::string::npos;
        return {thought, invalid_action(dangling ? "malformed_call" : "missing_action")};
    }

    const bool tool_first = tool.found && (!answer.found || tool.begin < answer.begin);
    if (tool_first) {
        const bool preceded_by_think = think.found && think.content_end < tool.begin;
        if (!preceded_by_think) return {thought, invalid_action("missing_thought")};
        const std::string payload =
            trim(message.substr(tool.content_begin, tool.content_end - tool.content_begin));
        return {thought, parse_tool_call(payload)};
    }

    Action a;
    a.kind = ActionKind::answer;
    a.text = message.substr(answer.content_begin, answer.content_end - answer.content_begin);
    return {thought, a};
}

std::string render_action(const Action& action) {
    switch (action.kind) {
        case ActionKind::search: {
            json j;
            j["name"] = "search";
            j["arguments"] = {{"query", action.query}};
            return "<tool_call>" + j.dump() + "</tool_call>";
        }
        case ActionKind::browse: {
            json j;
            j["name"] = "browse";
            j["arguments"] = {{"query", action.query}, {"url", action.url}};
            return "<tool_call>" + j.dump() + "</tool_call>";
        }
        case ActionKind::answer:
            return "<answer>" + action.text + "</answer>";
        case ActionKind::invalid:
            return "<invalid>" + action.reason + "</invalid>";
    }
    return {};
}

std::string render_message(const std::string& thought, const Action& action) {
    return "<think>" + thought + "</think>\n" + render_action(action);
}

std::string render_history(const std::string& question, const std::vector<Step>& steps) {
    std::ostringstream out;
    out << "Question: " << question << "\n";
    for (const auto& step : steps) {
        out << "<think>" << step.thought << "</think>\n"
            << render_action(step.action) << "\n";
        if (step.action.kind != ActionKind::answer) {
            out << "<observation>" << step.observation << "</observation>\n";
        }
    }
    return out.str();
}

CompressResult compress_history(const std::string& question, std::vector<Step>& steps,
                                const EpisodeConfig& config) {
    CompressResult result;
    auto over_budget = [&] {
        return config.count_tokens(render_history(question, steps)) >
               config.context_budget_tokens;
    };
    if (!over_budget()) {
        result.under_budget = true;
        return result;
    }
    for (auto& step : steps) {
        if (step.compressed || step.action.kind == ActionKind::answer) continue;
        step.observation = config.summarize_observation(step.observation);
        step.compressed = true;
        ++result.compressed_steps;
        if (!over_budget()) {
            result.under_budget = true;
            return result;
        }
    }
    result.under_budget = !over_budget();
    return result;
}

Trajectory run_episode(const std::string& question, const std::string& episode_id,
                       PolicyClient& policy, ToolGateway& gateway,
                       const EpisodeConfig& config) {
    Trajectory t;
    t.query_id = episode_id;
    t.question = question;

    int invalid_streak = 0;
    bool terminated = false;
    for (int turn = 0; turn < config.max_turns && !terminated; ++turn) {
        std::string rendered = render_history(question, t.steps);
        if (config.count_tokens(rendered) > config.context_budget_tokens) {
            bool fits = false;
            if (config.memory_enabled) {
                fits = compress_history(question, t.steps, config).under_budget;
                rendered = render_history(question, t.steps);
            }
            if (!fits) {
                t.termination = Termination::context_overflow;
                terminated = true;
                break;
            }
        }

        PolicyResponse resp;
        bool generated = false;
        for (int attempt = 0; attempt < 2 && !generated; ++attempt) {
            try {
                resp = policy.generate(rendered);
                generated = true;
            } catch (const std::exception&) {
            }
        }
        if (!generated) {
            t.termination = Termination::policy_error;
            terminated = true;
            break;
        }
        t.token_logprobs.insert(t.token_logprobs.end(), resp.token_logprobs.begin(),
                                resp.token_logprobs.end());

        auto [thought, action] = parse_message(resp.message);
        switch (action.kind) {
            case ActionKind::answer: {
                t.final_answer = action.text;
                t.steps.push_back({thought, action, "", true, false});
                t.termination = Termination::answered;
                terminated = true;
                break;
            }
            case ActionKind::search: {
                auto obs = gateway.tool_search(action.query, episode_id);
                t.steps.push_back({thought, action, obs.text, obs.ok, false});
                invalid_streak = 0;
                break;
            }
            case ActionKind::browse: {
                auto obs = gateway.tool_browse(action.url, action.query, episode_id);
                t.steps.push_back({thought, action, obs.text, obs.ok, false});
                invalid_streak = 0;
                break;
            }
            case ActionKind::invalid: {
                std::string text = std::string(kInvalidActionPrefix) + action.reason;
                t.steps.push_back({thought, action, text, false, false});
                if (++invalid_streak >= config.max_consecutive_invalid) {
                    t.termination = Termination::policy_error;
                    terminated = true;
                }
                break;
            }
        }
    }
    if (!terminated) t.termination = Termination::max_turns;
    t.total_tokens = t.token_logprobs.size();
    return t;
}

namespace {

json action_to_json(const Action& action) {
    json j;
    switch (action.kind) {
        case ActionKind::search:
            j["name"] = "search";
            j["arguments"] = {{"query", action.query}};
            break;
        case ActionKind::browse:
            j["name"] = "browse";
            j["arguments"] = {{"query", action.query}, {"url", action.url}};
            break;
        case ActionKind::answer:
            j["name"] = "answer";
            j["arguments"] = {{"text", action.text}};
            break;
        case ActionKind::invalid:
            j["name"] = "invalid";
            j["arguments"] = {{"reason", action.reason}};
            break;
    }
    return j;
}

Action action_from_json(const json& j) {
    const std::string name = j.value("name", "");
    const json args = j.value("arguments", json::object());
    Action a;
    if (name == "search") {
        a.kind = ActionKind::search;
        a.query = args.value("query", "");
    } else if (name == "browse") {
        a.kind = ActionKind::browse;
        a.query = args.value("query", "");
        a.url = args.value("url", "");
    } else if (name == "answer") {
        a.kind = ActionKind::answer;
        a.text = args.value("text", "");
    } else {
        a.kind = ActionKind::invalid;
        a.reason = args.value("reason", "");
    }
    return a;
}

}  // namespace

std::string trajectory_to_json(const Trajectory& t) {
    json j;
    j["query_id"] = t.query_id;
    j["question"] = t.question;
    json steps = json::array();
    for (const auto& s : t.steps) {
        json step;
        step["thought"] = s.thought;
        step["action"] = action_to_json(s.action);
        step["observation"] = s.observation;
        step["observation_ok"] = s.observation_ok;
        steps.push_back(std::move(step));
    }
    j["steps"] = std::move(steps);
    if (t.final_answer) {
        j["final_answer"] = *t.final_answer;
    } else {
        j["final_answer"] = nullptr;
    }
    j["termination"] = std::string(to_string(t.termination));
    j["total_tokens"] = t.total_tokens;
    if (!t.token_logprobs.empty()) j["token_logprobs"] = t.token_logprobs;
    return j.dump();
}

std::optional<Trajectory> trajectory_from_json(const std::string& line) {
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (!j.is_object()) return std::nullopt;
    Trajectory t;
    t.query_id = j.value("query_id", "");
    t.question = j.value("question", "");
    for (const auto& step : j.value("steps", json::array())) {
        Step s;
        s.thought = step.value("thought", "");
        s.action = action_from_json(step.value("action", json::object()));
        s.observation = step.value("observation", "");
        s.observation_ok = step.value("observation_ok", true);
        t.steps.push_back(std::move(s));
    }
    if (j.contains("final_answer") && j["final_answer"].is_string()) {
        t.final_answer = j["final_answer"].get<std::string>();
    }
    t.termination = termination_from_string(j.value("termination", ""))
                        .value_or(Termination::policy_error);
    t.total_tokens = j.value("total_tokens", std::size_t{0});
    if (j.contains("token_logprobs")) {
        t.token_logprobs = j["token_logprobs"].get<std::vector<double>>();
    }
    return t;
}

}  // namespace webgym
