#include "webgym/reward_judge.hpp"

#include "webgym/text.hpp"

#include <nlohmann/json.hpp>

#include <cctype>

namespace webgym {

using nlohmann::json;

std::optional<std::string> extract_answer(const std::string& final_message) {
    static constexpr std::string_view kOpen = "<answer>";
    static constexpr std::string_view kClose = "</answer>";
    std::optional<std::string> result;
    std::size_t pos = 0;
    while (true) {
        auto open = final_message.find(kOpen, pos);
        if (open == std::string::npos) break;
        auto close = final_message.find(kClose, open + kOpen.size());
        if (close == std::string::npos) break;  // unclosed tail ignored
        result = trim(std::string_view(final_message)
                          .substr(open + kOpen.size(), close - open - kOpen.size()));
        pos = close + kClose.size();
    }
    return result;
}

std::string normalize_answer(std::string_view s) {
    std::string t = to_lower(trim(s));

    std::string collapsed;
    collapsed.reserve(t.size());
    bool prev_space = false;
    for (unsigned char c : t) {
        if (std::isspace(c)) {
            if (!prev_space && !collapsed.empty()) collapsed.push_back(' ');
            prev_space = true;
        } else {
            collapsed.push_back(static_cast<char>(c));
            prev_space = false;
        }
    }
    while (!collapsed.empty()) {
        char back = collapsed.back();
        if (back == '.' || back == ',' || back == '!' || back == '?' || back == ';' ||
            back == ':' || back == ' ') {
            collapsed.pop_back();
        } else {
            break;
        }
    }

    // "2,025" -> "2025"; commas only vanish between digits.
    std::string out;
    out.reserve(collapsed.size());
    for (std::size_t i = 0; i < collapsed.size(); ++i) {
        if (collapsed[i] == ',' && i > 0 && i + 1 < collapsed.size() &&
            std::isdigit(static_cast<unsigned char>(collapsed[i - 1])) &&
            std::isdigit(static_cast<unsigned char>(collapsed[i + 1]))) {
            continue;
        }
        out.push_back(collapsed[i]);
    }
    return out;
}

JudgeVerdict judge_exact(const std::string& predicted, const std::string& gold) {
    JudgeVerdict v;
    v.source = VerdictSource::exact;
    v.judgment = normalize_answer(predicted) == normalize_answer(gold)
                     ? Judgment::correct
                     : Judgment::incorrect;
    return v;
}

namespace {

// Tolerates exactly one markdown fence pair around the object, nothing more.
std::string strip_one_fence(const std::string& text) {
    std::string t = trim(text);
    if (t.rfind("```", 0) != 0) return t;
    auto first_newline = t.find('\n');
    if (first_newline == std::string::npos) return t;
    auto closing = t.rfind("```");
    if (closing <= first_newline) return t;
    return trim(t.substr(first_newline + 1, closing - first_newline - 1));
}

std::optional<JudgeVerdict> parse_client_verdict(const std::string& raw) {
    json j = json::parse(strip_one_fence(raw), nullptr, /*allow_exceptions=*/false);
    if (!j.is_object()) return std::nullopt;
    if (!j.contains("judgment") || !j["judgment"].is_string()) return std::nullopt;
    const std::string judgment = j["judgment"].get<std::string>();
    JudgeVerdict v;
    v.reasoning = j.value("reasoning", "");
    v.source = VerdictSource::llm;
    if (judgment == "Correct") {
        v.judgment = Judgment::correct;
    } else if (judgment == "Incorrect") {
        v.judgment = Judgment::incorrect;
    } else {
        return std::nullopt;
    }
    return v;
}

}  // namespace

RewardOutcome judge(const std::string& question, const std::string& gold,
                    const std::optional<std::string>& predicted_answer,
                    JudgeClient* client) {
    RewardOutcome out;
    if (!predicted_answer.has_value()) return out;
    out.answered = true;

    out.verdict = judge_exact(*predicted_answer, gold);
    if (out.verdict.judgment == Judgment::correct) {
        out.reward = 1;
        return out;
    }
    if (client == nullptr) return out;

    std::string raw;
    bool got_response = false;
    for (int attempt = 0; attempt < 2 && !got_response; ++attempt) {
        try {
            raw = client->judge(question, gold, *predicted_answer);
            got_response = true;
        } catch (const std::exception&) {
        }
    }
    out.client_called = true;
    if (!got_response) {
        out.flagged = true;
        out.verdict = JudgeVerdict{"", Judgment::incorrect, VerdictSource::parse_failure};
        return out;
    }
    auto parsed = parse_client_verdict(raw);
    if (!parsed) {
        out.flagged = true;
        out.verdict = JudgeVerdict{raw, Judgment::incorrect, VerdictSource::parse_failure};
        return out;
    }
    out.verdict = *parsed;
    out.reward = out.verdict.judgment == Judgment::correct ? 1 : 0;
    return out;
}

}  // namespace webgym
