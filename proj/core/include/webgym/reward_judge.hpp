#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace webgym {

enum class Judgment { correct, incorrect };
enum class VerdictSource { exact, llm, parse_failure };

struct JudgeVerdict {
    std::string reasoning;
    Judgment judgment = Judgment::incorrect;
    VerdictSource source = VerdictSource::exact;
};

// Semantic-equivalence judge. Returns raw text that is *expected* to be a
// JSON object with "reasoning" and "judgment" fields; parsing and all
// robustness live on this side of the interface.
class JudgeClient {
public:
    virtual ~JudgeClient() = default;
    virtual std::string judge(const std::string& question, const std::string& gold,
                              const std::string& predicted) = 0;
};

// Content of the last well-formed <answer>...</answer> pair, trimmed.
// Unclosed or absent tags yield nullopt.
std::optional<std::string> extract_answer(const std::string& final_message);

// Lowercase, trim, collapse whitespace, strip terminal punctuation, and drop
// thousands separators inside digit groups before comparing.
std::string normalize_answer(std::string_view s);
JudgeVerdict judge_exact(const std::string& predicted, const std::string& gold);

struct RewardOutcome {
    int reward = 0;  // always 0 or 1
    bool answered = false;
    bool client_called = false;
    bool flagged = false;  // parse failure or client transport failure
    JudgeVerdict verdict;
};

// Three-tier reward: no answer -> 0; normalized exact match -> 1 without a
// client call; otherwise the client's JSON verdict decides, with unparseable
// output scored 0 and flagged. A client transport failure is retried once,
// then scored 0 and flagged.
RewardOutcome judge(const std::string& question, const std::string& gold,
                    const std::optional<std::string>& predicted_answer,
                    JudgeClient* client = nullptr);

}  // namespace webgym
