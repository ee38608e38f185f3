#pragma once

#include "webgym/corpus_store.hpp"
#include "webgym/search_index.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace webgym {

enum class CapabilityTag { direct, aggregation, enumeration, cross_verify, statistics };

std::string_view to_string(CapabilityTag tag);
std::optional<CapabilityTag> capability_tag_from_string(std::string_view s);

// The seven rubric conditions, in prompt order. Per-condition booleans are
// parsed from the judge's numbered reasoning when recognizable and stay
// unset otherwise; `final_verdict` is always the conjunction of everything
// known (boxed verdict, pre-check, parsed conditions).
struct RubricVerdict {
    enum Condition {
        independence = 0,
        specificity,
        unambiguity,
        answerability,
        not_open_ended,
        not_oversimple,
        time_specificity,
    };
    std::array<std::optional<bool>, 7> conditions;
    bool final_verdict = false;
    bool judge_flagged = false;  // transport failure or unparseable boxed token
    std::string raw_reasoning;
};

struct QAPair {
    std::string qa_id;
    std::string question;
    std::string answer;
    std::string origin_url;
    CapabilityTag capability_tag = CapabilityTag::direct;
    int iteration = 0;
    std::optional<RubricVerdict> rubric;
};

std::string qa_pair_to_json(const QAPair& qa);
std::optional<QAPair> qa_pair_from_json(const std::string& line);

// Text-completion client; QA extraction and rubric judging both run through
// it. Test doubles are deterministic fixtures.
class GeneratorClient {
public:
    virtual ~GeneratorClient() = default;
    virtual std::string generate(const std::string& prompt) = 0;
};

// Live-web page fetch behind an interface; offline doubles in tests. Returns
// markdown; throws on failure.
class FetcherClient {
public:
    virtual ~FetcherClient() = default;
    virtual std::string fetch(const std::string& url) = 0;
};

struct SearchResultRef {
    std::string url;
    std::string title;
};

class WebSearchClient {
public:
    virtual ~WebSearchClient() = default;
    virtual std::vector<SearchResultRef> web_search(const std::string& query,
                                                    std::size_t n) = 0;
};

struct ExtractReport {
    std::vector<QAPair> pairs;
    bool parse_failed = false;     // generator output was not the expected JSON
    bool count_mismatch = false;   // total_pairs disagreed with the list length
};

// Fills the extraction template with the page markdown, parses the
// generator's {"qa_pairs":[...],"total_pairs":n} object, and stamps each pair
// with the origin URL. The list length wins over a mismatched total_pairs.
ExtractReport extract_qa(const WebPage& page, GeneratorClient& generator,
                         const std::string& extract_template, int iteration);

// Deterministic pre-check mirroring rubric conditions 5 and 7: questions
// containing a vague-time term or a bare "how"/"why" are rejected no matter
// what the judge says.
std::optional<std::string> banned_term_in_question(const std::string& question);

// Fills the rubric template, reads the last \boxed{true|false} token, and
// lifts per-condition booleans out of the numbered reasoning where possible.
// Judge transport failures reject (never accept by default).
RubricVerdict rubric_filter(const QAPair& qa, GeneratorClient& judge,
                            const std::string& rubric_template);

class TaskPool {
public:
    void add(QAPair qa) { pairs_.push_back(std::move(qa)); }
    const std::vector<QAPair>& pairs() const { return pairs_; }
    std::size_t size() const { return pairs_.size(); }

    void save_jsonl(const std::string& path) const;
    static TaskPool load_jsonl(const std::string& path);

private:
    std::vector<QAPair> pairs_;
};

// Masks the origin page in both the store and the index, then appends the
// pair to the pool. Requires an accepted rubric verdict. A shared origin that
// is already masked is fine.
void accept_and_mask(const QAPair& qa, CorpusStore& store, SearchIndex& index,
                     TaskPool& pool);

struct ExpandReport {
    IngestReport ingest;
    std::size_t fetch_failures = 0;
    std::size_t masked_skipped = 0;
    bool search_failed = false;
};

// web_search(question, n) -> fetch each hit -> ingest with
// source_tag=expansion. Individual fetch failures are skipped and counted; a
// failed search yields an empty, flagged report. Masked URLs are never
// re-ingested.
ExpandReport expand_corpus(const QAPair& qa, WebSearchClient& web_search,
                           FetcherClient& fetcher, CorpusStore& store,
                           std::size_t n = 100, int iteration = 1);

// First sentences of the markdown, capped; the summary field for fetched
// pages whose source gives none.
std::string derive_summary(std::string_view markdown, std::size_t max_chars = 300);

std::string make_qa_id(const std::string& origin_url, const std::string& question);

}  // namespace webgym
