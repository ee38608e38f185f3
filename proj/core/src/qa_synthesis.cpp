#include "webgym/qa_synthesis.hpp"

#include "webgym/hash.hpp"
#include "webgym/prompts.hpp"
#include "webgym/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>
#include <stdexcept>

namespace webgym {

using nlohmann::json;

std::string_view to_string(CapabilityTag tag) {
    switch (tag) {
        case CapabilityTag::direct: return "direct";
        case CapabilityTag::aggregation: return "aggregation";
        case CapabilityTag::enumeration: return "enumeration";
        case CapabilityTag::cross_verify: return "cross_verify";
        case CapabilityTag::statistics: return "statistics";
    }
    return "direct";
}

std::optional<CapabilityTag> capability_tag_from_string(std::string_view s) {
    if (s == "direct") return CapabilityTag::direct;
    if (s == "aggregation") return CapabilityTag::aggregation;
    if (s == "enumeration") return CapabilityTag::enumeration;
    if (s == "cross_verify") return CapabilityTag::cross_verify;
    if (s == "statistics") return CapabilityTag::statistics;
    return std::nullopt;
}

std::string make_qa_id(const std::string& origin_url, const std::string& question) {
    return "qa-" + hex64(fnv1a64(origin_url + "\n" + question));
}

std::string qa_pair_to_json(const QAPair& qa) {
    json j;
    j["qa_id"] = qa.qa_id;
    j["question"] = qa.question;
    j["answer"] = qa.answer;
    j["origin_url"] = qa.origin_url;
    j["capability_tag"] = std::string(to_string(qa.capability_tag));
    j["iteration"] = qa.iteration;
    return j.dump();
}

std::optional<QAPair> qa_pair_from_json(const std::string& line) {
    json j = json::parse(line, nullptr, false);
    if (!j.is_object()) return std::nullopt;
    QAPair qa;
    qa.qa_id = j.value("qa_id", "");
    qa.question = j.value("question", "");
    qa.answer = j.value("answer", "");
    qa.origin_url = j.value("origin_url", "");
    qa.capability_tag = capability_tag_from_string(j.value("capability_tag", "direct"))
                            .value_or(CapabilityTag::direct);
    qa.iteration = j.value("iteration", 0);
    return qa;
}

ExtractReport extract_qa(const WebPage& page, GeneratorClient& generator,
                         const std::string& extract_template, int iteration) {
    ExtractReport report;
    const std::string prompt =
        fill_template(extract_template, {{"markdown_content", page.content_markdown}});
    std::string raw;
    try {
        raw = generator.generate(prompt);
    } catch (const std::exception&) {
        report.parse_failed = true;
        return report;
    }
    json j = json::parse(raw, nullptr, /*allow_exceptions=*/false);
    if (!j.is_object() || !j.contains("qa_pairs") || !j["qa_pairs"].is_array()) {
        report.parse_failed = true;
        return report;
    }
    for (const auto& item : j["qa_pairs"]) {
        if (!item.is_object()) continue;
        QAPair qa;
        qa.question = item.value("question", "");
        qa.answer = item.value("answer", "");
        if (qa.question.empty() || qa.answer.empty()) continue;
        qa.origin_url = page.url;
        qa.iteration = iteration;
        qa.qa_id = make_qa_id(qa.origin_url, qa.question);
        report.pairs.push_back(std::move(qa));
    }
    if (j.contains("total_pairs") && j["total_pairs"].is_number_integer()) {
        const auto declared = j["total_pairs"].get<long long>();
        if (declared != static_cast<long long>(report.pairs.size())) {
            report.count_mismatch = true;  // the list length wins
        }
    }
    return report;
}

std::optional<std::string> banned_term_in_question(const std::string& question) {
    static const std::vector<std::string> kVagueTime = {
        "latest",    "currently", "current",  "most recent",
        "as of now", "so far",    "up to now"};
    static const std::vector<std::string> kInterrogatives = {"how", "why"};
    for (const auto& term : kVagueTime) {
        if (contains_token_phrase(question, term)) return term;
    }
    for (const auto& term : kInterrogatives) {
        if (contains_token_phrase(question, term)) return term;
    }
    return std::nullopt;
}

namespace {

// Last \boxed{...} token in the judge output.
std::optional<bool> parse_boxed_verdict(const std::string& text) {
    static const std::string kBoxed = "\\boxed{";
    std::size_t pos = std::string::npos;
    std::size_t from = 0;
    while (true) {
        auto p = text.find(kBoxed, from);
        if (p == std::string::npos) break;
        pos = p;
        from = p + kBoxed.size();
    }
    if (pos == std::string::npos) return std::nullopt;
    auto close = text.find('}', pos + kBoxed.size());
    if (close == std::string::npos) return std::nullopt;
    const std::string token =
        to_lower(trim(text.substr(pos + kBoxed.size(), close - pos - kBoxed.size())));
    if (token == "true") return true;
    if (token == "false") return false;
    return std::nullopt;
}

void parse_condition_lines(const std::string& text, RubricVerdict& verdict) {
    static const std::regex kLine(R"(^\s*([1-7])\.\s*[^:]*:\s*(true|false)\b)",
                                  std::regex::icase);
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::smatch m;
        if (!std::regex_search(line, m, kLine)) continue;
        const int idx = m[1].str()[0] - '1';
        if (idx < 0 || idx > 6) continue;
        verdict.conditions[static_cast<std::size_t>(idx)] =
            to_lower(m[2].str()) == "true";
    }
}

}  // namespace

RubricVerdict rubric_filter(const QAPair& qa, GeneratorClient& judge,
                            const std::string& rubric_template) {
    RubricVerdict verdict;

    if (auto banned = banned_term_in_question(qa.question)) {
        const bool is_interrogative = *banned == "how" || *banned == "why";
        verdict.conditions[is_interrogative ? RubricVerdict::not_open_ended
                                            : RubricVerdict::time_specificity] = false;
        verdict.final_verdict = false;
        verdict.raw_reasoning = "pre-check: banned term \"" + *banned + "\"";
        return verdict;
    }

    const std::string prompt = fill_template(
        rubric_template, {{"question", qa.question}, {"answer", qa.answer}});
    std::string raw;
    try {
        raw = judge.generate(prompt);
    } catch (const std::exception&) {
        verdict.final_verdict = false;
        verdict.judge_flagged = true;
        verdict.raw_reasoning = "judge transport failure";
        return verdict;
    }
    verdict.raw_reasoning = raw;
    parse_condition_lines(raw, verdict);

    const auto boxed = parse_boxed_verdict(raw);
    if (!boxed.has_value()) {
        verdict.final_verdict = false;
        verdict.judge_flagged = true;
        return verdict;
    }
    bool all_known_true = *boxed;
    for (const auto& c : verdict.conditions) {
        if (c.has_value() && !*c) all_known_true = false;
    }
    verdict.final_verdict = all_known_true;
    return verdict;
}

void TaskPool::save_jsonl(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw StorageError("cannot write task pool " + path);
    for (const auto& qa : pairs_) out << qa_pair_to_json(qa) << '\n';
}

TaskPool TaskPool::load_jsonl(const std::string& path) {
    TaskPool pool;
    std::ifstream in(path);
    if (!in) throw StorageError("cannot open task pool " + path);
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        if (auto qa = qa_pair_from_json(line)) pool.add(std::move(*qa));
    }
    return pool;
}

void accept_and_mask(const QAPair& qa, CorpusStore& store, SearchIndex& index,
                     TaskPool& pool) {
    if (!qa.rubric || !qa.rubric->final_verdict) {
        throw std::invalid_argument("accept_and_mask: pair was not accepted by the rubric");
    }
    try {
        store.mask_source(qa.origin_url, qa.qa_id);
    } catch (const NoSuchPageError&) {
        // Pairs sharing an origin hit the ledger path; a URL that was never
        // stored at all is a pipeline bug.
        if (!store.is_masked(qa.origin_url)) throw;
    }
    index.remove(qa.origin_url);
    pool.add(qa);
}

std::string derive_summary(std::string_view markdown, std::size_t max_chars) {
    const auto sentences = split_sentences(markdown);
    std::string out;
    for (std::size_t i = 0; i < sentences.size() && i < 2; ++i) {
        if (!out.empty()) out += ' ';
        out += sentences[i];
    }
    return utf8_prefix(out, max_chars);
}

ExpandReport expand_corpus(const QAPair& qa, WebSearchClient& web_search,
                           FetcherClient& fetcher, CorpusStore& store, std::size_t n,
                           int iteration) {
    ExpandReport report;
    std::vector<SearchResultRef> results;
    try {
        results = web_search.web_search(qa.question, n);
    } catch (const std::exception&) {
        report.search_failed = true;
        return report;
    }

    std::vector<WebPage> candidates;
    for (const auto& ref : results) {
        if (store.is_masked(ref.url)) {
            ++report.masked_skipped;
            continue;
        }
        std::string markdown;
        try {
            markdown = fetcher.fetch(ref.url);
        } catch (const std::exception&) {
            ++report.fetch_failures;
            continue;
        }
        WebPage page;
        page.url = ref.url;
        page.title = ref.title;
        page.summary = derive_summary(markdown);
        page.content_markdown = std::move(markdown);
        page.source_tag = SourceTag::expansion;
        page.added_iteration = iteration;
        candidates.push_back(std::move(page));
    }
    report.ingest = store.ingest_pages(std::move(candidates));
    if (!results.empty() && report.ingest.accepted == 0 &&
        report.fetch_failures == results.size()) {
        report.search_failed = true;  // total failure downstream of the search
    }
    return report;
}

}  // namespace webgym
