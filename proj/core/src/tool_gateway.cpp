#include "webgym/tool_gateway.hpp"

#include "webgym/text.hpp"

#include <algorithm>
#include <chrono>
#include <set>
#include <sstream>

namespace webgym {

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                     start)
        .count();
}

bool url_well_formed(const std::string& url) {
    if (url.empty()) return false;
    if (url.find("://") == std::string::npos) return false;
    return url.find_first_of(" \t\n\r") == std::string::npos;
}

void record_bucket(std::array<std::atomic<std::uint64_t>, kLatencyBucketsMs.size() + 1>& hist,
                   double ms) {
    std::size_t i = 0;
    while (i < kLatencyBucketsMs.size() && ms > kLatencyBucketsMs[i]) ++i;
    hist[i].fetch_add(1, std::memory_order_relaxed);
}

}  // namespace

std::string ExtractiveSummarizer::summarize(std::string_view content_markdown,
                                            std::string_view query,
                                            std::size_t sentence_budget) const {
    const auto sentences = split_sentences(content_markdown);
    if (sentences.empty() || sentence_budget == 0) return "";

    auto query_tokens_vec = tokenize(query);
    std::set<std::string> query_tokens(query_tokens_vec.begin(), query_tokens_vec.end());

    struct Scored {
        std::size_t pos;
        std::size_t score;
    };
    std::vector<Scored> scored;
    scored.reserve(sentences.size());
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        auto toks = tokenize(sentences[i]);
        std::set<std::string> uniq(toks.begin(), toks.end());
        std::size_t shared = 0;
        for (const auto& t : uniq) shared += query_tokens.count(t);
        scored.push_back({i, shared});
    }
    std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        return a.score > b.score;  // stable: ties keep document position order
    });
    if (scored.size() > sentence_budget) scored.resize(sentence_budget);
    std::sort(scored.begin(), scored.end(),
              [](const Scored& a, const Scored& b) { return a.pos < b.pos; });

    std::string out;
    for (const auto& s : scored) {
        if (!out.empty()) out += ' ';
        out += sentences[s.pos];
    }
    return out;
}

void LatencyHistogram::record(double ms) {
    std::size_t i = 0;
    while (i < kLatencyBucketsMs.size() && ms > kLatencyBucketsMs[i]) ++i;
    ++counts[i];
}

std::uint64_t LatencyHistogram::total() const {
    std::uint64_t n = 0;
    for (auto c : counts) n += c;
    return n;
}

double LatencyHistogram::percentile(double p) const {
    const std::uint64_t n = total();
    if (n == 0) return 0.0;
    const auto target = static_cast<std::uint64_t>(p * static_cast<double>(n));
    std::uint64_t seen = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        seen += counts[i];
        if (seen > target) {
            return i < kLatencyBucketsMs.size() ? kLatencyBucketsMs[i]
                                                : kLatencyBucketsMs.back() * 2.0;
        }
    }
    return kLatencyBucketsMs.back() * 2.0;
}

ToolGateway::ToolGateway(std::shared_ptr<CorpusStore> store,
                         std::shared_ptr<SearchIndex> index, GatewayConfig config,
                         std::shared_ptr<const Summarizer> summarizer)
    : store_(std::move(store)),
      index_(std::move(index)),
      config_(config),
      summarizer_(summarizer ? std::move(summarizer)
                             : std::make_shared<ExtractiveSummarizer>()) {}

std::string ToolGateway::render_hits(const std::vector<RankedHit>& hits) {
    std::ostringstream out;
    for (std::size_t i = 0; i < hits.size(); ++i) {
        if (i > 0) out << '\n';
        out << hits[i].rank << ". " << hits[i].title << " — " << hits[i].url << " — "
            << hits[i].snippet;
    }
    return out.str();
}

ToolSearchResult ToolGateway::search_structured(const std::string& query,
                                                const std::string& episode_id) {
    const auto start = std::chrono::steady_clock::now();
    ToolSearchResult result;
    if (trim(query).empty()) {
        result.ok = false;
        result.error = std::string(kObsInvalidQuery);
    } else if (!index_) {
        result.ok = false;
        result.error = std::string(kObsSearchUnavailable);
    } else {
        result.ok = true;
        result.hits = index_->hybrid_search(query, config_.search_hits);
    }
    count_search(episode_id, elapsed_ms(start));
    return result;
}

Observation ToolGateway::tool_search(const std::string& query,
                                     const std::string& episode_id) {
    const auto start = std::chrono::steady_clock::now();
    auto result = search_structured(query, episode_id);
    Observation obs;
    obs.ok = result.ok;
    if (!result.ok) {
        obs.text = result.error;
    } else if (result.hits.empty()) {
        obs.text = std::string(kObsNoResults);
    } else {
        obs.text = render_hits(result.hits);
    }
    obs.latency_ms = elapsed_ms(start);
    return obs;
}

Observation ToolGateway::tool_browse(const std::string& url, const std::string& query,
                                     const std::string& episode_id) {
    const auto start = std::chrono::steady_clock::now();
    Observation obs;
    if (!url_well_formed(url)) {
        obs.ok = false;
        obs.text = std::string(kObsInvalidUrl);
    } else {
        // Masked and never-stored pages render identically on purpose.
        const auto lookup = store_->get_page(url);
        if (lookup.status != PageStatus::found) {
            obs.ok = false;
            obs.text = std::string(kObsPageNotFound);
        } else {
            obs.ok = true;
            obs.text = summarizer_->summarize(lookup.page->content_markdown, query,
                                              config_.browse_sentence_budget);
            if (obs.text.empty()) obs.text = "(empty page)";
        }
    }
    obs.latency_ms = elapsed_ms(start);
    count_browse(episode_id, obs.latency_ms);
    return obs;
}

void ToolGateway::count_search(const std::string& episode_id, double ms) {
    search_calls_.fetch_add(1, std::memory_order_relaxed);
    record_bucket(search_hist_, ms);
    if (!episode_id.empty()) {
        std::lock_guard lock(episode_mutex_);
        ++per_episode_[episode_id].search_calls;
    }
}

void ToolGateway::count_browse(const std::string& episode_id, double ms) {
    browse_calls_.fetch_add(1, std::memory_order_relaxed);
    record_bucket(browse_hist_, ms);
    if (!episode_id.empty()) {
        std::lock_guard lock(episode_mutex_);
        ++per_episode_[episode_id].browse_calls;
    }
}

MetricsSnapshot ToolGateway::metrics_snapshot() const {
    MetricsSnapshot snap;
    snap.search_calls = search_calls_.load(std::memory_order_relaxed);
    snap.browse_calls = browse_calls_.load(std::memory_order_relaxed);
    for (std::size_t i = 0; i < search_hist_.size(); ++i) {
        snap.search_latency.counts[i] = search_hist_[i].load(std::memory_order_relaxed);
        snap.browse_latency.counts[i] = browse_hist_[i].load(std::memory_order_relaxed);
    }
    return snap;
}

EpisodeToolCounts ToolGateway::episode_counts(const std::string& episode_id) const {
    std::lock_guard lock(episode_mutex_);
    auto it = per_episode_.find(episode_id);
    return it == per_episode_.end() ? EpisodeToolCounts{} : it->second;
}

}  // namespace webgym
