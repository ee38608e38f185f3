#pragma once

#include "webgym/corpus_store.hpp"
#include "webgym/search_index.hpp"

#include <array>
#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

namespace webgym {

// Rendered tool output as the agent sees it. Errors are in-band text, never
// exceptions, so the policy can observe and react to them; `text` is never
// empty.
struct Observation {
    std::string text;
    bool ok = true;
    double latency_ms = 0.0;
};

// Query-conditioned page summarization. The default implementation is
// deterministic so trajectories are byte-reproducible; an LLM-backed client
// can be swapped in behind the same interface.
class Summarizer {
public:
    virtual ~Summarizer() = default;
    virtual std::string summarize(std::string_view content_markdown,
                                  std::string_view query,
                                  std::size_t sentence_budget) const = 0;
};

// Splits into sentences, scores each by the number of distinct normalized
// tokens shared with the query, keeps the top `sentence_budget` (ties by
// document position) and emits them in document order. With an empty query
// every score is zero and the leading sentences win.
class ExtractiveSummarizer final : public Summarizer {
public:
    std::string summarize(std::string_view content_markdown, std::string_view query,
                          std::size_t sentence_budget) const override;
};

inline constexpr std::array<double, 10> kLatencyBucketsMs = {1,  2,   5,   10,  20,
                                                             50, 100, 200, 500, 1000};

struct LatencyHistogram {
    std::array<std::uint64_t, kLatencyBucketsMs.size() + 1> counts{};  // last = overflow

    void record(double ms);
    std::uint64_t total() const;
    double percentile(double p) const;  // bucket upper bound estimate
};

struct MetricsSnapshot {
    std::uint64_t search_calls = 0;
    std::uint64_t browse_calls = 0;
    LatencyHistogram search_latency;
    LatencyHistogram browse_latency;
};

struct EpisodeToolCounts {
    std::uint64_t search_calls = 0;
    std::uint64_t browse_calls = 0;
};

struct GatewayConfig {
    std::size_t search_hits = 10;           // rendered result budget
    std::size_t browse_sentence_budget = 20;
};

struct ToolSearchResult {
    bool ok = false;
    std::string error;  // set when !ok
    std::vector<RankedHit> hits;
};

// The agent's two tools over the local index and store. Stateless across
// requests apart from counters: identical requests yield identical
// observation text at any concurrency level. A masked URL renders exactly
// like a never-stored one, so the agent cannot distinguish masking.
class ToolGateway {
public:
    ToolGateway(std::shared_ptr<CorpusStore> store, std::shared_ptr<SearchIndex> index,
                GatewayConfig config = {},
                std::shared_ptr<const Summarizer> summarizer = nullptr);

    Observation tool_search(const std::string& query, const std::string& episode_id = {});
    Observation tool_browse(const std::string& url, const std::string& query,
                            const std::string& episode_id = {});

    // Structured variant backing the HTTP endpoint; counts as a search call.
    ToolSearchResult search_structured(const std::string& query,
                                       const std::string& episode_id = {});

    MetricsSnapshot metrics_snapshot() const;
    EpisodeToolCounts episode_counts(const std::string& episode_id) const;

    const GatewayConfig& config() const { return config_; }

    static std::string render_hits(const std::vector<RankedHit>& hits);

private:
    void count_search(const std::string& episode_id, double ms);
    void count_browse(const std::string& episode_id, double ms);

    std::shared_ptr<CorpusStore> store_;
    std::shared_ptr<SearchIndex> index_;
    GatewayConfig config_;
    std::shared_ptr<const Summarizer> summarizer_;

    std::atomic<std::uint64_t> search_calls_{0};
    std::atomic<std::uint64_t> browse_calls_{0};
    std::array<std::atomic<std::uint64_t>, kLatencyBucketsMs.size() + 1> search_hist_{};
    std::array<std::atomic<std::uint64_t>, kLatencyBucketsMs.size() + 1> browse_hist_{};

    mutable std::mutex episode_mutex_;
    std::map<std::string, EpisodeToolCounts> per_episode_;
};

// Frozen observation strings; filter pipelines parse these.
inline constexpr std::string_view kObsInvalidQuery = "invalid query";
inline constexpr std::string_view kObsNoResults = "no results found";
inline constexpr std::string_view kObsPageNotFound = "page not found";
inline constexpr std::string_view kObsInvalidUrl = "invalid url";
inline constexpr std::string_view kObsSearchUnavailable = "search unavailable";

}  // namespace webgym
