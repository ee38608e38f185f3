#pragma once

#include "webgym/corpus_store.hpp"
#include "webgym/embedder.hpp"

#include <cstddef>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <vector>

namespace webgym {

struct IndexConfig {
    std::size_t fusion_depth = 100;  // candidate depth per list fed into RRF
    double rrf_kappa = 60.0;
    double bm25_k1 = 1.2;
    double bm25_b = 0.75;
};

// One retrieval record per page: a unit-norm dense vector plus a sparse
// term->weight map, both computed over "title. summary". Full page content is
// never embedded.
struct PageVector {
    std::string url;
    std::vector<double> dense;
    std::map<std::string, double> sparse;
};

struct ScoredDoc {
    std::string url;
    double score = 0.0;
};

struct RankedHit {
    std::string url;
    std::string title;
    std::string snippet;  // first 200 characters of the summary
    double fused_score = 0.0;
    int rank = 0;  // 1-based, consecutive
};

struct BuildReport {
    std::size_t indexed = 0;
    std::vector<std::string> skipped_urls;  // embedder failures, build continued
};

// Page-level hybrid index: exact (brute-force) dense search over the stored
// vectors plus a BM25 inverted index standing in for a learned sparse scorer,
// fused at query time by reciprocal rank fusion. Sparse weights are
// precomputed per-document impact scores, so scoring a query is a plain dot
// product against query terms, the same interface a learned-sparse model
// would plug into.
//
// Every ranking is deterministic: scores sort descending with ties broken by
// ascending URL, and entries are kept in URL order so results do not depend
// on insertion order. remove() tombstones an entry (corpus-wide BM25
// statistics are refreshed on rebuild, not on removal). Queries take a shared
// lock and may run fully concurrently; remove() is the single writer.
class SearchIndex {
public:
    SearchIndex() = default;
    SearchIndex(SearchIndex&&) noexcept;
    SearchIndex& operator=(SearchIndex&&) noexcept;

    // Precondition: `pages` deduplicated by URL (duplicate -> invalid_argument).
    // An embedder failure skips that page and records it in the report.
    static SearchIndex build(const std::vector<WebPage>& pages,
                             std::shared_ptr<const Embedder> embedder,
                             IndexConfig config = {}, BuildReport* report = nullptr);

    // Rebuilds over the live entries plus `pages`, recomputing corpus-wide
    // statistics. Re-adding a previously removed URL makes it retrievable
    // again.
    void add_pages(const std::vector<WebPage>& pages, BuildReport* report = nullptr);

    // Exactly min(k, size()) results by cosine similarity. k == 0 is an error.
    std::vector<ScoredDoc> dense_search(const std::string& query, std::size_t k) const;

    // Lexical ranking over title+summary tokens; queries with no
    // in-vocabulary term return an empty list. k == 0 is an error.
    std::vector<ScoredDoc> sparse_search(const std::string& query, std::size_t k) const;

    // RRF fusion of the dense and sparse candidate lists, each of depth
    // max(k, fusion_depth): fused(d) = sum over lists containing d of
    // 1/(kappa + rank_in_list(d)).
    std::vector<RankedHit> hybrid_search(const std::string& query, std::size_t k) const;

    // Idempotent; the URL never appears in later results.
    void remove(const std::string& url);

    std::size_t size() const;  // live entries
    const IndexConfig& config() const { return config_; }

    PageVector page_vector(const std::string& url) const;  // throws if absent

    // Versioned JSONL sidecar: a magic header line, then one entry per page.
    void save(const std::string& path) const;
    static SearchIndex load(const std::string& path,
                            std::shared_ptr<const Embedder> embedder);

private:
    struct Entry {
        std::string url;
        std::string title;
        std::string summary;
        std::vector<double> dense;
        std::map<std::string, double> sparse;
        std::size_t length = 0;  // token count of "title. summary"
        bool removed = false;
    };

    static SearchIndex build_impl(std::vector<Entry> raw, IndexConfig config,
                                  std::shared_ptr<const Embedder> embedder,
                                  BuildReport* report);
    void rebuild_postings();
    std::vector<ScoredDoc> dense_search_locked(const std::string& query,
                                               std::size_t k) const;
    std::vector<ScoredDoc> sparse_search_locked(const std::string& query,
                                                std::size_t k) const;

    mutable std::shared_mutex mutex_;
    std::vector<Entry> entries_;  // sorted by url
    std::map<std::string, std::size_t> by_url_;
    std::map<std::string, std::vector<std::pair<std::size_t, double>>> postings_;
    IndexConfig config_;
    std::shared_ptr<const Embedder> embedder_;
};

inline constexpr std::size_t kSnippetChars = 200;

}  // namespace webgym
