#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace webgym {

enum class SourceTag { seed, expansion };

std::string_view to_string(SourceTag tag);
std::optional<SourceTag> source_tag_from_string(std::string_view s);

// A corpus document. `content_hash` is always recomputed from
// `content_markdown` at ingest; values arriving from disk are not trusted.
struct WebPage {
    std::string url;
    std::string title;
    std::string summary;
    std::string content_markdown;
    std::uint64_t content_hash = 0;
    SourceTag source_tag = SourceTag::seed;
    int added_iteration = 0;
};

enum class RejectReason {
    duplicate_url,
    duplicate_hash,
    too_short,
    masked,
    malformed,
};

std::string_view to_string(RejectReason reason);

struct IngestReport {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    bool flagged = false;  // set by callers batching failures upstream
    std::vector<std::pair<std::string, RejectReason>> rejects;

    std::size_t rejected_for(RejectReason reason) const;
};

struct MaskEntry {
    std::string url;
    std::string qa_id;
    std::int64_t timestamp = 0;  // unix seconds
};

struct MaskReceipt {
    std::string url;
    std::string qa_id;
    bool already_masked = false;
};

struct CorpusStats {
    std::size_t total_pages = 0;
    std::map<int, std::size_t> pages_per_iteration;
    std::size_t unique_domains = 0;
};

enum class PageStatus { found, not_found, masked };

struct PageLookup {
    PageStatus status = PageStatus::not_found;
    std::optional<WebPage> page;  // present iff status == found
};

struct NoSuchPageError : std::runtime_error {
    explicit NoSuchPageError(const std::string& url)
        : std::runtime_error("no such page: " + url) {}
};

// Raised on I/O failure while appending to the backing files; the batch can be
// retried, previously accepted records are unaffected.
struct StorageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Minimum content length, exclusive: pages must carry more than this many
// characters of markdown.
inline constexpr std::size_t kMinContentChars = 1000;

// URL-keyed webpage store with URL- and content-hash deduplication, length
// filtering and a mask ledger. Backed by one append-only JSONL file per
// expansion iteration plus the ledger; everything is rebuilt into memory at
// startup. Reads take a shared lock; ingest and mask serialize through an
// exclusive lock, so readers never observe a partially applied batch.
class CorpusStore {
public:
    // In-memory store, nothing persisted.
    CorpusStore() = default;

    // Opens (or creates) a persistent store rooted at `dir`. The ledger is
    // replayed before the page files, so previously masked URLs are rejected
    // on the way back in.
    explicit CorpusStore(const std::string& dir);

    CorpusStore(const CorpusStore&) = delete;
    CorpusStore& operator=(const CorpusStore&) = delete;

    IngestReport ingest_pages(std::vector<WebPage> candidates);

    PageLookup get_page(const std::string& url) const;

    // Removes the page and records (url, qa_id) in the ledger. Idempotent:
    // masking an already-masked URL succeeds with no state change. A URL that
    // was never stored raises NoSuchPageError.
    MaskReceipt mask_source(const std::string& url, const std::string& qa_id);

    bool is_masked(const std::string& url) const;

    CorpusStats stats() const;

    std::vector<MaskEntry> mask_ledger() const;
    std::vector<std::string> masked_urls() const;

    // Snapshot of all live pages, sorted by URL.
    std::vector<WebPage> all_pages() const;

    std::size_t size() const;

    // Rewrites the page files without masked or superseded records. No-op for
    // in-memory stores.
    void compact();

    static std::string page_to_json(const WebPage& page);
    static std::optional<WebPage> page_from_json(const std::string& line);

private:
    void append_pages_file(const std::vector<const WebPage*>& pages);
    void append_ledger_file(const MaskEntry& entry);
    void load_from_disk();

    mutable std::shared_mutex mutex_;
    std::map<std::string, WebPage> pages_;                    // url -> page
    std::unordered_map<std::uint64_t, std::string> by_hash_;  // content hash -> url
    std::unordered_set<std::string> masked_;
    std::vector<MaskEntry> ledger_;
    std::string dir_;  // empty for in-memory stores
};

// Host part of a URL ("scheme://host/path" -> "host"), lowercased. Used for
// the unique-domain statistic.
std::string url_domain(std::string_view url);

}  // namespace webgym
