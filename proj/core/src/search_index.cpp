#include "webgym/search_index.hpp"

#include "webgym/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace webgym {

using nlohmann::json;

namespace {

constexpr const char* kIndexMagic = "webgym-index";
constexpr int kIndexVersion = 1;

std::string embed_text(const std::string& title, const std::string& summary) {
    return title + ". " + summary;
}

// (score desc, url asc) over the scored set; ranks are positions in this order.
void sort_scored(std::vector<ScoredDoc>& docs) {
    std::sort(docs.begin(), docs.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.url < b.url;
    });
}

}  // namespace

SearchIndex::SearchIndex(SearchIndex&& other) noexcept {
    *this = std::move(other);
}

SearchIndex& SearchIndex::operator=(SearchIndex&& other) noexcept {
    if (this != &other) {
        std::unique_lock lhs(mutex_, std::defer_lock);
        std::unique_lock rhs(other.mutex_, std::defer_lock);
        std::lock(lhs, rhs);
        entries_ = std::move(other.entries_);
        by_url_ = std::move(other.by_url_);
        postings_ = std::move(other.postings_);
        config_ = other.config_;
        embedder_ = std::move(other.embedder_);
    }
    return *this;
}

SearchIndex SearchIndex::build(const std::vector<WebPage>& pages,
                               std::shared_ptr<const Embedder> embedder,
                               IndexConfig config, BuildReport* report) {
    if (!embedder) throw std::invalid_argument("build_index: null embedder");
    std::set<std::string> seen;
    for (const auto& p : pages) {
        if (!seen.insert(p.url).second) {
            throw std::invalid_argument("build_index: duplicate url in input: " + p.url);
        }
    }
    std::vector<Entry> raw;
    raw.reserve(pages.size());
    for (const auto& p : pages) {
        Entry e;
        e.url = p.url;
        e.title = p.title;
        e.summary = p.summary;
        raw.push_back(std::move(e));
    }
    return build_impl(std::move(raw), config, std::move(embedder), report);
}

SearchIndex SearchIndex::build_impl(std::vector<Entry> raw, IndexConfig config,
                                    std::shared_ptr<const Embedder> embedder,
                                    BuildReport* report) {
    SearchIndex index;
    index.config_ = config;
    index.embedder_ = std::move(embedder);

    // URL order everywhere makes rankings independent of insertion order.
    std::sort(raw.begin(), raw.end(),
              [](const Entry& a, const Entry& b) { return a.url < b.url; });

    std::vector<Entry> entries;
    entries.reserve(raw.size());
    for (auto& e : raw) {
        const std::string text = embed_text(e.title, e.summary);
        try {
            e.dense = index.embedder_->embed(text);
        } catch (const std::exception&) {
            if (report) report->skipped_urls.push_back(e.url);
            continue;
        }
        e.length = tokenize(text).size();
        entries.push_back(std::move(e));
    }

    // BM25 statistics over the indexed set; per-document impact weights are
    // frozen here so query scoring is a dot product against query terms.
    const std::size_t n_docs = entries.size();
    double total_len = 0.0;
    std::unordered_map<std::string, std::size_t> df;
    std::vector<std::unordered_map<std::string, std::size_t>> tfs(n_docs);
    for (std::size_t i = 0; i < n_docs; ++i) {
        const auto tokens = tokenize(embed_text(entries[i].title, entries[i].summary));
        total_len += static_cast<double>(tokens.size());
        for (const auto& t : tokens) ++tfs[i][t];
        for (const auto& [t, tf] : tfs[i]) ++df[t];
    }
    const double avgdl = n_docs > 0 ? total_len / static_cast<double>(n_docs) : 0.0;
    const double k1 = config.bm25_k1;
    const double b = config.bm25_b;
    for (std::size_t i = 0; i < n_docs; ++i) {
        const double dl = static_cast<double>(entries[i].length);
        const double len_norm = avgdl > 0.0 ? k1 * (1.0 - b + b * dl / avgdl) : k1;
        for (const auto& [t, tf_raw] : tfs[i]) {
            const double tf = static_cast<double>(tf_raw);
            const double n_t = static_cast<double>(df[t]);
            const double idf =
                std::log(1.0 + (static_cast<double>(n_docs) - n_t + 0.5) / (n_t + 0.5));
            entries[i].sparse[t] = idf * (tf * (k1 + 1.0)) / (tf + len_norm);
        }
    }

    index.entries_ = std::move(entries);
    for (std::size_t i = 0; i < index.entries_.size(); ++i) {
        index.by_url_[index.entries_[i].url] = i;
    }
    index.rebuild_postings();
    if (report) report->indexed = index.entries_.size();
    return index;
}

void SearchIndex::rebuild_postings() {
    postings_.clear();
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].removed) continue;
        for (const auto& [term, weight] : entries_[i].sparse) {
            postings_[term].emplace_back(i, weight);
        }
    }
}

void SearchIndex::add_pages(const std::vector<WebPage>& pages, BuildReport* report) {
    std::unique_lock lock(mutex_);
    std::vector<Entry> raw;
    for (const auto& e : entries_) {
        if (e.removed) continue;
        Entry copy;
        copy.url = e.url;
        copy.title = e.title;
        copy.summary = e.summary;
        raw.push_back(std::move(copy));
    }
    std::set<std::string> seen;
    for (const auto& e : raw) seen.insert(e.url);
    for (const auto& p : pages) {
        if (!seen.insert(p.url).second) {
            throw std::invalid_argument("add_pages: duplicate url: " + p.url);
        }
        Entry e;
        e.url = p.url;
        e.title = p.title;
        e.summary = p.summary;
        raw.push_back(std::move(e));
    }
    SearchIndex rebuilt = build_impl(std::move(raw), config_, embedder_, report);
    entries_ = std::move(rebuilt.entries_);
    by_url_ = std::move(rebuilt.by_url_);
    postings_ = std::move(rebuilt.postings_);
}

std::vector<ScoredDoc> SearchIndex::dense_search(const std::string& query,
                                                 std::size_t k) const {
    std::shared_lock lock(mutex_);
    return dense_search_locked(query, k);
}

std::vector<ScoredDoc> SearchIndex::dense_search_locked(const std::string& query,
                                                        std::size_t k) const {
    if (k == 0) throw std::invalid_argument("dense_search: k must be positive");
    const auto q = embedder_->embed(query);
    std::vector<ScoredDoc> scored;
    scored.reserve(entries_.size());
    for (const auto& e : entries_) {
        if (e.removed) continue;
        double dot = 0.0;
        for (std::size_t d = 0; d < q.size(); ++d) dot += q[d] * e.dense[d];
        scored.push_back({e.url, dot});
    }
    sort_scored(scored);
    if (scored.size() > k) scored.resize(k);
    return scored;
}

std::vector<ScoredDoc> SearchIndex::sparse_search(const std::string& query,
                                                  std::size_t k) const {
    std::shared_lock lock(mutex_);
    return sparse_search_locked(query, k);
}

std::vector<ScoredDoc> SearchIndex::sparse_search_locked(const std::string& query,
                                                         std::size_t k) const {
    if (k == 0) throw std::invalid_argument("sparse_search: k must be positive");
    auto tokens = tokenize(query);
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());

    std::map<std::size_t, double> acc;  // entry idx -> score, idx order fixed
    for (const auto& t : tokens) {
        auto it = postings_.find(t);
        if (it == postings_.end()) continue;
        for (const auto& [idx, weight] : it->second) {
            if (entries_[idx].removed) continue;
            acc[idx] += weight;
        }
    }
    std::vector<ScoredDoc> scored;
    scored.reserve(acc.size());
    for (const auto& [idx, score] : acc) scored.push_back({entries_[idx].url, score});
    sort_scored(scored);
    if (scored.size() > k) scored.resize(k);
    return scored;
}

std::vector<RankedHit> SearchIndex::hybrid_search(const std::string& query,
                                                  std::size_t k) const {
    std::shared_lock lock(mutex_);
    if (k == 0) throw std::invalid_argument("hybrid_search: k must be positive");
    const std::size_t depth = std::max(k, config_.fusion_depth);
    const auto dense = dense_search_locked(query, depth);
    const auto sparse = sparse_search_locked(query, depth);

    std::map<std::string, double> fused;
    for (std::size_t i = 0; i < dense.size(); ++i) {
        fused[dense[i].url] += 1.0 / (config_.rrf_kappa + static_cast<double>(i + 1));
    }
    for (std::size_t i = 0; i < sparse.size(); ++i) {
        fused[sparse[i].url] += 1.0 / (config_.rrf_kappa + static_cast<double>(i + 1));
    }

    std::vector<ScoredDoc> scored;
    scored.reserve(fused.size());
    for (const auto& [url, score] : fused) scored.push_back({url, score});
    sort_scored(scored);
    if (scored.size() > k) scored.resize(k);

    std::vector<RankedHit> hits;
    hits.reserve(scored.size());
    for (std::size_t i = 0; i < scored.size(); ++i) {
        const auto& e = entries_[by_url_.at(scored[i].url)];
        hits.push_back({e.url, e.title, utf8_prefix(e.summary, kSnippetChars),
                        scored[i].score, static_cast<int>(i + 1)});
    }
    return hits;
}

void SearchIndex::remove(const std::string& url) {
    std::unique_lock lock(mutex_);
    auto it = by_url_.find(url);
    if (it == by_url_.end()) return;
    entries_[it->second].removed = true;
    by_url_.erase(it);
}

std::size_t SearchIndex::size() const {
    std::shared_lock lock(mutex_);
    return by_url_.size();
}

PageVector SearchIndex::page_vector(const std::string& url) const {
    std::shared_lock lock(mutex_);
    auto it = by_url_.find(url);
    if (it == by_url_.end()) throw std::invalid_argument("page_vector: unknown url " + url);
    const auto& e = entries_[it->second];
    return {e.url, e.dense, e.sparse};
}

void SearchIndex::save(const std::string& path) const {
    std::shared_lock lock(mutex_);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw StorageError("cannot write index file " + path);
    json header;
    header["magic"] = kIndexMagic;
    header["version"] = kIndexVersion;
    header["dim"] = embedder_ ? embedder_->dim() : 0;
    header["fusion_depth"] = config_.fusion_depth;
    header["rrf_kappa"] = config_.rrf_kappa;
    header["bm25_k1"] = config_.bm25_k1;
    header["bm25_b"] = config_.bm25_b;
    out << header.dump() << '\n';
    for (const auto& e : entries_) {
        if (e.removed) continue;
        json j;
        j["url"] = e.url;
        j["title"] = e.title;
        j["summary"] = e.summary;
        j["dense"] = e.dense;
        j["sparse"] = e.sparse;
        j["length"] = e.length;
        out << j.dump() << '\n';
    }
    if (!out) throw StorageError("write failed on index file " + path);
}

SearchIndex SearchIndex::load(const std::string& path,
                              std::shared_ptr<const Embedder> embedder) {
    if (!embedder) throw std::invalid_argument("load: null embedder");
    std::ifstream in(path);
    if (!in) throw StorageError("cannot open index file " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("index file empty: " + path);
    json header = json::parse(line);
    if (header.value("magic", "") != kIndexMagic) {
        throw std::runtime_error("index file has wrong magic: " + path);
    }
    if (header.value("version", 0) != kIndexVersion) {
        throw std::runtime_error("unsupported index version in " + path);
    }
    if (header.value("dim", std::size_t{0}) != embedder->dim()) {
        throw std::runtime_error("index dim does not match embedder dim");
    }

    SearchIndex index;
    index.config_.fusion_depth = header.value("fusion_depth", std::size_t{100});
    index.config_.rrf_kappa = header.value("rrf_kappa", 60.0);
    index.config_.bm25_k1 = header.value("bm25_k1", 1.2);
    index.config_.bm25_b = header.value("bm25_b", 0.75);
    index.embedder_ = std::move(embedder);

    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        json j = json::parse(line);
        Entry e;
        e.url = j.at("url").get<std::string>();
        e.title = j.value("title", "");
        e.summary = j.value("summary", "");
        e.dense = j.at("dense").get<std::vector<double>>();
        e.sparse = j.at("sparse").get<std::map<std::string, double>>();
        e.length = j.value("length", std::size_t{0});
        if (e.dense.size() != index.embedder_->dim()) {
            throw std::runtime_error("index entry dim mismatch for " + e.url);
        }
        index.entries_.push_back(std::move(e));
    }
    std::sort(index.entries_.begin(), index.entries_.end(),
              [](const Entry& a, const Entry& b) { return a.url < b.url; });
    for (std::size_t i = 0; i < index.entries_.size(); ++i) {
        index.by_url_[index.entries_[i].url] = i;
    }
    index.rebuild_postings();
    return index;
}

}  // namespace webgym
