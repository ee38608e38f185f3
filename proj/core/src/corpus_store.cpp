#include "webgym/corpus_store.hpp"

#include "webgym/hash.hpp"
#include "webgym/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <utility>

namespace webgym {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(SourceTag tag) {
    switch (tag) {
        case SourceTag::seed: return "seed";
        case SourceTag::expansion: return "expansion";
    }
    return "seed";
}

std::optional<SourceTag> source_tag_from_string(std::string_view s) {
    if (s == "seed") return SourceTag::seed;
    if (s == "expansion") return SourceTag::expansion;
    return std::nullopt;
}

std::string_view to_string(RejectReason reason) {
    switch (reason) {
        case RejectReason::duplicate_url: return "duplicate_url";
        case RejectReason::duplicate_hash: return "duplicate_hash";
        case RejectReason::too_short: return "too_short";
        case RejectReason::masked: return "masked";
        case RejectReason::malformed: return "malformed";
    }
    return "malformed";
}

std::size_t IngestReport::rejected_for(RejectReason reason) const {
    return static_cast<std::size_t>(
        std::count_if(rejects.begin(), rejects.end(),
                      [reason](const auto& r) { return r.second == reason; }));
}

std::string url_domain(std::string_view url) {
    auto pos = url.find("://");
    std::string_view rest = pos == std::string_view::npos ? url : url.substr(pos + 3);
    auto slash = rest.find('/');
    if (slash != std::string_view::npos) rest = rest.substr(0, slash);
    return to_lower(rest);
}

std::string CorpusStore::page_to_json(const WebPage& page) {
    json j;
    j["url"] = page.url;
    j["title"] = page.title;
    j["summary"] = page.summary;
    j["content_markdown"] = page.content_markdown;
    j["source_tag"] = std::string(to_string(page.source_tag));
    j["added_iteration"] = page.added_iteration;
    return j.dump();
}

std::optional<WebPage> CorpusStore::page_from_json(const std::string& line) {
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (!j.is_object()) return std::nullopt;
    WebPage page;
    page.url = j.value("url", "");
    page.title = j.value("title", "");
    page.summary = j.value("summary", "");
    page.content_markdown = j.value("content_markdown", "");
    page.added_iteration = j.value("added_iteration", 0);
    auto tag = source_tag_from_string(j.value("source_tag", "seed"));
    page.source_tag = tag.value_or(SourceTag::seed);
    return page;
}

CorpusStore::CorpusStore(const std::string& dir) : dir_(dir) {
    fs::create_directories(dir);
    load_from_disk();
}

void CorpusStore::load_from_disk() {
    // Ledger first: masked URLs must be rejected while replaying page files.
    const fs::path ledger_path = fs::path(dir_) / "mask_ledger.jsonl";
    if (fs::exists(ledger_path)) {
        std::ifstream in(ledger_path);
        std::string line;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            json j = json::parse(line, nullptr, false);
            if (!j.is_object() || !j.contains("url")) continue;
            MaskEntry entry;
            entry.url = j.value("url", "");
            entry.qa_id = j.value("qa_id", "");
            entry.timestamp = j.value("timestamp", std::int64_t{0});
            masked_.insert(entry.url);
            ledger_.push_back(std::move(entry));
        }
    }

    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir_)) {
        const auto name = e.path().filename().string();
        if (name.rfind("pages_iter_", 0) == 0 && e.path().extension() == ".jsonl") {
            files.push_back(e.path());
        }
    }
    std::sort(files.begin(), files.end());

    const std::string saved_dir = std::exchange(dir_, std::string{});  // no re-append
    for (const auto& f : files) {
        std::ifstream in(f);
        std::string line;
        std::vector<WebPage> batch;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            if (auto page = page_from_json(line)) batch.push_back(std::move(*page));
        }
        ingest_pages(std::move(batch));
    }
    dir_ = saved_dir;
}

IngestReport CorpusStore::ingest_pages(std::vector<WebPage> candidates) {
    IngestReport report;
    std::vector<const WebPage*> accepted;

    std::unique_lock lock(mutex_);
    for (auto& candidate : candidates) {
        if (candidate.url.empty() || candidate.content_markdown.empty()) {
            report.rejects.emplace_back(candidate.url, RejectReason::malformed);
            continue;
        }
        if (masked_.count(candidate.url) > 0) {
            report.rejects.emplace_back(candidate.url, RejectReason::masked);
            continue;
        }
        if (candidate.content_markdown.size() <= kMinContentChars) {
            report.rejects.emplace_back(candidate.url, RejectReason::too_short);
            continue;
        }
        if (pages_.count(candidate.url) > 0) {
            report.rejects.emplace_back(candidate.url, RejectReason::duplicate_url);
            continue;
        }
        candidate.content_hash = fnv1a64(candidate.content_markdown);
        if (by_hash_.count(candidate.content_hash) > 0) {
            report.rejects.emplace_back(candidate.url, RejectReason::duplicate_hash);
            continue;
        }
        by_hash_.emplace(candidate.content_hash, candidate.url);
        auto [it, inserted] = pages_.emplace(candidate.url, std::move(candidate));
        (void)inserted;
        accepted.push_back(&it->second);
        ++report.accepted;
    }
    report.rejected = report.rejects.size();

    if (!dir_.empty() && !accepted.empty()) append_pages_file(accepted);
    return report;
}

void CorpusStore::append_pages_file(const std::vector<const WebPage*>& pages) {
    // One file per iteration keeps expansion rounds separable on disk.
    std::map<int, std::vector<const WebPage*>> by_iter;
    for (const auto* p : pages) by_iter[p->added_iteration].push_back(p);
    for (const auto& [iter, group] : by_iter) {
        const fs::path path =
            fs::path(dir_) / ("pages_iter_" + std::to_string(iter) + ".jsonl");
        std::ofstream out(path, std::ios::app);
        if (!out) throw StorageError("cannot append to " + path.string());
        for (const auto* p : group) out << page_to_json(*p) << '\n';
        if (!out) throw StorageError("write failed on " + path.string());
    }
}

PageLookup CorpusStore::get_page(const std::string& url) const {
    std::shared_lock lock(mutex_);
    if (masked_.count(url) > 0) return {PageStatus::masked, std::nullopt};
    auto it = pages_.find(url);
    if (it == pages_.end()) return {PageStatus::not_found, std::nullopt};
    return {PageStatus::found, it->second};
}

MaskReceipt CorpusStore::mask_source(const std::string& url, const std::string& qa_id) {
    std::unique_lock lock(mutex_);
    if (masked_.count(url) > 0) return {url, qa_id, /*already_masked=*/true};
    auto it = pages_.find(url);
    if (it == pages_.end()) throw NoSuchPageError(url);

    by_hash_.erase(it->second.content_hash);
    pages_.erase(it);
    masked_.insert(url);
    MaskEntry entry{url, qa_id,
                    std::chrono::duration_cast<std::chrono::seconds>(
                        std::chrono::system_clock::now().time_since_epoch())
                        .count()};
    ledger_.push_back(entry);
    if (!dir_.empty()) append_ledger_file(entry);
    return {url, qa_id, /*already_masked=*/false};
}

void CorpusStore::append_ledger_file(const MaskEntry& entry) {
    const fs::path path = fs::path(dir_) / "mask_ledger.jsonl";
    std::ofstream out(path, std::ios::app);
    if (!out) throw StorageError("cannot append to " + path.string());
    json j;
    j["url"] = entry.url;
    j["qa_id"] = entry.qa_id;
    j["timestamp"] = entry.timestamp;
    out << j.dump() << '\n';
    if (!out) throw StorageError("write failed on " + path.string());
}

bool CorpusStore::is_masked(const std::string& url) const {
    std::shared_lock lock(mutex_);
    return masked_.count(url) > 0;
}

CorpusStats CorpusStore::stats() const {
    std::shared_lock lock(mutex_);
    CorpusStats s;
    s.total_pages = pages_.size();
    std::set<std::string> domains;
    for (const auto& [url, page] : pages_) {
        ++s.pages_per_iteration[page.added_iteration];
        domains.insert(url_domain(url));
    }
    s.unique_domains = domains.size();
    return s;
}

std::vector<MaskEntry> CorpusStore::mask_ledger() const {
    std::shared_lock lock(mutex_);
    return ledger_;
}

std::vector<std::string> CorpusStore::masked_urls() const {
    std::shared_lock lock(mutex_);
    return {masked_.begin(), masked_.end()};
}

std::vector<WebPage> CorpusStore::all_pages() const {
    std::shared_lock lock(mutex_);
    std::vector<WebPage> out;
    out.reserve(pages_.size());
    for (const auto& [url, page] : pages_) out.push_back(page);
    return out;
}

std::size_t CorpusStore::size() const {
    std::shared_lock lock(mutex_);
    return pages_.size();
}

void CorpusStore::compact() {
    std::unique_lock lock(mutex_);
    if (dir_.empty()) return;
    std::map<int, std::vector<const WebPage*>> by_iter;
    for (const auto& [url, page] : pages_) by_iter[page.added_iteration].push_back(&page);

    for (const auto& e : fs::directory_iterator(dir_)) {
        const auto name = e.path().filename().string();
        if (name.rfind("pages_iter_", 0) == 0) fs::remove(e.path());
    }
    for (const auto& [iter, group] : by_iter) {
        const fs::path path =
            fs::path(dir_) / ("pages_iter_" + std::to_string(iter) + ".jsonl");
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw StorageError("cannot rewrite " + path.string());
        for (const auto* p : group) out << page_to_json(*p) << '\n';
    }
}

}  // namespace webgym
