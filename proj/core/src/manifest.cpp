#include "webgym/manifest.hpp"

#include "webgym/corpus_store.hpp"
#include "webgym/hash.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>

namespace webgym {

namespace fs = std::filesystem;
using nlohmann::json;

std::string hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return "0";
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 14];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    return hex64(h);
}

std::string hash_directory(const std::string& dir) {
    if (!fs::is_directory(dir)) return "0";
    std::vector<std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& f : files) {
        h = mix64(h, fnv1a64(fs::path(f).filename().string()));
        std::uint64_t fh = 0;
        const std::string fhex = hash_file(f);
        for (char c : fhex) {
            fh = fh * 16 + static_cast<std::uint64_t>(
                               c <= '9' ? c - '0' : c - 'a' + 10);
        }
        h = mix64(h, fh);
    }
    return hex64(h);
}

std::string RunManifest::to_json() const {
    json j;
    j["corpus_hash"] = corpus_hash;
    j["index_hash"] = index_hash;
    j["task_pool_hash"] = task_pool_hash;
    j["stage_id"] = stage_id;
    j["trainer"] = {{"group_size", trainer.group_size},
                    {"batch_queries", trainer.batch_queries},
                    {"eps_low", trainer.eps_low},
                    {"eps_high", trainer.eps_high},
                    {"learning_rate", trainer.learning_rate},
                    {"tis_enabled", trainer.tis_enabled},
                    {"tis_upper", trainer.tis_upper},
                    {"tis_lower", trainer.tis_lower},
                    {"veto_threshold", trainer.veto_threshold},
                    {"minibatch_splits", trainer.minibatch_splits}};
    j["tool_calls"] = {{"search", search_calls}, {"browse", browse_calls}};
    return j.dump(2);
}

std::optional<RunManifest> RunManifest::from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (!j.is_object()) return std::nullopt;
    RunManifest m;
    m.corpus_hash = j.value("corpus_hash", "");
    m.index_hash = j.value("index_hash", "");
    m.task_pool_hash = j.value("task_pool_hash", "");
    m.stage_id = j.value("stage_id", 1);
    if (j.contains("trainer") && j["trainer"].is_object()) {
        const auto& t = j["trainer"];
        m.trainer.group_size = t.value("group_size", 8);
        m.trainer.batch_queries = t.value("batch_queries", 128);
        m.trainer.eps_low = t.value("eps_low", 0.2);
        m.trainer.eps_high = t.value("eps_high", 0.28);
        m.trainer.learning_rate = t.value("learning_rate", 1e-6);
        m.trainer.tis_enabled = t.value("tis_enabled", true);
        m.trainer.tis_upper = t.value("tis_upper", 2.0);
        m.trainer.tis_lower = t.value("tis_lower", 0.5);
        m.trainer.veto_threshold = t.value("veto_threshold", 1e-4);
        m.trainer.minibatch_splits = t.value("minibatch_splits", 1);
    }
    if (j.contains("tool_calls") && j["tool_calls"].is_object()) {
        m.search_calls = j["tool_calls"].value("search", std::uint64_t{0});
        m.browse_calls = j["tool_calls"].value("browse", std::uint64_t{0});
    }
    return m;
}

void RunManifest::save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw StorageError("cannot write manifest " + path);
    out << to_json() << '\n';
}

RunManifest RunManifest::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StorageError("cannot open manifest " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    auto m = from_json(text);
    if (!m) throw std::runtime_error("malformed manifest: " + path);
    return *m;
}

std::vector<std::string> verify_manifest(const RunManifest& manifest,
                                         const std::string& corpus_dir,
                                         const std::string& index_path,
                                         const std::string& task_pool_path) {
    std::vector<std::string> mismatches;
    if (!manifest.corpus_hash.empty() &&
        manifest.corpus_hash != hash_directory(corpus_dir)) {
        mismatches.push_back("corpus hash mismatch");
    }
    if (!manifest.index_hash.empty() && manifest.index_hash != hash_file(index_path)) {
        mismatches.push_back("index hash mismatch");
    }
    if (!manifest.task_pool_hash.empty() &&
        manifest.task_pool_hash != hash_file(task_pool_path)) {
        mismatches.push_back("task pool hash mismatch");
    }
    return mismatches;
}

}  // namespace webgym
