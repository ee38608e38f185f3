#pragma once

#include "webgym/grpo.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace webgym {

// Ties a run's artifacts together: content hashes of the corpus directory,
// index file and task pool, the stage id, the trainer config snapshot, and
// tool-call totals. Hashes are recomputed and verified at load.
struct RunManifest {
    std::string corpus_hash;
    std::string index_hash;
    std::string task_pool_hash;
    int stage_id = 1;
    TrainerConfig trainer;
    std::uint64_t search_calls = 0;
    std::uint64_t browse_calls = 0;

    std::string to_json() const;
    static std::optional<RunManifest> from_json(const std::string& text);

    void save(const std::string& path) const;
    static RunManifest load(const std::string& path);
};

// FNV-1a over a file's bytes, "0" for a missing path.
std::string hash_file(const std::string& path);

// Order-independent combined hash over every regular file in a directory.
std::string hash_directory(const std::string& dir);

// Mismatch descriptions, empty when everything checks out.
std::vector<std::string> verify_manifest(const RunManifest& manifest,
                                         const std::string& corpus_dir,
                                         const std::string& index_path,
                                         const std::string& task_pool_path);

}  // namespace webgym
