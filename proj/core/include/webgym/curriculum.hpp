#pragma once

#include "webgym/episode.hpp"
#include "webgym/reward_judge.hpp"

#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace webgym {

enum class DifficultyVerdict { trivial, keep, impossible };

std::string_view to_string(DifficultyVerdict v);

// pass@K outcome for one query: keep iff 1 <= c <= K-1; c == K is trivial,
// c == 0 impossible.
struct DifficultyRecord {
    std::string query_id;
    int k = 8;
    int correct_count = 0;
    DifficultyVerdict verdict = DifficultyVerdict::impossible;
    std::vector<std::string> flags;  // policy errors, judge parse failures
};

std::string difficulty_record_to_json(const DifficultyRecord& record);
std::optional<DifficultyRecord> difficulty_record_from_json(const std::string& line);

// One training phase: budgets, sampling temperature and the data mixture.
// Budgets strictly increase across stages (+16384 response tokens per stage);
// max_turns never decreases.
struct StageConfig {
    int stage_id = 1;
    std::size_t max_response_tokens = 32768;
    int max_turns = 40;
    double temperature = 0.7;
    std::map<std::string, double> mixture;  // source tag -> weight, sums to 1

    void validate() const;
    StageConfig next_stage(std::map<std::string, double> next_mixture = {}) const;
};

// Runs K independent rollouts (seeds 0..K-1 through the factory), judges
// each, and counts c. Episodes ending in policy_error score as incorrect and
// are flagged.
DifficultyRecord assess_difficulty(const std::string& query_id,
                                   const std::string& question, const std::string& gold,
                                   const PolicyFactory& make_policy,
                                   ToolGateway& gateway, JudgeClient* judge_client,
                                   const EpisodeConfig& episode_config, int k = 8);

// keep iff 1 <= c <= K-1, input order preserved.
std::vector<std::string> filter_pool(const std::vector<DifficultyRecord>& records);

struct CurriculumQuery {
    std::string query_id;
    std::string question;
    std::string gold;
    std::string source;  // mixture key, e.g. "synthetic" / "multihop" / "science"
};

// Draws `batch_size` queries so expected source proportions match the stage
// mixture (with replacement within a source). Mixture entries whose source
// has no pool entries are renormalized away with a warning on stderr. Fully
// deterministic under a seeded rng.
std::vector<CurriculumQuery> sample_batch(const std::vector<CurriculumQuery>& pool,
                                          const StageConfig& stage,
                                          std::mt19937_64& rng, std::size_t batch_size);

}  // namespace webgym
