#include "webgym/curriculum.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

namespace webgym {

using nlohmann::json;

std::string_view to_string(DifficultyVerdict v) {
    switch (v) {
        case DifficultyVerdict::trivial: return "trivial";
        case DifficultyVerdict::keep: return "keep";
        case DifficultyVerdict::impossible: return "impossible";
    }
    return "impossible";
}

std::string difficulty_record_to_json(const DifficultyRecord& record) {
    json j;
    j["query_id"] = record.query_id;
    j["c"] = record.correct_count;
    j["verdict"] = std::string(to_string(record.verdict));
    j["flags"] = record.flags;
    return j.dump();
}

std::optional<DifficultyRecord> difficulty_record_from_json(const std::string& line) {
    json j = json::parse(line, nullptr, false);
    if (!j.is_object()) return std::nullopt;
    DifficultyRecord r;
    r.query_id = j.value("query_id", "");
    r.correct_count = j.value("c", 0);
    const std::string v = j.value("verdict", "impossible");
    r.verdict = v == "trivial"  ? DifficultyVerdict::trivial
                : v == "keep"   ? DifficultyVerdict::keep
                                : DifficultyVerdict::impossible;
    if (j.contains("flags")) r.flags = j["flags"].get<std::vector<std::string>>();
    return r;
}

void StageConfig::validate() const {
    if (stage_id < 1) throw std::invalid_argument("stage_id must be >= 1");
    if (max_response_tokens == 0 || max_turns <= 0) {
        throw std::invalid_argument("stage budgets must be positive");
    }
    if (!mixture.empty()) {
        double sum = 0.0;
        for (const auto& [source, w] : mixture) {
            if (w < 0.0) throw std::invalid_argument("mixture weight < 0 for " + source);
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw std::invalid_argument("mixture weights must sum to 1");
        }
    }
}

StageConfig StageConfig::next_stage(std::map<std::string, double> next_mixture) const {
    StageConfig next = *this;
    next.stage_id = stage_id + 1;
    next.max_response_tokens = max_response_tokens + 16384;
    next.max_turns = std::max(max_turns, stage_id == 1 ? 60 : max_turns);
    next.temperature = stage_id == 1 ? 1.0 : temperature;
    if (!next_mixture.empty()) next.mixture = std::move(next_mixture);
    next.validate();
    return next;
}

DifficultyRecord assess_difficulty(const std::string& query_id,
                                   const std::string& question, const std::string& gold,
                                   const PolicyFactory& make_policy,
                                   ToolGateway& gateway, JudgeClient* judge_client,
                                   const EpisodeConfig& episode_config, int k) {
    if (k < 1) throw std::invalid_argument("assess_difficulty: k must be >= 1");
    DifficultyRecord record;
    record.query_id = query_id;
    record.k = k;
    for (int rollout = 0; rollout < k; ++rollout) {
        auto policy = make_policy(static_cast<std::uint64_t>(rollout));
        const std::string episode_id = query_id + "#" + std::to_string(rollout);
        Trajectory traj = run_episode(question, episode_id, *policy, gateway,
                                      episode_config);
        if (traj.termination == Termination::policy_error) {
            // Conservative: infrastructure noise never labels a query solvable.
            record.flags.push_back("policy_error@" + std::to_string(rollout));
            continue;
        }
        auto outcome = judge(question, gold, traj.final_answer, judge_client);
        if (outcome.flagged) {
            record.flags.push_back("judge_flagged@" + std::to_string(rollout));
        }
        record.correct_count += outcome.reward;
    }
    record.verdict = record.correct_count == k   ? DifficultyVerdict::trivial
                     : record.correct_count == 0 ? DifficultyVerdict::impossible
                                                 : DifficultyVerdict::keep;
    return record;
}

std::vector<std::string> filter_pool(const std::vector<DifficultyRecord>& records) {
    std::vector<std::string> kept;
    for (const auto& r : records) {
        if (r.correct_count >= 1 && r.correct_count <= r.k - 1) {
            kept.push_back(r.query_id);
        }
    }
    return kept;
}

std::vector<CurriculumQuery> sample_batch(const std::vector<CurriculumQuery>& pool,
                                          const StageConfig& stage,
                                          std::mt19937_64& rng, std::size_t batch_size) {
    stage.validate();
    std::map<std::string, std::vector<const CurriculumQuery*>> by_source;
    for (const auto& q : pool) by_source[q.source].push_back(&q);

    // Renormalize over sources that actually have entries.
    std::vector<std::pair<std::string, double>> weights;
    double total = 0.0;
    for (const auto& [source, weight] : stage.mixture) {
        auto it = by_source.find(source);
        if (it == by_source.end() || it->second.empty()) {
            std::cerr << "warning: mixture source '" << source
                      << "' has an empty pool; renormalizing\n";
            continue;
        }
        weights.emplace_back(source, weight);
        total += weight;
    }
    if (weights.empty() || total <= 0.0) {
        throw std::invalid_argument("sample_batch: no mixture source has pool entries");
    }

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<CurriculumQuery> batch;
    batch.reserve(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) {
        double u = unit(rng) * total;
        std::size_t pick = 0;
        for (; pick + 1 < weights.size(); ++pick) {
            if (u < weights[pick].second) break;
            u -= weights[pick].second;
        }
        const auto& candidates = by_source[weights[pick].first];
        std::uniform_int_distribution<std::size_t> idx(0, candidates.size() - 1);
        batch.push_back(*candidates[idx(rng)]);
    }
    return batch;
}

}  // namespace webgym
