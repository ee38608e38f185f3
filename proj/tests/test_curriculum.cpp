#include "webgym/curriculum.hpp"

#include "webgym/toy_env.hpp"

#include <doctest.h>

#include <cmath>
#include <map>

using namespace webgym;

namespace {

struct EmptyWorld {
    std::shared_ptr<CorpusStore> store = std::make_shared<CorpusStore>();
    std::unique_ptr<ToolGateway> gateway =
        std::make_unique<ToolGateway>(store, nullptr);
};

EpisodeConfig quick_episode() {
    EpisodeConfig cfg;
    cfg.max_turns = 4;
    cfg.context_budget_tokens = 1u << 20;
    return cfg;
}

}  // namespace

TEST_SUITE("curriculum") {

TEST_CASE("verdict rule enumerated over c = 0..8") {
    for (int c = 0; c <= 8; ++c) {
        DifficultyRecord r;
        r.k = 8;
        r.correct_count = c;
        r.verdict = c == 8   ? DifficultyVerdict::trivial
                    : c == 0 ? DifficultyVerdict::impossible
                             : DifficultyVerdict::keep;
        const auto kept = filter_pool({r});
        if (c >= 1 && c <= 7) {
            CHECK(kept.size() == 1);
        } else {
            CHECK(kept.empty());
        }
    }
}

TEST_CASE("assess_difficulty counts correct rollouts deterministically") {
    EmptyWorld world;
    const auto cfg = quick_episode();

    auto three_of_eight = scripted_success_factory("gold", {0, 3, 6});
    auto record = assess_difficulty("q1", "question?", "gold", three_of_eight,
                                    *world.gateway, nullptr, cfg, 8);
    CHECK(record.correct_count == 3);
    CHECK(record.verdict == DifficultyVerdict::keep);

    auto always = scripted_success_factory("gold", {0, 1, 2, 3, 4, 5, 6, 7});
    CHECK(assess_difficulty("q2", "question?", "gold", always, *world.gateway, nullptr,
                            cfg, 8)
              .verdict == DifficultyVerdict::trivial);

    auto never = scripted_success_factory("gold", {});
    CHECK(assess_difficulty("q3", "question?", "gold", never, *world.gateway, nullptr,
                            cfg, 8)
              .verdict == DifficultyVerdict::impossible);

    // Reproducibility: identical c across repeat runs.
    auto again = assess_difficulty("q1", "question?", "gold", three_of_eight,
                                   *world.gateway, nullptr, cfg, 8);
    CHECK(again.correct_count == record.correct_count);
}

TEST_CASE("policy errors score as incorrect and are flagged") {
    EmptyWorld world;
    auto factory = [](std::uint64_t seed) -> std::unique_ptr<PolicyClient> {
        struct Broken final : PolicyClient {
            PolicyResponse generate(const std::string&) override {
                throw std::runtime_error("down");
            }
        };
        if (seed < 2) return std::make_unique<Broken>();
        return std::make_unique<ScriptedPolicy>(
            std::vector<std::string>{"<think>r</think><answer>gold</answer>"});
    };
    auto record = assess_difficulty("q", "question?", "gold", factory, *world.gateway,
                                    nullptr, quick_episode(), 8);
    CHECK(record.correct_count == 6);
    REQUIRE(record.flags.size() == 2);
    CHECK(record.flags[0] == "policy_error@0");
}

TEST_CASE("filter_pool preserves input order") {
    std::vector<DifficultyRecord> records;
    for (int c : {0, 1, 4, 7, 8}) {
        DifficultyRecord r;
        r.query_id = "c" + std::to_string(c);
        r.k = 8;
        r.correct_count = c;
        records.push_back(r);
    }
    const auto kept = filter_pool(records);
    CHECK(kept == std::vector<std::string>{"c1", "c4", "c7"});
    CHECK(filter_pool({}).empty());
}

TEST_CASE("stochastic retention matches the binomial prediction") {
    // P(1 <= Bin(8, 0.5) <= 7) = 1 - 2 * 0.5^8 = 0.9921875. With 600 queries
    // the 99% CI half-width is 2.576*sqrt(p(1-p)/600) ~ 0.0093.
    EmptyWorld world;
    const auto cfg = quick_episode();
    int kept = 0;
    const int n = 600;
    for (int q = 0; q < n; ++q) {
        auto factory = scripted_bernoulli_factory("gold", 0.5,
                                                  static_cast<std::uint64_t>(q) * 977);
        auto record = assess_difficulty("q" + std::to_string(q), "question?", "gold",
                                        factory, *world.gateway, nullptr, cfg, 8);
        if (record.verdict == DifficultyVerdict::keep) ++kept;
    }
    const double p = 0.9921875;
    const double half_width = 2.576 * std::sqrt(p * (1 - p) / n);
    const double retention = static_cast<double>(kept) / n;
    CHECK(retention >= p - half_width);
    CHECK(retention <= p + half_width);
}

TEST_CASE("stage schedule: +16384 tokens per stage, turns never decrease") {
    StageConfig stage1;
    stage1.mixture = {{"synthetic", 0.734}, {"multihop", 0.266}};
    stage1.validate();
    auto stage2 = stage1.next_stage({{"synthetic", 0.686},
                                     {"multihop", 0.203},
                                     {"science", 0.111}});
    CHECK(stage2.stage_id == 2);
    CHECK(stage2.max_response_tokens == stage1.max_response_tokens + 16384);
    CHECK(stage2.max_turns == 60);
    CHECK(stage2.temperature == doctest::Approx(1.0));
    auto stage3 = stage2.next_stage();
    CHECK(stage3.max_response_tokens == stage2.max_response_tokens + 16384);
    CHECK(stage3.max_turns >= stage2.max_turns);
}

TEST_CASE("stage mixture must sum to one") {
    StageConfig stage;
    stage.mixture = {{"synthetic", 0.8}, {"multihop", 0.3}};
    CHECK_THROWS_AS(stage.validate(), std::invalid_argument);
}

TEST_CASE("sample_batch tracks the stage mixture in expectation") {
    std::vector<CurriculumQuery> pool;
    for (int i = 0; i < 50; ++i) {
        pool.push_back({"s" + std::to_string(i), "q", "a", "synthetic"});
        pool.push_back({"m" + std::to_string(i), "q", "a", "multihop"});
    }
    StageConfig stage;
    stage.mixture = {{"synthetic", 0.734}, {"multihop", 0.266}};
    std::mt19937_64 rng(42);
    std::size_t synthetic = 0, total = 0;
    for (int b = 0; b < 100; ++b) {
        for (const auto& q : sample_batch(pool, stage, rng, 128)) {
            synthetic += q.source == "synthetic" ? 1 : 0;
            ++total;
        }
    }
    const double fraction = static_cast<double>(synthetic) / static_cast<double>(total);
    CHECK(fraction == doctest::Approx(0.734).epsilon(0.07));  // within +-0.05 absolute
    CHECK(std::abs(fraction - 0.734) <= 0.05);
}

TEST_CASE("sample_batch: single source, determinism, renormalization") {
    std::vector<CurriculumQuery> pool = {{"a", "q", "g", "synthetic"},
                                         {"b", "q", "g", "synthetic"}};
    StageConfig stage;
    stage.mixture = {{"synthetic", 0.7}, {"multihop", 0.3}};

    std::mt19937_64 rng1(7), rng2(7);
    auto batch1 = sample_batch(pool, stage, rng1, 32);
    auto batch2 = sample_batch(pool, stage, rng2, 32);
    REQUIRE(batch1.size() == 32);
    for (std::size_t i = 0; i < batch1.size(); ++i) {
        CHECK(batch1[i].query_id == batch2[i].query_id);  // same seed, same batch
        CHECK(batch1[i].source == "synthetic");  // empty multihop pool renormalized away
    }

    CHECK_THROWS_AS(sample_batch({}, stage, rng1, 8), std::invalid_argument);
}

TEST_CASE("difficulty report jsonl round trip") {
    DifficultyRecord r;
    r.query_id = "qx";
    r.k = 8;
    r.correct_count = 5;
    r.verdict = DifficultyVerdict::keep;
    r.flags = {"judge_flagged@2"};
    auto parsed = difficulty_record_from_json(difficulty_record_to_json(r));
    REQUIRE(parsed.has_value());
    CHECK(parsed->query_id == "qx");
    CHECK(parsed->correct_count == 5);
    CHECK(parsed->verdict == DifficultyVerdict::keep);
    REQUIRE(parsed->flags.size() == 1);
}

}  // TEST_SUITE
