#include "webgym/toy_env.hpp"

#include "webgym/reward_judge.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <limits>

using namespace webgym;

namespace {

EpisodeConfig episode_config(int max_turns) {
    EpisodeConfig cfg;
    cfg.max_turns = max_turns;
    cfg.context_budget_tokens = 1u << 20;
    return cfg;
}

}  // namespace

TEST_SUITE("toy_env") {

TEST_CASE("generation is deterministic down to the bytes") {
    ToyEnvParams params;
    params.n_tasks = 20;
    params.hop_depth_weights = {{1, 0.5}, {2, 0.3}, {3, 0.2}};
    const auto a = generate_env(params, 99);
    const auto b = generate_env(params, 99);
    REQUIRE(a.pages.size() == b.pages.size());
    for (std::size_t i = 0; i < a.pages.size(); ++i) {
        CHECK(a.pages[i].url == b.pages[i].url);
        CHECK(a.pages[i].content_markdown == b.pages[i].content_markdown);
    }
    const auto c = generate_env(params, 100);
    CHECK(a.pages[0].content_markdown != c.pages[0].content_markdown);
}

TEST_CASE("every generated page satisfies the store invariants") {
    ToyEnvParams params;
    params.n_tasks = 30;
    params.hop_depth_weights = {{1, 0.4}, {2, 0.4}, {3, 0.2}};
    const auto env = generate_env(params, 7);
    CorpusStore store;
    auto report = store.ingest_pages(env.pages);
    CHECK(report.accepted == env.pages.size());
    CHECK(report.rejected == 0);
}

TEST_CASE("the scripted oracle solves every task in hop_depth + 1 tool calls") {
    ToyEnvParams params;
    params.n_tasks = 100;
    params.hop_depth_weights = {{1, 0.4}, {2, 0.4}, {3, 0.2}};
    const auto env = generate_env(params, 17);
    const auto world = make_world(env);
    for (const auto& task : env.tasks) {
        const auto script = oracle_script(task);
        // search + depth browses + answer.
        CHECK(script.size() == static_cast<std::size_t>(task.hop_depth) + 2);
        ScriptedPolicy policy(script);
        auto traj = run_episode(task.question, task.query_id, policy, *world.gateway,
                                episode_config(10));
        CHECK(judge(task.question, task.gold, traj.final_answer).reward == 1);
    }
}

TEST_CASE("a depth-1 script cannot solve a depth-3 task") {
    ToyEnvParams params;
    params.n_tasks = 10;
    params.hop_depth_weights = {{3, 1.0}};
    const auto env = generate_env(params, 4);
    const auto world = make_world(env);
    const auto& task = env.tasks[0];
    PlantedTask shallow = task;
    shallow.chain_urls.resize(1);  // only browses the head
    ScriptedPolicy policy(oracle_script(shallow));
    auto traj = run_episode(task.question, task.query_id, policy, *world.gateway,
                            episode_config(10));
    CHECK(judge(task.question, task.gold, traj.final_answer).reward == 0);
}

TEST_CASE("the trainable agent follows states to the planted fact when greedy-optimal") {
    ToyEnvParams params;
    params.n_tasks = 5;
    params.hop_depth_weights = {{2, 1.0}};
    const auto env = generate_env(params, 12);
    const auto world = make_world(env);

    // Hand-build an optimal tabular policy: search at start, follow results
    // and pointers, answer on the fact page.
    ToyPolicy policy(kToyStates, kToyActions);
    std::vector<double> params_vec(policy.param_count(), 0.0);
    for (int turn = 0; turn < kToyTurnBuckets; ++turn) {
        auto boost = [&](int category, int action) {
            params_vec[static_cast<std::size_t>(toy_state(turn, category)) *
                           kToyActions +
                       static_cast<std::size_t>(action)] = 10.0;
        };
        boost(kObsStart, kActSearch);
        boost(kObsResults, kActBrowseNext);
        boost(kObsPointer, kActBrowseNext);
        boost(kObsFact, kActAnswer);
        boost(kObsDead, kActSearch);
    }
    policy.set_params(params_vec);

    for (const auto& task : env.tasks) {
        ToyAgentPolicy agent(task.question, policy, 1, /*greedy=*/true);
        auto traj = run_episode(task.question, task.query_id, agent, *world.gateway,
                                episode_config(6));
        CHECK(judge(task.question, task.gold, traj.final_answer).reward == 1);
        CHECK(traj.steps.size() == 4);  // search, browse, browse, answer
    }
}

TEST_CASE("ablation arms share the query stream and initial parameters") {
    ToyTrainParams params;
    params.steps = 6;
    params.queries_per_step = 3;
    params.rollouts_per_query = 4;
    params.learning_rate = 5.0;
    params.env.n_tasks = 10;
    params.env.distractor_pages = 5;
    params.trainer.group_size = 4;
    std::vector<std::uint64_t> seeds = {1};

    // offpolicy with m = 1 must equal the on-policy arm exactly.
    auto curves = run_ablation({parse_arm("onpolicy"), parse_arm("offpolicy:1")}, seeds,
                               params);
    std::vector<double> on, off;
    for (const auto& p : curves) {
        (p.arm == "onpolicy" ? on : off).push_back(p.mean_reward);
    }
    REQUIRE(on.size() == off.size());
    for (std::size_t i = 0; i < on.size(); ++i) CHECK(on[i] == off[i]);
}

TEST_CASE("parse_arm understands the spec strings") {
    CHECK(parse_arm("onpolicy").minibatch_splits == 1);
    CHECK(parse_arm("offpolicy:4").minibatch_splits == 4);
    CHECK(parse_arm("offpolicy").minibatch_splits == 4);
    CHECK_THROWS_AS(parse_arm("sideways"), std::invalid_argument);
}

TEST_CASE("rise_step finds the first sustained gain") {
    std::vector<double> flat(20, 0.1);
    CHECK(rise_step(flat) == std::numeric_limits<int>::max());
    std::vector<double> rising = {0.1, 0.1, 0.1, 0.1, 0.1, 0.1,
                                  0.3, 0.3, 0.3, 0.3, 0.3};
    const int step = rise_step(rising);
    CHECK(step > 4);
    CHECK(step <= 10);
}

TEST_CASE("trailing_slope is zero on a plateau and positive on growth") {
    std::vector<double> plateau(40, 0.8);
    CHECK(trailing_slope(plateau, 30) == doctest::Approx(0.0));
    std::vector<double> growth;
    for (int i = 0; i < 40; ++i) growth.push_back(0.01 * i);
    CHECK(trailing_slope(growth, 30) == doctest::Approx(0.01));
    CHECK(trailing_slope({1.0}, 30) == std::numeric_limits<double>::infinity());
}

TEST_CASE("curves csv has the expected header and rows") {
    namespace fs = std::filesystem;
    const auto path = (fs::temp_directory_path() / "webgym-curves-test.csv").string();
    write_curves_csv(path, {{0, "onpolicy", 1, 0.5}, {1, "onpolicy", 1, 0.75}});
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "step,arm,seed,mean_reward");
    std::getline(in, line);
    CHECK(line == "0,onpolicy,1,0.5");
    fs::remove(path);
}

}  // TEST_SUITE
