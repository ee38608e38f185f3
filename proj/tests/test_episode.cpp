#include "webgym/episode.hpp"

#include "webgym/toy_env.hpp"

#include <doctest.h>

#include <memory>
#include <random>

using namespace webgym;

namespace {

struct GatewayFixture {
    std::shared_ptr<CorpusStore> store = std::make_shared<CorpusStore>();
    std::shared_ptr<SearchIndex> index;
    std::unique_ptr<ToolGateway> gateway;

    GatewayFixture() {
        WebPage p;
        p.url = "https://fix.example/fact";
        p.title = "krakenfact ledger";
        p.summary = "notes on the krakenfact ledger entry";
        p.content_markdown = "The planted value for krakenfact is 7731.";
        while (p.content_markdown.size() <= kMinContentChars) {
            p.content_markdown += " Padding sentence about archives.";
        }
        store->ingest_pages({p});
        index = std::make_shared<SearchIndex>(
            SearchIndex::build(store->all_pages(), std::make_shared<HashingEmbedder>(32)));
        gateway = std::make_unique<ToolGateway>(store, index);
    }
};

EpisodeConfig small_config(int max_turns = 40) {
    EpisodeConfig cfg;
    cfg.max_turns = max_turns;
    cfg.context_budget_tokens = 1u << 20;
    return cfg;
}

// Always throws: exercises the policy transport failure path.
struct BrokenPolicy final : PolicyClient {
    PolicyResponse generate(const std::string&) override {
        throw std::runtime_error("transport down");
    }
};

}  // namespace

TEST_SUITE("episode") {

TEST_CASE("parse_message: search call with a preceding thought") {
    auto [thought, action] = parse_message(
        "<think>need population</think><tool_call>{\"name\":\"search\",\"arguments\":"
        "{\"query\":\"global population 2025\"}}</tool_call>");
    CHECK(thought == "need population");
    CHECK(action.kind == ActionKind::search);
    CHECK(action.query == "global population 2025");
}

TEST_CASE("parse_message: answers, with and without a thought") {
    auto [thought, action] = parse_message("<think>done</think><answer>42</answer>");
    CHECK(thought == "done");
    CHECK(action.kind == ActionKind::answer);
    CHECK(action.text == "42");

    auto [t2, a2] = parse_message("<answer> 42 </answer>");
    CHECK(t2.empty());
    CHECK(a2.kind == ActionKind::answer);
    CHECK(a2.text == " 42 ");  // raw content, untrimmed
}

TEST_CASE("parse_message: invalid variants") {
    auto missing_thought = parse_message(
        "<tool_call>{\"name\":\"search\",\"arguments\":{\"query\":\"x\"}}</tool_call>");
    CHECK(missing_thought.second.kind == ActionKind::invalid);
    CHECK(missing_thought.second.reason == "missing_thought");

    auto think_after = parse_message(
        "<tool_call>{\"name\":\"search\",\"arguments\":{\"query\":\"x\"}}</tool_call>"
        "<think>late</think>");
    CHECK(think_after.second.reason == "missing_thought");

    auto malformed = parse_message("<think>t</think><tool_call>{broken json</tool_call>");
    CHECK(malformed.second.reason == "malformed_call");

    auto unknown = parse_message(
        "<think>t</think><tool_call>{\"name\":\"calculator\",\"arguments\":{}}"
        "</tool_call>");
    CHECK(unknown.second.reason == "unknown_tool");

    auto nothing = parse_message("<think>just musing</think> no action follows");
    CHECK(nothing.second.reason == "missing_action");

    auto dangling = parse_message("<think>t</think><answer>unclosed");
    CHECK(dangling.second.reason == "malformed_call");
}

TEST_CASE("parse_message ignores blocks nested inside the think text") {
    auto [thought, action] = parse_message(
        "<think>I could emit <tool_call>fake</tool_call> later</think>"
        "<answer>real</answer>");
    CHECK(thought == "I could emit <tool_call>fake</tool_call> later");
    CHECK(action.kind == ActionKind::answer);
    CHECK(action.text == "real");
}

TEST_CASE("round trip: parse(render(action)) is the identity on actions") {
    std::mt19937_64 rng(17);
    const std::vector<std::string> queries = {
        "plain words", "with \"quotes\" inside", "unicode \xE4\xB8\xAD text",
        "braces {and} [brackets]", ""};
    const std::vector<std::string> urls = {"https://a.example/x?id=1&b=2",
                                           "https://b.example/path/deep"};
    for (int trial = 0; trial < 200; ++trial) {
        Action action;
        switch (rng() % 3) {
            case 0:
                action.kind = ActionKind::search;
                action.query = queries[rng() % queries.size()];
                break;
            case 1:
                action.kind = ActionKind::browse;
                action.query = queries[rng() % queries.size()];
                action.url = urls[rng() % urls.size()];
                break;
            default:
                action.kind = ActionKind::answer;
                action.text = queries[rng() % queries.size()];
                break;
        }
        const auto [thought, parsed] = parse_message(render_message("why not", action));
        CHECK(thought == "why not");
        CHECK(parsed.kind == action.kind);
        CHECK(parsed.query == action.query);
        CHECK(parsed.url == action.url);
        CHECK(parsed.text == action.text);
    }
}

TEST_CASE("run_episode: immediate answer terminates after one step") {
    GatewayFixture f;
    ScriptedPolicy policy({"<think>recall</think><answer>7731</answer>"});
    auto traj = run_episode("question", "ep", policy, *f.gateway, small_config());
    CHECK(traj.termination == Termination::answered);
    REQUIRE(traj.steps.size() == 1);
    REQUIRE(traj.final_answer.has_value());
    CHECK(*traj.final_answer == "7731");
}

TEST_CASE("run_episode: max_turns budget is enforced") {
    GatewayFixture f;
    std::vector<std::string> endless(
        41, "<think>again</think><tool_call>{\"name\":\"search\",\"arguments\":"
            "{\"query\":\"krakenfact\"}}</tool_call>");
    ScriptedPolicy policy(endless, endless[0]);
    auto traj = run_episode("question", "ep", policy, *f.gateway, small_config(40));
    CHECK(traj.termination == Termination::max_turns);
    CHECK(traj.steps.size() == 40);
    CHECK_FALSE(traj.final_answer.has_value());
}

TEST_CASE("run_episode: search then answer against the fixture corpus") {
    GatewayFixture f;
    ScriptedPolicy policy({
        "<think>find the page</think><tool_call>{\"name\":\"search\",\"arguments\":"
        "{\"query\":\"krakenfact ledger\"}}</tool_call>",
        "<think>open it</think><tool_call>{\"name\":\"browse\",\"arguments\":"
        "{\"url\":\"https://fix.example/fact\",\"query\":\"planted value\"}}"
        "</tool_call>",
        "<think>got it</think><answer>7731</answer>",
    });
    auto traj = run_episode("what is the planted value for krakenfact?", "ep", policy,
                            *f.gateway, small_config());
    CHECK(traj.termination == Termination::answered);
    REQUIRE(traj.steps.size() == 3);
    CHECK(traj.steps[0].observation.rfind("1. krakenfact ledger — ", 0) == 0);
    CHECK(traj.steps[1].observation.find("7731") != std::string::npos);
    CHECK(*traj.final_answer == "7731");
}

TEST_CASE("invalid actions consume turns; three in a row end the episode") {
    GatewayFixture f;
    ScriptedPolicy policy({"gibberish", "more gibberish", "still gibberish"});
    auto traj = run_episode("q", "ep", policy, *f.gateway, small_config());
    CHECK(traj.termination == Termination::policy_error);
    REQUIRE(traj.steps.size() == 3);
    CHECK(traj.steps[0].observation == "invalid action format: missing_action");
    CHECK_FALSE(traj.steps[0].observation_ok);
}

TEST_CASE("one invalid action does not abort the episode") {
    GatewayFixture f;
    ScriptedPolicy policy({"gibberish", "<think>ok</think><answer>x</answer>"});
    auto traj = run_episode("q", "ep", policy, *f.gateway, small_config());
    CHECK(traj.termination == Termination::answered);
    CHECK(traj.steps.size() == 2);
}

TEST_CASE("policy transport failure terminates as policy_error") {
    GatewayFixture f;
    BrokenPolicy policy;
    auto traj = run_episode("q", "ep", policy, *f.gateway, small_config());
    CHECK(traj.termination == Termination::policy_error);
    CHECK(traj.steps.empty());
}

TEST_CASE("compress_history: oldest observation first, others intact") {
    EpisodeConfig cfg;
    cfg.memory_enabled = true;
    Action search;
    search.kind = ActionKind::search;
    search.query = "q";
    std::vector<Step> steps(3);
    for (auto& s : steps) {
        s.thought = "t";
        s.action = search;
        s.observation = "First sentence here. Second sentence padding words follow.";
    }
    const auto full = approx_token_count(render_history("q", steps));
    cfg.context_budget_tokens = full - 4;  // over budget by roughly one tail

    auto result = compress_history("q", steps, cfg);
    CHECK(result.under_budget);
    CHECK(result.compressed_steps == 1);
    CHECK(steps[0].observation == "First sentence here.");
    CHECK(steps[1].observation ==
          "First sentence here. Second sentence padding words follow.");
    CHECK(steps[0].compressed);
    CHECK_FALSE(steps[1].compressed);
}

TEST_CASE("compress_history: under budget is a no-op") {
    EpisodeConfig cfg;
    cfg.memory_enabled = true;
    cfg.context_budget_tokens = 1u << 20;
    Action search;
    search.kind = ActionKind::search;
    std::vector<Step> steps(2);
    steps[0].observation = "One. Two.";
    steps[1].observation = "Three. Four.";
    auto before = steps;
    auto result = compress_history("q", steps, cfg);
    CHECK(result.under_budget);
    CHECK(result.compressed_steps == 0);
    CHECK(steps[0].observation == before[0].observation);
}

TEST_CASE("full compression still over budget ends in context_overflow") {
    GatewayFixture f;
    EpisodeConfig cfg = small_config();
    cfg.memory_enabled = true;
    cfg.context_budget_tokens = 8;  // nothing fits
    std::vector<std::string> script(
        5, "<think>again</think><tool_call>{\"name\":\"search\",\"arguments\":"
           "{\"query\":\"krakenfact ledger notes\"}}</tool_call>");
    ScriptedPolicy policy(script, script[0]);
    auto traj = run_episode("q", "ep", policy, *f.gateway, cfg);
    CHECK(traj.termination == Termination::context_overflow);
}

TEST_CASE("memory disabled: overflow terminates without compression") {
    GatewayFixture f;
    EpisodeConfig cfg = small_config();
    cfg.memory_enabled = false;
    cfg.context_budget_tokens = 10;
    std::vector<std::string> script(
        3, "<think>s</think><tool_call>{\"name\":\"search\",\"arguments\":"
           "{\"query\":\"krakenfact ledger entry notes words\"}}</tool_call>");
    ScriptedPolicy policy(script, script[0]);
    auto traj = run_episode("q", "ep", policy, *f.gateway, cfg);
    CHECK(traj.termination == Termination::context_overflow);
}

TEST_CASE("replaying recorded actions reproduces observations byte-for-byte") {
    GatewayFixture f;
    ScriptedPolicy policy({
        "<think>find</think><tool_call>{\"name\":\"search\",\"arguments\":"
        "{\"query\":\"krakenfact\"}}</tool_call>",
        "<think>open</think><tool_call>{\"name\":\"browse\",\"arguments\":"
        "{\"url\":\"https://fix.example/fact\",\"query\":\"value\"}}</tool_call>",
        "<think>answer</think><answer>7731</answer>",
    });
    auto first = run_episode("q", "ep-a", policy, *f.gateway, small_config());

    std::vector<std::string> replay_script;
    for (const auto& step : first.steps) {
        replay_script.push_back(render_message(step.thought, step.action));
    }
    ScriptedPolicy replayed(replay_script);
    auto second = run_episode("q", "ep-b", replayed, *f.gateway, small_config());
    REQUIRE(second.steps.size() == first.steps.size());
    for (std::size_t i = 0; i < first.steps.size(); ++i) {
        CHECK(second.steps[i].observation == first.steps[i].observation);
    }
}

TEST_CASE("tool steps in the trajectory match the gateway's episode counters") {
    GatewayFixture f;
    ScriptedPolicy policy({
        "<think>a</think><tool_call>{\"name\":\"search\",\"arguments\":{\"query\":"
        "\"one\"}}</tool_call>",
        "<think>b</think><tool_call>{\"name\":\"search\",\"arguments\":{\"query\":"
        "\"two\"}}</tool_call>",
        "<think>c</think><tool_call>{\"name\":\"browse\",\"arguments\":{\"url\":"
        "\"https://fix.example/fact\",\"query\":\"x\"}}</tool_call>",
        "<think>d</think><answer>done</answer>",
    });
    auto traj = run_episode("q", "ep-counted", policy, *f.gateway, small_config());
    std::size_t searches = 0, browses = 0;
    for (const auto& s : traj.steps) {
        searches += s.action.kind == ActionKind::search ? 1 : 0;
        browses += s.action.kind == ActionKind::browse ? 1 : 0;
    }
    auto counts = f.gateway->episode_counts("ep-counted");
    CHECK(counts.search_calls == searches);
    CHECK(counts.browse_calls == browses);
}

TEST_CASE("trajectory json round trip preserves the schema fields") {
    GatewayFixture f;
    ScriptedPolicy policy({
        "<think>s</think><tool_call>{\"name\":\"search\",\"arguments\":{\"query\":"
        "\"krakenfact\"}}</tool_call>",
        "<think>done</think><answer>7731</answer>",
    });
    auto traj = run_episode("the question", "qid-9", policy, *f.gateway, small_config());
    const auto line = trajectory_to_json(traj);
    auto parsed = trajectory_from_json(line);
    REQUIRE(parsed.has_value());
    CHECK(parsed->query_id == traj.query_id);
    CHECK(parsed->question == traj.question);
    CHECK(parsed->final_answer == traj.final_answer);
    CHECK(parsed->termination == traj.termination);
    CHECK(parsed->total_tokens == traj.total_tokens);
    REQUIRE(parsed->steps.size() == traj.steps.size());
    for (std::size_t i = 0; i < traj.steps.size(); ++i) {
        CHECK(parsed->steps[i].thought == traj.steps[i].thought);
        CHECK(parsed->steps[i].observation == traj.steps[i].observation);
        CHECK(parsed->steps[i].action.kind == traj.steps[i].action.kind);
    }
    CHECK(trajectory_to_json(*parsed) == line);
}

}  // TEST_SUITE
