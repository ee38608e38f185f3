#include "webgym/toy_env.hpp"
#include "webgym/tool_gateway.hpp"

#include <doctest.h>

#include <atomic>
#include <thread>
#include <vector>

using namespace webgym;

namespace {

struct Request {
    bool is_search = true;
    std::string query;
    std::string url;
};

// Fixed per-thread request scripts so the concurrent and sequential runs
// issue byte-identical workloads.
std::vector<std::vector<Request>> make_scripts(const ToyEnv& env, int threads,
                                               int per_thread) {
    std::vector<std::vector<Request>> scripts(static_cast<std::size_t>(threads));
    std::mt19937_64 rng(404);
    std::uniform_int_distribution<std::size_t> task_dist(0, env.tasks.size() - 1);
    for (auto& script : scripts) {
        for (int i = 0; i < per_thread; ++i) {
            const auto& task = env.tasks[task_dist(rng)];
            Request r;
            if (rng() % 2 == 0) {
                r.is_search = true;
                r.query = task.question;
            } else {
                r.is_search = false;
                r.url = task.chain_urls[rng() % task.chain_urls.size()];
                r.query = task.question;
            }
            script.push_back(std::move(r));
        }
    }
    return scripts;
}

std::vector<std::vector<std::string>> run_sequential(
    ToolGateway& gateway, const std::vector<std::vector<Request>>& scripts) {
    std::vector<std::vector<std::string>> out(scripts.size());
    for (std::size_t t = 0; t < scripts.size(); ++t) {
        for (const auto& r : scripts[t]) {
            out[t].push_back(r.is_search ? gateway.tool_search(r.query).text
                                         : gateway.tool_browse(r.url, r.query).text);
        }
    }
    return out;
}

std::vector<std::vector<std::string>> run_concurrent(
    ToolGateway& gateway, const std::vector<std::vector<Request>>& scripts) {
    std::vector<std::vector<std::string>> out(scripts.size());
    std::vector<std::thread> threads;
    threads.reserve(scripts.size());
    for (std::size_t t = 0; t < scripts.size(); ++t) {
        threads.emplace_back([&gateway, &scripts, &out, t] {
            for (const auto& r : scripts[t]) {
                out[t].push_back(r.is_search ? gateway.tool_search(r.query).text
                                             : gateway.tool_browse(r.url, r.query).text);
            }
        });
    }
    for (auto& th : threads) th.join();
    return out;
}

}  // namespace

TEST_SUITE("concurrency") {

TEST_CASE("concurrent mixed requests match sequential execution byte for byte") {
    ToyEnvParams params;
    params.n_tasks = 30;
    params.hop_depth_weights = {{1, 0.5}, {2, 0.5}};
    params.distractor_pages = 20;
    const auto env = generate_env(params, 21);
    const auto world = make_world(env);

    const int threads = 64;
    const int per_thread = 8;
    const auto scripts = make_scripts(env, threads, per_thread);

    ToolGateway sequential_gateway(world.store, world.index);
    const auto expected = run_sequential(sequential_gateway, scripts);

    ToolGateway concurrent_gateway(world.store, world.index);
    const auto got = run_concurrent(concurrent_gateway, scripts);

    REQUIRE(got.size() == expected.size());
    for (std::size_t t = 0; t < got.size(); ++t) {
        REQUIRE(got[t].size() == expected[t].size());
        for (std::size_t i = 0; i < got[t].size(); ++i) {
            CHECK(got[t][i] == expected[t][i]);
        }
    }

    const auto snap = concurrent_gateway.metrics_snapshot();
    CHECK(snap.search_calls + snap.browse_calls ==
          static_cast<std::uint64_t>(threads) * per_thread);
}

TEST_CASE("queries run concurrently against a store receiving masks") {
    ToyEnvParams params;
    params.n_tasks = 20;
    const auto env = generate_env(params, 33);
    const auto world = make_world(env);

    std::atomic<bool> stop{false};
    std::thread masker([&] {
        for (std::size_t i = 0; i + 1 < env.tasks.size(); i += 2) {
            world.store->mask_source(env.tasks[i].chain_urls[0],
                                     "qa-" + std::to_string(i));
            world.index->remove(env.tasks[i].chain_urls[0]);
        }
        stop.store(true);
    });
    std::vector<std::thread> readers;
    for (int t = 0; t < 8; ++t) {
        readers.emplace_back([&, t] {
            int spins = 0;
            while (!stop.load() || spins < 50) {
                const auto& task = env.tasks[static_cast<std::size_t>(
                    (t + spins) % static_cast<int>(env.tasks.size()))];
                auto obs = world.gateway->tool_search(task.question);
                CHECK_FALSE(obs.text.empty());
                ++spins;
                if (spins > 500) break;
            }
        });
    }
    masker.join();
    for (auto& r : readers) r.join();

    // Masked heads are invisible after the writer finishes.
    for (std::size_t i = 0; i + 1 < env.tasks.size(); i += 2) {
        auto hits = world.index->hybrid_search(env.tasks[i].question, 10);
        for (const auto& h : hits) CHECK(h.url != env.tasks[i].chain_urls[0]);
    }
}

}  // TEST_SUITE
