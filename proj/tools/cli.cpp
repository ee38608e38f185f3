#include "cli.hpp"

#include "fixture_clients.hpp"

#include "webgym/config.hpp"
#include "webgym/corpus_store.hpp"
#include "webgym/hash.hpp"
#include "webgym/curriculum.hpp"
#include "webgym/episode.hpp"
#include "webgym/gateway_service.hpp"
#include "webgym/grpo.hpp"
#include "webgym/manifest.hpp"
#include "webgym/multihop.hpp"
#include "webgym/prompts.hpp"
#include "webgym/qa_synthesis.hpp"
#include "webgym/search_index.hpp"
#include "webgym/text.hpp"
#include "webgym/tool_gateway.hpp"
#include "webgym/toy_env.hpp"
#include "webgym/trajectory_pipeline.hpp"

#include <CLI11.hpp>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <thread>

namespace webgym::cli {

using nlohmann::json;

namespace {

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!trim(line).empty()) lines.push_back(line);
    }
    return lines;
}

std::shared_ptr<SearchIndex> load_index_auto(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open index " + path);
    std::string header_line;
    std::getline(in, header_line);
    json header = json::parse(header_line);
    const auto dim = header.value("dim", std::size_t{64});
    auto embedder = std::make_shared<HashingEmbedder>(dim);
    return std::make_shared<SearchIndex>(SearchIndex::load(path, embedder));
}

IndexConfig index_config_from(const Config& cfg) {
    IndexConfig ic;
    ic.fusion_depth =
        static_cast<std::size_t>(cfg.get_int("index", "fusion.depth", 100));
    ic.rrf_kappa = cfg.get_double("index", "rrf.kappa", 60.0);
    ic.bm25_k1 = cfg.get_double("index", "bm25.k1", 1.2);
    ic.bm25_b = cfg.get_double("index", "bm25.b", 0.75);
    return ic;
}

EpisodeConfig episode_config_from(const Config& cfg) {
    EpisodeConfig ec;
    ec.max_turns = static_cast<int>(cfg.get_int("episode", "max_turns", 40));
    ec.context_budget_tokens = static_cast<std::size_t>(
        cfg.get_int("episode", "context_budget_tokens", 32768));
    ec.memory_enabled = cfg.get_bool("episode", "memory_enabled", false);
    return ec;
}

TrainerConfig trainer_config_from(const Config& cfg) {
    TrainerConfig tc;
    tc.group_size = static_cast<int>(cfg.get_int("trainer", "group_size", 8));
    tc.batch_queries = static_cast<int>(cfg.get_int("trainer", "batch_queries", 128));
    tc.eps_low = cfg.get_double("trainer", "eps_low", 0.2);
    tc.eps_high = cfg.get_double("trainer", "eps_high", 0.28);
    tc.learning_rate = cfg.get_double("trainer", "learning_rate", 1e-6);
    tc.tis_enabled = cfg.get_bool("trainer", "tis_enabled", true);
    tc.tis_upper = cfg.get_double("trainer", "tis_upper", 2.0);
    tc.tis_lower = cfg.get_double("trainer", "tis_lower", 0.5);
    tc.veto_threshold = cfg.get_double("trainer", "veto_threshold", 1e-4);
    tc.minibatch_splits =
        static_cast<int>(cfg.get_int("trainer", "minibatch_splits", 1));
    return tc;
}

// POST {"prompt": ...} -> {"text": ..., "token_logprobs": [...]}.
class HttpPolicyClient final : public PolicyClient {
public:
    explicit HttpPolicyClient(const std::string& endpoint) {
        auto scheme_end = endpoint.find("://");
        std::string rest =
            scheme_end == std::string::npos ? endpoint : endpoint.substr(scheme_end + 3);
        auto slash = rest.find('/');
        path_ = slash == std::string::npos ? "/generate" : rest.substr(slash);
        auto [host, port] = parse_bind_address(rest.substr(0, slash), "127.0.0.1", 80);
        client_ = std::make_unique<httplib::Client>(host, port);
    }

    PolicyResponse generate(const std::string& rendered_history) override {
        json body;
        body["prompt"] = rendered_history;
        auto res = client_->Post(path_, body.dump(), "application/json");
        if (!res || res->status != 200) {
            throw std::runtime_error("policy endpoint failure");
        }
        json j = json::parse(res->body);
        PolicyResponse out;
        out.message = j.value("text", "");
        if (j.contains("token_logprobs")) {
            out.token_logprobs = j["token_logprobs"].get<std::vector<double>>();
        }
        return out;
    }

private:
    std::unique_ptr<httplib::Client> client_;
    std::string path_;
};

PolicyFactory make_policy_factory(const std::string& spec, const std::string& question,
                                  const std::string& gold) {
    if (spec.rfind("scripted:", 0) == 0) {
        auto file = ScriptedPolicySpec::load(spec.substr(9));
        return file.factory_for(question, gold);
    }
    return [spec](std::uint64_t) -> std::unique_ptr<PolicyClient> {
        return std::make_unique<HttpPolicyClient>(spec);
    };
}

std::map<std::string, double> parse_mixture(const std::string& spec) {
    std::map<std::string, double> mixture;
    std::istringstream in(spec);
    std::string item;
    while (std::getline(in, item, ',')) {
        auto colon = item.find(':');
        if (colon == std::string::npos) {
            throw std::runtime_error("bad mixture entry: " + item);
        }
        mixture[trim(item.substr(0, colon))] = std::stod(item.substr(colon + 1));
    }
    return mixture;
}

std::string prompt_path(const std::string& assets, std::string_view file) {
    return assets + "/" + std::string(file);
}

volatile std::sig_atomic_t g_stop_requested = 0;

// ---- subcommand bodies ----

int cmd_ingest(const std::string& corpus_dir, const std::string& input, int iteration,
               const std::string& source) {
    CorpusStore store(corpus_dir);
    std::vector<WebPage> candidates;
    for (const auto& line : read_lines(input)) {
        auto page = CorpusStore::page_from_json(line);
        if (!page) {
            candidates.push_back(WebPage{});  // malformed record, rejected per-record
            continue;
        }
        if (iteration >= 0) page->added_iteration = iteration;
        if (!source.empty()) {
            page->source_tag =
                source_tag_from_string(source).value_or(SourceTag::seed);
        }
        candidates.push_back(std::move(*page));
    }
    auto report = store.ingest_pages(std::move(candidates));
    std::cout << "accepted " << report.accepted << " rejected " << report.rejected;
    for (auto reason :
         {RejectReason::duplicate_url, RejectReason::duplicate_hash,
          RejectReason::too_short, RejectReason::masked, RejectReason::malformed}) {
        const auto n = report.rejected_for(reason);
        if (n > 0) std::cout << " " << to_string(reason) << "=" << n;
    }
    std::cout << "\n";
    return 0;
}

int cmd_stats(const std::string& corpus_dir) {
    CorpusStore store(corpus_dir);
    const auto stats = store.stats();
    std::cout << "total_pages " << stats.total_pages << "\n";
    std::cout << "unique_domains " << stats.unique_domains << "\n";
    std::cout << "masked_urls " << store.masked_urls().size() << "\n";
    for (const auto& [iter, count] : stats.pages_per_iteration) {
        std::cout << "iteration " << iter << " pages " << count << "\n";
    }
    return 0;
}

int cmd_mask(const std::string& corpus_dir, const std::string& url,
             const std::string& qa_id, const std::string& index_path) {
    CorpusStore store(corpus_dir);
    auto receipt = store.mask_source(url, qa_id);
    if (!index_path.empty()) {
        auto index = load_index_auto(index_path);
        index->remove(url);
        index->save(index_path);
    }
    std::cout << (receipt.already_masked ? "already masked " : "masked ") << url << "\n";
    return 0;
}

int cmd_index(const Config& cfg, const std::string& corpus_dir, const std::string& out,
              std::size_t dim) {
    CorpusStore store(corpus_dir);
    auto embedder = std::make_shared<HashingEmbedder>(dim);
    BuildReport report;
    auto index = SearchIndex::build(store.all_pages(), embedder,
                                    index_config_from(cfg), &report);
    index.save(out);
    RunManifest manifest;
    manifest.corpus_hash = hash_directory(corpus_dir);
    manifest.index_hash = hash_file(out);
    manifest.save(out + ".manifest.json");
    std::cout << "indexed " << report.indexed << " pages";
    if (!report.skipped_urls.empty()) {
        std::cout << " (skipped " << report.skipped_urls.size() << ")";
    }
    std::cout << "\n";
    return 0;
}

int cmd_serve(const std::string& corpus_dir, const std::string& index_path,
              const std::string& bind_flag) {
    auto store = std::make_shared<CorpusStore>(corpus_dir);
    std::shared_ptr<SearchIndex> index;
    if (!index_path.empty()) index = load_index_auto(index_path);
    auto gateway = std::make_shared<ToolGateway>(store, index);

    std::string bind_spec = bind_flag;
    if (bind_spec.empty()) {
        if (const char* env = std::getenv(std::string(kBindEnvVar).c_str())) {
            bind_spec = env;
        }
    }
    auto [host, port] = parse_bind_address(bind_spec);
    GatewayService service(gateway);
    const int bound = service.start(host, port);
    if (bound < 0) {
        std::cerr << "error: cannot bind " << host << ":" << port << "\n";
        return 1;
    }
    std::cout << "serving on " << host << ":" << bound << std::endl;
    std::signal(SIGINT, [](int) { g_stop_requested = 1; });
    std::signal(SIGTERM, [](int) { g_stop_requested = 1; });
    while (!g_stop_requested) {
        std::this_thread::sleep_for(std::chrono::milliseconds(200));
    }
    service.stop();
    return 0;
}

int cmd_synth_extract(const std::string& corpus_dir, const std::string& clients_path,
                      const std::string& out, const std::string& assets, int iteration) {
    CorpusStore store(corpus_dir);
    auto clients = FixtureClients::load(clients_path);
    const std::string tpl = load_text_file(prompt_path(assets, kExtractPromptFile));
    std::ofstream out_file(out, std::ios::trunc);
    if (!out_file) throw std::runtime_error("cannot write " + out);
    std::size_t pairs = 0, flagged = 0;
    for (const auto& page : store.all_pages()) {
        std::unique_ptr<GeneratorClient> generator;
        try {
            generator = clients.extract_generator_for(page.url);
        } catch (const std::exception&) {
            continue;  // no fixture for this page
        }
        auto report = extract_qa(page, *generator, tpl, iteration);
        if (report.parse_failed || report.count_mismatch) ++flagged;
        for (const auto& qa : report.pairs) {
            out_file << qa_pair_to_json(qa) << '\n';
            ++pairs;
        }
    }
    std::cout << "extracted " << pairs << " pairs";
    if (flagged > 0) std::cout << " (" << flagged << " flagged)";
    std::cout << "\n";
    return 0;
}

int cmd_synth_filter(const std::string& pairs_path, const std::string& clients_path,
                     const std::string& assets, const std::string& pool_out,
                     const std::string& rejects_out, const std::string& corpus_dir,
                     const std::string& index_path) {
    auto clients = FixtureClients::load(clients_path);
    auto judge = clients.rubric_judge();
    const std::string tpl = load_text_file(prompt_path(assets, kRubricPromptFile));

    std::unique_ptr<CorpusStore> store;
    std::shared_ptr<SearchIndex> index;
    if (!corpus_dir.empty()) store = std::make_unique<CorpusStore>(corpus_dir);
    if (!index_path.empty()) index = load_index_auto(index_path);

    TaskPool pool;
    std::ofstream rejects(rejects_out, std::ios::trunc);
    std::size_t accepted = 0, rejected = 0;
    for (const auto& line : read_lines(pairs_path)) {
        auto qa = qa_pair_from_json(line);
        if (!qa) continue;
        qa->rubric = rubric_filter(*qa, *judge, tpl);
        if (qa->rubric->final_verdict) {
            if (store && index) {
                SearchIndex& idx = *index;
                accept_and_mask(*qa, *store, idx, pool);
            } else {
                pool.add(*qa);
            }
            ++accepted;
        } else {
            if (rejects) rejects << line << '\n';
            ++rejected;
        }
    }
    pool.save_jsonl(pool_out);
    if (index && !index_path.empty()) index->save(index_path);
    std::cout << "accepted " << accepted << " rejected " << rejected << "\n";
    return 0;
}

int cmd_synth_expand(const std::string& pool_path, const std::string& clients_path,
                     const std::string& corpus_dir, int iteration, std::size_t n) {
    auto clients = FixtureClients::load(clients_path);
    auto web_search = clients.web_search();
    auto fetcher = clients.fetcher();
    CorpusStore store(corpus_dir);
    auto pool = TaskPool::load_jsonl(pool_path);
    std::size_t accepted = 0, rejected = 0, failures = 0;
    for (const auto& qa : pool.pairs()) {
        auto report = expand_corpus(qa, *web_search, *fetcher, store, n, iteration);
        accepted += report.ingest.accepted;
        rejected += report.ingest.rejected;
        failures += report.fetch_failures;
    }
    std::cout << "expansion accepted " << accepted << " rejected " << rejected
              << " fetch_failures " << failures << "\n";
    return 0;
}

int cmd_multihop_build(const std::string& seed, const std::string& clients_path,
                       const std::string& out, int n_max, int k_feat, int k_ent) {
    auto clients = FixtureClients::load(clients_path);
    auto graph_client = clients.graph_client();
    auto web_search = clients.web_search();
    auto fetcher = clients.fetcher();
    GraphBuildParams params;
    params.n_max = n_max;
    params.k_feat = k_feat;
    params.k_ent = k_ent;
    auto graph = build_graph(seed, *graph_client, *web_search, *fetcher, params);
    std::ofstream f(out, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + out);
    f << graph.to_json() << '\n';
    std::cout << "graph nodes " << graph.entities.size() << " relations "
              << graph.relations.size() << (graph.under_size ? " (under size)" : "")
              << "\n";
    return 0;
}

int cmd_multihop_sample(const std::string& graph_path, std::uint64_t seed,
                        double perturbation, const std::string& out) {
    auto graph = KnowledgeGraph::from_json(load_text_file(graph_path));
    if (!graph) throw std::runtime_error("malformed graph file " + graph_path);
    std::mt19937_64 rng(seed);
    auto sub = sample_subgraph(*graph, rng, perturbation);
    const std::string text = format_subgraph(sub);
    if (!out.empty()) {
        std::ofstream f(out, std::ios::trunc);
        f << text;
    }
    std::cout << text;
    return 0;
}

int cmd_multihop_compose(const std::string& graph_path, std::uint64_t seed,
                         const std::string& clients_path, const std::string& out) {
    auto graph = KnowledgeGraph::from_json(load_text_file(graph_path));
    if (!graph) throw std::runtime_error("malformed graph file " + graph_path);
    auto clients = FixtureClients::load(clients_path);
    auto graph_client = clients.graph_client();
    std::mt19937_64 rng(seed);
    auto sub = sample_subgraph(*graph, rng);
    auto qa = compose_question(sub, *graph_client);
    if (!qa) {
        std::cerr << "error: question composition failed (answer leak or client failure)\n";
        return 1;
    }
    std::ofstream f(out, std::ios::trunc);
    f << qa_pair_to_json(*qa) << '\n';
    std::cout << "composed 1 pair, answer entity hidden\n";
    return 0;
}

int cmd_filter_difficulty(const Config& cfg, const std::string& pool_path,
                          const std::string& policy_spec, int k,
                          const std::string& corpus_dir, const std::string& index_path,
                          const std::string& report_out, const std::string& kept_out) {
    auto store = corpus_dir.empty() ? std::make_shared<CorpusStore>()
                                    : std::make_shared<CorpusStore>(corpus_dir);
    std::shared_ptr<SearchIndex> index;
    if (!index_path.empty()) index = load_index_auto(index_path);
    ToolGateway gateway(store, index);

    const auto episode_config = episode_config_from(cfg);
    auto pool = TaskPool::load_jsonl(pool_path);

    std::vector<DifficultyRecord> records;
    std::ofstream report_file(report_out, std::ios::trunc);
    if (!report_file) throw std::runtime_error("cannot write " + report_out);
    for (const auto& qa : pool.pairs()) {
        auto factory = make_policy_factory(policy_spec, qa.question, qa.answer);
        auto record = assess_difficulty(qa.qa_id, qa.question, qa.answer, factory,
                                        gateway, nullptr, episode_config, k);
        report_file << difficulty_record_to_json(record) << '\n';
        records.push_back(std::move(record));
    }
    const auto kept = filter_pool(records);
    if (!kept_out.empty()) {
        std::ofstream kept_file(kept_out, std::ios::trunc);
        for (const auto& id : kept) kept_file << id << '\n';
    }
    std::cout << "assessed " << records.size() << " kept " << kept.size() << "\n";
    return 0;
}

int cmd_rollout(const Config& cfg, const std::string& questions_path,
                const std::string& policy_spec, int k, const std::string& corpus_dir,
                const std::string& index_path, const std::string& out) {
    auto store = corpus_dir.empty() ? std::make_shared<CorpusStore>()
                                    : std::make_shared<CorpusStore>(corpus_dir);
    std::shared_ptr<SearchIndex> index;
    if (!index_path.empty()) index = load_index_auto(index_path);
    ToolGateway gateway(store, index);

    const auto episode_config = episode_config_from(cfg);
    auto pool = TaskPool::load_jsonl(questions_path);
    std::ofstream out_file(out, std::ios::trunc);
    if (!out_file) throw std::runtime_error("cannot write " + out);
    std::size_t episodes = 0;
    for (const auto& qa : pool.pairs()) {
        auto factory = make_policy_factory(policy_spec, qa.question, qa.answer);
        for (int rollout = 0; rollout < k; ++rollout) {
            auto policy = factory(static_cast<std::uint64_t>(rollout));
            const std::string episode_id = qa.qa_id + "#" + std::to_string(rollout);
            auto traj =
                run_episode(qa.question, episode_id, *policy, gateway, episode_config);
            traj.query_id = episode_id;
            out_file << trajectory_to_json(traj) << '\n';
            ++episodes;
        }
    }
    std::cout << "wrote " << episodes << " trajectories\n";
    return 0;
}

int cmd_train_toy(const Config& cfg, int steps, std::uint64_t seed,
                  const std::string& out, double lr, int queries, int rollouts,
                  std::size_t n_tasks) {
    ToyTrainParams params;
    params.trainer = trainer_config_from(cfg);
    params.steps = steps;
    params.learning_rate = lr;
    params.queries_per_step = queries;
    params.rollouts_per_query = rollouts;
    params.env.n_tasks = n_tasks;
    params.env.hop_depth_weights = {{1, 0.7}, {2, 0.3}};

    const ToyEnv env = generate_env(params.env, seed);
    const ToyWorld world = make_world(env);
    ToyPolicy policy(kToyStates, kToyActions);
    TrainerConfig tc = params.trainer;
    tc.learning_rate = params.learning_rate;
    tc.group_size = params.rollouts_per_query;
    tc.minibatch_splits = 1;

    std::mt19937_64 query_rng(mix64(seed, 0xDA7A));
    std::uniform_int_distribution<std::size_t> task_dist(0, env.tasks.size() - 1);

    std::ofstream out_file;
    if (!out.empty()) out_file.open(out, std::ios::trunc);
    double last_reward = 0.0;

    EpisodeConfig episode_config;
    episode_config.max_turns = params.max_turns;
    episode_config.context_budget_tokens = 1u << 20;

    for (int step = 0; step < steps; ++step) {
        std::vector<RolloutGroup> groups;
        double reward_sum = 0.0;
        std::size_t count = 0;
        for (int q = 0; q < params.queries_per_step; ++q) {
            const auto& task = env.tasks[task_dist(query_rng)];
            RolloutGroup group;
            group.query_id = task.query_id;
            for (int r = 0; r < params.rollouts_per_query; ++r) {
                ToyAgentPolicy client(
                    task.question, policy,
                    mix64(mix64(seed, static_cast<std::uint64_t>(step)),
                          mix64(static_cast<std::uint64_t>(q),
                                static_cast<std::uint64_t>(r))));
                auto traj = run_episode(task.question, task.query_id, client,
                                        *world.gateway, episode_config);
                const double reward =
                    judge(task.question, task.gold, traj.final_answer).reward;
                group.trajectories.push_back({client.records(), client.policy_version()});
                group.rewards.push_back(reward);
                reward_sum += reward;
                ++count;
            }
            groups.push_back(std::move(group));
        }
        auto report = on_policy_step(groups, policy, tc);
        report.step = step;
        report.mean_reward = reward_sum / static_cast<double>(count);
        last_reward = report.mean_reward;
        if (out_file) out_file << update_report_to_json(report) << '\n';
    }
    std::cout << "final mean reward " << last_reward << "\n";
    return 0;
}

int cmd_ablate(const Config& cfg, const std::string& arms_spec, int n_seeds, int steps,
               const std::string& out, double lr) {
    std::vector<AblationArm> arms;
    std::istringstream in(arms_spec);
    std::string item;
    while (std::getline(in, item, ',')) arms.push_back(parse_arm(trim(item)));
    if (arms.empty()) throw std::runtime_error("no ablation arms given");

    ToyTrainParams params;
    params.trainer = trainer_config_from(cfg);
    params.steps = steps;
    params.learning_rate = lr;
    params.env.n_tasks = 60;
    params.env.hop_depth_weights = {{1, 0.6}, {2, 0.4}};
    params.env.distractor_pages = 30;

    std::vector<std::uint64_t> seeds;
    for (int s = 0; s < n_seeds; ++s) seeds.push_back(static_cast<std::uint64_t>(s + 1));

    auto curves = run_ablation(arms, seeds, params);
    if (!out.empty()) write_curves_csv(out, curves);

    for (const auto& arm : arms) {
        double final_sum = 0.0;
        int n = 0;
        for (const auto& p : curves) {
            if (p.arm == arm.name && p.step >= steps - 10) {
                final_sum += p.mean_reward;
                ++n;
            }
        }
        std::cout << arm.name << " final mean reward "
                  << (n > 0 ? final_sum / n : 0.0) << "\n";
    }
    return 0;
}

int cmd_traj_filter(const std::string& in_path, const std::string& out_path,
                    const std::string& rejects_path) {
    std::ofstream out_file(out_path, std::ios::trunc);
    std::ofstream rejects_file(rejects_path, std::ios::trunc);
    if (!out_file || !rejects_file) throw std::runtime_error("cannot write outputs");
    std::vector<RawTrajectory> inputs;
    std::vector<FilterResult> results;
    for (const auto& line : read_lines(in_path)) {
        auto traj = raw_trajectory_from_json(line);
        if (!traj) continue;
        auto result = filter_trajectory(*traj);
        if (result.accepted) {
            out_file << line << '\n';
        } else {
            json j;
            j["reason"] = std::string(to_string(*result.reason));
            j["trajectory"] = json::parse(line);
            rejects_file << j.dump() << '\n';
        }
        inputs.push_back(std::move(*traj));
        results.push_back(result);
    }
    const auto stats = pipeline_stats(inputs, results);
    std::cout << "accepted " << stats.accepted << "/" << stats.total << " (rate "
              << stats.acceptance_rate << ")\n";
    return 0;
}

int cmd_traj_clean(const std::string& in_path, const std::string& out_path,
                   const std::string& system_prompt) {
    std::ofstream out_file(out_path, std::ios::trunc);
    if (!out_file) throw std::runtime_error("cannot write " + out_path);
    std::size_t cleaned = 0;
    for (const auto& line : read_lines(in_path)) {
        auto traj = raw_trajectory_from_json(line);
        if (!traj) continue;
        auto result = clean_trajectory(*traj, system_prompt, traj->gold_answer);
        out_file << raw_trajectory_to_json(result) << '\n';
        ++cleaned;
    }
    std::cout << "cleaned " << cleaned << " trajectories\n";
    return 0;
}

int cmd_traj_stats(const std::string& in_path) {
    std::vector<RawTrajectory> inputs;
    std::vector<FilterResult> results;
    for (const auto& line : read_lines(in_path)) {
        auto traj = raw_trajectory_from_json(line);
        if (!traj) continue;
        results.push_back(filter_trajectory(*traj));
        inputs.push_back(std::move(*traj));
    }
    const auto stats = pipeline_stats(inputs, results);
    std::cout << "total " << stats.total << " accepted " << stats.accepted << " rate "
              << stats.acceptance_rate << "\n";
    for (const auto& [rule, count] : stats.rejects_by_rule) {
        std::cout << to_string(rule) << " " << count << "\n";
    }
    std::cout << "token_length_histogram";
    for (const auto& [bucket, count] : stats.token_length_histogram) {
        std::cout << " <=" << bucket << ":" << count;
    }
    std::cout << "\nturn_count_histogram";
    for (const auto& [bucket, count] : stats.turn_count_histogram) {
        std::cout << " <=" << bucket << ":" << count;
    }
    std::cout << "\n";
    return 0;
}

int cmd_stage(const Config& cfg, bool advance, const std::string& out) {
    StageConfig stage;
    stage.stage_id = static_cast<int>(cfg.get_int("curriculum", "stage_id", 1));
    stage.max_response_tokens = static_cast<std::size_t>(
        cfg.get_int("curriculum", "max_response_tokens", 32768));
    stage.max_turns = static_cast<int>(cfg.get_int("curriculum", "max_turns", 40));
    stage.temperature = cfg.get_double("curriculum", "temperature", 0.7);
    const std::string mixture =
        cfg.get_string("curriculum", "mixture", "synthetic:0.734,multihop:0.266");
    stage.mixture = parse_mixture(mixture);
    stage.validate();

    if (advance) stage = stage.next_stage();

    std::ostringstream text;
    text << "[curriculum]\n";
    text << "stage_id = " << stage.stage_id << "\n";
    text << "max_response_tokens = " << stage.max_response_tokens << "\n";
    text << "max_turns = " << stage.max_turns << "\n";
    text << "temperature = " << stage.temperature << "\n";
    text << "mixture = ";
    bool first = true;
    for (const auto& [source, weight] : stage.mixture) {
        if (!first) text << ",";
        text << source << ":" << weight;
        first = false;
    }
    text << "\n";
    if (!out.empty()) {
        std::ofstream f(out, std::ios::trunc);
        f << text.str();
    }
    std::cout << text.str();
    return 0;
}

int cmd_manifest(const std::string& corpus_dir, const std::string& index_path,
                 const std::string& pool_path, const std::string& out,
                 const std::string& verify_path) {
    if (!verify_path.empty()) {
        auto manifest = RunManifest::load(verify_path);
        auto mismatches = verify_manifest(manifest, corpus_dir, index_path, pool_path);
        if (mismatches.empty()) {
            std::cout << "manifest ok\n";
            return 0;
        }
        for (const auto& m : mismatches) std::cerr << "error: " << m << "\n";
        return 1;
    }
    RunManifest manifest;
    manifest.corpus_hash = corpus_dir.empty() ? "" : hash_directory(corpus_dir);
    manifest.index_hash = index_path.empty() ? "" : hash_file(index_path);
    manifest.task_pool_hash = pool_path.empty() ? "" : hash_file(pool_path);
    manifest.save(out);
    std::cout << "wrote " << out << "\n";
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"webgym: local search/browse environment and agentic RL harness"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "INI config file with per-module sections");

    std::function<int()> action;
    Config cfg;  // filled after parse when --config given

    // ingest
    {
        auto opts = std::make_shared<std::tuple<std::string, std::string, int,
                                                std::string>>("", "", -1, "");
        auto* sub = app.add_subcommand("ingest", "Ingest corpus JSONL records");
        sub->add_option("--input", std::get<1>(*opts), "candidate pages JSONL")
            ->required();
        sub->add_option("--corpus", std::get<0>(*opts), "corpus directory")->required();
        sub->add_option("--iteration", std::get<2>(*opts), "override added_iteration");
        sub->add_option("--source", std::get<3>(*opts), "seed|expansion");
        sub->callback([opts, &action] {
            action = [opts] {
                return cmd_ingest(std::get<0>(*opts), std::get<1>(*opts),
                                  std::get<2>(*opts), std::get<3>(*opts));
            };
        });
    }
    // stats
    {
        auto corpus = std::make_shared<std::string>();
        auto* sub = app.add_subcommand("stats", "Corpus statistics");
        sub->add_option("--corpus", *corpus, "corpus directory")->required();
        sub->callback([corpus, &action] {
            action = [corpus] { return cmd_stats(*corpus); };
        });
    }
    // mask
    {
        auto opts = std::make_shared<std::array<std::string, 4>>();
        auto* sub = app.add_subcommand("mask", "Mask a page out of the store and index");
        sub->add_option("--corpus", (*opts)[0])->required();
        sub->add_option("--url", (*opts)[1])->required();
        sub->add_option("--qa", (*opts)[2])->required();
        sub->add_option("--index", (*opts)[3], "index sidecar to update");
        sub->callback([opts, &action] {
            action = [opts] {
                return cmd_mask((*opts)[0], (*opts)[1], (*opts)[2], (*opts)[3]);
            };
        });
    }
    // index
    {
        auto opts = std::make_shared<std::tuple<std::string, std::string, std::size_t>>(
            "", "", 64);
        auto* sub = app.add_subcommand("index", "Build the hybrid search index");
        sub->add_option("--corpus", std::get<0>(*opts))->required();
        sub->add_option("--out", std::get<1>(*opts))->required();
        sub->add_option("--dim", std::get<2>(*opts), "embedder dimension");
        sub->callback([opts, &action, &cfg] {
            action = [opts, &cfg] {
                return cmd_index(cfg, std::get<0>(*opts), std::get<1>(*opts),
                                 std::get<2>(*opts));
            };
        });
    }
    // serve
    {
        auto opts = std::make_shared<std::array<std::string, 3>>();
        auto* sub = app.add_subcommand("serve", "Serve /search and /browse over HTTP");
        sub->add_option("--corpus", (*opts)[0])->required();
        sub->add_option("--index", (*opts)[1]);
        sub->add_option("--bind", (*opts)[2], "host:port (default $WEBGYM_BIND)");
        sub->callback([opts, &action] {
            action = [opts] { return cmd_serve((*opts)[0], (*opts)[1], (*opts)[2]); };
        });
    }
    // synth
    {
        auto* synth = app.add_subcommand("synth", "QA synthesis pipeline");
        synth->require_subcommand(1);
        {
            auto opts = std::make_shared<std::tuple<std::string, std::string,
                                                    std::string, std::string, int>>(
                "", "", "", default_asset_dir(), 0);
            auto* sub = synth->add_subcommand("extract", "Extract QA pairs from pages");
            sub->add_option("--corpus", std::get<0>(*opts))->required();
            sub->add_option("--clients", std::get<1>(*opts), "fixtures JSON")->required();
            sub->add_option("--out", std::get<2>(*opts))->required();
            sub->add_option("--assets", std::get<3>(*opts), "prompt asset dir");
            sub->add_option("--iteration", std::get<4>(*opts));
            sub->callback([opts, &action] {
                action = [opts] {
                    return cmd_synth_extract(std::get<0>(*opts), std::get<1>(*opts),
                                             std::get<2>(*opts), std::get<3>(*opts),
                                             std::get<4>(*opts));
                };
            });
        }
        {
            auto opts = std::make_shared<std::array<std::string, 7>>();
            (*opts)[2] = default_asset_dir();
            auto* sub = synth->add_subcommand("filter",
                                              "Rubric-filter pairs and mask origins");
            sub->add_option("--pairs", (*opts)[0])->required();
            sub->add_option("--clients", (*opts)[1])->required();
            sub->add_option("--assets", (*opts)[2]);
            sub->add_option("--pool", (*opts)[3], "accepted pool JSONL")->required();
            sub->add_option("--rejects", (*opts)[4])->required();
            sub->add_option("--corpus", (*opts)[5], "store for origin masking");
            sub->add_option("--index", (*opts)[6], "index sidecar for origin masking");
            sub->callback([opts, &action] {
                action = [opts] {
                    return cmd_synth_filter((*opts)[0], (*opts)[1], (*opts)[2],
                                            (*opts)[3], (*opts)[4], (*opts)[5],
                                            (*opts)[6]);
                };
            });
        }
        {
            auto opts = std::make_shared<std::tuple<std::string, std::string,
                                                    std::string, int, std::size_t>>(
                "", "", "", 1, 100);
            auto* sub = synth->add_subcommand("expand", "Expand the corpus per QA pair");
            sub->add_option("--pool", std::get<0>(*opts))->required();
            sub->add_option("--clients", std::get<1>(*opts))->required();
            sub->add_option("--corpus", std::get<2>(*opts))->required();
            sub->add_option("--iteration", std::get<3>(*opts));
            sub->add_option("--n", std::get<4>(*opts), "fetch budget per pair");
            sub->callback([opts, &action] {
                action = [opts] {
                    return cmd_synth_expand(std::get<0>(*opts), std::get<1>(*opts),
                                            std::get<2>(*opts), std::get<3>(*opts),
                                            std::get<4>(*opts));
                };
            });
        }
    }
    // multihop
    {
        auto* multihop = app.add_subcommand("multihop", "Backward multi-hop QA synthesis");
        multihop->require_subcommand(1);
        {
            auto opts = std::make_shared<std::tuple<std::string, std::string,
                                                    std::string, int, int, int>>(
                "", "", "", 8, 2, 2);
            auto* sub = multihop->add_subcommand("build", "Grow a knowledge graph");
            sub->add_option("--seed", std::get<0>(*opts), "seed entity name")->required();
            sub->add_option("--clients", std::get<1>(*opts))->required();
            sub->add_option("--out", std::get<2>(*opts))->required();
            sub->add_option("--nmax", std::get<3>(*opts));
            sub->add_option("--kfeat", std::get<4>(*opts));
            sub->add_option("--kent", std::get<5>(*opts));
            sub->callback([opts, &action] {
                action = [opts] {
                    return cmd_multihop_build(std::get<0>(*opts), std::get<1>(*opts),
                                              std::get<2>(*opts), std::get<3>(*opts),
                                              std::get<4>(*opts), std::get<5>(*opts));
                };
            });
        }
        {
            auto opts = std::make_shared<std::tuple<std::string, std::uint64_t, double,
                                                    std::string>>("", 0, 0.5, "");
            auto* sub = multihop->add_subcommand("sample", "Sample and format a subgraph");
            sub->add_option("--graph", std::get<0>(*opts))->required();
            sub->add_option("--seed", std::get<1>(*opts))->required();
            sub->add_option("--perturbation", std::get<2>(*opts));
            sub->add_option("--out", std::get<3>(*opts));
            sub->callback([opts, &action] {
                action = [opts] {
                    return cmd_multihop_sample(std::get<0>(*opts), std::get<1>(*opts),
                                               std::get<2>(*opts), std::get<3>(*opts));
                };
            });
        }
        {
            auto opts = std::make_shared<std::tuple<std::string, std::uint64_t,
                                                    std::string, std::string>>("", 0, "",
                                                                               "");
            auto* sub = multihop->add_subcommand("compose", "Compose a backward question");
            sub->add_option("--graph", std::get<0>(*opts))->required();
            sub->add_option("--seed", std::get<1>(*opts))->required();
            sub->add_option("--clients", std::get<2>(*opts))->required();
            sub->add_option("--out", std::get<3>(*opts))->required();
            sub->callback([opts, &action] {
                action = [opts] {
                    return cmd_multihop_compose(std::get<0>(*opts), std::get<1>(*opts),
                                                std::get<2>(*opts), std::get<3>(*opts));
                };
            });
        }
    }
    // filter-difficulty
    {
        auto opts = std::make_shared<std::tuple<std::string, std::string, int,
                                                std::string, std::string, std::string,
                                                std::string>>("", "", 8, "", "", "", "");
        auto* sub = app.add_subcommand("filter-difficulty",
                                       "pass@K difficulty filtering of a task pool");
        sub->add_option("--pool", std::get<0>(*opts))->required();
        sub->add_option("--policy", std::get<1>(*opts), "scripted:<path> or endpoint")
            ->required();
        sub->add_option("--k", std::get<2>(*opts));
        sub->add_option("--corpus", std::get<3>(*opts));
        sub->add_option("--index", std::get<4>(*opts));
        sub->add_option("--report", std::get<5>(*opts), "difficulty report JSONL")
            ->required();
        sub->add_option("--kept", std::get<6>(*opts), "kept query ids");
        sub->callback([opts, &action, &cfg] {
            action = [opts, &cfg] {
                return cmd_filter_difficulty(cfg, std::get<0>(*opts), std::get<1>(*opts),
                                             std::get<2>(*opts), std::get<3>(*opts),
                                             std::get<4>(*opts), std::get<5>(*opts),
                                             std::get<6>(*opts));
            };
        });
    }
    // rollout
    {
        auto opts = std::make_shared<std::tuple<std::string, std::string, int,
                                                std::string, std::string, std::string>>(
            "", "", 1, "", "", "");
        auto* sub = app.add_subcommand("rollout", "Run episodes and log trajectories");
        sub->add_option("--questions", std::get<0>(*opts), "task pool JSONL")->required();
        sub->add_option("--policy", std::get<1>(*opts))->required();
        sub->add_option("--k", std::get<2>(*opts), "rollouts per question");
        sub->add_option("--corpus", std::get<3>(*opts));
        sub->add_option("--index", std::get<4>(*opts));
        sub->add_option("--out", std::get<5>(*opts))->required();
        sub->callback([opts, &action, &cfg] {
            action = [opts, &cfg] {
                return cmd_rollout(cfg, std::get<0>(*opts), std::get<1>(*opts),
                                   std::get<2>(*opts), std::get<3>(*opts),
                                   std::get<4>(*opts), std::get<5>(*opts));
            };
        });
    }
    // train-toy
    {
        auto opts = std::make_shared<std::tuple<int, std::uint64_t, std::string, double,
                                                int, int, std::size_t>>(
            50, 1, "", 0.3, 8, 8, 60);
        auto* sub = app.add_subcommand("train-toy",
                                       "On-policy GRPO training on the toy environment");
        sub->add_option("--steps", std::get<0>(*opts));
        sub->add_option("--seed", std::get<1>(*opts));
        sub->add_option("--out", std::get<2>(*opts), "UpdateReport JSONL");
        sub->add_option("--lr", std::get<3>(*opts));
        sub->add_option("--queries", std::get<4>(*opts));
        sub->add_option("--rollouts", std::get<5>(*opts));
        sub->add_option("--tasks", std::get<6>(*opts));
        sub->callback([opts, &action, &cfg] {
            action = [opts, &cfg] {
                return cmd_train_toy(cfg, std::get<0>(*opts), std::get<1>(*opts),
                                     std::get<2>(*opts), std::get<3>(*opts),
                                     std::get<4>(*opts), std::get<5>(*opts),
                                     std::get<6>(*opts));
            };
        });
    }
    // ablate
    {
        auto opts = std::make_shared<std::tuple<std::string, int, int, std::string,
                                                double>>("onpolicy,offpolicy:4", 5, 200,
                                                         "", 0.3);
        auto* sub = app.add_subcommand("ablate", "On-policy vs off-policy reward curves");
        sub->add_option("--arms", std::get<0>(*opts), "e.g. onpolicy,offpolicy:4");
        sub->add_option("--seeds", std::get<1>(*opts));
        sub->add_option("--steps", std::get<2>(*opts));
        sub->add_option("--out", std::get<3>(*opts), "curves CSV");
        sub->add_option("--lr", std::get<4>(*opts));
        sub->callback([opts, &action, &cfg] {
            action = [opts, &cfg] {
                return cmd_ablate(cfg, std::get<0>(*opts), std::get<1>(*opts),
                                  std::get<2>(*opts), std::get<3>(*opts),
                                  std::get<4>(*opts));
            };
        });
    }
    // traj
    {
        auto* traj = app.add_subcommand("traj", "SFT trajectory processing");
        traj->require_subcommand(1);
        {
            auto opts = std::make_shared<std::array<std::string, 3>>();
            auto* sub = traj->add_subcommand("filter", "Apply filters F1..F7");
            sub->add_option("--in", (*opts)[0])->required();
            sub->add_option("--out", (*opts)[1])->required();
            sub->add_option("--rejects", (*opts)[2])->required();
            sub->callback([opts, &action] {
                action = [opts] {
                    return cmd_traj_filter((*opts)[0], (*opts)[1], (*opts)[2]);
                };
            });
        }
        {
            auto opts = std::make_shared<std::array<std::string, 3>>();
            (*opts)[2] = "You are a research assistant with search and browse tools.";
            auto* sub = traj->add_subcommand("clean", "Apply cleaners C1..C4");
            sub->add_option("--in", (*opts)[0])->required();
            sub->add_option("--out", (*opts)[1])->required();
            sub->add_option("--system-prompt", (*opts)[2]);
            sub->callback([opts, &action] {
                action = [opts] {
                    return cmd_traj_clean((*opts)[0], (*opts)[1], (*opts)[2]);
                };
            });
        }
        {
            auto in_path = std::make_shared<std::string>();
            auto* sub = traj->add_subcommand("stats", "Acceptance and histogram stats");
            sub->add_option("--in", *in_path)->required();
            sub->callback([in_path, &action] {
                action = [in_path] { return cmd_traj_stats(*in_path); };
            });
        }
    }
    // stage
    {
        auto opts = std::make_shared<std::pair<bool, std::string>>(false, "");
        auto* sub = app.add_subcommand("stage", "Show or advance the curriculum stage");
        sub->add_flag("--advance", opts->first);
        sub->add_option("--out", opts->second, "write the resulting section");
        sub->callback([opts, &action, &cfg] {
            action = [opts, &cfg] { return cmd_stage(cfg, opts->first, opts->second); };
        });
    }
    // compact
    {
        auto corpus = std::make_shared<std::string>();
        auto* sub = app.add_subcommand("compact",
                                       "Rewrite corpus files honoring the mask ledger");
        sub->add_option("--corpus", *corpus)->required();
        sub->callback([corpus, &action] {
            action = [corpus] {
                CorpusStore store(*corpus);
                store.compact();
                std::cout << "compacted " << store.size() << " pages\n";
                return 0;
            };
        });
    }
    // manifest
    {
        auto opts = std::make_shared<std::array<std::string, 5>>();
        (*opts)[3] = "manifest.json";
        auto* sub = app.add_subcommand("manifest", "Write or verify a run manifest");
        sub->add_option("--corpus", (*opts)[0]);
        sub->add_option("--index", (*opts)[1]);
        sub->add_option("--pool", (*opts)[2]);
        sub->add_option("--out", (*opts)[3]);
        sub->add_option("--verify", (*opts)[4], "manifest to verify");
        sub->callback([opts, &action] {
            action = [opts] {
                return cmd_manifest((*opts)[0], (*opts)[1], (*opts)[2], (*opts)[3],
                                    (*opts)[4]);
            };
        });
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (!config_path.empty()) {
        try {
            cfg = Config::load(config_path);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
    }
    if (!action) {
        std::cerr << app.help();
        return 2;
    }
    try {
        return action();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace webgym::cli
