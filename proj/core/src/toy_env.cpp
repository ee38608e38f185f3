#include "webgym/toy_env.hpp"

#include "webgym/hash.hpp"
#include "webgym/reward_judge.hpp"
#include "webgym/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace webgym {

namespace {

constexpr std::string_view kDeadUrl = "https://synth.example/nowhere";
constexpr std::string_view kPointerMarker = "continue at ";
constexpr std::string_view kFactMarker = "verified figure recorded for ";

std::string filler_block(const std::string& slug, std::size_t sentences) {
    std::ostringstream out;
    for (std::size_t k = 0; k < sentences; ++k) {
        out << "Archive filler note " << k + 1 << " for " << slug
            << " keeps routine catalog remarks for completeness. ";
    }
    return out.str();
}

std::string padded_content(std::string body, const std::string& slug) {
    std::size_t extra = 0;
    while (body.size() <= kMinContentChars + 1) {
        body += "Supplementary remark " + std::to_string(++extra) + " for " + slug +
                " extends the record. ";
    }
    return body;
}

int draw_depth(const std::map<int, double>& weights, std::mt19937_64& rng) {
    double total = 0.0;
    for (const auto& [depth, w] : weights) total += w;
    if (total <= 0.0) throw std::invalid_argument("generate_env: empty depth weights");
    std::uniform_real_distribution<double> unit(0.0, total);
    double u = unit(rng);
    for (const auto& [depth, w] : weights) {
        if (u < w) return depth;
        u -= w;
    }
    return weights.rbegin()->first;
}

}  // namespace

ToyEnv generate_env(const ToyEnvParams& params, std::uint64_t seed) {
    std::mt19937_64 rng(mix64(seed, 0x70E0));
    ToyEnv env;
    const std::string host = "e" + hex64(mix64(seed)).substr(0, 8) + ".synth.example";

    for (std::size_t i = 0; i < params.n_tasks; ++i) {
        const int depth = draw_depth(params.hop_depth_weights, rng);
        const std::string topic = "subject" + std::to_string(i) + "x" +
                                  hex64(rng()).substr(0, 6);
        // Second unique token: one hash collision alone cannot hand the
        // query's top hit to another task's head page.
        const std::string venue = "ledger" + std::to_string(i) + "x" +
                                  hex64(rng()).substr(0, 6);
        const std::string gold = std::to_string(1000 + rng() % 9000);

        PlantedTask task;
        task.query_id = "toy-" + std::to_string(i);
        task.question = "What is the verified figure recorded for " + topic + " in " +
                        venue + "?";
        task.gold = gold;
        task.hop_depth = depth;
        for (int j = 1; j <= depth; ++j) {
            task.chain_urls.push_back("https://" + host + "/t" + std::to_string(i) +
                                      "/p" + std::to_string(j));
        }

        for (int j = 1; j <= depth; ++j) {
            const std::string slug = "frag" + topic + "p" + std::to_string(j);
            WebPage page;
            page.url = task.chain_urls[static_cast<std::size_t>(j - 1)];
            page.source_tag = SourceTag::seed;
            page.added_iteration = params.iteration;
            if (j == 1) {
                // Only the chain head carries the topic and venue tokens where
                // the index can see them; deeper pages are reachable by
                // browsing alone.
                page.title = "Report on " + topic + " in " + venue;
                page.summary = "Reference notes on the verified figure recorded for " +
                               topic + " in " + venue + ".";
            } else {
                page.title = "Archive fragment " + slug;
                page.summary = "Continuation records for series " + slug + ".";
            }
            std::string body = filler_block(slug, 13);
            if (j < depth) {
                body += "Details about " + topic + " " + std::string(kPointerMarker) +
                        task.chain_urls[static_cast<std::size_t>(j)] + " .";
            } else {
                body += "The " + std::string(kFactMarker) + topic + " is " + gold + ".";
            }
            page.content_markdown = padded_content(std::move(body), slug);
            env.pages.push_back(std::move(page));
        }
        env.tasks.push_back(std::move(task));
    }

    for (std::size_t k = 0; k < params.distractor_pages; ++k) {
        const std::string junk = "misc" + std::to_string(k) + "x" +
                                 hex64(rng()).substr(0, 6);
        WebPage page;
        page.url = "https://" + host + "/d/" + std::to_string(k);
        page.title = "Miscellany digest " + junk;
        page.summary = "Assorted notes filed under " + junk + ".";
        page.content_markdown = padded_content(filler_block(junk, 14), junk);
        page.source_tag = SourceTag::seed;
        page.added_iteration = params.iteration;
        env.pages.push_back(std::move(page));
    }
    return env;
}

std::vector<std::string> oracle_script(const PlantedTask& task) {
    std::vector<std::string> messages;
    Action search;
    search.kind = ActionKind::search;
    search.query = task.question;
    messages.push_back(render_message("look up the topic", search));
    for (const auto& url : task.chain_urls) {
        Action browse;
        browse.kind = ActionKind::browse;
        browse.url = url;
        browse.query = task.question;
        messages.push_back(render_message("open the next source", browse));
    }
    Action answer;
    answer.kind = ActionKind::answer;
    answer.text = task.gold;
    messages.push_back(render_message("extract the figure", answer));
    return messages;
}

ScriptedPolicy::ScriptedPolicy(std::vector<std::string> messages, std::string fallback)
    : messages_(std::move(messages)), fallback_(std::move(fallback)) {}

PolicyResponse ScriptedPolicy::generate(const std::string&) {
    const std::string& message =
        next_ < messages_.size() ? messages_[next_] : fallback_;
    if (next_ < messages_.size()) ++next_;
    PolicyResponse resp;
    resp.message = message;
    resp.token_logprobs.assign(approx_token_count(message), 0.0);
    return resp;
}

PolicyFactory scripted_success_factory(std::string gold,
                                       std::set<std::uint64_t> correct_seeds) {
    return [gold = std::move(gold),
            correct_seeds = std::move(correct_seeds)](std::uint64_t seed) {
        const bool correct = correct_seeds.count(seed) > 0;
        const std::string answer = correct ? gold : "not-" + gold;
        return std::make_unique<ScriptedPolicy>(std::vector<std::string>{
            "<think>recall</think><answer>" + answer + "</answer>"});
    };
}

PolicyFactory scripted_bernoulli_factory(std::string gold, double success_prob,
                                         std::uint64_t salt) {
    return [gold = std::move(gold), success_prob, salt](std::uint64_t seed) {
        const double u = static_cast<double>(mix64(seed, salt)) /
                         static_cast<double>(std::numeric_limits<std::uint64_t>::max());
        const std::string answer = u < success_prob ? gold : "not-" + gold;
        return std::make_unique<ScriptedPolicy>(std::vector<std::string>{
            "<think>recall</think><answer>" + answer + "</answer>"});
    };
}

int toy_state(int turn, int category) {
    const int bucket = std::min(turn, kToyTurnBuckets - 1);
    return bucket * kToyCategories + category;
}

namespace {

std::string last_observation(const std::string& rendered) {
    static constexpr std::string_view kOpen = "<observation>";
    static constexpr std::string_view kClose = "</observation>";
    std::size_t pos = std::string::npos;
    std::size_t from = 0;
    while (true) {
        auto p = rendered.find(kOpen, from);
        if (p == std::string::npos) break;
        pos = p;
        from = p + kOpen.size();
    }
    if (pos == std::string::npos) return {};
    auto close = rendered.find(kClose, pos + kOpen.size());
    if (close == std::string::npos) return {};
    return rendered.substr(pos + kOpen.size(), close - pos - kOpen.size());
}

std::string parse_top_hit_url(const std::string& obs) {
    if (obs.rfind("1. ", 0) != 0) return {};
    const auto line_end = obs.find('\n');
    const std::string line = obs.substr(0, line_end);
    const auto first = line.find(" — ");
    if (first == std::string::npos) return {};
    const auto sep_len = std::string_view(" — ").size();
    const auto second = line.find(" — ", first + sep_len);
    if (second == std::string::npos) return {};
    return line.substr(first + sep_len, second - first - sep_len);
}

std::string parse_pointer_url(const std::string& obs) {
    auto pos = obs.find(kPointerMarker);
    if (pos == std::string::npos) return {};
    pos += kPointerMarker.size();
    auto end = obs.find_first_of(" \t\n", pos);
    std::string url = obs.substr(pos, end == std::string::npos ? end : end - pos);
    while (!url.empty() && url.back() == '.') url.pop_back();
    return url;
}

std::string parse_fact_value(const std::string& obs) {
    auto pos = obs.find(kFactMarker);
    if (pos == std::string::npos) return "unknown";
    auto is_pos = obs.find(" is ", pos);
    if (is_pos == std::string::npos) return "unknown";
    is_pos += 4;
    auto end = obs.find('.', is_pos);
    return trim(obs.substr(is_pos, end == std::string::npos ? end : end - is_pos));
}

}  // namespace

int categorize_last_observation(const std::string& rendered_history) {
    const std::string obs = last_observation(rendered_history);
    if (obs.empty()) return kObsStart;
    if (obs.find(kFactMarker) != std::string::npos) return kObsFact;
    if (obs.find(kPointerMarker) != std::string::npos) return kObsPointer;
    if (obs.rfind("1. ", 0) == 0) return kObsResults;
    return kObsDead;
}

ToyAgentPolicy::ToyAgentPolicy(std::string question, const ToyPolicy& policy,
                               std::uint64_t episode_seed, bool greedy)
    : question_(std::move(question)), policy_(&policy), rng_(episode_seed),
      greedy_(greedy) {}

PolicyResponse ToyAgentPolicy::generate(const std::string& rendered_history) {
    const int category = categorize_last_observation(rendered_history);
    const int state = toy_state(turn_, category);

    int action_id;
    if (greedy_) {
        const auto probs = policy_->action_probs(state);
        action_id = static_cast<int>(
            std::max_element(probs.begin(), probs.end()) - probs.begin());
    } else {
        action_id = policy_->sample_action(state, rng_);
    }
    const double lp = policy_->logprob(state, action_id);
    records_.push_back({state, action_id, lp});
    ++turn_;

    const std::string obs = last_observation(rendered_history);
    Action action;
    std::string thought;
    switch (action_id) {
        case kActSearch:
            thought = "search for the topic";
            action.kind = ActionKind::search;
            action.query = question_;
            break;
        case kActBrowseNext: {
            thought = "follow the best lead";
            action.kind = ActionKind::browse;
            action.query = question_;
            std::string url = parse_pointer_url(obs);
            if (url.empty()) url = parse_top_hit_url(obs);
            if (url.empty()) url = std::string(kDeadUrl);
            action.url = url;
            break;
        }
        case kActAnswer:
            thought = "report the figure";
            action.kind = ActionKind::answer;
            action.text = parse_fact_value(obs);
            break;
        default:
            thought = "look somewhere else";
            action.kind = ActionKind::browse;
            action.query = question_;
            action.url = std::string(kDeadUrl);
            break;
    }
    PolicyResponse resp;
    resp.message = render_message(thought, action);
    resp.token_logprobs = {lp};
    return resp;
}

ToyWorld make_world(const ToyEnv& env, std::size_t embed_dim) {
    ToyWorld world;
    world.store = std::make_shared<CorpusStore>();
    auto report = world.store->ingest_pages(env.pages);
    if (report.accepted != env.pages.size()) {
        throw std::runtime_error("make_world: generated corpus violated store invariants");
    }
    auto embedder = std::make_shared<HashingEmbedder>(embed_dim);
    world.index = std::make_shared<SearchIndex>(
        SearchIndex::build(world.store->all_pages(), embedder));
    world.gateway = std::make_shared<ToolGateway>(world.store, world.index);
    return world;
}

AblationArm parse_arm(const std::string& spec) {
    if (spec == "onpolicy") return {spec, 1};
    if (spec.rfind("offpolicy", 0) == 0) {
        int m = 4;
        auto colon = spec.find(':');
        if (colon != std::string::npos) m = std::stoi(spec.substr(colon + 1));
        return {spec, m};
    }
    throw std::invalid_argument("unknown ablation arm: " + spec);
}

namespace {

struct StepOutcome {
    std::vector<RolloutGroup> groups;
    double mean_reward = 0.0;
};

StepOutcome collect_rollouts(const ToyEnv& env, const ToyWorld& world,
                             const std::vector<std::size_t>& task_indices,
                             const ToyPolicy& policy, int rollouts_per_query,
                             int max_turns, std::uint64_t seed, int step) {
    StepOutcome out;
    double reward_sum = 0.0;
    std::size_t reward_count = 0;

    EpisodeConfig episode_config;
    episode_config.max_turns = max_turns;
    episode_config.context_budget_tokens = 1u << 20;
    episode_config.memory_enabled = false;

    for (std::size_t q = 0; q < task_indices.size(); ++q) {
        const PlantedTask& task = env.tasks[task_indices[q]];
        RolloutGroup group;
        group.query_id = task.query_id;
        for (int k = 0; k < rollouts_per_query; ++k) {
            const std::uint64_t episode_seed =
                mix64(mix64(seed, static_cast<std::uint64_t>(step)),
                      mix64(q, static_cast<std::uint64_t>(k)));
            ToyAgentPolicy client(task.question, policy, episode_seed);
            const std::string episode_id =
                task.query_id + "#s" + std::to_string(step) + "k" + std::to_string(k);
            Trajectory traj =
                run_episode(task.question, episode_id, client, *world.gateway,
                            episode_config);
            const double reward =
                judge(task.question, task.gold, traj.final_answer).reward;
            group.trajectories.push_back({client.records(), client.policy_version()});
            group.rewards.push_back(reward);
            reward_sum += reward;
            ++reward_count;
        }
        out.groups.push_back(std::move(group));
    }
    out.mean_reward = reward_count > 0 ? reward_sum / static_cast<double>(reward_count)
                                       : 0.0;
    return out;
}

void check_finite(const UpdateReport& report, const std::string& context) {
    if (std::isnan(report.objective) || std::isnan(report.grad_norm)) {
        throw DivergenceError("NaN update in " + context);
    }
}

}  // namespace

std::vector<CurvePoint> run_ablation(const std::vector<AblationArm>& arms,
                                     std::span<const std::uint64_t> seeds,
                                     const ToyTrainParams& params) {
    std::vector<CurvePoint> curves;
    for (const std::uint64_t seed : seeds) {
        const ToyEnv env = generate_env(params.env, seed);
        const ToyWorld world = make_world(env);

        // One query stream per seed, shared by every arm.
        std::mt19937_64 query_rng(mix64(seed, 0xDA7A));
        std::uniform_int_distribution<std::size_t> task_dist(0, env.tasks.size() - 1);
        std::vector<std::vector<std::size_t>> stream(
            static_cast<std::size_t>(params.steps));
        for (auto& step_tasks : stream) {
            step_tasks.resize(static_cast<std::size_t>(params.queries_per_step));
            for (auto& t : step_tasks) t = task_dist(query_rng);
        }

        for (const auto& arm : arms) {
            ToyPolicy policy(kToyStates, kToyActions);
            TrainerConfig cfg = params.trainer;
            cfg.learning_rate = params.learning_rate;
            cfg.group_size = params.rollouts_per_query;
            cfg.minibatch_splits = arm.minibatch_splits;

            for (int step = 0; step < params.steps; ++step) {
                auto outcome = collect_rollouts(
                    env, world, stream[static_cast<std::size_t>(step)], policy,
                    params.rollouts_per_query, params.max_turns, seed, step);
                const std::string context = arm.name + " seed " + std::to_string(seed) +
                                            " step " + std::to_string(step);
                if (arm.minibatch_splits == 1) {
                    auto report = on_policy_step(outcome.groups, policy, cfg);
                    check_finite(report, context);
                } else {
                    for (const auto& report :
                         off_policy_steps(outcome.groups, policy, cfg)) {
                        check_finite(report, context);
                    }
                }
                curves.push_back({step, arm.name, seed, outcome.mean_reward});
            }
        }
    }
    return curves;
}

void write_curves_csv(const std::string& path, const std::vector<CurvePoint>& curves) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw StorageError("cannot write curves file " + path);
    out << "step,arm,seed,mean_reward\n";
    for (const auto& p : curves) {
        out << p.step << ',' << p.arm << ',' << p.seed << ',' << p.mean_reward << '\n';
    }
}

int rise_step(const std::vector<double>& rewards, double delta) {
    if (rewards.size() < 5) return std::numeric_limits<int>::max();
    double baseline = 0.0;
    const std::size_t base_n = std::min<std::size_t>(3, rewards.size());
    for (std::size_t i = 0; i < base_n; ++i) baseline += rewards[i];
    baseline /= static_cast<double>(base_n);
    for (std::size_t t = 4; t < rewards.size(); ++t) {
        double window = 0.0;
        for (std::size_t i = t - 4; i <= t; ++i) window += rewards[i];
        if (window / 5.0 >= baseline + delta) return static_cast<int>(t);
    }
    return std::numeric_limits<int>::max();
}

double trailing_slope(const std::vector<double>& values, std::size_t window) {
    if (values.size() < window || window < 2) {
        return std::numeric_limits<double>::infinity();
    }
    const std::size_t begin = values.size() - window;
    const double n = static_cast<double>(window);
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < window; ++i) {
        const double x = static_cast<double>(i);
        const double y = values[begin + i];
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double denom = n * sxx - sx * sx;
    return denom == 0.0 ? 0.0 : (n * sxy - sx * sy) / denom;
}

namespace {

double greedy_validation(const ToyEnv& val_env, const ToyWorld& world,
                         const ToyPolicy& policy, int max_turns) {
    EpisodeConfig episode_config;
    episode_config.max_turns = max_turns;
    episode_config.context_budget_tokens = 1u << 20;
    double total = 0.0;
    for (const auto& task : val_env.tasks) {
        ToyAgentPolicy client(task.question, policy, /*episode_seed=*/7, /*greedy=*/true);
        Trajectory traj = run_episode(task.question, task.query_id + "#val", client,
                                      *world.gateway, episode_config);
        total += judge(task.question, task.gold, traj.final_answer).reward;
    }
    return val_env.tasks.empty() ? 0.0 : total / static_cast<double>(val_env.tasks.size());
}

}  // namespace

StageTransitionResult run_stage_transition(std::uint64_t seed,
                                           const StageTransitionParams& params) {
    StageTransitionResult result;
    result.seed = seed;

    const ToyEnv stage1_env = generate_env(params.train.env, mix64(seed, 1));
    const ToyEnv stage2_env = generate_env(params.stage2_env, mix64(seed, 2));
    ToyEnvParams val_params;
    val_params.n_tasks = params.val_tasks;
    val_params.hop_depth_weights = {{1, 0.5}, {2, 0.5}};
    val_params.distractor_pages = 0;
    const ToyEnv val_env = generate_env(val_params, mix64(seed, 3));

    // One shared corpus: stage pools plus the validation chains.
    ToyEnv combined;
    for (const auto* env : {&stage1_env, &stage2_env, &val_env}) {
        combined.pages.insert(combined.pages.end(), env->pages.begin(),
                              env->pages.end());
    }
    const ToyWorld world = make_world(combined);

    ToyPolicy policy(kToyStates, kToyActions);
    TrainerConfig cfg = params.train.trainer;
    cfg.learning_rate = params.train.learning_rate;
    cfg.group_size = params.train.rollouts_per_query;
    cfg.minibatch_splits = 1;

    std::vector<double> stage1_rewards;
    std::mt19937_64 query_rng(mix64(seed, 0xDA7A));

    auto train_step = [&](const ToyEnv& env, int max_turns, int global_step,
                          const char* arm) {
        std::uniform_int_distribution<std::size_t> task_dist(0, env.tasks.size() - 1);
        std::vector<std::size_t> tasks(
            static_cast<std::size_t>(params.train.queries_per_step));
        for (auto& t : tasks) t = task_dist(query_rng);
        auto outcome = collect_rollouts(env, world, tasks, policy,
                                        params.train.rollouts_per_query, max_turns,
                                        seed, global_step);
        auto report = on_policy_step(outcome.groups, policy, cfg);
        check_finite(report, std::string(arm) + " step " + std::to_string(global_step));
        result.train_curve.push_back({global_step, arm, seed, outcome.mean_reward});
        return outcome.mean_reward;
    };

    int global_step = 0;
    for (; global_step < params.stage1_max_steps; ++global_step) {
        stage1_rewards.push_back(
            train_step(stage1_env, params.stage1_max_turns, global_step, "stage1"));
        if (global_step % params.val_every == 0) {
            result.val_curve.emplace_back(
                global_step,
                greedy_validation(val_env, world, policy, params.stage2_max_turns));
        }
        if (stage1_rewards.size() >= params.plateau_window) {
            const double slope = trailing_slope(stage1_rewards, params.plateau_window);
            double window_mean = 0.0;
            for (std::size_t i = stage1_rewards.size() - params.plateau_window;
                 i < stage1_rewards.size(); ++i) {
                window_mean += stage1_rewards[i];
            }
            window_mean /= static_cast<double>(params.plateau_window);
            if (std::abs(slope) < params.plateau_slope && window_mean >= 0.6) {
                result.plateaued = true;
                ++global_step;
                break;
            }
        }
    }
    result.switch_step = global_step;
    result.val_at_switch =
        greedy_validation(val_env, world, policy, params.stage2_max_turns);

    for (int s = 0; s < params.stage2_steps; ++s, ++global_step) {
        train_step(stage2_env, params.stage2_max_turns, global_step, "stage2");
        if (s % params.val_every == 0) {
            result.val_curve.emplace_back(
                global_step,
                greedy_validation(val_env, world, policy, params.stage2_max_turns));
        }
    }
    result.val_end = greedy_validation(val_env, world, policy, params.stage2_max_turns);
    result.val_curve.emplace_back(global_step, result.val_end);
    return result;
}

}  // namespace webgym
