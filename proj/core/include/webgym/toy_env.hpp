#pragma once

#include "webgym/corpus_store.hpp"
#include "webgym/episode.hpp"
#include "webgym/grpo.hpp"
#include "webgym/search_index.hpp"
#include "webgym/tool_gateway.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace webgym {

// A task whose answer is planted at the end of a page chain: the question's
// unique topic token retrieves only the chain head, each chain page points at
// the next, and the final page carries the fact. Solvable in exactly
// hop_depth + 1 tool calls (one search plus hop_depth browses).
struct PlantedTask {
    std::string query_id;
    std::string question;
    std::string gold;
    int hop_depth = 1;
    std::vector<std::string> chain_urls;  // head first
};

struct ToyEnv {
    std::vector<WebPage> pages;
    std::vector<PlantedTask> tasks;
};

struct ToyEnvParams {
    std::size_t n_tasks = 100;
    std::map<int, double> hop_depth_weights = {{1, 1.0}};  // depth (1..3) -> weight
    std::size_t distractor_pages = 50;
    int iteration = 0;
};

// Deterministic under the seed, bytes included. Every page satisfies the
// store invariants (unique url, unique content, > 1000 characters).
ToyEnv generate_env(const ToyEnvParams& params, std::uint64_t seed);

// Deterministic action script that solves the task; replaying it against the
// generated corpus yields reward 1.
std::vector<std::string> oracle_script(const PlantedTask& task);

// Emits a fixed message list, then the fallback forever after.
class ScriptedPolicy final : public PolicyClient {
public:
    explicit ScriptedPolicy(std::vector<std::string> messages,
                            std::string fallback = "<answer>unknown</answer>");
    PolicyResponse generate(const std::string& rendered_history) override;

private:
    std::vector<std::string> messages_;
    std::string fallback_;
    std::size_t next_ = 0;
};

// Policy factories for difficulty-assessment fixtures: answer the gold answer
// on selected rollout seeds (or with a seed-hashed probability), a wrong
// answer otherwise.
PolicyFactory scripted_success_factory(std::string gold,
                                       std::set<std::uint64_t> correct_seeds);
PolicyFactory scripted_bernoulli_factory(std::string gold, double success_prob,
                                         std::uint64_t salt = 0);

// ---------------------------------------------------------------------------
// Trainable toy agent
// ---------------------------------------------------------------------------

// Observation categories the toy agent distinguishes.
enum ToyObsCategory {
    kObsStart = 0,    // no observation yet
    kObsResults = 1,  // search results
    kObsPointer = 2,  // chain page pointing onward
    kObsFact = 3,     // page carrying the planted fact
    kObsDead = 4,     // anything else
};

inline constexpr int kToyCategories = 5;
inline constexpr int kToyTurnBuckets = 6;
inline constexpr int kToyStates = kToyCategories * kToyTurnBuckets;

// Toy actions: search the question, browse the next promising url, answer
// with the extracted fact, or wander to a dead page.
enum ToyAction {
    kActSearch = 0,
    kActBrowseNext = 1,
    kActAnswer = 2,
    kActWander = 3,
};
inline constexpr int kToyActions = 4;

int toy_state(int turn, int category);
int categorize_last_observation(const std::string& rendered_history);

// PolicyClient over a tabular softmax head: derives its state from the last
// observation in the rendered history, samples (or argmaxes) an action, and
// emits the corresponding wire message while recording the (state, action,
// logprob) tape for the trainer.
class ToyAgentPolicy final : public PolicyClient {
public:
    ToyAgentPolicy(std::string question, const ToyPolicy& policy,
                   std::uint64_t episode_seed, bool greedy = false);

    PolicyResponse generate(const std::string& rendered_history) override;

    const std::vector<ToyStepRecord>& records() const { return records_; }
    std::uint64_t policy_version() const { return policy_->version(); }

private:
    std::string question_;
    const ToyPolicy* policy_;
    std::mt19937_64 rng_;
    bool greedy_;
    int turn_ = 0;
    std::vector<ToyStepRecord> records_;
};

struct ToyWorld {
    std::shared_ptr<CorpusStore> store;
    std::shared_ptr<SearchIndex> index;
    std::shared_ptr<ToolGateway> gateway;
};

ToyWorld make_world(const ToyEnv& env, std::size_t embed_dim = 64);

// ---------------------------------------------------------------------------
// Ablations
// ---------------------------------------------------------------------------

struct AblationArm {
    std::string name;          // e.g. "onpolicy", "offpolicy:4"
    int minibatch_splits = 1;  // 1 = on-policy
};

AblationArm parse_arm(const std::string& spec);  // "onpolicy" | "offpolicy:<m>"

struct ToyTrainParams {
    ToyEnvParams env;
    int steps = 200;
    int queries_per_step = 8;
    int rollouts_per_query = 8;
    int max_turns = 6;
    double learning_rate = 0.3;
    TrainerConfig trainer;
};

struct CurvePoint {
    int step = 0;
    std::string arm;
    std::uint64_t seed = 0;
    double mean_reward = 0.0;
};

struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Both arms of one seed share the environment, the initial parameters and the
// query stream; only the update rule differs. Aborts with DivergenceError on
// a NaN objective.
std::vector<CurvePoint> run_ablation(const std::vector<AblationArm>& arms,
                                     std::span<const std::uint64_t> seeds,
                                     const ToyTrainParams& params);

void write_curves_csv(const std::string& path, const std::vector<CurvePoint>& curves);

// First step whose trailing-5 mean reward clears the arm's starting level by
// `delta`; INT_MAX when it never does.
int rise_step(const std::vector<double>& rewards, double delta = 0.05);

// Least-squares slope of the last `window` points.
double trailing_slope(const std::vector<double>& values, std::size_t window);

struct StageTransitionParams {
    ToyTrainParams train;                       // stage-1 pool settings live in train.env
    ToyEnvParams stage2_env;                    // harder mixture
    int stage1_max_turns = 3;                   // depth-1 only within this budget
    int stage2_max_turns = 6;
    int stage1_max_steps = 150;                 // plateau search bound
    int stage2_steps = 50;
    std::size_t plateau_window = 30;
    double plateau_slope = 0.001;
    int val_every = 5;
    std::size_t val_tasks = 60;                 // mixed-depth fixed validation set
};

struct StageTransitionResult {
    std::uint64_t seed = 0;
    bool plateaued = false;
    int switch_step = 0;
    double val_at_switch = 0.0;
    double val_end = 0.0;
    std::vector<CurvePoint> train_curve;
    std::vector<std::pair<int, double>> val_curve;  // (global step, greedy reward)
};

// Stage 1 trains on the easy pool until the training-reward slope flattens
// (or the step bound), then stage 2 continues on the harder mixture with the
// larger turn budget. Validation is greedy rollout reward on a fixed
// mixed-depth task set evaluated under the stage-2 budget throughout.
StageTransitionResult run_stage_transition(std::uint64_t seed,
                                           const StageTransitionParams& params);

}  // namespace webgym
