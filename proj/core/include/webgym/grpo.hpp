#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace webgym {

struct TrainerConfig {
    int group_size = 8;      // K rollouts per query
    int batch_queries = 128;
    double eps_low = 0.2;
    double eps_high = 0.28;
    double learning_rate = 1e-6;
    bool tis_enabled = true;
    double tis_upper = 2.0;
    double tis_lower = 0.5;
    double veto_threshold = 1e-4;
    int minibatch_splits = 1;  // 1 = strictly on-policy; >1 only for the ablation

    void validate() const;  // 0 < eps_low < 1, eps_high > 0, tis_lower <= 1 <= tis_upper
};

inline constexpr double kAdvantageEpsStd = 1e-8;

// Group-normalized advantages: A_i = (r_i - mean) / (population std + 1e-8).
// All-equal rewards give all zeros. Requires K >= 2.
std::vector<double> compute_advantages(std::span<const double> rewards);

struct TisResult {
    std::vector<double> weights;  // 0 where vetoed
    std::vector<bool> vetoed;
};

// Per-token truncated importance weights between the training and rollout
// engines: w_t = exp(lp_train - lp_rollout) clamped into
// [tis_lower, tis_upper]; a token whose rollout probability falls below
// veto_threshold is vetoed (weight 0). Weights multiply the surrogate terms
// as constants.
TisResult tis_weights(std::span<const double> train_logprobs,
                      std::span<const double> rollout_logprobs,
                      const TrainerConfig& config);

// One clipped-surrogate token term: min(r*A, clip(r, 1-eps_low, 1+eps_high)*A).
double surrogate_term(double ratio, double advantage, const TrainerConfig& config);

// Token terms averaged within each trajectory, then averaged over
// trajectories ("token-mean, sequence-mean"). `token_weights`, when given,
// multiplies terms elementwise. The objective is maximized; there is no KL
// penalty and no entropy bonus anywhere in it.
double clipped_surrogate(const std::vector<std::vector<double>>& ratios_per_trajectory,
                         std::span<const double> advantages, const TrainerConfig& config,
                         const std::vector<std::vector<double>>* token_weights = nullptr);

// Tabular softmax policy over a finite state space; the desk-scale stand-in
// with closed-form gradients.
class ToyPolicy {
public:
    ToyPolicy(int n_states, int n_actions);

    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }

    double logit(int state, int action) const;
    std::vector<double> action_probs(int state) const;
    double logprob(int state, int action) const;
    int sample_action(int state, std::mt19937_64& rng) const;

    std::uint64_t version() const { return version_; }

    // theta += lr * grad (gradient ascent); bumps the version.
    void apply_ascent(std::span<const double> grad, double learning_rate);

    std::span<const double> params() const { return params_; }
    void set_params(std::span<const double> params);  // does not bump the version
    std::size_t param_count() const { return params_.size(); }

private:
    int n_states_;
    int n_actions_;
    std::vector<double> params_;  // row-major [state][action]
    std::uint64_t version_ = 0;
};

struct ToyStepRecord {
    int state = 0;
    int action = 0;
    double rollout_logprob = 0.0;  // recorded under the rollout engine
};

struct ToyTrajectory {
    std::vector<ToyStepRecord> steps;
    std::uint64_t policy_version = 0;
};

// K trajectories for one query with binary rewards; the unit of advantage
// normalization.
struct RolloutGroup {
    std::string query_id;
    std::vector<ToyTrajectory> trajectories;
    std::vector<double> rewards;
};

struct StalenessError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UpdateReport {
    int step = 0;
    double objective = 0.0;
    double grad_norm = 0.0;
    double clip_fraction = 0.0;
    double veto_fraction = 0.0;
    double mean_reward = 0.0;
};

std::string update_report_to_json(const UpdateReport& report);

struct BatchEval {
    double objective = 0.0;
    std::vector<double> grad;  // d objective / d theta, flat [state][action]
    double clip_fraction = 0.0;
    double veto_fraction = 0.0;
};

// Objective and analytic gradient of the clipped surrogate on a flattened
// batch. Ratios are exp(lp_current - lp_rollout) per token; advantages
// broadcast per trajectory.
BatchEval eval_clipped_surrogate(const std::vector<const ToyTrajectory*>& trajectories,
                                 std::span<const double> advantages,
                                 const ToyPolicy& policy, const TrainerConfig& config);

// Exactly one gradient-ascent step on the whole rollout batch, which is then
// discarded. Every trajectory must have been generated by the current policy
// parameters; anything stale raises StalenessError. With fresh trajectories
// all ratios are 1 at evaluation time, so the step equals the vanilla policy
// gradient with normalized advantages.
UpdateReport on_policy_step(const std::vector<RolloutGroup>& batch, ToyPolicy& policy,
                            const TrainerConfig& config);

// The off-policy ablation arm: the batch is split into `minibatch_splits`
// contiguous minibatches and consumed in successive updates, ratios always
// referenced to the rollout-time log-probabilities. minibatch_splits == 1
// degenerates to the on-policy update.
std::vector<UpdateReport> off_policy_steps(const std::vector<RolloutGroup>& batch,
                                           ToyPolicy& policy,
                                           const TrainerConfig& config);

}  // namespace webgym
