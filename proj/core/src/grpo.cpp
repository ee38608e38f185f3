#include "webgym/grpo.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace webgym {

using nlohmann::json;

void TrainerConfig::validate() const {
    if (!(eps_low > 0.0 && eps_low < 1.0)) {
        throw std::invalid_argument("trainer: eps_low must be in (0, 1)");
    }
    if (!(eps_high > 0.0)) throw std::invalid_argument("trainer: eps_high must be > 0");
    if (!(tis_lower <= 1.0 && 1.0 <= tis_upper)) {
        throw std::invalid_argument("trainer: tis bounds must bracket 1");
    }
    if (group_size < 2) throw std::invalid_argument("trainer: group_size must be >= 2");
    if (minibatch_splits < 1) {
        throw std::invalid_argument("trainer: minibatch_splits must be >= 1");
    }
}

std::vector<double> compute_advantages(std::span<const double> rewards) {
    if (rewards.size() < 2) {
        throw std::invalid_argument("compute_advantages: group size must be >= 2");
    }
    const double n = static_cast<double>(rewards.size());
    const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    const double std_dev = std::sqrt(var / n);  // population std
    std::vector<double> advantages(rewards.size());
    for (std::size_t i = 0; i < rewards.size(); ++i) {
        advantages[i] = (rewards[i] - mean) / (std_dev + kAdvantageEpsStd);
    }
    return advantages;
}

TisResult tis_weights(std::span<const double> train_logprobs,
                      std::span<const double> rollout_logprobs,
                      const TrainerConfig& config) {
    if (train_logprobs.size() != rollout_logprobs.size()) {
        throw std::invalid_argument("tis_weights: logprob length mismatch");
    }
    TisResult result;
    result.weights.resize(train_logprobs.size());
    result.vetoed.resize(train_logprobs.size());
    for (std::size_t t = 0; t < train_logprobs.size(); ++t) {
        if (std::exp(rollout_logprobs[t]) < config.veto_threshold) {
            result.weights[t] = 0.0;
            result.vetoed[t] = true;
            continue;
        }
        const double raw = std::exp(train_logprobs[t] - rollout_logprobs[t]);
        result.weights[t] = std::clamp(raw, config.tis_lower, config.tis_upper);
        result.vetoed[t] = false;
    }
    return result;
}

double surrogate_term(double ratio, double advantage, const TrainerConfig& config) {
    const double clipped =
        std::clamp(ratio, 1.0 - config.eps_low, 1.0 + config.eps_high);
    return std::min(ratio * advantage, clipped * advantage);
}

double clipped_surrogate(const std::vector<std::vector<double>>& ratios_per_trajectory,
                         std::span<const double> advantages, const TrainerConfig& config,
                         const std::vector<std::vector<double>>* token_weights) {
    if (ratios_per_trajectory.empty()) {
        throw std::invalid_argument("clipped_surrogate: empty batch");
    }
    if (ratios_per_trajectory.size() != advantages.size()) {
        throw std::invalid_argument("clipped_surrogate: advantage count mismatch");
    }
    if (token_weights && token_weights->size() != ratios_per_trajectory.size()) {
        throw std::invalid_argument("clipped_surrogate: weight count mismatch");
    }
    double sum_over_trajectories = 0.0;
    for (std::size_t i = 0; i < ratios_per_trajectory.size(); ++i) {
        const auto& ratios = ratios_per_trajectory[i];
        if (ratios.empty()) {
            throw std::invalid_argument("clipped_surrogate: empty token set");
        }
        if (token_weights && (*token_weights)[i].size() != ratios.size()) {
            throw std::invalid_argument("clipped_surrogate: weight length mismatch");
        }
        double token_sum = 0.0;
        for (std::size_t t = 0; t < ratios.size(); ++t) {
            const double w = token_weights ? (*token_weights)[i][t] : 1.0;
            token_sum += w * surrogate_term(ratios[t], advantages[i], config);
        }
        sum_over_trajectories += token_sum / static_cast<double>(ratios.size());
    }
    return sum_over_trajectories / static_cast<double>(ratios_per_trajectory.size());
}

ToyPolicy::ToyPolicy(int n_states, int n_actions)
    : n_states_(n_states), n_actions_(n_actions) {
    if (n_states < 1 || n_actions < 2) {
        throw std::invalid_argument("toy policy needs >= 1 state and >= 2 actions");
    }
    params_.assign(static_cast<std::size_t>(n_states) * n_actions, 0.0);
}

double ToyPolicy::logit(int state, int action) const {
    return params_[static_cast<std::size_t>(state) * n_actions_ + action];
}

std::vector<double> ToyPolicy::action_probs(int state) const {
    const std::size_t base = static_cast<std::size_t>(state) * n_actions_;
    double max_logit = params_[base];
    for (int a = 1; a < n_actions_; ++a) max_logit = std::max(max_logit, params_[base + a]);
    std::vector<double> probs(static_cast<std::size_t>(n_actions_));
    double sum = 0.0;
    for (int a = 0; a < n_actions_; ++a) {
        probs[a] = std::exp(params_[base + a] - max_logit);
        sum += probs[a];
    }
    for (double& p : probs) p /= sum;
    return probs;
}

double ToyPolicy::logprob(int state, int action) const {
    const std::size_t base = static_cast<std::size_t>(state) * n_actions_;
    double max_logit = params_[base];
    for (int a = 1; a < n_actions_; ++a) max_logit = std::max(max_logit, params_[base + a]);
    double sum = 0.0;
    for (int a = 0; a < n_actions_; ++a) sum += std::exp(params_[base + a] - max_logit);
    return params_[base + action] - max_logit - std::log(sum);
}

int ToyPolicy::sample_action(int state, std::mt19937_64& rng) const {
    const auto probs = action_probs(state);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double u = unit(rng);
    double cum = 0.0;
    for (int a = 0; a < n_actions_; ++a) {
        cum += probs[a];
        if (u <= cum) return a;
    }
    return n_actions_ - 1;
}

void ToyPolicy::apply_ascent(std::span<const double> grad, double learning_rate) {
    if (grad.size() != params_.size()) {
        throw std::invalid_argument("apply_ascent: gradient size mismatch");
    }
    for (std::size_t i = 0; i < params_.size(); ++i) params_[i] += learning_rate * grad[i];
    ++version_;
}

void ToyPolicy::set_params(std::span<const double> params) {
    if (params.size() != params_.size()) {
        throw std::invalid_argument("set_params: size mismatch");
    }
    std::copy(params.begin(), params.end(), params_.begin());
}

std::string update_report_to_json(const UpdateReport& report) {
    json j;
    j["step"] = report.step;
    j["objective"] = report.objective;
    j["grad_norm"] = report.grad_norm;
    j["clip_fraction"] = report.clip_fraction;
    j["veto_fraction"] = report.veto_fraction;
    j["mean_reward"] = report.mean_reward;
    return j.dump();
}

BatchEval eval_clipped_surrogate(const std::vector<const ToyTrajectory*>& trajectories,
                                 std::span<const double> advantages,
                                 const ToyPolicy& policy, const TrainerConfig& config) {
    if (trajectories.empty()) {
        throw std::invalid_argument("eval_clipped_surrogate: empty batch");
    }
    if (trajectories.size() != advantages.size()) {
        throw std::invalid_argument("eval_clipped_surrogate: advantage count mismatch");
    }
    BatchEval out;
    out.grad.assign(policy.param_count(), 0.0);

    const double n_traj = static_cast<double>(trajectories.size());
    std::size_t total_tokens = 0;
    std::size_t clipped_tokens = 0;
    std::size_t vetoed_tokens = 0;

    for (std::size_t i = 0; i < trajectories.size(); ++i) {
        const auto& steps = trajectories[i]->steps;
        if (steps.empty()) {
            throw std::invalid_argument("eval_clipped_surrogate: empty token set");
        }
        const double advantage = advantages[i];
        const double inv_tokens = 1.0 / static_cast<double>(steps.size());
        double token_sum = 0.0;

        for (const auto& step : steps) {
            ++total_tokens;
            if (config.tis_enabled &&
                std::exp(step.rollout_logprob) < config.veto_threshold) {
                ++vetoed_tokens;
                continue;  // weight 0: the token is dropped, not the trajectory
            }
            const double lp_now = policy.logprob(step.state, step.action);
            const double ratio = std::exp(lp_now - step.rollout_logprob);
            const double weight =
                config.tis_enabled ? std::clamp(ratio, config.tis_lower, config.tis_upper)
                                   : 1.0;
            token_sum += weight * surrogate_term(ratio, advantage, config);

            const bool clip_active = (advantage > 0.0 && ratio > 1.0 + config.eps_high) ||
                                     (advantage < 0.0 && ratio < 1.0 - config.eps_low);
            if (clip_active) {
                ++clipped_tokens;
                continue;  // min() took the clipped branch: zero gradient
            }
            // d/dtheta [w * r * A] with w treated as a constant:
            // coeff * (one_hot(action) - softmax(state)).
            const double coeff = weight * advantage * ratio * inv_tokens / n_traj;
            if (coeff == 0.0) continue;
            const auto probs = policy.action_probs(step.state);
            const std::size_t base =
                static_cast<std::size_t>(step.state) * policy.n_actions();
            for (int a = 0; a < policy.n_actions(); ++a) {
                out.grad[base + a] -= coeff * probs[a];
            }
            out.grad[base + step.action] += coeff;
        }
        out.objective += token_sum * inv_tokens / n_traj;
    }
    out.clip_fraction =
        total_tokens > 0 ? static_cast<double>(clipped_tokens) / total_tokens : 0.0;
    out.veto_fraction =
        total_tokens > 0 ? static_cast<double>(vetoed_tokens) / total_tokens : 0.0;
    return out;
}

namespace {

struct FlatBatch {
    std::vector<const ToyTrajectory*> trajectories;
    std::vector<double> advantages;
    std::vector<double> rewards;
};

FlatBatch flatten(const std::vector<RolloutGroup>& batch) {
    FlatBatch flat;
    for (const auto& group : batch) {
        if (group.trajectories.size() != group.rewards.size()) {
            throw std::invalid_argument("rollout group: reward count mismatch");
        }
        const auto advantages = compute_advantages(group.rewards);
        for (std::size_t i = 0; i < group.trajectories.size(); ++i) {
            flat.trajectories.push_back(&group.trajectories[i]);
            flat.advantages.push_back(advantages[i]);
            flat.rewards.push_back(group.rewards[i]);
        }
    }
    return flat;
}

double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

UpdateReport apply_update(const std::vector<const ToyTrajectory*>& trajectories,
                          std::span<const double> advantages,
                          std::span<const double> rewards, ToyPolicy& policy,
                          const TrainerConfig& config) {
    auto eval = eval_clipped_surrogate(trajectories, advantages, policy, config);
    policy.apply_ascent(eval.grad, config.learning_rate);
    UpdateReport report;
    report.objective = eval.objective;
    report.grad_norm = l2_norm(eval.grad);
    report.clip_fraction = eval.clip_fraction;
    report.veto_fraction = eval.veto_fraction;
    report.mean_reward =
        rewards.empty()
            ? 0.0
            : std::accumulate(rewards.begin(), rewards.end(), 0.0) /
                  static_cast<double>(rewards.size());
    return report;
}

}  // namespace

UpdateReport on_policy_step(const std::vector<RolloutGroup>& batch, ToyPolicy& policy,
                            const TrainerConfig& config) {
    config.validate();
    if (config.minibatch_splits != 1) {
        throw std::invalid_argument(
            "on_policy_step: minibatch_splits must be 1 on the on-policy path");
    }
    for (const auto& group : batch) {
        for (const auto& t : group.trajectories) {
            if (t.policy_version != policy.version()) {
                throw StalenessError("on_policy_step: trajectory from policy version " +
                                     std::to_string(t.policy_version) +
                                     ", current is " + std::to_string(policy.version()));
            }
        }
    }
    auto flat = flatten(batch);
    return apply_update(flat.trajectories, flat.advantages, flat.rewards, policy, config);
}

std::vector<UpdateReport> off_policy_steps(const std::vector<RolloutGroup>& batch,
                                           ToyPolicy& policy,
                                           const TrainerConfig& config) {
    config.validate();
    const std::size_t m = static_cast<std::size_t>(config.minibatch_splits);
    auto flat = flatten(batch);
    if (m > flat.trajectories.size()) {
        throw std::invalid_argument("off_policy_steps: more minibatches than samples");
    }
    std::vector<UpdateReport> reports;
    const std::size_t n = flat.trajectories.size();
    std::size_t begin = 0;
    for (std::size_t chunk = 0; chunk < m; ++chunk) {
        const std::size_t size = n / m + (chunk < n % m ? 1 : 0);
        std::vector<const ToyTrajectory*> trajs(
            flat.trajectories.begin() + static_cast<std::ptrdiff_t>(begin),
            flat.trajectories.begin() + static_cast<std::ptrdiff_t>(begin + size));
        std::span<const double> advantages(flat.advantages.data() + begin, size);
        std::span<const double> rewards(flat.rewards.data() + begin, size);
        auto report = apply_update(trajs, advantages, rewards, policy, config);
        report.step = static_cast<int>(chunk);
        reports.push_back(report);
        begin += size;
    }
    return reports;
}

}  // namespace webgym
