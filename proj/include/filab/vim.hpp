#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "filab/divergence.hpp"
#include "filab/envs.hpp"
#include "filab/estimation.hpp"
#include "filab/parametric.hpp"
#include "filab/random.hpp"

namespace filab {

struct VimConfig {
    Divergence divergence = Divergence::KL;
    int iterations = 500;
    int estimator_steps = 10;
    double estimator_rate = 0.05;
    double policy_rate = 0.05;
    int batch_size = 256;     // learner rollouts per iteration
    int expert_demos = 256;   // expert trajectories
    std::uint64_t seed = 0;

    void validate() const {
        if (iterations < 0) throw InputError("VimConfig: iterations must be >= 0");
        if (estimator_steps < 1 || batch_size < 1 || expert_demos < 1)
            throw InputError("VimConfig: counts must be >= 1");
        if (!(estimator_rate > 0.0) || !(policy_rate >= 0.0))
            throw InputError("VimConfig: learning rates must be positive");
    }
};

struct IterationRecord {
    int iteration = 0;
    double objective = 0.0;         // sample variational estimate after the estimator update
    double exact_divergence = 0.0;  // state-action divergence of the updated policy
    std::uint64_t theta_hash = 0;
    ModeMetrics metrics{};
};

struct TrainingHistory {
    std::vector<IterationRecord> records;
};

struct TrainingResult {
    ParametricPolicy policy;
    TrainingHistory history;
};

/// FNV-1a over the raw parameter bytes.
inline std::uint64_t hash_parameters(std::span<const double> theta) {
    std::uint64_t h = 1469598103934665603ull;
    for (double x : theta) {
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, &x, sizeof(double));
        for (unsigned char b : bytes) {
            h ^= b;
            h *= 1099511628211ull;
        }
    }
    return h;
}

/// Per-state angles drawn uniformly from [-pi, pi].
inline ParametricPolicy random_initial_policy(ParametricPolicy::Kind kind, int num_states, Rng& rng) {
    std::vector<double> theta(static_cast<std::size_t>(kind == ParametricPolicy::Kind::Bandit ? 1 : num_states));
    for (auto& t : theta) t = uniform(rng, -std::numbers::pi, std::numbers::pi);
    return ParametricPolicy(kind, std::move(theta));
}

/// Decision pairs of `count` expert trajectories.
inline SampleSet sample_expert_demos(const EnvBundle& env, int count, std::uint64_t seed) {
    Rng rng(seed);
    SampleSet out(env.mdp.num_states(), env.mdp.num_actions(), SampleSource::Expert);
    for (int i = 0; i < count; ++i) out.add(sample_trajectory(env.mdp, env.expert.policy, rng));
    return out;
}

/// Per-step costs c_t = -f*(g_f(V(s_{t-1}, a_t))) summed to go: Q_t = sum_{i >= t} c_i.
inline std::vector<double> cost_to_go(const Trajectory& traj, const Discriminator& v, const DivergenceSpec& spec) {
    std::vector<double> q(traj.actions.size());
    double acc = 0.0;
    for (std::size_t t = traj.actions.size(); t-- > 0;) {
        acc -= spec.conjugate_of_activation(v(traj.states[t], traj.actions[t]));
        q[t] = acc;
    }
    return q;
}

/// Q_t = sum_{i >= t} V(s_{i-1}, a_i).
inline std::vector<double> value_to_go(const Trajectory& traj, const Discriminator& v) {
    std::vector<double> q(traj.actions.size());
    double acc = 0.0;
    for (std::size_t t = traj.actions.size(); t-- > 0;) {
        acc += v(traj.states[t], traj.actions[t]);
        q[t] = acc;
    }
    return q;
}

/// Score-function surrogate mean_tau sum_t log pi(a_t | s_{t-1}) Q_t with Q frozen.
inline double surrogate_value(const ParametricPolicy& policy, std::span<const Trajectory> rollouts,
                              std::span<const std::vector<double>> q) {
    double total = 0.0;
    for (std::size_t k = 0; k < rollouts.size(); ++k) {
        const auto& tr = rollouts[k];
        for (std::size_t t = 0; t < tr.actions.size(); ++t)
            total += std::log(policy.probs(tr.states[t])[static_cast<std::size_t>(tr.actions[t])]) * q[k][t];
    }
    return total / static_cast<double>(rollouts.size());
}

/// Gradient of surrogate_value with respect to theta.
inline std::vector<double> surrogate_gradient(const ParametricPolicy& policy, std::span<const Trajectory> rollouts,
                                              std::span<const std::vector<double>> q) {
    std::vector<double> grad(policy.theta().size(), 0.0);
    const bool shared = policy.kind() == ParametricPolicy::Kind::Bandit;
    for (std::size_t k = 0; k < rollouts.size(); ++k) {
        const auto& tr = rollouts[k];
        for (std::size_t t = 0; t < tr.actions.size(); ++t) {
            const int s = shared ? 0 : tr.states[t];
            grad[static_cast<std::size_t>(s)] += policy.grad_log_prob(s, tr.actions[t]) * q[k][t];
        }
    }
    for (auto& g : grad) g /= static_cast<double>(rollouts.size());
    return grad;
}

inline ParametricPolicy apply_descent(const ParametricPolicy& policy, std::span<const double> grad, double rate,
                                      long index) {
    std::vector<double> theta(policy.theta().begin(), policy.theta().end());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        theta[i] -= rate * grad[i];
        if (!std::isfinite(theta[i])) throw NumericalError("policy update produced a non-finite parameter", index);
    }
    return policy.with_theta(std::move(theta));
}

/// One REINFORCE step theta <- theta - rate * mean sum_t grad log pi * Q_t on the f-VIM cost.
inline ParametricPolicy policy_gradient_step(const ParametricPolicy& policy, std::span<const Trajectory> rollouts,
                                             const Discriminator& v, const DivergenceSpec& spec, double rate) {
    if (rollouts.empty()) throw InputError("policy_gradient_step: no rollouts");
    std::vector<std::vector<double>> q;
    q.reserve(rollouts.size());
    for (const auto& tr : rollouts) q.push_back(cost_to_go(tr, v, spec));
    return apply_descent(policy, surrogate_gradient(policy, rollouts, q), rate, 0);
}

/// Expectation of the REINFORCE gradient under the policy's own trajectory distribution.
inline std::vector<double> exact_policy_gradient(const FiniteMdp& mdp, const ParametricPolicy& policy,
                                                 const Discriminator& v, const DivergenceSpec& spec,
                                                 EnumerationLimits limits = {}) {
    std::vector<double> grad(policy.theta().size(), 0.0);
    const bool shared = policy.kind() == ParametricPolicy::Kind::Bandit;
    for_each_trajectory(
        mdp, policy.to_tabular(),
        [&](const Trajectory& tr, double p) {
            const auto q = cost_to_go(tr, v, spec);
            for (std::size_t t = 0; t < tr.actions.size(); ++t) {
                const int s = shared ? 0 : tr.states[t];
                grad[static_cast<std::size_t>(s)] += p * policy.grad_log_prob(s, tr.actions[t]) * q[t];
            }
        },
        limits);
    return grad;
}

namespace detail {

inline std::vector<Trajectory> rollouts(const FiniteMdp& mdp, const TabularPolicy& policy, int count, Rng& rng) {
    std::vector<Trajectory> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) out.push_back(sample_trajectory(mdp, policy, rng));
    return out;
}

inline void require_env_samples(const EnvBundle& env, const SampleSet& samples) {
    if (samples.num_states() != env.mdp.num_states() || samples.num_actions() != env.mdp.num_actions())
        throw InputError("demonstrations do not match the environment");
    if (samples.empty()) throw InputError("demonstrations are empty");
}

} // namespace detail

/**
 * f-VIM: alternate `estimator_steps` discriminator ascent steps (warm-started)
 * with one policy-gradient step on fresh learner rollouts.
 */
inline TrainingResult run_f_vim(const EnvBundle& env, const SampleSet& expert_demos, const VimConfig& config) {
    config.validate();
    detail::require_env_samples(env, expert_demos);
    const DivergenceSpec spec(config.divergence);
    Rng rng(config.seed);
    auto policy = random_initial_policy(env.parametric_kind(), env.mdp.num_states(), rng);
    auto v = Discriminator::constant(env.mdp.num_states(), env.mdp.num_actions(), 0.0);
    const auto p = expert_demos.frequencies();
    TrainingHistory history;
    history.records.reserve(static_cast<std::size_t>(config.iterations));
    for (int it = 0; it < config.iterations; ++it) {
        const auto tab = policy.to_tabular();
        const auto batch = detail::rollouts(env.mdp, tab, config.batch_size, rng);
        SampleSet learner(env.mdp.num_states(), env.mdp.num_actions(), SampleSource::Learner);
        for (const auto& tr : batch) learner.add(tr);
        try {
            v = fit_discriminator_weighted(p, learner.frequencies(), spec, config.estimator_steps,
                                           config.estimator_rate, v);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string("f-VIM estimator at iteration ") + std::to_string(it) + ": " + e.what(),
                                 it);
        }
        std::vector<std::vector<double>> q;
        q.reserve(batch.size());
        for (const auto& tr : batch) q.push_back(cost_to_go(tr, v, spec));
        policy = apply_descent(policy, surrogate_gradient(policy, batch, q), config.policy_rate, it);

        IterationRecord rec;
        rec.iteration = it;
        rec.objective = variational_estimate(expert_demos, learner, v, spec);
        const auto updated = policy.to_tabular();
        rec.exact_divergence = state_action_divergence(env.mdp, env.expert.policy, updated, spec);
        rec.theta_hash = hash_parameters(policy.theta());
        rec.metrics = mode_metrics(updated, env);
        history.records.push_back(rec);
    }
    return {std::move(policy), std::move(history)};
}

/// Empirical conditional action frequencies; unseen states get the uniform row.
inline TabularPolicy tabular_mle(const SampleSet& demos) {
    const int S = demos.num_states(), A = demos.num_actions();
    auto counts = demos.counts();
    for (int s = 0; s < S; ++s) {
        double total = 0.0;
        for (int a = 0; a < A; ++a) total += counts[static_cast<std::size_t>(s * A + a)];
        for (int a = 0; a < A; ++a) {
            auto& c = counts[static_cast<std::size_t>(s * A + a)];
            c = total > 0.0 ? c / total : 1.0 / A;
        }
    }
    return TabularPolicy(S, A, std::move(counts));
}

/// Mean log-likelihood of the demonstrations.
inline double demo_log_likelihood(const ParametricPolicy& policy, const SampleSet& demos) {
    const bool shared = policy.kind() == ParametricPolicy::Kind::Bandit;
    double total = 0.0;
    for (const auto& [s, a] : demos.pairs())
        total += std::log(policy.probs(shared ? 0 : s)[static_cast<std::size_t>(a)]);
    return total / static_cast<double>(demos.size());
}

/**
 * Behavior cloning: gradient ascent on the mean demo log-likelihood from a
 * random angle initialization. Parameters of unseen states never move.
 */
inline ParametricPolicy behavior_cloning(const SampleSet& demos, ParametricPolicy::Kind kind, int steps, double rate,
                                         std::uint64_t seed) {
    if (demos.empty()) throw InputError("behavior_cloning: no demonstrations");
    if (steps < 0 || !(rate > 0.0)) throw InputError("behavior_cloning: invalid steps or rate");
    if (kind == ParametricPolicy::Kind::Bandit && demos.num_actions() != 3)
        throw InputError("behavior_cloning: bandit policies have three actions");
    if (kind == ParametricPolicy::Kind::Grid && demos.num_actions() != kGridActions)
        throw InputError("behavior_cloning: grid policies have four actions");
    Rng rng(seed);
    auto policy = random_initial_policy(kind, demos.num_states(), rng);
    const bool shared = kind == ParametricPolicy::Kind::Bandit;
    const auto counts = demos.counts();
    const int A = demos.num_actions();
    const double n = static_cast<double>(demos.size());
    for (int step = 0; step < steps; ++step) {
        std::vector<double> grad(policy.theta().size(), 0.0);
        for (int s = 0; s < demos.num_states(); ++s)
            for (int a = 0; a < A; ++a) {
                const double c = counts[static_cast<std::size_t>(s * A + a)];
                if (c == 0.0) continue;
                const int ps = shared ? 0 : s;
                grad[static_cast<std::size_t>(ps)] -= c / n * policy.grad_log_prob(ps, a);
            }
        policy = apply_descent(policy, grad, rate, step);
    }
    return policy;
}

} // namespace filab
