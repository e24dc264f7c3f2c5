#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "filab/divergence.hpp"
#include "filab/envs.hpp"
#include "filab/estimation.hpp"
#include "filab/vim.hpp"

namespace filab {

/// Append-only aggregate of (state, cost vector) pairs.
class CostDataset {
public:
    struct Entry {
        int state;
        std::vector<double> costs;
        int iteration;
    };

    CostDataset(int num_states, int num_actions) : num_states_(num_states), num_actions_(num_actions) {
        if (num_states < 1 || num_actions < 1) throw InputError("CostDataset: dimensions must be positive");
    }

    void add(int state, std::vector<double> costs, int iteration) {
        if (state < 0 || state >= num_states_) throw InputError("CostDataset: state out of range");
        if (costs.size() != static_cast<std::size_t>(num_actions_))
            throw InputError("CostDataset: cost vector has the wrong length");
        for (double c : costs)
            if (!std::isfinite(c)) throw InputError("CostDataset: costs must be finite");
        entries_.push_back({state, std::move(costs), iteration});
    }

    int num_states() const noexcept { return num_states_; }
    int num_actions() const noexcept { return num_actions_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    std::span<const Entry> entries() const noexcept { return entries_; }

    /// Summed cost per (state, action).
    std::vector<double> totals() const {
        std::vector<double> t(static_cast<std::size_t>(num_states_) * num_actions_, 0.0);
        for (const auto& e : entries_)
            for (int a = 0; a < num_actions_; ++a)
                t[static_cast<std::size_t>(e.state) * num_actions_ + a] += e.costs[static_cast<std::size_t>(a)];
        return t;
    }

private:
    int num_states_;
    int num_actions_;
    std::vector<Entry> entries_;
};

/// Per-state argmin of the summed cost (lowest index on ties); absent states take action 0.
inline TabularPolicy cost_sensitive_classify(const CostDataset& dataset) {
    if (dataset.empty()) throw InputError("cost_sensitive_classify: empty dataset");
    const int S = dataset.num_states(), A = dataset.num_actions();
    const auto totals = dataset.totals();
    std::vector<int> actions(static_cast<std::size_t>(S), 0);
    for (int s = 0; s < S; ++s) {
        int best = 0;
        for (int a = 1; a < A; ++a)
            if (totals[static_cast<std::size_t>(s * A + a)] < totals[static_cast<std::size_t>(s * A + best)]) best = a;
        actions[static_cast<std::size_t>(s)] = best;
    }
    return TabularPolicy::deterministic(actions, A);
}

/// Mean over entries of the cost of the action `policy` picks (deterministic policies).
inline double classification_cost(const CostDataset& dataset, const TabularPolicy& policy) {
    if (dataset.empty()) return 0.0;
    double total = 0.0;
    for (const auto& e : dataset.entries())
        for (int a = 0; a < dataset.num_actions(); ++a)
            total += policy.prob(e.state, a) * e.costs[static_cast<std::size_t>(a)];
    return total / static_cast<double>(dataset.size());
}

/// Copy of `env` whose expert is replaced by `expert` (for in-class expert runs).
inline EnvBundle with_expert(const EnvBundle& env, const TabularPolicy& expert) {
    detail::require_compatible(env.mdp, expert);
    EnvBundle out = env;
    out.expert = ExpertModel{expert, {expert}, {1.0}};
    return out;
}

struct DaggerIteration {
    int iteration = 0;
    TabularPolicy policy;               // policy rolled out at this iteration
    double expected_action_kl = 0.0;    // E_{rho_pi} KL(expert(.|s) || pi(.|s))
    double expected_action_rkl = 0.0;
};

struct DaggerResult {
    TabularPolicy policy;  // best iterate by expected action KL
    std::vector<DaggerIteration> iterations;
    SampleSet aggregate;
};

/**
 * DAgger with pure learner rollouts: roll out, label visited states with a
 * sampled expert action, aggregate, refit the tabular MLE. Starts from the
 * uniform policy.
 */
inline DaggerResult run_dagger(const EnvBundle& env, int iterations, int rollouts_per_iter, std::uint64_t seed) {
    if (iterations < 1 || rollouts_per_iter < 1) throw InputError("run_dagger: counts must be >= 1");
    const int S = env.mdp.num_states(), A = env.mdp.num_actions();
    Rng rng(seed);
    auto policy = TabularPolicy::uniform(S, A);
    SampleSet aggregate(S, A, SampleSource::Expert);
    std::vector<DaggerIteration> log;
    const DivergenceSpec kl(Divergence::KL), rkl(Divergence::RKL);
    for (int it = 0; it < iterations; ++it) {
        log.push_back({it, policy, expected_action_divergence(env.mdp, env.expert.policy, policy, kl),
                       expected_action_divergence(env.mdp, env.expert.policy, policy, rkl)});
        for (int k = 0; k < rollouts_per_iter; ++k) {
            const auto tr = sample_trajectory(env.mdp, policy, rng);
            for (std::size_t t = 0; t < tr.actions.size(); ++t)
                aggregate.add(tr.states[t], sample_categorical(rng, env.expert.policy.row(tr.states[t])));
        }
        policy = tabular_mle(aggregate);
    }
    log.push_back({iterations, policy, expected_action_divergence(env.mdp, env.expert.policy, policy, kl),
                   expected_action_divergence(env.mdp, env.expert.policy, policy, rkl)});
    std::size_t best = 0;
    for (std::size_t i = 1; i < log.size(); ++i)
        if (log[i].expected_action_kl < log[best].expected_action_kl) best = i;
    return {log[best].policy, std::move(log), std::move(aggregate)};
}

/**
 * Estimator step of the interactive RKL variant on cell weights: ascent on
 * sum_x p*(x) (-exp(V(x))) + q(x) V(x), whose maximizer is V = log(q / p*).
 */
inline Discriminator fit_action_ratio_discriminator(std::span<const double> expert_weights,
                                                    std::span<const double> learner_weights, int steps,
                                                    double learning_rate, const Discriminator& init) {
    if (expert_weights.size() != init.weights().size() || learner_weights.size() != init.weights().size())
        throw InputError("fit_action_ratio_discriminator: table sizes do not match");
    std::vector<double> w(init.weights().begin(), init.weights().end());
    for (int step = 0; step < steps; ++step) {
        for (std::size_t i = 0; i < w.size(); ++i) {
            w[i] += learning_rate * (learner_weights[i] - expert_weights[i] * std::exp(w[i]));
            if (!std::isfinite(w[i])) throw NumericalError("interactive estimator: non-finite weight", step);
        }
    }
    return Discriminator(init.num_states(), init.num_actions(), std::move(w));
}

/**
 * Interactive RKL-VIM: fresh learner rollouts, one sampled expert label per
 * visited state, estimator ascent on E_expert[-exp(V)] + E_learner[V], then a
 * policy-gradient step with Q_t = sum_{i >= t} V(s_{i-1}, a_i).
 */
inline TrainingResult run_irkl_vim(const EnvBundle& env, const VimConfig& config) {
    config.validate();
    if (config.divergence != Divergence::RKL) throw InputError("run_irkl_vim: the interactive variant is RKL only");
    const int S = env.mdp.num_states(), A = env.mdp.num_actions();
    const DivergenceSpec rkl(Divergence::RKL);
    Rng rng(config.seed);
    auto policy = random_initial_policy(env.parametric_kind(), S, rng);
    auto v = Discriminator::constant(S, A, 0.0);
    TrainingHistory history;
    for (int it = 0; it < config.iterations; ++it) {
        const auto batch = detail::rollouts(env.mdp, policy.to_tabular(), config.batch_size, rng);
        SampleSet learner(S, A, SampleSource::Learner), expert(S, A, SampleSource::Expert);
        for (const auto& tr : batch) {
            learner.add(tr);
            for (std::size_t t = 0; t < tr.actions.size(); ++t)
                expert.add(tr.states[t], sample_categorical(rng, env.expert.policy.row(tr.states[t])));
        }
        const auto pe = expert.frequencies();
        const auto pl = learner.frequencies();
        try {
            v = fit_action_ratio_discriminator(pe, pl, config.estimator_steps, config.estimator_rate, v);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string("interactive RKL-VIM estimator at iteration ") + std::to_string(it) +
                                     ": " + e.what(),
                                 it);
        }
        std::vector<std::vector<double>> q;
        q.reserve(batch.size());
        for (const auto& tr : batch) q.push_back(value_to_go(tr, v));
        policy = apply_descent(policy, surrogate_gradient(policy, batch, q), config.policy_rate, it);

        IterationRecord rec;
        rec.iteration = it;
        double obj = 0.0;
        for (std::size_t i = 0; i < pe.size(); ++i) obj += pl[i] * v.weights()[i] - pe[i] * std::exp(v.weights()[i]);
        rec.objective = obj;
        const auto updated = policy.to_tabular();
        rec.exact_divergence = state_action_divergence(env.mdp, env.expert.policy, updated, rkl);
        rec.theta_hash = hash_parameters(policy.theta());
        rec.metrics = mode_metrics(updated, env);
        history.records.push_back(rec);
    }
    return {std::move(policy), std::move(history)};
}

struct InteractiveIteration {
    int iteration = 0;
    TabularPolicy policy;           // pi_n, the policy rolled out at this iteration
    double exact_rkl = 0.0;         // trajectory RKL of pi_n, via H * expected action RKL
    double classification_cost = 0.0;
    double ratio_error = 0.0;       // E_{rho_pi_n} E_{expert} |r_hat - pi_n / expert|
    std::vector<double> ratio;      // cost table r_hat_n used for aggregation
};

struct InteractiveRunReport {
    std::vector<InteractiveIteration> iterations;
    std::size_t best_index = 0;
};

struct InteractiveDreResult {
    TabularPolicy policy;
    InteractiveRunReport report;
};

/**
 * Interactive density-ratio minimization with data aggregation.
 *
 * Each iteration rolls out pi_n for E episodes, labels every visited state with
 * a sampled expert action, estimates r_hat = lsq_density_ratio(learner, expert, c)
 * and appends one (s, r_hat(s, .)) entry per visit. Actions the learner never
 * took at s cost c. pi_{n+1} is the cost-sensitive classifier on the aggregate.
 * Starts from the uniform policy; returns the iterate with the least exact RKL.
 */
inline InteractiveDreResult run_interactive_dre(const EnvBundle& env, int iterations, int episodes_per_iter,
                                                double clip_floor, std::uint64_t seed) {
    if (iterations < 1 || episodes_per_iter < 1) throw InputError("run_interactive_dre: counts must be >= 1");
    if (!(clip_floor > 0.0 && clip_floor <= 1.0)) throw InputError("run_interactive_dre: c must lie in (0, 1]");
    const int S = env.mdp.num_states(), A = env.mdp.num_actions(), H = env.mdp.horizon();
    const DivergenceSpec rkl(Divergence::RKL);
    Rng rng(seed);
    auto policy = TabularPolicy::uniform(S, A);
    CostDataset dataset(S, A);
    InteractiveRunReport report;
    for (int it = 0; it < iterations; ++it) {
        SampleSet learner(S, A, SampleSource::Learner), expert(S, A, SampleSource::Expert);
        for (int k = 0; k < episodes_per_iter; ++k) {
            const auto tr = sample_trajectory(env.mdp, policy, rng);
            learner.add(tr);
            for (std::size_t t = 0; t < tr.actions.size(); ++t)
                expert.add(tr.states[t], sample_categorical(rng, env.expert.policy.row(tr.states[t])));
        }
        const auto est = lsq_density_ratio(learner, expert, clip_floor);
        const auto seen = learner.counts();
        std::vector<double> ratio(est.values);
        for (std::size_t i = 0; i < ratio.size(); ++i)
            if (seen[i] == 0.0) ratio[i] = clip_floor;
        for (const auto& sa : learner.pairs())
            dataset.add(sa.state,
                        std::vector<double>(ratio.begin() + sa.state * A, ratio.begin() + (sa.state + 1) * A), it);

        const auto occ = occupancy(env.mdp, policy);
        double err = 0.0;
        for (int s = 0; s < S; ++s) {
            const double w = occ.avg_state[static_cast<std::size_t>(s)];
            if (w == 0.0) continue;
            for (int a = 0; a < A; ++a) {
                const double pe = env.expert.policy.prob(s, a);
                if (pe == 0.0) continue;
                err += w * pe * std::abs(ratio[static_cast<std::size_t>(s * A + a)] - policy.prob(s, a) / pe);
            }
        }
        InteractiveIteration rec{.iteration = it,
                                 .policy = policy,
                                 .exact_rkl = H * expected_action_divergence(env.mdp, env.expert.policy, policy, rkl),
                                 .classification_cost = 0.0,
                                 .ratio_error = err,
                                 .ratio = std::move(ratio)};
        policy = cost_sensitive_classify(dataset);
        rec.classification_cost = classification_cost(dataset, policy);
        report.iterations.push_back(std::move(rec));
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < report.iterations.size(); ++i)
        if (report.iterations[i].exact_rkl < report.iterations[best].exact_rkl) best = i;
    report.best_index = best;
    auto chosen = report.iterations[best].policy;
    return {std::move(chosen), std::move(report)};
}

/// Terms of the interactive DRE guarantee, all measured with exact expectations.
struct DreGuaranteeCheck {
    double best_rkl = 0.0;        // min over iterates of the trajectory RKL
    double gamma = 0.0;           // max_n E_{rho_n} E_{expert} |r_hat_n - r_n|
    double epsilon_class = 0.0;   // max(0, min_pi (1/N) sum_n l_n(pi))
    double regret = 0.0;          // (1/N) [sum_n l_hat_n(pi_n) - min_pi sum_n l_hat_n(pi)]
    double min_expert_prob = 0.0; // c in the bound
    double bound = 0.0;           // H ((1 + 1/c) gamma + epsilon_class + regret)
    bool holds = false;
};

/**
 * Evaluates best_rkl <= H((1 + 1/c) gamma + eps_class + regret) for a finished
 * run. l_n(pi) = E_{rho_n} E_pi [pi_n / pi* - 1] and l_hat_n uses the recorded
 * r_hat_n; minima range over deterministic tabular policies (per-state argmin).
 */
inline DreGuaranteeCheck check_interactive_dre_guarantee(const EnvBundle& env, const InteractiveRunReport& report) {
    const int S = env.mdp.num_states(), A = env.mdp.num_actions(), H = env.mdp.horizon();
    const auto& expert = env.expert.policy;
    DreGuaranteeCheck out;
    out.min_expert_prob = *std::min_element(expert.table().begin(), expert.table().end());
    if (out.min_expert_prob <= 0.0) throw InputError("check_interactive_dre_guarantee: expert must have full support");
    const auto N = static_cast<double>(report.iterations.size());
    std::vector<double> true_cost(static_cast<std::size_t>(S * A), 0.0), est_cost(true_cost.size(), 0.0);
    double played = 0.0;
    out.best_rkl = kInfinity;
    for (const auto& rec : report.iterations) {
        out.best_rkl = std::min(out.best_rkl, rec.exact_rkl);
        const auto occ = occupancy(env.mdp, rec.policy);
        double gamma_n = 0.0;
        for (int s = 0; s < S; ++s) {
            const double w = occ.avg_state[static_cast<std::size_t>(s)];
            for (int a = 0; a < A; ++a) {
                const auto i = static_cast<std::size_t>(s * A + a);
                const double r = rec.policy.prob(s, a) / expert.prob(s, a);
                gamma_n += w * expert.prob(s, a) * std::abs(rec.ratio[i] - r);
                true_cost[i] += w * (r - 1.0);
                est_cost[i] += w * (rec.ratio[i] - 1.0);
                played += w * rec.policy.prob(s, a) * (rec.ratio[i] - 1.0);
            }
        }
        out.gamma = std::max(out.gamma, gamma_n);
    }
    auto best_fixed = [&](const std::vector<double>& cost) {
        double total = 0.0;
        for (int s = 0; s < S; ++s)
            total += *std::min_element(cost.begin() + s * A, cost.begin() + (s + 1) * A);
        return total;
    };
    out.epsilon_class = std::max(0.0, best_fixed(true_cost) / N);
    out.regret = (played - best_fixed(est_cost)) / N;
    out.bound = H * ((1.0 + 1.0 / out.min_expert_prob) * out.gamma + out.epsilon_class + out.regret);
    out.holds = out.best_rkl <= out.bound + 1e-9;
    return out;
}

/// (1 - kappa) * policy + kappa * uniform.
inline TabularPolicy smoothed_policy(const TabularPolicy& policy, double kappa) {
    std::vector<double> t(policy.table().begin(), policy.table().end());
    for (auto& x : t) x = (1.0 - kappa) * x + kappa / policy.num_actions();
    return TabularPolicy(policy.num_states(), policy.num_actions(), std::move(t));
}

} // namespace filab
