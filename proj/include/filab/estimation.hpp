#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "filab/divergence.hpp"
#include "filab/errors.hpp"
#include "filab/mdp.hpp"
#include "filab/random.hpp"

namespace filab {

struct StateAction {
    int state;
    int action;
    bool operator==(const StateAction&) const = default;
};

enum class SampleSource { Expert, Learner };

/// Multiset of (state, action) observations drawn from one source.
class SampleSet {
public:
    SampleSet(int num_states, int num_actions, SampleSource source)
        : num_states_(num_states), num_actions_(num_actions), source_(source) {
        if (num_states < 1 || num_actions < 1) throw InputError("SampleSet: dimensions must be positive");
    }

    SampleSet(int num_states, int num_actions, SampleSource source, std::span<const StateAction> pairs)
        : SampleSet(num_states, num_actions, source) {
        for (const auto& p : pairs) add(p.state, p.action);
    }

    void add(int state, int action) {
        if (state < 0 || state >= num_states_ || action < 0 || action >= num_actions_)
            throw InputError("SampleSet: index out of range");
        pairs_.push_back({state, action});
    }

    /// Adds the H decision pairs (s_{t-1}, a_t) of a trajectory.
    void add(const Trajectory& traj) {
        for (std::size_t t = 0; t < traj.actions.size(); ++t) add(traj.states[t], traj.actions[t]);
    }

    int num_states() const noexcept { return num_states_; }
    int num_actions() const noexcept { return num_actions_; }
    std::size_t num_cells() const noexcept { return static_cast<std::size_t>(num_states_) * num_actions_; }
    SampleSource source() const noexcept { return source_; }
    std::size_t size() const noexcept { return pairs_.size(); }
    bool empty() const noexcept { return pairs_.empty(); }
    std::span<const StateAction> pairs() const noexcept { return pairs_; }

    std::vector<double> counts() const {
        std::vector<double> c(num_cells(), 0.0);
        for (const auto& p : pairs_) c[static_cast<std::size_t>(p.state) * num_actions_ + p.action] += 1.0;
        return c;
    }

    std::vector<double> frequencies() const {
        auto c = counts();
        if (!pairs_.empty())
            for (auto& x : c) x /= static_cast<double>(pairs_.size());
        return c;
    }

private:
    int num_states_;
    int num_actions_;
    SampleSource source_;
    std::vector<StateAction> pairs_;
};

/// Tabular state-action discriminator V_w; phi(s, a) = g_f(V_w(s, a)).
class Discriminator {
public:
    Discriminator(int num_states, int num_actions, std::vector<double> weights)
        : num_states_(num_states), num_actions_(num_actions), weights_(std::move(weights)) {
        if (weights_.size() != static_cast<std::size_t>(num_states_) * num_actions_)
            throw InputError("Discriminator: weight table has wrong size");
        for (double w : weights_)
            if (!std::isfinite(w)) throw InputError("Discriminator: weights must be finite");
    }

    static Discriminator constant(int num_states, int num_actions, double value) {
        return Discriminator(num_states, num_actions,
                             std::vector<double>(static_cast<std::size_t>(num_states) * num_actions, value));
    }

    int num_states() const noexcept { return num_states_; }
    int num_actions() const noexcept { return num_actions_; }
    double operator()(int state, int action) const {
        return weights_[static_cast<std::size_t>(state) * num_actions_ + action];
    }
    std::span<const double> weights() const noexcept { return weights_; }

    bool operator==(const Discriminator&) const = default;

private:
    int num_states_;
    int num_actions_;
    std::vector<double> weights_;
};

/// Clipped density ratio table r(s, a), every entry in [c, 1/c].
struct RatioEstimate {
    int num_states = 0;
    int num_actions = 0;
    std::vector<double> values;
    double clip_floor = 1.0;

    double operator()(int state, int action) const {
        return values[static_cast<std::size_t>(state) * num_actions + action];
    }
};

namespace detail {

inline void require_matching(const SampleSet& a, const SampleSet& b, const Discriminator* v = nullptr) {
    if (a.num_states() != b.num_states() || a.num_actions() != b.num_actions())
        throw InputError("sample sets have different dimensions");
    if (v && (v->num_states() != a.num_states() || v->num_actions() != a.num_actions()))
        throw InputError("discriminator dimensions do not match the samples");
}

} // namespace detail

/**
 * Variational objective with exact expectations:
 * sum_x p(x) g_f(V(x)) - sum_x q(x) f*(g_f(V(x))).
 * p and q are tables over the discriminator's (state, action) cells.
 */
inline double variational_objective(std::span<const double> p, std::span<const double> q, const Discriminator& v,
                                     const DivergenceSpec& spec) {
    if (p.size() != v.weights().size() || q.size() != v.weights().size())
        throw InputError("variational_objective: table sizes do not match the discriminator");
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double w = v.weights()[i];
        if (p[i] != 0.0) total += p[i] * spec.activation(w);
        if (q[i] != 0.0) total -= q[i] * spec.conjugate_of_activation(w);
    }
    return total;
}

/// Sample estimate: mean of g_f(V) over expert samples minus mean of f*(g_f(V)) over learner samples.
inline double variational_estimate(const SampleSet& expert_samples, const SampleSet& learner_samples,
                                   const Discriminator& v, const DivergenceSpec& spec) {
    if (expert_samples.empty() || learner_samples.empty())
        throw InputError("variational_estimate: sample sets must be non-empty");
    detail::require_matching(expert_samples, learner_samples, &v);
    double expert_term = 0.0;
    for (const auto& [s, a] : expert_samples.pairs()) expert_term += spec.activation(v(s, a));
    double learner_term = 0.0;
    for (const auto& [s, a] : learner_samples.pairs()) learner_term += spec.conjugate_of_activation(v(s, a));
    return expert_term / static_cast<double>(expert_samples.size()) -
           learner_term / static_cast<double>(learner_samples.size());
}

/// V = g_f^{-1}(f'(p / q)) cell by cell; p and q must both have full support.
inline Discriminator optimal_discriminator(std::span<const double> p, std::span<const double> q,
                                           const DivergenceSpec& spec, int num_states = 1) {
    if (p.size() != q.size() || p.empty()) throw InputError("optimal_discriminator: mismatched supports");
    if (num_states < 1 || p.size() % static_cast<std::size_t>(num_states) != 0)
        throw InputError("optimal_discriminator: table size is not a multiple of the state count");
    std::vector<double> weights(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (q[i] <= 0.0) throw DomainError("optimal_discriminator: zero denominator q(x) at cell " + std::to_string(i));
        if (p[i] <= 0.0) throw DomainError("optimal_discriminator: zero numerator p(x) at cell " + std::to_string(i));
        weights[i] = spec.activation_inverse(spec.f_prime(p[i] / q[i]));
    }
    return Discriminator(num_states, static_cast<int>(p.size()) / num_states, std::move(weights));
}

/**
 * Gradient ascent on the variational objective with cell weights p and q.
 * With empirical frequencies this is the mean-form sample objective.
 */
inline Discriminator fit_discriminator_weighted(std::span<const double> p, std::span<const double> q,
                                                const DivergenceSpec& spec, int steps, double learning_rate,
                                                const Discriminator& init) {
    if (steps < 0) throw InputError("fit_discriminator: steps must be >= 0");
    if (!(learning_rate > 0.0)) throw InputError("fit_discriminator: learning rate must be positive");
    if (p.size() != init.weights().size() || q.size() != init.weights().size())
        throw InputError("fit_discriminator: table sizes do not match the discriminator");
    std::vector<double> w(init.weights().begin(), init.weights().end());
    for (int step = 0; step < steps; ++step) {
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (p[i] == 0.0 && q[i] == 0.0) continue;
            const double grad =
                p[i] * spec.activation_derivative(w[i]) - q[i] * spec.conjugate_of_activation_derivative(w[i]);
            w[i] += learning_rate * grad;
            if (!std::isfinite(w[i])) throw NumericalError("fit_discriminator: non-finite weight", step);
        }
    }
    return Discriminator(init.num_states(), init.num_actions(), std::move(w));
}

inline Discriminator fit_discriminator(const SampleSet& expert_samples, const SampleSet& learner_samples,
                                       const DivergenceSpec& spec, int steps, double learning_rate,
                                       const Discriminator& init) {
    if (expert_samples.empty() || learner_samples.empty())
        throw InputError("fit_discriminator: sample sets must be non-empty");
    if (steps < 1) throw InputError("fit_discriminator: steps must be >= 1");
    detail::require_matching(expert_samples, learner_samples, &init);
    const auto p = expert_samples.frequencies();
    const auto q = learner_samples.frequencies();
    return fit_discriminator_weighted(p, q, spec, steps, learning_rate, init);
}

/**
 * Least-squares density ratio for the tabular class:
 * argmin_g mean_den g(x)^2 - 2 mean_num g(y), solved per cell as the ratio of
 * empirical frequencies, then clipped to [c, 1/c]. Cells absent from the
 * denominator sample get 1/c.
 */
inline RatioEstimate lsq_density_ratio(const SampleSet& numerator, const SampleSet& denominator, double clip_floor) {
    if (numerator.empty() || denominator.empty()) throw InputError("lsq_density_ratio: sample sets must be non-empty");
    if (!(clip_floor > 0.0 && clip_floor <= 1.0)) throw InputError("lsq_density_ratio: clip floor must lie in (0, 1]");
    detail::require_matching(numerator, denominator);
    const auto pn = numerator.frequencies();
    const auto pd = denominator.frequencies();
    RatioEstimate out;
    out.num_states = numerator.num_states();
    out.num_actions = numerator.num_actions();
    out.clip_floor = clip_floor;
    out.values.resize(pn.size());
    const double cap = 1.0 / clip_floor;
    for (std::size_t i = 0; i < pn.size(); ++i) {
        const double r = pd[i] > 0.0 ? pn[i] / pd[i] : cap;
        out.values[i] = std::clamp(r, clip_floor, cap);
    }
    return out;
}

struct BlindnessResult {
    double true_value;  // may be +inf
    double estimate;
};

struct BlindnessOptions {
    int fit_steps = 2000;
    double learning_rate = 0.1;
};

/**
 * Draws n samples from each distribution, fits a tabular discriminator on them
 * and evaluates the sample variational estimate. The exact divergence is
 * reported alongside; the estimate is always finite.
 */
inline BlindnessResult estimator_blindness_demo(const DivergenceSpec& spec, std::span<const double> expert_dist,
                                                std::span<const double> learner_dist, std::size_t n_samples,
                                                std::uint64_t seed, BlindnessOptions options = {}) {
    if (n_samples == 0) throw InputError("estimator_blindness_demo: need at least one sample");
    const double truth = exact_f_divergence(expert_dist, learner_dist, spec);
    const int cells = static_cast<int>(expert_dist.size());
    Rng rng(seed);
    SampleSet expert(1, cells, SampleSource::Expert);
    SampleSet learner(1, cells, SampleSource::Learner);
    for (std::size_t i = 0; i < n_samples; ++i) expert.add(0, sample_categorical(rng, expert_dist));
    for (std::size_t i = 0; i < n_samples; ++i) learner.add(0, sample_categorical(rng, learner_dist));
    const auto v = fit_discriminator(expert, learner, spec, options.fit_steps, options.learning_rate,
                                     Discriminator::constant(1, cells, 0.0));
    return {truth, variational_estimate(expert, learner, v, spec)};
}

} // namespace filab
