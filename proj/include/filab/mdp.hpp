#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "filab/errors.hpp"
#include "filab/random.hpp"

namespace filab {

namespace detail {

inline void require_distribution(std::span<const double> values, double tolerance,
                                 const std::string& what) {
    double total = 0.0;
    for (double v : values) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw InputError(what + ": entries must be finite and nonnegative");
        total += v;
    }
    if (std::abs(total - 1.0) > tolerance)
        throw InputError(what + ": entries sum to " + std::to_string(total) + ", expected 1");
}

} // namespace detail

/// Construction tolerance for every probability vector.
inline constexpr double kProbabilityTolerance = 1e-12;

/**
 * Finite-horizon MDP without rewards.
 *
 * The transition tensor is stored row-major as (state, action, next_state).
 * An episode starts in s_0 ~ initial and takes exactly `horizon` actions.
 */
class FiniteMdp {
public:
    FiniteMdp(int num_states, int num_actions, std::vector<double> transition,
              std::vector<double> initial, int horizon)
        : num_states_(num_states), num_actions_(num_actions), horizon_(horizon),
          transition_(std::move(transition)), initial_(std::move(initial)) {
        if (num_states_ < 1 || num_actions_ < 1)
            throw InputError("FiniteMdp: state and action counts must be positive");
        if (horizon_ < 1) throw InputError("FiniteMdp: horizon must be >= 1");
        const auto s = static_cast<std::size_t>(num_states_);
        const auto a = static_cast<std::size_t>(num_actions_);
        if (transition_.size() != s * a * s)
            throw InputError("FiniteMdp: transition tensor has wrong size");
        if (initial_.size() != s) throw InputError("FiniteMdp: initial distribution has wrong size");
        detail::require_distribution(initial_, kProbabilityTolerance, "FiniteMdp initial");
        for (int st = 0; st < num_states_; ++st)
            for (int ac = 0; ac < num_actions_; ++ac)
                detail::require_distribution(next_states(st, ac), kProbabilityTolerance,
                                             "FiniteMdp transition(" + std::to_string(st) + "," +
                                                 std::to_string(ac) + ",.)");
    }

    int num_states() const noexcept { return num_states_; }
    int num_actions() const noexcept { return num_actions_; }
    int horizon() const noexcept { return horizon_; }

    double transition(int state, int action, int next) const {
        return transition_[index(state, action) + static_cast<std::size_t>(next)];
    }

    std::span<const double> next_states(int state, int action) const {
        return {transition_.data() + index(state, action), static_cast<std::size_t>(num_states_)};
    }

    std::span<const double> initial() const noexcept { return initial_; }

    /// Row-major (state, action, next) table.
    std::span<const double> transitions() const noexcept { return transition_; }

    FiniteMdp with_horizon(int horizon) const {
        return FiniteMdp(num_states_, num_actions_, transition_, initial_, horizon);
    }

private:
    std::size_t index(int state, int action) const {
        return (static_cast<std::size_t>(state) * static_cast<std::size_t>(num_actions_) +
                static_cast<std::size_t>(action)) *
               static_cast<std::size_t>(num_states_);
    }

    int num_states_;
    int num_actions_;
    int horizon_;
    std::vector<double> transition_;
    std::vector<double> initial_;
};

/// Stochastic Markov policy pi(a|s) stored as a row-major (state, action) table.
class TabularPolicy {
public:
    TabularPolicy(int num_states, int num_actions, std::vector<double> probs)
        : num_states_(num_states), num_actions_(num_actions), probs_(std::move(probs)) {
        if (num_states_ < 1 || num_actions_ < 1)
            throw InputError("TabularPolicy: state and action counts must be positive");
        if (probs_.size() != static_cast<std::size_t>(num_states_) * static_cast<std::size_t>(num_actions_))
            throw InputError("TabularPolicy: probability table has wrong size");
        for (int s = 0; s < num_states_; ++s)
            detail::require_distribution(row(s), kProbabilityTolerance,
                                         "TabularPolicy row " + std::to_string(s));
    }

    static TabularPolicy uniform(int num_states, int num_actions) {
        return TabularPolicy(num_states, num_actions,
                             std::vector<double>(static_cast<std::size_t>(num_states) * num_actions,
                                                 1.0 / num_actions));
    }

    static TabularPolicy deterministic(std::span<const int> actions, int num_actions) {
        std::vector<double> probs(actions.size() * static_cast<std::size_t>(num_actions), 0.0);
        for (std::size_t s = 0; s < actions.size(); ++s) {
            if (actions[s] < 0 || actions[s] >= num_actions)
                throw InputError("TabularPolicy::deterministic: action out of range");
            probs[s * static_cast<std::size_t>(num_actions) + static_cast<std::size_t>(actions[s])] = 1.0;
        }
        return TabularPolicy(static_cast<int>(actions.size()), num_actions, std::move(probs));
    }

    int num_states() const noexcept { return num_states_; }
    int num_actions() const noexcept { return num_actions_; }

    double prob(int state, int action) const {
        return probs_[static_cast<std::size_t>(state) * static_cast<std::size_t>(num_actions_) +
                      static_cast<std::size_t>(action)];
    }

    std::span<const double> row(int state) const {
        return {probs_.data() + static_cast<std::size_t>(state) * static_cast<std::size_t>(num_actions_),
                static_cast<std::size_t>(num_actions_)};
    }

    std::span<const double> table() const noexcept { return probs_; }

    bool operator==(const TabularPolicy&) const = default;

private:
    int num_states_;
    int num_actions_;
    std::vector<double> probs_;
};

/// tau = {s_0, a_1, s_1, ..., a_H, s_H}; states has one more entry than actions.
struct Trajectory {
    std::vector<int> states;
    std::vector<int> actions;

    int length() const noexcept { return static_cast<int>(actions.size()); }
    bool operator==(const Trajectory&) const = default;
};

struct WeightedTrajectory {
    Trajectory trajectory;
    double probability;
};

/**
 * Occupancy measures of a policy.
 *
 * per_time_state row t (t = 0..H-1) is the distribution of s_t, the state from
 * which action a_{t+1} is taken. The terminal state s_H is not included, so
 * avg_state matches the tally over the H decision points of each trajectory.
 */
struct OccupancyMeasures {
    int horizon = 0;
    int num_states = 0;
    int num_actions = 0;
    std::vector<double> per_time_state;  // H x S
    std::vector<double> avg_state;       // S
    std::vector<double> state_action;    // S x A

    double at(int t, int state) const {
        return per_time_state[static_cast<std::size_t>(t) * static_cast<std::size_t>(num_states) +
                              static_cast<std::size_t>(state)];
    }
    double pair(int state, int action) const {
        return state_action[static_cast<std::size_t>(state) * static_cast<std::size_t>(num_actions) +
                            static_cast<std::size_t>(action)];
    }
};

namespace detail {

inline void require_compatible(const FiniteMdp& mdp, const TabularPolicy& policy) {
    if (mdp.num_states() != policy.num_states() || mdp.num_actions() != policy.num_actions())
        throw InputError("policy dimensions do not match the MDP");
}

} // namespace detail

inline double traj_probability(const FiniteMdp& mdp, const TabularPolicy& policy, const Trajectory& traj) {
    detail::require_compatible(mdp, policy);
    if (traj.length() != mdp.horizon() || traj.states.size() != traj.actions.size() + 1)
        throw InputError("traj_probability: trajectory length does not match the horizon");
    for (int s : traj.states)
        if (s < 0 || s >= mdp.num_states()) throw InputError("traj_probability: state index out of range");
    for (int a : traj.actions)
        if (a < 0 || a >= mdp.num_actions()) throw InputError("traj_probability: action index out of range");

    double p = mdp.initial()[static_cast<std::size_t>(traj.states[0])];
    for (int t = 0; t < traj.length(); ++t) {
        const int s = traj.states[static_cast<std::size_t>(t)];
        const int a = traj.actions[static_cast<std::size_t>(t)];
        p *= policy.prob(s, a) * mdp.transition(s, a, traj.states[static_cast<std::size_t>(t) + 1]);
    }
    return p;
}

inline OccupancyMeasures occupancy(const FiniteMdp& mdp, const TabularPolicy& policy) {
    detail::require_compatible(mdp, policy);
    const int S = mdp.num_states();
    const int A = mdp.num_actions();
    const int H = mdp.horizon();
    OccupancyMeasures occ;
    occ.horizon = H;
    occ.num_states = S;
    occ.num_actions = A;
    occ.per_time_state.assign(static_cast<std::size_t>(H) * S, 0.0);
    occ.avg_state.assign(static_cast<std::size_t>(S), 0.0);
    occ.state_action.assign(static_cast<std::size_t>(S) * A, 0.0);

    std::vector<double> current(mdp.initial().begin(), mdp.initial().end());
    std::vector<double> next(static_cast<std::size_t>(S));
    for (int t = 0; t < H; ++t) {
        std::copy(current.begin(), current.end(), occ.per_time_state.begin() + static_cast<std::ptrdiff_t>(t) * S);
        if (t + 1 == H) break;
        std::fill(next.begin(), next.end(), 0.0);
        for (int s = 0; s < S; ++s) {
            const double mass = current[static_cast<std::size_t>(s)];
            if (mass == 0.0) continue;
            for (int a = 0; a < A; ++a) {
                const double w = mass * policy.prob(s, a);
                if (w == 0.0) continue;
                const auto row = mdp.next_states(s, a);
                for (int s2 = 0; s2 < S; ++s2) next[static_cast<std::size_t>(s2)] += w * row[static_cast<std::size_t>(s2)];
            }
        }
        std::swap(current, next);
    }
    for (int s = 0; s < S; ++s) {
        double total = 0.0;
        for (int t = 0; t < H; ++t) total += occ.at(t, s);
        occ.avg_state[static_cast<std::size_t>(s)] = total / H;
        for (int a = 0; a < A; ++a)
            occ.state_action[static_cast<std::size_t>(s) * A + a] = occ.avg_state[static_cast<std::size_t>(s)] * policy.prob(s, a);
    }
    return occ;
}

struct EnumerationLimits {
    std::uint64_t max_branches = 10'000'000;
};

/**
 * Visits every positive-probability trajectory in lexicographic order of
 * (s_0, a_1, s_1, ..., a_H, s_H). Zero-probability branches are pruned.
 *
 * Throws ResourceError when (S*A)^H exceeds the branch cap, or when the
 * number of expanded branches does.
 */
inline void for_each_trajectory(const FiniteMdp& mdp, const TabularPolicy& policy,
                                const std::function<void(const Trajectory&, double)>& visit,
                                EnumerationLimits limits = {}) {
    detail::require_compatible(mdp, policy);
    const int S = mdp.num_states();
    const int A = mdp.num_actions();
    const int H = mdp.horizon();

    double worst_case = 1.0;
    for (int t = 0; t < H; ++t) worst_case *= static_cast<double>(S) * A;
    if (worst_case > static_cast<double>(limits.max_branches))
        throw ResourceError("trajectory enumeration: (|S|*|A|)^H = " + std::to_string(worst_case) +
                            " exceeds the branch cap " + std::to_string(limits.max_branches));

    Trajectory traj;
    traj.states.assign(static_cast<std::size_t>(H) + 1, 0);
    traj.actions.assign(static_cast<std::size_t>(H), 0);
    std::uint64_t expanded = 0;

    std::function<void(int, double)> extend = [&](int t, double prob) {
        if (t == H) {
            visit(traj, prob);
            return;
        }
        const int s = traj.states[static_cast<std::size_t>(t)];
        for (int a = 0; a < A; ++a) {
            const double pa = policy.prob(s, a);
            if (pa == 0.0) continue;
            const auto row = mdp.next_states(s, a);
            for (int s2 = 0; s2 < S; ++s2) {
                const double ps = row[static_cast<std::size_t>(s2)];
                if (ps == 0.0) continue;
                if (++expanded > limits.max_branches)
                    throw ResourceError("trajectory enumeration exceeded the branch cap " +
                                        std::to_string(limits.max_branches));
                traj.actions[static_cast<std::size_t>(t)] = a;
                traj.states[static_cast<std::size_t>(t) + 1] = s2;
                extend(t + 1, prob * pa * ps);
            }
        }
    };

    for (int s0 = 0; s0 < S; ++s0) {
        const double p0 = mdp.initial()[static_cast<std::size_t>(s0)];
        if (p0 == 0.0) continue;
        traj.states[0] = s0;
        extend(0, p0);
    }
}

inline std::vector<WeightedTrajectory> enumerate_trajectories(const FiniteMdp& mdp, const TabularPolicy& policy,
                                                              EnumerationLimits limits = {}) {
    std::vector<WeightedTrajectory> out;
    for_each_trajectory(
        mdp, policy, [&](const Trajectory& t, double p) { out.push_back({t, p}); }, limits);
    return out;
}

inline Trajectory sample_trajectory(const FiniteMdp& mdp, const TabularPolicy& policy, Rng& rng) {
    detail::require_compatible(mdp, policy);
    const int H = mdp.horizon();
    Trajectory traj;
    traj.states.reserve(static_cast<std::size_t>(H) + 1);
    traj.actions.reserve(static_cast<std::size_t>(H));
    int s = sample_categorical(rng, mdp.initial());
    traj.states.push_back(s);
    for (int t = 0; t < H; ++t) {
        const int a = sample_categorical(rng, policy.row(s));
        s = sample_categorical(rng, mdp.next_states(s, a));
        traj.actions.push_back(a);
        traj.states.push_back(s);
    }
    return traj;
}

inline Trajectory sample_trajectory(const FiniteMdp& mdp, const TabularPolicy& policy, std::uint64_t seed) {
    Rng rng(seed);
    return sample_trajectory(mdp, policy, rng);
}

/// Tally identity: sum_tau p(tau) (1/H) sum_t 1(s_{t-1} = z) == avg_state(z).
inline bool check_avg_state_tally(const FiniteMdp& mdp, const TabularPolicy& policy, double tolerance = 1e-10,
                                  EnumerationLimits limits = {}) {
    const int H = mdp.horizon();
    std::vector<double> tally(static_cast<std::size_t>(mdp.num_states()), 0.0);
    for_each_trajectory(
        mdp, policy,
        [&](const Trajectory& t, double p) {
            for (int i = 0; i < H; ++i) tally[static_cast<std::size_t>(t.states[static_cast<std::size_t>(i)])] += p / H;
        },
        limits);
    const auto occ = occupancy(mdp, policy);
    for (std::size_t z = 0; z < tally.size(); ++z)
        if (std::abs(tally[z] - occ.avg_state[z]) > tolerance) return false;
    return true;
}

} // namespace filab
