#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "filab/mdp.hpp"
#include "filab/random.hpp"

namespace filab {

/// Dimensions for randomly generated instances.
struct InstanceShape {
    int min_states = 2;
    int max_states = 4;
    int min_actions = 2;
    int max_actions = 3;
    int min_horizon = 1;
    int max_horizon = 4;
    double floor = 1e-3;  // every entry is at least this before renormalizing; 0 keeps raw Dirichlet draws
};

/// One random MDP with an expert and a learner policy.
struct RandomInstance {
    FiniteMdp mdp;
    TabularPolicy expert;
    TabularPolicy learner;
};

/// Flat Dirichlet draw with entries floored at `floor` and renormalized.
inline std::vector<double> random_distribution(Rng& rng, std::size_t n, double floor = 1e-3) {
    auto d = sample_flat_dirichlet(rng, n);
    if (floor > 0.0) {
        double total = 0.0;
        for (auto& x : d) {
            x = std::max(x, floor);
            total += x;
        }
        for (auto& x : d) x /= total;
    }
    return d;
}

inline TabularPolicy random_policy(Rng& rng, int num_states, int num_actions, double floor = 1e-3) {
    std::vector<double> probs;
    probs.reserve(static_cast<std::size_t>(num_states) * num_actions);
    for (int s = 0; s < num_states; ++s) {
        const auto row = random_distribution(rng, static_cast<std::size_t>(num_actions), floor);
        probs.insert(probs.end(), row.begin(), row.end());
    }
    return TabularPolicy(num_states, num_actions, std::move(probs));
}

inline FiniteMdp random_mdp(Rng& rng, int num_states, int num_actions, int horizon, double floor = 1e-3) {
    std::vector<double> transition;
    transition.reserve(static_cast<std::size_t>(num_states) * num_actions * num_states);
    for (int i = 0; i < num_states * num_actions; ++i) {
        const auto row = random_distribution(rng, static_cast<std::size_t>(num_states), floor);
        transition.insert(transition.end(), row.begin(), row.end());
    }
    auto initial = random_distribution(rng, static_cast<std::size_t>(num_states), floor);
    return FiniteMdp(num_states, num_actions, std::move(transition), std::move(initial), horizon);
}

inline RandomInstance random_instance(Rng& rng, const InstanceShape& shape = {}) {
    auto pick = [&](int lo, int hi) { return lo + static_cast<int>(uniform01(rng) * (hi - lo + 1)); };
    const int S = pick(shape.min_states, shape.max_states);
    const int A = pick(shape.min_actions, shape.max_actions);
    const int H = pick(shape.min_horizon, shape.max_horizon);
    auto mdp = random_mdp(rng, S, A, H, shape.floor);
    auto expert = random_policy(rng, S, A, shape.floor);
    auto learner = random_policy(rng, S, A, shape.floor);
    return {std::move(mdp), std::move(expert), std::move(learner)};
}

inline RandomInstance random_instance(std::uint64_t seed, const InstanceShape& shape = {}) {
    Rng rng(seed);
    return random_instance(rng, shape);
}

} // namespace filab
