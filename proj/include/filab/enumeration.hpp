#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "filab/divergence.hpp"
#include "filab/envs.hpp"
#include "filab/parallel.hpp"

namespace filab {

/// Relative tolerance under which two divergence values count as tied.
inline constexpr double kTieTolerance = 1e-12;

inline bool values_tied(double a, double b) {
    if (std::isinf(a) || std::isinf(b)) return a == b;
    return std::abs(a - b) <= kTieTolerance * std::max(1.0, std::abs(a));
}

/// Every policy's value under one divergence, ranked ascending with +inf last.
struct PolicyRanking {
    Divergence divergence;
    std::vector<double> values;          // indexed by policy id
    std::vector<std::uint64_t> order;    // ids by value; tied groups by id
    std::vector<std::uint64_t> argmin_ties;

    std::uint64_t argmin() const { return order.front(); }
    double min_value() const { return values[static_cast<std::size_t>(order.front())]; }
};

inline PolicyRanking rank_policies(Divergence divergence, std::vector<double> values) {
    if (values.empty()) throw InputError("rank_policies: no policies");
    PolicyRanking r{divergence, std::move(values), {}, {}};
    r.order.resize(r.values.size());
    std::iota(r.order.begin(), r.order.end(), std::uint64_t{0});
    const auto& v = r.values;
    std::sort(r.order.begin(), r.order.end(), [&](std::uint64_t a, std::uint64_t b) {
        return v[a] != v[b] ? v[a] < v[b] : a < b;
    });
    // Values that differ only by rounding are regrouped by id.
    for (std::size_t i = 0; i < r.order.size();) {
        std::size_t j = i + 1;
        while (j < r.order.size() && values_tied(v[r.order[i]], v[r.order[j]])) ++j;
        std::sort(r.order.begin() + static_cast<std::ptrdiff_t>(i), r.order.begin() + static_cast<std::ptrdiff_t>(j));
        if (i == 0) r.argmin_ties.assign(r.order.begin(), r.order.begin() + static_cast<std::ptrdiff_t>(j));
        i = j;
    }
    return r;
}

struct EnumerationResult {
    EnvKind env;
    std::uint64_t num_policies = 0;
    std::vector<std::string> labels;  // bandit names; empty for the grid (ids are labels)
    std::vector<PolicyRanking> rankings;

    const PolicyRanking& ranking(Divergence d) const {
        for (const auto& r : rankings)
            if (r.divergence == d) return r;
        throw InputError("EnumerationResult: divergence " + std::string(to_string(d)) + " was not enumerated");
    }

    std::string label(std::uint64_t id) const {
        return id < labels.size() ? labels[static_cast<std::size_t>(id)] : std::to_string(id);
    }
};

/// Exact state-action divergence of A, B and M against the bandit expert.
inline EnumerationResult enumerate_bandit(double epsilon0, std::span<const Divergence> divergences) {
    const auto env = make_bandit(epsilon0);
    EnumerationResult out{EnvKind::Bandit, env.named_policies.size(), {}, {}};
    for (const auto& np : env.named_policies) out.labels.push_back(np.name);
    for (auto d : divergences) {
        const DivergenceSpec spec(d);
        std::vector<double> values;
        for (const auto& np : env.named_policies)
            values.push_back(state_action_divergence(env.mdp, env.expert.policy, np.policy, spec));
        out.rankings.push_back(rank_policies(d, std::move(values)));
    }
    return out;
}

struct GridEnumerationOptions {
    bool symmetry_prune = false;
    int threads = 1;
    std::uint64_t max_policies = std::uint64_t{1} << 18;
};

/// Average state-action occupancy of a deterministic policy by forward recursion.
inline void deterministic_occupancy(const FiniteMdp& mdp, std::span<const int> actions, std::span<double> out) {
    const int S = mdp.num_states(), A = mdp.num_actions(), H = mdp.horizon();
    std::vector<double> rho(mdp.initial().begin(), mdp.initial().end()), next(static_cast<std::size_t>(S));
    std::vector<double> avg(static_cast<std::size_t>(S), 0.0);
    for (int t = 0; t < H; ++t) {
        for (int s = 0; s < S; ++s) avg[static_cast<std::size_t>(s)] += rho[static_cast<std::size_t>(s)];
        if (t + 1 == H) break;
        std::fill(next.begin(), next.end(), 0.0);
        for (int s = 0; s < S; ++s) {
            const double w = rho[static_cast<std::size_t>(s)];
            if (w == 0.0) continue;
            const auto row = mdp.next_states(s, actions[static_cast<std::size_t>(s)]);
            for (int n = 0; n < S; ++n) next[static_cast<std::size_t>(n)] += w * row[static_cast<std::size_t>(n)];
        }
        rho.swap(next);
    }
    std::fill(out.begin(), out.end(), 0.0);
    for (int s = 0; s < S; ++s)
        out[static_cast<std::size_t>(s * A + actions[static_cast<std::size_t>(s)])] = avg[static_cast<std::size_t>(s)] / H;
}

inline bool layout_is_mirror_symmetric(const GridLayout& g) {
    return mirror_cell(g, g.start) == g.start && mirror_cell(g, g.terminal) == g.terminal &&
           mirror_cell(g, g.center) == g.center;
}

/// Exact state-action divergence of every deterministic grid policy against the expert.
inline EnumerationResult enumerate_gridworld(const EnvBundle& env, std::span<const Divergence> divergences,
                                             const GridEnumerationOptions& options = {}) {
    if (env.kind != EnvKind::Grid) throw InputError("enumerate_gridworld: environment is not a gridworld");
    if (env.policy_class_size > options.max_policies)
        throw ResourceError("enumerate_gridworld: " + std::to_string(env.policy_class_size) +
                            " policies exceed the budget of " + std::to_string(options.max_policies));
    if (options.symmetry_prune && !layout_is_mirror_symmetric(env.layout))
        throw InputError("enumerate_gridworld: symmetry pruning needs a mirror-symmetric layout");
    const int S = env.mdp.num_states(), A = env.mdp.num_actions();
    const auto n = env.policy_class_size;
    const auto expert = occupancy(env.mdp, env.expert.policy).state_action;
    std::vector<DivergenceSpec> specs;
    for (auto d : divergences) specs.emplace_back(d);
    const std::size_t D = specs.size();
    std::vector<double> values(static_cast<std::size_t>(n) * D, 0.0);
    auto mirror_id = [&](std::uint64_t id) {
        return grid_policy_id(mirror_actions(env.layout, grid_actions_from_id(id, S)));
    };

    parallel_for(static_cast<std::size_t>(n), options.threads, [&](std::size_t i) {
        const auto id = static_cast<std::uint64_t>(i);
        if (options.symmetry_prune && mirror_id(id) < id) return;
        const auto actions = grid_actions_from_id(id, S);
        std::vector<double> occ(static_cast<std::size_t>(S * A));
        deterministic_occupancy(env.mdp, actions, occ);
        for (std::size_t k = 0; k < D; ++k) values[i * D + k] = f_sum(expert, occ, specs[k]);
    });
    if (options.symmetry_prune) {
        for (std::uint64_t id = 0; id < n; ++id) {
            const auto m = mirror_id(id);
            if (m < id)
                for (std::size_t k = 0; k < D; ++k)
                    values[static_cast<std::size_t>(id) * D + k] = values[static_cast<std::size_t>(m) * D + k];
        }
    }

    EnumerationResult out{EnvKind::Grid, n, {}, {}};
    for (std::size_t k = 0; k < D; ++k) {
        std::vector<double> col(static_cast<std::size_t>(n));
        for (std::size_t i = 0; i < col.size(); ++i) col[i] = values[i * D + k];
        out.rankings.push_back(rank_policies(specs[k].kind(), std::move(col)));
    }
    return out;
}

/// One (epsilon0, divergence) row of the bandit noise sweep.
struct SweepRow {
    double epsilon0 = 0.0;
    Divergence divergence = Divergence::KL;
    double value_a = 0.0;
    double value_b = 0.0;
    double value_m = 0.0;
    std::string argmin;  // lowest-id policy among the tied minimizers
    std::string tied;    // all tied minimizers, ';'-separated
};

/// Grid lo, lo + step, ... up to hi inclusive (within rounding).
inline std::vector<double> noise_grid(double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi >= lo)) throw InputError("noise_grid: need step > 0 and hi >= lo");
    const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = lo + static_cast<double>(i) * step;
    return out;
}

inline std::vector<SweepRow> divergence_vs_noise_sweep(std::span<const double> grid,
                                                       std::span<const Divergence> divergences) {
    if (grid.empty()) throw InputError("divergence_vs_noise_sweep: empty noise grid");
    for (double e : grid)
        if (!(e >= 0.0 && e <= 0.5)) throw InputError("divergence_vs_noise_sweep: epsilon0 outside [0, 0.5]");
    std::vector<SweepRow> rows;
    for (double e : grid) {
        const auto res = enumerate_bandit(e, divergences);
        for (const auto& r : res.rankings) {
            SweepRow row{e, r.divergence, r.values[0], r.values[1], r.values[2], res.label(r.argmin()), {}};
            for (std::size_t i = 0; i < r.argmin_ties.size(); ++i)
                row.tied += (i ? ";" : "") + res.label(r.argmin_ties[i]);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

/// True when the bandit argmin is a single-mode policy (A or B) rather than M.
inline bool bandit_argmin_collapses(const PolicyRanking& r) { return r.argmin() != 2; }

/// Grid points where the bandit argmin switches between {A, B} and M.
inline std::vector<double> argmin_crossovers(Divergence divergence, std::span<const double> grid) {
    std::vector<double> out;
    const std::array<Divergence, 1> one{divergence};
    bool prev = false;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const bool cur = bandit_argmin_collapses(enumerate_bandit(grid[i], one).rankings[0]);
        if (i > 0 && cur != prev) out.push_back(grid[i]);
        prev = cur;
    }
    return out;
}

} // namespace filab
