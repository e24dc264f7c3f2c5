#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <limits>
#include <string>
#include <vector>

#include "filab/errors.hpp"
#include "filab/mdp.hpp"
#include "filab/parametric.hpp"

namespace filab {

enum class EnvKind { Bandit, Grid };

inline std::string_view to_string(EnvKind k) { return k == EnvKind::Bandit ? "bandit" : "grid"; }

/// Grid actions in index order.
enum GridAction : int { kUp = 0, kRight = 1, kDown = 2, kLeft = 3 };
inline constexpr int kGridActions = 4;

/// Cell indices are row * width + col with row 0 at the top.
struct GridLayout {
    int width = 3;
    int height = 3;
    int start = 7;     // bottom middle
    int terminal = 1;  // top middle, absorbing
    int center = 4;    // undesirable

    int num_cells() const noexcept { return width * height; }
    int row(int cell) const noexcept { return cell / width; }
    int col(int cell) const noexcept { return cell % width; }
    bool operator==(const GridLayout&) const = default;
};

/// Noise-free successor; moves off the grid stay in place.
inline int grid_move(const GridLayout& g, int cell, int action) {
    static constexpr int dr[4] = {-1, 0, 1, 0};
    static constexpr int dc[4] = {0, 1, 0, -1};
    const int r = g.row(cell) + dr[action];
    const int c = g.col(cell) + dc[action];
    if (r < 0 || r >= g.height || c < 0 || c >= g.width) return cell;
    return r * g.width + c;
}

/// Distinct in-grid neighbors, ascending.
inline std::vector<int> grid_neighbors(const GridLayout& g, int cell) {
    std::vector<int> out;
    for (int a = 0; a < kGridActions; ++a) {
        const int n = grid_move(g, cell, a);
        if (n != cell && std::find(out.begin(), out.end(), n) == out.end()) out.push_back(n);
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Left-right reflection of a cell.
inline int mirror_cell(const GridLayout& g, int cell) { return g.row(cell) * g.width + (g.width - 1 - g.col(cell)); }

inline int mirror_action(int action) {
    if (action == kLeft) return kRight;
    if (action == kRight) return kLeft;
    return action;
}

/// Deterministic grid policy <-> id = sum_s a(s) * 4^s.
inline std::uint64_t grid_policy_id(std::span<const int> actions) {
    std::uint64_t id = 0;
    for (std::size_t s = actions.size(); s-- > 0;) id = id * kGridActions + static_cast<std::uint64_t>(actions[s]);
    return id;
}

inline std::vector<int> grid_actions_from_id(std::uint64_t id, int num_cells) {
    std::vector<int> actions(static_cast<std::size_t>(num_cells));
    for (auto& a : actions) {
        a = static_cast<int>(id % kGridActions);
        id /= kGridActions;
    }
    return actions;
}

inline std::vector<int> mirror_actions(const GridLayout& g, std::span<const int> actions) {
    std::vector<int> out(actions.size());
    for (int s = 0; s < static_cast<int>(actions.size()); ++s)
        out[static_cast<std::size_t>(mirror_cell(g, s))] = mirror_action(actions[static_cast<std::size_t>(s)]);
    return out;
}

struct ExpertModel {
    TabularPolicy policy;
    std::vector<TabularPolicy> modes;  // deterministic route policies
    std::vector<double> mode_weights;
};

/// The expert's action distribution at `state`.
inline std::vector<double> expert_query(const ExpertModel& expert, int state) {
    if (state < 0 || state >= expert.policy.num_states()) throw InputError("expert_query: state out of range");
    const auto row = expert.policy.row(state);
    return {row.begin(), row.end()};
}

struct NamedPolicy {
    std::string name;
    TabularPolicy policy;
};

/// Environment, expert and the policy class the experiments search over.
struct EnvBundle {
    EnvKind kind;
    FiniteMdp mdp;
    ExpertModel expert;
    std::vector<NamedPolicy> named_policies;  // bandit: A, B, M; grid: the two expert modes
    GridLayout layout;
    double epsilon0 = 0.0;
    double epsilon1 = 0.0;
    double epsilon2 = 0.0;
    std::uint64_t policy_class_size = 0;

    ParametricPolicy::Kind parametric_kind() const {
        return kind == EnvKind::Bandit ? ParametricPolicy::Kind::Bandit : ParametricPolicy::Kind::Grid;
    }
};

inline EnvBundle make_bandit(double epsilon0) {
    if (!(epsilon0 >= 0.0 && epsilon0 <= 0.5)) throw InputError("make_bandit: epsilon0 must lie in [0, 0.5]");
    FiniteMdp mdp(1, 3, {1.0, 1.0, 1.0}, {1.0}, 1);
    TabularPolicy expert(1, 3, {0.5, 0.5, 0.0});
    TabularPolicy a(1, 3, {1.0, 0.0, 0.0});
    TabularPolicy b(1, 3, {0.0, 1.0, 0.0});
    TabularPolicy m(1, 3, {epsilon0, epsilon0, 1.0 - 2.0 * epsilon0});
    return EnvBundle{
        .kind = EnvKind::Bandit,
        .mdp = std::move(mdp),
        .expert = {expert, {a, b}, {0.5, 0.5}},
        .named_policies = {{"A", a}, {"B", b}, {"M", m}},
        .layout = {},
        .epsilon0 = epsilon0,
        .policy_class_size = 3,
    };
}

namespace detail {

/// Noise-free BFS distance to the terminal over cells other than `blocked`.
inline std::vector<int> distances_to_terminal(const GridLayout& g, int blocked) {
    constexpr int kFar = std::numeric_limits<int>::max();
    std::vector<int> dist(static_cast<std::size_t>(g.num_cells()), kFar);
    std::deque<int> frontier{g.terminal};
    dist[static_cast<std::size_t>(g.terminal)] = 0;
    while (!frontier.empty()) {
        const int cur = frontier.front();
        frontier.pop_front();
        for (int n : grid_neighbors(g, cur)) {
            if (n == blocked || dist[static_cast<std::size_t>(n)] != kFar) continue;
            dist[static_cast<std::size_t>(n)] = dist[static_cast<std::size_t>(cur)] + 1;
            frontier.push_back(n);
        }
    }
    return dist;
}

/// Action whose successor is closest to the terminal; ties go to the lowest index.
inline int greedy_action(const GridLayout& g, const std::vector<int>& dist, int cell) {
    int best = -1;
    long best_d = std::numeric_limits<long>::max();
    for (int a = 0; a < kGridActions; ++a) {
        const int n = grid_move(g, cell, a);
        if (n == g.center && cell != g.center) continue;
        const long d = dist[static_cast<std::size_t>(n)];
        if (d < best_d) {
            best_d = d;
            best = a;
        }
    }
    return best;
}

inline std::vector<double> grid_transitions(const GridLayout& g, double eps1, double eps2) {
    const int S = g.num_cells();
    std::vector<double> P(static_cast<std::size_t>(S) * kGridActions * S, 0.0);
    auto at = [&](int s, int a, int s2) -> double& {
        return P[(static_cast<std::size_t>(s) * kGridActions + a) * S + s2];
    };
    for (int s = 0; s < S; ++s) {
        const auto nbrs = grid_neighbors(g, s);
        for (int a = 0; a < kGridActions; ++a) {
            if (s == g.terminal) {
                at(s, a, s) = 1.0;
                continue;
            }
            for (int executed = 0; executed < kGridActions; ++executed) {
                const double pa = executed == a ? 1.0 - eps1 : eps1 / 3.0;
                at(s, a, grid_move(g, s, executed)) += pa * (1.0 - eps2);
            }
            for (int n : nbrs) at(s, a, n) += eps2 / static_cast<double>(nbrs.size());
        }
    }
    return P;
}

} // namespace detail

/**
 * 3x3 gridworld with an absorbing terminal and an undesirable center cell.
 *
 * Dynamics: with probability eps1 the commanded action is replaced by one of
 * the other three uniformly; then with probability eps2 the successor is
 * replaced by a uniform in-grid neighbor of the current cell.
 *
 * The expert is 50/50 between stepping left and right at the start, then follows
 * the shortest center-avoiding route; other cells use the first step of the
 * shortest center-avoiding path, and the terminal takes `up`.
 */
inline EnvBundle make_gridworld(double epsilon1, double epsilon2, int horizon, GridLayout layout = {}) {
    if (!(epsilon1 >= 0.0 && epsilon1 < 1.0) || !(epsilon2 >= 0.0 && epsilon2 < 1.0))
        throw InputError("make_gridworld: noise levels must lie in [0, 1)");
    if (horizon < 4) throw InputError("make_gridworld: horizon must be >= 4");
    const int S = layout.num_cells();
    if (layout.start == layout.terminal || layout.start == layout.center || layout.terminal == layout.center ||
        std::min({layout.start, layout.terminal, layout.center}) < 0 ||
        std::max({layout.start, layout.terminal, layout.center}) >= S)
        throw InputError("make_gridworld: start, terminal and center must be distinct cells");

    std::vector<double> initial(static_cast<std::size_t>(S), 0.0);
    initial[static_cast<std::size_t>(layout.start)] = 1.0;
    FiniteMdp mdp(S, kGridActions, detail::grid_transitions(layout, epsilon1, epsilon2), std::move(initial), horizon);

    const auto dist = detail::distances_to_terminal(layout, layout.center);
    std::vector<int> base(static_cast<std::size_t>(S), kUp);
    for (int s = 0; s < S; ++s) {
        if (s == layout.terminal) continue;
        const int a = detail::greedy_action(layout, dist, s);
        if (a < 0) throw InputError("make_gridworld: cell " + std::to_string(s) + " cannot reach the terminal");
        base[static_cast<std::size_t>(s)] = a;
    }
    // center itself heads straight for the terminal when adjacent
    const auto center_dist = detail::distances_to_terminal(layout, -1);
    base[static_cast<std::size_t>(layout.center)] = detail::greedy_action(layout, center_dist, layout.center);

    auto route_mode = [&](int first) {
        if (grid_move(layout, layout.start, first) == layout.start)
            throw InputError("make_gridworld: start cell has no left/right neighbor");
        auto acts = base;
        acts[static_cast<std::size_t>(layout.start)] = first;
        return acts;
    };
    const auto left = route_mode(kLeft);
    const auto right = route_mode(kRight);

    std::vector<double> expert_table(static_cast<std::size_t>(S) * kGridActions, 0.0);
    for (int s = 0; s < S; ++s) {
        if (s == layout.start) {
            expert_table[static_cast<std::size_t>(s) * kGridActions + kLeft] = 0.5;
            expert_table[static_cast<std::size_t>(s) * kGridActions + kRight] = 0.5;
        } else {
            expert_table[static_cast<std::size_t>(s) * kGridActions + static_cast<std::size_t>(base[s])] = 1.0;
        }
    }
    auto mode_l = TabularPolicy::deterministic(left, kGridActions);
    auto mode_r = TabularPolicy::deterministic(right, kGridActions);

    std::uint64_t class_size = 1;
    for (int s = 0; s < S; ++s) class_size *= kGridActions;

    return EnvBundle{
        .kind = EnvKind::Grid,
        .mdp = std::move(mdp),
        .expert = {TabularPolicy(S, kGridActions, std::move(expert_table)), {mode_l, mode_r}, {0.5, 0.5}},
        .named_policies = {{"Left", mode_l}, {"Right", mode_r}},
        .layout = layout,
        .epsilon1 = epsilon1,
        .epsilon2 = epsilon2,
        .policy_class_size = class_size,
    };
}

/// Terminal-entry masses by side and the probability of ever visiting the center.
struct GridRouteMetrics {
    double entry_left = 0.0;    // entered the terminal from a column left of it
    double entry_right = 0.0;   // from a column right of it
    double entry_other = 0.0;   // from its own column
    double unsafe_mass = 0.0;   // P(visit center at any of s_0..s_H)
};

/// Exact forward recursion over (cell, visited-center flag).
inline GridRouteMetrics grid_route_metrics(const EnvBundle& env, const TabularPolicy& policy) {
    if (env.kind != EnvKind::Grid) throw InputError("grid_route_metrics: not a gridworld");
    detail::require_compatible(env.mdp, policy);
    const auto& g = env.layout;
    const int S = g.num_cells();
    const int A = kGridActions;
    std::vector<double> cur(static_cast<std::size_t>(2 * S), 0.0), next(cur.size());
    for (int s = 0; s < S; ++s) cur[static_cast<std::size_t>(2 * s + (s == g.center))] += env.mdp.initial()[s];
    GridRouteMetrics out;
    const int tcol = g.col(g.terminal);
    for (int t = 0; t < env.mdp.horizon(); ++t) {
        std::fill(next.begin(), next.end(), 0.0);
        for (int s = 0; s < S; ++s) {
            for (int flag = 0; flag < 2; ++flag) {
                const double m = cur[static_cast<std::size_t>(2 * s + flag)];
                if (m == 0.0) continue;
                if (s == g.terminal) {
                    next[static_cast<std::size_t>(2 * s + flag)] += m;
                    continue;
                }
                for (int a = 0; a < A; ++a) {
                    const double w = m * policy.prob(s, a);
                    if (w == 0.0) continue;
                    const auto row = env.mdp.next_states(s, a);
                    for (int s2 = 0; s2 < S; ++s2) {
                        const double pr = w * row[static_cast<std::size_t>(s2)];
                        if (pr == 0.0) continue;
                        if (s2 == g.terminal) {
                            if (g.col(s) < tcol) out.entry_left += pr;
                            else if (g.col(s) > tcol) out.entry_right += pr;
                            else out.entry_other += pr;
                        }
                        next[static_cast<std::size_t>(2 * s2 + (flag || s2 == g.center))] += pr;
                    }
                }
            }
        }
        std::swap(cur, next);
    }
    for (int s = 0; s < S; ++s) out.unsafe_mass += cur[static_cast<std::size_t>(2 * s + 1)];
    return out;
}

struct ModeMetrics {
    double collapse_score;
    double cover_score;
    double unsafe_mass;
};

/**
 * Bandit: collapse = max(P(a), P(b)), cover = min(P(a), P(b)), unsafe = P(c).
 * Grid: collapse/cover are the max/min of the left- and right-column terminal
 * entry masses; unsafe is the probability of visiting the center.
 */
inline ModeMetrics mode_metrics(const TabularPolicy& policy, const EnvBundle& env) {
    if (env.kind == EnvKind::Bandit) {
        detail::require_compatible(env.mdp, policy);
        const double pa = policy.prob(0, 0), pb = policy.prob(0, 1);
        return {std::max(pa, pb), std::min(pa, pb), policy.prob(0, 2)};
    }
    const auto r = grid_route_metrics(env, policy);
    return {std::max(r.entry_left, r.entry_right), std::min(r.entry_left, r.entry_right), r.unsafe_mass};
}

inline ModeMetrics mode_metrics(const ParametricPolicy& policy, const EnvBundle& env) {
    return mode_metrics(policy.to_tabular(), env);
}

} // namespace filab
