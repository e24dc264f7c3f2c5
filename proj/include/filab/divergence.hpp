#pragma once

#include <array>
#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "filab/errors.hpp"
#include "filab/mdp.hpp"

namespace filab {

/// Divergence values live in [0, +inf]; +inf is an ordinary double infinity.
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class Divergence { KL, RKL, JS, TV };

inline constexpr std::array<Divergence, 4> kAllDivergences{Divergence::KL, Divergence::RKL, Divergence::JS,
                                                           Divergence::TV};

inline std::string_view to_string(Divergence d) {
    switch (d) {
    case Divergence::KL: return "KL";
    case Divergence::RKL: return "RKL";
    case Divergence::JS: return "JS";
    case Divergence::TV: return "TV";
    }
    return "?";
}

inline Divergence parse_divergence(std::string_view text) {
    std::string lower;
    for (char c : text) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (lower == "kl") return Divergence::KL;
    if (lower == "rkl") return Divergence::RKL;
    if (lower == "js") return Divergence::JS;
    if (lower == "tv") return Divergence::TV;
    throw InputError("unknown divergence '" + std::string(text) + "' (expected kl, rkl, js or tv)");
}

enum class TableComponent { Generator, Conjugate, Derivative, Activation };

namespace detail {

inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace detail

/**
 * Generator f, its convex conjugate f*, a subgradient representative f' and the
 * output activation g_f : R -> dom f* for one of the four supported divergences.
 *
 * Reverse KL uses g_f(v) = -exp(-v), under which f*(g_f(v)) = v - 1.
 * For TV the subgradient at u = 1 is taken as 0, and the activation inverse
 * maps the boundary values +-1/2 to +-kTvSaturation.
 */
class DivergenceSpec {
public:
    /// 0.5 * tanh(kTvSaturation) rounds to exactly 0.5 in double precision.
    static constexpr double kTvSaturation = 20.0;

    constexpr explicit DivergenceSpec(Divergence kind) : kind_(kind) {}

    constexpr Divergence kind() const noexcept { return kind_; }
    std::string_view name() const { return to_string(kind_); }

    double f(double u) const {
        switch (kind_) {
        case Divergence::KL:
            require(u > 0.0, "f", u);
            return u * std::log(u);
        case Divergence::RKL:
            require(u > 0.0, "f", u);
            return -std::log(u);
        case Divergence::JS:
            require(u >= 0.0, "f", u);
            return (u > 0.0 ? u * std::log(u) : 0.0) - (u + 1.0) * std::log((u + 1.0) / 2.0);
        case Divergence::TV:
            require(u >= 0.0, "f", u);
            return 0.5 * std::abs(u - 1.0);
        }
        return 0.0;
    }

    bool in_conjugate_domain(double t) const {
        switch (kind_) {
        case Divergence::KL: return std::isfinite(t);
        case Divergence::RKL: return t < 0.0;
        case Divergence::JS: return t < std::numbers::ln2;
        case Divergence::TV: return std::abs(t) <= 0.5;
        }
        return false;
    }

    double conjugate(double t) const {
        require(in_conjugate_domain(t), "f*", t);
        switch (kind_) {
        case Divergence::KL: return std::exp(t - 1.0);
        case Divergence::RKL: return -1.0 - std::log(-t);
        case Divergence::JS: return -std::log(2.0 - std::exp(t));
        case Divergence::TV: return t;
        }
        return 0.0;
    }

    double f_prime(double u) const {
        switch (kind_) {
        case Divergence::KL:
            require(u > 0.0, "f'", u);
            return 1.0 + std::log(u);
        case Divergence::RKL:
            require(u > 0.0, "f'", u);
            return -1.0 / u;
        case Divergence::JS:
            require(u > 0.0, "f'", u);
            return std::log(2.0 * u / (u + 1.0));
        case Divergence::TV:
            require(u >= 0.0, "f'", u);
            return u > 1.0 ? 0.5 : (u < 1.0 ? -0.5 : 0.0);
        }
        return 0.0;
    }

    double activation(double v) const {
        switch (kind_) {
        case Divergence::KL: return v;
        case Divergence::RKL: return -std::exp(-v);
        case Divergence::JS: return std::numbers::ln2 - detail::softplus(-v);
        case Divergence::TV: return 0.5 * std::tanh(v);
        }
        return 0.0;
    }

    double activation_derivative(double v) const {
        switch (kind_) {
        case Divergence::KL: return 1.0;
        case Divergence::RKL: return std::exp(-v);
        case Divergence::JS: return detail::sigmoid(-v);
        case Divergence::TV: {
            const double th = std::tanh(v);
            return 0.5 * (1.0 - th * th);
        }
        }
        return 0.0;
    }

    /// g_f^{-1}; phi must lie in the closure of the activation's range.
    double activation_inverse(double phi) const {
        switch (kind_) {
        case Divergence::KL: return phi;
        case Divergence::RKL:
            require(phi < 0.0, "g_f^-1", phi);
            return -std::log(-phi);
        case Divergence::JS:
            require(phi < std::numbers::ln2, "g_f^-1", phi);
            return -std::log(2.0 * std::exp(-phi) - 1.0);
        case Divergence::TV:
            require(std::abs(phi) <= 0.5, "g_f^-1", phi);
            if (phi == 0.5) return kTvSaturation;
            if (phi == -0.5) return -kTvSaturation;
            return std::atanh(2.0 * phi);
        }
        return 0.0;
    }

    /// f*(g_f(v)) in a form that stays finite for every real v.
    double conjugate_of_activation(double v) const {
        switch (kind_) {
        case Divergence::KL: return std::exp(v - 1.0);
        case Divergence::RKL: return v - 1.0;
        case Divergence::JS: return detail::softplus(v) - std::numbers::ln2;
        case Divergence::TV: return 0.5 * std::tanh(v);
        }
        return 0.0;
    }

    double conjugate_of_activation_derivative(double v) const {
        switch (kind_) {
        case Divergence::KL: return std::exp(v - 1.0);
        case Divergence::RKL: return 1.0;
        case Divergence::JS: return detail::sigmoid(v);
        case Divergence::TV: return activation_derivative(v);
        }
        return 0.0;
    }

    /// Contribution q * f(p / q) of a single cell, with the limiting conventions
    /// for empty cells: 0 f(0/0) = 0, q = 0 gives p * lim f(u)/u, p = 0 gives q * f(0+).
    double term(double p, double q) const {
        if (p == 0.0 && q == 0.0) return 0.0;
        if (q == 0.0) {
            switch (kind_) {
            case Divergence::KL: return kInfinity;
            case Divergence::RKL: return 0.0;
            case Divergence::JS: return p * std::numbers::ln2;
            case Divergence::TV: return 0.5 * p;
            }
        }
        if (p == 0.0) {
            switch (kind_) {
            case Divergence::KL: return 0.0;
            case Divergence::RKL: return kInfinity;
            case Divergence::JS: return q * std::numbers::ln2;
            case Divergence::TV: return 0.5 * q;
            }
        }
        switch (kind_) {
        case Divergence::KL: return p * std::log(p / q);
        case Divergence::RKL: return q * std::log(q / p);
        case Divergence::JS: {
            const double m = p + q;
            return p * std::log(2.0 * p / m) + q * std::log(2.0 * q / m);
        }
        case Divergence::TV: return 0.5 * std::abs(p - q);
        }
        return 0.0;
    }

    bool operator==(const DivergenceSpec&) const = default;

private:
    void require(bool ok, const char* component, double arg) const {
        if (!ok)
            throw DomainError(std::string(name()) + " " + component + ": argument " + std::to_string(arg) +
                              " outside the domain");
    }

    Divergence kind_;
};

inline double divergence_table_entry(Divergence name, TableComponent component, double argument) {
    const DivergenceSpec spec(name);
    switch (component) {
    case TableComponent::Generator: return spec.f(argument);
    case TableComponent::Conjugate: return spec.conjugate(argument);
    case TableComponent::Derivative: return spec.f_prime(argument);
    case TableComponent::Activation: return spec.activation(argument);
    }
    return 0.0;
}

/// Generalized sum_i q_i f(p_i / q_i) over arbitrary nonnegative vectors.
inline double f_sum(std::span<const double> p, std::span<const double> q, const DivergenceSpec& spec) {
    if (p.size() != q.size()) throw InputError("f_sum: vectors have different lengths");
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) total += spec.term(p[i], q[i]);
    return total;
}

/// D_f(p || q) = sum_x q(x) f(p(x) / q(x)) over a shared finite support.
inline double exact_f_divergence(std::span<const double> p, std::span<const double> q, const DivergenceSpec& spec) {
    if (p.size() != q.size()) throw InputError("exact_f_divergence: mismatched supports");
    detail::require_distribution(p, 1e-9, "exact_f_divergence p");
    detail::require_distribution(q, 1e-9, "exact_f_divergence q");
    return f_sum(p, q, spec);
}

namespace detail {

inline void require_same_shape(const FiniteMdp& mdp, const TabularPolicy& expert, const TabularPolicy& learner) {
    require_compatible(mdp, expert);
    require_compatible(mdp, learner);
}

/// Lexicographic order on the interleaved sequence (s_0, a_1, s_1, ...).
inline int compare_trajectories(const Trajectory& a, const Trajectory& b) {
    if (a.states[0] != b.states[0]) return a.states[0] < b.states[0] ? -1 : 1;
    for (std::size_t t = 0; t < a.actions.size(); ++t) {
        if (a.actions[t] != b.actions[t]) return a.actions[t] < b.actions[t] ? -1 : 1;
        if (a.states[t + 1] != b.states[t + 1]) return a.states[t + 1] < b.states[t + 1] ? -1 : 1;
    }
    return 0;
}

} // namespace detail

/// Exact trajectory-level divergence D_f(rho_expert(tau) || rho_learner(tau)).
inline double traj_divergence(const FiniteMdp& mdp, const TabularPolicy& expert, const TabularPolicy& learner,
                              const DivergenceSpec& spec, EnumerationLimits limits = {}) {
    detail::require_same_shape(mdp, expert, learner);
    // Enumeration emits trajectories in lexicographic order, so a merge aligns the supports.
    const auto p = enumerate_trajectories(mdp, expert, limits);
    const auto q = enumerate_trajectories(mdp, learner, limits);
    double total = 0.0;
    std::size_t i = 0, j = 0;
    while (i < p.size() || j < q.size()) {
        int cmp;
        if (i == p.size()) cmp = 1;
        else if (j == q.size()) cmp = -1;
        else cmp = detail::compare_trajectories(p[i].trajectory, q[j].trajectory);
        if (cmp < 0) total += spec.term(p[i++].probability, 0.0);
        else if (cmp > 0) total += spec.term(0.0, q[j++].probability);
        else total += spec.term(p[i++].probability, q[j++].probability);
    }
    return total;
}

/// D_f between the average state-action occupancies of expert and learner.
inline double state_action_divergence(const FiniteMdp& mdp, const TabularPolicy& expert, const TabularPolicy& learner,
                                      const DivergenceSpec& spec) {
    detail::require_same_shape(mdp, expert, learner);
    const auto pe = occupancy(mdp, expert);
    const auto pl = occupancy(mdp, learner);
    return exact_f_divergence(pe.state_action, pl.state_action, spec);
}

/// sum_s avg_state_learner(s) * D_f(expert(.|s) || learner(.|s)); states the learner never visits carry no weight.
inline double expected_action_divergence(const FiniteMdp& mdp, const TabularPolicy& expert,
                                         const TabularPolicy& learner, const DivergenceSpec& spec) {
    detail::require_same_shape(mdp, expert, learner);
    const auto occ = occupancy(mdp, learner);
    double total = 0.0;
    for (int s = 0; s < mdp.num_states(); ++s) {
        const double w = occ.avg_state[static_cast<std::size_t>(s)];
        if (w == 0.0) continue;
        total += w * f_sum(expert.row(s), learner.row(s), spec);
    }
    return total;
}

/// traj_divergence - state_action_divergence; +inf when the trajectory divergence is infinite.
inline double divergence_gap(const FiniteMdp& mdp, const TabularPolicy& expert, const TabularPolicy& learner,
                             const DivergenceSpec& spec, EnumerationLimits limits = {}) {
    const double traj = traj_divergence(mdp, expert, learner, spec, limits);
    if (std::isinf(traj)) return kInfinity;
    return traj - state_action_divergence(mdp, expert, learner, spec);
}

} // namespace filab
