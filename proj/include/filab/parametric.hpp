#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "filab/errors.hpp"
#include "filab/mdp.hpp"

namespace filab {

/**
 * Angle-parameterized softmax policy.
 *
 * Each state s has one angle theta_s. Action a has a fixed direction phi_a and
 * score V_a = cos(theta_s - phi_a); the action distribution is
 * softmax(A * (V + 1)) with sharpness A.
 */
class ParametricPolicy {
public:
    enum class Kind { Bandit, Grid };

    static constexpr double kSharpness = 2.5;

    ParametricPolicy(Kind kind, std::vector<double> theta) : kind_(kind), theta_(std::move(theta)) {
        if (kind_ == Kind::Bandit && theta_.size() != 1) throw InputError("bandit policy takes a single angle");
        if (theta_.empty()) throw InputError("ParametricPolicy: no parameters");
        for (double t : theta_)
            if (!std::isfinite(t)) throw InputError("ParametricPolicy: parameters must be finite");
    }

    Kind kind() const noexcept { return kind_; }
    int num_states() const noexcept { return static_cast<int>(theta_.size()); }
    int num_actions() const noexcept { return kind_ == Kind::Bandit ? 3 : 4; }
    std::span<const double> theta() const noexcept { return theta_; }

    std::span<const double> directions() const noexcept {
        static constexpr double kPi = std::numbers::pi;
        static constexpr double bandit[3] = {-kPi / 4, 0.0, kPi / 4};
        static constexpr double grid[4] = {0.0, kPi / 2, kPi, -kPi / 2};
        if (kind_ == Kind::Bandit) return bandit;
        return grid;
    }

    std::vector<double> scores(int state) const {
        const auto phi = directions();
        std::vector<double> v(phi.size());
        for (std::size_t a = 0; a < phi.size(); ++a) v[a] = std::cos(theta_[static_cast<std::size_t>(state)] - phi[a]);
        return v;
    }

    std::vector<double> probs(int state) const {
        auto v = scores(state);
        double top = -kSharpness * 2.0;
        for (double x : v) top = std::max(top, kSharpness * (x + 1.0));
        double total = 0.0;
        for (auto& x : v) {
            x = std::exp(kSharpness * (x + 1.0) - top);
            total += x;
        }
        for (auto& x : v) x /= total;
        return v;
    }

    /// d/d theta_s of log pi(a | s); zero for every other parameter.
    double grad_log_prob(int state, int action) const {
        const auto phi = directions();
        const auto p = probs(state);
        const double th = theta_[static_cast<std::size_t>(state)];
        double mean = 0.0;
        for (std::size_t b = 0; b < phi.size(); ++b) mean += p[b] * std::sin(phi[b] - th);
        return kSharpness * (std::sin(phi[static_cast<std::size_t>(action)] - th) - mean);
    }

    TabularPolicy to_tabular() const {
        std::vector<double> table;
        table.reserve(theta_.size() * static_cast<std::size_t>(num_actions()));
        for (int s = 0; s < num_states(); ++s) {
            const auto p = probs(s);
            table.insert(table.end(), p.begin(), p.end());
        }
        return TabularPolicy(num_states(), num_actions(), std::move(table));
    }

    ParametricPolicy with_theta(std::vector<double> theta) const { return ParametricPolicy(kind_, std::move(theta)); }

    bool operator==(const ParametricPolicy&) const = default;

private:
    Kind kind_;
    std::vector<double> theta_;
};

inline ParametricPolicy bandit_policy_from_theta(double theta) {
    return ParametricPolicy(ParametricPolicy::Kind::Bandit, {theta});
}

inline ParametricPolicy grid_policy_from_theta(std::vector<double> theta) {
    return ParametricPolicy(ParametricPolicy::Kind::Grid, std::move(theta));
}

} // namespace filab
