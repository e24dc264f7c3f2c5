#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "filab/csv.hpp"
#include "filab/divergence.hpp"
#include "filab/estimation.hpp"
#include "filab/instances.hpp"

namespace filab {

/// Slack allowed on every inequality.
inline constexpr double kInequalitySlack = 1e-9;

struct CheckReport {
    explicit CheckReport(std::string check_name) : name(std::move(check_name)) {}

    std::string name;
    std::size_t instances = 0;
    std::size_t failure_count = 0;
    std::vector<std::string> failures;  // first few counterexamples
    double max_violation = 0.0;

    static constexpr std::size_t kKeptCounterexamples = 10;

    bool passed() const noexcept { return failure_count == 0; }

    /// One instance; `violation` > 0 marks a failure.
    void record(double violation, const std::function<std::string()>& counterexample) {
        ++instances;
        if (std::isnan(violation)) violation = kInfinity;
        max_violation = std::max(max_violation, violation);
        if (violation > 0.0) {
            ++failure_count;
            if (failures.size() < kKeptCounterexamples) failures.push_back(counterexample());
        }
    }

    void merge(const CheckReport& other) {
        instances += other.instances;
        failure_count += other.failure_count;
        max_violation = std::max(max_violation, other.max_violation);
        for (const auto& f : other.failures)
            if (failures.size() < kKeptCounterexamples) failures.push_back(f);
    }
};

struct CheckOptions {
    std::uint64_t seed = 0;
    bool mutate = false;  // run the deliberately falsified variant
};

namespace detail {

/// a - b where both may be +inf; equal infinities give 0.
inline double safe_excess(double a, double b) {
    if (std::isinf(a) && std::isinf(b) && (a > 0) == (b > 0)) return 0.0;
    return a - b;
}

inline std::vector<double> random_nonnegative(Rng& rng, std::size_t n, double zero_prob, double lo) {
    std::vector<double> out(n);
    for (auto& x : out) x = uniform01(rng) < zero_prob ? 0.0 : uniform(rng, lo, 1.0);
    return out;
}

inline std::size_t random_size(Rng& rng, std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(hi - lo + 1));
}

inline std::string describe_instance(const RandomInstance& inst) {
    return "S=" + std::to_string(inst.mdp.num_states()) + " A=" + std::to_string(inst.mdp.num_actions()) +
           " H=" + std::to_string(inst.mdp.horizon()) + " T=[" + format_list(inst.mdp.transitions()) +
           "] mu=[" + format_list(inst.mdp.initial()) + "] expert=[" + format_list(inst.expert.table()) +
           "] learner=[" + format_list(inst.learner.table()) + "]";
}

} // namespace detail

/**
 * Generalized log-sum inequality sum_i q_i f(p_i / q_i) >= (sum q) f(sum p / sum q).
 * The mutation negates f, making the generator concave.
 */
inline CheckReport check_log_sum(std::span<const double> p, std::span<const double> q, const DivergenceSpec& spec,
                                 bool mutate = false) {
    CheckReport r{"log_sum"};
    double sp = 0.0, sq = 0.0;
    for (double x : p) sp += x;
    for (double x : q) sq += x;
    double lhs = f_sum(p, q, spec);
    double rhs = spec.term(sp, sq);
    if (mutate) {
        lhs = -lhs;
        rhs = -rhs;
    }
    r.record(detail::safe_excess(rhs, lhs) - kInequalitySlack, [&] {
        return std::string(spec.name()) + " p=[" + format_list(p) + "] q=[" + format_list(q) + "]";
    });
    return r;
}

inline CheckReport check_log_sum_suite(const CheckOptions& options, std::size_t pairs = 10000) {
    CheckReport r{"log_sum"};
    Rng rng(derive_seed(options.seed, 1));
    for (std::size_t i = 0; i < pairs; ++i) {
        const auto n = detail::random_size(rng, 2, 5);
        const auto p = detail::random_nonnegative(rng, n, 0.2, 0.0);
        const auto q = detail::random_nonnegative(rng, n, 0.0, 0.01);
        for (auto d : kAllDivergences) r.merge(check_log_sum(p, q, DivergenceSpec(d), options.mutate));
    }
    return r;
}

/**
 * Information loss: with P(b | a) = Q(b | a), D_f(P_a || Q_a) >= D_f(P_b || Q_b).
 * `conditional` is row-major |a| x |b|; `q_conditional` defaults to it.
 */
inline CheckReport check_information_loss(std::span<const double> p_a, std::span<const double> q_a,
                                          std::span<const double> conditional, const DivergenceSpec& spec,
                                          std::span<const double> q_conditional = {}) {
    CheckReport r{"information_loss"};
    if (q_conditional.empty()) q_conditional = conditional;
    const std::size_t k = p_a.size();
    if (k == 0 || q_a.size() != k || conditional.size() % k != 0 || q_conditional.size() != conditional.size())
        throw InputError("check_information_loss: inconsistent table sizes");
    const std::size_t m = conditional.size() / k;
    std::vector<double> p_b(m, 0.0), q_b(m, 0.0);
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < m; ++b) {
            p_b[b] += p_a[a] * conditional[a * m + b];
            q_b[b] += q_a[a] * q_conditional[a * m + b];
        }
    const double da = f_sum(p_a, q_a, spec), db = f_sum(p_b, q_b, spec);
    r.record(detail::safe_excess(db, da) - kInequalitySlack, [&] {
        return std::string(spec.name()) + " p_a=[" + format_list(p_a) + "] q_a=[" + format_list(q_a) +
               "] cond=[" + format_list(conditional) + "]";
    });
    return r;
}

/// The mutation keeps P_a = Q_a but gives Q its own conditional.
inline CheckReport check_information_loss_suite(const CheckOptions& options, std::size_t joints = 1000) {
    CheckReport r{"information_loss"};
    Rng rng(derive_seed(options.seed, 2));
    for (auto d : kAllDivergences) {
        const DivergenceSpec spec(d);
        for (std::size_t i = 0; i < joints; ++i) {
            const auto k = detail::random_size(rng, 2, 4), m = detail::random_size(rng, 2, 4);
            const auto p_a = random_distribution(rng, k);
            const auto q_a = options.mutate ? p_a : random_distribution(rng, k);
            std::vector<double> cond, other;
            for (std::size_t a = 0; a < k; ++a) {
                const auto row = random_distribution(rng, m);
                cond.insert(cond.end(), row.begin(), row.end());
                const auto alt = random_distribution(rng, m);
                other.insert(other.end(), alt.begin(), alt.end());
            }
            r.merge(check_information_loss(p_a, q_a, cond, spec, options.mutate ? other : cond));
        }
    }
    return r;
}

/// Trajectory divergence >= state-action divergence; the mutation asserts the reverse.
inline CheckReport check_thm1(const CheckOptions& options, std::size_t batch = 200) {
    CheckReport r{"thm1"};
    Rng rng(derive_seed(options.seed, 3));
    for (std::size_t i = 0; i < batch; ++i) {
        const auto inst = random_instance(rng);
        for (auto d : kAllDivergences) {
            const DivergenceSpec spec(d);
            const double traj = traj_divergence(inst.mdp, inst.expert, inst.learner, spec);
            const double sa = state_action_divergence(inst.mdp, inst.expert, inst.learner, spec);
            const double gap = divergence_gap(inst.mdp, inst.expert, inst.learner, spec);
            const double v = options.mutate ? detail::safe_excess(traj, sa)
                                            : std::max(detail::safe_excess(sa, traj), -gap);
            r.record(v - kInequalitySlack,
                     [&] { return std::string(spec.name()) + " " + detail::describe_instance(inst); });
        }
    }
    return r;
}

/// Expected action RKL weighted by expert occupancy (the falsified variant).
inline double expert_weighted_action_rkl(const FiniteMdp& mdp, const TabularPolicy& expert,
                                         const TabularPolicy& learner) {
    const DivergenceSpec rkl(Divergence::RKL);
    const auto occ = occupancy(mdp, expert);
    double total = 0.0;
    for (int s = 0; s < mdp.num_states(); ++s)
        total += occ.avg_state[static_cast<std::size_t>(s)] * f_sum(expert.row(s), learner.row(s), rkl);
    return total;
}

/// Trajectory RKL = H * E_{rho_learner} RKL(action), to 1e-9.
inline CheckReport check_rkl_equality(const CheckOptions& options, std::size_t batch = 100) {
    CheckReport r{"rkl_equality"};
    Rng rng(derive_seed(options.seed, 4));
    const DivergenceSpec rkl(Divergence::RKL);
    for (std::size_t i = 0; i < batch; ++i) {
        const auto inst = random_instance(rng);
        const double traj = traj_divergence(inst.mdp, inst.expert, inst.learner, rkl);
        const double per_action = options.mutate ? expert_weighted_action_rkl(inst.mdp, inst.expert, inst.learner)
                                                 : expected_action_divergence(inst.mdp, inst.expert, inst.learner, rkl);
        r.record(std::abs(traj - inst.mdp.horizon() * per_action) - kInequalitySlack,
                 [&] { return detail::describe_instance(inst); });
    }
    return r;
}

/**
 * TV(traj) <= H E[TV(action)] <= H sqrt(E[KL(action)]), expectations under the
 * learner's average state occupancy. The mutation drops H from the first bound.
 */
inline CheckReport check_tv_chain(const CheckOptions& options, std::size_t batch = 100) {
    CheckReport r{"tv_chain"};
    Rng rng(derive_seed(options.seed, 5));
    const DivergenceSpec tv(Divergence::TV), kl(Divergence::KL);
    for (std::size_t i = 0; i < batch; ++i) {
        const auto inst = random_instance(rng);
        const double H = options.mutate ? 1.0 : inst.mdp.horizon();
        const double traj = traj_divergence(inst.mdp, inst.expert, inst.learner, tv);
        const double mid = H * expected_action_divergence(inst.mdp, inst.expert, inst.learner, tv);
        const double top = inst.mdp.horizon() * std::sqrt(expected_action_divergence(inst.mdp, inst.expert, inst.learner, kl));
        r.record(std::max(traj - mid, mid - top) - kInequalitySlack, [&] { return detail::describe_instance(inst); });
    }
    return r;
}

/**
 * Objective at the optimal discriminator equals the divergence; random
 * discriminators never exceed it. The mutation shifts the optimum by 0.5 and
 * still asserts tightness.
 */
inline CheckReport check_variational_tightness(const CheckOptions& options, std::size_t pairs = 1000,
                                               std::size_t discriminators = 1000) {
    CheckReport r{"variational_tightness"};
    Rng rng(derive_seed(options.seed, 6));
    for (std::size_t i = 0; i < pairs; ++i) {
        const auto n = detail::random_size(rng, 2, 5);
        const auto p = random_distribution(rng, n), q = random_distribution(rng, n);
        for (auto d : kAllDivergences) {
            const DivergenceSpec spec(d);
            const double exact = exact_f_divergence(p, q, spec);
            auto star = optimal_discriminator(p, q, spec);
            if (options.mutate) {
                std::vector<double> w(star.weights().begin(), star.weights().end());
                for (auto& x : w) x += 0.5;
                star = Discriminator(1, static_cast<int>(n), std::move(w));
            }
            auto describe = [&] {
                return std::string(spec.name()) + " p=[" + format_list(p) + "] q=[" + format_list(q) + "]";
            };
            r.record(std::abs(variational_objective(p, q, star, spec) - exact) - kInequalitySlack, describe);
            if (options.mutate) continue;
            double worst = -kInfinity;
            std::vector<double> w(n);
            for (std::size_t k = 0; k < discriminators; ++k) {
                for (auto& x : w) x = uniform(rng, -5.0, 5.0);
                worst = std::max(worst, variational_objective(p, q, Discriminator(1, static_cast<int>(n), w), spec));
            }
            r.record(worst - exact - kInequalitySlack, describe);
        }
    }
    return r;
}

struct DreBoundOptions {
    int cells = 4;
    std::vector<std::size_t> sample_sizes{100, 1000, 10000};
    int trials = 100;
    double delta = 0.1;
    int grid_values = 401;  // ratio values per cell in the finite class
    double cell_floor = 0.05;
};

/// (2 / c) sqrt(log(2 |G| / delta)) N^(-1/4) with |G| = grid_values^cells.
inline double dre_error_bound(int cells, int grid_values, double c, double delta, std::size_t n) {
    const double log_g = cells * std::log(static_cast<double>(grid_values));
    return (2.0 / c) * std::sqrt(log_g + std::log(2.0 / delta)) * std::pow(static_cast<double>(n), -0.25);
}

/// E_q |r_hat - p / q| for the clipped least-squares ratio from n samples of each side.
inline double dre_trial_error(std::span<const double> p, std::span<const double> q, double c, std::size_t n,
                              Rng& rng) {
    const int cells = static_cast<int>(p.size());
    SampleSet num(1, cells, SampleSource::Expert), den(1, cells, SampleSource::Learner);
    for (std::size_t i = 0; i < n; ++i) num.add(0, sample_categorical(rng, p));
    for (std::size_t i = 0; i < n; ++i) den.add(0, sample_categorical(rng, q));
    const auto est = lsq_density_ratio(num, den, c);
    double err = 0.0;
    for (int x = 0; x < cells; ++x) err += q[x] * std::abs(est(0, x) - p[x] / q[x]);
    return err;
}

/**
 * Per sample size, the error must be within the bound in at least (1 - delta)
 * of the trials, and the mean error must strictly decrease along the grid.
 * c is the smallest cell mass of each trial's pair. The mutation scales the bound by 1e-3.
 */
inline CheckReport check_dre_bound(const CheckOptions& options, const DreBoundOptions& dre = {},
                                   std::vector<double>* mean_errors = nullptr) {
    CheckReport r{"dre_bound"};
    const double scale = options.mutate ? 1e-3 : 1.0;
    std::vector<double> means;
    for (std::size_t k = 0; k < dre.sample_sizes.size(); ++k) {
        const auto n = dre.sample_sizes[k];
        int within = 0;
        double total = 0.0, worst = -kInfinity;
        for (int t = 0; t < dre.trials; ++t) {
            Rng pair_rng(derive_seed(options.seed, 1000 + static_cast<std::uint64_t>(t)));
            const auto p = random_distribution(pair_rng, static_cast<std::size_t>(dre.cells), dre.cell_floor);
            const auto q = random_distribution(pair_rng, static_cast<std::size_t>(dre.cells), dre.cell_floor);
            const double c = std::min(*std::min_element(p.begin(), p.end()), *std::min_element(q.begin(), q.end()));
            Rng rng(derive_seed(derive_seed(options.seed, 2000 + static_cast<std::uint64_t>(t)), n));
            const double err = dre_trial_error(p, q, c, n, rng);
            const double bound = scale * dre_error_bound(dre.cells, dre.grid_values, c, dre.delta, n);
            total += err;
            worst = std::max(worst, err - bound);
            if (err <= bound) ++within;
        }
        means.push_back(total / dre.trials);
        const double need = (1.0 - dre.delta) * dre.trials;
        r.record(within >= need ? std::min(worst, 0.0) : need - within, [&] {
            return "N=" + std::to_string(n) + " within=" + std::to_string(within) + "/" + std::to_string(dre.trials);
        });
    }
    for (std::size_t k = 1; k < means.size(); ++k)
        r.record(means[k] - means[k - 1] >= 0.0 ? means[k] - means[k - 1] + 1e-300 : 0.0,
                 [&] { return "mean error not decreasing: [" + format_list(means) + "]"; });
    if (mean_errors) *mean_errors = std::move(means);
    return r;
}

/**
 * Support mismatch: exact divergence +inf while sample estimates stay finite
 * (bandit expert vs A under KL, vs M under RKL). For RKL the estimate must also
 * grow with the number of discriminator steps. The mutation expects an infinite estimate.
 */
inline CheckReport check_blindness(const CheckOptions& options) {
    CheckReport r{"blindness"};
    const std::vector<double> expert{0.5, 0.5, 0.0}, mode_a{1.0, 0.0, 0.0}, cover{0.28, 0.28, 0.44};
    const std::array<std::size_t, 4> budgets{10, 100, 1000, 10000};
    auto demo = [&](Divergence d, const std::vector<double>& learner) {
        for (std::size_t n : budgets) {
            const auto res = estimator_blindness_demo(DivergenceSpec(d), expert, learner, n, derive_seed(options.seed, n));
            const bool ok = std::isinf(res.true_value) &&
                            (options.mutate ? std::isinf(res.estimate) : std::isfinite(res.estimate));
            r.record(ok ? 0.0 : 1.0, [&] {
                return std::string(to_string(d)) + " n=" + std::to_string(n) + " true=" +
                       format_double(res.true_value) + " estimate=" + format_double(res.estimate);
            });
        }
    };
    demo(Divergence::KL, mode_a);
    demo(Divergence::RKL, cover);
    double prev = -kInfinity;
    for (int steps : {10, 100, 1000}) {
        const auto res = estimator_blindness_demo(DivergenceSpec(Divergence::RKL), expert, cover, 1000,
                                                  derive_seed(options.seed, 7), {.fit_steps = steps});
        r.record(res.estimate > prev ? 0.0 : prev - res.estimate + 1e-300, [&] {
            return "RKL estimate did not grow at " + std::to_string(steps) + " steps: " + format_double(res.estimate);
        });
        prev = res.estimate;
    }
    return r;
}

struct CheckEntry {
    std::string name;
    std::function<CheckReport(const CheckOptions&)> run;
};

inline const std::vector<CheckEntry>& all_checks() {
    static const std::vector<CheckEntry> checks{
        {"log_sum", [](const CheckOptions& o) { return check_log_sum_suite(o); }},
        {"information_loss", [](const CheckOptions& o) { return check_information_loss_suite(o); }},
        {"thm1", [](const CheckOptions& o) { return check_thm1(o); }},
        {"rkl_equality", [](const CheckOptions& o) { return check_rkl_equality(o); }},
        {"tv_chain", [](const CheckOptions& o) { return check_tv_chain(o); }},
        {"variational_tightness", [](const CheckOptions& o) { return check_variational_tightness(o); }},
        {"dre_bound", [](const CheckOptions& o) { return check_dre_bound(o); }},
        {"blindness", [](const CheckOptions& o) { return check_blindness(o); }},
    };
    return checks;
}

inline const CheckEntry& find_check(std::string_view name) {
    for (const auto& c : all_checks())
        if (c.name == name) return c;
    throw InputError("unknown check: " + std::string(name));
}

} // namespace filab
