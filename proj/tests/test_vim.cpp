#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "filab/vim.hpp"

using namespace filab;

namespace {

constexpr double kPi = std::numbers::pi;

double bandit_kl(double theta) {
    const auto p = bandit_policy_from_theta(theta).probs(0);
    return -0.5 * std::log(p[0]) - 0.5 * std::log(p[1]) - std::log(2.0);
}

} // namespace

TEST(Vim, ZeroIterationsReturnsInitialPolicy) {
    const auto env = make_bandit(0.28);
    VimConfig cfg;
    cfg.iterations = 0;
    cfg.seed = 17;
    const auto demos = sample_expert_demos(env, 10, 1);
    const auto res = run_f_vim(env, demos, cfg);
    Rng rng(17);
    EXPECT_EQ(res.policy, random_initial_policy(ParametricPolicy::Kind::Bandit, 1, rng));
    EXPECT_TRUE(res.history.records.empty());
}

TEST(Vim, ConfigValidation) {
    VimConfig cfg;
    cfg.batch_size = 0;
    EXPECT_THROW(cfg.validate(), InputError);
    cfg = {};
    cfg.estimator_rate = 0.0;
    EXPECT_THROW(cfg.validate(), InputError);
    const auto env = make_bandit(0.28);
    SampleSet wrong(2, 3, SampleSource::Expert);
    wrong.add(0, 0);
    EXPECT_THROW(run_f_vim(env, wrong, VimConfig{}), InputError);
}

TEST(Vim, HistoryIsSeedDeterministic) {
    const auto env = make_gridworld(0.14, 0.15, 8);
    VimConfig cfg;
    cfg.iterations = 15;
    cfg.batch_size = 32;
    cfg.divergence = Divergence::JS;
    cfg.seed = 5;
    const auto demos = sample_expert_demos(env, 64, 9);
    const auto a = run_f_vim(env, demos, cfg);
    const auto b = run_f_vim(env, demos, cfg);
    ASSERT_EQ(a.history.records.size(), 15u);
    EXPECT_EQ(a.policy, b.policy);
    for (std::size_t i = 0; i < a.history.records.size(); ++i) {
        EXPECT_EQ(a.history.records[i].theta_hash, b.history.records[i].theta_hash);
        EXPECT_EQ(a.history.records[i].objective, b.history.records[i].objective);
        EXPECT_EQ(a.history.records[i].exact_divergence, b.history.records[i].exact_divergence);
    }
    cfg.seed = 6;
    EXPECT_NE(run_f_vim(env, demos, cfg).policy, a.policy);
}

TEST(PolicyGradient, ZeroRateLeavesParameters) {
    const auto env = make_bandit(0.28);
    const auto pol = bandit_policy_from_theta(0.3);
    Rng rng(1);
    const auto batch = detail::rollouts(env.mdp, pol.to_tabular(), 20, rng);
    const auto v = Discriminator(1, 3, {0.2, -0.4, 1.0});
    EXPECT_EQ(policy_gradient_step(pol, batch, v, DivergenceSpec(Divergence::KL), 0.0), pol);
}

TEST(PolicyGradient, ConstantDiscriminatorHasZeroMeanUpdate) {
    const auto env = make_bandit(0.28);
    const auto pol = bandit_policy_from_theta(0.7);
    const auto v = Discriminator::constant(1, 3, 0.4);
    const DivergenceSpec spec(Divergence::JS);
    Rng rng(2);
    const int n = 10000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto tr = sample_trajectory(env.mdp, pol.to_tabular(), rng);
        const auto q = cost_to_go(tr, v, spec);
        const double g = pol.grad_log_prob(0, tr.actions[0]) * q[0];
        sum += g;
        sq += g * g;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sq / n - mean * mean) / n);
    EXPECT_LE(std::abs(mean), 3.0 * se);
    const auto exact = exact_policy_gradient(env.mdp, pol, v, spec);
    EXPECT_NEAR(exact[0], 0.0, 1e-14);
}

TEST(PolicyGradient, SurrogateMatchesFiniteDifferences) {
    const auto env = make_gridworld(0.14, 0.15, 8);
    Rng rng(3);
    std::vector<double> theta(9);
    for (auto& t : theta) t = uniform(rng, -kPi, kPi);
    const auto pol = grid_policy_from_theta(theta);
    const auto batch = detail::rollouts(env.mdp, pol.to_tabular(), 40, rng);
    std::vector<double> w(36);
    for (auto& x : w) x = uniform(rng, -2.0, 2.0);
    const Discriminator v(9, 4, w);
    for (auto d : kAllDivergences) {
        std::vector<std::vector<double>> q;
        for (const auto& tr : batch) q.push_back(cost_to_go(tr, v, DivergenceSpec(d)));
        const auto grad = surrogate_gradient(pol, batch, q);
        const double h = 1e-6;
        for (int s = 0; s < 9; ++s) {
            auto up = theta, dn = theta;
            up[static_cast<std::size_t>(s)] += h;
            dn[static_cast<std::size_t>(s)] -= h;
            const double fd = (surrogate_value(pol.with_theta(up), batch, q) -
                               surrogate_value(pol.with_theta(dn), batch, q)) /
                              (2 * h);
            EXPECT_NEAR(grad[static_cast<std::size_t>(s)], fd, 1e-6 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST(PolicyGradient, CostToGoSumsSuffix) {
    const Discriminator v(2, 2, {0.0, 1.0, 2.0, 3.0});
    const Trajectory tr{{0, 1, 1}, {1, 0}};
    const DivergenceSpec rkl(Divergence::RKL);
    const auto q = cost_to_go(tr, v, rkl);
    // RKL: f*(g(v)) = v - 1
    EXPECT_DOUBLE_EQ(q[1], -(2.0 - 1.0));
    EXPECT_DOUBLE_EQ(q[0], -(2.0 - 1.0) - (1.0 - 1.0));
    const auto r = value_to_go(tr, v);
    EXPECT_DOUBLE_EQ(r[0], 3.0);
    EXPECT_DOUBLE_EQ(r[1], 2.0);
}

TEST(PolicyGradient, ExactRklStepWithOptimalDiscriminatorDescends) {
    // full-support expert so that the optimal discriminator exists
    FiniteMdp mdp(1, 3, {1.0, 1.0, 1.0}, {1.0}, 1);
    const std::vector<double> expert{0.45, 0.45, 0.10};
    const DivergenceSpec rkl(Divergence::RKL);
    for (double th : {-2.5, -1.0, -0.2, 0.4, 1.3, 2.9}) {
        const auto pol = bandit_policy_from_theta(th);
        const auto q = pol.probs(0);
        const auto v = optimal_discriminator(expert, q, rkl);
        const auto grad = exact_policy_gradient(mdp, pol, v, rkl);
        const auto next = apply_descent(pol, grad, 1e-3, 0);
        EXPECT_LT(exact_f_divergence(expert, next.probs(0), rkl), exact_f_divergence(expert, q, rkl)) << th;
    }
}

TEST(BehaviorCloning, TabularMle) {
    SampleSet demos(3, 3, SampleSource::Expert);
    for (int i = 0; i < 5; ++i) demos.add(0, 2);
    demos.add(1, 0);
    demos.add(1, 1);
    const auto mle = tabular_mle(demos);
    EXPECT_EQ(std::vector<double>(mle.row(0).begin(), mle.row(0).end()), (std::vector<double>{0.0, 0.0, 1.0}));
    EXPECT_DOUBLE_EQ(mle.prob(1, 0), 0.5);
    EXPECT_DOUBLE_EQ(mle.prob(2, 1), 1.0 / 3.0);
    const auto env = make_bandit(0.28);
    const auto bandit = tabular_mle(sample_expert_demos(env, 2000, 3));
    EXPECT_NEAR(bandit.prob(0, 0), 0.5, 0.05);
    EXPECT_DOUBLE_EQ(bandit.prob(0, 2), 0.0);
}

TEST(BehaviorCloning, BanditInterpolatesIntoUnusedAction) {
    SampleSet demos(1, 3, SampleSource::Expert);
    for (int i = 0; i < 50; ++i) {
        demos.add(0, 0);
        demos.add(0, 1);
    }
    // exact stationary points of the demo likelihood on a fine grid
    double best = 0.0, best_val = 1e300;
    for (int i = -200000; i <= 200000; ++i) {
        const double th = kPi * i / 200000.0;
        if (bandit_kl(th) < best_val) {
            best_val = bandit_kl(th);
            best = th;
        }
    }
    int at_global = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto pol = behavior_cloning(demos, ParametricPolicy::Kind::Bandit, 3000, 0.2, seed);
        const double th = std::remainder(pol.theta()[0], 2 * kPi);
        const double h = 1e-5;
        EXPECT_NEAR((bandit_kl(th + h) - bandit_kl(th - h)) / (2 * h), 0.0, 1e-6) << "seed " << seed;
        if (std::abs(th - best) < 1e-3) {
            ++at_global;
            const auto p = pol.probs(0);
            EXPECT_GT(p[2], 0.05);  // mass on the action the expert never takes
            EXPECT_GT(std::min(p[0], p[1]), 0.3);
        }
    }
    EXPECT_GE(at_global, 1);
}

TEST(BehaviorCloning, UnseenStatesKeepInitialization) {
    SampleSet demos(9, 4, SampleSource::Expert);
    demos.add(7, kLeft);
    demos.add(6, kUp);
    const auto pol = behavior_cloning(demos, ParametricPolicy::Kind::Grid, 100, 0.1, 4);
    Rng rng(4);
    const auto init = random_initial_policy(ParametricPolicy::Kind::Grid, 9, rng);
    for (int s = 0; s < 9; ++s) {
        if (s == 6 || s == 7) {
            EXPECT_NE(pol.theta()[s], init.theta()[s]);
        } else {
            EXPECT_EQ(pol.theta()[s], init.theta()[s]);
        }
    }
    const auto p = pol.probs(6);
    EXPECT_EQ(std::max_element(p.begin(), p.end()) - p.begin(), kUp);
    EXPECT_THROW(behavior_cloning(SampleSet(9, 4, SampleSource::Expert), ParametricPolicy::Kind::Grid, 1, 0.1, 0),
                 InputError);
}
