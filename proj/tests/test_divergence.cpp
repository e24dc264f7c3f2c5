#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "filab/divergence.hpp"
#include "filab/instances.hpp"

using namespace filab;

namespace {

constexpr double kLn2 = std::numbers::ln2;

std::vector<double> v(std::initializer_list<double> xs) { return xs; }

} // namespace

TEST(Parse, NamesRoundTrip) {
    for (auto d : kAllDivergences) EXPECT_EQ(parse_divergence(to_string(d)), d);
    EXPECT_EQ(parse_divergence("rkl"), Divergence::RKL);
    EXPECT_EQ(parse_divergence("Js"), Divergence::JS);
    EXPECT_THROW(parse_divergence("chi2"), InputError);
}

TEST(Table, KnownEntries) {
    EXPECT_DOUBLE_EQ(divergence_table_entry(Divergence::KL, TableComponent::Generator, 1.0), 0.0);
    EXPECT_DOUBLE_EQ(divergence_table_entry(Divergence::KL, TableComponent::Conjugate, 1.0), 1.0);
    EXPECT_DOUBLE_EQ(divergence_table_entry(Divergence::KL, TableComponent::Conjugate, 2.5), std::exp(1.5));
    EXPECT_NEAR(divergence_table_entry(Divergence::JS, TableComponent::Activation, 0.0), 0.0, 1e-15);
    EXPECT_DOUBLE_EQ(divergence_table_entry(Divergence::TV, TableComponent::Activation, 0.0), 0.0);
    EXPECT_DOUBLE_EQ(divergence_table_entry(Divergence::RKL, TableComponent::Activation, 0.0), -1.0);
    EXPECT_DOUBLE_EQ(divergence_table_entry(Divergence::RKL, TableComponent::Activation, std::log(2.0)), -0.5);
}

TEST(Table, DomainErrorsNameTheComponent) {
    EXPECT_THROW(divergence_table_entry(Divergence::KL, TableComponent::Generator, -1.0), DomainError);
    EXPECT_THROW(divergence_table_entry(Divergence::RKL, TableComponent::Generator, 0.0), DomainError);
    EXPECT_THROW(divergence_table_entry(Divergence::RKL, TableComponent::Conjugate, 0.5), DomainError);
    EXPECT_THROW(divergence_table_entry(Divergence::TV, TableComponent::Conjugate, 0.6), DomainError);
    EXPECT_THROW(divergence_table_entry(Divergence::JS, TableComponent::Conjugate, 1.0), DomainError);
    try {
        divergence_table_entry(Divergence::TV, TableComponent::Conjugate, 0.75);
        FAIL();
    } catch (const DomainError& e) {
        EXPECT_NE(std::string(e.what()).find("f*"), std::string::npos);
    }
}

TEST(Spec, GeneratorsVanishAtOne) {
    for (auto d : kAllDivergences) EXPECT_NEAR(DivergenceSpec(d).f(1.0), 0.0, 1e-15) << to_string(d);
}

TEST(Spec, GeneratorsAreConvex) {
    Rng rng(1);
    for (auto d : kAllDivergences) {
        const DivergenceSpec spec(d);
        for (int i = 0; i < 100; ++i) {
            const double u1 = uniform(rng, 1e-3, 10.0), u2 = uniform(rng, 1e-3, 10.0), lam = uniform01(rng);
            EXPECT_LE(spec.f(lam * u1 + (1 - lam) * u2), lam * spec.f(u1) + (1 - lam) * spec.f(u2) + 1e-12);
        }
    }
}

TEST(Spec, ActivationStaysInConjugateDomain) {
    Rng rng(2);
    for (auto d : kAllDivergences) {
        const DivergenceSpec spec(d);
        for (int i = 0; i < 1000; ++i) {
            const double x = uniform(rng, -30.0, 30.0);
            EXPECT_TRUE(spec.in_conjugate_domain(spec.activation(x))) << to_string(d) << " v=" << x;
        }
    }
    EXPECT_LE(std::abs(DivergenceSpec(Divergence::TV).activation(1e6)), 0.5);
    EXPECT_LT(DivergenceSpec(Divergence::RKL).activation(700.0), 0.0);
}

TEST(Spec, FenchelYoungAndEquality) {
    Rng rng(3);
    for (auto d : kAllDivergences) {
        const DivergenceSpec spec(d);
        for (int i = 0; i < 500; ++i) {
            const double u = uniform(rng, 0.01, 5.0);
            const double t = spec.activation(uniform(rng, -6.0, 6.0));
            EXPECT_GE(spec.f(u), u * t - spec.conjugate(t) - 1e-12);
            const double ts = spec.f_prime(u);
            EXPECT_NEAR(spec.f(u), u * ts - spec.conjugate(ts), 1e-9) << to_string(d) << " u=" << u;
        }
    }
}

TEST(Spec, ConjugateOfActivationMatchesComposition) {
    Rng rng(4);
    for (auto d : kAllDivergences) {
        const DivergenceSpec spec(d);
        for (int i = 0; i < 200; ++i) {
            const double x = uniform(rng, -5.0, 5.0);
            EXPECT_NEAR(spec.conjugate_of_activation(x), spec.conjugate(spec.activation(x)), 1e-10);
            const double h = 1e-6;
            const double fd_g = (spec.activation(x + h) - spec.activation(x - h)) / (2 * h);
            EXPECT_NEAR(spec.activation_derivative(x), fd_g, 1e-6 * std::max(1.0, std::abs(fd_g)));
            const double fd_c = (spec.conjugate_of_activation(x + h) - spec.conjugate_of_activation(x - h)) / (2 * h);
            EXPECT_NEAR(spec.conjugate_of_activation_derivative(x), fd_c, 1e-6 * std::max(1.0, std::abs(fd_c)));
            if (d != Divergence::TV || std::abs(x) < 5.0) {
                EXPECT_NEAR(spec.activation_inverse(spec.activation(x)), x, 1e-7);
            }
        }
    }
}

TEST(Exact, EqualDistributionsGiveZero) {
    const auto p = v({0.2, 0.3, 0.5});
    for (auto d : kAllDivergences) EXPECT_NEAR(exact_f_divergence(p, p, DivergenceSpec(d)), 0.0, 1e-15);
}

TEST(Exact, BanditClosedForms) {
    const auto expert = v({0.5, 0.5, 0.0});
    const auto a = v({1.0, 0.0, 0.0});
    const auto m = v({0.28, 0.28, 0.44});
    EXPECT_NEAR(exact_f_divergence(expert, a, DivergenceSpec(Divergence::RKL)), kLn2, 1e-15);
    EXPECT_NEAR(exact_f_divergence(expert, m, DivergenceSpec(Divergence::KL)), std::log(0.5 / 0.28), 1e-15);
    EXPECT_TRUE(std::isinf(exact_f_divergence(expert, m, DivergenceSpec(Divergence::RKL))));
    EXPECT_TRUE(std::isinf(exact_f_divergence(expert, a, DivergenceSpec(Divergence::KL))));
    // TV and JS from the limiting conventions
    EXPECT_NEAR(exact_f_divergence(expert, a, DivergenceSpec(Divergence::TV)), 0.5, 1e-15);
    const double js = 0.5 * std::log(2 * 0.5 / 1.5) + 1.0 * std::log(2 * 1.0 / 1.5) + 0.5 * kLn2;
    EXPECT_NEAR(exact_f_divergence(expert, a, DivergenceSpec(Divergence::JS)), js, 1e-15);
}

TEST(Exact, RejectsMismatch) {
    EXPECT_THROW(exact_f_divergence(v({0.5, 0.5}), v({1.0}), DivergenceSpec(Divergence::KL)), InputError);
    EXPECT_THROW(exact_f_divergence(v({0.5, 0.4}), v({0.5, 0.5}), DivergenceSpec(Divergence::KL)), InputError);
}

TEST(Exact, SymmetriesAndDuality) {
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        const auto p = random_distribution(rng, 4);
        const auto q = random_distribution(rng, 4);
        const DivergenceSpec tv(Divergence::TV), js(Divergence::JS), kl(Divergence::KL), rkl(Divergence::RKL);
        EXPECT_NEAR(exact_f_divergence(p, q, tv), exact_f_divergence(q, p, tv), 1e-12);
        EXPECT_NEAR(exact_f_divergence(p, q, js), exact_f_divergence(q, p, js), 1e-12);
        EXPECT_NEAR(exact_f_divergence(p, q, kl), exact_f_divergence(q, p, rkl), 1e-12);
        for (auto d : kAllDivergences) EXPECT_GE(exact_f_divergence(p, q, DivergenceSpec(d)), -1e-12);
    }
}

TEST(Traj, BanditRklIsLn2) {
    FiniteMdp bandit(1, 3, {1.0, 1.0, 1.0}, {1.0}, 1);
    TabularPolicy expert(1, 3, {0.5, 0.5, 0.0});
    TabularPolicy a(1, 3, {1.0, 0.0, 0.0});
    EXPECT_NEAR(traj_divergence(bandit, expert, a, DivergenceSpec(Divergence::RKL)), kLn2, 1e-15);
    EXPECT_NEAR(traj_divergence(bandit, expert, expert, DivergenceSpec(Divergence::KL)), 0.0, 1e-15);
}

TEST(Traj, HorizonOneMatchesStateAction) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto inst = random_instance(seed, {.max_horizon = 1});
        for (auto d : kAllDivergences) {
            const DivergenceSpec spec(d);
            EXPECT_NEAR(traj_divergence(inst.mdp, inst.expert, inst.learner, spec),
                        state_action_divergence(inst.mdp, inst.expert, inst.learner, spec), 1e-10);
            EXPECT_NEAR(divergence_gap(inst.mdp, inst.expert, inst.learner, spec), 0.0, 1e-10);
        }
    }
}

TEST(Traj, LowerBoundedByStateAction) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto inst = random_instance(seed + 1000);
        for (auto d : kAllDivergences) {
            const DivergenceSpec spec(d);
            const double traj = traj_divergence(inst.mdp, inst.expert, inst.learner, spec);
            const double sa = state_action_divergence(inst.mdp, inst.expert, inst.learner, spec);
            EXPECT_GE(traj - sa, -1e-9) << "seed " << seed << " " << to_string(d);
            EXPECT_GE(divergence_gap(inst.mdp, inst.expert, inst.learner, spec), -1e-9);
        }
        EXPECT_NEAR(traj_divergence(inst.mdp, inst.expert, inst.expert, DivergenceSpec(Divergence::JS)), 0.0, 1e-12);
    }
}

TEST(Traj, RklEqualsHTimesExpectedAction) {
    const DivergenceSpec rkl(Divergence::RKL);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto inst = random_instance(seed + 5000);
        const double traj = traj_divergence(inst.mdp, inst.expert, inst.learner, rkl);
        const double act = expected_action_divergence(inst.mdp, inst.expert, inst.learner, rkl);
        EXPECT_NEAR(traj, inst.mdp.horizon() * act, 1e-9) << "seed " << seed;
    }
}

TEST(Traj, TvPinskerChain) {
    const DivergenceSpec tv(Divergence::TV), kl(Divergence::KL);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto inst = random_instance(seed + 9000);
        const int H = inst.mdp.horizon();
        const double traj = traj_divergence(inst.mdp, inst.expert, inst.learner, tv);
        const double mid = H * expected_action_divergence(inst.mdp, inst.expert, inst.learner, tv);
        const double top = H * std::sqrt(expected_action_divergence(inst.mdp, inst.expert, inst.learner, kl));
        EXPECT_LE(traj, mid + 1e-9);
        EXPECT_LE(mid, top + 1e-9);
    }
}

TEST(Traj, InfiniteGapPropagates) {
    FiniteMdp bandit(1, 3, {1.0, 1.0, 1.0}, {1.0}, 1);
    TabularPolicy expert(1, 3, {0.5, 0.5, 0.0});
    TabularPolicy m(1, 3, {0.28, 0.28, 0.44});
    EXPECT_TRUE(std::isinf(divergence_gap(bandit, expert, m, DivergenceSpec(Divergence::RKL))));
}

TEST(Traj, StateActionMatchesMonteCarlo) {
    // stochastic learner over a noisy chain; occupancy estimated from rollouts
    const auto inst = random_instance(77, {.min_states = 3, .max_states = 3, .min_horizon = 3, .max_horizon = 3});
    const int S = 3, A = inst.mdp.num_actions(), H = 3;
    const int n = 200000;
    Rng rng(8);
    std::vector<double> counts(static_cast<std::size_t>(S * A), 0.0);
    for (int i = 0; i < n; ++i) {
        const auto t = sample_trajectory(inst.mdp, inst.learner, rng);
        for (int k = 0; k < H; ++k) counts[static_cast<std::size_t>(t.states[k] * A + t.actions[k])] += 1.0;
    }
    for (auto& c : counts) c /= static_cast<double>(n) * H;
    const auto occ = occupancy(inst.mdp, inst.learner);
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double p = occ.state_action[i];
        EXPECT_NEAR(counts[i], p, 3.0 * std::sqrt(H * p * (1 - p) / n));
    }
}
