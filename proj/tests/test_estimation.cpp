#include <gtest/gtest.h>

#include <cmath>

#include "filab/estimation.hpp"
#include "filab/instances.hpp"

using namespace filab;

namespace {

SampleSet samples_from_counts(std::span<const int> counts, SampleSource source) {
    SampleSet out(1, static_cast<int>(counts.size()), source);
    for (std::size_t a = 0; a < counts.size(); ++a)
        for (int k = 0; k < counts[a]; ++k) out.add(0, static_cast<int>(a));
    return out;
}

} // namespace

TEST(SampleSet, CountsAndRangeChecks) {
    SampleSet s(2, 3, SampleSource::Expert);
    s.add(0, 2);
    s.add(1, 0);
    s.add(0, 2);
    EXPECT_EQ(s.size(), 3u);
    EXPECT_DOUBLE_EQ(s.counts()[2], 2.0);
    EXPECT_DOUBLE_EQ(s.frequencies()[3], 1.0 / 3.0);
    EXPECT_THROW(s.add(2, 0), InputError);
    EXPECT_THROW(s.add(0, -1), InputError);
    s.add(Trajectory{{1, 0, 1}, {1, 2}});
    EXPECT_EQ(s.size(), 5u);
    EXPECT_EQ(s.pairs()[3], (StateAction{1, 1}));
}

TEST(Discriminator, RejectsNonFiniteWeights) {
    EXPECT_THROW(Discriminator(1, 2, {0.0, std::nan("")}), InputError);
    EXPECT_THROW(Discriminator(1, 2, {0.0}), InputError);
}

TEST(VariationalEstimate, KlEqualSamplesAtOptimumIsZero) {
    const std::vector<int> counts{3, 5, 2};
    const auto e = samples_from_counts(counts, SampleSource::Expert);
    const auto l = samples_from_counts(counts, SampleSource::Learner);
    EXPECT_NEAR(variational_estimate(e, l, Discriminator::constant(1, 3, 1.0), DivergenceSpec(Divergence::KL)), 0.0,
                1e-15);
}

TEST(VariationalEstimate, RejectsEmptySets) {
    SampleSet e(1, 2, SampleSource::Expert), l(1, 2, SampleSource::Learner);
    l.add(0, 0);
    EXPECT_THROW(variational_estimate(e, l, Discriminator::constant(1, 2, 0.0), DivergenceSpec(Divergence::KL)),
                 InputError);
}

TEST(VariationalObjective, LowerBoundAndTightness) {
    Rng rng(10);
    for (auto d : kAllDivergences) {
        const DivergenceSpec spec(d);
        for (int i = 0; i < 200; ++i) {
            const auto p = random_distribution(rng, 5);
            const auto q = random_distribution(rng, 5);
            const double exact = exact_f_divergence(p, q, spec);
            const auto opt = optimal_discriminator(p, q, spec);
            EXPECT_NEAR(variational_objective(p, q, opt, spec), exact, 1e-9) << to_string(d);
            std::vector<double> w(5);
            for (auto& x : w) x = uniform(rng, -4.0, 4.0);
            EXPECT_LE(variational_objective(p, q, Discriminator(1, 5, w), spec), exact + 1e-9);
        }
    }
}

TEST(OptimalDiscriminator, ClosedForms) {
    const std::vector<double> p{0.5, 0.5}, q{0.25, 0.75};
    const auto kl = optimal_discriminator(p, p, DivergenceSpec(Divergence::KL));
    EXPECT_DOUBLE_EQ(kl(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(kl(0, 1), 1.0);
    const auto tv = optimal_discriminator(p, p, DivergenceSpec(Divergence::TV));
    EXPECT_DOUBLE_EQ(tv(0, 0), 0.0);
    const DivergenceSpec rkl(Divergence::RKL);
    const auto r = optimal_discriminator(p, q, rkl);
    EXPECT_NEAR(r(0, 0), std::log(2.0), 1e-15);
    EXPECT_NEAR(r(0, 1), std::log(1.0 / 1.5), 1e-15);
    EXPECT_NEAR(rkl.activation(r(0, 0)), -0.5, 1e-15);
    EXPECT_NEAR(rkl.activation(r(0, 1)), -1.5, 1e-15);
    const std::vector<double> z{1.0, 0.0};
    EXPECT_THROW(optimal_discriminator(p, z, rkl), DomainError);
    EXPECT_THROW(optimal_discriminator(z, p, rkl), DomainError);
}

TEST(OptimalDiscriminator, StateShape) {
    const std::vector<double> p(6, 1.0 / 6.0);
    const auto v = optimal_discriminator(p, p, DivergenceSpec(Divergence::KL), 2);
    EXPECT_EQ(v.num_states(), 2);
    EXPECT_EQ(v.num_actions(), 3);
}

TEST(FitDiscriminator, EqualSamplesConvergeToZeroObjective) {
    const std::vector<int> counts{40, 35, 25};
    const auto e = samples_from_counts(counts, SampleSource::Expert);
    const auto l = samples_from_counts(counts, SampleSource::Learner);
    const DivergenceSpec kl(Divergence::KL);
    const auto v = fit_discriminator(e, l, kl, 2000, 0.5, Discriminator::constant(1, 3, 0.0));
    EXPECT_NEAR(variational_estimate(e, l, v, kl), 0.0, 0.05);
    for (double w : v.weights()) EXPECT_NEAR(w, 1.0, 0.05);
}

TEST(FitDiscriminator, ExpertOnlyCellGrowsForKl) {
    const std::vector<int> ec{5, 5}, lc{10, 0};
    const auto e = samples_from_counts(ec, SampleSource::Expert);
    const auto l = samples_from_counts(lc, SampleSource::Learner);
    const DivergenceSpec kl(Divergence::KL);
    auto v = Discriminator::constant(1, 2, 0.0);
    double prev = v(0, 1);
    for (int k = 0; k < 20; ++k) {
        v = fit_discriminator(e, l, kl, 1, 0.1, v);
        EXPECT_GT(v(0, 1), prev);
        EXPECT_NEAR(v(0, 1) - prev, 0.1 * 0.5, 1e-15);
        prev = v(0, 1);
    }
}

TEST(FitDiscriminator, ObjectiveNonDecreasingForSmallRate) {
    Rng rng(12);
    for (auto d : kAllDivergences) {
        const DivergenceSpec spec(d);
        SampleSet e(2, 2, SampleSource::Expert), l(2, 2, SampleSource::Learner);
        for (int i = 0; i < 300; ++i) {
            e.add(static_cast<int>(uniform01(rng) * 2), static_cast<int>(uniform01(rng) * 2));
            l.add(static_cast<int>(uniform01(rng) * 2), static_cast<int>(uniform01(rng) * 2));
        }
        auto v = Discriminator::constant(2, 2, 0.0);
        double prev = variational_estimate(e, l, v, spec);
        for (int k = 0; k < 200; ++k) {
            v = fit_discriminator(e, l, spec, 1, 1e-3, v);
            const double cur = variational_estimate(e, l, v, spec);
            EXPECT_GE(cur, prev - 1e-12) << to_string(d) << " step " << k;
            prev = cur;
        }
    }
}

TEST(FitDiscriminator, Deterministic) {
    const std::vector<int> ec{7, 3, 1}, lc{2, 4, 6};
    const auto e = samples_from_counts(ec, SampleSource::Expert);
    const auto l = samples_from_counts(lc, SampleSource::Learner);
    const DivergenceSpec js(Divergence::JS);
    const auto a = fit_discriminator(e, l, js, 300, 0.3, Discriminator::constant(1, 3, 0.0));
    const auto b = fit_discriminator(e, l, js, 300, 0.3, Discriminator::constant(1, 3, 0.0));
    EXPECT_EQ(a, b);
}

TEST(FitDiscriminator, NumericalErrorReportsStep) {
    const std::vector<int> ec{1, 0}, lc{0, 1};
    const auto e = samples_from_counts(ec, SampleSource::Expert);
    const auto l = samples_from_counts(lc, SampleSource::Learner);
    try {
        fit_discriminator(e, l, DivergenceSpec(Divergence::RKL), 100, 1e300, Discriminator::constant(1, 2, -1.0));
        FAIL() << "expected overflow";
    } catch (const NumericalError& err) {
        EXPECT_GE(err.index(), 0);
    }
    EXPECT_THROW(fit_discriminator(e, l, DivergenceSpec(Divergence::KL), 0, 0.1, Discriminator::constant(1, 2, 0.0)),
                 InputError);
    EXPECT_THROW(fit_discriminator(e, l, DivergenceSpec(Divergence::KL), 1, 0.0, Discriminator::constant(1, 2, 0.0)),
                 InputError);
}

TEST(LsqRatio, CountRatio) {
    const std::vector<int> nc{6, 4}, dc{5, 5};
    const auto r = lsq_density_ratio(samples_from_counts(nc, SampleSource::Learner),
                                     samples_from_counts(dc, SampleSource::Expert), 0.1);
    EXPECT_NEAR(r(0, 0), 1.2, 1e-15);
    EXPECT_NEAR(r(0, 1), 0.8, 1e-15);
}

TEST(LsqRatio, IdenticalSetsGiveOneAndEmptyCellsAreCapped) {
    const std::vector<int> c{3, 0, 7};
    const auto r = lsq_density_ratio(samples_from_counts(c, SampleSource::Learner),
                                     samples_from_counts(c, SampleSource::Expert), 0.25);
    EXPECT_DOUBLE_EQ(r(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(r(0, 1), 4.0);
    EXPECT_DOUBLE_EQ(r(0, 2), 1.0);
}

TEST(LsqRatio, ValuesClippedAndMatchGradientSolve) {
    Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        const int cells = 5;
        const double c = 0.2;
        SampleSet num(1, cells, SampleSource::Learner), den(1, cells, SampleSource::Expert);
        const auto pn = random_distribution(rng, cells, 0.0);
        const auto pd = random_distribution(rng, cells, 0.0);
        for (int i = 0; i < 60; ++i) num.add(0, sample_categorical(rng, pn));
        for (int i = 0; i < 60; ++i) den.add(0, sample_categorical(rng, pd));
        const auto r = lsq_density_ratio(num, den, c);
        // projected gradient descent on mean_den g^2 - 2 mean_num g over the box [c, 1/c]
        const auto fn = num.frequencies(), fd = den.frequencies();
        for (int k = 0; k < cells; ++k) {
            EXPECT_GE(r.values[k], c);
            EXPECT_LE(r.values[k], 1.0 / c);
            if (fd[k] == 0.0) continue;
            double g = 1.0;
            for (int it = 0; it < 20000; ++it) g = std::clamp(g - 0.5 * (2 * fd[k] * g - 2 * fn[k]) / fd[k], c, 1.0 / c);
            EXPECT_NEAR(r.values[k], g, 1e-6);
        }
    }
}

TEST(LsqRatio, RejectsBadFloor) {
    const std::vector<int> c{1, 1};
    const auto s = samples_from_counts(c, SampleSource::Expert);
    EXPECT_THROW(lsq_density_ratio(s, s, 0.0), InputError);
    EXPECT_THROW(lsq_density_ratio(s, s, 1.5), InputError);
}

TEST(Blindness, KlSupportMismatchStaysFinite) {
    const std::vector<double> expert{0.5, 0.5, 0.0}, learner{1.0, 0.0, 0.0};
    for (std::size_t n : {10u, 100u, 1000u, 10000u}) {
        const auto res = estimator_blindness_demo(DivergenceSpec(Divergence::KL), expert, learner, n, 3);
        EXPECT_TRUE(std::isinf(res.true_value));
        EXPECT_TRUE(std::isfinite(res.estimate));
    }
}

TEST(Blindness, RklLearnerOffSupport) {
    const std::vector<double> expert{0.5, 0.5, 0.0}, learner{0.28, 0.28, 0.44};
    const auto res = estimator_blindness_demo(DivergenceSpec(Divergence::RKL), expert, learner, 1000, 4);
    EXPECT_TRUE(std::isinf(res.true_value));
    EXPECT_TRUE(std::isfinite(res.estimate));
}

TEST(Blindness, EqualDistributionsEstimateNearZero) {
    const std::vector<double> p{0.3, 0.3, 0.4};
    for (auto d : kAllDivergences) {
        const auto res = estimator_blindness_demo(DivergenceSpec(d), p, p, 10000, 5);
        EXPECT_DOUBLE_EQ(res.true_value, 0.0);
        EXPECT_NEAR(res.estimate, 0.0, 0.05) << to_string(d);
    }
}
