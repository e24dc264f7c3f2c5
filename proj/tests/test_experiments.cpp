#include <gtest/gtest.h>

#include <sstream>

#include "filab/experiments.hpp"

using namespace filab;

namespace {

template <class Fn>
std::string capture(Fn&& fn) {
    std::ostringstream out;
    fn(out);
    return out.str();
}

} // namespace

TEST(Csv, NumberFormatting) {
    EXPECT_EQ(format_double(kInfinity), "inf");
    EXPECT_EQ(format_double(0.1), "0.10000000000000001");
    EXPECT_EQ(format_double(2.0), "2");
    EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
    EXPECT_EQ(csv_escape("say \"x\""), "\"say \"\"x\"\"\"");
    std::ostringstream out;
    CsvWriter w(out, "demo/1", {"a", "b"});
    w.row({"1", "inf"});
    EXPECT_EQ(out.str(), "# schema: demo/1\na,b\n1,inf\n");
    EXPECT_THROW(w.row({"1"}), InputError);
}

TEST(Experiments, EnumerateBanditRows) {
    RunConfig cfg;
    const auto csv = capture([&](std::ostream& o) { cmd_enumerate(cfg, o); });
    EXPECT_EQ(csv.rfind("# schema: enumerate/1\n", 0), 0u);
    EXPECT_NE(csv.find("enumerate,bandit,KL,argmin,0,2,M,"), std::string::npos);
    EXPECT_NE(csv.find("enumerate,bandit,RKL,argmin,0,0,A,0.69314718055994529,1"), std::string::npos);
    EXPECT_NE(csv.find("enumerate,bandit,KL,rank,1,0,A,inf,0"), std::string::npos);
}

TEST(Experiments, GridEnumerateIndependentOfThreads) {
    RunConfig cfg;
    cfg.env = "grid";
    cfg.top = 20;
    const auto a = capture([&](std::ostream& o) { cmd_enumerate(cfg, o); });
    cfg.threads = 4;
    const auto b = capture([&](std::ostream& o) { cmd_enumerate(cfg, o); });
    EXPECT_EQ(a, b);
}

TEST(Experiments, TrainIndependentOfThreads) {
    RunConfig cfg;
    cfg.iters = 30;
    cfg.seeds = {0, 1, 2, 3, 4};
    cfg.divergences = {Divergence::KL, Divergence::JS};
    const auto a = capture([&](std::ostream& o) { cmd_train(cfg, o); });
    cfg.threads = 3;
    TimingLog t;
    const auto b = capture([&](std::ostream& o) { cmd_train(cfg, o, &t); });
    EXPECT_EQ(a, b);
    EXPECT_EQ(t.size(), 10u);
    cfg.algo = "bc";
    const auto c = capture([&](std::ostream& o) { cmd_train(cfg, o); });
    EXPECT_EQ(std::count(c.begin(), c.end(), '\n'), 2 + 10);
}

TEST(Experiments, EstimateBiasIndependentOfThreads) {
    RunConfig cfg;
    cfg.replicates = 10;
    std::ostringstream sink;
    const auto a = capture([&](std::ostream& o) { cmd_estimate_bias(cfg, o, nullptr, &sink); });
    cfg.threads = 4;
    const auto b = capture([&](std::ostream& o) { cmd_estimate_bias(cfg, o, nullptr, &sink); });
    EXPECT_EQ(a, b);
    // expert control rows: exact divergence 0
    EXPECT_NE(a.find(",sample,3,expert,0,0,"), std::string::npos);
}

TEST(Experiments, EstimateBiasSupportDeficitIsInfiniteButEstimated) {
    RunConfig cfg;
    cfg.replicates = 2;
    cfg.divergences = {Divergence::KL};
    std::ostringstream sink;
    const auto csv = capture([&](std::ostream& o) { cmd_estimate_bias(cfg, o, nullptr, &sink); });
    std::istringstream in(csv);
    std::string line;
    int deficit_rows = 0;
    while (std::getline(in, line)) {
        if (line.find(",sample,0,A,") == std::string::npos) continue;
        ++deficit_rows;
        EXPECT_NE(line.find(",inf,"), std::string::npos);
        EXPECT_EQ(line.find(",inf,inf,"), std::string::npos);  // estimate itself is finite
    }
    EXPECT_EQ(deficit_rows, 2);
}

TEST(Experiments, SweepAndUsageErrors) {
    RunConfig cfg;
    cfg.divergences = {Divergence::RKL};
    const auto csv = capture([&](std::ostream& o) { cmd_sweep(cfg, o); });
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2 + 49);
    cfg.eps0_min = 0.3;
    cfg.eps0_max = 0.2;
    std::ostringstream sink;
    EXPECT_THROW(cmd_sweep(cfg, sink), InputError);
    RunConfig bad;
    bad.algo = "ppo";
    EXPECT_THROW(cmd_train(bad, sink), InputError);
    bad = {};
    bad.expert = "Z";
    EXPECT_THROW(cmd_enumerate(bad, sink), InputError);
}

TEST(Experiments, VerifyMutationReportsFailure) {
    RunConfig cfg;
    cfg.checks = {"log_sum", "blindness"};
    std::ostringstream out;
    EXPECT_TRUE(cmd_verify(cfg, out));
    cfg.mutate = "blindness";
    std::ostringstream bad;
    EXPECT_FALSE(cmd_verify(cfg, bad));
    EXPECT_NE(bad.str().find("blindness,1,"), std::string::npos);
    cfg.mutate = "nope";
    EXPECT_THROW(cmd_verify(cfg, bad), InputError);
}
