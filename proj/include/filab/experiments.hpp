#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "filab/csv.hpp"
#include "filab/enumeration.hpp"
#include "filab/interactive.hpp"
#include "filab/parallel.hpp"
#include "filab/verify.hpp"
#include "filab/vim.hpp"

namespace filab {

struct RunConfig {
    std::string env = "bandit";
    std::vector<Divergence> divergences{kAllDivergences.begin(), kAllDivergences.end()};
    double eps0 = 0.28;
    double eps1 = 0.14;
    double eps2 = 0.15;
    int horizon = 8;
    std::string expert = "mixture";  // or the name of one expert mode
    std::vector<std::uint64_t> seeds{0};
    int threads = 1;

    // enumerate
    bool symmetry_prune = false;
    std::size_t top = 100;  // ranking rows per divergence for the grid; 0 = all

    // train
    std::string algo = "f-vim";
    int iters = 500;
    int batch = 256;
    int estimator_steps = 10;
    double estimator_rate = 0.05;
    double policy_rate = 0.05;
    int demos = 256;
    int rollouts = 20;  // episodes per iteration for dagger / dre
    double clip = 0.05;

    // estimate-bias
    std::size_t samples = 200;
    int fit_steps = 500;
    double fit_rate = 0.1;
    std::size_t replicates = 0;   // 0: 100 on the bandit, 1 on the grid
    std::size_t policies = 4096;  // grid policies evaluated; 0 = the whole class

    // sweep
    double eps0_min = 0.01;
    double eps0_max = 0.49;
    double eps0_step = 0.01;

    // verify
    std::vector<std::string> checks;  // empty = all
    std::string mutate;               // check to run falsified

    void validate() const {
        if (env != "bandit" && env != "grid") throw InputError("env must be bandit or grid");
        if (divergences.empty()) throw InputError("at least one divergence is required");
        if (seeds.empty()) throw InputError("at least one seed is required");
        if (threads < 1) throw InputError("threads must be >= 1");
        if (iters < 0) throw InputError("iters must be >= 0");
        if (samples < 1) throw InputError("samples must be >= 1");
        if (fit_steps < 1 || !(fit_rate > 0.0)) throw InputError("fit-steps and fit-rate must be positive");
        if (rollouts < 1 || !(clip > 0.0 && clip <= 1.0)) throw InputError("rollouts >= 1 and clip in (0, 1]");
        const std::vector<std::string> algos{"f-vim", "irkl-vim", "bc", "dagger", "dre"};
        if (std::find(algos.begin(), algos.end(), algo) == algos.end())
            throw InputError("algo must be one of f-vim, irkl-vim, bc, dagger, dre");
    }

    VimConfig vim(Divergence d, std::uint64_t seed) const {
        VimConfig v;
        v.divergence = d;
        v.iterations = iters;
        v.estimator_steps = estimator_steps;
        v.estimator_rate = estimator_rate;
        v.policy_rate = policy_rate;
        v.batch_size = batch;
        v.expert_demos = demos;
        v.seed = seed;
        return v;
    }
};

struct TimingEntry {
    std::string record;
    double wall_ms;
};

using TimingLog = std::vector<TimingEntry>;

inline void write_timing(std::ostream& out, const TimingLog& log) {
    CsvWriter csv(out, "timing/1", {"record", "wall_ms"});
    for (const auto& e : log) csv.row({e.record, format_double(e.wall_ms)});
}

namespace detail {

class Stopwatch {
public:
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline void log_time(TimingLog* log, std::string record, const Stopwatch& sw) {
    if (log) log->push_back({std::move(record), sw.ms()});
}

inline TabularPolicy named_policy(const EnvBundle& env, const std::string& name) {
    for (const auto& np : env.named_policies)
        if (np.name == name) return np.policy;
    std::string known;
    for (const auto& np : env.named_policies) known += " " + np.name;
    throw InputError("unknown expert mode '" + name + "'; expected mixture or one of:" + known);
}

inline std::uint64_t hash_table(std::span<const double> table) { return hash_parameters(table); }

} // namespace detail

inline EnvBundle make_env(const RunConfig& cfg) {
    auto env = cfg.env == "bandit" ? make_bandit(cfg.eps0) : make_gridworld(cfg.eps1, cfg.eps2, cfg.horizon);
    if (cfg.expert != "mixture") env = with_expert(env, detail::named_policy(env, cfg.expert));
    return env;
}

/// Argmin and ranking rows of the exact enumeration.
inline void cmd_enumerate(const RunConfig& cfg, std::ostream& out, TimingLog* timing = nullptr) {
    cfg.validate();
    detail::Stopwatch sw;
    const auto env = make_env(cfg);
    const auto res = env.kind == EnvKind::Bandit
                         ? enumerate_bandit(cfg.eps0, cfg.divergences)
                         : enumerate_gridworld(env, cfg.divergences,
                                               {.symmetry_prune = cfg.symmetry_prune, .threads = cfg.threads});
    auto policy_of = [&](std::uint64_t id) {
        return env.kind == EnvKind::Bandit ? env.named_policies[static_cast<std::size_t>(id)].policy
                                           : TabularPolicy::deterministic(grid_actions_from_id(id, env.mdp.num_states()), kGridActions);
    };
    CsvWriter csv(out, "enumerate/1",
                  {"experiment", "env", "divergence", "row", "rank", "policy_id", "label", "true_value",
                   "tied_with_argmin", "collapse_score", "cover_score", "unsafe_mass"});
    for (const auto& r : res.rankings) {
        auto emit = [&](const std::string& kind, std::size_t rank, std::uint64_t id) {
            const auto m = mode_metrics(policy_of(id), env);
            const bool tied = std::find(r.argmin_ties.begin(), r.argmin_ties.end(), id) != r.argmin_ties.end();
            csv.row({"enumerate", cfg.env, std::string(to_string(r.divergence)), kind, std::to_string(rank),
                     std::to_string(id), res.label(id), format_double(r.values[static_cast<std::size_t>(id)]),
                     tied ? "1" : "0", format_double(m.collapse_score), format_double(m.cover_score),
                     format_double(m.unsafe_mass)});
        };
        emit("argmin", 0, r.argmin());
        const std::size_t limit =
            env.kind == EnvKind::Bandit || cfg.top == 0 ? r.order.size() : std::min(cfg.top, r.order.size());
        for (std::size_t i = 0; i < limit; ++i) emit("rank", i, r.order[i]);
    }
    detail::log_time(timing, "enumerate", sw);
}

struct BiasSample {
    std::uint64_t policy_id = 0;
    std::string label;
    std::size_t replicate = 0;
    Divergence divergence = Divergence::KL;
    double true_value = 0.0;
    double estimate = 0.0;
};

/// Fits a tabular discriminator on `samples` draws from each occupancy and evaluates the sample bound.
inline double occupancy_estimate(std::span<const double> expert_occ, std::span<const double> learner_occ, int S,
                                 int A, const DivergenceSpec& spec, std::size_t samples, int fit_steps,
                                 double fit_rate, std::uint64_t seed) {
    Rng rng(seed);
    SampleSet e(S, A, SampleSource::Expert), l(S, A, SampleSource::Learner);
    for (std::size_t i = 0; i < samples; ++i) {
        const int x = sample_categorical(rng, expert_occ);
        e.add(x / A, x % A);
    }
    for (std::size_t i = 0; i < samples; ++i) {
        const int x = sample_categorical(rng, learner_occ);
        l.add(x / A, x % A);
    }
    const auto v = fit_discriminator(e, l, spec, fit_steps, fit_rate, Discriminator::constant(S, A, 0.0));
    return variational_estimate(e, l, v, spec);
}

/**
 * True state-action divergence against a small-sample variational estimate for
 * every evaluated policy, plus the bottom-1-percentile-by-estimate summary per
 * divergence. Returns the flagged-set mean normalized gap per divergence.
 */
inline std::vector<double> cmd_estimate_bias(const RunConfig& cfg, std::ostream& out, TimingLog* timing = nullptr,
                                             std::ostream* warnings = &std::cerr) {
    cfg.validate();
    detail::Stopwatch sw;
    const auto env = make_env(cfg);
    const int S = env.mdp.num_states(), A = env.mdp.num_actions();

    struct Candidate {
        std::uint64_t id;
        std::string label;
        TabularPolicy policy;
    };
    std::vector<Candidate> candidates;
    if (env.kind == EnvKind::Bandit) {
        for (std::size_t i = 0; i < env.named_policies.size(); ++i)
            candidates.push_back({i, env.named_policies[i].name, env.named_policies[i].policy});
    } else {
        const auto n = env.policy_class_size;
        const std::uint64_t count = cfg.policies == 0 ? n : std::min<std::uint64_t>(cfg.policies, n);
        for (std::uint64_t k = 0; k < count; ++k) {
            const std::uint64_t id = k * n / count;
            candidates.push_back(
                {id, std::to_string(id), TabularPolicy::deterministic(grid_actions_from_id(id, S), kGridActions)});
        }
    }
    // control: the expert against itself
    candidates.push_back({env.policy_class_size, "expert", env.expert.policy});

    const std::size_t reps = cfg.replicates ? cfg.replicates : (env.kind == EnvKind::Bandit ? 100 : 1);
    const std::size_t D = cfg.divergences.size();
    const auto expert_occ = occupancy(env.mdp, env.expert.policy).state_action;
    const std::uint64_t base = cfg.seeds.front();
    std::vector<BiasSample> rows(candidates.size() * reps * D);
    parallel_for(candidates.size() * reps, cfg.threads, [&](std::size_t unit) {
        const auto& c = candidates[unit / reps];
        const std::size_t rep = unit % reps;
        const auto learner_occ = occupancy(env.mdp, c.policy).state_action;
        for (std::size_t k = 0; k < D; ++k) {
            const DivergenceSpec spec(cfg.divergences[k]);
            const auto seed = derive_seed(derive_seed(base, unit / reps), rep * D + k);
            rows[unit * D + k] = {c.id,
                                  c.label,
                                  rep,
                                  cfg.divergences[k],
                                  f_sum(expert_occ, learner_occ, spec),
                                  occupancy_estimate(expert_occ, learner_occ, S, A, spec, cfg.samples,
                                                     cfg.fit_steps, cfg.fit_rate, seed)};
        }
    });

    CsvWriter csv(out, "estimate-bias/1",
                  {"experiment", "env", "divergence", "row", "policy_id", "label", "replicate", "true_value",
                   "estimate", "true_norm", "estimate_norm", "gap_norm", "flagged"});
    std::vector<double> gaps;
    for (std::size_t k = 0; k < D; ++k) {
        std::vector<std::size_t> idx;
        for (std::size_t i = k; i < rows.size(); i += D) idx.push_back(i);
        double lo = kInfinity, hi = -kInfinity;
        for (auto i : idx)
            for (double x : {rows[i].true_value, rows[i].estimate})
                if (std::isfinite(x)) {
                    lo = std::min(lo, x);
                    hi = std::max(hi, x);
                }
        auto norm = [&](double x) {
            if (!std::isfinite(x)) return x;
            return hi > lo ? (x - lo) / (hi - lo) : 0.0;
        };
        // control rows (the expert against itself) are never flagged
        std::vector<std::size_t> by_estimate;
        for (auto i : idx)
            if (rows[i].policy_id != env.policy_class_size) by_estimate.push_back(i);
        std::stable_sort(by_estimate.begin(), by_estimate.end(),
                         [&](std::size_t a, std::size_t b) { return rows[a].estimate < rows[b].estimate; });
        const auto n_flag = static_cast<std::size_t>(std::ceil(0.01 * static_cast<double>(by_estimate.size())));
        std::vector<bool> flagged(rows.size(), false);
        for (std::size_t j = 0; j < n_flag; ++j) flagged[by_estimate[j]] = true;

        const auto name = std::string(to_string(cfg.divergences[k]));
        double sum_true = 0.0, sum_est = 0.0, sum_tn = 0.0, sum_en = 0.0;
        std::size_t infinite = 0;
        for (auto i : idx) {
            const auto& r = rows[i];
            const double tn = norm(r.true_value), en = norm(r.estimate);
            csv.row({"estimate-bias", cfg.env, name, "sample", std::to_string(r.policy_id), r.label,
                     std::to_string(r.replicate), format_double(r.true_value), format_double(r.estimate),
                     format_double(tn), format_double(en), format_double(tn - en), flagged[i] ? "1" : "0"});
            if (!flagged[i]) continue;
            sum_true += r.true_value;
            sum_est += r.estimate;
            sum_tn += tn;
            sum_en += en;
            if (!std::isfinite(r.true_value)) ++infinite;
        }
        const double nf = static_cast<double>(n_flag);
        const double gap = (sum_tn - sum_en) / nf;
        gaps.push_back(gap);
        csv.row({"estimate-bias", cfg.env, name, "flagged_summary", "", "", std::to_string(n_flag),
                 format_double(sum_true / nf), format_double(sum_est / nf), format_double(sum_tn / nf),
                 format_double(sum_en / nf), format_double(gap), std::to_string(infinite)});
    }
    auto gap_of = [&](Divergence d) -> std::optional<double> {
        for (std::size_t k = 0; k < D; ++k)
            if (cfg.divergences[k] == d) return gaps[k];
        return std::nullopt;
    };
    if (warnings && gap_of(Divergence::RKL)) {
        for (auto d : {Divergence::KL, Divergence::JS}) {
            const auto g = gap_of(d);
            if (g && !(*g > *gap_of(Divergence::RKL)))
                *warnings << "warning: flagged-set underestimation for " << to_string(d) << " ("
                          << format_double(*g) << ") is not larger than for rkl ("
                          << format_double(*gap_of(Divergence::RKL)) << ")\n";
        }
    }
    detail::log_time(timing, "estimate-bias", sw);
    return gaps;
}

struct TrainOutcome {
    TabularPolicy policy;
    int iterations = 0;
};

inline TrainOutcome train_once(const RunConfig& cfg, const EnvBundle& env, Divergence d, std::uint64_t seed) {
    if (cfg.algo == "f-vim") {
        const auto demos = sample_expert_demos(env, static_cast<std::size_t>(cfg.demos), derive_seed(seed, 1));
        return {run_f_vim(env, demos, cfg.vim(d, seed)).policy.to_tabular(), cfg.iters};
    }
    if (cfg.algo == "irkl-vim") return {run_irkl_vim(env, cfg.vim(Divergence::RKL, seed)).policy.to_tabular(), cfg.iters};
    if (cfg.algo == "bc") {
        const auto demos = sample_expert_demos(env, static_cast<std::size_t>(cfg.demos), derive_seed(seed, 1));
        return {behavior_cloning(demos, env.parametric_kind(), cfg.iters, cfg.policy_rate, seed).to_tabular(),
                cfg.iters};
    }
    if (cfg.algo == "dagger") return {run_dagger(env, cfg.iters, cfg.rollouts, seed).policy, cfg.iters};
    return {run_interactive_dre(env, cfg.iters, cfg.rollouts, cfg.clip, seed).policy, cfg.iters};
}

/// One row per (divergence, seed) with the trained policy's exact divergence and mode metrics.
inline void cmd_train(const RunConfig& cfg, std::ostream& out, TimingLog* timing = nullptr) {
    cfg.validate();
    if (cfg.algo == "irkl-vim" &&
        (cfg.divergences.size() != 1 || cfg.divergences.front() != Divergence::RKL))
        throw InputError("irkl-vim trains on rkl only; pass --div rkl");
    if ((cfg.algo == "dagger" || cfg.algo == "dre") && cfg.iters < 1) throw InputError("iters must be >= 1");
    const auto env = make_env(cfg);
    // f-vim trains per divergence; the other algorithms train once per seed
    const bool per_div = cfg.algo == "f-vim";
    const std::size_t D = cfg.divergences.size(), N = cfg.seeds.size();
    const std::size_t units = per_div ? D * N : N;
    std::vector<std::optional<TrainOutcome>> trained(units);
    std::vector<double> wall(units, 0.0);
    parallel_for(units, cfg.threads, [&](std::size_t u) {
        detail::Stopwatch sw;
        const auto d = per_div ? cfg.divergences[u / N] : cfg.divergences.front();
        trained[u] = train_once(cfg, env, d, cfg.seeds[u % N]);
        wall[u] = sw.ms();
    });
    CsvWriter csv(out, "train/1",
                  {"experiment", "env", "algo", "divergence", "seed", "iterations", "true_value", "collapse_score",
                   "cover_score", "unsafe_mass", "policy_hash", "policy"});
    for (std::size_t k = 0; k < D; ++k) {
        const DivergenceSpec spec(cfg.divergences[k]);
        for (std::size_t s = 0; s < N; ++s) {
            const std::size_t u = per_div ? k * N + s : s;
            const auto& t = *trained[u];
            const auto m = mode_metrics(t.policy, env);
            csv.row({"train", cfg.env, cfg.algo, std::string(spec.name()), std::to_string(cfg.seeds[s]),
                     std::to_string(t.iterations),
                     format_double(state_action_divergence(env.mdp, env.expert.policy, t.policy, spec)),
                     format_double(m.collapse_score), format_double(m.cover_score), format_double(m.unsafe_mass),
                     std::to_string(detail::hash_table(t.policy.table())), format_list(t.policy.table())});
            if (timing && (per_div || k == 0))
                timing->push_back({"train/" + std::string(spec.name()) + "/" + std::to_string(cfg.seeds[s]), wall[u]});
        }
    }
}

/// Bandit divergences of A, B and M across the noise grid. Crossovers go to `notes`.
inline void cmd_sweep(const RunConfig& cfg, std::ostream& out, TimingLog* timing = nullptr,
                      std::ostream* notes = nullptr) {
    cfg.validate();
    if (cfg.env != "bandit") throw InputError("sweep runs on the bandit only");
    if (!(cfg.eps0_step > 0.0) || cfg.eps0_min > cfg.eps0_max) throw InputError("empty epsilon0 grid");
    detail::Stopwatch sw;
    const auto grid = noise_grid(cfg.eps0_min, cfg.eps0_max, cfg.eps0_step);
    const auto rows = divergence_vs_noise_sweep(grid, cfg.divergences);
    CsvWriter csv(out, "sweep/1",
                  {"experiment", "divergence", "epsilon0", "value_A", "value_B", "value_M", "argmin", "tied"});
    for (auto d : cfg.divergences)
        for (const auto& r : rows)
            if (r.divergence == d)
                csv.row({"sweep", std::string(to_string(d)), format_double(r.epsilon0), format_double(r.value_a),
                         format_double(r.value_b), format_double(r.value_m), r.argmin, r.tied});
    if (notes)
        for (auto d : cfg.divergences) {
            const auto x = argmin_crossovers(d, grid);
            *notes << to_string(d) << ": " << x.size() << " argmin crossover(s)";
            for (double e : x) *notes << " at epsilon0=" << format_double(e);
            *notes << "\n";
        }
    detail::log_time(timing, "sweep", sw);
}

/// Runs the selected checks; returns true iff all pass.
inline bool cmd_verify(const RunConfig& cfg, std::ostream& out, TimingLog* timing = nullptr) {
    std::vector<std::string> names = cfg.checks;
    if (names.empty())
        for (const auto& c : all_checks()) names.push_back(c.name);
    if (!cfg.mutate.empty()) {
        find_check(cfg.mutate);
        if (std::find(names.begin(), names.end(), cfg.mutate) == names.end()) names.push_back(cfg.mutate);
    }
    std::vector<const CheckEntry*> selected;
    for (const auto& n : names) selected.push_back(&find_check(n));
    CsvWriter csv(out, "verify/1",
                  {"check", "mutated", "instances", "failures", "max_violation", "passed", "first_counterexample"});
    bool all = true;
    for (const auto* c : selected) {
        detail::Stopwatch sw;
        const bool mutate = c->name == cfg.mutate;
        const auto r = c->run({.seed = cfg.seeds.front(), .mutate = mutate});
        all = all && r.passed();
        csv.row({r.name, mutate ? "1" : "0", std::to_string(r.instances), std::to_string(r.failure_count),
                 format_double(r.max_violation), r.passed() ? "1" : "0", r.failures.empty() ? "" : r.failures.front()});
        detail::log_time(timing, "verify/" + c->name, sw);
    }
    return all;
}

} // namespace filab
