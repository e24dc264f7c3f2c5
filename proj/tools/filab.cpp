// filab command-line harness: enumerate, estimate-bias, train, sweep, verify.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "filab/experiments.hpp"

namespace {

using namespace filab;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, sep))
        if (!item.empty()) out.push_back(item);
    return out;
}

/// "0,3,7" or ranges "0-49"; mixing is allowed.
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> out;
    for (const auto& tok : split(text, ',')) {
        const auto dash = tok.find('-');
        try {
            if (dash == std::string::npos) {
                out.push_back(std::stoull(tok));
            } else {
                const auto lo = std::stoull(tok.substr(0, dash)), hi = std::stoull(tok.substr(dash + 1));
                if (hi < lo) throw InputError("empty seed range " + tok);
                for (auto s = lo; s <= hi; ++s) out.push_back(s);
            }
        } catch (const std::logic_error&) {
            throw InputError("bad seed list entry '" + tok + "'");
        }
    }
    if (out.empty()) throw InputError("empty seed list");
    return out;
}

std::vector<Divergence> parse_divergences(const std::string& text) {
    std::vector<Divergence> out;
    for (const auto& tok : split(text, ',')) out.push_back(parse_divergence(tok));
    if (out.empty()) throw InputError("empty divergence list");
    return out;
}

/// key=value lines; '#' starts a comment.
std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read config file " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InputError(path + ":" + std::to_string(lineno) + ": expected key=value");
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r"), b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

/// Inserts config-file entries as flags unless the command line already sets them.
std::vector<std::string> merge_config(std::vector<std::string> args) {
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    }
    if (path.empty()) return args;
    auto given = [&](const std::string& key) {
        const std::string flag = "--" + key;
        for (const auto& a : args)
            if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
        return false;
    };
    std::vector<std::string> extra;
    for (const auto& [key, value] : read_config_file(path)) {
        if (key == "config" || given(key)) continue;
        if (value == "true") extra.push_back("--" + key);
        else if (value != "false") extra.push_back("--" + key + "=" + value);
    }
    args.insert(args.end(), extra.begin(), extra.end());
    return args;
}

struct Cli {
    RunConfig cfg;
    std::string div_text = "kl,rkl,js,tv";
    std::string seed_text = "0";
    std::string out_path;
    std::string timing_path;
    std::string config_path;
    std::string check_text;
    bool list = false;
};

void add_common(CLI::App* sub, Cli& c) {
    sub->add_option("--env", c.cfg.env, "environment")->check(CLI::IsMember({"bandit", "grid"}));
    sub->add_option("--div", c.div_text, "comma-separated divergences (kl,rkl,js,tv)");
    sub->add_option("--eps0", c.cfg.eps0, "bandit control noise")->check(CLI::Range(0.0, 0.5));
    sub->add_option("--eps1", c.cfg.eps1, "grid control noise")->check(CLI::Range(0.0, 0.999999));
    sub->add_option("--eps2", c.cfg.eps2, "grid transition noise")->check(CLI::Range(0.0, 0.999999));
    sub->add_option("--horizon", c.cfg.horizon, "grid horizon")->check(CLI::Range(4, 64));
    sub->add_option("--expert", c.cfg.expert, "mixture or the name of one expert mode");
    sub->add_option("--seeds", c.seed_text, "seed list, e.g. 0,1,2 or 0-49");
    sub->add_option("--threads", c.cfg.threads, "worker threads")->check(CLI::Range(1, 256));
    sub->add_option("--out", c.out_path, "output CSV path (default stdout)");
    sub->add_option("--timing", c.timing_path, "wall-clock sidecar CSV path");
    sub->add_option("--config", c.config_path, "key=value file merged under the flags");
}

int run(int argc, char** argv) {
    Cli c;
    CLI::App app{"f-divergence imitation learning experiments"};
    app.require_subcommand(1);

    auto* en = app.add_subcommand("enumerate", "exact optimum over the finite policy class");
    add_common(en, c);
    en->add_option("--top", c.cfg.top, "ranking rows per divergence on the grid (0 = all)");
    en->add_flag("--symmetry-prune", c.cfg.symmetry_prune, "evaluate one policy per mirror pair");

    auto* eb = app.add_subcommand("estimate-bias", "true divergence vs small-sample estimate");
    add_common(eb, c);
    eb->add_option("--samples", c.cfg.samples, "expert and learner samples per estimate")->check(CLI::PositiveNumber);
    eb->add_option("--fit-steps", c.cfg.fit_steps, "discriminator ascent steps")->check(CLI::PositiveNumber);
    eb->add_option("--fit-rate", c.cfg.fit_rate, "discriminator step size")->check(CLI::PositiveNumber);
    eb->add_option("--replicates", c.cfg.replicates, "estimates per policy (0 = env default)");
    eb->add_option("--policies", c.cfg.policies, "grid policies evaluated (0 = all)");

    auto* tr = app.add_subcommand("train", "train policies over a seed list");
    add_common(tr, c);
    tr->add_option("--algo", c.cfg.algo, "training algorithm")
        ->check(CLI::IsMember({"f-vim", "irkl-vim", "bc", "dagger", "dre"}));
    tr->add_option("--iters", c.cfg.iters, "iterations")->check(CLI::NonNegativeNumber);
    tr->add_option("--batch", c.cfg.batch, "rollouts per iteration")->check(CLI::PositiveNumber);
    tr->add_option("--estimator-steps", c.cfg.estimator_steps, "discriminator steps per iteration")
        ->check(CLI::PositiveNumber);
    tr->add_option("--estimator-rate", c.cfg.estimator_rate, "discriminator step size")->check(CLI::PositiveNumber);
    tr->add_option("--policy-rate", c.cfg.policy_rate, "policy step size")->check(CLI::NonNegativeNumber);
    tr->add_option("--demos", c.cfg.demos, "expert demonstrations")->check(CLI::PositiveNumber);
    tr->add_option("--rollouts", c.cfg.rollouts, "episodes per iteration (dagger, dre)")->check(CLI::PositiveNumber);
    tr->add_option("--clip", c.cfg.clip, "ratio clip floor c (dre)");

    auto* sw = app.add_subcommand("sweep", "bandit divergences across control noise");
    add_common(sw, c);
    sw->add_option("--eps0-min", c.cfg.eps0_min, "first grid point");
    sw->add_option("--eps0-max", c.cfg.eps0_max, "last grid point");
    sw->add_option("--eps0-step", c.cfg.eps0_step, "grid spacing");

    auto* ve = app.add_subcommand("verify", "randomized theorem checks");
    add_common(ve, c);
    ve->add_flag("--list", c.list, "print check names and exit");
    ve->add_option("--check", c.check_text, "comma-separated checks to run (default all)");
    ve->add_option("--mutate", c.cfg.mutate, "run this check's falsified variant");

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        args = merge_config(std::move(args));
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    if (ve->parsed() && c.list) {
        for (const auto& check : all_checks()) std::cout << check.name << "\n";
        return kExitOk;
    }

    std::ostringstream csv;
    TimingLog timing;
    int code = kExitOk;
    try {
        c.cfg.divergences = parse_divergences(c.div_text);
        c.cfg.seeds = parse_seeds(c.seed_text);
        c.cfg.checks = split(c.check_text, ',');
        if (en->parsed()) cmd_enumerate(c.cfg, csv, &timing);
        else if (eb->parsed()) cmd_estimate_bias(c.cfg, csv, &timing);
        else if (tr->parsed()) cmd_train(c.cfg, csv, &timing);
        else if (sw->parsed()) cmd_sweep(c.cfg, csv, &timing, &std::cerr);
        else if (!cmd_verify(c.cfg, csv, &timing)) code = kExitCheckFailed;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitCheckFailed;
    }

    if (c.out_path.empty()) {
        std::cout << csv.str();
    } else {
        std::ofstream out(c.out_path, std::ios::binary);
        if (!out || !(out << csv.str())) {
            std::cerr << "error: cannot write " << c.out_path << "\n";
            return kExitCheckFailed;
        }
    }
    if (!c.timing_path.empty()) {
        std::ofstream t(c.timing_path, std::ios::binary);
        write_timing(t, timing);
    }
    return code;
}

} // namespace

int main(int argc, char** argv) { return run(argc, argv); }
