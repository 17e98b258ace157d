#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "riskmcts/dp.hpp"
#include "riskmcts/errors.hpp"
#include "riskmcts/experiments.hpp"
#include "riskmcts/mcts.hpp"
#include "riskmcts/mdp.hpp"

namespace riskmcts {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

TabularMdp resolve_mdp_arg(const std::string& source, double epsilon,
                           double reset_prob, int horizon, double gamma) {
    TabularMdp mdp = (source == "mdp4") ? make_mdp4(epsilon, reset_prob)
                                        : load_mdp(source);
    if (horizon > 0) mdp.set_horizon(horizon);
    if (gamma > 0.0) mdp.set_gamma(gamma);
    mdp.check_valid();
    return mdp;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << content;
}

std::string default_out_dir() {
    const char* env = std::getenv("RISKMCTS_OUT_DIR");
    return env ? env : "";
}

void emit_results(const ExperimentResult& result, const std::string& out_dir,
                  const std::string& prefix) {
    if (out_dir.empty()) {
        std::cout << summary_csv(result.summary);
        return;
    }
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    write_file(dir / (prefix + "_summary.csv"), summary_csv(result.summary));
    write_file(dir / (prefix + "_seeds.csv"), per_seed_csv(result.per_seed));
    write_file(dir / (prefix + "_metadata.txt"), result.metadata);
    std::cout << "wrote " << (dir / (prefix + "_summary.csv")).string() << "\n";
    std::cout << "wrote " << (dir / (prefix + "_seeds.csv")).string() << "\n";
    std::cout << "wrote " << (dir / (prefix + "_metadata.txt")).string() << "\n";
}

int run_solve(const std::string& source, double beta, double epsilon,
              double reset_prob, int horizon, double gamma,
              const std::string& values_csv) {
    const TabularMdp mdp = resolve_mdp_arg(source, epsilon, reset_prob, horizon, gamma);
    const DpSolution sol = erm_backward_induction(mdp, RiskParam(beta));
    std::cout << "V0(s0) = " << fmt_double(sol.value.at(0, mdp.initial_state()))
              << "\n";
    std::cout << "policy (rows: depth, columns: action per state)\n";
    for (int h = 0; h < mdp.horizon(); ++h) {
        std::cout << "h=" << h << ":";
        for (int s = 0; s < mdp.num_states(); ++s) {
            std::cout << " " << sol.policy.at(h, s);
        }
        std::cout << "\n";
    }
    if (!values_csv.empty()) {
        std::string csv = "h,s,value\n";
        for (int h = 0; h <= mdp.horizon(); ++h) {
            for (int s = 0; s < mdp.num_states(); ++s) {
                csv += std::to_string(h) + "," + std::to_string(s) + "," +
                       fmt_double(sol.value.at(h, s)) + "\n";
            }
        }
        write_file(values_csv, csv);
        std::cout << "wrote " << values_csv << "\n";
    }
    return 0;
}

int run_plan(const std::string& source, double beta, int iterations,
             std::uint64_t seed, const std::string& mode, double xi_terminal,
             const std::string& algo, double exploration, double epsilon,
             double reset_prob, int horizon, double gamma) {
    const TabularMdp mdp = resolve_mdp_arg(source, epsilon, reset_prob, horizon, gamma);
    SearchResult result;
    if (algo == "erm-mcts") {
        const ParameterSchedule sched =
            mode == "theoretical"
                ? ParameterSchedule::theoretical(mdp.horizon(), 0.5, xi_terminal)
                : practical_schedule(mdp);
        result = search(mdp, RiskParam(beta), sched, iterations, seed);
    } else {
        result = acc_mcts_search(mdp, RiskParam(beta), iterations, exploration, seed);
    }
    std::cout << "plan-result v1\n";
    std::cout << "algorithm " << algo << "\n";
    std::cout << "mdp " << source << "\n";
    std::cout << "beta " << fmt_double(beta) << "\n";
    std::cout << "iterations " << result.iterations << "\n";
    std::cout << "seed " << seed << "\n";
    std::cout << "mode " << mode << "\n";
    std::cout << "recommended_action " << result.recommended_action << "\n";
    std::cout << "root_value " << fmt_double(result.root_value) << "\n";
    for (std::size_t a = 0; a < result.actions.size(); ++a) {
        std::cout << "action " << a << " visits " << result.actions[a].visits
                  << " value " << fmt_double(result.actions[a].value) << "\n";
    }
    return 0;
}

int run_validate(const std::string& path) {
    TabularMdp mdp = parse_mdp_file(path);
    const std::vector<std::string> errors = mdp.validate();
    if (errors.empty()) {
        std::cout << path << ": ok\n";
        return 0;
    }
    for (const std::string& e : errors) std::cout << path << ": " << e << "\n";
    return 1;
}

int run_concentration_cmd(const ConcentrationConfig& config,
                          const std::string& out_dir) {
    const ConcentrationReport report = run_concentration_suite(config);
    std::ostringstream out;
    out << "concentration-report v1\n";
    out << "mu_star " << fmt_double(report.mu_star) << "\n";
    out << "eta_prime " << fmt_double(report.eta_prime) << "\n";
    out << "xi_prime " << fmt_double(report.xi_prime) << "\n";
    for (const TailPoint& p : report.tails) {
        out << "tail z " << fmt_double(p.z) << " frequency "
            << fmt_double(p.frequency) << " upper " << fmt_double(p.upper_confidence)
            << "\n";
    }
    out << "tails_monotone " << (report.tails_monotone ? "yes" : "no") << "\n";
    out << "tails_bounded " << (report.tails_bounded ? "yes" : "no") << "\n";
    for (const auto& [n, err] : report.errors) {
        out << "error n " << n << " mean_abs " << fmt_double(err) << "\n";
    }
    out << "slope " << fmt_double(report.slope) << "\n";
    out << "slope_ok " << (report.slope_ok ? "yes" : "no") << "\n";
    out << "passed " << (report.passed ? "yes" : "no") << "\n";
    std::cout << out.str();
    if (!out_dir.empty()) {
        const std::filesystem::path dir(out_dir);
        std::filesystem::create_directories(dir);
        write_file(dir / "concentration_report.txt", out.str());
    }
    return report.passed ? 0 : 1;
}

}  // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"Risk-aware planning toolkit: entropic-risk bandits, MCTS and "
                 "exact dynamic-programming solvers"};
    app.require_subcommand(1);

    std::string mdp_source = "mdp4";
    double beta = 0.5;
    double epsilon = 0.1;
    double reset_prob = 0.1;
    int horizon = 0;
    double gamma = 0.0;
    std::string out_dir = default_out_dir();

    auto add_mdp_flags = [&](CLI::App* cmd) {
        cmd->add_option("--mdp", mdp_source, "'mdp4' or a path to an MDP file");
        cmd->add_option("--epsilon", epsilon, "mdp4 risky-branch probability");
        cmd->add_option("--reset-prob", reset_prob, "mdp4 reset probability");
        cmd->add_option("--horizon", horizon, "horizon override (0 keeps the model's)");
        cmd->add_option("--gamma", gamma, "discount override (0 keeps the model's)");
    };

    // solve
    auto* solve_cmd = app.add_subcommand("solve", "Exact ERM backward induction");
    std::string values_csv;
    add_mdp_flags(solve_cmd);
    solve_cmd->add_option("--beta", beta, "risk parameter")->required();
    solve_cmd->add_option("--values", values_csv, "write the full value table as CSV");

    // plan
    auto* plan_cmd = app.add_subcommand("plan", "Single tree search from the initial state");
    int iterations = 1000;
    std::uint64_t seed = 0;
    std::string mode = "practical";
    double xi_terminal = 160.0;
    std::string algo = "erm-mcts";
    double exploration = 1.4142135623730951;
    add_mdp_flags(plan_cmd);
    plan_cmd->add_option("--beta", beta, "risk parameter")->required();
    plan_cmd->add_option("--iterations", iterations, "search iterations");
    plan_cmd->add_option("--seed", seed, "RNG seed");
    plan_cmd->add_option("--mode", mode, "parameter schedule mode")
        ->check(CLI::IsMember({"practical", "theoretical"}));
    plan_cmd->add_option("--xi-terminal", xi_terminal, "terminal xi (theoretical mode)");
    plan_cmd->add_option("--algo", algo, "planner")
        ->check(CLI::IsMember({"erm-mcts", "acc-mcts"}));
    plan_cmd->add_option("--exploration", exploration, "acc-mcts exploration constant");

    // table1 / curve
    ExperimentConfig config;
    auto add_experiment_flags = [&](CLI::App* cmd) {
        add_mdp_flags(cmd);
        cmd->add_option("--beta", config.betas, "risk parameters");
        cmd->add_option("--algos", config.algorithms, "algorithms to run");
        cmd->add_option("--iterations", config.iterations, "search iterations per step");
        cmd->add_option("--seeds", config.seeds, "number of seeded episodes");
        cmd->add_option("--bootstrap", config.bootstrap_resamples, "bootstrap resamples");
        cmd->add_option("--confidence", config.confidence, "CI level");
        cmd->add_option("--base-seed", config.base_seed, "base seed for stream derivation");
        cmd->add_option("--threads", config.threads, "worker threads (0 = hardware)");
        cmd->add_option("--exploration", config.acc_exploration,
                        "acc-mcts exploration constant");
        cmd->add_option("--out", out_dir, "output directory (default $RISKMCTS_OUT_DIR)");
    };
    auto* table1_cmd = app.add_subcommand("table1", "Benchmark table reproduction");
    add_experiment_flags(table1_cmd);
    auto* curve_cmd = app.add_subcommand("curve", "ERM vs search iterations");
    add_experiment_flags(curve_cmd);
    curve_cmd->add_option("--grid", config.iteration_grid, "iteration grid");

    // concentration
    ConcentrationConfig conc;
    auto* conc_cmd = app.add_subcommand("concentration", "Bandit tail and rate checks");
    conc_cmd->add_option("--runs", conc.tail_runs, "tail-estimate runs");
    conc_cmd->add_option("--pulls", conc.tail_pulls, "pulls per tail run");
    conc_cmd->add_option("--slope-runs", conc.slope_runs, "runs per slope grid point");
    conc_cmd->add_option("--beta", conc.beta, "risk parameter");
    conc_cmd->add_option("--base-seed", conc.base_seed, "base seed");
    conc_cmd->add_option("--threads", conc.threads, "worker threads");
    conc_cmd->add_option("--out", out_dir, "output directory");

    // validate-mdp
    auto* validate_cmd = app.add_subcommand("validate-mdp", "Check an MDP file");
    std::string validate_path;
    validate_cmd->add_option("path", validate_path, "MDP file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_name() == "CallForHelp" ? 0 : 1;
    }

    try {
        if (solve_cmd->parsed()) {
            return run_solve(mdp_source, beta, epsilon, reset_prob, horizon, gamma,
                             values_csv);
        }
        if (plan_cmd->parsed()) {
            return run_plan(mdp_source, beta, iterations, seed, mode, xi_terminal,
                            algo, exploration, epsilon, reset_prob, horizon, gamma);
        }
        if (table1_cmd->parsed() || curve_cmd->parsed()) {
            config.mdp_source = mdp_source;
            config.epsilon = epsilon;
            config.reset_prob = reset_prob;
            config.horizon = horizon;
            config.gamma = gamma;
            if (table1_cmd->parsed()) {
                emit_results(run_table1(config), out_dir, "table1");
            } else {
                emit_results(run_convergence_curve(config), out_dir, "curve");
            }
            return 0;
        }
        if (conc_cmd->parsed()) {
            return run_concentration_cmd(conc, out_dir);
        }
        if (validate_cmd->parsed()) {
            return run_validate(validate_path);
        }
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace riskmcts
