#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "riskmcts/dp.hpp"
#include "riskmcts/erm.hpp"
#include "riskmcts/mcts.hpp"
#include "riskmcts/mdp.hpp"

namespace riskmcts {

struct BootstrapCi {
    double point = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

/// Percentile bootstrap for the empirical ERM: the point estimate is the ERM
/// of the costs; `resamples` with-replacement resamples give the interval at
/// the requested level. Requires at least two costs.
BootstrapCi bootstrap_erm_ci(std::span<const double> costs, RiskParam beta,
                             int resamples, double level, std::uint64_t seed);

struct ExperimentConfig {
    std::string mdp_source = "mdp4";  // builtin name or file path
    double epsilon = 0.1;             // builtin mdp4 only
    double reset_prob = 0.1;          // builtin mdp4 only
    int horizon = 0;                  // 0 keeps the model's own horizon
    double gamma = 0.0;               // 0 keeps the model's own discount
    std::vector<double> betas{0.1, 0.5, 1.0};
    std::vector<std::string> algorithms{"erm-bi", "erm-mcts", "acc-mcts"};
    int iterations = 1000;
    int seeds = 100;
    int bootstrap_resamples = 10000;
    double confidence = 0.95;
    std::uint64_t base_seed = 0;
    int threads = 0;  // 0 = hardware concurrency
    double acc_exploration = 1.4142135623730951;
    std::vector<int> iteration_grid{100, 316, 1000, 3162, 10000};

    void check() const;
    TabularMdp resolve_mdp() const;
};

struct SummaryRow {
    std::string algorithm;
    double beta = 0.0;
    int iterations = 0;
    double erm = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
};

struct SeedRow {
    std::string algorithm;
    double beta = 0.0;
    int seed = 0;
    double discounted_cost = 0.0;
};

struct ExperimentResult {
    std::vector<SummaryRow> summary;
    std::vector<SeedRow> per_seed;
    std::string metadata;
};

/// Per-seed RNG streams are derived as
/// derive_seed(base_seed, {fnv1a(algorithm), bits(beta), [n,] seed}), so
/// adding algorithms or beta values never perturbs existing streams.
ExperimentResult run_table1(const ExperimentConfig& config);
ExperimentResult run_convergence_curve(const ExperimentConfig& config);

/// Episode runners used by the harness (planning-then-execution protocol:
/// each environment step replans from the current state with the remaining
/// horizon; the executed-policy discounted cost uses root-level discounting).
double run_episode_policy(const TabularMdp& mdp, const Policy& policy, Rng& rng);
double run_episode_erm_mcts(const TabularMdp& mdp, RiskParam beta,
                            int iterations, Rng& rng);
double run_episode_acc_mcts(const TabularMdp& mdp, RiskParam beta,
                            int iterations, double exploration, Rng& rng);

struct ConcentrationConfig {
    int tail_runs = 2000;
    int tail_pulls = 400;
    std::vector<double> zs{2.0, 4.0, 8.0};
    std::vector<int> slope_pulls{100, 1000, 10000};
    int slope_runs = 500;
    double beta = 1.0;
    double binomial_confidence = 0.99;
    std::uint64_t base_seed = 0;
    int threads = 0;
    // Two-point cost arms {0, cost_high}; the optimal arm hits the high cost
    // with p_optimal, the suboptimal arm with p_suboptimal.
    double cost_high = 3.0;
    double p_optimal = 0.1;
    double p_suboptimal = 0.9;
};

struct TailPoint {
    double z = 0.0;
    int exceed_count = 0;
    int runs = 0;
    double frequency = 0.0;
    double upper_confidence = 0.0;  // one-sided Wilson upper bound
};

struct ConcentrationReport {
    double mu_star = 0.0;
    double eta_prime = 0.0;  // alpha / (xi (1 - eta))
    double xi_prime = 0.0;   // alpha - 1
    std::vector<TailPoint> tails;
    bool tails_monotone = false;
    bool tails_bounded = false;
    std::vector<std::pair<int, double>> errors;  // (n, mean |stream - mu*|)
    double slope = 0.0;
    bool slope_ok = false;  // slope <= -0.3
    bool passed = false;
};

/// Tail-frequency and convergence-rate checks on a two-armed stationary
/// bandit with analytically known optimal ERM. Tail frequencies estimate
/// P[n rho_bar - n mu* >= n^{eta'} z]; the slope is the log-log fit of the
/// mean |stream ERM - mu*| against n.
ConcentrationReport run_concentration_suite(const ConcentrationConfig& config);

std::string summary_csv(std::span<const SummaryRow> rows);
std::string per_seed_csv(std::span<const SeedRow> rows);

/// One-sided Wilson score upper bound for a binomial proportion.
double wilson_upper(int successes, int trials, double confidence);
double inverse_normal_cdf(double p);

/// CLI entry point (subcommands: solve, plan, table1, curve, concentration,
/// validate-mdp). Returns 0 on success, 1 on validation/usage errors, 2 on
/// runtime errors.
int cli_main(int argc, char** argv);

}  // namespace riskmcts
