#include "riskmcts/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

#include "riskmcts/errors.hpp"

#ifndef RISKMCTS_GIT_REVISION
#define RISKMCTS_GIT_REVISION "unknown"
#endif

namespace riskmcts {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Static partition over [0, count); results written by index keep the
/// aggregation order-independent.
template <typename Fn>
void parallel_for(int count, int threads, Fn&& fn) {
    threads = std::min(resolve_threads(threads), count);
    if (threads <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                fn(i);
            }
        });
    }
    for (std::thread& t : pool) t.join();
}

std::uint64_t beta_bits(double beta) { return std::bit_cast<std::uint64_t>(beta); }

double percentile(std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

BootstrapCi bootstrap_erm_ci(std::span<const double> costs, RiskParam beta,
                             int resamples, double level, std::uint64_t seed) {
    if (costs.size() < 2) {
        throw std::invalid_argument("bootstrap needs at least two costs");
    }
    if (resamples < 1) {
        throw std::invalid_argument("bootstrap resample count must be >= 1");
    }
    if (!(level > 0.0) || !(level < 1.0)) {
        throw std::invalid_argument("bootstrap confidence level must lie in (0, 1)");
    }
    BootstrapCi ci;
    ci.point = accumulate_erm(costs, beta);

    Rng rng(seed);
    const std::size_t n = costs.size();
    std::vector<double> stats(resamples);
    for (int b = 0; b < resamples; ++b) {
        ErmAccumulator acc(beta);
        for (std::size_t i = 0; i < n; ++i) {
            acc.update(costs[static_cast<std::size_t>(uniform01(rng) * n)]);
        }
        stats[b] = acc.value();
    }
    std::sort(stats.begin(), stats.end());
    ci.lo = percentile(stats, (1.0 - level) / 2.0);
    ci.hi = percentile(stats, (1.0 + level) / 2.0);
    return ci;
}

void ExperimentConfig::check() const {
    if (seeds < 1) throw std::invalid_argument("config: seeds must be >= 1");
    if (bootstrap_resamples < 100) {
        throw std::invalid_argument("config: bootstrap resamples must be >= 100");
    }
    if (!(confidence > 0.0) || !(confidence < 1.0)) {
        throw std::invalid_argument("config: confidence level must lie in (0, 1)");
    }
    if (iterations < 1) throw std::invalid_argument("config: iterations must be >= 1");
    if (betas.empty()) throw std::invalid_argument("config: need at least one beta");
    if (algorithms.empty()) {
        throw std::invalid_argument("config: need at least one algorithm");
    }
    for (const std::string& a : algorithms) {
        if (a != "erm-bi" && a != "erm-mcts" && a != "acc-mcts") {
            throw std::invalid_argument("config: unknown algorithm '" + a + "'");
        }
    }
    for (double b : betas) RiskParam check_beta(b);
}

TabularMdp ExperimentConfig::resolve_mdp() const {
    TabularMdp mdp = (mdp_source == "mdp4") ? make_mdp4(epsilon, reset_prob)
                                            : load_mdp(mdp_source);
    if (horizon > 0) mdp.set_horizon(horizon);
    if (gamma > 0.0) mdp.set_gamma(gamma);
    mdp.check_valid();
    return mdp;
}

double run_episode_policy(const TabularMdp& mdp, const Policy& policy, Rng& rng) {
    int state = mdp.initial_state();
    double total = 0.0;
    double gp = 1.0;
    for (int k = 0; k < mdp.horizon(); ++k) {
        const Transition tr = sample_transition(mdp, state, policy.at(k, state), rng);
        total += gp * tr.cost;
        gp *= mdp.gamma();
        state = tr.next_state;
    }
    return total + gp * mdp.terminal_cost(state);
}

double run_episode_erm_mcts(const TabularMdp& mdp, RiskParam beta,
                            int iterations, Rng& rng) {
    const int H = mdp.horizon();
    TabularMdp sub = mdp;
    int state = mdp.initial_state();
    double total = 0.0;
    double gp = 1.0;
    for (int k = 0; k < H; ++k) {
        sub.set_horizon(H - k);
        sub.set_initial_state(state);
        const SearchResult plan =
            search(sub, beta, practical_schedule(sub), iterations, rng);
        const Transition tr =
            sample_transition(mdp, state, plan.recommended_action, rng);
        total += gp * tr.cost;
        gp *= mdp.gamma();
        state = tr.next_state;
    }
    return total + gp * mdp.terminal_cost(state);
}

double run_episode_acc_mcts(const TabularMdp& mdp, RiskParam beta,
                            int iterations, double exploration, Rng& rng) {
    const int H = mdp.horizon();
    TabularMdp sub = mdp;
    int state = mdp.initial_state();
    double total = 0.0;
    double gp = 1.0;
    for (int k = 0; k < H; ++k) {
        sub.set_horizon(H - k);
        sub.set_initial_state(state);
        const SearchResult plan =
            acc_mcts_search(sub, beta, iterations, exploration, rng);
        const Transition tr =
            sample_transition(mdp, state, plan.recommended_action, rng);
        total += gp * tr.cost;
        gp *= mdp.gamma();
        state = tr.next_state;
    }
    return total + gp * mdp.terminal_cost(state);
}

namespace {

std::string config_metadata(const ExperimentConfig& c, const char* kind,
                            double wall_seconds) {
    std::ostringstream out;
    out << "riskmcts-run v1\n";
    out << "kind " << kind << "\n";
    out << "mdp " << c.mdp_source << "\n";
    out << "epsilon " << fmt_double(c.epsilon) << "\n";
    out << "reset_prob " << fmt_double(c.reset_prob) << "\n";
    out << "horizon " << c.horizon << "\n";
    out << "gamma " << fmt_double(c.gamma) << "\n";
    out << "betas";
    for (double b : c.betas) out << " " << fmt_double(b);
    out << "\n";
    out << "algorithms";
    for (const std::string& a : c.algorithms) out << " " << a;
    out << "\n";
    out << "iterations " << c.iterations << "\n";
    out << "seeds " << c.seeds << "\n";
    out << "bootstrap_resamples " << c.bootstrap_resamples << "\n";
    out << "confidence " << fmt_double(c.confidence) << "\n";
    out << "base_seed " << c.base_seed << "\n";
    out << "threads " << resolve_threads(c.threads) << "\n";
    out << "acc_exploration " << fmt_double(c.acc_exploration) << "\n";
    out << "replanning fresh-search-per-step-with-remaining-horizon\n";
    out << "git_revision " << RISKMCTS_GIT_REVISION << "\n";
    out << "wall_time_seconds " << fmt_double(wall_seconds) << "\n";
    out << "csv_schema v1\n";
    return out.str();
}

/// Runs `seeds` episodes of one (algorithm, beta, iterations) cell in
/// parallel and appends the summary and per-seed rows.
void run_cell(const ExperimentConfig& config, const TabularMdp& mdp,
              const std::string& algorithm, double beta, int iterations,
              const Policy* bi_policy, ExperimentResult& result) {
    const RiskParam beta_param(beta);
    std::vector<double> costs(config.seeds);
    parallel_for(config.seeds, config.threads, [&](int seed) {
        Rng rng(derive_seed(config.base_seed,
                            {fnv1a(algorithm), beta_bits(beta),
                             static_cast<std::uint64_t>(iterations),
                             static_cast<std::uint64_t>(seed)}));
        if (algorithm == "erm-bi") {
            costs[seed] = run_episode_policy(mdp, *bi_policy, rng);
        } else if (algorithm == "erm-mcts") {
            costs[seed] = run_episode_erm_mcts(mdp, beta_param, iterations, rng);
        } else {
            costs[seed] = run_episode_acc_mcts(mdp, beta_param, iterations,
                                               config.acc_exploration, rng);
        }
    });

    const std::uint64_t ci_seed =
        derive_seed(config.base_seed, {fnv1a("bootstrap"), fnv1a(algorithm),
                                       beta_bits(beta),
                                       static_cast<std::uint64_t>(iterations)});
    const BootstrapCi ci =
        bootstrap_erm_ci(costs, beta_param, config.bootstrap_resamples,
                         config.confidence, ci_seed);
    result.summary.push_back(
        SummaryRow{algorithm, beta, iterations, ci.point, ci.lo, ci.hi});
    for (int seed = 0; seed < config.seeds; ++seed) {
        result.per_seed.push_back(SeedRow{algorithm, beta, seed, costs[seed]});
    }
}

ExperimentResult run_episodes(const ExperimentConfig& config, const char* kind,
                              std::span<const int> iteration_grid) {
    config.check();
    const TabularMdp mdp = config.resolve_mdp();
    const auto start = std::chrono::steady_clock::now();

    ExperimentResult result;
    for (const std::string& algorithm : config.algorithms) {
        for (double beta : config.betas) {
            Policy bi_policy;
            if (algorithm == "erm-bi") {
                bi_policy = erm_backward_induction(mdp, RiskParam(beta)).policy;
            }
            for (int iterations : iteration_grid) {
                run_cell(config, mdp, algorithm, beta, iterations,
                         algorithm == "erm-bi" ? &bi_policy : nullptr, result);
            }
        }
    }
    const double wall = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start)
                            .count();
    result.metadata = config_metadata(config, kind, wall);
    return result;
}

}  // namespace

ExperimentResult run_table1(const ExperimentConfig& config) {
    const int grid[1] = {config.iterations};
    return run_episodes(config, "table1", grid);
}

ExperimentResult run_convergence_curve(const ExperimentConfig& config) {
    if (config.iteration_grid.empty()) {
        throw std::invalid_argument("config: curve needs a non-empty iteration grid");
    }
    for (int n : config.iteration_grid) {
        if (n < 1) throw std::invalid_argument("config: grid iterations must be >= 1");
    }
    return run_episodes(config, "curve", config.iteration_grid);
}

ConcentrationReport run_concentration_suite(const ConcentrationConfig& config) {
    if (config.tail_runs < 100) {
        throw std::invalid_argument(
            "concentration: need at least 100 runs for the binomial confidence check");
    }
    if (config.slope_runs < 10 || config.slope_pulls.size() < 2) {
        throw std::invalid_argument(
            "concentration: slope fit needs >= 10 runs and >= 2 grid points");
    }
    if (!(config.binomial_confidence > 0.0) || !(config.binomial_confidence < 1.0)) {
        throw std::invalid_argument("concentration: confidence must lie in (0, 1)");
    }
    const RiskParam beta(config.beta);
    const BonusParams params = BonusParams::practical();

    BanditEnv env;
    env.gamma = 1.0;
    env.cost_bound = std::max(std::abs(config.cost_high), 1.0);
    env.arms.push_back(two_point_arm(config.p_optimal, 0.0, config.cost_high));
    env.arms.push_back(two_point_arm(config.p_suboptimal, 0.0, config.cost_high));

    ConcentrationReport report;
    report.mu_star =
        std::min(two_point_erm(config.p_optimal, 0.0, config.cost_high, beta),
                 two_point_erm(config.p_suboptimal, 0.0, config.cost_high, beta));
    report.eta_prime = params.alpha / (params.xi * (1.0 - params.eta));
    report.xi_prime = params.alpha - 1.0;

    // Tail frequencies of {n rho_bar - n mu* >= n^{eta'} z} over M runs.
    const int n = config.tail_pulls;
    const double scale = std::pow(static_cast<double>(n), report.eta_prime - 1.0);
    std::vector<double> deviations(config.tail_runs);
    parallel_for(config.tail_runs, config.threads, [&](int run) {
        const BanditHistory history = run_bandit(
            env, beta, params, n,
            derive_seed(config.base_seed, {fnv1a("tail"),
                                           static_cast<std::uint64_t>(run)}));
        deviations[run] = weighted_erm(history) - report.mu_star;
    });
    report.tails_monotone = true;
    report.tails_bounded = true;
    double prev_freq = 1.0;
    for (double z : config.zs) {
        TailPoint point;
        point.z = z;
        point.runs = config.tail_runs;
        for (double d : deviations) {
            if (d >= scale * z) ++point.exceed_count;
        }
        point.frequency =
            static_cast<double>(point.exceed_count) / config.tail_runs;
        point.upper_confidence = wilson_upper(point.exceed_count, config.tail_runs,
                                              config.binomial_confidence);
        if (point.frequency > prev_freq) report.tails_monotone = false;
        if (!(point.upper_confidence < 1.0)) report.tails_bounded = false;
        prev_freq = point.frequency;
        report.tails.push_back(point);
    }

    // Log-log convergence slope of the mean |stream ERM - mu*|.
    for (int pulls : config.slope_pulls) {
        std::vector<double> errs(config.slope_runs);
        parallel_for(config.slope_runs, config.threads, [&](int run) {
            const BanditHistory history = run_bandit(
                env, beta, params, pulls,
                derive_seed(config.base_seed,
                            {fnv1a("slope"), static_cast<std::uint64_t>(pulls),
                             static_cast<std::uint64_t>(run)}));
            errs[run] = std::abs(stream_erm(history, beta) - report.mu_star);
        });
        double mean = 0.0;
        for (double e : errs) mean += e;
        mean /= config.slope_runs;
        report.errors.emplace_back(pulls, mean);
    }
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const double m = static_cast<double>(report.errors.size());
    for (const auto& [pulls, err] : report.errors) {
        const double x = std::log10(static_cast<double>(pulls));
        const double y = std::log10(err);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    report.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    report.slope_ok = report.slope <= -0.3;
    report.passed = report.tails_monotone && report.tails_bounded && report.slope_ok;
    return report;
}

std::string summary_csv(std::span<const SummaryRow> rows) {
    std::string out = "algorithm,beta,n,erm,ci_lo,ci_hi\n";
    for (const SummaryRow& r : rows) {
        out += r.algorithm + "," + fmt_double(r.beta) + "," +
               std::to_string(r.iterations) + "," + fmt_double(r.erm) + "," +
               fmt_double(r.ci_lo) + "," + fmt_double(r.ci_hi) + "\n";
    }
    return out;
}

std::string per_seed_csv(std::span<const SeedRow> rows) {
    std::string out = "algorithm,beta,seed,discounted_cost\n";
    for (const SeedRow& r : rows) {
        out += r.algorithm + "," + fmt_double(r.beta) + "," +
               std::to_string(r.seed) + "," + fmt_double(r.discounted_cost) + "\n";
    }
    return out;
}

double inverse_normal_cdf(double p) {
    if (!(p > 0.0) || !(p < 1.0)) {
        throw std::invalid_argument("inverse normal CDF needs p in (0, 1)");
    }
    // Acklam's rational approximation (relative error < 1.15e-9).
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - plow) {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

double wilson_upper(int successes, int trials, double confidence) {
    if (trials < 1) throw std::invalid_argument("wilson_upper needs trials >= 1");
    if (successes < 0 || successes > trials) {
        throw std::invalid_argument("wilson_upper successes out of range");
    }
    const double z = inverse_normal_cdf(confidence);
    const double n = trials;
    const double phat = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = phat + z2 / (2.0 * n);
    const double radius =
        z * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n));
    return std::min(1.0, (center + radius) / denom);
}

}  // namespace riskmcts
