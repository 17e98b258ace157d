#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "riskmcts/erm.hpp"
#include "riskmcts/rng.hpp"

namespace riskmcts {

/// Parameters of the polynomial exploration bonus
///
///   b(t, s) = theta^{1/xi} * t^{alpha/xi} / s^{1-eta}.
struct BonusParams {
    double theta = 2.0;
    double xi = 2.0;
    double alpha = 0.5;
    double eta = 0.5;

    /// The experimental choice: theta = 2^{xi/2} and alpha = eta(1-eta) xi,
    /// which makes the bonus sqrt(2) * t^{eta(1-eta)} / s^{1-eta}
    /// independently of xi. At eta = 1/2 this is sqrt(2) t^{1/4} / sqrt(s).
    static BonusParams practical(double xi = 2.0, double eta = 0.5);

    void check() const;  // throws std::invalid_argument
};

/// Precomputed bonus evaluator. The practical exponents (alpha/xi = 1/4,
/// 1-eta = 1/2) take a sqrt-only fast path; both the bandit and the tree
/// policy evaluate bonuses through this class, so their arithmetic is
/// bit-identical.
class BonusEvaluator {
public:
    explicit BonusEvaluator(const BonusParams& p);

    /// Direct construction from the coefficient theta^{1/xi} and the two
    /// exponents; used where the coefficient is known in closed form (e.g.
    /// theta = 2^{xi/2} gives sqrt(2) for any xi, while the theta value
    /// itself overflows for large xi).
    BonusEvaluator(double coefficient, double t_exponent, double s_exponent);

    double operator()(std::uint64_t t, std::uint64_t s) const {
        const double td = static_cast<double>(t);
        const double sd = static_cast<double>(s);
        if (fast_) return coef_ * std::sqrt(std::sqrt(td)) / std::sqrt(sd);
        return coef_ * std::pow(td, t_exp_) / std::pow(sd, s_exp_);
    }

private:
    double coef_;
    double t_exp_;
    double s_exp_;
    bool fast_;
};

double bonus(std::uint64_t t, std::uint64_t s, const BonusParams& p);

/// Outcome of one arm pull. Plain arms emit only `cost`; non-deterministic
/// arms additionally report the sampled next state and the random cost
/// attached to it.
struct ArmOutcome {
    double cost = 0.0;
    bool has_next_state = false;
    int next_state = 0;
    double next_state_cost = 0.0;
};

/// Cost generator for one arm; receives the 1-based pull index, so
/// non-stationary arms can shift over time.
using ArmSampler = std::function<ArmOutcome(std::uint64_t pull_index, Rng&)>;

/// K-armed bandit environment. Emitted composite costs
/// (cost + gamma * next_state_cost) are required to stay within
/// [-cost_bound, cost_bound]; this is a contract on the generators, not
/// something the library verifies.
struct BanditEnv {
    std::vector<ArmSampler> arms;
    double gamma = 1.0;
    double cost_bound = 1.0;
};

/// Per-arm statistics: pull count, the ERM accumulator fed with the
/// composite cost of every pull, and (in the non-deterministic regime)
/// per-next-state counts kept as diagnostics.
struct ArmState {
    explicit ArmState(RiskParam beta) : acc(beta) {}
    std::uint64_t pulls = 0;
    ErmAccumulator acc;
    std::map<int, std::uint64_t> next_state_counts;
};

enum class TieBreak { lowest_index, random };

/// Lower-confidence-bound arm selection: any unpulled arm is selected first
/// (lowest index); otherwise the argmin of estimate - bonus(t, pulls). t is
/// the number of pulls completed so far, counting the initialization round.
int select_arm(std::span<const ArmState> arms, std::uint64_t t,
               const BonusParams& p);
int select_arm(std::span<const ArmState> arms, std::uint64_t t,
               const BonusParams& p, TieBreak tie_break, Rng* rng);

struct BanditStep {
    int arm = 0;
    double composite_cost = 0.0;
    double immediate_cost = 0.0;
    bool has_next_state = false;
    int next_state = 0;
};

struct BanditHistory {
    double beta = 0.0;
    std::vector<BanditStep> steps;
    std::vector<ArmState> arms;
};

/// Runs n pulls of the LCB algorithm. The composite cost of each pull is
/// pushed into the chosen arm's accumulator at the given beta. Requires
/// n >= K so the initialization round can complete.
BanditHistory run_bandit(const BanditEnv& env, RiskParam beta,
                         const BonusParams& p, std::uint64_t n, Rng& rng);
BanditHistory run_bandit(const BanditEnv& env, RiskParam beta,
                         const BonusParams& p, std::uint64_t n,
                         std::uint64_t seed);

/// Visit-weighted average of the per-arm ERM estimates:
/// (1/n) sum_i T_i rho_i.
double weighted_erm(const BanditHistory& history);

/// ERM of the pooled cost stream across arms:
/// (1/beta) ln( (1/n) sum_i T_i exp(beta rho_i) ). Never below weighted_erm.
double stream_erm(const BanditHistory& history, RiskParam beta);

/// Stationary two-point cost arm: emits `high` with probability p_high,
/// otherwise `low`. One uniform draw per pull.
ArmSampler two_point_arm(double p_high, double low, double high);

/// Closed-form ERM of the two-point cost distribution above.
double two_point_erm(double p_high, double low, double high, RiskParam beta);

}  // namespace riskmcts
