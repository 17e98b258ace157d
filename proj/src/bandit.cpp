#include "riskmcts/bandit.hpp"

#include <cmath>

#include "riskmcts/errors.hpp"

namespace riskmcts {

BonusParams BonusParams::practical(double xi, double eta) {
    BonusParams p;
    p.xi = xi;
    p.eta = eta;
    p.theta = std::pow(2.0, xi / 2.0);
    p.alpha = eta * (1.0 - eta) * xi;
    p.check();
    return p;
}

void BonusParams::check() const {
    if (!(theta > 1.0)) throw std::invalid_argument("bonus theta must be > 1");
    if (!(xi > 1.0)) throw std::invalid_argument("bonus xi must be > 1");
    if (!(alpha > 0.0)) throw std::invalid_argument("bonus alpha must be > 0");
    if (!(eta >= 0.5) || !(eta < 1.0)) {
        throw std::invalid_argument("bonus eta must lie in [1/2, 1)");
    }
}

BonusEvaluator::BonusEvaluator(const BonusParams& p) {
    p.check();
    coef_ = std::pow(p.theta, 1.0 / p.xi);
    t_exp_ = p.alpha / p.xi;
    s_exp_ = 1.0 - p.eta;
    fast_ = (t_exp_ == 0.25 && s_exp_ == 0.5);
}

BonusEvaluator::BonusEvaluator(double coefficient, double t_exponent,
                               double s_exponent)
    : coef_(coefficient), t_exp_(t_exponent), s_exp_(s_exponent) {
    if (!std::isfinite(coefficient) || coefficient <= 0.0) {
        throw std::invalid_argument("bonus coefficient must be finite and positive");
    }
    fast_ = (t_exp_ == 0.25 && s_exp_ == 0.5);
}

double bonus(std::uint64_t t, std::uint64_t s, const BonusParams& p) {
    if (t < 1 || s < 1) throw std::invalid_argument("bonus requires t >= 1 and s >= 1");
    return BonusEvaluator(p)(t, s);
}

namespace {

int select_arm_impl(std::span<const ArmState> arms, std::uint64_t t,
                    const BonusEvaluator& be, TieBreak tie_break, Rng* rng) {
    if (arms.empty()) throw std::invalid_argument("select_arm: no arms");
    for (std::size_t i = 0; i < arms.size(); ++i) {
        if (arms[i].pulls == 0) return static_cast<int>(i);
    }
    if (t < 1) throw std::invalid_argument("select_arm: t must be >= 1");

    int best = 0;
    double best_score = arms[0].acc.value() - be(t, arms[0].pulls);
    std::vector<int> ties;
    if (tie_break == TieBreak::random) ties.push_back(0);
    for (std::size_t i = 1; i < arms.size(); ++i) {
        const double score = arms[i].acc.value() - be(t, arms[i].pulls);
        if (score < best_score) {
            best_score = score;
            best = static_cast<int>(i);
            if (tie_break == TieBreak::random) {
                ties.clear();
                ties.push_back(best);
            }
        } else if (tie_break == TieBreak::random && score == best_score) {
            ties.push_back(static_cast<int>(i));
        }
    }
    if (tie_break == TieBreak::random && ties.size() > 1) {
        if (rng == nullptr) {
            throw std::invalid_argument("random tie-break requires an RNG");
        }
        return ties[static_cast<std::size_t>(uniform01(*rng) * ties.size())];
    }
    return best;
}

}  // namespace

int select_arm(std::span<const ArmState> arms, std::uint64_t t,
               const BonusParams& p) {
    return select_arm_impl(arms, t, BonusEvaluator(p), TieBreak::lowest_index, nullptr);
}

int select_arm(std::span<const ArmState> arms, std::uint64_t t,
               const BonusParams& p, TieBreak tie_break, Rng* rng) {
    return select_arm_impl(arms, t, BonusEvaluator(p), tie_break, rng);
}

BanditHistory run_bandit(const BanditEnv& env, RiskParam beta,
                         const BonusParams& p, std::uint64_t n, Rng& rng) {
    const std::size_t K = env.arms.size();
    if (K == 0) throw std::invalid_argument("bandit environment has no arms");
    if (n < K) {
        throw std::invalid_argument(
            "need n >= K pulls so every arm can be initialized once");
    }
    p.check();
    const BonusEvaluator be(p);

    BanditHistory history;
    history.beta = beta.value();
    history.steps.reserve(n);
    history.arms.assign(K, ArmState(beta));

    std::vector<std::uint64_t> pull_index(K, 0);
    for (std::uint64_t step = 1; step <= n; ++step) {
        // t counts all pulls completed so far, including the initialization
        // round.
        const int arm =
            select_arm_impl(history.arms, step - 1, be, TieBreak::lowest_index, nullptr);
        ArmState& state = history.arms[arm];
        const ArmOutcome out = env.arms[arm](++pull_index[arm], rng);
        const double composite =
            out.cost + (out.has_next_state ? env.gamma * out.next_state_cost : 0.0);
        state.acc.update(composite);
        ++state.pulls;
        if (out.has_next_state) ++state.next_state_counts[out.next_state];
        history.steps.push_back(BanditStep{arm, composite, out.cost,
                                           out.has_next_state, out.next_state});
    }
    return history;
}

BanditHistory run_bandit(const BanditEnv& env, RiskParam beta,
                         const BonusParams& p, std::uint64_t n,
                         std::uint64_t seed) {
    Rng rng(seed);
    return run_bandit(env, beta, p, n, rng);
}

double weighted_erm(const BanditHistory& history) {
    if (history.steps.empty()) {
        throw EmptyEstimatorError("bandit history is empty");
    }
    double sum = 0.0;
    std::uint64_t total = 0;
    for (const ArmState& arm : history.arms) {
        if (arm.pulls == 0) continue;
        sum += static_cast<double>(arm.pulls) * arm.acc.value();
        total += arm.pulls;
    }
    return sum / static_cast<double>(total);
}

double stream_erm(const BanditHistory& history, RiskParam beta) {
    if (history.steps.empty()) {
        throw EmptyEstimatorError("bandit history is empty");
    }
    WeightedLse lse(beta);
    std::uint64_t total = 0;
    for (const ArmState& arm : history.arms) {
        if (arm.pulls == 0) continue;
        lse.add(static_cast<double>(arm.pulls), arm.acc.value());
        total += arm.pulls;
    }
    return lse.value() - std::log(static_cast<double>(total)) / beta.value();
}

ArmSampler two_point_arm(double p_high, double low, double high) {
    if (!(p_high >= 0.0) || !(p_high <= 1.0)) {
        throw std::invalid_argument("two_point_arm probability must lie in [0, 1]");
    }
    return [p_high, low, high](std::uint64_t, Rng& rng) {
        ArmOutcome out;
        out.cost = (uniform01(rng) < p_high) ? high : low;
        return out;
    };
}

double two_point_erm(double p_high, double low, double high, RiskParam beta) {
    WeightedLse lse(beta);
    lse.add(1.0 - p_high, low);
    lse.add(p_high, high);
    return lse.value();
}

}  // namespace riskmcts
