#include "riskmcts/dp.hpp"

#include <cmath>

#include "riskmcts/errors.hpp"

namespace riskmcts {

DpSolution erm_backward_induction(const TabularMdp& mdp, RiskParam beta) {
    mdp.check_valid();
    const int S = mdp.num_states();
    const int A = mdp.num_actions();
    const int H = mdp.horizon();

    DpSolution sol;
    sol.value.num_states = S;
    sol.value.values.assign(static_cast<std::size_t>(H + 1) * S, 0.0);
    sol.policy.num_states = S;
    sol.policy.actions.assign(static_cast<std::size_t>(H) * S, 0);

    for (int s = 0; s < S; ++s) sol.value.at(H, s) = mdp.terminal_cost(s);

    for (int h = H - 1; h >= 0; --h) {
        const RiskParam beta_h = depth_adjusted_beta(beta, mdp.gamma(), h);
        for (int s = 0; s < S; ++s) {
            double best = 0.0;
            int best_action = -1;
            for (int a = 0; a < A; ++a) {
                WeightedLse lse(beta_h);
                const std::span<const double> row = mdp.transition_row(a, s);
                const double c = mdp.stage_cost(s, a);
                for (int next = 0; next < S; ++next) {
                    if (row[next] > 0.0) {
                        lse.add(row[next], c + mdp.gamma() * sol.value.at(h + 1, next));
                    }
                }
                const double q = lse.value();
                if (best_action < 0 || q < best) {
                    best = q;
                    best_action = a;
                }
            }
            sol.value.at(h, s) = best;
            sol.policy.at(h, s) = best_action;
        }
    }
    return sol;
}

namespace {

struct TrajectoryEnumerator {
    const TabularMdp& mdp;
    const Policy& policy;
    WeightedLse lse;
    std::uint64_t budget;
    std::vector<double> gamma_pow;

    TrajectoryEnumerator(const TabularMdp& m, const Policy& p, RiskParam beta,
                         std::uint64_t max_terms)
        : mdp(m), policy(p), lse(beta), budget(max_terms) {
        gamma_pow.resize(m.horizon() + 1);
        gamma_pow[0] = 1.0;
        for (int h = 1; h <= m.horizon(); ++h) {
            gamma_pow[h] = gamma_pow[h - 1] * m.gamma();
        }
    }

    void walk(int s, int h, double prob, double cost) {
        if (h == mdp.horizon()) {
            if (lse.terms() >= budget) {
                throw BudgetExceededError(
                    "trajectory enumeration exceeds budget of " +
                    std::to_string(budget) + " terms");
            }
            lse.add(prob, cost + gamma_pow[h] * mdp.terminal_cost(s));
            return;
        }
        const int a = policy.at(h, s);
        const double step_cost = cost + gamma_pow[h] * mdp.stage_cost(s, a);
        const std::span<const double> row = mdp.transition_row(a, s);
        for (int next = 0; next < mdp.num_states(); ++next) {
            if (row[next] > 0.0) {
                walk(next, h + 1, prob * row[next], step_cost);
            }
        }
    }
};

}  // namespace

double brute_force_policy_erm(const TabularMdp& mdp, const Policy& policy,
                              RiskParam beta, EnumerationBudget budget) {
    mdp.check_valid();
    if (policy.num_states != mdp.num_states() ||
        policy.actions.size() !=
            static_cast<std::size_t>(mdp.horizon()) * mdp.num_states()) {
        throw std::invalid_argument("policy shape does not match the MDP");
    }
    for (int entry : policy.actions) {
        if (entry < 0 || entry >= mdp.num_actions()) {
            throw std::invalid_argument("policy contains an out-of-range action");
        }
    }
    TrajectoryEnumerator enumerator(mdp, policy, beta, budget.max_trajectory_terms);
    enumerator.walk(mdp.initial_state(), 0, 1.0, 0.0);
    return enumerator.lse.value();
}

double brute_force_optimal_erm(const TabularMdp& mdp, RiskParam beta,
                               EnumerationBudget budget) {
    mdp.check_valid();
    const int S = mdp.num_states();
    const int A = mdp.num_actions();
    const int H = mdp.horizon();

    const int entries = S * H;
    double policy_count = std::pow(static_cast<double>(A), entries);
    if (policy_count > static_cast<double>(budget.max_policies)) {
        throw BudgetExceededError("policy enumeration needs " +
                                  std::to_string(policy_count) +
                                  " policies, budget is " +
                                  std::to_string(budget.max_policies));
    }

    Policy policy;
    policy.num_states = S;
    policy.actions.assign(entries, 0);

    double best = 0.0;
    bool have_best = false;
    while (true) {
        const double v = brute_force_policy_erm(mdp, policy, beta, budget);
        if (!have_best || v < best) {
            best = v;
            have_best = true;
        }
        // advance the base-A counter over policy entries
        int pos = 0;
        while (pos < entries) {
            if (++policy.actions[pos] < A) break;
            policy.actions[pos] = 0;
            ++pos;
        }
        if (pos == entries) break;
    }
    return best;
}

}  // namespace riskmcts
