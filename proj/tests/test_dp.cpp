#include <doctest.h>

#include <cmath>
#include <vector>

#include "riskmcts/dp.hpp"
#include "riskmcts/errors.hpp"

using namespace riskmcts;

namespace {

// Risk-neutral (expectation) backward induction, written independently of the
// ERM code path; the beta -> 0 limit of the solver must match it.
std::vector<double> expectation_backward_induction(const TabularMdp& mdp) {
    const int S = mdp.num_states();
    std::vector<double> v(S), next(S);
    for (int s = 0; s < S; ++s) next[s] = mdp.terminal_cost(s);
    for (int h = mdp.horizon() - 1; h >= 0; --h) {
        for (int s = 0; s < S; ++s) {
            double best = 0.0;
            bool have = false;
            for (int a = 0; a < mdp.num_actions(); ++a) {
                double q = mdp.stage_cost(s, a);
                for (int sp = 0; sp < S; ++sp) {
                    q += mdp.gamma() * mdp.transition(a, s, sp) * next[sp];
                }
                if (!have || q < best) {
                    best = q;
                    have = true;
                }
            }
            v[s] = best;
        }
        next = v;
    }
    return next;
}

// Expected discounted cost of a fixed policy (standard policy evaluation).
double expectation_policy_value(const TabularMdp& mdp, const Policy& policy) {
    const int S = mdp.num_states();
    std::vector<double> next(S), v(S);
    for (int s = 0; s < S; ++s) next[s] = mdp.terminal_cost(s);
    for (int h = mdp.horizon() - 1; h >= 0; --h) {
        for (int s = 0; s < S; ++s) {
            const int a = policy.at(h, s);
            double q = mdp.stage_cost(s, a);
            for (int sp = 0; sp < S; ++sp) {
                q += mdp.gamma() * mdp.transition(a, s, sp) * next[sp];
            }
            v[s] = q;
        }
        next = v;
    }
    return next[mdp.initial_state()];
}

TabularMdp two_state_chain() {
    // deterministic: s0 -> s1, stage cost 1, terminal cost 2 at s1
    TabularMdp mdp(2, 1, 0.9, 1, 0, 5.0);
    mdp.set_transition(0, 0, 1, 1.0);
    mdp.set_transition(0, 1, 1, 1.0);
    mdp.set_stage_cost(0, 0, 1.0);
    mdp.set_terminal_cost(1, 2.0);
    return mdp;
}

TabularMdp coin_flip_mdp() {
    // H=1, single action, zero stage cost, gamma=1; terminal cost 0 or 1
    // with probability 1/2 each
    TabularMdp mdp(3, 1, 1.0, 1, 0, 2.0);
    mdp.set_transition(0, 0, 1, 0.5);
    mdp.set_transition(0, 0, 2, 0.5);
    mdp.set_transition(0, 1, 1, 1.0);
    mdp.set_transition(0, 2, 2, 1.0);
    mdp.set_terminal_cost(1, 0.0);
    mdp.set_terminal_cost(2, 1.0);
    return mdp;
}

}  // namespace

TEST_CASE("backward induction on a deterministic chain") {
    for (double beta : {0.1, 1.0, 7.0}) {
        const DpSolution sol = erm_backward_induction(two_state_chain(), RiskParam(beta));
        CHECK(sol.value.at(0, 0) == doctest::Approx(2.8).epsilon(1e-12));
        CHECK(sol.value.at(1, 1) == 2.0);  // V_H equals the terminal cost exactly
    }
}

TEST_CASE("backward induction on a two-outcome lottery") {
    const DpSolution sol = erm_backward_induction(coin_flip_mdp(), RiskParam(1.0));
    CHECK(sol.value.at(0, 0) == doctest::Approx(0.6201145069582775).epsilon(1e-12));
}

TEST_CASE("brute-force policy evaluation") {
    const TabularMdp chain = two_state_chain();
    Policy policy;
    policy.num_states = 2;
    policy.actions.assign(2, 0);
    CHECK(brute_force_policy_erm(chain, policy, RiskParam(0.4)) ==
          doctest::Approx(2.8).epsilon(1e-12));

    const TabularMdp coin = coin_flip_mdp();
    Policy coin_policy;
    coin_policy.num_states = 3;
    coin_policy.actions.assign(3, 0);
    CHECK(brute_force_policy_erm(coin, coin_policy, RiskParam(1.0)) ==
          doctest::Approx(0.6201145069582775).epsilon(1e-12));
}

TEST_CASE("risk-neutral limit matches expectation oracles") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const TabularMdp mdp = random_mdp(3, 2, 3, 0.9, 5.0, seed);
        const DpSolution sol = erm_backward_induction(mdp, RiskParam(1e-9));
        const auto expected = expectation_backward_induction(mdp);
        CHECK(std::abs(sol.value.at(0, mdp.initial_state()) -
                       expected[mdp.initial_state()]) < 1e-6);

        // policy evaluation route
        CHECK(std::abs(brute_force_policy_erm(mdp, sol.policy, RiskParam(1e-9)) -
                       expectation_policy_value(mdp, sol.policy)) < 1e-6);
    }
}

TEST_CASE("oracle equivalence on small random instances") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const TabularMdp mdp = random_mdp(3, 2, 2, 0.9, 4.0, seed + 100);
        const double beta = 0.3 + 0.2 * static_cast<double>(seed);
        const DpSolution sol = erm_backward_induction(mdp, RiskParam(beta));
        const double brute = brute_force_optimal_erm(mdp, RiskParam(beta));
        CHECK(std::abs(sol.value.at(0, mdp.initial_state()) - brute) < 1e-9);
    }

    // the benchmark model truncated to a small horizon
    TabularMdp mdp4 = make_mdp4(0.1, 0.1);
    mdp4.set_horizon(3);
    const DpSolution sol = erm_backward_induction(mdp4, RiskParam(0.5));
    const double brute = brute_force_optimal_erm(mdp4, RiskParam(0.5));
    CHECK(std::abs(sol.value.at(0, 0) - brute) < 1e-9);
}

TEST_CASE("value table respects the discounted bound") {
    const TabularMdp mdp = random_mdp(4, 2, 6, 0.9, 3.0, 17);
    const DpSolution sol = erm_backward_induction(mdp, RiskParam(0.8));
    for (int h = 0; h <= mdp.horizon(); ++h) {
        const double bound = mdp.cost_bound() *
                             (1.0 - std::pow(mdp.gamma(), mdp.horizon() - h + 1)) /
                             (1.0 - mdp.gamma());
        for (int s = 0; s < mdp.num_states(); ++s) {
            CHECK(std::abs(sol.value.at(h, s)) <= bound + 1e-9);
        }
    }
}

TEST_CASE("single-action value is non-decreasing in beta") {
    const TabularMdp mdp = random_mdp(3, 1, 4, 0.95, 2.0, 5);
    double prev = -1e100;
    for (double beta : {0.01, 0.1, 0.5, 1.0, 2.0, 5.0}) {
        const DpSolution sol = erm_backward_induction(mdp, RiskParam(beta));
        const double v = sol.value.at(0, mdp.initial_state());
        CHECK(v >= prev - 1e-10);
        prev = v;
    }
}

TEST_CASE("enumeration budgets are enforced") {
    const TabularMdp mdp = random_mdp(3, 2, 3, 0.9, 2.0, 1);
    EnumerationBudget tiny;
    tiny.max_trajectory_terms = 4;
    Policy policy;
    policy.num_states = 3;
    policy.actions.assign(9, 0);
    CHECK_THROWS_AS(brute_force_policy_erm(mdp, policy, RiskParam(1.0), tiny),
                    BudgetExceededError);

    EnumerationBudget few_policies;
    few_policies.max_policies = 10;
    CHECK_THROWS_AS(brute_force_optimal_erm(mdp, RiskParam(1.0), few_policies),
                    BudgetExceededError);

    Policy bad;
    bad.num_states = 3;
    bad.actions.assign(9, 5);
    CHECK_THROWS_AS(brute_force_policy_erm(mdp, bad, RiskParam(1.0)),
                    std::invalid_argument);
}
