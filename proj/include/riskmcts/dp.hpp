#pragma once

#include <cstdint>
#include <vector>

#include "riskmcts/erm.hpp"
#include "riskmcts/mdp.hpp"

namespace riskmcts {

/// Value table V_h(s) for h in {0..H}, s in states. V_H equals the terminal
/// cost exactly.
struct ValueFunction {
    int num_states = 0;
    std::vector<double> values;  // (H+1) x S, row-major in h

    double at(int h, int s) const {
        return values[static_cast<std::size_t>(h) * num_states + s];
    }
    double& at(int h, int s) {
        return values[static_cast<std::size_t>(h) * num_states + s];
    }
};

/// Deterministic Markovian policy: action table pi_h(s) for h in {0..H-1}.
struct Policy {
    int num_states = 0;
    std::vector<int> actions;  // H x S

    int at(int h, int s) const {
        return actions[static_cast<std::size_t>(h) * num_states + s];
    }
    int& at(int h, int s) {
        return actions[static_cast<std::size_t>(h) * num_states + s];
    }
};

struct DpSolution {
    ValueFunction value;
    Policy policy;
};

/// Exact ERM backward induction over
///
///   V_H(s) = c_H(s)
///   V_h(s) = min_a ERM_{beta gamma^h}( c(s,a) + gamma V_{h+1}(S') ),
///            S' ~ P^a(s, .)
///
/// with the per-state ERM computed in log space (max-shifted). Argmin ties
/// break to the lowest action index. O(H S^2 A).
DpSolution erm_backward_induction(const TabularMdp& mdp, RiskParam beta);

struct EnumerationBudget {
    std::uint64_t max_trajectory_terms = 1'000'000;
    std::uint64_t max_policies = 100'000;
};

/// Exact ERM of the discounted cumulative cost under a fixed policy,
/// by enumerating every reachable trajectory with its probability. Throws
/// BudgetExceededError rather than truncating.
double brute_force_policy_erm(const TabularMdp& mdp, const Policy& policy,
                              RiskParam beta, EnumerationBudget budget = {});

/// Minimum of brute_force_policy_erm over all Markovian deterministic
/// policies. Independent ground truth for erm_backward_induction on small
/// instances; throws BudgetExceededError when A^(S H) exceeds the budget.
double brute_force_optimal_erm(const TabularMdp& mdp, RiskParam beta,
                               EnumerationBudget budget = {});

}  // namespace riskmcts
