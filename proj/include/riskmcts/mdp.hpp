#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "riskmcts/rng.hpp"

namespace riskmcts {

/// One generative-model sample: the realised next state and the stage cost
/// paid for taking the action.
struct Transition {
    int next_state = 0;
    double cost = 0.0;
};

/// Finite-horizon discounted tabular MDP with bounded costs.
///
/// Stage costs are stationary c(s, a), applied at every non-terminal depth;
/// a terminal cost c_H(s) is paid at the horizon. All costs must lie in
/// [-cost_bound, cost_bound] and every transition row must be a probability
/// distribution. Immutable in normal use; the setters exist for builders,
/// the file loader, and receding-horizon planners that re-root the problem.
class TabularMdp {
public:
    TabularMdp(int num_states, int num_actions, double gamma, int horizon,
               int initial_state, double cost_bound);

    int num_states() const noexcept { return num_states_; }
    int num_actions() const noexcept { return num_actions_; }
    double gamma() const noexcept { return gamma_; }
    int horizon() const noexcept { return horizon_; }
    int initial_state() const noexcept { return initial_state_; }
    double cost_bound() const noexcept { return cost_bound_; }

    double transition(int a, int s, int next) const;
    std::span<const double> transition_row(int a, int s) const;
    double stage_cost(int s, int a) const;
    double terminal_cost(int s) const;

    void set_transition(int a, int s, int next, double p);
    void set_stage_cost(int s, int a, double c);
    void set_terminal_cost(int s, double c);
    void set_horizon(int horizon);
    void set_initial_state(int s);
    void set_gamma(double gamma);

    /// Largest absolute discounted cumulative cost over the horizon:
    /// cost_bound * sum_{h=0..H} gamma^h.
    double max_abs_discounted_cost() const;

    /// Reports every violated invariant with its location; empty means valid.
    std::vector<std::string> validate() const;

    /// Throws std::invalid_argument with all validation messages joined.
    void check_valid() const;

    bool operator==(const TabularMdp&) const = default;

private:
    std::size_t t_index(int a, int s) const;

    int num_states_;
    int num_actions_;
    double gamma_;
    int horizon_;
    int initial_state_;
    double cost_bound_;
    std::vector<double> transition_;     // [a][s][s'], row-major
    std::vector<double> stage_cost_;     // [s][a]
    std::vector<double> terminal_cost_;  // [s]
};

/// Draws a next state from P^a(s, .) and returns it with the stage cost.
Transition sample_transition(const TabularMdp& mdp, int s, int a, Rng& rng);

/// The four-state benchmark MDP. At s0, action a1 moves to s1
/// deterministically while action a0 moves to s2 with probability 1-epsilon
/// and to the high-cost state s3 with probability epsilon. s1, s2 and s3
/// self-loop but return to s0 with probability reset_prob at every step,
/// regardless of the chosen action; s0's own transitions are fully governed
/// by the action. State-dependent costs c(s0)=0, c(s1)=5, c(s2)=1, c(s3)=20
/// apply to every action, and terminally. gamma=0.9, H=100, cost bound 20.
TabularMdp make_mdp4(double epsilon = 0.1, double reset_prob = 0.1);

/// Random valid instance: row-stochastic transitions from normalised
/// positive draws, costs uniform in [-cost_bound, cost_bound].
TabularMdp random_mdp(int num_states, int num_actions, int horizon,
                      double gamma, double cost_bound, std::uint64_t seed);

/// Parses the line-oriented MDP text format without enforcing the model
/// invariants (structural errors still throw ParseError).
TabularMdp parse_mdp(std::istream& in);
TabularMdp parse_mdp_file(const std::string& path);

/// parse + check_valid. Throws ParseError or std::invalid_argument.
TabularMdp load_mdp(const std::string& path);

void save_mdp(const TabularMdp& mdp, std::ostream& out);
void save_mdp(const TabularMdp& mdp, const std::string& path);

}  // namespace riskmcts
