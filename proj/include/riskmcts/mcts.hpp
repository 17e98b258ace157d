#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "riskmcts/bandit.hpp"
#include "riskmcts/erm.hpp"
#include "riskmcts/mdp.hpp"

namespace riskmcts {

enum class ScheduleMode { practical, theoretical };

/// Per-depth bonus parameters (eta, xi_h, alpha_h, theta_h for h in 1..H)
/// for the tree policy. A decision node at depth d selects actions with the
/// depth-(d+1) parameters.
///
/// The theoretical schedule runs the backward recursion
///
///   alpha_H = eta (1-eta) xi_H,
///   xi_h    = alpha_{h+1} - 1,
///   alpha_h = eta (1-eta) xi_h,
///
/// and requires xi_h > 1 and alpha_h > 2 at every depth; the required
/// terminal xi grows roughly like 4^H, so this mode is only usable for small
/// horizons. The practical schedule instead fixes theta_h = 2^{xi_h/2} and
/// alpha_h = eta(1-eta) xi_h at every depth, which collapses the bonus to
/// sqrt(2) t^{eta(1-eta)} / s^{1-eta} uniformly.
class ParameterSchedule {
public:
    /// cost_scale >= 1 multiplies the bonus coefficient (theta_h becomes
    /// 2^{xi/2} cost_scale^{xi}), matching the exploration term to the
    /// magnitude of the sampled costs. At cost_scale = 1 the bonus is exactly
    /// sqrt(2) t^{eta(1-eta)} / s^{1-eta}, the right scale for unit-bounded
    /// costs; on raw cost scales an unscaled bonus can freeze an arm out for
    /// millions of iterations after one unlucky draw.
    static ParameterSchedule practical(int horizon, double eta = 0.5,
                                       double xi = 2.0, double cost_scale = 1.0);
    /// Throws InfeasibleScheduleError naming the first violated depth and
    /// the minimal feasible terminal xi.
    static ParameterSchedule theoretical(int horizon, double eta,
                                         double xi_terminal);

    ScheduleMode mode() const noexcept { return mode_; }
    int horizon() const noexcept { return static_cast<int>(xi_.size()); }
    double eta() const noexcept { return eta_; }
    double xi(int h) const { return xi_.at(h - 1); }
    double alpha(int h) const { return alpha_.at(h - 1); }
    /// 2^{xi_h/2}; may overflow to inf for the very large terminal xi the
    /// theoretical recursion needs at H >= 5. The bonus evaluators use the
    /// closed-form coefficient sqrt(2) and stay finite regardless.
    double theta(int h) const { return theta_.at(h - 1); }
    const BonusEvaluator& bonus(int h) const { return bonus_.at(h - 1); }

    /// The depth-h parameters as bandit bonus parameters.
    BonusParams bonus_params(int h) const;

private:
    ParameterSchedule() = default;
    ScheduleMode mode_ = ScheduleMode::practical;
    double eta_ = 0.5;
    std::vector<double> xi_, alpha_, theta_;
    std::vector<BonusEvaluator> bonus_;
};

struct ActionStats {
    std::uint64_t visits = 0;
    double value = 0.0;
};

struct SearchResult {
    int recommended_action = 0;
    double root_value = 0.0;
    std::uint64_t iterations = 0;
    std::vector<ActionStats> actions;
    std::vector<int> root_action_trace;  // root action chosen at each iteration
};

/// Search-tree decision node. Per-action visit counts and an ERM accumulator
/// at the depth-adjusted risk parameter beta gamma^depth, fed with the
/// sampled discounted cumulative costs from this node onward. Children are
/// keyed by (action, realised next state); chance nodes are implicit.
struct DecisionNode {
    static constexpr std::uint32_t kNoChild = 0xffffffffu;

    struct Arm {
        explicit Arm(RiskParam beta) : acc(beta) {}
        std::uint64_t visits = 0;
        ErmAccumulator acc;
        std::vector<std::uint32_t> children;  // next state -> node index
    };

    DecisionNode(int state, int depth, RiskParam beta, int num_actions)
        : state(state), depth(depth), arms(num_actions, Arm(beta)) {}

    int state;
    int depth;
    std::uint64_t visits = 0;
    std::vector<Arm> arms;
};

/// Incremental risk-aware search tree. Every simulation descends from the
/// root to the horizon, selecting actions by lower confidence bound and
/// sampling transitions from the model, then backs the discounted cumulative
/// cost samples up into the per-action accumulators.
class MctsTree {
public:
    MctsTree(TabularMdp mdp, RiskParam beta, ParameterSchedule schedule);

    /// One simulation; returns the sampled discounted cumulative cost at the
    /// root.
    double simulate_once(Rng& rng);

    /// LCB action selection at a node; unvisited actions first (lowest
    /// index), then argmin of estimate - bonus with the depth-(d+1)
    /// parameters.
    int select_action(const DecisionNode& node) const;

    const DecisionNode& root() const { return nodes_.front(); }
    const DecisionNode* child(const DecisionNode& node, int action,
                              int next_state) const;
    const TabularMdp& mdp() const noexcept { return mdp_; }
    std::uint64_t iterations() const noexcept { return iterations_; }
    const std::vector<int>& root_action_trace() const noexcept { return trace_; }

    /// Current stats: pooled-stream root value, per-action summaries and the
    /// recommended action (lowest per-action ERM, ties to the most visited,
    /// then the lowest index).
    SearchResult result() const;

private:
    struct Frame {
        std::uint32_t node;
        int action;
        double stage_cost;
    };

    std::uint32_t ensure_child(std::uint32_t node, int action, int next_state);

    TabularMdp mdp_;
    double beta_;
    ParameterSchedule schedule_;
    std::vector<double> depth_beta_;  // beta * gamma^h
    std::deque<DecisionNode> nodes_;
    std::vector<Frame> path_;
    std::vector<int> trace_;
    std::uint64_t iterations_ = 0;
};

/// Runs `iterations` simulations of the risk-aware search from the MDP's
/// initial state. Requires iterations >= num_actions.
SearchResult search(const TabularMdp& mdp, RiskParam beta,
                    const ParameterSchedule& schedule, std::uint64_t iterations,
                    Rng& rng);
SearchResult search(const TabularMdp& mdp, RiskParam beta,
                    const ParameterSchedule& schedule, std::uint64_t iterations,
                    std::uint64_t seed);

/// Baseline: standard UCT on exponential utilities. Each node tracks the
/// sample mean of u = exp(beta x) for the total discounted cost x of the
/// full rollout through it, min-max normalised by the analytic utility range
/// [exp(-beta R0), exp(beta R0)]; selection minimises the normalised mean
/// minus exploration * sqrt(ln N(s) / N(s,a)). The root value reports
/// (1/beta) ln(mean utility) on the original cost scale.
SearchResult acc_mcts_search(const TabularMdp& mdp, RiskParam beta,
                             std::uint64_t iterations, double exploration,
                             Rng& rng);
SearchResult acc_mcts_search(const TabularMdp& mdp, RiskParam beta,
                             std::uint64_t iterations, double exploration,
                             std::uint64_t seed);

/// Practical schedule matched to a model: horizon from the MDP, bonus scaled
/// by its per-step cost bound.
ParameterSchedule practical_schedule(const TabularMdp& mdp);

}  // namespace riskmcts
