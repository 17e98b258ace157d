#include <doctest.h>

#include <cmath>
#include <deque>
#include <vector>

#include "riskmcts/dp.hpp"
#include "riskmcts/errors.hpp"
#include "riskmcts/mcts.hpp"

using namespace riskmcts;

namespace {

TabularMdp single_action_chain() {
    // deterministic: s0 -> s1 -> s1, stage costs 1 then 0.5, terminal 2
    TabularMdp mdp(2, 1, 0.9, 2, 0, 5.0);
    mdp.set_transition(0, 0, 1, 1.0);
    mdp.set_transition(0, 1, 1, 1.0);
    mdp.set_stage_cost(0, 0, 1.0);
    mdp.set_stage_cost(1, 0, 0.5);
    mdp.set_terminal_cost(1, 2.0);
    return mdp;
}

TabularMdp two_arm_mdp() {
    // H=1, two actions from s0 with stochastic next states; reduces to a
    // two-armed non-deterministic bandit
    TabularMdp mdp(3, 2, 0.9, 1, 0, 4.0);
    mdp.set_transition(0, 0, 1, 0.7);
    mdp.set_transition(0, 0, 2, 0.3);
    mdp.set_transition(1, 0, 1, 0.2);
    mdp.set_transition(1, 0, 2, 0.8);
    for (int a = 0; a < 2; ++a) {
        mdp.set_transition(a, 1, 1, 1.0);
        mdp.set_transition(a, 2, 2, 1.0);
    }
    mdp.set_stage_cost(0, 0, 0.3);
    mdp.set_stage_cost(0, 1, 0.1);
    mdp.set_terminal_cost(1, 1.0);
    mdp.set_terminal_cost(2, 3.0);
    return mdp;
}

// Walks the materialised tree checking the count invariants at every node.
void check_counts(const MctsTree& tree, const DecisionNode& node) {
    std::uint64_t action_total = 0;
    for (std::size_t a = 0; a < node.arms.size(); ++a) {
        const DecisionNode::Arm& arm = node.arms[a];
        action_total += arm.visits;
        CHECK(arm.acc.count() == arm.visits);
        std::uint64_t child_total = 0;
        for (int next = 0; next < tree.mdp().num_states(); ++next) {
            const DecisionNode* child =
                tree.child(node, static_cast<int>(a), next);
            if (child == nullptr) continue;
            CHECK(child->depth == node.depth + 1);
            child_total += child->visits;
        }
        if (node.depth + 1 < tree.mdp().horizon()) {
            CHECK(child_total == arm.visits);
        }
    }
    CHECK(node.visits == action_total);
    for (std::size_t a = 0; a < node.arms.size(); ++a) {
        for (int next = 0; next < tree.mdp().num_states(); ++next) {
            const DecisionNode* child =
                tree.child(node, static_cast<int>(a), next);
            if (child != nullptr) check_counts(tree, *child);
        }
    }
}

// Minimal risk-neutral UCT over min-max normalised costs; the beta -> 0
// limit of the utility-based baseline must behave like this.
struct PlainUct {
    struct Arm {
        std::uint64_t visits = 0;
        double sum = 0.0;
        std::vector<std::uint32_t> children;
    };
    struct Node {
        explicit Node(int state, int actions) : state(state), arms(actions) {}
        int state;
        std::uint64_t visits = 0;
        std::vector<Arm> arms;
    };
    static constexpr std::uint32_t kNone = 0xffffffffu;

    const TabularMdp& mdp;
    double exploration;
    double bound;
    std::vector<double> gamma_pow;
    std::deque<Node> nodes;

    PlainUct(const TabularMdp& m, double c) : mdp(m), exploration(c) {
        bound = m.max_abs_discounted_cost();
        gamma_pow.resize(m.horizon() + 1);
        gamma_pow[0] = 1.0;
        for (int h = 1; h <= m.horizon(); ++h) {
            gamma_pow[h] = gamma_pow[h - 1] * m.gamma();
        }
        nodes.emplace_back(m.initial_state(), m.num_actions());
    }

    int select(const Node& node) const {
        for (std::size_t a = 0; a < node.arms.size(); ++a) {
            if (node.arms[a].visits == 0) return static_cast<int>(a);
        }
        const double log_n = std::log(static_cast<double>(node.visits));
        int best = 0;
        double best_score = 1e300;
        for (std::size_t a = 0; a < node.arms.size(); ++a) {
            const Arm& arm = node.arms[a];
            const double mean = arm.sum / static_cast<double>(arm.visits);
            const double score =
                mean - exploration * std::sqrt(log_n / static_cast<double>(arm.visits));
            if (score < best_score) {
                best_score = score;
                best = static_cast<int>(a);
            }
        }
        return best;
    }

    void simulate(Rng& rng) {
        std::vector<std::pair<std::uint32_t, int>> path;
        std::uint32_t idx = 0;
        int state = nodes.front().state;
        double total = 0.0;
        for (int h = 0; h < mdp.horizon(); ++h) {
            const int a = select(nodes[idx]);
            const Transition tr = sample_transition(mdp, state, a, rng);
            path.emplace_back(idx, a);
            total += gamma_pow[h] * tr.cost;
            state = tr.next_state;
            if (h + 1 < mdp.horizon()) {
                Arm& arm = nodes[idx].arms[a];
                if (arm.children.empty()) arm.children.assign(mdp.num_states(), kNone);
                std::uint32_t child = arm.children[state];
                if (child == kNone) {
                    child = static_cast<std::uint32_t>(nodes.size());
                    nodes.emplace_back(state, mdp.num_actions());
                    nodes[idx].arms[a].children[state] = child;
                }
                idx = child;
            }
        }
        total += gamma_pow[mdp.horizon()] * mdp.terminal_cost(state);
        const double normalized = (total + bound) / (2.0 * bound);
        for (const auto& [n, a] : path) {
            ++nodes[n].visits;
            ++nodes[n].arms[a].visits;
            nodes[n].arms[a].sum += normalized;
        }
    }
};

}  // namespace

TEST_CASE("theoretical schedule recursion") {
    const ParameterSchedule s1 = ParameterSchedule::theoretical(1, 0.5, 16.0);
    CHECK(s1.alpha(1) == doctest::Approx(4.0).epsilon(1e-15));

    const ParameterSchedule s2 = ParameterSchedule::theoretical(2, 0.5, 64.0);
    CHECK(s2.alpha(2) == doctest::Approx(16.0).epsilon(1e-15));
    CHECK(s2.xi(1) == doctest::Approx(15.0).epsilon(1e-15));
    CHECK(s2.alpha(1) == doctest::Approx(3.75).epsilon(1e-15));

    const ParameterSchedule s3 = ParameterSchedule::theoretical(3, 0.5, 160.0);
    CHECK(s3.alpha(3) == doctest::Approx(40.0).epsilon(1e-15));
    CHECK(s3.xi(2) == doctest::Approx(39.0).epsilon(1e-15));
    CHECK(s3.alpha(2) == doctest::Approx(9.75).epsilon(1e-15));
    CHECK(s3.xi(1) == doctest::Approx(8.75).epsilon(1e-15));
    CHECK(std::abs(s3.alpha(1) - 2.1875) < 1e-12);

    try {
        ParameterSchedule::theoretical(3, 0.5, 148.0);
        FAIL("expected InfeasibleScheduleError");
    } catch (const InfeasibleScheduleError& e) {
        CHECK(e.first_violated_depth == 1);
        CHECK(e.min_feasible_xi_terminal == doctest::Approx(148.0).epsilon(1e-12));
    }
}

TEST_CASE("feasible schedules satisfy the depth constraints") {
    for (double xi_terminal : {200.0, 500.0, 1000.0}) {
        for (double eta : {0.5, 0.6}) {
            bool feasible = true;
            try {
                ParameterSchedule::theoretical(3, eta, xi_terminal);
            } catch (const InfeasibleScheduleError&) {
                feasible = false;
            }
            if (!feasible) continue;
            const ParameterSchedule sched =
                ParameterSchedule::theoretical(3, eta, xi_terminal);
            for (int h = 1; h <= 3; ++h) {
                CHECK(sched.xi(h) > 1.0);
                CHECK(sched.alpha(h) > 2.0);
                CHECK(sched.alpha(h) ==
                      doctest::Approx(eta * (1.0 - eta) * sched.xi(h)));
            }
            for (int h = 1; h < 3; ++h) {
                CHECK(sched.xi(h) == doctest::Approx(sched.alpha(h + 1) - 1.0));
            }
        }
    }
}

TEST_CASE("practical schedule bonus is sqrt(2) t^{1/4} / sqrt(s)") {
    const ParameterSchedule sched = ParameterSchedule::practical(5);
    for (int h = 1; h <= 5; ++h) {
        CHECK(sched.bonus(h)(16, 4) ==
              doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
        CHECK(sched.theta(h) == 2.0);
    }
    CHECK(sched.bonus_params(1).alpha == 0.5);
}

TEST_CASE("select_action rules") {
    TabularMdp mdp = two_arm_mdp();
    MctsTree tree(mdp, RiskParam(1.0), ParameterSchedule::practical(1));
    Rng rng(17);
    // unvisited actions first, in index order
    CHECK(tree.select_action(tree.root()) == 0);
    tree.simulate_once(rng);
    CHECK(tree.select_action(tree.root()) == 1);
    tree.simulate_once(rng);
    // once initialized, scores are estimate minus bonus
    const int chosen = tree.select_action(tree.root());
    const double b = std::sqrt(2.0) * std::pow(2.0, 0.25);  // N(s)=2, N(s,a)=1
    const double s0 = tree.root().arms[0].acc.value() - b;
    const double s1 = tree.root().arms[1].acc.value() - b;
    CHECK(chosen == (s1 < s0 ? 1 : 0));
}

TEST_CASE("simulate_once on a deterministic chain") {
    const TabularMdp mdp = single_action_chain();
    MctsTree tree(mdp, RiskParam(0.5), ParameterSchedule::practical(2));
    Rng rng(1);
    const double sample = tree.simulate_once(rng);
    // c(s0) + g c(s1) + g^2 c_H = 1 + 0.45 + 0.81*2
    CHECK(sample == doctest::Approx(3.07).epsilon(1e-12));
    CHECK(tree.root().arms[0].acc.value() == doctest::Approx(3.07).epsilon(1e-12));
    for (int i = 0; i < 9; ++i) tree.simulate_once(rng);
    CHECK(tree.root().visits == 10);
}

TEST_CASE("count conservation across the tree") {
    TabularMdp mdp = make_mdp4(0.1, 0.1);
    mdp.set_horizon(4);
    MctsTree tree(mdp, RiskParam(0.5), ParameterSchedule::practical(4));
    Rng rng(23);
    for (int i = 0; i < 500; ++i) tree.simulate_once(rng);
    CHECK(tree.root().visits == 500);
    check_counts(tree, tree.root());
}

TEST_CASE("root action accumulator approaches the Bellman Q-value") {
    TabularMdp mdp = make_mdp4(0.1, 0.1);
    mdp.set_horizon(2);
    const RiskParam beta(0.5);
    const DpSolution sol = erm_backward_induction(mdp, beta);
    const int best = sol.policy.at(0, 0);

    // Q(s0, a*) from the optimality equations
    WeightedLse lse(depth_adjusted_beta(beta, mdp.gamma(), 0));
    for (int next = 0; next < mdp.num_states(); ++next) {
        const double p = mdp.transition(best, 0, next);
        if (p > 0.0) {
            lse.add(p, mdp.stage_cost(0, best) + mdp.gamma() * sol.value.at(1, next));
        }
    }
    const double q_star = lse.value();

    MctsTree tree(mdp, beta, ParameterSchedule::practical(2));
    Rng rng(31);
    for (int i = 0; i < 10000; ++i) tree.simulate_once(rng);
    CHECK(std::abs(tree.root().arms[best].acc.value() - q_star) < 0.05);
}

TEST_CASE("H=1 search reduces exactly to the bandit algorithm") {
    const TabularMdp mdp = two_arm_mdp();
    const RiskParam beta(0.8);
    const BonusParams params = BonusParams::practical();

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const SearchResult plan =
            search(mdp, beta, ParameterSchedule::practical(1), 300, seed);

        BanditEnv env;
        env.gamma = mdp.gamma();
        env.cost_bound = mdp.cost_bound();
        for (int a = 0; a < mdp.num_actions(); ++a) {
            env.arms.push_back([&mdp, a](std::uint64_t, Rng& rng) {
                const Transition tr = sample_transition(mdp, 0, a, rng);
                ArmOutcome out;
                out.cost = tr.cost;
                out.has_next_state = true;
                out.next_state = tr.next_state;
                out.next_state_cost = mdp.terminal_cost(tr.next_state);
                return out;
            });
        }
        const BanditHistory history = run_bandit(env, beta, params, 300, seed);

        REQUIRE(plan.root_action_trace.size() == history.steps.size());
        for (std::size_t i = 0; i < history.steps.size(); ++i) {
            CHECK(plan.root_action_trace[i] == history.steps[i].arm);
        }
        for (int a = 0; a < mdp.num_actions(); ++a) {
            CHECK(plan.actions[a].visits == history.arms[a].pulls);
            CHECK(plan.actions[a].value == history.arms[a].acc.value());
        }
    }
}

TEST_CASE("search edge cases") {
    const TabularMdp chain = single_action_chain();
    const SearchResult res =
        search(chain, RiskParam(0.5), ParameterSchedule::practical(2), 50, 3);
    CHECK(res.root_value == doctest::Approx(3.07).epsilon(1e-12));
    CHECK(res.recommended_action == 0);
    CHECK(res.iterations == 50);
    CHECK(std::abs(res.root_value) <= chain.max_abs_discounted_cost());

    CHECK_THROWS_AS(
        search(two_arm_mdp(), RiskParam(1.0), ParameterSchedule::practical(1), 1, 0),
        std::invalid_argument);
    CHECK_THROWS_AS(
        search(two_arm_mdp(), RiskParam(1.0), ParameterSchedule::practical(0), 5, 0),
        std::invalid_argument);
}

TEST_CASE("acc-mcts on a deterministic chain recovers the exact cost") {
    const TabularMdp chain = single_action_chain();
    for (double beta : {1e-9, 0.5, 2.0}) {
        const SearchResult res = acc_mcts_search(chain, RiskParam(beta), 50, 1.0, 3);
        CHECK(res.root_value == doctest::Approx(3.07).epsilon(1e-9));
    }
    CHECK_THROWS_AS(acc_mcts_search(two_arm_mdp(), RiskParam(1.0), 1, 1.0, 0),
                    std::invalid_argument);
}

TEST_CASE("acc-mcts at tiny beta behaves like risk-neutral UCT") {
    TabularMdp mdp = make_mdp4(0.1, 0.1);
    mdp.set_horizon(3);
    const std::uint64_t seed = 11;
    const double c = 1.25;
    const SearchResult acc = acc_mcts_search(mdp, RiskParam(1e-9), 3000, c, seed);

    PlainUct uct(mdp, c);
    Rng rng(seed);
    for (int i = 0; i < 3000; ++i) uct.simulate(rng);

    std::uint64_t best_visits = 0;
    int uct_best = 0;
    for (std::size_t a = 0; a < uct.nodes.front().arms.size(); ++a) {
        CHECK(acc.actions[a].visits == uct.nodes.front().arms[a].visits);
        if (uct.nodes.front().arms[a].visits > best_visits) {
            best_visits = uct.nodes.front().arms[a].visits;
            uct_best = static_cast<int>(a);
        }
    }
    CHECK(acc.recommended_action == uct_best);
}

TEST_CASE("root value converges to the optimal value on the benchmark") {
    // The pooled-stream root estimate carries every exploration sample, and a
    // single high-cost rollout contributes exp(beta x)/n to it. At beta = 0.1
    // that bias washes out by n = 1e4; much beyond that the required n grows
    // like exp(beta * cost range) and the check stops being informative at
    // desk scale.
    for (int horizon : {5, 10}) {
        TabularMdp mdp = make_mdp4(0.1, 0.1);
        mdp.set_horizon(horizon);
        const RiskParam beta(0.1);
        const double v_star =
            erm_backward_induction(mdp, beta).value.at(0, mdp.initial_state());
        const double bound = mdp.max_abs_discounted_cost();

        double prev_gap = 1e300;
        double final_gap = 0.0;
        for (int n : {100, 1000, 10000}) {
            double gap = 0.0;
            for (std::uint64_t seed = 0; seed < 50; ++seed) {
                const SearchResult res =
                    search(mdp, beta, ParameterSchedule::practical(horizon), n, seed);
                gap += std::abs(res.root_value - v_star);
            }
            gap /= 50.0;
            CHECK(gap < prev_gap);
            prev_gap = gap;
            final_gap = gap;
        }
        CHECK(final_gap < 0.1 * bound);
    }
}

TEST_CASE("recommended action tracks the exact argmin as beta varies") {
    TabularMdp mdp = make_mdp4(0.1, 0.1);
    mdp.set_horizon(5);
    for (double beta : {0.01, 3.0}) {
        const int oracle_action =
            erm_backward_induction(mdp, RiskParam(beta)).policy.at(0, 0);
        int votes[2] = {0, 0};
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const SearchResult res =
                search(mdp, RiskParam(beta), practical_schedule(mdp), 4000, seed);
            ++votes[res.recommended_action];
        }
        CHECK(votes[oracle_action] > votes[1 - oracle_action]);
    }
}

TEST_CASE("cost-scaled schedule keeps the unscaled bonus at scale 1") {
    const ParameterSchedule unit = ParameterSchedule::practical(3);
    const ParameterSchedule scaled = ParameterSchedule::practical(3, 0.5, 2.0, 20.0);
    CHECK(unit.theta(1) == 2.0);
    CHECK(scaled.theta(1) == 800.0);  // 2^{xi/2} scale^{xi}
    CHECK(scaled.bonus(1)(16, 4) ==
          doctest::Approx(20.0 * std::sqrt(2.0) * 2.0 / 2.0).epsilon(1e-12));
    CHECK_THROWS_AS(ParameterSchedule::practical(3, 0.5, 2.0, 0.5),
                    std::invalid_argument);
}
