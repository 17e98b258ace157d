#include "riskmcts/mcts.hpp"

#include <cmath>

#include "riskmcts/errors.hpp"

namespace riskmcts {

namespace {

BonusParams make_params(double theta, double xi, double alpha, double eta) {
    BonusParams p;
    p.theta = theta;
    p.xi = xi;
    p.alpha = alpha;
    p.eta = eta;
    return p;
}

}  // namespace

ParameterSchedule ParameterSchedule::practical(int horizon, double eta,
                                               double xi, double cost_scale) {
    if (horizon < 1) throw std::invalid_argument("schedule horizon must be >= 1");
    if (!(cost_scale >= 1.0)) {
        throw std::invalid_argument("schedule cost scale must be >= 1");
    }
    ParameterSchedule sched;
    sched.mode_ = ScheduleMode::practical;
    sched.eta_ = eta;
    const double theta = std::pow(2.0, xi / 2.0) * std::pow(cost_scale, xi);
    const double alpha = eta * (1.0 - eta) * xi;
    const BonusParams p = make_params(theta, xi, alpha, eta);
    p.check();
    sched.xi_.assign(horizon, xi);
    sched.alpha_.assign(horizon, alpha);
    sched.theta_.assign(horizon, theta);
    sched.bonus_.assign(horizon, BonusEvaluator(p));
    return sched;
}

ParameterSchedule ParameterSchedule::theoretical(int horizon, double eta,
                                                 double xi_terminal) {
    if (horizon < 1) throw std::invalid_argument("schedule horizon must be >= 1");
    if (!(eta >= 0.5) || !(eta < 1.0)) {
        throw std::invalid_argument("schedule eta must lie in [1/2, 1)");
    }
    if (!(xi_terminal > 1.0)) {
        throw std::invalid_argument("terminal xi must be > 1");
    }
    const double q = eta * (1.0 - eta);

    ParameterSchedule sched;
    sched.mode_ = ScheduleMode::theoretical;
    sched.eta_ = eta;
    sched.xi_.assign(horizon, 0.0);
    sched.alpha_.assign(horizon, 0.0);
    sched.theta_.assign(horizon, 0.0);

    auto fail = [&](int depth) {
        // The recursion is affine in xi_terminal, so the binding constraint
        // alpha_1 > 2 (equivalently xi_1 > 2/q) inverts in closed form.
        double geom = 0.0;
        double qpow = 1.0;
        for (int j = 0; j < horizon - 1; ++j) {
            geom += qpow;
            qpow *= q;
        }
        const double min_xi = (2.0 / q + geom) / qpow;
        throw InfeasibleScheduleError(
            "parameter schedule infeasible at depth " + std::to_string(depth) +
                " (need xi_h > 1 and alpha_h > 2); terminal xi must exceed " +
                std::to_string(min_xi),
            depth, min_xi);
    };

    sched.xi_[horizon - 1] = xi_terminal;
    sched.alpha_[horizon - 1] = q * xi_terminal;
    if (!(sched.alpha_[horizon - 1] > 2.0)) fail(horizon);
    for (int h = horizon - 1; h >= 1; --h) {
        sched.xi_[h - 1] = sched.alpha_[h] - 1.0;
        sched.alpha_[h - 1] = q * sched.xi_[h - 1];
        if (!(sched.xi_[h - 1] > 1.0) || !(sched.alpha_[h - 1] > 2.0)) fail(h);
    }
    sched.bonus_.reserve(horizon);
    for (int h = 1; h <= horizon; ++h) {
        // theta_h = 2^{xi_h/2} makes the coefficient theta^{1/xi} exactly
        // sqrt(2) at every depth; the theta value itself can overflow for the
        // large xi_h this recursion produces, so the evaluator is built from
        // the closed-form coefficient.
        sched.theta_[h - 1] = std::pow(2.0, sched.xi_[h - 1] / 2.0);
        sched.bonus_.emplace_back(std::sqrt(2.0),
                                  sched.alpha_[h - 1] / sched.xi_[h - 1],
                                  1.0 - eta);
    }
    return sched;
}

BonusParams ParameterSchedule::bonus_params(int h) const {
    return make_params(theta(h), xi(h), alpha(h), eta_);
}

MctsTree::MctsTree(TabularMdp mdp, RiskParam beta, ParameterSchedule schedule)
    : mdp_(std::move(mdp)), beta_(beta.value()), schedule_(std::move(schedule)) {
    mdp_.check_valid();
    if (schedule_.horizon() < mdp_.horizon()) {
        throw std::invalid_argument("parameter schedule shorter than the MDP horizon");
    }
    depth_beta_.resize(mdp_.horizon());
    for (int h = 0; h < mdp_.horizon(); ++h) {
        depth_beta_[h] = depth_adjusted_beta(beta, mdp_.gamma(), h).value();
    }
    nodes_.emplace_back(mdp_.initial_state(), 0, RiskParam(depth_beta_[0]),
                        mdp_.num_actions());
    path_.reserve(mdp_.horizon());
}

int MctsTree::select_action(const DecisionNode& node) const {
    const int A = static_cast<int>(node.arms.size());
    for (int a = 0; a < A; ++a) {
        if (node.arms[a].visits == 0) return a;
    }
    const BonusEvaluator& be = schedule_.bonus(node.depth + 1);
    int best = 0;
    double best_score =
        node.arms[0].acc.value() - be(node.visits, node.arms[0].visits);
    for (int a = 1; a < A; ++a) {
        const double score =
            node.arms[a].acc.value() - be(node.visits, node.arms[a].visits);
        if (score < best_score) {
            best_score = score;
            best = a;
        }
    }
    return best;
}

std::uint32_t MctsTree::ensure_child(std::uint32_t node, int action,
                                     int next_state) {
    DecisionNode::Arm& arm = nodes_[node].arms[action];
    if (arm.children.empty()) {
        arm.children.assign(mdp_.num_states(), DecisionNode::kNoChild);
    }
    std::uint32_t child = arm.children[next_state];
    if (child == DecisionNode::kNoChild) {
        child = static_cast<std::uint32_t>(nodes_.size());
        const int depth = nodes_[node].depth + 1;
        nodes_.emplace_back(next_state, depth, RiskParam(depth_beta_[depth]),
                            mdp_.num_actions());
        nodes_[node].arms[action].children[next_state] = child;
    }
    return child;
}

double MctsTree::simulate_once(Rng& rng) {
    const int H = mdp_.horizon();
    path_.clear();
    std::uint32_t idx = 0;
    int state = nodes_.front().state;
    for (int h = 0; h < H; ++h) {
        const int a = select_action(nodes_[idx]);
        const Transition tr = sample_transition(mdp_, state, a, rng);
        path_.push_back(Frame{idx, a, tr.cost});
        state = tr.next_state;
        if (h + 1 < H) idx = ensure_child(idx, a, state);
    }
    double x = mdp_.terminal_cost(state);
    for (int h = H - 1; h >= 0; --h) {
        const Frame& f = path_[h];
        x = f.stage_cost + mdp_.gamma() * x;
        DecisionNode& node = nodes_[f.node];
        ++node.visits;
        DecisionNode::Arm& arm = node.arms[f.action];
        ++arm.visits;
        arm.acc.update(x);
    }
    trace_.push_back(path_.front().action);
    ++iterations_;
    return x;
}

const DecisionNode* MctsTree::child(const DecisionNode& node, int action,
                                    int next_state) const {
    const DecisionNode::Arm& arm = node.arms[action];
    if (arm.children.empty() || arm.children[next_state] == DecisionNode::kNoChild) {
        return nullptr;
    }
    return &nodes_[arm.children[next_state]];
}

SearchResult MctsTree::result() const {
    const DecisionNode& r = root();
    SearchResult res;
    res.iterations = iterations_;
    res.root_action_trace = trace_;
    res.actions.resize(r.arms.size());

    ErmAccumulator pooled((RiskParam(beta_)));
    int best = -1;
    for (std::size_t a = 0; a < r.arms.size(); ++a) {
        const DecisionNode::Arm& arm = r.arms[a];
        res.actions[a].visits = arm.visits;
        if (arm.visits == 0) continue;
        res.actions[a].value = arm.acc.value();
        pooled.merge(arm.acc);
        if (best < 0 || res.actions[a].value < res.actions[best].value ||
            (res.actions[a].value == res.actions[best].value &&
             arm.visits > r.arms[best].visits)) {
            best = static_cast<int>(a);
        }
    }
    if (best < 0) {
        throw EmptyEstimatorError("search has not run any iterations");
    }
    res.recommended_action = best;
    res.root_value = pooled.value();
    return res;
}

SearchResult search(const TabularMdp& mdp, RiskParam beta,
                    const ParameterSchedule& schedule, std::uint64_t iterations,
                    Rng& rng) {
    if (iterations < static_cast<std::uint64_t>(mdp.num_actions())) {
        throw std::invalid_argument(
            "need at least num_actions iterations to initialize every root action");
    }
    MctsTree tree(mdp, beta, schedule);
    for (std::uint64_t i = 0; i < iterations; ++i) tree.simulate_once(rng);
    return tree.result();
}

SearchResult search(const TabularMdp& mdp, RiskParam beta,
                    const ParameterSchedule& schedule, std::uint64_t iterations,
                    std::uint64_t seed) {
    Rng rng(seed);
    return search(mdp, beta, schedule, iterations, rng);
}

namespace {

/// UCT tree over min-max normalised exponential utilities.
struct UctNode {
    struct Arm {
        std::uint64_t visits = 0;
        long double util_sum = 0.0L;
        std::vector<std::uint32_t> children;
    };
    explicit UctNode(int state, int num_actions) : state(state), arms(num_actions) {}
    int state;
    std::uint64_t visits = 0;
    std::vector<Arm> arms;
};

constexpr std::uint32_t kNoChild = 0xffffffffu;

struct AccMctsSearch {
    const TabularMdp& mdp;
    double beta;
    double exploration;
    double bound;             // R0, the discounted cumulative cost bound
    long double q;            // exp(-2 beta R0) = u(-R0) / u(R0)
    long double one_minus_q;  // extended precision keeps both tails exact:
                              // beta R0 can reach several hundred, where
                              // utilities live at exp(-2 beta R0), and the
                              // beta -> 0 limit needs the 1 - q cancellation
    std::vector<double> gamma_pow;
    std::deque<UctNode> nodes;
    std::vector<std::pair<std::uint32_t, int>> path;
    std::vector<int> trace;

    AccMctsSearch(const TabularMdp& m, double beta, double exploration)
        : mdp(m), beta(beta), exploration(exploration) {
        bound = m.max_abs_discounted_cost();
        q = expl(-2.0L * static_cast<long double>(beta) * bound);
        one_minus_q = 1.0L - q;
        gamma_pow.resize(m.horizon() + 1);
        gamma_pow[0] = 1.0;
        for (int h = 1; h <= m.horizon(); ++h) {
            gamma_pow[h] = gamma_pow[h - 1] * m.gamma();
        }
        nodes.emplace_back(m.initial_state(), m.num_actions());
        path.reserve(m.horizon());
    }

    /// Normalised utility (u(x) - u(-R0)) / (u(R0) - u(-R0)) in [0, 1].
    long double normalized_utility(double x) const {
        const long double b = beta;
        return (expl(b * (static_cast<long double>(x) - bound)) - q) / one_minus_q;
    }

    /// Back from normalised mean utility to the cost scale:
    /// (1/beta) ln(mean u).
    double cost_scale(long double mean_norm_util) const {
        const long double lg = logl(mean_norm_util * one_minus_q + q);
        return static_cast<double>(static_cast<long double>(bound) +
                                   lg / static_cast<long double>(beta));
    }

    int select(const UctNode& node) const {
        const int A = static_cast<int>(node.arms.size());
        for (int a = 0; a < A; ++a) {
            if (node.arms[a].visits == 0) return a;
        }
        const double log_n = std::log(static_cast<double>(node.visits));
        int best = 0;
        double best_score = score(node.arms[0], log_n);
        for (int a = 1; a < A; ++a) {
            const double s = score(node.arms[a], log_n);
            if (s < best_score) {
                best_score = s;
                best = a;
            }
        }
        return best;
    }

    double score(const UctNode::Arm& arm, double log_n) const {
        const double mean = static_cast<double>(
            arm.util_sum / static_cast<long double>(arm.visits));
        return mean - exploration *
                          std::sqrt(log_n / static_cast<double>(arm.visits));
    }

    std::uint32_t ensure_child(std::uint32_t node, int action, int next_state) {
        UctNode::Arm& arm = nodes[node].arms[action];
        if (arm.children.empty()) {
            arm.children.assign(mdp.num_states(), kNoChild);
        }
        std::uint32_t child = arm.children[next_state];
        if (child == kNoChild) {
            child = static_cast<std::uint32_t>(nodes.size());
            nodes.emplace_back(next_state, mdp.num_actions());
            nodes[node].arms[action].children[next_state] = child;
        }
        return child;
    }

    void simulate(Rng& rng) {
        const int H = mdp.horizon();
        path.clear();
        std::uint32_t idx = 0;
        int state = nodes.front().state;
        double total = 0.0;
        for (int h = 0; h < H; ++h) {
            const int a = select(nodes[idx]);
            const Transition tr = sample_transition(mdp, state, a, rng);
            path.emplace_back(idx, a);
            total += gamma_pow[h] * tr.cost;
            state = tr.next_state;
            if (h + 1 < H) idx = ensure_child(idx, a, state);
        }
        total += gamma_pow[H] * mdp.terminal_cost(state);
        const long double util = normalized_utility(total);
        for (const auto& [node, action] : path) {
            ++nodes[node].visits;
            UctNode::Arm& arm = nodes[node].arms[action];
            ++arm.visits;
            arm.util_sum += util;
        }
        trace.push_back(path.front().second);
    }

    SearchResult result(std::uint64_t iterations) const {
        const UctNode& r = nodes.front();
        SearchResult res;
        res.iterations = iterations;
        res.root_action_trace = trace;
        res.actions.resize(r.arms.size());
        long double total_util = 0.0L;
        int best = -1;
        for (std::size_t a = 0; a < r.arms.size(); ++a) {
            const UctNode::Arm& arm = r.arms[a];
            res.actions[a].visits = arm.visits;
            if (arm.visits == 0) continue;
            res.actions[a].value =
                cost_scale(arm.util_sum / static_cast<long double>(arm.visits));
            total_util += arm.util_sum;
            // robust-child extraction: most visits, ties to the lowest index
            if (best < 0 || arm.visits > r.arms[best].visits) {
                best = static_cast<int>(a);
            }
        }
        res.recommended_action = best;
        res.root_value =
            cost_scale(total_util / static_cast<long double>(iterations));
        return res;
    }
};

}  // namespace

SearchResult acc_mcts_search(const TabularMdp& mdp, RiskParam beta,
                             std::uint64_t iterations, double exploration,
                             Rng& rng) {
    if (iterations < static_cast<std::uint64_t>(mdp.num_actions())) {
        throw std::invalid_argument(
            "need at least num_actions iterations to initialize every root action");
    }
    mdp.check_valid();
    if (!(exploration >= 0.0)) {
        throw std::invalid_argument("exploration constant must be >= 0");
    }
    AccMctsSearch search(mdp, beta.value(), exploration);
    for (std::uint64_t i = 0; i < iterations; ++i) search.simulate(rng);
    return search.result(iterations);
}

SearchResult acc_mcts_search(const TabularMdp& mdp, RiskParam beta,
                             std::uint64_t iterations, double exploration,
                             std::uint64_t seed) {
    Rng rng(seed);
    return acc_mcts_search(mdp, beta, iterations, exploration, rng);
}

ParameterSchedule practical_schedule(const TabularMdp& mdp) {
    return ParameterSchedule::practical(mdp.horizon(), 0.5, 2.0,
                                        std::max(1.0, mdp.cost_bound()));
}

}  // namespace riskmcts
