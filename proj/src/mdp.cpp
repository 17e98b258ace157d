#include "riskmcts/mdp.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "riskmcts/errors.hpp"

namespace riskmcts {

namespace {

constexpr double kRowSumTolerance = 1e-9;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

TabularMdp::TabularMdp(int num_states, int num_actions, double gamma,
                       int horizon, int initial_state, double cost_bound)
    : num_states_(num_states),
      num_actions_(num_actions),
      gamma_(gamma),
      horizon_(horizon),
      initial_state_(initial_state),
      cost_bound_(cost_bound) {
    if (num_states < 1 || num_actions < 1) {
        throw std::invalid_argument("MDP needs at least one state and one action");
    }
    transition_.assign(static_cast<std::size_t>(num_actions) * num_states * num_states, 0.0);
    stage_cost_.assign(static_cast<std::size_t>(num_states) * num_actions, 0.0);
    terminal_cost_.assign(num_states, 0.0);
}

std::size_t TabularMdp::t_index(int a, int s) const {
    return (static_cast<std::size_t>(a) * num_states_ + s) * num_states_;
}

double TabularMdp::transition(int a, int s, int next) const {
    return transition_[t_index(a, s) + next];
}

std::span<const double> TabularMdp::transition_row(int a, int s) const {
    return {transition_.data() + t_index(a, s), static_cast<std::size_t>(num_states_)};
}

double TabularMdp::stage_cost(int s, int a) const {
    return stage_cost_[static_cast<std::size_t>(s) * num_actions_ + a];
}

double TabularMdp::terminal_cost(int s) const { return terminal_cost_[s]; }

void TabularMdp::set_transition(int a, int s, int next, double p) {
    if (a < 0 || a >= num_actions_ || s < 0 || s >= num_states_ || next < 0 ||
        next >= num_states_) {
        throw std::invalid_argument("transition index out of range");
    }
    transition_[t_index(a, s) + next] = p;
}

void TabularMdp::set_stage_cost(int s, int a, double c) {
    if (a < 0 || a >= num_actions_ || s < 0 || s >= num_states_) {
        throw std::invalid_argument("stage-cost index out of range");
    }
    stage_cost_[static_cast<std::size_t>(s) * num_actions_ + a] = c;
}

void TabularMdp::set_terminal_cost(int s, double c) {
    if (s < 0 || s >= num_states_) {
        throw std::invalid_argument("terminal-cost index out of range");
    }
    terminal_cost_[s] = c;
}

void TabularMdp::set_horizon(int horizon) {
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    horizon_ = horizon;
}

void TabularMdp::set_initial_state(int s) {
    if (s < 0 || s >= num_states_) {
        throw std::invalid_argument("initial state out of range");
    }
    initial_state_ = s;
}

void TabularMdp::set_gamma(double gamma) {
    if (!(gamma > 0.0) || gamma > 1.0) {
        throw std::invalid_argument("gamma must lie in (0, 1]");
    }
    gamma_ = gamma;
}

double TabularMdp::max_abs_discounted_cost() const {
    if (gamma_ == 1.0) return cost_bound_ * (horizon_ + 1);
    return cost_bound_ * (1.0 - std::pow(gamma_, horizon_ + 1)) / (1.0 - gamma_);
}

std::vector<std::string> TabularMdp::validate() const {
    std::vector<std::string> errors;
    if (!(gamma_ > 0.0) || gamma_ > 1.0) {
        errors.push_back("gamma must lie in (0, 1], got " + fmt_double(gamma_));
    }
    if (horizon_ < 1) {
        errors.push_back("horizon must be >= 1, got " + std::to_string(horizon_));
    }
    if (initial_state_ < 0 || initial_state_ >= num_states_) {
        errors.push_back("initial state " + std::to_string(initial_state_) +
                         " out of range");
    }
    if (!(cost_bound_ > 0.0) || !std::isfinite(cost_bound_)) {
        errors.push_back("cost bound must be positive and finite");
    }
    for (int a = 0; a < num_actions_; ++a) {
        for (int s = 0; s < num_states_; ++s) {
            double sum = 0.0;
            for (int next = 0; next < num_states_; ++next) {
                const double p = transition(a, s, next);
                if (!std::isfinite(p) || p < 0.0) {
                    errors.push_back("transition (a=" + std::to_string(a) +
                                     ", s=" + std::to_string(s) + ", s'=" +
                                     std::to_string(next) + ") is negative or non-finite");
                }
                sum += p;
            }
            if (std::abs(sum - 1.0) > kRowSumTolerance) {
                errors.push_back("transition row (a=" + std::to_string(a) +
                                 ", s=" + std::to_string(s) + ") sums to " +
                                 fmt_double(sum) + ", expected 1");
            }
        }
    }
    for (int s = 0; s < num_states_; ++s) {
        for (int a = 0; a < num_actions_; ++a) {
            const double c = stage_cost(s, a);
            if (!std::isfinite(c) || std::abs(c) > cost_bound_) {
                errors.push_back("stage cost c(s=" + std::to_string(s) + ", a=" +
                                 std::to_string(a) + ") = " + fmt_double(c) +
                                 " exceeds bound " + fmt_double(cost_bound_));
            }
        }
        const double c = terminal_cost(s);
        if (!std::isfinite(c) || std::abs(c) > cost_bound_) {
            errors.push_back("terminal cost c_H(s=" + std::to_string(s) + ") = " +
                             fmt_double(c) + " exceeds bound " + fmt_double(cost_bound_));
        }
    }
    return errors;
}

void TabularMdp::check_valid() const {
    const std::vector<std::string> errors = validate();
    if (errors.empty()) return;
    std::string joined = "invalid MDP:";
    for (const std::string& e : errors) joined += "\n  " + e;
    throw std::invalid_argument(joined);
}

Transition sample_transition(const TabularMdp& mdp, int s, int a, Rng& rng) {
    if (s < 0 || s >= mdp.num_states() || a < 0 || a >= mdp.num_actions()) {
        throw std::invalid_argument("sample_transition: state or action out of range");
    }
    const int next = sample_index(mdp.transition_row(a, s), rng);
    return Transition{next, mdp.stage_cost(s, a)};
}

TabularMdp make_mdp4(double epsilon, double reset_prob) {
    if (!(epsilon > 0.0) || epsilon >= 1.0) {
        throw std::invalid_argument("mdp4 epsilon must lie in (0, 1)");
    }
    if (reset_prob < 0.0 || reset_prob > 1.0) {
        throw std::invalid_argument("mdp4 reset probability must lie in [0, 1]");
    }
    TabularMdp mdp(4, 2, 0.9, 100, 0, 20.0);
    // s0: a0 is the risky action, a1 the safe one. No reset at s0 itself.
    mdp.set_transition(0, 0, 2, 1.0 - epsilon);
    mdp.set_transition(0, 0, 3, epsilon);
    mdp.set_transition(1, 0, 1, 1.0);
    // s1..s3 self-loop and return to s0 with reset_prob, for every action.
    for (int a = 0; a < 2; ++a) {
        for (int s = 1; s < 4; ++s) {
            mdp.set_transition(a, s, 0, reset_prob);
            mdp.set_transition(a, s, s, 1.0 - reset_prob);
        }
    }
    const double costs[4] = {0.0, 5.0, 1.0, 20.0};
    for (int s = 0; s < 4; ++s) {
        for (int a = 0; a < 2; ++a) mdp.set_stage_cost(s, a, costs[s]);
        mdp.set_terminal_cost(s, costs[s]);
    }
    return mdp;
}

TabularMdp random_mdp(int num_states, int num_actions, int horizon,
                      double gamma, double cost_bound, std::uint64_t seed) {
    TabularMdp mdp(num_states, num_actions, gamma, horizon, 0, cost_bound);
    Rng rng(seed);
    for (int a = 0; a < num_actions; ++a) {
        for (int s = 0; s < num_states; ++s) {
            std::vector<double> row(num_states);
            double sum = 0.0;
            for (double& p : row) {
                p = uniform01(rng) + 1e-3;
                sum += p;
            }
            for (int next = 0; next < num_states; ++next) {
                mdp.set_transition(a, s, next, row[next] / sum);
            }
        }
    }
    for (int s = 0; s < num_states; ++s) {
        for (int a = 0; a < num_actions; ++a) {
            mdp.set_stage_cost(s, a, (2.0 * uniform01(rng) - 1.0) * cost_bound);
        }
        mdp.set_terminal_cost(s, (2.0 * uniform01(rng) - 1.0) * cost_bound);
    }
    return mdp;
}

namespace {

struct HeaderFields {
    int states = -1, actions = -1, horizon = -1, initial_state = -1;
    double gamma = 0.0, cost_bound = 0.0;
    bool complete() const {
        return states > 0 && actions > 0 && horizon > 0 && initial_state >= 0 &&
               gamma > 0.0 && cost_bound > 0.0;
    }
};

}  // namespace

TabularMdp parse_mdp(std::istream& in) {
    std::string line;
    int line_no = 0;
    bool saw_magic = false;
    bool saw_end = false;
    HeaderFields hdr;
    std::vector<TabularMdp> built;  // 0 or 1 elements; constructed once header complete

    auto require_model = [&](int ln) -> TabularMdp& {
        if (built.empty()) {
            if (!hdr.complete()) {
                throw ParseError(
                    "record before the header is complete "
                    "(states/actions/gamma/horizon/initial_state/cost_bound)",
                    ln);
            }
            built.emplace_back(hdr.states, hdr.actions, hdr.gamma, hdr.horizon,
                               hdr.initial_state, hdr.cost_bound);
        }
        return built.front();
    };

    std::vector<bool> transition_seen;
    auto mark_transition = [&](int a, int s, int next, int ln) {
        if (transition_seen.empty()) {
            transition_seen.assign(
                static_cast<std::size_t>(hdr.actions) * hdr.states * hdr.states, false);
        }
        std::size_t idx =
            (static_cast<std::size_t>(a) * hdr.states + s) * hdr.states + next;
        if (transition_seen[idx]) {
            throw ParseError("duplicate transition entry", ln);
        }
        transition_seen[idx] = true;
    };

    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;  // blank or comment-only

        if (saw_end) {
            throw ParseError("content after 'end'", line_no);
        }
        if (!saw_magic) {
            std::string version;
            if (tag != "riskmdp" || !(ls >> version) || version != "v1") {
                throw ParseError("expected header 'riskmdp v1'", line_no);
            }
            saw_magic = true;
            continue;
        }

        auto read_int = [&](int& out) {
            if (!(ls >> out)) throw ParseError("expected integer after '" + tag + "'", line_no);
        };
        auto read_double = [&](double& out) {
            if (!(ls >> out)) throw ParseError("expected number after '" + tag + "'", line_no);
        };

        if (tag == "states") {
            read_int(hdr.states);
            if (hdr.states < 1) throw ParseError("states must be >= 1", line_no);
        } else if (tag == "actions") {
            read_int(hdr.actions);
            if (hdr.actions < 1) throw ParseError("actions must be >= 1", line_no);
        } else if (tag == "gamma") {
            read_double(hdr.gamma);
        } else if (tag == "horizon") {
            read_int(hdr.horizon);
        } else if (tag == "initial_state") {
            read_int(hdr.initial_state);
        } else if (tag == "cost_bound") {
            read_double(hdr.cost_bound);
        } else if (tag == "transition") {
            int a, s, next;
            double p;
            read_int(a);
            read_int(s);
            read_int(next);
            read_double(p);
            TabularMdp& mdp = require_model(line_no);
            if (a < 0 || a >= hdr.actions || s < 0 || s >= hdr.states || next < 0 ||
                next >= hdr.states) {
                throw ParseError("transition index out of range", line_no);
            }
            if (p < 0.0) {
                throw ParseError("negative transition probability", line_no);
            }
            mark_transition(a, s, next, line_no);
            mdp.set_transition(a, s, next, p);
        } else if (tag == "stage_cost") {
            int s, a;
            double c;
            read_int(s);
            read_int(a);
            read_double(c);
            TabularMdp& mdp = require_model(line_no);
            if (a < 0 || a >= hdr.actions || s < 0 || s >= hdr.states) {
                throw ParseError("stage-cost index out of range", line_no);
            }
            mdp.set_stage_cost(s, a, c);
        } else if (tag == "terminal_cost") {
            int s;
            double c;
            read_int(s);
            read_double(c);
            TabularMdp& mdp = require_model(line_no);
            if (s < 0 || s >= hdr.states) {
                throw ParseError("terminal-cost index out of range", line_no);
            }
            mdp.set_terminal_cost(s, c);
        } else if (tag == "end") {
            require_model(line_no);
            saw_end = true;
        } else {
            throw ParseError("unknown record '" + tag + "'", line_no);
        }
    }
    if (!saw_magic) throw ParseError("missing 'riskmdp v1' header", line_no);
    if (!saw_end) throw ParseError("truncated file: missing 'end'", line_no);
    return built.front();
}

TabularMdp parse_mdp_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open MDP file: " + path);
    return parse_mdp(in);
}

TabularMdp load_mdp(const std::string& path) {
    TabularMdp mdp = parse_mdp_file(path);
    mdp.check_valid();
    return mdp;
}

void save_mdp(const TabularMdp& mdp, std::ostream& out) {
    out << "riskmdp v1\n";
    out << "states " << mdp.num_states() << "\n";
    out << "actions " << mdp.num_actions() << "\n";
    out << "gamma " << fmt_double(mdp.gamma()) << "\n";
    out << "horizon " << mdp.horizon() << "\n";
    out << "initial_state " << mdp.initial_state() << "\n";
    out << "cost_bound " << fmt_double(mdp.cost_bound()) << "\n";
    for (int a = 0; a < mdp.num_actions(); ++a) {
        for (int s = 0; s < mdp.num_states(); ++s) {
            for (int next = 0; next < mdp.num_states(); ++next) {
                const double p = mdp.transition(a, s, next);
                if (p != 0.0) {
                    out << "transition " << a << " " << s << " " << next << " "
                        << fmt_double(p) << "\n";
                }
            }
        }
    }
    for (int s = 0; s < mdp.num_states(); ++s) {
        for (int a = 0; a < mdp.num_actions(); ++a) {
            out << "stage_cost " << s << " " << a << " "
                << fmt_double(mdp.stage_cost(s, a)) << "\n";
        }
    }
    for (int s = 0; s < mdp.num_states(); ++s) {
        out << "terminal_cost " << s << " " << fmt_double(mdp.terminal_cost(s)) << "\n";
    }
    out << "end\n";
}

void save_mdp(const TabularMdp& mdp, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot write MDP file: " + path);
    save_mdp(mdp, out);
}

}  // namespace riskmcts
