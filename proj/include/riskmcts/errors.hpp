#pragma once

#include <stdexcept>
#include <string>

namespace riskmcts {

/// Thrown when an estimator is queried before it has received any samples.
struct EmptyEstimatorError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown when a brute-force enumeration would exceed its configured budget.
struct BudgetExceededError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown on malformed MDP files; carries the offending line number.
struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, int line_number)
        : std::runtime_error("line " + std::to_string(line_number) + ": " + msg),
          line(line_number) {}
    int line;
};

/// Thrown when the backward parameter recursion has no feasible solution for
/// the requested terminal exponent. Carries the first depth at which a
/// constraint failed and the smallest terminal xi that would succeed.
struct InfeasibleScheduleError : std::invalid_argument {
    InfeasibleScheduleError(const std::string& msg, int depth, double min_xi)
        : std::invalid_argument(msg),
          first_violated_depth(depth),
          min_feasible_xi_terminal(min_xi) {}
    int first_violated_depth;
    double min_feasible_xi_terminal;
};

}  // namespace riskmcts
