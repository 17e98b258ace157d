#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "riskmcts/errors.hpp"

namespace riskmcts {

/// Risk-aversion parameter of the entropic risk measure.
///
/// The entropic risk of a cost variable z is (1/beta) ln E[exp(beta z)] with
/// beta in (0, inf); it interpolates between the mean (beta -> 0) and
/// worst-case emphasis (beta large). beta = 0 is rejected; risk-neutral
/// comparisons use a tiny positive beta instead.
class RiskParam {
public:
    explicit RiskParam(double beta);
    double value() const noexcept { return beta_; }

private:
    double beta_;
};

/// One outcome of a finite distribution.
struct Outcome {
    double value = 0.0;
    double probability = 0.0;
};

/// Finite distribution over real outcomes. Probabilities must be
/// non-negative and sum to 1 within kProbabilityTolerance.
class DiscreteDistribution {
public:
    static constexpr double kProbabilityTolerance = 1e-12;

    explicit DiscreteDistribution(std::vector<Outcome> outcomes);
    std::span<const Outcome> outcomes() const noexcept { return outcomes_; }

private:
    std::vector<Outcome> outcomes_;
};

/// Streaming estimator of the empirical entropic risk of a cost sequence at a
/// fixed beta:
///
///   value() = (1/beta) ln( (1/n) sum_t exp(beta x_t) )
///
/// Internally keeps ln sum_t exp(beta x_t) with a running-maximum shift so
/// bounded inputs never overflow, and carries the shifted sum in extended
/// precision so the small-beta limit stays accurate. Equivalent to storing
/// the full sample list for a fixed beta, in O(1) memory.
class ErmAccumulator {
public:
    explicit ErmAccumulator(RiskParam beta);

    /// Adds one sample. Rejects non-finite inputs.
    void update(double x);

    /// Empirical ERM of the samples seen so far. Requires count() >= 1.
    double value() const;

    /// ln sum_t exp(beta x_t), before the 1/n normalisation. Requires
    /// count() >= 1.
    double log_sum() const;

    /// Pools another accumulator with the same beta into this one.
    void merge(const ErmAccumulator& other);

    std::uint64_t count() const noexcept { return count_; }
    double beta() const noexcept { return beta_; }

private:
    double beta_;
    double shift_ = 0.0;             // running max of beta * x_t
    long double scaled_sum_ = 0.0L;  // sum_t exp(beta x_t - shift_)
    std::uint64_t count_ = 0;
    mutable double cached_value_ = 0.0;
    mutable bool cache_valid_ = false;
};

/// Weighted streaming log-sum-exp at a fixed beta: accumulates
/// ln sum_i w_i exp(beta v_i) with a running-maximum shift. Used for exact
/// ERM evaluation over weighted outcome sets (distributions, enumerated
/// trajectories).
class WeightedLse {
public:
    explicit WeightedLse(RiskParam beta);

    /// Adds a term with weight w >= 0 at value v. Zero-weight terms are
    /// ignored.
    void add(double weight, double value);

    /// (1/beta) ln sum_i w_i exp(beta v_i). Requires at least one positive
    /// weight.
    double value() const;

    std::uint64_t terms() const noexcept { return terms_; }
    double total_weight() const noexcept { return total_weight_; }

private:
    double beta_;
    double shift_ = 0.0;
    long double scaled_sum_ = 0.0L;
    double total_weight_ = 0.0;
    std::uint64_t terms_ = 0;
};

/// Exact ERM of a finite distribution:
/// (1/beta) ln sum_i p_i exp(beta v_i), max-shifted.
double erm_exact(const DiscreteDistribution& dist, RiskParam beta);

/// One-shot empirical ERM of a sample list (batch counterpart of
/// ErmAccumulator).
double accumulate_erm(std::span<const double> samples, RiskParam beta);

/// Optimized-certainty-equivalent form of the empirical ERM:
///
///   min over lambda of { lambda + (1/n) sum_t u_beta(x_t - lambda) },
///   u_beta(x) = (exp(beta x) - 1) / beta.
///
/// The objective is convex in lambda and its minimiser lies in
/// [min(x), max(x)], so the minimisation runs a golden-section search over
/// that interval; `tolerance` bounds the final interval width. Agrees with
/// the direct estimator up to the optimisation tolerance.
double oce_value(std::span<const double> samples, RiskParam beta,
                 double tolerance);

/// Depth-adjusted risk parameter beta * gamma^depth.
RiskParam depth_adjusted_beta(RiskParam beta, double gamma, int depth);

}  // namespace riskmcts
