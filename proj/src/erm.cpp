#include "riskmcts/erm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace riskmcts {

RiskParam::RiskParam(double beta) : beta_(beta) {
    if (!std::isfinite(beta) || beta <= 0.0) {
        throw std::invalid_argument(
            "risk parameter beta must be finite and strictly positive, got " +
            std::to_string(beta));
    }
}

DiscreteDistribution::DiscreteDistribution(std::vector<Outcome> outcomes)
    : outcomes_(std::move(outcomes)) {
    if (outcomes_.empty()) {
        throw std::invalid_argument("distribution must have at least one outcome");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < outcomes_.size(); ++i) {
        const Outcome& o = outcomes_[i];
        if (!std::isfinite(o.value)) {
            throw std::invalid_argument("outcome " + std::to_string(i) +
                                        ": value is not finite");
        }
        if (!std::isfinite(o.probability) || o.probability < 0.0) {
            throw std::invalid_argument("outcome " + std::to_string(i) +
                                        ": probability must be non-negative");
        }
        total += o.probability;
    }
    if (std::abs(total - 1.0) > kProbabilityTolerance) {
        throw std::invalid_argument("probabilities sum to " + std::to_string(total) +
                                    ", expected 1");
    }
}

ErmAccumulator::ErmAccumulator(RiskParam beta) : beta_(beta.value()) {}

void ErmAccumulator::update(double x) {
    if (!std::isfinite(x)) {
        throw std::invalid_argument("ERM accumulator sample must be finite");
    }
    const double v = beta_ * x;
    if (count_ == 0) {
        shift_ = v;
        scaled_sum_ = 1.0L;
    } else if (v <= shift_) {
        scaled_sum_ += expl(static_cast<long double>(v - shift_));
    } else {
        scaled_sum_ = scaled_sum_ * expl(static_cast<long double>(shift_ - v)) + 1.0L;
        shift_ = v;
    }
    ++count_;
    cache_valid_ = false;
}

double ErmAccumulator::value() const {
    if (count_ == 0) {
        throw EmptyEstimatorError("ERM accumulator has no samples");
    }
    if (!cache_valid_) {
        const long double ld =
            static_cast<long double>(shift_) +
            logl(scaled_sum_ / static_cast<long double>(count_));
        cached_value_ = static_cast<double>(ld / static_cast<long double>(beta_));
        cache_valid_ = true;
    }
    return cached_value_;
}

double ErmAccumulator::log_sum() const {
    if (count_ == 0) {
        throw EmptyEstimatorError("ERM accumulator has no samples");
    }
    return static_cast<double>(static_cast<long double>(shift_) + logl(scaled_sum_));
}

void ErmAccumulator::merge(const ErmAccumulator& other) {
    if (other.beta_ != beta_) {
        throw std::invalid_argument("cannot merge ERM accumulators with different beta");
    }
    if (other.count_ == 0) return;
    if (count_ == 0) {
        *this = other;
        return;
    }
    if (other.shift_ <= shift_) {
        scaled_sum_ += other.scaled_sum_ * expl(static_cast<long double>(other.shift_ - shift_));
    } else {
        scaled_sum_ = scaled_sum_ * expl(static_cast<long double>(shift_ - other.shift_)) +
                      other.scaled_sum_;
        shift_ = other.shift_;
    }
    count_ += other.count_;
    cache_valid_ = false;
}

WeightedLse::WeightedLse(RiskParam beta) : beta_(beta.value()) {}

void WeightedLse::add(double weight, double value) {
    if (!std::isfinite(weight) || weight < 0.0) {
        throw std::invalid_argument("log-sum-exp weight must be finite and non-negative");
    }
    if (!std::isfinite(value)) {
        throw std::invalid_argument("log-sum-exp value must be finite");
    }
    if (weight == 0.0) return;
    const double v = beta_ * value;
    if (terms_ == 0) {
        shift_ = v;
        scaled_sum_ = static_cast<long double>(weight);
    } else if (v <= shift_) {
        scaled_sum_ += static_cast<long double>(weight) *
                       expl(static_cast<long double>(v - shift_));
    } else {
        scaled_sum_ = scaled_sum_ * expl(static_cast<long double>(shift_ - v)) +
                      static_cast<long double>(weight);
        shift_ = v;
    }
    total_weight_ += weight;
    ++terms_;
}

double WeightedLse::value() const {
    if (terms_ == 0) {
        throw EmptyEstimatorError("log-sum-exp has no terms");
    }
    const long double ld = static_cast<long double>(shift_) + logl(scaled_sum_);
    return static_cast<double>(ld / static_cast<long double>(beta_));
}

double erm_exact(const DiscreteDistribution& dist, RiskParam beta) {
    WeightedLse lse(beta);
    for (const Outcome& o : dist.outcomes()) {
        lse.add(o.probability, o.value);
    }
    return lse.value();
}

double accumulate_erm(std::span<const double> samples, RiskParam beta) {
    ErmAccumulator acc(beta);
    for (double x : samples) acc.update(x);
    return acc.value();
}

namespace {

long double oce_objective(std::span<const double> samples, long double beta,
                          long double lambda) {
    long double sum = 0.0L;
    for (double x : samples) {
        sum += expl(beta * (static_cast<long double>(x) - lambda)) - 1.0L;
    }
    return lambda + sum / (beta * static_cast<long double>(samples.size()));
}

}  // namespace

double oce_value(std::span<const double> samples, RiskParam beta,
                 double tolerance) {
    if (samples.empty()) {
        throw EmptyEstimatorError("OCE requires at least one sample");
    }
    if (!std::isfinite(tolerance) || tolerance <= 0.0) {
        throw std::invalid_argument("OCE tolerance must be positive");
    }
    for (double x : samples) {
        if (!std::isfinite(x)) {
            throw std::invalid_argument("OCE sample must be finite");
        }
    }
    const long double b = beta.value();
    long double lo = *std::min_element(samples.begin(), samples.end());
    long double hi = *std::max_element(samples.begin(), samples.end());

    // Golden-section search; the objective is convex with its minimiser
    // inside [lo, hi].
    const long double invphi = 0.6180339887498948482L;
    long double c = hi - invphi * (hi - lo);
    long double d = lo + invphi * (hi - lo);
    long double fc = oce_objective(samples, b, c);
    long double fd = oce_objective(samples, b, d);
    int iterations = 0;
    while (hi - lo > tolerance && iterations < 400) {
        if (fc < fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - invphi * (hi - lo);
            fc = oce_objective(samples, b, c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + invphi * (hi - lo);
            fd = oce_objective(samples, b, d);
        }
        ++iterations;
    }
    return static_cast<double>(oce_objective(samples, b, (lo + hi) / 2.0L));
}

RiskParam depth_adjusted_beta(RiskParam beta, double gamma, int depth) {
    if (!(gamma > 0.0) || gamma > 1.0) {
        throw std::invalid_argument("gamma must lie in (0, 1]");
    }
    if (depth < 0) {
        throw std::invalid_argument("depth must be non-negative");
    }
    return RiskParam(beta.value() * std::pow(gamma, depth));
}

}  // namespace riskmcts
