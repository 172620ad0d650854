#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <string>
#include <vector>

#include "retirement/error.hpp"
#include "retirement/model.hpp"

namespace retirement {

/// Any callable mapping model time (years) to a mortality intensity (per year).
template <typename H>
concept HazardRate = requires(const H& h, double t) {
    { h(t) } -> std::convertible_to<double>;
};

/// Gompertz law lambda_t = (1/b) exp((x + t - m) / b). No domain checks; use
/// hazard() for the checked entry point.
struct GompertzHazard {
    double x;
    double m;
    double b;

    double operator()(double t) const { return std::exp((x + t - m) / b) / b; }

    /// Integrated hazard on [0, t].
    double cumulative(double t) const { return std::exp((x - m) / b) * std::expm1(t / b); }
};

inline GompertzHazard gompertz(const ModelParams& p) { return {p.x(), p.m(), p.b()}; }

/// Constant intensity; handy for constructed test cases.
struct ConstantHazard {
    double rate;
    double operator()(double) const { return rate; }
};

namespace detail {

inline void check_time(const ModelParams& p, double t) {
    constexpr double slack = 1e-9;
    if (!(t >= -slack && t <= p.horizon() + slack)) {
        throw DomainError("time " + std::to_string(t) + " outside [0, " +
                          std::to_string(p.horizon()) + "]");
    }
}

}  // namespace detail

inline double hazard(const ModelParams& p, double t) {
    detail::check_time(p, t);
    return gompertz(p)(t);
}

/// Probability of surviving from age x to age x + t (closed form).
inline double survival(const ModelParams& p, double t) {
    detail::check_time(p, t);
    return std::exp(-gompertz(p).cumulative(t));
}

struct SurvivalCurve {
    std::vector<double> times;
    std::vector<double> values;
};

/// Survival on a uniform grid of n_steps intervals over [0, horizon].
inline SurvivalCurve survival_curve(const ModelParams& p, std::size_t n_steps) {
    if (n_steps == 0) throw DomainError("survival_curve needs at least one step");
    SurvivalCurve curve;
    curve.times.resize(n_steps + 1);
    curve.values.resize(n_steps + 1);
    const double h = p.horizon() / static_cast<double>(n_steps);
    for (std::size_t i = 0; i <= n_steps; ++i) {
        const double t = i == n_steps ? p.horizon() : h * static_cast<double>(i);
        curve.times[i] = t;
        curve.values[i] = survival(p, t);
    }
    return curve;
}

}  // namespace retirement
