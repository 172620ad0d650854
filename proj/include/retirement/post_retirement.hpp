#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "retirement/error.hpp"
#include "retirement/model.hpp"
#include "retirement/mortality.hpp"
#include "retirement/ode.hpp"

namespace retirement {

/// Solution f(t) of the post-retirement scaling ODE on a uniform time grid.
/// The retired value function is F(t) w^{1-gamma} / (1 - gamma), F = f^gamma.
class FCurve {
public:
    FCurve(ModelParams params, std::vector<double> f)
        : params_(std::move(params)), f_(std::move(f)) {
        if (f_.size() < 2) throw DomainError("FCurve needs at least two nodes");
        step_ = params_.horizon() / static_cast<double>(f_.size() - 1);
    }

    const ModelParams& params() const noexcept { return params_; }
    std::size_t size() const noexcept { return f_.size(); }
    double step() const noexcept { return step_; }
    double horizon() const noexcept { return params_.horizon(); }
    double time(std::size_t i) const noexcept {
        return i + 1 == f_.size() ? horizon() : step_ * static_cast<double>(i);
    }
    const std::vector<double>& values() const noexcept { return f_; }

    /// f at an arbitrary time, linear between nodes.
    double f(double t) const {
        detail::check_time(params_, t);
        const double s = std::clamp(t / step_, 0.0, static_cast<double>(f_.size() - 1));
        const auto i = std::min(static_cast<std::size_t>(s), f_.size() - 2);
        const double theta = s - static_cast<double>(i);
        return (1.0 - theta) * f_[i] + theta * f_[i + 1];
    }

    double F(double t) const { return std::pow(f(t), params_.gamma()); }

    /// f with the analytic leading-order form B (horizon - t) inside the last
    /// grid step, where interpolation error would dominate B w / f.
    double f_near_horizon(double t) const {
        const double remaining = horizon() - t;
        if (remaining < step_) return params_.B() * remaining;
        return f(t);
    }

private:
    ModelParams params_;
    std::vector<double> f_;
    double step_ = 0.0;
};

/// Integrates f' + gamma_tilde [r(1 - gamma) - (rho + lambda_t)] f + B = 0
/// backward from f(horizon) = 0 and samples it on n_steps uniform intervals.
template <HazardRate Hazard>
FCurve solve_f(const ModelParams& p, const Hazard& hazard, std::size_t n_steps,
               OdeTolerance tol = {}) {
    if (n_steps < 100) throw DomainError("solve_f needs n_steps >= 100");

    const double gt = p.gamma_tilde();
    const double base = p.r() * (1.0 - p.gamma()) - p.rho();
    const double B = p.B();
    auto rhs = [&](double t, double f) { return -gt * (base - hazard(t)) * f - B; };

    std::vector<double> f(n_steps + 1);
    f[n_steps] = 0.0;
    const double h = p.horizon() / static_cast<double>(n_steps);
    DormandPrince stepper(tol);
    double t = p.horizon();
    for (std::size_t i = n_steps; i-- > 0;) {
        const double t_next = h * static_cast<double>(i);
        f[i] = stepper.integrate(rhs, t, f[i + 1], t_next);
        t = t_next;
    }
    return FCurve(p, std::move(f));
}

inline FCurve solve_f(const ModelParams& p, std::size_t n_steps) {
    return solve_f(p, gompertz(p), n_steps);
}

/// Step count matching a time step of `dt` years.
inline std::size_t steps_for(const ModelParams& p, double dt) {
    return static_cast<std::size_t>(std::llround(p.horizon() / dt));
}

/// Retired value F(t) w^{1-gamma} / (1 - gamma).
/// w == 0 returns -infinity when gamma > 1 (and 0 when gamma < 1).
inline double value_post(const FCurve& fc, double t, double w) {
    if (w < 0.0 || std::isnan(w)) throw DomainError("value_post: negative wealth");
    const double gamma = fc.params().gamma();
    if (w == 0.0) {
        if (gamma > 1.0) return -std::numeric_limits<double>::infinity();
        return 0.0;
    }
    return fc.F(t) * std::pow(w, 1.0 - gamma) / (1.0 - gamma);
}

/// Marginal retired value dV/dw = F(t) w^{-gamma}.
inline double marginal_value_post(const FCurve& fc, double t, double w) {
    if (!(w > 0.0)) throw DomainError("marginal_value_post: wealth must be positive");
    return fc.F(t) * std::pow(w, -fc.params().gamma());
}

/// Optimal retired consumption B w / f(t).
inline double consumption_post(const FCurve& fc, double t, double w) {
    if (w < 0.0 || std::isnan(w)) throw DomainError("consumption_post: negative wealth");
    detail::check_time(fc.params(), t);
    if (t >= fc.horizon()) {
        throw DomainError("consumption_post: f vanishes at the horizon; consumption is unbounded");
    }
    if (w == 0.0) return 0.0;
    return fc.params().B() * w / fc.f_near_horizon(t);
}

}  // namespace retirement
