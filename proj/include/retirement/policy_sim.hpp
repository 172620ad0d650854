#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "retirement/error.hpp"
#include "retirement/mortality.hpp"
#include "retirement/post_retirement.hpp"
#include "retirement/pre_retirement.hpp"

namespace retirement {

enum class Regime : std::uint8_t { working, retired };

inline const char* to_string(Regime r) { return r == Regime::working ? "working" : "retired"; }

/// Wealth path under a consumption rule. `utility` holds the running integral
/// of e^{-rho s} u(l_s, c_s) spx, integrated together with wealth.
struct Trajectory {
    std::vector<double> times;
    std::vector<double> wealth;
    std::vector<double> consumption;
    std::vector<Regime> regime;
    std::vector<double> utility;
    std::optional<double> retirement_time;
    std::optional<double> retirement_wealth;
    /// Wealth would have gone negative and was held at zero.
    std::size_t floor_events = 0;

    std::size_t size() const noexcept { return times.size(); }
    bool hit_wealth_floor() const noexcept { return floor_events > 0; }

    /// Wealth at time t, linear between nodes.
    double wealth_at(double t) const {
        if (times.empty() || t < times.front() || t > times.back()) {
            throw DomainError("wealth_at: time outside the trajectory");
        }
        const auto it = std::upper_bound(times.begin(), times.end(), t);
        if (it == times.end()) return wealth.back();
        const auto j = static_cast<std::size_t>(it - times.begin());
        const double theta = (t - times[j - 1]) / (times[j] - times[j - 1]);
        return (1.0 - theta) * wealth[j - 1] + theta * wealth[j];
    }
};

struct SimOptions {
    /// RK4 step; 0 selects the PDE time step.
    double step = 0.0;
    /// Multiplies the optimal consumption in both regimes (0 gives the
    /// zero-consumption diagnostic, 1.1 a +10% perturbation).
    double consumption_scale = 1.0;
    /// Retire when wealth reaches the boundary.
    bool voluntary_retirement = true;
    /// End time; defaults to one step before the horizon, where B w / f is singular.
    std::optional<double> t_end;
};

namespace detail {

struct State {
    double w;
    double u;
};

/// Right-hand side of the augmented (wealth, utility) system in one regime.
class Dynamics {
public:
    Dynamics(const ValueSurface& surface, const FCurve& fc, double scale)
        : surface_(surface), fc_(fc), p_(fc.params()), mortality_(gompertz(fc.params())),
          scale_(scale) {}

    double consumption(Regime regime, double t, double w) const {
        if (regime == Regime::retired) {
            if (w <= 0.0) return 0.0;
            return scale_ * p_.B() * w / fc_.f_near_horizon(t);
        }
        double c = scale_ * surface_.consumption(t, w);
        if (w <= 0.0) c = std::min(c, 1.0 + p_.r() * std::max(w, 0.0));
        return c;
    }

    State derivative(Regime regime, double t, const State& s) const {
        const double c = consumption(regime, t, s.w);
        const double income = regime == Regime::working ? 1.0 : 0.0;
        const double weight = std::exp(-p_.rho() * t - mortality_.cumulative(t));
        double felicity = 0.0;
        if (c > 0.0) {
            felicity = regime == Regime::working ? p_.utility_work(c) : p_.utility_retired(c);
        } else if (p_.gamma() > 1.0) {
            felicity = -std::numeric_limits<double>::infinity();
        }
        return {income + p_.r() * s.w - c, weight * felicity};
    }

    State rk4(Regime regime, double t, const State& s, double h) const {
        const State k1 = derivative(regime, t, s);
        const State k2 = derivative(regime, t + h / 2, {s.w + h / 2 * k1.w, 0.0});
        const State k3 = derivative(regime, t + h / 2, {s.w + h / 2 * k2.w, 0.0});
        const State k4 = derivative(regime, t + h, {s.w + h * k3.w, 0.0});
        return {s.w + h / 6 * (k1.w + 2 * k2.w + 2 * k3.w + k4.w),
                s.u + h / 6 * (k1.u + 2 * k2.u + 2 * k3.u + k4.u)};
    }

private:
    const ValueSurface& surface_;
    const FCurve& fc_;
    const ModelParams& p_;
    GompertzHazard mortality_;
    double scale_;
};

inline double boundary_or_inf(const BoundaryCurve& b, double t) {
    const auto w = b.at(t);
    return w ? *w : std::numeric_limits<double>::infinity();
}

}  // namespace detail

/// Integrates wealth forward from (t0, w0) with fixed-step RK4. Working
/// consumption comes from the pre-retirement policy and retired consumption
/// from B w / f. Retirement happens when wealth reaches w_bar_t (located by
/// bisection inside the step) or at `forced_retirement`.
inline Trajectory simulate(const ValueSurface& surface, const BoundaryCurve& boundary,
                           const FCurve& fc, double w0, double t0,
                           std::optional<double> forced_retirement = std::nullopt,
                           SimOptions options = {}) {
    const ModelParams& p = fc.params();
    const double h = options.step > 0.0 ? options.step : surface.grid().dt();
    const double t_end = options.t_end.value_or(p.horizon() - h);
    if (!(w0 >= 0.0) || !std::isfinite(w0)) throw DomainError("simulate: w0 must be >= 0");
    if (!(t0 >= 0.0 && t0 < t_end)) throw DomainError("simulate: t0 outside [0, t_end)");
    if (t_end >= p.horizon()) throw DomainError("simulate: t_end must precede the horizon");
    if (forced_retirement && *forced_retirement < t0) {
        throw DomainError("simulate: forced retirement precedes t0");
    }
    if (h > surface.grid().dt() * (1 + 1e-12)) {
        throw DomainError("simulate: step exceeds the PDE time step");
    }

    const detail::Dynamics dyn(surface, fc, options.consumption_scale);
    Trajectory traj;
    auto push = [&](double t, const detail::State& s, Regime regime) {
        traj.times.push_back(t);
        traj.wealth.push_back(s.w);
        traj.consumption.push_back(dyn.consumption(regime, t, s.w));
        traj.regime.push_back(regime);
        traj.utility.push_back(s.u);
    };

    Regime regime = Regime::working;
    detail::State s{w0, 0.0};
    if ((forced_retirement && *forced_retirement <= t0) ||
        (options.voluntary_retirement && w0 >= detail::boundary_or_inf(boundary, t0))) {
        regime = Regime::retired;
        traj.retirement_time = t0;
        traj.retirement_wealth = w0;
    }
    push(t0, s, regime);

    auto clamp_floor = [&](detail::State& st) {
        if (st.w < 0.0) {
            st.w = 0.0;
            ++traj.floor_events;
        }
    };

    const auto steps = static_cast<std::size_t>(std::ceil((t_end - t0) / h - 1e-9));
    for (std::size_t k = 0; k < steps; ++k) {
        const double t = t0 + h * static_cast<double>(k);
        const double t_next = k + 1 == steps ? t_end : t0 + h * static_cast<double>(k + 1);
        const double step = t_next - t;

        if (regime == Regime::retired) {
            s = dyn.rk4(regime, t, s, step);
            clamp_floor(s);
            push(t_next, s, regime);
            continue;
        }

        detail::State trial = dyn.rk4(regime, t, s, step);
        clamp_floor(trial);

        // Earliest switch inside this step, if any.
        std::optional<double> switch_after;
        if (forced_retirement && *forced_retirement > t && *forced_retirement <= t_next) {
            switch_after = *forced_retirement - t;
        }
        if (options.voluntary_retirement &&
            trial.w >= detail::boundary_or_inf(boundary, t_next)) {
            double lo = 0.0, hi = step;
            for (int it = 0; it < 60 && hi - lo > 1e-13; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double w_mid = dyn.rk4(regime, t, s, mid).w;
                if (w_mid >= detail::boundary_or_inf(boundary, t + mid)) hi = mid;
                else lo = mid;
            }
            if (!switch_after || hi < *switch_after) switch_after = hi;
        }

        if (!switch_after) {
            s = trial;
            push(t_next, s, regime);
            continue;
        }

        const double tau = *switch_after;
        if (tau > 0.0) {
            s = dyn.rk4(regime, t, s, tau);
            clamp_floor(s);
        }
        regime = Regime::retired;
        traj.retirement_time = t + tau;
        traj.retirement_wealth = s.w;
        if (tau > 0.0) push(t + tau, s, regime);
        if (step - tau > 1e-13) {
            s = dyn.rk4(regime, t + tau, s, step - tau);
            clamp_floor(s);
            push(t_next, s, regime);
        } else if (traj.times.back() != t_next) {
            push(t_next, s, regime);
        }
    }
    return traj;
}

/// Z_t: utility collected up to t plus discounted, survival-weighted value of
/// continuing optimally from (t, w_t) in the current regime.
inline std::vector<double> z_process(const ValueSurface& surface, const FCurve& fc,
                                     const Trajectory& traj) {
    const ModelParams& p = fc.params();
    const Grid& g = surface.grid();
    const auto mortality = gompertz(p);
    std::vector<double> z(traj.size());
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const double t = traj.times[k];
        const double w = traj.wealth[k];
        const double weight = std::exp(-p.rho() * t - mortality.cumulative(t));
        const double value = traj.regime[k] == Regime::retired
                                 ? value_post(fc, t, w)
                                 : surface.value(t, std::clamp(w, g.w_min(), g.w_cutoff()));
        z[k] = traj.utility[k] + weight * value;
    }
    return z;
}

/// Backward working-phase paths from points on the retirement boundary and
/// their common (coalesced) part.
struct UncommittedCurve {
    std::vector<double> times;
    std::vector<double> wealth;                 ///< mean of the backward paths
    std::vector<double> retirement_times;
    std::vector<std::vector<double>> paths;     ///< per retirement time, on `times`
    double w_tilde = 0.0;                       ///< wealth at t = 0
    double spread = 0.0;                        ///< (max - min) / mean at t = 0

    double at(double t) const {
        constexpr double slack = 1e-9;
        if (times.empty() || t < times.front() - slack || t > times.back() + slack) {
            throw DomainError("uncommitted curve undefined at t = " + std::to_string(t));
        }
        t = std::clamp(t, times.front(), times.back());
        const auto it = std::upper_bound(times.begin(), times.end(), t);
        if (it == times.end()) return wealth.back();
        const auto j = static_cast<std::size_t>(it - times.begin());
        const double theta = (t - times[j - 1]) / (times[j] - times[j - 1]);
        return (1.0 - theta) * wealth[j - 1] + theta * wealth[j];
    }
};

/// Backward paths did not meet within tolerance.
class CoalescenceError : public SolverError {
public:
    CoalescenceError(double spread, std::vector<double> endpoints)
        : SolverError(describe(spread, endpoints)), spread_(spread),
          endpoints_(std::move(endpoints)) {}
    double spread() const noexcept { return spread_; }
    const std::vector<double>& endpoints() const noexcept { return endpoints_; }

private:
    static std::string describe(double spread, const std::vector<double>& ends) {
        std::string msg = "backward paths do not coalesce: relative spread " +
                          std::to_string(spread) + " at t = 0 (values";
        for (const double e : ends) msg += " " + std::to_string(e);
        return msg + ")";
    }
    double spread_;
    std::vector<double> endpoints_;
};

struct UncommittedOptions {
    double tolerance = 0.01;
    double step = 0.0;  ///< 0 selects the PDE time step
};

/// Integrates the working dynamics backward in time from (t_r, w_bar_{t_r})
/// to t = 0 for every retirement time t_r (model years). Wealth is held at
/// zero if a backward path would go negative.
inline UncommittedCurve uncommitted_curve(const ValueSurface& surface,
                                          const BoundaryCurve& boundary, const FCurve& fc,
                                          const std::vector<double>& retirement_times,
                                          UncommittedOptions options = {}) {
    if (retirement_times.size() < 2) {
        throw DomainError("uncommitted_curve needs at least two retirement times");
    }
    const double horizon = fc.horizon();
    const double h = options.step > 0.0 ? options.step : surface.grid().dt();
    const detail::Dynamics dyn(surface, fc, 1.0);

    const double t_common = *std::min_element(retirement_times.begin(), retirement_times.end());
    const auto n_common = static_cast<std::size_t>(std::floor(t_common / h + 1e-9));

    UncommittedCurve out;
    out.retirement_times = retirement_times;
    out.times.resize(n_common + 1);
    for (std::size_t k = 0; k <= n_common; ++k) out.times[k] = h * static_cast<double>(k);

    for (const double t_r : retirement_times) {
        if (!(t_r > 0.0 && t_r < horizon)) {
            throw DomainError("retirement time " + std::to_string(t_r) + " not inside (0, horizon)");
        }
        const auto w_r = boundary.at(t_r);
        if (!w_r) throw DomainError("no boundary at retirement time " + std::to_string(t_r));

        // Partial step back to the last grid time at or below t_r, then whole steps.
        auto k = static_cast<std::size_t>(std::floor(t_r / h + 1e-9));
        detail::State s{*w_r, 0.0};
        const double first = t_r - h * static_cast<double>(k);
        if (first > 1e-13) s = dyn.rk4(Regime::working, t_r, s, -first);
        s.w = std::max(s.w, 0.0);

        std::vector<double> path(n_common + 1);
        if (k <= n_common) path[k] = s.w;
        while (k > 0) {
            s = dyn.rk4(Regime::working, h * static_cast<double>(k), s, -h);
            s.w = std::max(s.w, 0.0);
            --k;
            if (k <= n_common) path[k] = s.w;
        }
        out.paths.push_back(std::move(path));
    }

    out.wealth.resize(n_common + 1);
    for (std::size_t k = 0; k <= n_common; ++k) {
        double sum = 0.0;
        for (const auto& path : out.paths) sum += path[k];
        out.wealth[k] = sum / static_cast<double>(out.paths.size());
    }
    std::vector<double> ends;
    for (const auto& path : out.paths) ends.push_back(path.front());
    const auto [lo, hi] = std::minmax_element(ends.begin(), ends.end());
    out.w_tilde = out.wealth.front();
    out.spread = out.w_tilde > 0.0 ? (*hi - *lo) / out.w_tilde
                                   : std::numeric_limits<double>::infinity();
    if (!(out.spread <= options.tolerance)) throw CoalescenceError(out.spread, ends);
    return out;
}

enum class Classification { retire_now, save_to_retire, never_retire, critical };

inline const char* to_string(Classification c) {
    switch (c) {
        case Classification::retire_now: return "retire_now";
        case Classification::save_to_retire: return "save_to_retire";
        case Classification::never_retire: return "never_retire";
        case Classification::critical: return "critical";
    }
    return "?";
}

/// Region of the (t, w) plane containing (t0, w0). "critical" means within
/// the coalescence spread of the uncommitted curve.
inline Classification classify(const BoundaryCurve& boundary, const UncommittedCurve& uncommitted,
                               double w0, double t0) {
    if (!(w0 >= 0.0)) throw DomainError("classify: negative wealth");
    const auto w_bar = boundary_at(boundary, t0);
    if (w_bar && w0 >= *w_bar) return Classification::retire_now;
    const double w_u = uncommitted.at(t0);
    if (std::abs(w0 - w_u) <= uncommitted.spread * w_u) return Classification::critical;
    return w0 < w_u ? Classification::never_retire : Classification::save_to_retire;
}

/// Voluntary retirement happened strictly before `t` (used to separate true
/// retirement from the end-of-life collapse of the boundary).
inline bool retires_before(const Trajectory& traj, double t) {
    return traj.retirement_time && *traj.retirement_time < t;
}

}  // namespace retirement
