#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "retirement/error.hpp"
#include "retirement/grid.hpp"
#include "retirement/model.hpp"
#include "retirement/mortality.hpp"
#include "retirement/post_retirement.hpp"

namespace retirement {

/// Consumption choice at one node together with the upwind slope it pairs with.
struct NodeControl {
    double c = 0.0;
    double drift = 0.0;      ///< y-drift (1 + r w - c) / w
    double slope = 0.0;      ///< one-sided dV/dy on the upwind side (0 when drift is 0)
    double felicity = 0.0;   ///< u(c)
    bool clamped = false;    ///< dV/dy was floored before taking the power
    bool capped = false;     ///< consumption hit the CFL band
};

/// Upwind consumption rule shared by the time march and the stored policy.
///
/// Forward differences are used where the wealth drift is positive, backward
/// where it is negative; if both one-sided choices are self-consistent the one
/// with the larger Hamiltonian wins, and if neither is, consumption equals
/// income plus interest (zero drift). The bottom node may not drift down
/// (no borrowing) and the top node may not drift up.
class UpwindStencil {
public:
    static constexpr double slope_floor = 1e-12;

    UpwindStencil(const ModelParams& p, const Grid& g) : p_(p), inv_dy_(1.0 / g.dy()) {
        const std::size_t n = g.n_y();
        inv_w_.resize(n);
        zero_.resize(n);
        lo_.resize(n);
        hi_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double w = g.w(i);
            inv_w_[i] = 1.0 / w;
            zero_[i] = 1.0 + p.r() * w;
            lo_[i] = std::max(zero_[i] - g.band(w), 1e-300);
            hi_[i] = zero_[i] + g.band(w);
        }
        hi_.front() = zero_.front();
        lo_.back() = zero_.back();
    }

    NodeControl operator()(std::span<const double> v, std::size_t i) const {
        const std::size_t last = v.size() - 1;
        NodeControl fwd, bwd;
        bool fwd_ok = false, bwd_ok = false;
        if (i < last) {
            fwd = candidate((v[i + 1] - v[i]) * inv_dy_, i);
            fwd_ok = fwd.drift > 0.0;
        }
        if (i > 0) {
            bwd = candidate((v[i] - v[i - 1]) * inv_dy_, i);
            bwd_ok = bwd.drift < 0.0;
        }
        if (fwd_ok && bwd_ok) {
            fwd.felicity = p_.utility_work(fwd.c);
            bwd.felicity = p_.utility_work(bwd.c);
            return fwd.felicity + fwd.drift * fwd.slope >= bwd.felicity + bwd.drift * bwd.slope
                       ? fwd
                       : bwd;
        }
        NodeControl out;
        if (fwd_ok) {
            out = fwd;
        } else if (bwd_ok) {
            out = bwd;
        } else {
            out.c = zero_[i];
        }
        out.felicity = p_.utility_work(out.c);
        return out;
    }

private:
    NodeControl candidate(double slope, std::size_t i) const {
        NodeControl k;
        k.slope = slope;
        double s = slope;
        if (!(s >= slope_floor)) {
            s = slope_floor;
            k.clamped = true;
        }
        k.c = std::pow(s * inv_w_[i], -p_.gamma_tilde());
        if (k.c > hi_[i]) {
            k.c = hi_[i];
            k.capped = true;
        } else if (k.c < lo_[i]) {
            k.c = lo_[i];
            k.capped = true;
        }
        k.drift = (zero_[i] - k.c) * inv_w_[i];
        return k;
    }

    const ModelParams& p_;
    double inv_dy_;
    std::vector<double> inv_w_, zero_, lo_, hi_;
};

/// Optimal retirement wealth w_bar_t on the full time grid; NaN where absent.
struct BoundaryCurve {
    std::vector<double> times;
    std::vector<double> w_bar;

    /// Linear interpolation; empty if either bracketing node is undefined.
    std::optional<double> at(double t) const {
        if (times.empty() || t < times.front() || t > times.back()) return std::nullopt;
        const double step = times.size() > 1 ? times[1] - times[0] : 1.0;
        auto i = static_cast<std::size_t>(t / step);
        i = std::min(i, times.size() - 2);
        const double theta = std::clamp((t - times[i]) / (times[i + 1] - times[i]), 0.0, 1.0);
        const double a = w_bar[i], b = w_bar[i + 1];
        if (std::isnan(a) || std::isnan(b)) {
            if (theta == 0.0 && !std::isnan(a)) return a;
            if (theta == 1.0 && !std::isnan(b)) return b;
            return std::nullopt;
        }
        return (1.0 - theta) * a + theta * b;
    }
};

inline std::optional<double> boundary_at(const BoundaryCurve& curve, double t) {
    constexpr double slack = 1e-9;
    if (curve.times.empty() || t < -slack || t > curve.times.back() + slack) {
        throw DomainError("boundary_at: time " + std::to_string(t) + " out of range");
    }
    return curve.at(std::clamp(t, 0.0, curve.times.back()));
}

/// Pre-retirement value V1 on stored time slices of the grid, with the
/// retirement mask, the node policy and the per-slice boundary.
class ValueSurface {
public:
    ValueSurface(ModelParams p, Grid g) : params_(std::move(p)), grid_(std::move(g)) {
        const std::size_t n_t = grid_.n_t();
        const std::size_t stride = grid_.store_stride();
        slices_ = n_t / stride + 1 + (n_t % stride != 0 ? 1 : 0);
        times_.resize(slices_);
        for (std::size_t k = 0; k < slices_; ++k) {
            times_[k] = k + 1 == slices_ ? grid_.horizon() : grid_.t(k * stride);
        }
        const std::size_t cells = slices_ * grid_.n_y();
        v1_.assign(cells, 0.0);
        policy_.assign(cells, 0.0);
        retired_.assign(cells, 0);
        boundary_.assign(slices_, std::numeric_limits<double>::quiet_NaN());
    }

    const ModelParams& params() const noexcept { return params_; }
    const Grid& grid() const noexcept { return grid_; }
    std::size_t slice_count() const noexcept { return slices_; }
    double slice_time(std::size_t k) const noexcept { return times_[k]; }

    std::span<const double> v1(std::size_t k) const { return row(v1_, k); }
    std::span<const double> policy(std::size_t k) const { return row(policy_, k); }
    std::span<const std::uint8_t> retired(std::size_t k) const {
        return {retired_.data() + k * grid_.n_y(), grid_.n_y()};
    }
    double slice_boundary(std::size_t k) const { return boundary_[k]; }

    /// Slot holding time node n, if that node is stored.
    std::optional<std::size_t> slot_of(std::size_t n) const {
        if (n == grid_.n_t()) return slices_ - 1;
        if (n % grid_.store_stride() == 0) return n / grid_.store_stride();
        return std::nullopt;
    }

    /// V1 bilinear in (t, ln w). Wealth must lie on the grid.
    double value(double t, double w) const {
        check(t, w);
        return interpolate(v1_, t, std::log(w));
    }

    /// Node policy bilinear in (t, ln w), with w clamped onto the grid.
    /// No region check; see consumption_pre for the checked version.
    double consumption(double t, double w) const {
        const double y = std::clamp(std::log(std::max(w, grid_.w_min())), grid_.y_min(),
                                    grid_.y_max());
        return interpolate(policy_, std::clamp(t, 0.0, grid_.horizon()), y);
    }

    /// Boundary interpolated between stored slices; NaN when absent.
    double stored_boundary(double t) const {
        const auto [k, theta] = locate_time(t);
        const double a = boundary_[k], b = boundary_[k + 1];
        return (1.0 - theta) * a + theta * b;
    }

    // Mutable access for the solver.
    std::span<double> v1_mut(std::size_t k) { return row_mut(v1_, k); }
    std::span<double> policy_mut(std::size_t k) { return row_mut(policy_, k); }
    std::span<std::uint8_t> retired_mut(std::size_t k) {
        return {retired_.data() + k * grid_.n_y(), grid_.n_y()};
    }
    void set_slice_boundary(std::size_t k, double w) { boundary_[k] = w; }

private:
    std::span<const double> row(const std::vector<double>& a, std::size_t k) const {
        return {a.data() + k * grid_.n_y(), grid_.n_y()};
    }
    std::span<double> row_mut(std::vector<double>& a, std::size_t k) {
        return {a.data() + k * grid_.n_y(), grid_.n_y()};
    }

    void check(double t, double w) const {
        constexpr double slack = 1e-9;
        if (t < -slack || t > grid_.horizon() + slack) {
            throw DomainError("time " + std::to_string(t) + " outside the grid");
        }
        if (!(w >= grid_.w_min() * (1 - slack) && w <= grid_.w_cutoff() * (1 + slack))) {
            throw DomainError("wealth " + std::to_string(w) + " outside the grid [" +
                              std::to_string(grid_.w_min()) + ", " +
                              std::to_string(grid_.w_cutoff()) + "]");
        }
    }

    std::pair<std::size_t, double> locate_time(double t) const {
        const double span = grid_.dt() * static_cast<double>(grid_.store_stride());
        t = std::clamp(t, 0.0, grid_.horizon());
        auto k = static_cast<std::size_t>(t / span);
        k = std::min(k, slices_ - 2);
        if (t > times_[k + 1]) ++k;  // only possible in the short last interval
        k = std::min(k, slices_ - 2);
        const double theta = std::clamp((t - times_[k]) / (times_[k + 1] - times_[k]), 0.0, 1.0);
        return {k, theta};
    }

    double interpolate(const std::vector<double>& a, double t, double y) const {
        const auto [k, theta] = locate_time(t);
        const std::size_t n = grid_.n_y();
        y = std::clamp(y, grid_.y_min(), grid_.y_max());
        const double s = (y - grid_.y_min()) / grid_.dy();
        auto i = std::min(static_cast<std::size_t>(s), n - 2);
        const double phi = std::clamp(s - static_cast<double>(i), 0.0, 1.0);
        const double* lo = a.data() + k * n;
        const double* hi = lo + n;
        const double at_lo = (1.0 - phi) * lo[i] + phi * lo[i + 1];
        const double at_hi = (1.0 - phi) * hi[i] + phi * hi[i + 1];
        return (1.0 - theta) * at_lo + theta * at_hi;
    }

    ModelParams params_;
    Grid grid_;
    std::size_t slices_ = 0;
    std::vector<double> times_;
    std::vector<double> v1_;
    std::vector<double> policy_;
    std::vector<std::uint8_t> retired_;
    std::vector<double> boundary_;
};

struct SolverDiagnostics {
    std::size_t steps = 0;
    std::size_t clamp_count = 0;    ///< floored dV/dy on the chosen stencil
    std::size_t capped_count = 0;   ///< consumption held at the CFL band
    double max_cfl = 0.0;           ///< max dt |y-drift| / dy over the march
    double cfl_margin = 0.0;        ///< 1 - max_cfl - dt (rho + lambda_max)
    double pasting_mismatch = std::numeric_limits<double>::quiet_NaN();  ///< at t = 0, relative
};

struct PdeOptions {
    /// false solves the never-retire problem (no comparison with the retired value).
    bool obstacle = true;
};

struct PreRetirementSolution {
    ValueSurface surface;
    BoundaryCurve boundary;
    SolverDiagnostics diagnostics;
};

namespace detail {

/// Wealth where the top contiguous retired run starts, refined by linear
/// interpolation of (continuation - obstacle). NaN if only the Dirichlet top
/// node is retired while its continuation value is still above the obstacle.
inline double locate_boundary(const Grid& g, std::span<const double> cont,
                              std::span<const double> obstacle,
                              std::span<const std::uint8_t> retired) {
    const std::size_t top = g.n_y() - 1;
    std::size_t j = top;
    while (j > 0 && retired[j - 1]) --j;
    if (j == 0) return g.w(0);
    const double d1 = cont[j] - obstacle[j];
    if (j == top && d1 > 0.0) return std::numeric_limits<double>::quiet_NaN();
    const double d0 = cont[j - 1] - obstacle[j - 1];
    const double theta = d0 > d1 ? std::clamp(d0 / (d0 - d1), 0.0, 1.0) : 1.0;
    return std::exp(g.y(j - 1) + theta * g.dy());
}

}  // namespace detail

/// Marches the pre-retirement HJB equation backward from V1(horizon) = 0 on
/// the log-wealth grid with an explicit upwind scheme, comparing with the
/// retired value F(t) w^{1-gamma}/(1-gamma) after every step.
inline PreRetirementSolution solve_pde(const ModelParams& p, const Grid& g, const FCurve& fc,
                                       PdeOptions options = {}) {
    if (std::abs(fc.horizon() - g.horizon()) > 1e-9 * g.horizon()) {
        throw DomainError("solve_pde: FCurve and grid cover different horizons");
    }

    const std::size_t n = g.n_y();
    const std::size_t top = n - 1;
    const double dt = g.dt();
    const double gamma = p.gamma();
    const auto hazard = gompertz(p);
    const UpwindStencil stencil(p, g);

    std::vector<double> w_pow(n);
    for (std::size_t i = 0; i < n; ++i) {
        w_pow[i] = std::pow(g.w(i), 1.0 - gamma) / (1.0 - gamma);
    }

    PreRetirementSolution out{ValueSurface(p, g), BoundaryCurve{}, SolverDiagnostics{}};
    ValueSurface& surface = out.surface;
    BoundaryCurve& boundary = out.boundary;
    SolverDiagnostics& diag = out.diagnostics;

    boundary.times.resize(g.n_t() + 1);
    boundary.w_bar.assign(g.n_t() + 1, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t m = 0; m <= g.n_t(); ++m) boundary.times[m] = g.t(m);

    std::vector<double> v(n, 0.0), next(n), cont(n), obstacle(n);
    std::vector<std::uint8_t> retired(n, 1);

    auto store = [&](std::size_t m, double w_bar) {
        const auto slot = surface.slot_of(m);
        if (!slot) return;
        std::ranges::copy(v, surface.v1_mut(*slot).begin());
        std::ranges::copy(retired, surface.retired_mut(*slot).begin());
        auto pol = surface.policy_mut(*slot);
        for (std::size_t i = 0; i < n; ++i) pol[i] = stencil(v, i).c;
        surface.set_slice_boundary(*slot, w_bar);
    };

    // At the horizon both values vanish, so every node counts as retired.
    if (!options.obstacle) std::ranges::fill(retired, 0);
    boundary.w_bar[g.n_t()] = options.obstacle ? g.w(0) : std::numeric_limits<double>::quiet_NaN();
    store(g.n_t(), boundary.w_bar[g.n_t()]);

    for (std::size_t m = g.n_t(); m-- > 0;) {
        const double t_prev = g.t(m + 1);
        const double t_now = g.t(m);
        const double discount = p.rho() + hazard(t_prev);
        const double F_now = fc.F(t_now);

        double step_cfl = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const NodeControl k = stencil(v, i);
            cont[i] = v[i] + dt * (k.felicity + k.drift * k.slope - discount * v[i]);
            step_cfl = std::max(step_cfl, std::abs(k.drift) * dt / g.dy());
            if (k.clamped) ++diag.clamp_count;
            if (k.capped) ++diag.capped_count;
        }

        for (std::size_t i = 0; i < n; ++i) {
            obstacle[i] = F_now * w_pow[i];
            if (options.obstacle) {
                const bool bind = i == top || cont[i] <= obstacle[i];
                retired[i] = bind ? 1 : 0;
                next[i] = bind ? obstacle[i] : cont[i];
            } else {
                retired[i] = 0;
                next[i] = cont[i];
            }
            if (!std::isfinite(next[i])) {
                throw SolverError("non-finite value at t = " + std::to_string(t_now) +
                                  ", w = " + std::to_string(g.w(i)));
            }
        }

        if (!(step_cfl <= g.cfl_safety() * (1.0 + 1e-12))) {
            throw SolverError("CFL breached at t = " + std::to_string(t_now) +
                              ": dt |drift| / dy = " + std::to_string(step_cfl));
        }
        diag.max_cfl = std::max(diag.max_cfl, step_cfl);

        const double w_bar = options.obstacle ? detail::locate_boundary(g, cont, obstacle, retired)
                                              : std::numeric_limits<double>::quiet_NaN();
        boundary.w_bar[m] = w_bar;
        v.swap(next);
        ++diag.steps;
        store(m, w_bar);
    }

    diag.cfl_margin = 1.0 - diag.max_cfl - g.reaction_number();

    if (options.obstacle) {
        // Smooth-pasting check at t = 0: slope just left of the boundary
        // against the retired marginal value there.
        auto r0 = surface.retired(0);
        std::size_t j = top;
        while (j > 0 && r0[j - 1]) --j;
        if (j >= 2 && j < top) {
            const auto v0 = surface.v1(0);
            const double w = g.w(j - 1);
            const double left = (v0[j - 1] - v0[j - 2]) / g.dy() / w;
            const double retired_slope = marginal_value_post(fc, 0.0, w);
            diag.pasting_mismatch = std::abs(left - retired_slope) / std::abs(retired_slope);
        }
    }
    return out;
}

/// Convenience: solve the retired ODE on the grid's time step, then the PDE.
struct FullSolution {
    FCurve fcurve;
    PreRetirementSolution pre;
};

inline FullSolution solve_model(const ModelParams& p, const GridSpec& spec, PdeOptions options = {}) {
    const Grid g = Grid::make(p, spec);
    FCurve fc = solve_f(p, g.n_t());
    PreRetirementSolution pre = solve_pde(p, g, fc, options);
    return {std::move(fc), std::move(pre)};
}

/// Pre-retirement optimal consumption (V1_w)^{-gamma_tilde} from the upwind
/// node policy. Only valid strictly inside the working region.
inline double consumption_pre(const ValueSurface& s, double t, double w) {
    const Grid& g = s.grid();
    constexpr double slack = 1e-9;
    if (t < -slack || t > g.horizon() + slack) {
        throw DomainError("consumption_pre: time " + std::to_string(t) + " outside the grid");
    }
    if (!(w >= g.w_min() * (1 - slack) && w <= g.w_cutoff() * (1 + slack))) {
        throw DomainError("consumption_pre: wealth " + std::to_string(w) + " outside the grid");
    }
    const double w_bar = s.stored_boundary(t);
    if (!std::isnan(w_bar) && w > w_bar * (1.0 + slack)) {
        throw DomainError("consumption_pre: (t, w) lies in the retirement region; use consumption_post");
    }
    return s.consumption(t, w);
}

/// Max-norm residual of the pre-retirement HJB equation on stored slices,
/// restricted to continuation nodes whose neighbours are also continuation
/// nodes, t <= t_max and w in [w_lo, w_hi].
inline double hjb_residual(const ValueSurface& s, double t_max, double w_lo, double w_hi) {
    const Grid& g = s.grid();
    const ModelParams& p = s.params();
    const auto hazard = gompertz(p);
    const double gt = p.gamma_tilde();
    double worst = 0.0;
    for (std::size_t k = 1; k + 1 < s.slice_count(); ++k) {
        const double t = s.slice_time(k);
        if (t > t_max) break;
        const auto v = s.v1(k), prev = s.v1(k - 1), nxt = s.v1(k + 1);
        const auto ret = s.retired(k);
        const auto ret_prev = s.retired(k - 1), ret_next = s.retired(k + 1);
        const double dt = s.slice_time(k + 1) - s.slice_time(k - 1);
        for (std::size_t i = 1; i + 1 < g.n_y(); ++i) {
            const double w = g.w(i);
            if (w < w_lo || w > w_hi) continue;
            if (ret[i - 1] || ret[i] || ret[i + 1] || ret_prev[i] || ret_next[i]) continue;
            const double v_t = (nxt[i] - prev[i]) / dt;
            const double v_w = (v[i + 1] - v[i - 1]) / (2.0 * g.dy()) / w;
            if (!(v_w > 0.0)) continue;
            const double res = v_t - (p.rho() + hazard(t)) * v[i] + (1.0 + p.r() * w) * v_w -
                               std::pow(v_w, 1.0 - gt) / (1.0 - gt);
            worst = std::max(worst, std::abs(res));
        }
    }
    return worst;
}

}  // namespace retirement
