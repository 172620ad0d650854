#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "retirement/error.hpp"
#include "retirement/model.hpp"
#include "retirement/mortality.hpp"

namespace retirement {

/// Requested discretisation of the (t, y = ln w) plane.
struct GridSpec {
    double dt = 0.001;
    double dy = 0.02;
    double w_min = 0.01;
    double w_cutoff = 30.0;
    /// Spacing in years of the time slices kept in the solved surface.
    double store_interval = 0.01;
    /// Upper bound on dt |y-drift| / dy enforced through the consumption band.
    double cfl_safety = 0.9;

    static GridSpec coarse() { return {}; }
    static GridSpec fine() {
        GridSpec g;
        g.dt = 0.0005;
        g.dy = 0.01;
        return g;
    }
};

/// Uniform log-wealth / time grid. dt and dy are adjusted so that the grid
/// covers [0, horizon] and [ln w_min, ln w_cutoff] with whole steps.
///
/// Stability: the solver restricts consumption at node y to the band
/// 1 + r w +- cfl_safety w dy / dt, so |y-drift| dt / dy <= cfl_safety, and
/// construction requires cfl_safety + dt (rho + lambda_max) <= 1, which makes
/// every explicit update a convex combination of the previous slice.
class Grid {
public:
    static Grid make(const ModelParams& p, const GridSpec& spec) {
        auto fail = [](const std::string& what) { throw ConfigError("grid: " + what); };
        if (!(spec.dt > 0.0) || !(spec.dy > 0.0)) fail("dt and dy must be positive");
        if (!(spec.w_min > 0.0) || !(spec.w_cutoff > spec.w_min)) {
            fail("need 0 < w_min < w_cutoff");
        }
        if (!(spec.cfl_safety > 0.0 && spec.cfl_safety <= 1.0)) {
            fail("cfl_safety must lie in (0, 1]");
        }
        if (!(spec.store_interval > 0.0)) fail("store_interval must be positive");

        Grid g;
        g.spec_ = spec;
        g.y_min_ = std::log(spec.w_min);
        g.y_max_ = std::log(spec.w_cutoff);
        const double span = g.y_max_ - g.y_min_;
        g.n_y_ = static_cast<std::size_t>(std::llround(span / spec.dy)) + 1;
        if (g.n_y_ < 3) fail("fewer than three wealth nodes");
        g.dy_ = span / static_cast<double>(g.n_y_ - 1);

        g.n_t_ = static_cast<std::size_t>(std::llround(p.horizon() / spec.dt));
        if (g.n_t_ < 1) fail("dt exceeds the horizon");
        g.dt_ = p.horizon() / static_cast<double>(g.n_t_);
        g.horizon_ = p.horizon();
        g.stride_ = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(spec.store_interval / g.dt_)));

        const double lambda_max = gompertz(p)(p.horizon());
        g.reaction_ = g.dt_ * (p.rho() + lambda_max);
        if (spec.cfl_safety + g.reaction_ > 1.0) {
            fail("CFL violated: cfl_safety + dt (rho + lambda_max) = " +
                 std::to_string(spec.cfl_safety + g.reaction_) + " > 1");
        }
        if (p.rho() + lambda_max < 0.0) fail("negative discount intensity");
        return g;
    }

    const GridSpec& spec() const noexcept { return spec_; }
    double y_min() const noexcept { return y_min_; }
    double y_max() const noexcept { return y_max_; }
    double dy() const noexcept { return dy_; }
    double dt() const noexcept { return dt_; }
    double horizon() const noexcept { return horizon_; }
    std::size_t n_y() const noexcept { return n_y_; }
    /// Number of time steps; time nodes are 0..n_t.
    std::size_t n_t() const noexcept { return n_t_; }
    std::size_t store_stride() const noexcept { return stride_; }
    double cfl_safety() const noexcept { return spec_.cfl_safety; }
    /// dt (rho + lambda_max); the CFL margin is 1 - cfl_safety - reaction_number.
    double reaction_number() const noexcept { return reaction_; }
    double w_min() const noexcept { return spec_.w_min; }
    double w_cutoff() const noexcept { return spec_.w_cutoff; }

    double y(std::size_t i) const noexcept {
        return i + 1 == n_y_ ? y_max_ : y_min_ + dy_ * static_cast<double>(i);
    }
    double w(std::size_t i) const noexcept { return std::exp(y(i)); }
    double t(std::size_t n) const noexcept {
        return n == n_t_ ? horizon_ : dt_ * static_cast<double>(n);
    }

    /// Consumption band half-width at wealth w.
    double band(double w) const noexcept { return spec_.cfl_safety * w * dy_ / dt_; }

private:
    GridSpec spec_;
    double y_min_ = 0, y_max_ = 0, dy_ = 0, dt_ = 0, horizon_ = 0, reaction_ = 0;
    std::size_t n_y_ = 0, n_t_ = 0, stride_ = 1;
};

}  // namespace retirement
