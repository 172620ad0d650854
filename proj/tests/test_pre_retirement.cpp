#include <gtest/gtest.h>

#include <cmath>

#include "retirement/pre_retirement.hpp"

using namespace retirement;

namespace {

const FullSolution& base() {
    static const FullSolution s = solve_model(default_params(), GridSpec::coarse());
    return s;
}

const FullSolution& never_retire() {
    PdeOptions o;
    o.obstacle = false;
    static const FullSolution s = solve_model(default_params(), GridSpec::coarse(), o);
    return s;
}

const FullSolution& high_rate() {
    static const FullSolution s = solve_model(default_params().with_r(0.035), GridSpec::coarse());
    return s;
}

double obstacle(const FCurve& fc, double t, double w) { return value_post(fc, t, w); }

}  // namespace

TEST(SolvePde, TerminalSliceIsZero) {
    const ValueSurface& s = base().pre.surface;
    const std::size_t last = s.slice_count() - 1;
    EXPECT_EQ(s.slice_time(last), 80.0);
    for (const double v : s.v1(last)) EXPECT_EQ(v, 0.0);
}

TEST(SolvePde, ObstacleDominanceAndMask) {
    const ValueSurface& s = base().pre.surface;
    const FCurve& fc = base().fcurve;
    const Grid& g = s.grid();
    for (std::size_t k = 0; k + 1 < s.slice_count(); ++k) {
        const double t = s.slice_time(k);
        const auto v = s.v1(k);
        const auto ret = s.retired(k);
        for (std::size_t i = 0; i < g.n_y(); ++i) {
            const double vb = obstacle(fc, t, g.w(i));
            ASSERT_GE(v[i], vb - 1e-12 * std::abs(vb)) << "t = " << t << " w = " << g.w(i);
            if (ret[i]) {
                ASSERT_EQ(v[i], vb);
            }
        }
    }
}

TEST(SolvePde, ValueIncreasesWithWealth) {
    const ValueSurface& s = base().pre.surface;
    for (std::size_t k = 0; k < s.slice_count(); ++k) {
        const auto v = s.v1(k);
        for (std::size_t i = 1; i < v.size(); ++i) ASSERT_GE(v[i], v[i - 1]);
    }
}

TEST(SolvePde, RetiredAboveBoundary) {
    const ValueSurface& s = base().pre.surface;
    const Grid& g = s.grid();
    for (std::size_t k = 0; k + 1 < s.slice_count(); ++k) {
        const double w_bar = s.slice_boundary(k);
        ASSERT_FALSE(std::isnan(w_bar));
        const auto ret = s.retired(k);
        for (std::size_t i = 0; i < g.n_y(); ++i) {
            if (g.w(i) >= w_bar) {
                ASSERT_TRUE(ret[i]) << "t = " << s.slice_time(k);
            }
        }
    }
}

TEST(SolvePde, NeverRetireValueIsALowerBound) {
    const ValueSurface& a = base().pre.surface;
    const ValueSurface& b = never_retire().pre.surface;
    ASSERT_EQ(a.slice_count(), b.slice_count());
    for (std::size_t k = 0; k < a.slice_count(); ++k) {
        const auto va = a.v1(k), vb = b.v1(k);
        for (std::size_t i = 0; i < va.size(); ++i) ASSERT_GE(va[i], vb[i]);
    }
    for (const auto r : b.retired(0)) EXPECT_EQ(r, 0);
}

TEST(SolvePde, Diagnostics) {
    const auto& d = base().pre.diagnostics;
    EXPECT_EQ(d.steps, 80000u);
    EXPECT_GT(d.cfl_margin, 0.0);
    EXPECT_LE(d.max_cfl, 0.9 + 1e-12);
    EXPECT_TRUE(std::isfinite(d.pasting_mismatch));
    EXPECT_LT(d.pasting_mismatch, 0.1);
}

TEST(SolvePde, HorizonMismatchRejected) {
    const ModelParams p = default_params();
    RawParams raw = p.raw();
    raw.T_age = 100.0;
    const FCurve other = solve_f(derive_params(raw), 1000);
    EXPECT_THROW(solve_pde(p, Grid::make(p, GridSpec::coarse()), other), DomainError);
}

TEST(Boundary, AnchorAtStartAge) {
    const auto w0 = boundary_at(base().pre.boundary, 0.0);
    ASSERT_TRUE(w0.has_value());
    EXPECT_NEAR(*w0, 9.89, 0.3);
}

TEST(Boundary, NonIncreasingInTime) {
    const BoundaryCurve& b = base().pre.boundary;
    for (std::size_t m = 1; m < b.w_bar.size(); ++m) {
        ASSERT_LE(b.w_bar[m], b.w_bar[m - 1]) << "t = " << b.times[m];
    }
}

TEST(Boundary, HigherRateLowersBoundary) {
    const BoundaryCurve& lo = base().pre.boundary;
    const BoundaryCurve& hi = high_rate().pre.boundary;
    for (std::size_t m = 0; m < lo.w_bar.size(); ++m) {
        if (std::isnan(lo.w_bar[m]) || std::isnan(hi.w_bar[m])) continue;
        ASSERT_LE(hi.w_bar[m], lo.w_bar[m]) << "t = " << lo.times[m];
    }
    EXPECT_LT(*hi.at(0.0), *lo.at(0.0) - 0.5);
}

TEST(Boundary, InterpolationAndDomain) {
    const BoundaryCurve& b = base().pre.boundary;
    const double mid = *boundary_at(b, 10.0005);
    EXPECT_NEAR(mid, 0.5 * (*boundary_at(b, 10.0) + *boundary_at(b, 10.001)), 1e-12);
    EXPECT_THROW(boundary_at(b, -1.0), DomainError);
    EXPECT_THROW(boundary_at(b, 81.0), DomainError);
    BoundaryCurve gap{{0.0, 1.0, 2.0}, {3.0, std::nan(""), 1.0}};
    EXPECT_FALSE(gap.at(0.5).has_value());
    EXPECT_EQ(*gap.at(2.0), 1.0);
}

TEST(ConsumptionPre, FirstOrderConditionAtNodes) {
    const FullSolution& s = base();
    const ValueSurface& surf = s.pre.surface;
    const Grid& g = surf.grid();
    const UpwindStencil stencil(surf.params(), g);
    std::size_t checked = 0;
    for (std::size_t k : {0u, 1000u, 4000u}) {
        const auto v = surf.v1(k);
        const double t = surf.slice_time(k);
        for (std::size_t i = 1; i + 1 < g.n_y(); ++i) {
            if (surf.retired(k)[i]) continue;
            const NodeControl c = stencil(v, i);
            EXPECT_NEAR(consumption_pre(surf, t, g.w(i)), c.c, 1e-12 * c.c);
            if (c.capped || c.clamped || c.drift == 0.0) continue;
            const double v_w = c.slope / g.w(i);
            EXPECT_NEAR(std::pow(c.c, -surf.params().gamma()), v_w, 1e-8 * v_w);
            ++checked;
        }
    }
    EXPECT_GT(checked, 100u);
}

TEST(ConsumptionPre, PastingAtTheBoundary) {
    const FullSolution& s = base();
    const double w_bar = *s.pre.boundary.at(0.0);
    const double w = 0.995 * w_bar;
    // Smooth pasting: V1_w = Vbar_w gives c = w / f just below the boundary.
    EXPECT_NEAR(consumption_pre(s.pre.surface, 0.0, w), w / s.fcurve.f(0.0), 0.02 * w / s.fcurve.f(0.0));
    // Retiring scales consumption by B.
    EXPECT_NEAR(consumption_post(s.fcurve, 0.0, w) / (w / s.fcurve.f(0.0)), s.fcurve.params().B(), 1e-12);
}

TEST(ConsumptionPre, ShapeAcrossTheWorkingRegion) {
    const ValueSurface& surf = base().pre.surface;
    const Grid& g = surf.grid();
    const auto pol = surf.policy(0);
    const double w_bar = surf.slice_boundary(0);
    // Never-retire branch: consumption rises with wealth.
    for (std::size_t i = 1; g.w(i) < 0.05; ++i) EXPECT_GE(pol[i], pol[i - 1]);
    // Saving-for-retirement branch: nearly flat, and below the never-retire level.
    double lo = 1e9, hi = 0.0;
    for (std::size_t i = 0; i < g.n_y() && g.w(i) < w_bar; ++i) {
        if (g.w(i) < 0.1) continue;
        lo = std::min(lo, pol[i]);
        hi = std::max(hi, pol[i]);
    }
    EXPECT_LT(hi - lo, 0.02);
    EXPECT_GT(surf.consumption(0.0, 0.04), hi);
}

TEST(ConsumptionPre, DomainChecks) {
    const ValueSurface& surf = base().pre.surface;
    EXPECT_THROW(consumption_pre(surf, 0.0, 20.0), DomainError);
    EXPECT_THROW(consumption_pre(surf, 0.0, 0.001), DomainError);
    EXPECT_THROW(consumption_pre(surf, 90.0, 1.0), DomainError);
    EXPECT_THROW(surf.value(0.0, 31.0), DomainError);
}

TEST(HjbResidual, SmallInTheBulk) {
    const ValueSurface& surf = base().pre.surface;
    const Grid& g = surf.grid();
    const double scale = g.dt() + g.dy();
    const double early = hjb_residual(surf, 20.0, 0.5, 30.0);
    const double late = hjb_residual(surf, 79.0, 0.5, 30.0);
    EXPECT_GT(early, 0.0);
    EXPECT_LT(early, 2.0 * scale);
    EXPECT_LT(late, 10.0 * scale);
}

TEST(ValueSurface, StorageLayout) {
    const ValueSurface& surf = base().pre.surface;
    EXPECT_EQ(surf.slice_count(), 8001u);
    EXPECT_EQ(surf.slot_of(10).value(), 1u);
    EXPECT_FALSE(surf.slot_of(15).has_value());
    EXPECT_EQ(surf.slot_of(80000).value(), 8000u);
    EXPECT_DOUBLE_EQ(surf.value(0.0, 1.0), surf.value(0.0, 1.0));
    const double y = std::log(2.0);
    const auto& g = surf.grid();
    const std::size_t i = static_cast<std::size_t>((y - g.y_min()) / g.dy());
    const double phi = (y - g.y(i)) / g.dy();
    const double expect = (1 - phi) * surf.v1(0)[i] + phi * surf.v1(0)[i + 1];
    EXPECT_NEAR(surf.value(0.0, 2.0), expect, 1e-12 * std::abs(expect));
}
