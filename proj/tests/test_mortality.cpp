#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <random>

#include "retirement/mortality.hpp"

using namespace retirement;

namespace {

// Independent route: adaptive Gauss-Kronrod integral of the hazard.
double survival_by_quadrature(const ModelParams& p, double t) {
    if (t == 0.0) return 1.0;
    auto lambda = [&](double s) { return std::exp((p.x() + s - p.m()) / p.b()) / p.b(); };
    const double integral =
        boost::math::quadrature::gauss_kronrod<double, 31>::integrate(lambda, 0.0, t, 15, 1e-14);
    return std::exp(-integral);
}

}  // namespace

TEST(Hazard, ModalAgeGivesInverseDispersion) {
    const ModelParams p = default_params();
    EXPECT_NEAR(hazard(p, p.m() - p.x()), 1.0 / 9.44, 1e-15);
    EXPECT_NEAR(hazard(p, p.m() - p.x()), 0.105932, 5e-7);
}

TEST(Hazard, AtStartAge) {
    const ModelParams p = default_params();
    // (30 - 88.82) / 9.44 = -6.230932...
    EXPECT_NEAR(hazard(p, 0.0), std::exp(-58.82 / 9.44) / 9.44, 1e-18);
    EXPECT_NEAR(hazard(p, 0.0), 2.084e-4, 5e-8);
}

TEST(Hazard, DomainAndMonotonicity) {
    const ModelParams p = default_params();
    EXPECT_THROW(hazard(p, p.horizon() + 1.0), DomainError);
    EXPECT_THROW(hazard(p, -0.5), DomainError);
    EXPECT_NO_THROW(hazard(p, p.horizon()));
    double prev = 0.0;
    for (double t = 0.0; t <= p.horizon(); t += 0.5) {
        const double h = hazard(p, t);
        EXPECT_GT(h, prev);
        prev = h;
    }
}

TEST(Survival, ClosedFormValues) {
    const ModelParams p = default_params();
    EXPECT_EQ(survival(p, 0.0), 1.0);
    // exp(-(1 - e^{-58.82/9.44})) at the modal age.
    EXPECT_NEAR(survival(p, 58.82), std::exp(-(1.0 - std::exp(-58.82 / 9.44))), 1e-15);
    EXPECT_NEAR(survival(p, 58.82), 0.3687, 1e-4);
    EXPECT_THROW(survival(p, p.horizon() + 1.0), DomainError);
}

TEST(Survival, MatchesQuadratureAtRandomTimes) {
    const ModelParams p = default_params();
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> t(0.0, p.horizon());
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const double s = t(rng);
        worst = std::max(worst, std::abs(survival(p, s) - survival_by_quadrature(p, s)));
    }
    EXPECT_LE(worst, 1e-10);
}

TEST(Survival, StrictlyDecreasingWithConcaveLog) {
    const ModelParams p = default_params();
    const SurvivalCurve c = survival_curve(p, 800);
    ASSERT_EQ(c.times.size(), 801u);
    EXPECT_EQ(c.values.front(), 1.0);
    for (std::size_t i = 1; i < c.values.size(); ++i) {
        EXPECT_LT(c.values[i], c.values[i - 1]);
        EXPECT_GT(c.values[i], 0.0);
    }
    for (std::size_t i = 1; i + 1 < c.values.size(); ++i) {
        const double d2 = std::log(c.values[i + 1]) - 2 * std::log(c.values[i]) +
                          std::log(c.values[i - 1]);
        EXPECT_LE(d2, 1e-15);
    }
}

TEST(Survival, ConstantHazardSatisfiesConcept) {
    static_assert(HazardRate<GompertzHazard>);
    static_assert(HazardRate<ConstantHazard>);
    const ConstantHazard h{0.02};
    EXPECT_EQ(h(10.0), 0.02);
}
