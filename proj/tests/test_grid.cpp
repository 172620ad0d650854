#include <gtest/gtest.h>

#include <cmath>

#include "retirement/grid.hpp"

using namespace retirement;

TEST(Grid, CoarseDefaults) {
    const Grid g = Grid::make(default_params(), GridSpec::coarse());
    EXPECT_EQ(g.n_t(), 80000u);
    EXPECT_DOUBLE_EQ(g.dt(), 0.001);
    EXPECT_EQ(g.n_y(), 401u);
    EXPECT_NEAR(g.dy(), 0.02, 1e-4);
    EXPECT_EQ(g.y_max(), std::log(30.0));
    EXPECT_DOUBLE_EQ(g.w(0), 0.01);
    EXPECT_NEAR(g.w(g.n_y() - 1), 30.0, 1e-13);
    EXPECT_EQ(g.t(g.n_t()), 80.0);
    EXPECT_EQ(g.store_stride(), 10u);
    EXPECT_NEAR((g.y_max() - g.y_min()) / static_cast<double>(g.n_y() - 1), g.dy(), 1e-15);
}

TEST(Grid, FineHalvesBothSteps) {
    const Grid g = Grid::make(default_params(), GridSpec::fine());
    EXPECT_EQ(g.n_t(), 160000u);
    EXPECT_EQ(g.n_y(), static_cast<std::size_t>(std::llround(std::log(3000.0) / 0.01)) + 1);
    EXPECT_EQ(g.store_stride(), 20u);
}

TEST(Grid, StabilityMargin) {
    const ModelParams p = default_params();
    const Grid g = Grid::make(p, GridSpec::coarse());
    const double lambda_max = std::exp((110.0 - 88.82) / 9.44) / 9.44;
    EXPECT_NEAR(g.reaction_number(), 0.001 * (0.025 + lambda_max), 1e-15);
    EXPECT_LE(g.cfl_safety() + g.reaction_number(), 1.0);
    EXPECT_DOUBLE_EQ(g.band(2.0), 0.9 * 2.0 * g.dy() / g.dt());
}

TEST(Grid, RejectsUnstableOrInvalidSpecs) {
    const ModelParams p = default_params();
    GridSpec big;
    big.dt = 0.5;
    EXPECT_THROW(Grid::make(p, big), ConfigError);
    GridSpec s;
    s.dy = 0.0;
    EXPECT_THROW(Grid::make(p, s), ConfigError);
    s = {};
    s.w_min = 40.0;
    EXPECT_THROW(Grid::make(p, s), ConfigError);
    s = {};
    s.cfl_safety = 1.5;
    EXPECT_THROW(Grid::make(p, s), ConfigError);
    s = {};
    s.dy = 10.0;
    EXPECT_THROW(Grid::make(p, s), ConfigError);
}
