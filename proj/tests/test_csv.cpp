#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "retirement/csv.hpp"

using namespace retirement;

namespace {

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream is(text);
    for (std::string l; std::getline(is, l);) out.push_back(l);
    return out;
}

std::size_t commas(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), ',')); }

}  // namespace

TEST(Number, RoundTripsExactly) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        const double v = u(rng) * std::pow(10.0, static_cast<int>(i % 20) - 10);
        EXPECT_EQ(std::stod(csv::number(v)), v);
    }
    EXPECT_EQ(csv::number(0.5), "0.5");
    EXPECT_EQ(csv::number(80.0), "80");
    EXPECT_EQ(csv::number(std::nan("")), "nan");
}

TEST(Writer, Layout) {
    std::ostringstream os;
    {
        csv::Writer w(os, "a [x], b [y]", {"a", "b"});
        EXPECT_EQ(w.columns(), 2u);
        w.row(1.5, std::size_t{3});
        w.row(true, "text");
        w.comment("note");
    }
    const auto l = lines(os.str());
    ASSERT_EQ(l.size(), 6u);
    EXPECT_EQ(l[0], "# units: a [x], b [y]");
    EXPECT_EQ(l[1], "a,b");
    EXPECT_EQ(l[2], "1.5,3");
    EXPECT_EQ(l[3], "1,text");
    EXPECT_EQ(l[4], "# note");
    EXPECT_EQ(l[5], "# manifest: manifest.txt");
}

TEST(Exporters, SurvivalAndBoundary) {
    const ModelParams p = default_params();
    std::ostringstream s;
    csv::write_survival(s, survival_curve(p, 8));
    const auto ls = lines(s.str());
    ASSERT_EQ(ls.size(), 9u + 3u);
    EXPECT_EQ(ls[1], "t,tpx");
    EXPECT_EQ(ls[2], "0,1");

    const BoundaryCurve b{{0.0, 1.0, 2.0, 3.0}, {3.0, 2.0, std::nan(""), 1.0}};
    std::ostringstream os;
    csv::write_boundary(os, b, p, 2);
    const auto lb = lines(os.str());
    ASSERT_EQ(lb.size(), 6u);
    EXPECT_EQ(lb[2], "0,30,3");
    EXPECT_EQ(lb[3], "2,32,nan");
    EXPECT_EQ(lb[4], "3,33,1");
}

TEST(Exporters, FCurveKeepsTheHorizonNode) {
    const FCurve fc = solve_f(default_params(), 100);
    std::ostringstream os;
    csv::write_fcurve(os, fc, 30);
    const auto l = lines(os.str());
    // Nodes 0, 30, 60, 90 and the horizon.
    ASSERT_EQ(l.size(), 5u + 3u);
    EXPECT_EQ(l[6].substr(0, l[6].find(',')), "80");
    EXPECT_EQ(l[6].substr(l[6].rfind(',') + 1), "0");
    for (std::size_t i = 1; i + 1 < l.size(); ++i) EXPECT_EQ(commas(l[i]), 3u);
}

TEST(Exporters, TrajectoryKeepsSwitchAndLastNodes) {
    Trajectory tr;
    for (int k = 0; k < 10; ++k) {
        tr.times.push_back(0.1 * k);
        tr.wealth.push_back(1.0 + k);
        tr.consumption.push_back(0.5);
        tr.regime.push_back(k < 7 ? Regime::working : Regime::retired);
        tr.utility.push_back(0.0);
    }
    tr.retirement_time = tr.times[7];
    tr.retirement_wealth = 8.0;
    std::ostringstream os;
    csv::write_trajectory(os, tr, default_params(), 5);
    const auto l = lines(os.str());
    // Nodes 0, 5, 7 (switch) and 9 (last).
    ASSERT_EQ(l.size(), 4u + 3u);
    EXPECT_NE(l[4].find(",retired,"), std::string::npos);
    EXPECT_NE(l[3].find(",working,"), std::string::npos);
}

TEST(Exporters, CalibrationTable) {
    CandidateResult a;
    a.l_bar = 6.0;
    a.retires = true;
    a.retirement_age = 58.0;
    a.retirement_wealth = 9.0;
    a.feasible = true;
    CandidateResult b;
    b.l_bar = 7.0;
    std::ostringstream os;
    csv::write_calibration(os, {a, b}, "recommended l_bar = 6");
    const auto l = lines(os.str());
    ASSERT_EQ(l.size(), 6u);
    EXPECT_EQ(l[1], "l_bar,retirement_age,retirement_wealth,feasible_flag");
    EXPECT_EQ(l[2], "6,58,9,1");
    EXPECT_EQ(l[3], "7,nan,nan,0");
    EXPECT_EQ(l[4], "# recommended l_bar = 6");
}

TEST(Exporters, Deterministic) {
    const FCurve fc = solve_f(default_params(), 400);
    std::ostringstream a, b;
    csv::write_fcurve(a, fc);
    csv::write_fcurve(b, solve_f(default_params(), 400));
    EXPECT_EQ(a.str(), b.str());
}
