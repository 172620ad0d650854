#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <iterator>
#include <future>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "retirement/error.hpp"
#include "retirement/grid.hpp"
#include "retirement/model.hpp"
#include "retirement/policy_sim.hpp"
#include "retirement/pre_retirement.hpp"

namespace retirement {

struct Band {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double v) const noexcept { return v >= lo && v <= hi; }
    /// Distance outside the band in units of its width (0 inside).
    double miss(double v) const noexcept {
        const double width = std::max(hi - lo, 1e-12);
        if (v < lo) return (lo - v) / width;
        if (v > hi) return (v - hi) / width;
        return 0.0;
    }
};

struct CalibrationTarget {
    double start_age = 30.0;
    double start_wealth = 1.0;
    Band age_band{55.0, 65.0};
    Band wealth_band{7.0, 12.0};
    Band search_interval{6.0, 7.0};

    void validate(const ModelParams& p) const {
        auto fail = [](const std::string& what) { throw ConfigError("calibration target: " + what); };
        if (!(age_band.hi >= age_band.lo)) fail("empty age band");
        if (!(wealth_band.hi >= wealth_band.lo)) fail("empty wealth band");
        if (!(search_interval.hi > search_interval.lo)) fail("search interval needs positive width");
        if (!(search_interval.lo > 1.0)) fail("search interval must lie above l_bar = 1");
        if (!(start_wealth > 0.0)) fail("start wealth must be positive");
        if (!(start_age >= p.x() && start_age < p.T_age() - 1.0)) {
            fail("start age must lie in [x, T_age - 1)");
        }
    }
};

/// Outcome of one full solve and simulation at a given l_bar.
struct CandidateResult {
    double l_bar = 0.0;
    bool retires = false;
    double retirement_age = std::numeric_limits<double>::quiet_NaN();
    double retirement_wealth = std::numeric_limits<double>::quiet_NaN();
    bool feasible = false;
    /// Normalised distance to the bands; infinite when the solve failed or
    /// the agent never retires.
    double miss = std::numeric_limits<double>::infinity();
    std::string diagnostic;
};

/// Retirement that happens this close to the horizon is the terminal collapse
/// of the boundary, not a retirement decision.
inline constexpr double terminal_window = 1.0;

inline CandidateResult evaluate_candidate(const ModelParams& base, double l_bar,
                                          const CalibrationTarget& target, const GridSpec& spec) {
    CandidateResult out;
    out.l_bar = l_bar;
    try {
        const ModelParams p = base.with_l_bar(l_bar);
        const FullSolution sol = solve_model(p, spec);
        const double t0 = target.start_age - p.x();
        const Trajectory traj = simulate(sol.pre.surface, sol.pre.boundary, sol.fcurve,
                                         target.start_wealth, t0);
        if (!retires_before(traj, p.horizon() - terminal_window)) {
            out.diagnostic = "no retirement before age " + std::to_string(p.T_age() - terminal_window);
            return out;
        }
        out.retires = true;
        out.retirement_age = p.age(*traj.retirement_time);
        out.retirement_wealth = *traj.retirement_wealth;
        out.miss = target.age_band.miss(out.retirement_age) +
                   target.wealth_band.miss(out.retirement_wealth);
        out.feasible = out.miss == 0.0;
    } catch (const Error& e) {
        out.diagnostic = e.what();
    }
    return out;
}

struct CalibrationOptions {
    std::size_t candidates = 11;
    /// Bisection steps on each edge of the feasible set.
    std::size_t edge_iterations = 5;
    /// Returned when it lies in the feasible set.
    double preferred = 6.49;
    /// Re-evaluate the recommendation on this grid (typically GridSpec::fine()).
    std::optional<GridSpec> verify_grid;
    std::size_t threads = 0;  ///< 0 = hardware concurrency
};

struct CalibrationResult {
    std::vector<CandidateResult> evaluations;  ///< every solve, sorted by l_bar
    Band feasible;                             ///< feasible interval (edges bisected)
    bool lower_edge_at_bound = false;
    bool upper_edge_at_bound = false;
    double recommended = 0.0;
    CandidateResult achieved;                  ///< recommended l_bar on the search grid
    std::optional<CandidateResult> verified;   ///< recommended l_bar on the verification grid
};

/// Infeasible calibration with the closest candidate attached.
class CalibrationInfeasible : public InfeasibleError {
public:
    CalibrationInfeasible(std::vector<CandidateResult> evaluations, CandidateResult closest)
        : InfeasibleError(describe(closest)), evaluations_(std::move(evaluations)),
          closest_(std::move(closest)) {}
    const std::vector<CandidateResult>& evaluations() const noexcept { return evaluations_; }
    const CandidateResult& closest() const noexcept { return closest_; }

private:
    static std::string describe(const CandidateResult& c) {
        std::ostringstream os;
        os << "no l_bar in the search interval meets both bands; closest l_bar = " << c.l_bar;
        if (c.retires) {
            os << " (retirement age " << c.retirement_age << ", wealth " << c.retirement_wealth << ")";
        } else {
            os << " (" << c.diagnostic << ")";
        }
        return os.str();
    }
    std::vector<CandidateResult> evaluations_;
    CandidateResult closest_;
};

namespace detail {

inline std::vector<CandidateResult> evaluate_all(const ModelParams& base,
                                                 const std::vector<double>& l_bars,
                                                 const CalibrationTarget& target,
                                                 const GridSpec& spec, std::size_t threads) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    std::vector<CandidateResult> out(l_bars.size());
    for (std::size_t start = 0; start < l_bars.size(); start += threads) {
        const std::size_t end = std::min(l_bars.size(), start + threads);
        std::vector<std::future<CandidateResult>> jobs;
        for (std::size_t i = start; i < end; ++i) {
            jobs.push_back(std::async(std::launch::async, evaluate_candidate, std::cref(base),
                                      l_bars[i], std::cref(target), std::cref(spec)));
        }
        for (std::size_t i = start; i < end; ++i) out[i] = jobs[i - start].get();
    }
    return out;
}

}  // namespace detail

/// Scans l_bar over the search interval, bisects the edges of the feasible
/// run and recommends `preferred` if it is feasible, else the midpoint.
/// The feasible set is taken to be the l_bar range around the feasible scan
/// points; the scan itself is returned so the assumption can be checked.
inline CalibrationResult calibrate_lbar(const ModelParams& base, const CalibrationTarget& target,
                                        const GridSpec& spec, CalibrationOptions options = {}) {
    target.validate(base);
    if (options.candidates < 2) throw ConfigError("calibration needs at least two candidates");

    const Band& range = target.search_interval;
    std::vector<double> scan(options.candidates);
    for (std::size_t i = 0; i < scan.size(); ++i) {
        scan[i] = range.lo + (range.hi - range.lo) * static_cast<double>(i) /
                                 static_cast<double>(scan.size() - 1);
    }
    std::vector<CandidateResult> evals =
        detail::evaluate_all(base, scan, target, spec, options.threads);

    std::vector<std::size_t> ok;
    for (std::size_t i = 0; i < evals.size(); ++i) {
        if (evals[i].feasible) ok.push_back(i);
    }
    if (ok.empty()) {
        const auto closest = *std::min_element(
            evals.begin(), evals.end(),
            [](const CandidateResult& a, const CandidateResult& b) { return a.miss < b.miss; });
        throw CalibrationInfeasible(evals, closest);
    }

    CalibrationResult result;
    const std::size_t first = ok.front(), last = ok.back();

    // Bisect each edge between an infeasible and a feasible scan point; the
    // two edges run concurrently.
    struct Edge {
        double at;
        std::vector<CandidateResult> evals;
    };
    auto bisect = [&](double bad, double good) {
        Edge e{good, {}};
        for (std::size_t it = 0; it < options.edge_iterations; ++it) {
            const double mid = 0.5 * (bad + good);
            CandidateResult c = evaluate_candidate(base, mid, target, spec);
            (c.feasible ? good : bad) = mid;
            e.evals.push_back(std::move(c));
        }
        e.at = good;
        return e;
    };
    result.lower_edge_at_bound = first == 0;
    result.upper_edge_at_bound = last + 1 == scan.size();
    std::future<Edge> lower;
    if (!result.lower_edge_at_bound) {
        lower = std::async(std::launch::async, bisect, scan[first - 1], scan[first]);
    }
    Edge upper = result.upper_edge_at_bound ? Edge{scan[last], {}}
                                            : bisect(scan[last + 1], scan[last]);
    Edge low = result.lower_edge_at_bound ? Edge{scan[first], {}} : lower.get();
    for (Edge* e : {&low, &upper}) {
        std::move(e->evals.begin(), e->evals.end(), std::back_inserter(evals));
    }
    const double lo = low.at, hi = upper.at;
    result.feasible = {lo, hi};

    std::sort(evals.begin(), evals.end(),
              [](const CandidateResult& a, const CandidateResult& b) { return a.l_bar < b.l_bar; });
    result.evaluations = std::move(evals);

    result.recommended =
        result.feasible.contains(options.preferred) ? options.preferred : 0.5 * (lo + hi);
    result.achieved = evaluate_candidate(base, result.recommended, target, spec);
    if (options.verify_grid) {
        result.verified = evaluate_candidate(base, result.recommended, target, *options.verify_grid);
    }
    return result;
}

/// Boundary at t = 0 and retirement outcome for each l_bar, for the
/// monotone-response check.
struct ResponsePoint {
    double l_bar = 0.0;
    double w_bar0 = std::numeric_limits<double>::quiet_NaN();
    CandidateResult outcome;
};

inline std::vector<ResponsePoint> lbar_response(const ModelParams& base,
                                                const std::vector<double>& l_bars,
                                                const CalibrationTarget& target,
                                                const GridSpec& spec) {
    std::vector<ResponsePoint> out;
    for (const double l : l_bars) {
        ResponsePoint pt;
        pt.l_bar = l;
        const ModelParams p = base.with_l_bar(l);
        const FullSolution sol = solve_model(p, spec);
        if (const auto w = sol.pre.boundary.at(0.0)) pt.w_bar0 = *w;
        const Trajectory traj = simulate(sol.pre.surface, sol.pre.boundary, sol.fcurve,
                                         target.start_wealth, target.start_age - p.x());
        pt.outcome.l_bar = l;
        pt.outcome.retires = retires_before(traj, p.horizon() - terminal_window);
        if (pt.outcome.retires) {
            pt.outcome.retirement_age = p.age(*traj.retirement_time);
            pt.outcome.retirement_wealth = *traj.retirement_wealth;
        }
        out.push_back(pt);
    }
    return out;
}

}  // namespace retirement
