#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "retirement/retirement.hpp"

namespace retire_cli {

namespace fs = std::filesystem;
using namespace retirement;

enum ExitCode : int { ok = 0, config_error = 2, solver_error = 3, infeasible = 4 };

struct CommonOptions {
    std::string config;
    std::string out;
    bool fine_grid = false;
    bool quiet = false;
    std::optional<double> dt;
    std::optional<double> dy;
};

struct SolveOptions {
    double surface_every = 1.0;  ///< years between exported surface slices
    double surface_dw = 0.0;     ///< 0 = 0.02 coarse / 0.01 fine
};

struct CalibrateOptions {
    CalibrationTarget target;
    std::size_t candidates = 11;
    bool verify_fine = true;
};

/// Collects output files and manifest entries for one command run.
class Run {
public:
    Run(std::string command, const CommonOptions& common)
        : command_(std::move(command)), common_(common), start_(std::chrono::steady_clock::now()) {}

    const CommonOptions& common() const noexcept { return common_; }
    fs::path dir() const { return common_.out; }

    void log(const std::string& line) const {
        if (!common_.quiet) std::cerr << "[" << command_ << "] " << line << '\n';
    }

    /// Opens `name` in the output directory and passes the stream to `write`.
    void write_file(const std::string& name, const std::function<void(std::ostream&)>& write) {
        const fs::path path = dir() / name;
        files_.push_back(name);
        std::ofstream os(path, std::ios::binary);
        if (!os) throw ConfigError("cannot write '" + path.string() + "'");
        write(os);
        if (!os) throw ConfigError("write failed for '" + path.string() + "'");
    }

    void note(const std::string& key, const std::string& value) { notes_.emplace_back(key, value); }
    void note(const std::string& key, double value) { note(key, csv::number(value)); }

    void set_params(const ModelParams& p) { params_ = p; }
    void set_grid(const Grid& g) { grid_ = g; }

    void remove_outputs() {
        for (const auto& f : files_) {
            std::error_code ec;
            fs::remove(dir() / f, ec);
        }
        files_.clear();
    }

    void write_manifest(int code, const std::string& error) const {
        std::error_code ec;
        fs::create_directories(dir(), ec);
        std::ofstream os(dir() / std::string(csv::manifest_name));
        if (!os) return;
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        os << "command = " << command_ << '\n';
        os << "status = " << (code == ok ? "ok" : "failed") << '\n';
        os << "exit_code = " << code << '\n';
        if (!error.empty()) os << "error = " << error << '\n';
        os << "output_dir = " << common_.out << '\n';
        os << "config = " << (common_.config.empty() ? "(defaults)" : common_.config) << '\n';
        os << "wall_clock_seconds = " << csv::number(seconds) << '\n';
        if (params_) {
            const auto& p = *params_;
            os << "\n# parameters\n";
            const std::pair<const char*, double> rows[] = {
                {"r", p.r()}, {"rho", p.rho()}, {"alpha", p.alpha()}, {"gamma", p.gamma()},
                {"gamma_star", p.gamma_star()}, {"gamma_tilde", p.gamma_tilde()},
                {"l_bar", p.l_bar()}, {"B", p.B()}, {"m", p.m()}, {"b", p.b()}, {"x", p.x()},
                {"T_age", p.T_age()}, {"horizon", p.horizon()}};
            for (const auto& [k, v] : rows) os << k << " = " << csv::number(v) << '\n';
        }
        if (grid_) {
            const auto& g = *grid_;
            os << "\n# grid\n";
            os << "dt = " << csv::number(g.dt()) << '\n';
            os << "dy = " << csv::number(g.dy()) << '\n';
            os << "n_t = " << g.n_t() << '\n';
            os << "n_y = " << g.n_y() << '\n';
            os << "w_min = " << csv::number(g.w_min()) << '\n';
            os << "w_cutoff = " << csv::number(g.w_cutoff()) << '\n';
            os << "cfl_safety = " << csv::number(g.cfl_safety()) << '\n';
            os << "reaction_number = " << csv::number(g.reaction_number()) << '\n';
        }
        if (!notes_.empty()) {
            os << "\n# results\n";
            for (const auto& [k, v] : notes_) os << k << " = " << v << '\n';
        }
        os << "\n# files\n";
        for (const auto& f : files_) os << f << '\n';
    }

private:
    std::string command_;
    CommonOptions common_;
    std::chrono::steady_clock::time_point start_;
    std::vector<std::string> files_;
    std::vector<std::pair<std::string, std::string>> notes_;
    std::optional<ModelParams> params_;
    std::optional<Grid> grid_;
};

inline ModelParams params_from(const CommonOptions& c) {
    return c.config.empty() ? default_params() : load_params(c.config);
}

inline GridSpec grid_from(const CommonOptions& c) {
    GridSpec spec = c.fine_grid ? GridSpec::fine() : GridSpec::coarse();
    if (c.dt) spec.dt = *c.dt;
    if (c.dy) spec.dy = *c.dy;
    return spec;
}

inline void warn_fine(const CommonOptions& c, std::size_t solves) {
    if (!c.fine_grid) return;
    std::cerr << "warning: --fine-grid (dt=0.0005, dy=0.01) has 4x the nodes and 2x the steps of "
                 "the default grid; expect roughly 8x the run time per solve ("
              << solves << " solve" << (solves == 1 ? "" : "s") << " requested)\n";
}

inline std::string fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

/// Label used in per-value file names (shortest decimal form).
inline std::string label(double v) { return csv::number(v); }

inline std::string diagnostics_text(const PreRetirementSolution& pre, double residual) {
    const auto& d = pre.diagnostics;
    std::ostringstream os;
    os << "time_steps = " << d.steps << '\n';
    os << "slope_clamp_count = " << d.clamp_count << '\n';
    os << "cfl_band_capped_count = " << d.capped_count << '\n';
    os << "max_cfl_number = " << csv::number(d.max_cfl) << '\n';
    os << "cfl_margin = " << csv::number(d.cfl_margin) << '\n';
    os << "smooth_pasting_mismatch_t0 = " << csv::number(d.pasting_mismatch) << '\n';
    os << "max_hjb_residual = " << csv::number(residual) << '\n';
    return os.str();
}

/// Max HJB residual over the bulk of the continuation region.
inline double bulk_residual(const ValueSurface& s) {
    return hjb_residual(s, s.grid().horizon() - 1.0, 0.5, s.grid().w_cutoff());
}

inline void cmd_solve(Run& run, const SolveOptions& opt) {
    const auto& common = run.common();
    const ModelParams p = params_from(common);
    run.set_params(p);
    const GridSpec spec = grid_from(common);
    const Grid g = Grid::make(p, spec);
    run.set_grid(g);
    warn_fine(common, 1);

    run.log("solving retired ODE and pre-retirement HJB (" + std::to_string(g.n_t()) +
            " steps x " + std::to_string(g.n_y()) + " nodes)");
    const FCurve fc = solve_f(p, g.n_t());
    const PreRetirementSolution pre = solve_pde(p, g, fc);
    const double residual = bulk_residual(pre.surface);

    const std::size_t stride = g.store_stride();
    const double dw = opt.surface_dw > 0.0 ? opt.surface_dw : (common.fine_grid ? 0.01 : 0.02);
    run.write_file("boundary.csv", [&](std::ostream& os) { csv::write_boundary(os, pre.boundary, p, stride); });
    run.write_file("fcurve.csv", [&](std::ostream& os) { csv::write_fcurve(os, fc, stride); });
    run.write_file("survival.csv",
                   [&](std::ostream& os) { csv::write_survival(os, survival_curve(p, g.n_t() / stride)); });
    run.write_file("surface.csv",
                   [&](std::ostream& os) { csv::write_surface(os, pre.surface, dw, opt.surface_every); });
    run.write_file("diagnostics.txt", [&](std::ostream& os) { os << diagnostics_text(pre, residual); });

    const auto w0 = pre.boundary.at(0.0);
    run.note("w_bar_at_start_age", w0 ? csv::number(*w0) : "none");
    run.note("slope_clamp_count", std::to_string(pre.diagnostics.clamp_count));
    run.note("cfl_margin", pre.diagnostics.cfl_margin);
    run.note("max_hjb_residual", residual);
    std::cout << "w_bar(age " << p.age(0.0) << ") = " << (w0 ? fixed(*w0) : "none") << '\n';
}

inline void cmd_sweep_r(Run& run, const std::vector<double>& rates) {
    const auto& common = run.common();
    if (rates.empty()) throw ConfigError("--rates needs at least one rate");
    const ModelParams base = params_from(common);
    run.set_params(base);
    const GridSpec spec = grid_from(common);
    run.set_grid(Grid::make(base, spec));
    warn_fine(common, rates.size());

    struct Job {
        ModelParams p;
        BoundaryCurve boundary;
        std::size_t stride;
    };
    std::vector<std::future<Job>> jobs;
    for (const double r : rates) {
        const ModelParams p = base.with_r(r);
        jobs.push_back(std::async(std::launch::async, [p, spec] {
            const Grid g = Grid::make(p, spec);
            const FCurve fc = solve_f(p, g.n_t());
            PreRetirementSolution pre = solve_pde(p, g, fc);
            return Job{p, std::move(pre.boundary), g.store_stride()};
        }));
    }
    run.log("solving " + std::to_string(rates.size()) + " rate(s)");
    for (std::size_t i = 0; i < rates.size(); ++i) {
        const Job job = jobs[i].get();
        const std::string name = "boundary_r" + label(rates[i]) + ".csv";
        run.write_file(name, [&](std::ostream& os) {
            csv::write_boundary(os, job.boundary, job.p, job.stride);
        });
        const auto w0 = job.boundary.at(0.0);
        run.note("w_bar_at_start_age_r" + label(rates[i]), w0 ? csv::number(*w0) : "none");
        std::cout << "r = " << label(rates[i]) << ": w_bar(age " << job.p.age(0.0)
                  << ") = " << (w0 ? fixed(*w0) : "none") << '\n';
    }
}

inline void cmd_simulate(Run& run, const std::vector<double>& w0s) {
    const auto& common = run.common();
    if (w0s.empty()) throw ConfigError("--w0 needs at least one initial wealth");
    for (const double w : w0s) {
        if (!(w > 0.0)) throw ConfigError("--w0 values must be positive (got " + label(w) + ")");
    }
    const ModelParams p = params_from(common);
    run.set_params(p);
    const GridSpec spec = grid_from(common);
    const Grid g = Grid::make(p, spec);
    run.set_grid(g);
    warn_fine(common, 1);

    const FCurve fc = solve_f(p, g.n_t());
    const PreRetirementSolution pre = solve_pde(p, g, fc);
    const double t100 = 100.0 - p.x();

    std::vector<Trajectory> trajs;
    for (const double w : w0s) {
        trajs.push_back(simulate(pre.surface, pre.boundary, fc, w, 0.0));
        run.write_file("trajectory_w" + label(w) + ".csv", [&](std::ostream& os) {
            csv::write_trajectory(os, trajs.back(), p, g.store_stride());
        });
    }
    run.write_file("summary.csv", [&](std::ostream& os) {
        csv::Writer out(os,
                        "w0 [annual-income multiples], retires [1 = before age T_age - 1], "
                        "retirement_age [years], retirement_wealth [annual-income multiples], "
                        "wealth_at_100 [annual-income multiples], hit_wealth_floor [1 = clamped at 0]",
                        {"w0", "retires", "retirement_age", "retirement_wealth", "wealth_at_100",
                         "hit_wealth_floor"});
        for (std::size_t i = 0; i < w0s.size(); ++i) {
            const Trajectory& tr = trajs[i];
            const bool retires = retires_before(tr, p.horizon() - terminal_window);
            const double nan = std::numeric_limits<double>::quiet_NaN();
            const double w100 = t100 >= tr.times.front() && t100 <= tr.times.back()
                                    ? tr.wealth_at(t100) : nan;
            out.row(w0s[i], retires, retires ? p.age(*tr.retirement_time) : nan,
                    retires ? *tr.retirement_wealth : nan, w100, tr.hit_wealth_floor());
            std::cout << "w0 = " << label(w0s[i]) << ": "
                      << (retires ? "retires at age " + fixed(p.age(*tr.retirement_time), 2) +
                                        " with wealth " + fixed(*tr.retirement_wealth, 3)
                                  : std::string("never retires"))
                      << '\n';
        }
    });
}

inline void cmd_uncommitted(Run& run, const std::vector<double>& ages, double tolerance) {
    const auto& common = run.common();
    if (ages.size() < 2) throw ConfigError("--retire-ages needs at least two ages");
    const ModelParams p = params_from(common);
    run.set_params(p);
    const GridSpec spec = grid_from(common);
    const Grid g = Grid::make(p, spec);
    run.set_grid(g);
    warn_fine(common, 1);

    std::vector<double> times;
    for (const double a : ages) {
        const double t = a - p.x();
        if (!(t > 0.0 && t < p.horizon())) {
            throw ConfigError("retirement age " + label(a) + " outside (" + label(p.x()) + ", " +
                              label(p.T_age()) + ")");
        }
        times.push_back(t);
    }

    const FCurve fc = solve_f(p, g.n_t());
    const PreRetirementSolution pre = solve_pde(p, g, fc);
    UncommittedOptions uopt;
    uopt.tolerance = tolerance;
    const UncommittedCurve u = uncommitted_curve(pre.surface, pre.boundary, fc, times, uopt);

    run.write_file("uncommitted.csv", [&](std::ostream& os) {
        csv::write_uncommitted(os, u, p, g.store_stride());
    });
    // Forward retired paths from each (t_r, w_bar) for the scalar-multiple check.
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double w_r = *pre.boundary.at(times[i]);
        const Trajectory tr = simulate(pre.surface, pre.boundary, fc, w_r, times[i], times[i]);
        run.write_file("forward_age" + label(ages[i]) + ".csv", [&](std::ostream& os) {
            csv::write_trajectory(os, tr, p, g.store_stride());
        });
    }
    run.note("w_tilde", u.w_tilde);
    run.note("relative_spread", u.spread);
    std::cout << "w_tilde = " << fixed(u.w_tilde, 5) << " (relative spread " << fixed(u.spread, 5)
              << ")\n";
}

inline void cmd_calibrate(Run& run, const CalibrateOptions& opt) {
    const auto& common = run.common();
    const ModelParams p = params_from(common);
    run.set_params(p);
    const GridSpec spec = grid_from(common);
    run.set_grid(Grid::make(p, spec));
    warn_fine(common, opt.candidates + 11);

    CalibrationOptions copt;
    copt.candidates = opt.candidates;
    if (opt.verify_fine && !common.fine_grid) copt.verify_grid = GridSpec::fine();
    run.log("scanning " + std::to_string(opt.candidates) + " l_bar candidates in [" +
            label(opt.target.search_interval.lo) + ", " + label(opt.target.search_interval.hi) + "]");
    const CalibrationResult res = calibrate_lbar(p, opt.target, spec, copt);

    std::ostringstream summary;
    summary << "feasible l_bar in [" << fixed(res.feasible.lo) << ", " << fixed(res.feasible.hi)
            << "]" << (res.lower_edge_at_bound ? " (lower edge at search bound)" : "")
            << (res.upper_edge_at_bound ? " (upper edge at search bound)" : "")
            << "; recommended l_bar = " << fixed(res.recommended) << " retires at age "
            << fixed(res.achieved.retirement_age, 2) << " with wealth "
            << fixed(res.achieved.retirement_wealth, 3);
    if (res.verified) {
        summary << "; verification grid: "
                << (res.verified->retires ? "age " + fixed(res.verified->retirement_age, 2) +
                                                 ", wealth " + fixed(res.verified->retirement_wealth, 3)
                                           : std::string("no retirement"))
                << (res.verified->feasible ? " (feasible)" : " (outside bands)");
    }
    run.write_file("calibration.csv",
                   [&](std::ostream& os) { csv::write_calibration(os, res.evaluations, summary.str()); });
    run.note("feasible_lo", res.feasible.lo);
    run.note("feasible_hi", res.feasible.hi);
    run.note("recommended_l_bar", res.recommended);
    std::cout << summary.str() << '\n';
}

/// Runs `body`, maps library errors to exit codes, removes partial outputs
/// on failure and writes the manifest on every path.
inline int execute(const std::string& command, const CommonOptions& common,
                   const std::function<void(Run&)>& body) {
    Run run(command, common);
    int code = ok;
    std::string error;
    try {
        fs::create_directories(common.out);
        body(run);
    } catch (const ConfigError& e) {
        code = config_error;
        error = e.what();
    } catch (const DomainError& e) {
        code = config_error;
        error = e.what();
    } catch (const CalibrationInfeasible& e) {
        code = infeasible;
        error = e.what();
    } catch (const InfeasibleError& e) {
        code = infeasible;
        error = e.what();
    } catch (const SolverError& e) {
        code = solver_error;
        error = e.what();
    } catch (const fs::filesystem_error& e) {
        code = config_error;
        error = e.what();
    }
    if (code != ok) {
        run.remove_outputs();
        std::cerr << "error: " << error << '\n';
    }
    run.write_manifest(code, error);
    return code;
}

}  // namespace retire_cli
