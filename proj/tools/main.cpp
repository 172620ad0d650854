// retire: command-line front end for the retirement solver.

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

using namespace retire_cli;

void add_common(CLI::App* cmd, CommonOptions& c) {
    cmd->add_option("--config", c.config, "Parameter file (key = value lines)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", c.out, "Output directory")->required();
    cmd->add_flag("--fine-grid", c.fine_grid, "Use dt=0.0005, dy=0.01 (slow)");
    cmd->add_flag("--quiet", c.quiet, "Suppress progress messages");
    cmd->add_option("--dt", c.dt, "Override the time step (years)")->check(CLI::PositiveNumber);
    cmd->add_option("--dy", c.dy, "Override the log-wealth step")->check(CLI::PositiveNumber);
}

void add_band(CLI::App* cmd, const std::string& name, Band& band, const std::string& help) {
    auto* opt = cmd->add_option_function<std::vector<double>>(
        name,
        [&band, name](const std::vector<double>& v) {
            if (v.size() != 2) throw CLI::ValidationError(name, "expects LO,HI");
            band = {v[0], v[1]};
        },
        help);
    opt->delimiter(',')->expected(2);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal consumption and retirement timing solver"};
    app.require_subcommand(1);

    CommonOptions common;

    auto* solve = app.add_subcommand("solve", "Retirement boundary, value surface and f curve");
    SolveOptions solve_opt;
    add_common(solve, common);
    solve->add_option("--surface-every", solve_opt.surface_every,
                      "Years between exported surface slices")
        ->check(CLI::PositiveNumber);
    solve->add_option("--surface-dw", solve_opt.surface_dw, "Wealth spacing of the exported surface")
        ->check(CLI::PositiveNumber);

    auto* sweep = app.add_subcommand("sweep-r", "Retirement boundary for several interest rates");
    std::vector<double> rates;
    add_common(sweep, common);
    sweep->add_option("--rates", rates, "Comma-separated rates, e.g. 0.025,0.035")
        ->delimiter(',')
        ->required();

    auto* sim = app.add_subcommand("simulate", "Wealth trajectories from age x");
    std::vector<double> w0s;
    add_common(sim, common);
    sim->add_option("--w0", w0s, "Comma-separated initial wealths")->delimiter(',')->required();

    auto* unc = app.add_subcommand("uncommitted", "Backward paths from the boundary and w_tilde");
    std::vector<double> ages;
    double tolerance = 0.01;
    add_common(unc, common);
    unc->add_option("--retire-ages", ages, "Comma-separated retirement ages (years)")
        ->delimiter(',')
        ->required();
    unc->add_option("--tolerance", tolerance, "Relative coalescence tolerance at t = 0")
        ->check(CLI::PositiveNumber);

    auto* cal = app.add_subcommand("calibrate", "Search l_bar against retirement age/wealth bands");
    CalibrateOptions cal_opt;
    add_common(cal, common);
    add_band(cal, "--age-band", cal_opt.target.age_band, "Retirement age band LO,HI");
    add_band(cal, "--wealth-band", cal_opt.target.wealth_band, "Retirement wealth band LO,HI");
    add_band(cal, "--search", cal_opt.target.search_interval, "l_bar search interval LO,HI");
    cal->add_option("--start-wealth", cal_opt.target.start_wealth, "Initial wealth");
    cal->add_option("--start-age", cal_opt.target.start_age, "Initial age");
    cal->add_option("--candidates", cal_opt.candidates, "Scan points")->check(CLI::Range(2, 1000));
    bool no_verify = false;
    cal->add_flag("--no-verify", no_verify, "Skip re-evaluating the result on the fine grid");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : config_error;
    }

    if (*solve) {
        return execute("solve", common, [&](Run& run) { cmd_solve(run, solve_opt); });
    }
    if (*sweep) {
        return execute("sweep-r", common, [&](Run& run) { cmd_sweep_r(run, rates); });
    }
    if (*sim) {
        return execute("simulate", common, [&](Run& run) { cmd_simulate(run, w0s); });
    }
    if (*unc) {
        return execute("uncommitted", common,
                       [&](Run& run) { cmd_uncommitted(run, ages, tolerance); });
    }
    cal_opt.verify_fine = !no_verify;
    return execute("calibrate", common, [&](Run& run) { cmd_calibrate(run, cal_opt); });
}
