#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "retirement/calibrate.hpp"
#include "retirement/mortality.hpp"
#include "retirement/policy_sim.hpp"
#include "retirement/post_retirement.hpp"
#include "retirement/pre_retirement.hpp"

namespace retirement::csv {

/// Shortest round-trip decimal form; identical across runs and platforms.
inline std::string number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    if (res.ec != std::errc{}) return "nan";
    return std::string(buf, res.ptr);
}

inline constexpr std::string_view manifest_name = "manifest.txt";

/// Row-oriented writer: a `# units:` comment, the header, the rows and a
/// trailing manifest reference.
class Writer {
public:
    Writer(std::ostream& os, std::string_view units, std::vector<std::string_view> columns)
        : os_(os), columns_(columns.size()) {
        os_ << "# units: " << units << '\n';
        for (std::size_t i = 0; i < columns.size(); ++i) os_ << (i ? "," : "") << columns[i];
        os_ << '\n';
    }
    Writer(const Writer&) = delete;
    Writer& operator=(const Writer&) = delete;
    ~Writer() { os_ << "# manifest: " << manifest_name << '\n'; }

    template <typename... Cells>
    void row(const Cells&... cells) {
        static_assert(sizeof...(Cells) > 0);
        std::size_t i = 0;
        ((os_ << (i++ ? "," : "") << cell(cells)), ...);
        os_ << '\n';
    }

    void comment(std::string_view text) { os_ << "# " << text << '\n'; }
    std::size_t columns() const noexcept { return columns_; }

private:
    static std::string cell(double v) { return number(v); }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(std::size_t v) { return std::to_string(v); }
    static std::string cell(bool v) { return v ? "1" : "0"; }
    static std::string cell(std::string_view v) { return std::string(v); }
    static std::string cell(const char* v) { return v; }

    std::ostream& os_;
    std::size_t columns_;
};

inline void write_survival(std::ostream& os, const SurvivalCurve& s) {
    Writer w(os, "t [years], tpx [probability]", {"t", "tpx"});
    for (std::size_t i = 0; i < s.times.size(); ++i) w.row(s.times[i], s.values[i]);
}

/// Every `stride`-th node plus the last.
inline void write_fcurve(std::ostream& os, const FCurve& fc, std::size_t stride = 1) {
    Writer w(os, "t [years], age [years], f [dimensionless], F = f^gamma [dimensionless]",
             {"t", "age", "f", "F"});
    const auto& p = fc.params();
    if (stride == 0) stride = 1;
    for (std::size_t i = 0; i < fc.size(); i += stride) {
        const double t = fc.time(i);
        w.row(t, p.age(t), fc.values()[i], std::pow(fc.values()[i], p.gamma()));
        if (i + stride >= fc.size() && i + 1 != fc.size()) {
            const double T = fc.horizon();
            w.row(T, p.age(T), fc.values().back(), std::pow(fc.values().back(), p.gamma()));
        }
    }
}

/// w_bar is written as nan where no interior boundary exists.
inline void write_boundary(std::ostream& os, const BoundaryCurve& b, const ModelParams& p,
                           std::size_t stride = 1) {
    Writer w(os, "t [years], age [years], w_bar [annual-income multiples]", {"t", "age", "w_bar"});
    if (stride == 0) stride = 1;
    const std::size_t n = b.times.size();
    for (std::size_t i = 0; i < n; i += stride) {
        w.row(b.times[i], p.age(b.times[i]), b.w_bar[i]);
        if (i + stride >= n && i + 1 != n) w.row(b.times.back(), p.age(b.times.back()), b.w_bar.back());
    }
}

/// V1 on the wealth grid w_min, w_min + dw, ... <= w_cutoff at stored slices
/// spaced at least `every` years apart (the last slice is always written).
inline void write_surface(std::ostream& os, const ValueSurface& s, double dw, double every) {
    Writer w(os,
             "t [years], age [years], w [annual-income multiples], V1 [utility], "
             "retired_flag [1 = obstacle binds]",
             {"t", "age", "w", "V1", "retired_flag"});
    const Grid& g = s.grid();
    const auto& p = s.params();
    std::vector<double> wealth;
    for (std::size_t i = 0;; ++i) {
        const double v = g.w_min() + dw * static_cast<double>(i);
        if (v > g.w_cutoff() * (1 + 1e-12)) break;
        wealth.push_back(std::min(v, g.w_cutoff()));
    }
    double next = 0.0;
    for (std::size_t k = 0; k < s.slice_count(); ++k) {
        const double t = s.slice_time(k);
        const bool last = k + 1 == s.slice_count();
        if (t + 1e-9 < next && !last) continue;
        next = t + every;
        const double w_bar = s.slice_boundary(k);
        for (const double v : wealth) {
            const bool retired = !std::isnan(w_bar) && v >= w_bar;
            w.row(t, p.age(t), v, s.value(t, v), retired);
        }
    }
}

/// Every `stride`-th node plus the retirement node and the last node.
inline void write_trajectory(std::ostream& os, const Trajectory& traj, const ModelParams& p,
                             std::size_t stride = 1) {
    Writer w(os,
             "t [years], age [years], wealth [annual-income multiples], "
             "consumption [annual-income multiples per year], regime, tpx [probability]",
             {"t", "age", "wealth", "consumption", "regime", "tpx"});
    if (stride == 0) stride = 1;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        const bool switch_node = traj.retirement_time && traj.times[k] == *traj.retirement_time;
        if (k % stride != 0 && k + 1 != traj.size() && !switch_node) continue;
        const double t = traj.times[k];
        w.row(t, p.age(t), traj.wealth[k], traj.consumption[k],
              std::string_view(to_string(traj.regime[k])), survival(p, t));
    }
}

inline void write_uncommitted(std::ostream& os, const UncommittedCurve& u, const ModelParams& p,
                              std::size_t stride = 1) {
    Writer w(os, "t [years], age [years], w_uncommitted [annual-income multiples]",
             {"t", "age", "w_uncommitted"});
    if (stride == 0) stride = 1;
    const std::size_t n = u.times.size();
    for (std::size_t k = 0; k < n; k += stride) {
        w.row(u.times[k], p.age(u.times[k]), u.wealth[k]);
        if (k + stride >= n && k + 1 != n) w.row(u.times.back(), p.age(u.times.back()), u.wealth.back());
    }
    w.comment("w_tilde = " + number(u.w_tilde) + ", relative spread = " + number(u.spread));
}

inline void write_calibration(std::ostream& os, const std::vector<CandidateResult>& evals,
                              const std::string& summary) {
    Writer w(os,
             "l_bar [dimensionless], retirement_age [years], "
             "retirement_wealth [annual-income multiples], feasible_flag [1 = both bands met]",
             {"l_bar", "retirement_age", "retirement_wealth", "feasible_flag"});
    for (const auto& c : evals) w.row(c.l_bar, c.retirement_age, c.retirement_wealth, c.feasible);
    w.comment(summary);
}

}  // namespace retirement::csv
