#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>

#include "retirement/error.hpp"

namespace retirement {

struct OdeTolerance {
    double rtol = 1e-11;
    double atol = 1e-14;
};

/// Adaptive embedded Runge-Kutta 5(4) pair of Dormand and Prince for a scalar
/// ODE y' = rhs(t, y). Integrates in either time direction. The accepted step
/// size carries over between calls, so marching across many short output
/// intervals costs roughly one step each once the controller has settled.
class DormandPrince {
public:
    explicit DormandPrince(OdeTolerance tol = {}) : tol_(tol) {}

    template <typename Rhs>
    double integrate(const Rhs& rhs, double t0, double y0, double t1) {
        const double span = t1 - t0;
        if (span == 0.0) return y0;
        const double dir = span > 0 ? 1.0 : -1.0;
        if (h_ <= 0.0) h_ = std::min(std::abs(span), 1e-3);

        double t = t0;
        double y = y0;
        while (dir * (t1 - t) > 0.0) {
            const double remaining = std::abs(t1 - t);
            const bool last = h_ >= remaining;
            const double h = dir * (last ? remaining : h_);

            const double k1 = rhs(t, y);
            const double k2 = rhs(t + c2 * h, y + h * (a21 * k1));
            const double k3 = rhs(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
            const double k4 = rhs(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
            const double k5 = rhs(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
            const double k6 =
                rhs(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
            const double y5 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
            const double k7 = rhs(t + h, y5);
            const double err_est =
                h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

            const double scale = tol_.atol + tol_.rtol * std::max(std::abs(y), std::abs(y5));
            const double err = std::abs(err_est) / scale;
            if (!std::isfinite(err)) {
                throw SolverError("non-finite derivative at t = " + std::to_string(t));
            }

            if (err <= 1.0) {
                t = last ? t1 : t + h;
                y = y5;
                ++accepted_;
            } else {
                ++rejected_;
            }
            const double factor =
                err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
            // Keep a full step size for the next interval even if this one was clipped.
            if (!(last && err <= 1.0 && factor >= 1.0)) h_ = std::abs(h) * factor;

            const double floor = 16.0 * std::numeric_limits<double>::epsilon() *
                                 std::max(1.0, std::abs(t));
            if (h_ < floor) {
                throw SolverError("step size underflow at t = " + std::to_string(t));
            }
        }
        return y;
    }

    std::size_t accepted_steps() const noexcept { return accepted_; }
    std::size_t rejected_steps() const noexcept { return rejected_; }

private:
    OdeTolerance tol_;
    double h_ = 0.0;
    std::size_t accepted_ = 0;
    std::size_t rejected_ = 0;

    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    // Difference between the 5th and embedded 4th order weights.
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
};

}  // namespace retirement
