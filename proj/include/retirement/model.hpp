#pragma once

#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "retirement/error.hpp"

namespace retirement {

/// Economic, preference and mortality inputs before derivation.
///
/// Exactly one of `gamma` / `gamma_star` may be given; when neither is set
/// the consumption curvature defaults to gamma = 2. `rho` defaults to `r`.
struct RawParams {
    double r = 0.025;
    std::optional<double> rho;
    double alpha = 0.5;
    std::optional<double> gamma;
    std::optional<double> gamma_star;
    double l_bar = 6.49;
    double m = 88.82;
    double b = 9.44;
    double x = 30.0;
    double T_age = 110.0;
};

/// Curvature of the reduced consumption utility: gamma = 1 - alpha (1 - gamma*).
inline double gamma_from_star(double alpha, double gamma_star) {
    return 1.0 - alpha * (1.0 - gamma_star);
}

/// Inverse of gamma_from_star.
inline double star_from_gamma(double alpha, double gamma) {
    return 1.0 - (1.0 - gamma) / alpha;
}

/// Fully derived, validated model parameters. Immutable once built.
///
/// Time runs in years from t = 0 (age x) to horizon() = T_age - x.
/// Wealth and consumption are measured in multiples of the unit labour income.
class ModelParams {
public:
    double r() const noexcept { return r_; }
    double rho() const noexcept { return rho_; }
    double alpha() const noexcept { return alpha_; }
    double gamma() const noexcept { return gamma_; }
    double gamma_star() const noexcept { return gamma_star_; }
    /// Exponent of the consumption first-order condition, 1/gamma.
    double gamma_tilde() const noexcept { return gamma_tilde_; }
    double l_bar() const noexcept { return l_bar_; }
    /// l_bar^{gamma_tilde (1 - alpha)(1 - gamma*)}
    double B() const noexcept { return B_; }
    double m() const noexcept { return m_; }
    double b() const noexcept { return b_; }
    double x() const noexcept { return x_; }
    double T_age() const noexcept { return T_age_; }
    double horizon() const noexcept { return T_age_ - x_; }

    /// Multiplier of post-retirement utility, l_bar^{(1 - alpha)(1 - gamma*)}.
    double leisure_weight() const noexcept { return leisure_weight_; }

    /// Pre-retirement felicity c^{1-gamma} / (1 - gamma).
    double utility_work(double c) const { return std::pow(c, 1.0 - gamma_) / (1.0 - gamma_); }
    /// Post-retirement felicity, scaled by the leisure weight.
    double utility_retired(double c) const { return leisure_weight_ * utility_work(c); }

    double age(double t) const noexcept { return x_ + t; }

    RawParams raw() const {
        RawParams raw;
        raw.r = r_;
        raw.rho = rho_;
        raw.alpha = alpha_;
        raw.gamma_star = gamma_star_;
        raw.l_bar = l_bar_;
        raw.m = m_;
        raw.b = b_;
        raw.x = x_;
        raw.T_age = T_age_;
        return raw;
    }

    /// Copy with a different interest rate; rho is kept.
    ModelParams with_r(double r) const;
    /// Copy with a different post-retirement leisure endowment.
    ModelParams with_l_bar(double l_bar) const;

    friend ModelParams derive_params(const RawParams& raw);

private:
    ModelParams() = default;

    double r_ = 0, rho_ = 0, alpha_ = 0, gamma_ = 0, gamma_star_ = 0, gamma_tilde_ = 0;
    double l_bar_ = 0, B_ = 0, leisure_weight_ = 0;
    double m_ = 0, b_ = 0, x_ = 0, T_age_ = 0;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

inline bool finite(double v) { return std::isfinite(v); }

}  // namespace detail

/// Validates raw inputs and fills every derived constant.
inline ModelParams derive_params(const RawParams& raw) {
    using detail::finite;
    using detail::require;

    require(finite(raw.r), "r must be finite");
    require(finite(raw.alpha) && raw.alpha > 0.0 && raw.alpha < 1.0, "alpha must lie in (0, 1)");
    require(!(raw.gamma && raw.gamma_star), "supply only one of gamma and gamma_star");
    require(finite(raw.l_bar) && raw.l_bar > 1.0, "l_bar must exceed 1");
    require(finite(raw.b) && raw.b > 0.0, "b must be positive");
    require(finite(raw.m), "m must be finite");
    require(finite(raw.x) && raw.x >= 0.0, "x must be non-negative");
    require(finite(raw.T_age) && raw.T_age - raw.x > 0.0, "horizon T_age - x must be positive");

    ModelParams p;
    p.r_ = raw.r;
    p.rho_ = raw.rho.value_or(raw.r);
    require(finite(p.rho_), "rho must be finite");
    p.alpha_ = raw.alpha;

    if (raw.gamma_star) {
        p.gamma_star_ = *raw.gamma_star;
    } else {
        const double gamma = raw.gamma.value_or(2.0);
        require(finite(gamma) && gamma > 0.0, "gamma must be positive");
        require(gamma != 1.0, "gamma must differ from 1");
        p.gamma_star_ = star_from_gamma(raw.alpha, gamma);
    }
    require(finite(p.gamma_star_) && p.gamma_star_ > 0.0, "gamma_star must be positive");
    require(p.gamma_star_ != 1.0, "gamma_star must differ from 1");

    // Stored from gamma_star so the defining identity holds exactly.
    p.gamma_ = gamma_from_star(p.alpha_, p.gamma_star_);
    require(p.gamma_ > 0.0, "gamma must be positive");
    require(p.gamma_ != 1.0, "gamma must differ from 1");
    p.gamma_tilde_ = 1.0 / p.gamma_;

    p.l_bar_ = raw.l_bar;
    const double leisure_exponent = (1.0 - p.alpha_) * (1.0 - p.gamma_star_);
    p.leisure_weight_ = std::pow(p.l_bar_, leisure_exponent);
    p.B_ = std::pow(p.l_bar_, p.gamma_tilde_ * leisure_exponent);

    p.m_ = raw.m;
    p.b_ = raw.b;
    p.x_ = raw.x;
    p.T_age_ = raw.T_age;
    return p;
}

inline ModelParams default_params() { return derive_params(RawParams{}); }

inline ModelParams ModelParams::with_r(double r) const {
    RawParams raw = this->raw();
    raw.r = r;
    return derive_params(raw);
}

inline ModelParams ModelParams::with_l_bar(double l_bar) const {
    RawParams raw = this->raw();
    raw.l_bar = l_bar;
    return derive_params(raw);
}

/// Parses a flat `key = value` file. Blank lines and `#` comments are
/// ignored. Keys: r, rho, alpha, gamma | gamma_star, l_bar, b, m, x, T_age.
/// Missing keys keep their defaults; unknown or repeated keys are errors.
inline RawParams parse_config(std::istream& in) {
    RawParams raw;
    std::map<std::string, bool> seen;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;

        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        }
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto z = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string{} : s.substr(a, z - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string text = trim(line.substr(eq + 1));

        double value = 0.0;
        {
            std::istringstream ss(text);
            ss >> value;
            if (text.empty() || ss.fail() || !ss.eof()) {
                throw ConfigError("key '" + key + "': cannot parse value '" + text + "'");
            }
        }
        if (seen[key]) throw ConfigError("key '" + key + "' given twice");
        seen[key] = true;

        if (key == "r") raw.r = value;
        else if (key == "rho") raw.rho = value;
        else if (key == "alpha") raw.alpha = value;
        else if (key == "gamma") raw.gamma = value;
        else if (key == "gamma_star") raw.gamma_star = value;
        else if (key == "l_bar") raw.l_bar = value;
        else if (key == "b") raw.b = value;
        else if (key == "m") raw.m = value;
        else if (key == "x") raw.x = value;
        else if (key == "T_age") raw.T_age = value;
        else throw ConfigError("unknown key '" + key + "'");
    }
    return raw;
}

inline ModelParams load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return derive_params(parse_config(in));
}

}  // namespace retirement
