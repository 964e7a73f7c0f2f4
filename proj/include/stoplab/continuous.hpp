#pragma once

// Continuous-time perpetual stopping: V = c1 f1 on (0, x*], V = phi on [x*, inf),
// where f1 is the solution of L f = r f bounded at 0 and (c1, x*) follow from
// value matching and smooth fit.

#include "stoplab/error.hpp"
#include "stoplab/model.hpp"

#include <array>
#include <cmath>
#include <optional>
#include <variant>
#include <vector>

namespace stoplab {

struct ClosedFormGbm {
    double alpha = 0.0;
    double B = 0.0;
};

/// f1 integrated in t = log x; g(t) = f1(e^t) and slope = dg/dt = x f1'(x).
struct TabulatedOde {
    double t0 = 0.0;
    double dt = 0.0;
    std::vector<double> g;
    std::vector<double> slope;
    double c1 = 0.0;
};

struct ContinuousSolution {
    StoppingProblem problem;
    double threshold = 0.0;
    double A = 0.0;
    double curvature_left = 0.0;  ///< V''(x*-)
    bool degenerate = false;      ///< A <= 0
    double drift_at_threshold = 0.0;
    double sigma_at_threshold = 0.0;
    double value_match_residual = 0.0;
    double smooth_fit_residual = 0.0;
    std::variant<ClosedFormGbm, TabulatedOde> representation;

    bool is_closed_form() const { return std::holds_alternative<ClosedFormGbm>(representation); }
    const ClosedFormGbm& closed_form() const { return std::get<ClosedFormGbm>(representation); }
    const TabulatedOde& tabulated() const { return std::get<TabulatedOde>(representation); }

    double domain_lower() const {
        return is_closed_form() ? 0.0 : std::exp(tabulated().t0);
    }
};

struct ThresholdData {
    double threshold = 0.0;
    double phi = 0.0;
    double dphi = 0.0;
    double d2phi = 0.0;
    double drift = 0.0;
    double volatility = 0.0;
    double rate = 0.0;
};

struct CurvatureJump {
    double A = 0.0;
    double curvature_left = 0.0;
    bool degenerate = false;
};

/// A = (V''(x*-) - phi''(x*)) / phi(x*), with V''(x*-) taken from (L - r)V = 0
/// and smooth fit: V'' = 2 (r phi - b x phi') / (sigma^2 x^2).
inline CurvatureJump compute_A(const ThresholdData& d) {
    if (d.phi == 0.0) fail(ErrorCode::PayoffVanishes, "payoff vanishes at threshold");
    const double x = d.threshold;
    const double s2x2 = d.volatility * d.volatility * x * x;
    CurvatureJump out;
    out.curvature_left = 2.0 * (d.rate * d.phi - d.drift * x * d.dphi) / s2x2;
    out.A = (out.curvature_left - d.d2phi) / d.phi;
    out.degenerate = !(out.A > 0.0);
    return out;
}

inline ThresholdData threshold_data(const StoppingProblem& problem, double x) {
    return {x,
            problem.payoff.eval(x, 0),
            problem.payoff.eval(x, 1),
            problem.payoff.eval(x, 2),
            problem.diffusion.drift(x),
            problem.diffusion.volatility(x),
            problem.rate};
}

/// Closed form for GBM and phi = (x - k)^+.
inline ContinuousSolution solve_gbm_call(double drift, double volatility, double rate, double strike) {
    require(volatility > 0.0 && strike > 0.0, "closed form needs sigma > 0 and k > 0");
    if (!(rate > drift)) fail(ErrorCode::ValidationInfiniteValue, "no finite solution: r <= b");
    ContinuousSolution sol;
    sol.problem = {DiffusionSpec::gbm(drift, volatility), Payoff::call(strike), rate};
    const double alpha = gbm_exponent(drift, volatility, rate);
    const double x_star = alpha * strike / (alpha - 1.0);
    const double B = (x_star - strike) / std::pow(x_star, alpha);
    sol.threshold = x_star;
    sol.curvature_left = B * alpha * (alpha - 1.0) * std::pow(x_star, alpha - 2.0);
    sol.A = sol.curvature_left / (x_star - strike);
    sol.degenerate = !(sol.A > 0.0);
    sol.drift_at_threshold = drift;
    sol.sigma_at_threshold = volatility;
    sol.value_match_residual = std::abs(B * std::pow(x_star, alpha) - (x_star - strike));
    sol.smooth_fit_residual = std::abs(B * alpha * std::pow(x_star, alpha - 1.0) - 1.0);
    sol.representation = ClosedFormGbm{alpha, B};
    return sol;
}

struct OdeConfig {
    double x_lo = 0.0;     ///< 0: kink / 20 clipped to the coefficient domain
    double x_hi = 0.0;     ///< 0: 100 * max(kink, x_lo) clipped to the domain
    int steps = 20000;     ///< RK4 steps across [x_lo, x_hi] in log x
    double root_tol = 1e-13;  ///< bisection tolerance in log x
};

namespace detail {

using OdeState = std::array<double, 2>;  // (g, dg/dt)

inline OdeState ode_rhs(const StoppingProblem& p, double t, const OdeState& y) {
    const double x = std::exp(t);
    const double s2 = std::pow(p.diffusion.volatility(x), 2);
    const double b = p.diffusion.drift(x);
    return {y[1], 2.0 * p.rate / s2 * y[0] + (1.0 - 2.0 * b / s2) * y[1]};
}

inline OdeState rk4_step(const StoppingProblem& p, double t, const OdeState& y, double dt) {
    auto axpy = [](const OdeState& a, double s, const OdeState& k) {
        return OdeState{a[0] + s * k[0], a[1] + s * k[1]};
    };
    const auto k1 = ode_rhs(p, t, y);
    const auto k2 = ode_rhs(p, t + 0.5 * dt, axpy(y, 0.5 * dt, k1));
    const auto k3 = ode_rhs(p, t + 0.5 * dt, axpy(y, 0.5 * dt, k2));
    const auto k4 = ode_rhs(p, t + dt, axpy(y, dt, k3));
    return {y[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])};
}

/// State at arbitrary t by a partial RK4 step from the node at or below t.
inline OdeState ode_state_at(const StoppingProblem& p, const TabulatedOde& tab, double t) {
    const double pos = (t - tab.t0) / tab.dt;
    auto i = static_cast<std::ptrdiff_t>(std::floor(pos));
    i = std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(tab.g.size()) - 1);
    const double ti = tab.t0 + static_cast<double>(i) * tab.dt;
    const OdeState yi{tab.g[static_cast<std::size_t>(i)], tab.slope[static_cast<std::size_t>(i)]};
    if (t == ti) return yi;
    return rk4_step(p, ti, yi, t - ti);
}

/// Smooth-fit function scaled by x: x (f' phi - f phi') = slope phi - x g phi'.
inline double smooth_fit_gap(const StoppingProblem& p, double t, const OdeState& y) {
    const double x = std::exp(t);
    return y[1] * p.payoff.eval(x, 0) - x * y[0] * p.payoff.eval(x, 1);
}

} // namespace detail

/// Shooting solver for general coefficients: integrate L f = r f outward from
/// x_lo with f(x_lo) = 1, f'(x_lo) = alpha_loc / x_lo, then locate the smooth-fit root.
inline ContinuousSolution solve_general(const StoppingProblem& problem, const OdeConfig& cfg = {}) {
    require_valid(problem);
    require(cfg.steps >= 10, "ODE step count must be >= 10");
    const double kink = problem.payoff.kink();
    const double dom_lo = problem.diffusion.domain_lower();
    const double dom_hi = problem.diffusion.domain_upper();

    double x_lo = cfg.x_lo > 0.0 ? cfg.x_lo : (kink > 0.0 ? kink / 20.0 : 1e-3);
    x_lo = std::max(x_lo, dom_lo);
    double x_hi = cfg.x_hi > 0.0 ? cfg.x_hi : 100.0 * std::max(kink, x_lo);
    x_hi = std::min(x_hi, dom_hi);
    if (!(x_lo > 0.0) || !(x_hi > x_lo)) fail(ErrorCode::OutOfDomain, "empty ODE interval [x_lo, x_hi]");

    TabulatedOde tab;
    tab.t0 = std::log(x_lo);
    tab.dt = (std::log(x_hi) - tab.t0) / cfg.steps;
    const double alpha_loc = gbm_exponent(problem.diffusion.drift(x_lo),
                                          problem.diffusion.volatility(x_lo), problem.rate);
    detail::OdeState y{1.0, alpha_loc};
    tab.g.push_back(y[0]);
    tab.slope.push_back(y[1]);

    // Bracket search starts strictly above the payoff kink.
    const double t_start = std::max(tab.t0, kink > 0.0 ? std::log(kink) + 1e-9 : tab.t0);
    std::optional<double> t_prev;
    double gap_prev = 0.0;
    std::optional<std::pair<double, double>> bracket;
    for (int i = 0; i < cfg.steps && !bracket; ++i) {
        const double ti = tab.t0 + i * tab.dt;
        const double t_next = tab.t0 + (i + 1) * tab.dt;
        const detail::OdeState y_next = detail::rk4_step(problem, ti, y, tab.dt);
        if (!std::isfinite(y_next[0]) || !std::isfinite(y_next[1])) {
            fail(ErrorCode::RootNotBracketed, "smooth-fit root not bracketed: ODE solution overflowed");
        }
        if (!t_prev && t_start < t_next) {
            const auto ys = t_start > ti ? detail::rk4_step(problem, ti, y, t_start - ti) : y;
            t_prev = t_start;
            gap_prev = detail::smooth_fit_gap(problem, t_start, ys);
            if (gap_prev >= 0.0) {
                fail(ErrorCode::RootNotBracketed,
                     "smooth-fit root not bracketed: stopping is optimal right above the kink");
            }
        }
        y = y_next;
        tab.g.push_back(y[0]);
        tab.slope.push_back(y[1]);
        if (t_prev) {
            const double gap = detail::smooth_fit_gap(problem, t_next, y);
            if (gap >= 0.0) {
                bracket = std::pair{*t_prev, t_next};
            } else {
                t_prev = t_next;
                gap_prev = gap;
            }
        }
    }
    if (!bracket) fail(ErrorCode::RootNotBracketed, "smooth-fit root not bracketed on (x_lo, x_hi]");

    auto [lo, hi] = *bracket;
    for (int it = 0; it < 200 && hi - lo > cfg.root_tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double gap = detail::smooth_fit_gap(problem, mid, detail::ode_state_at(problem, tab, mid));
        (gap < 0.0 ? lo : hi) = mid;
    }
    const double t_star = 0.5 * (lo + hi);
    const auto ys = detail::ode_state_at(problem, tab, t_star);
    const double x_star = std::exp(t_star);
    const auto data = threshold_data(problem, x_star);
    tab.c1 = data.phi / ys[0];

    ContinuousSolution sol;
    sol.problem = problem;
    sol.threshold = x_star;
    const auto jump = compute_A(data);
    sol.A = jump.A;
    sol.curvature_left = jump.curvature_left;
    sol.degenerate = jump.degenerate;
    sol.drift_at_threshold = data.drift;
    sol.sigma_at_threshold = data.volatility;
    sol.value_match_residual = std::abs(tab.c1 * ys[0] - data.phi);
    sol.smooth_fit_residual = std::abs(tab.c1 * ys[1] / x_star - data.dphi);
    sol.representation = std::move(tab);
    return sol;
}

/// V(x): phi on [x*, inf), the continuation representation below.
inline double value_at(const ContinuousSolution& sol, double x) {
    if (!(x > 0.0)) fail(ErrorCode::OutOfDomain, "value requested at non-positive price");
    if (x >= sol.threshold) return sol.problem.payoff.eval(x, 0);
    if (sol.is_closed_form()) {
        const auto& cf = sol.closed_form();
        return cf.B * std::pow(x, cf.alpha);
    }
    const auto& tab = sol.tabulated();
    const double t = std::log(x);
    if (t < tab.t0) fail(ErrorCode::OutOfDomain, "value requested below the ODE domain (out of domain)");
    return tab.c1 * detail::ode_state_at(sol.problem, tab, t)[0];
}

/// (L - r)V at x: central differences in the continuation region, exact payoff
/// derivatives on the stopped region x >= x*.
inline double generator_residual(const ContinuousSolution& sol, double x, double fd_step = 1e-4) {
    const auto& p = sol.problem;
    const double b = p.diffusion.drift(x);
    const double s = p.diffusion.volatility(x);
    if (x >= sol.threshold) {
        return -p.rate * p.payoff.eval(x, 0) + b * x * p.payoff.eval(x, 1) +
               0.5 * s * s * x * x * p.payoff.eval(x, 2);
    }
    const double vm = value_at(sol, x - fd_step);
    const double v0 = value_at(sol, x);
    const double vp = value_at(sol, x + fd_step);
    const double d1 = (vp - vm) / (2.0 * fd_step);
    const double d2 = (vp - 2.0 * v0 + vm) / (fd_step * fd_step);
    return 0.5 * s * s * x * x * d2 + b * x * d1 - p.rate * v0;
}

/// Closed form for GBM calls, shooting otherwise.
inline ContinuousSolution solve_continuous(const StoppingProblem& problem, const OdeConfig& cfg = {}) {
    require_valid(problem);
    if (problem.diffusion.is_gbm() && problem.payoff.kind() == Payoff::Kind::Call) {
        const auto& g = problem.diffusion.as_gbm();
        return solve_gbm_call(g.drift, g.volatility, problem.rate, problem.payoff.strike());
    }
    return solve_general(problem, cfg);
}

} // namespace stoplab
