#pragma once

// h-sweeps of the discrete problem and comparison of the observed rates
//
//   x* - x*^h          ~ c_boundary sqrt(h),  c_boundary = Gamma x* sigma(x*)
//   -(V^h - V)(x) / V  ~ c_value h,           c_value = A x*^2 sigma(x*)^2 (Theta - Gamma^2) / 2
//
// with the predicted coefficients.

#include "stoplab/constants.hpp"
#include "stoplab/continuous.hpp"
#include "stoplab/discrete.hpp"
#include "stoplab/error.hpp"
#include "stoplab/parallel.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace stoplab {

struct UniversalConstants {
    double theta = 0.0;
    double gamma = 0.0;
    double theta_se = 0.0;
    double gamma_se = 0.0;

    static UniversalConstants from_estimate(const ConstantsEstimate& e) {
        return {e.theta, e.gamma, e.theta_se, e.gamma_se};
    }
};

struct TheoryCoefficients {
    double boundary = 0.0;
    double value = 0.0;
    UniversalConstants constants;
    double threshold = 0.0;
    double A = 0.0;
    double sigma = 0.0;
};

inline TheoryCoefficients theory_coefficients(const ContinuousSolution& cont, const UniversalConstants& c) {
    if (!(cont.A > 0.0)) fail(ErrorCode::DegenerateA, "rate coefficients inapplicable: curvature jump A = 0");
    TheoryCoefficients t;
    t.constants = c;
    t.threshold = cont.threshold;
    t.A = cont.A;
    t.sigma = cont.sigma_at_threshold;
    t.boundary = c.gamma * cont.threshold * t.sigma;
    t.value = 0.5 * cont.A * cont.threshold * cont.threshold * t.sigma * t.sigma * (c.theta - c.gamma * c.gamma);
    return t;
}

struct RateRow {
    double h = 0.0;
    double threshold_h = 0.0;
    double value_h = 0.0;          ///< V^h(x_ref)
    double boundary_gap = 0.0;     ///< x* - x*^h
    double rel_value_gap = 0.0;    ///< (V^h - V)(x_ref) / V(x_ref)
    std::int64_t iterations = 0;
    double final_update = 0.0;
    double residual = 0.0;
    double clamped_mass_max = 0.0;
    bool upper_interval = true;
};

struct SweepConfig {
    std::vector<double> h_list{0.04, 0.02, 0.01, 0.005, 0.0025};
    std::optional<double> x_ref;       ///< defaults to x*/2
    std::optional<GridSpec> grid;      ///< defaults to [x*/100, 10 x*], 4096 nodes
    DiscreteConfig discrete;
    OdeConfig ode;
    unsigned workers = 1;              ///< concurrent per-h solves
};

/// Ordering and structure checks gathered over a sweep.
struct SweepChecks {
    double max_below_payoff = 0.0;     ///< max over h, nodes of phi - V^h
    double max_above_continuous = 0.0; ///< max over h, nodes of V^h - V
    double max_refinement_excess = 0.0;///< max over 2h/h pairs, nodes of V^{2h} - V^h
    std::size_t refinement_pairs = 0;
    double max_threshold_excess = 0.0; ///< max over h of x*^h - x*
    bool upper_intervals = true;
    double eps_sol = 0.0;

    bool ordering_holds() const {
        return max_below_payoff <= 0.0 && max_above_continuous <= eps_sol &&
               max_refinement_excess <= eps_sol && max_threshold_excess <= 1e-6;
    }
};

struct SweepResult {
    ContinuousSolution continuous;
    double x_ref = 0.0;
    double value_ref = 0.0;            ///< V(x_ref)
    GridSpec grid;
    std::vector<RateRow> rows;
    std::vector<DiscreteSolution> solutions;
    SweepChecks checks;
};

/// [x*/100, 10 x*] with n nodes, clipped to where the continuous solution and the
/// coefficients are defined.
inline GridSpec default_grid(const StoppingProblem& problem, const ContinuousSolution& cont,
                             std::size_t n_nodes = 4096) {
    GridSpec g = GridSpec::around_threshold(cont.threshold, n_nodes);
    if (!cont.is_closed_form()) g.x_min = std::max(g.x_min, cont.domain_lower());
    g.x_min = std::max(g.x_min, problem.diffusion.domain_lower());
    g.x_max = std::min(g.x_max, problem.diffusion.domain_upper());
    return g;
}

inline SweepResult run_sweep(const StoppingProblem& problem, const SweepConfig& cfg) {
    require_valid(problem);
    if (cfg.h_list.empty()) fail(ErrorCode::InvalidArgument, "sweep needs a non-empty h list");
    for (std::size_t i = 0; i < cfg.h_list.size(); ++i) {
        require(cfg.h_list[i] > 0.0, "sweep step sizes must be > 0");
        if (i > 0) require(cfg.h_list[i] < cfg.h_list[i - 1], "sweep h list must be strictly decreasing");
    }

    SweepResult out;
    out.continuous = solve_continuous(problem, cfg.ode);
    const double x_star = out.continuous.threshold;
    out.grid = cfg.grid.value_or(default_grid(problem, out.continuous));
    out.grid.validate_contains(x_star);
    out.x_ref = cfg.x_ref.value_or(0.5 * x_star);
    require(out.x_ref > 0.0 && out.x_ref < x_star, "x_ref must lie in (0, x*)");
    require(out.x_ref >= out.grid.x_min && out.x_ref <= out.grid.x_max, "x_ref must lie inside the grid");
    out.value_ref = value_at(out.continuous, out.x_ref);

    const std::size_t n_h = cfg.h_list.size();
    std::vector<std::optional<DiscreteSolution>> solved(n_h);
    parallel_blocks(n_h, cfg.workers, [&](std::size_t i) {
        const double h = cfg.h_list[i];
        try {
            solved[i] = solve_discrete(problem, h, out.grid, cfg.discrete, x_star);
        } catch (const Error& e) {
            throw Error(e.code(), "sweep aborted at h = " + std::to_string(h) + ": " + e.what());
        }
    });

    const auto nodes = out.grid.nodes();
    std::vector<double> v_cont(nodes.size());
    for (std::size_t j = 0; j < nodes.size(); ++j) v_cont[j] = value_at(out.continuous, nodes[j]);

    auto& chk = out.checks;
    for (std::size_t i = 0; i < n_h; ++i) {
        auto& sol = *solved[i];
        RateRow row;
        row.h = sol.h;
        row.threshold_h = *sol.threshold;
        row.value_h = value_at_h(sol, out.x_ref);
        row.boundary_gap = x_star - row.threshold_h;
        row.rel_value_gap = (row.value_h - out.value_ref) / out.value_ref;
        row.iterations = sol.iterations;
        row.final_update = sol.final_update;
        row.residual = sol.residual;
        row.clamped_mass_max = sol.clamped_mass_max;
        row.upper_interval = exercise_structure(sol).upper_interval;
        out.rows.push_back(row);

        chk.eps_sol = std::max(chk.eps_sol, sol.eps_sol());
        chk.upper_intervals = chk.upper_intervals && row.upper_interval;
        chk.max_threshold_excess = std::max(chk.max_threshold_excess, row.threshold_h - x_star);
        for (std::size_t j = 0; j < nodes.size(); ++j) {
            chk.max_below_payoff = std::max(chk.max_below_payoff, sol.payoff[j] - sol.value[j]);
            chk.max_above_continuous = std::max(chk.max_above_continuous, sol.value[j] - v_cont[j]);
        }
        if (i > 0 && std::abs(cfg.h_list[i - 1] - 2.0 * sol.h) <= 1e-12 * sol.h) {
            const auto& coarse = *solved[i - 1];
            ++chk.refinement_pairs;
            for (std::size_t j = 0; j < nodes.size(); ++j) {
                chk.max_refinement_excess = std::max(chk.max_refinement_excess, coarse.value[j] - sol.value[j]);
            }
        }
    }
    for (auto& s : solved) out.solutions.push_back(std::move(*s));
    return out;
}

struct TwoTermFit {
    double leading = 0.0;     ///< reported coefficient
    double correction = 0.0;  ///< next-order term absorbed by the fit
    double residual_norm = 0.0;
};

struct FittedRates {
    TwoTermFit boundary;  ///< x* - x*^h = c sqrt(h) + d h
    TwoTermFit value;     ///< -(V^h - V)/V = c h + e h^{3/2}
};

inline TwoTermFit least_squares_two_term(const std::vector<double>& h, const std::vector<double>& y,
                                         double p_leading, double p_correction) {
    const auto n = static_cast<Eigen::Index>(h.size());
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        X(i, 0) = std::pow(h[static_cast<std::size_t>(i)], p_leading);
        X(i, 1) = std::pow(h[static_cast<std::size_t>(i)], p_correction);
        b[i] = y[static_cast<std::size_t>(i)];
    }
    // Column scaling keeps the rank test meaningful across h ranges.
    const Eigen::Vector2d scale(X.col(0).norm(), X.col(1).norm());
    if (!(scale[0] > 0.0) || !(scale[1] > 0.0)) fail(ErrorCode::SingularDesign, "singular design matrix");
    const Eigen::MatrixXd Xs = X * scale.cwiseInverse().asDiagonal();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xs);
    qr.setThreshold(1e-10);
    if (qr.rank() < 2) fail(ErrorCode::SingularDesign, "singular design matrix (duplicate h?)");
    const Eigen::Vector2d coef = qr.solve(b).cwiseQuotient(scale);
    TwoTermFit fit;
    fit.leading = coef[0];
    fit.correction = coef[1];
    fit.residual_norm = (X * coef - b).norm();
    return fit;
}

inline FittedRates fit_rates(const std::vector<RateRow>& rows) {
    if (rows.size() < 3) fail(ErrorCode::InvalidArgument, "rate fits need at least 3 rows");
    std::vector<double> h, gap, vgap;
    for (const auto& r : rows) {
        h.push_back(r.h);
        gap.push_back(r.boundary_gap);
        vgap.push_back(-r.rel_value_gap);
    }
    return {least_squares_two_term(h, gap, 0.5, 1.0), least_squares_two_term(h, vgap, 1.0, 1.5)};
}

struct RateTolerances {
    double boundary = 0.10;
    double value = 0.15;
};

struct CoefficientVerdict {
    double fitted = 0.0;
    double theory = 0.0;
    double rel_error = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct RateComparison {
    CoefficientVerdict boundary;
    CoefficientVerdict value;

    bool pass() const { return boundary.pass && value.pass; }
};

inline CoefficientVerdict judge(double fitted, double theory, double tolerance) {
    CoefficientVerdict v{fitted, theory, 0.0, tolerance, false};
    v.rel_error = (fitted == theory) ? 0.0 : std::abs(fitted - theory) / std::abs(theory);
    v.pass = v.rel_error <= tolerance;
    return v;
}

inline RateComparison compare_report(const FittedRates& fitted, const TheoryCoefficients& theory,
                                     const RateTolerances& tol = {}) {
    return {judge(fitted.boundary.leading, theory.boundary, tol.boundary),
            judge(fitted.value.leading, theory.value, tol.value)};
}

/// (max - min) / mean of the scaled gaps across the sweep.
struct RateBands {
    double boundary_width = 0.0;  ///< of (x* - x*^h) / sqrt(h)
    double value_width = 0.0;     ///< of |rel value gap| / h
};

inline RateBands rate_bands(const std::vector<RateRow>& rows) {
    auto width = [](const std::vector<double>& v) {
        const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        return (*hi - *lo) / mean;
    };
    std::vector<double> b, v;
    for (const auto& r : rows) {
        b.push_back(r.boundary_gap / std::sqrt(r.h));
        v.push_back(std::abs(r.rel_value_gap) / r.h);
    }
    return {width(b), width(v)};
}

} // namespace stoplab
