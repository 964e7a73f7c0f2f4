#include "stoplab/rates.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace stoplab;

namespace {

StoppingProblem reference_problem() { return {DiffusionSpec::gbm(0.0, 1.0), Payoff::call(1.0), 1.0}; }

const UniversalConstants kConstants{0.589, 0.582, 0.0, 0.0};

std::vector<RateRow> synthetic_rows(const std::vector<double>& hs, double cb, double db, double cv, double ev) {
    std::vector<RateRow> rows;
    for (double h : hs) {
        RateRow r;
        r.h = h;
        r.boundary_gap = cb * std::sqrt(h) + db * h;
        r.rel_value_gap = -(cv * h + ev * std::pow(h, 1.5));
        rows.push_back(r);
    }
    return rows;
}

} // namespace

TEST(Fit, RecoversSyntheticCoefficients) {
    const auto rows = synthetic_rows({0.04, 0.02, 0.01, 0.005, 0.0025}, 1.164, 0.3, 0.2503, 0.1);
    const auto fit = fit_rates(rows);
    EXPECT_NEAR(fit.boundary.leading, 1.164, 1e-10);
    EXPECT_NEAR(fit.boundary.correction, 0.3, 1e-10);
    EXPECT_NEAR(fit.value.leading, 0.2503, 1e-10);
    EXPECT_NEAR(fit.value.correction, 0.1, 1e-10);
    EXPECT_LE(fit.boundary.residual_norm, 1e-12);
}

TEST(Fit, DuplicateStepsAreSingular) {
    try {
        least_squares_two_term({0.01, 0.01, 0.01}, {1.0, 1.0, 1.0}, 0.5, 1.0);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SingularDesign);
    }
}

TEST(Fit, NeedsThreeRows) {
    EXPECT_THROW(fit_rates(synthetic_rows({0.02, 0.01}, 1.0, 0.0, 1.0, 0.0)), Error);
}

TEST(Verdict, RelativeErrorAgainstTheory) {
    const auto pass = judge(1.10, 1.164, 0.10);
    EXPECT_TRUE(pass.pass);
    EXPECT_NEAR(pass.rel_error, 0.064 / 1.164, 1e-12);
    const auto fail = judge(1.00, 1.164, 0.10);
    EXPECT_FALSE(fail.pass);
    EXPECT_NEAR(fail.rel_error, 0.164 / 1.164, 1e-12);
    EXPECT_FALSE(judge(1.10, 1.164, 0.0).pass);
    EXPECT_TRUE(judge(1.164, 1.164, 0.0).pass);
}

TEST(Theory, ReferenceCoefficients) {
    const auto cont = solve_continuous(reference_problem());
    const auto t = theory_coefficients(cont, kConstants);
    EXPECT_NEAR(t.boundary, 1.164, 1e-12);
    EXPECT_NEAR(t.value, 0.250276, 1e-12);
    EXPECT_NEAR(t.value, 0.2503, 1e-4);
}

TEST(Theory, GbmCallIdentity) {
    // For a GBM call, x*^2 A = alpha (alpha - 1), so c_value = alpha (alpha - 1) sigma^2 (Theta - Gamma^2) / 2.
    for (const auto& [b, s, r] : {std::tuple{0.0, 1.0, 1.0}, {0.02, 0.3, 0.06}, {-0.1, 0.5, 0.2}}) {
        const auto cont = solve_continuous({DiffusionSpec::gbm(b, s), Payoff::call(1.3), r});
        const double a = cont.closed_form().alpha;
        const auto t = theory_coefficients(cont, kConstants);
        const double expected = 0.5 * a * (a - 1.0) * s * s * (kConstants.theta - kConstants.gamma * kConstants.gamma);
        EXPECT_NEAR(t.value, expected, 1e-12 * std::abs(expected));
    }
}

TEST(Theory, DegenerateJumpIsRejected) {
    ContinuousSolution s = solve_continuous(reference_problem());
    s.A = 0.0;
    try {
        theory_coefficients(s, kConstants);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DegenerateA);
    }
}

TEST(Bands, WidthOfScaledGaps) {
    const auto rows = synthetic_rows({0.04, 0.01}, 1.0, 0.0, 0.25, 0.0);
    const auto b = rate_bands(rows);
    EXPECT_NEAR(b.boundary_width, 0.0, 1e-12);
    EXPECT_NEAR(b.value_width, 0.0, 1e-12);
}

TEST(Sweep, RejectsBadInput) {
    SweepConfig cfg;
    cfg.h_list.clear();
    EXPECT_THROW(run_sweep(reference_problem(), cfg), Error);
    cfg.h_list = {0.01};
    cfg.x_ref = 2.5;
    EXPECT_THROW(run_sweep(reference_problem(), cfg), Error);
    cfg.x_ref.reset();
    cfg.h_list = {0.01, 0.02};
    EXPECT_THROW(run_sweep(reference_problem(), cfg), Error);
}

TEST(Sweep, ReferenceProblemRows) {
    SweepConfig cfg;
    cfg.x_ref = 1.0;
    const auto s = run_sweep(reference_problem(), cfg);
    ASSERT_EQ(s.rows.size(), 5u);
    for (std::size_t i = 0; i < s.rows.size(); ++i) {
        EXPECT_GT(s.rows[i].boundary_gap, 0.0);
        EXPECT_LT(s.rows[i].rel_value_gap, 0.0);
        EXPECT_TRUE(s.rows[i].upper_interval);
        if (i > 0) {
            EXPECT_LT(s.rows[i].boundary_gap, s.rows[i - 1].boundary_gap);
            EXPECT_GT(s.rows[i].rel_value_gap, s.rows[i - 1].rel_value_gap);
        }
    }
    EXPECT_EQ(s.checks.refinement_pairs, 4u);
    EXPECT_TRUE(s.checks.ordering_holds());

    const auto cmp = compare_report(fit_rates(s.rows), theory_coefficients(s.continuous, kConstants));
    EXPECT_TRUE(cmp.pass()) << cmp.boundary.rel_error << " " << cmp.value.rel_error;
}

TEST(Sweep, PayoffScalingLeavesRelativeGapsUnchanged) {
    // 2 (x - 1)^+ as a power basket; threshold and relative value gaps are scale free.
    const StoppingProblem scaled{DiffusionSpec::gbm(0.0, 1.0), Payoff::power_basket({{2.0, 1.0}}, 2.0), 1.0};
    SweepConfig cfg;
    cfg.h_list = {0.04, 0.02, 0.01};
    cfg.x_ref = 1.0;
    cfg.grid = GridSpec{0.06, 20.0, 2048};
    const auto a = run_sweep(reference_problem(), cfg);
    const auto b = run_sweep(scaled, cfg);
    EXPECT_NEAR(b.continuous.threshold, a.continuous.threshold, 1e-6);
    EXPECT_NEAR(b.value_ref, 2.0 * a.value_ref, 1e-6);
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        EXPECT_NEAR(b.rows[i].boundary_gap, a.rows[i].boundary_gap, 1e-6);
        EXPECT_NEAR(b.rows[i].rel_value_gap, a.rows[i].rel_value_gap, 1e-6);
    }
}
