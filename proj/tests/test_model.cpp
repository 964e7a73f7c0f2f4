#include "stoplab/model.hpp"
#include "stoplab/problem_io.hpp"
#include "stoplab/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>

using namespace stoplab;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an error";
    return ErrorCode::InvalidArgument;
}

} // namespace

TEST(Validate, GbmCallWithRateAboveDriftIsValid) {
    const StoppingProblem p{DiffusionSpec::gbm(0.05, 0.3), Payoff::call(1.0), 0.1};
    const auto report = validate_problem(p);
    EXPECT_TRUE(report.valid());
    EXPECT_TRUE(report.warnings.empty());
}

TEST(Validate, GbmCallWithDriftAboveRateHasInfiniteValue) {
    const StoppingProblem p{DiffusionSpec::gbm(0.1, 0.3), Payoff::call(1.0), 0.05};
    const auto report = validate_problem(p);
    ASSERT_FALSE(report.valid());
    EXPECT_EQ(report.errors.front().code, ErrorCode::ValidationInfiniteValue);
    EXPECT_NE(report.errors.front().message.find("value infinite"), std::string::npos);
    EXPECT_EQ(to_string(ErrorCode::ValidationInfiniteValue), "VALIDATION_INFINITE_VALUE");
}

TEST(Validate, ZeroVolatilityIsRejected) {
    for (const auto& payoff : {Payoff::call(1.0), Payoff::power_basket({{1.0, 2.0}}, 0.0)}) {
        const StoppingProblem p{DiffusionSpec::gbm(0.0, 0.0), payoff, 1.0};
        const auto report = validate_problem(p);
        ASSERT_FALSE(report.valid());
        EXPECT_EQ(report.errors.front().code, ErrorCode::ValidationSigma);
        EXPECT_NE(report.errors.front().message.find("sigma not bounded below"), std::string::npos);
    }
}

TEST(Validate, NonPositiveRateIsRejected) {
    const StoppingProblem p{DiffusionSpec::gbm(-0.1, 0.3), Payoff::call(1.0), 0.0};
    EXPECT_EQ(code_of([&] { require_valid(p); }), ErrorCode::ValidationRate);
}

TEST(Validate, TabulatedZeroVolatilityNodeIsRejected) {
    const auto d = DiffusionSpec::tabulated({{0.5, 1.0, 2.0}, {0.0, 0.0, 0.0}, {0.3, 0.0, 0.3}});
    const StoppingProblem p{d, Payoff::call(1.0), 0.1};
    EXPECT_EQ(code_of([&] { require_valid(p); }), ErrorCode::ValidationSigma);
}

TEST(Validate, NonFiniteTabulationIsRejected) {
    EXPECT_EQ(code_of([] { DiffusionSpec::tabulated({{0.5, 1.0}, {0.0, NAN}, {0.3, 0.3}}); }),
              ErrorCode::ValidationTabulation);
    EXPECT_EQ(code_of([] { DiffusionSpec::tabulated({{-1.0, 1.0}, {0.0, 0.0}, {0.3, 0.3}}); }),
              ErrorCode::ValidationTabulation);
}

TEST(Validate, GrowingPowerBasketWarns) {
    const StoppingProblem p{DiffusionSpec::gbm(0.0, 1.0), Payoff::power_basket({{1.0, 3.0}}, 1.0), 1.0};
    const auto report = validate_problem(p);
    EXPECT_TRUE(report.valid());
    EXPECT_FALSE(report.warnings.empty());
}

TEST(Payoff, CallValuesAndDerivatives) {
    const auto call = Payoff::call(1.0);
    EXPECT_DOUBLE_EQ(payoff_eval(call, 2.0, 0), 1.0);
    EXPECT_DOUBLE_EQ(payoff_eval(call, 2.0, 1), 1.0);
    EXPECT_DOUBLE_EQ(payoff_eval(call, 2.0, 2), 0.0);
    EXPECT_DOUBLE_EQ(payoff_eval(call, 0.5, 0), 0.0);
    EXPECT_DOUBLE_EQ(payoff_eval(call, 0.5, 1), 0.0);
}

TEST(Payoff, PowerBasketDerivative) {
    const auto p = Payoff::power_basket({{1.0, 2.0}}, 0.0);
    EXPECT_DOUBLE_EQ(payoff_eval(p, 3.0, 0), 9.0);
    EXPECT_DOUBLE_EQ(payoff_eval(p, 3.0, 1), 6.0);
    EXPECT_DOUBLE_EQ(payoff_eval(p, 3.0, 2), 2.0);
    EXPECT_DOUBLE_EQ(p.kink(), 0.0);
}

TEST(Payoff, BasketKinkSolvesInnerEqualsFloor) {
    const auto p = Payoff::power_basket({{1.0, 2.0}, {0.5, 1.0}}, 3.0);
    const double k = p.kink();
    EXPECT_NEAR(p.inner(k), 3.0, 1e-12);
    EXPECT_EQ(payoff_eval(p, k * 0.99, 0), 0.0);
}

TEST(Payoff, DerivativeAtKinkIsNondifferentiable) {
    const auto call = Payoff::call(1.0);
    EXPECT_EQ(code_of([&] { payoff_eval(call, 1.0, 1); }), ErrorCode::Nondifferentiable);
    EXPECT_EQ(code_of([&] { payoff_eval(call, 1.0, 2); }), ErrorCode::Nondifferentiable);
    EXPECT_DOUBLE_EQ(payoff_eval(call, 1.0, 0), 0.0);
}

TEST(Payoff, MonotoneNondecreasing) {
    const auto p = Payoff::power_basket({{1.0, 0.5}, {2.0, 1.5}}, 1.0);
    double prev = 0.0;
    for (double x = 0.01; x < 20.0; x *= 1.1) {
        const double v = payoff_eval(p, x, 0);
        EXPECT_GE(v, prev);
        prev = v;
    }
}

TEST(GbmStep, DriftCancelsItoCorrection) {
    EXPECT_DOUBLE_EQ(gbm_step_exact(1.0, 0.25, 0.0, 0.5, 1.0), 1.0);
}

TEST(GbmStep, DeterministicPart) {
    EXPECT_DOUBLE_EQ(gbm_step_exact(1.0, 0.25, 0.0, 0.0, 1.0), std::exp(-0.125));
}

TEST(GbmStep, MonteCarloMeanMatchesLognormalIdentity) {
    NormalStream z(7, 0, kStreamWalk);
    const int n = 1'000'000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double s = gbm_step_exact(1.0, 0.1, z(), 0.05, 0.2);
        sum += s;
        sum_sq += s * s;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum_sq / n - mean * mean) / n);
    EXPECT_LE(std::abs(mean - std::exp(0.005)), 3.0 * se);
}

TEST(Tabulated, ConstantsReproduceGbm) {
    const auto d = DiffusionSpec::tabulated_from_gbm(0.05, 0.3, {0.1, 0.5, 1.0, 2.0, 10.0});
    for (double x : {0.1, 0.37, 1.0, 4.2, 10.0}) {
        EXPECT_DOUBLE_EQ(d.drift(x), 0.05);
        EXPECT_DOUBLE_EQ(d.volatility(x), 0.3);
    }
    EXPECT_DOUBLE_EQ(d.min_volatility(), 0.3);
    EXPECT_DOUBLE_EQ(d.domain_lower(), 0.1);
    EXPECT_DOUBLE_EQ(d.domain_upper(), 10.0);
}

TEST(Tabulated, OutsideNodesIsOutOfDomain) {
    const auto d = DiffusionSpec::tabulated_from_gbm(0.05, 0.3, {0.5, 1.0, 2.0});
    EXPECT_EQ(code_of([&] { d.volatility(3.0); }), ErrorCode::OutOfDomain);
}

TEST(Tabulated, MonotoneInterpolationStaysBetweenNodes) {
    const auto d = DiffusionSpec::tabulated({{0.5, 1.0, 2.0, 4.0}, {0.0, 0.02, 0.03, 0.03}, {0.2, 0.3, 0.5, 0.5}});
    for (double x = 1.0; x <= 2.0; x += 0.05) {
        EXPECT_GE(d.volatility(x), 0.3 - 1e-15);
        EXPECT_LE(d.volatility(x), 0.5 + 1e-15);
    }
    for (double x = 2.0; x <= 4.0; x += 0.1) EXPECT_NEAR(d.volatility(x), 0.5, 1e-15);
}

TEST(ProblemIo, RoundTrip) {
    const StoppingProblem p{DiffusionSpec::tabulated_from_gbm(0.01, 0.4, {0.2, 1.0, 5.0}),
                            Payoff::power_basket({{1.0, 2.0}, {0.5, 0.5}}, 1.5), 0.3};
    const auto q = problem_from_json(to_json(p));
    EXPECT_EQ(to_json(q).dump(), to_json(p).dump());
}

TEST(ProblemIo, ScalarCoefficientsBroadcastAndPairTerms) {
    const auto j = Json::parse(R"({"diffusion": {"family": "TabulatedCoefficients", "nodes": [1, 2, 3],
                                    "b": 0.0, "sigma": 0.5},
                                    "payoff": {"kind": "PowerBasket", "terms": [[2, 1]]}, "r": 0.2})");
    const auto p = problem_from_json(j);
    EXPECT_DOUBLE_EQ(p.diffusion.volatility(2.5), 0.5);
    EXPECT_DOUBLE_EQ(p.payoff.eval(3.0), 6.0);
}

TEST(ProblemIo, MalformedConfigIsInvalidArgument) {
    EXPECT_EQ(code_of([] { problem_from_json(Json::parse(R"({"diffusion": {"family": "Heston"}})")); }),
              ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { load_problem("/nonexistent/problem.json"); }), ErrorCode::Io);
}
