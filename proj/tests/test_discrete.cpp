#include "stoplab/continuous.hpp"
#include "stoplab/discrete.hpp"
#include "stoplab/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace stoplab;

namespace {

StoppingProblem reference_problem() { return {DiffusionSpec::gbm(0.0, 1.0), Payoff::call(1.0), 1.0}; }

const GridSpec kGrid = GridSpec::around_threshold(2.0);

DiscreteSolution solve_reference(double h) { return solve_discrete(reference_problem(), h, kGrid, {}, 2.0); }

} // namespace

TEST(Kernel, WeightsSumToOne) {
    const auto k = build_transition(reference_problem(), 0.01, kGrid);
    const auto q = static_cast<std::size_t>(k.order);
    for (std::size_t i = 0; i < kGrid.n_nodes; i += 97) {
        const double s = std::accumulate(k.weight.begin() + i * q, k.weight.begin() + (i + 1) * q, 0.0);
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(Kernel, DestinationMeanMatchesDrift) {
    const StoppingProblem p{DiffusionSpec::gbm(0.03, 0.4), Payoff::call(1.0), 0.1};
    const double h = 0.02;
    const auto k = build_transition(p, h, kGrid);
    const auto q = static_cast<std::size_t>(k.order);
    for (std::size_t i : {100ul, 2000ul, 3000ul}) {
        double mean = 0.0;
        for (std::size_t r = 0; r < q; ++r) mean += k.weight[i * q + r] * k.dest[i * q + r];
        const double x = kGrid.node(i);
        EXPECT_NEAR(mean, x * std::exp(0.03 * h), 1e-8 * x);
    }
}

TEST(Kernel, QuadratureAgreesWithMonteCarlo) {
    const StoppingProblem p = reference_problem();
    const double h = 0.05, x = 1.5;
    const auto rule = gauss_hermite(64);
    double quad = 0.0;
    for (std::size_t r = 0; r < rule.nodes.size(); ++r) {
        quad += rule.weights[r] * p.payoff.eval(gbm_step_exact(x, h, rule.nodes[r], 0.0, 1.0), 0);
    }
    NormalStream z(3, 0, kStreamWalk);
    const int n = 400000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = p.payoff.eval(gbm_step_exact(x, h, z(), 0.0, 1.0), 0);
        sum += v;
        sum_sq += v * v;
    }
    const double mean = sum / n;
    EXPECT_NEAR(quad, mean, 4.0 * std::sqrt((sum_sq / n - mean * mean) / n));
}

TEST(Kernel, RejectsNonPositiveStep) {
    EXPECT_THROW(build_transition(reference_problem(), 0.0, kGrid), Error);
    EXPECT_THROW(solve_discrete(reference_problem(), -0.01, kGrid), Error);
}

TEST(ValueIteration, ZeroPayoffGivesZeroValue) {
    const StoppingProblem p{DiffusionSpec::gbm(0.0, 1.0), Payoff::power_basket({{1.0, 1.0}}, 1e6), 1.0};
    const double h = 0.01;
    const auto k = build_transition(p, h, kGrid);
    const auto sol = value_iteration(p, h, kGrid, k);
    EXPECT_EQ(sol.iterations, 1);
    for (double v : sol.value) EXPECT_EQ(v, 0.0);
}

TEST(ValueIteration, HeavyDiscountStopsImmediately) {
    const StoppingProblem p{DiffusionSpec::gbm(0.0, 1.0), Payoff::call(1.0), 1.0};
    const double h = 20.0;
    const auto k = build_transition(p, h, kGrid);
    const auto sol = value_iteration(p, h, kGrid, k);
    for (std::size_t i = 0; i < kGrid.n_nodes; ++i) {
        EXPECT_LE(sol.value[i] - sol.payoff[i], 1e-8 * std::max(1.0, kGrid.node(i)));
    }
}

TEST(ValueIteration, ConvergesToFixedPoint) {
    const auto sol = solve_reference(0.01);
    EXPECT_LE(sol.final_update, sol.tol * (1.0 - std::exp(-0.01)) * sol.payoff_scale);
    EXPECT_LE(sol.residual, sol.final_update);
    EXPECT_GE(sol.iterations, 2);
}

TEST(ValueIteration, IterationCapIsNoConvergence) {
    DiscreteConfig cfg;
    cfg.iteration.max_iterations = 5;
    try {
        solve_discrete(reference_problem(), 0.01, kGrid, cfg, 2.0);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoConvergence);
    }
}

TEST(ReferenceProblem, ValueAndThresholdAtOnePercent) {
    const auto sol = solve_reference(0.01);
    const double v1 = value_at_h(sol, 1.0);
    EXPECT_GE(v1, 0.2490);
    EXPECT_LE(v1, 0.2496);
    ASSERT_TRUE(sol.threshold.has_value());
    EXPECT_GE(*sol.threshold, 1.86);
    EXPECT_LE(*sol.threshold, 1.91);
    EXPECT_LE(*sol.threshold, 2.0 + 1e-6);
    EXPECT_TRUE(exercise_structure(sol).upper_interval);
}

TEST(ReferenceProblem, ThresholdIncreasesAsStepShrinks) {
    const auto coarse = solve_reference(0.01);
    const auto fine = solve_reference(0.0025);
    EXPECT_GT(*fine.threshold, *coarse.threshold);
    EXPECT_LE(*fine.threshold, 2.0 + 1e-6);
}

TEST(ReferenceProblem, ValueBetweenPayoffAndContinuousValue) {
    const auto sol = solve_reference(0.02);
    const auto cont = solve_continuous(reference_problem());
    for (std::size_t i = 0; i < kGrid.n_nodes; i += 31) {
        const double x = kGrid.node(i);
        EXPECT_GE(sol.value[i], sol.payoff[i] - sol.eps_sol());
        EXPECT_LE(sol.value[i], value_at(cont, x) + sol.eps_sol()) << x;
    }
}

TEST(ReferenceProblem, LowerTailTracksPowerLaw) {
    // Near the bottom of the grid V^h behaves like c x^alpha, the harmonic function.
    const auto sol = solve_reference(0.01);
    const double slope = (std::log(sol.value[40]) - std::log(sol.value[0])) /
                         (std::log(kGrid.node(40)) - std::log(kGrid.node(0)));
    EXPECT_NEAR(slope, 2.0, 1e-3);
}

TEST(Readout, ExactAtNodesAndMonotoneBetween) {
    const auto sol = solve_reference(0.01);
    const DiscreteValue v(sol);
    for (std::size_t i : {0ul, 1000ul, 2047ul, 4095ul}) EXPECT_NEAR(v(kGrid.node(i)), sol.value[i], 1e-12 * (1.0 + sol.value[i]));
    for (std::size_t i : {500ul, 1500ul, 2500ul}) {
        const double mid = std::sqrt(kGrid.node(i) * kGrid.node(i + 1));
        EXPECT_GE(v(mid), sol.value[i]);
        EXPECT_LE(v(mid), sol.value[i + 1]);
    }
    EXPECT_NEAR(v(5.0), 4.0, sol.eps_sol() + 1e-12);
    EXPECT_THROW(v(kGrid.x_max * 1.01), Error);
}

TEST(Grid, ThresholdNearEdgeIsTooNarrow) {
    const GridSpec narrow{0.5, 2.0005, 4096};
    try {
        solve_discrete(reference_problem(), 0.01, narrow, {}, 2.0);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::GridTooNarrow);
    }
}

TEST(Grid, ExerciseStructureDetectsHoles) {
    DiscreteSolution s;
    s.payoff = {0.0, 0.0, 1.0, 2.0, 3.0};
    s.value = {0.1, 0.2, 1.0, 2.5, 3.0};
    const auto e = exercise_structure(s, 1e-12);
    EXPECT_FALSE(e.upper_interval);
    EXPECT_EQ(e.first_exercise_node, 2u);
    EXPECT_EQ(e.holes, 1u);
    s.value[3] = 2.0;
    EXPECT_TRUE(exercise_structure(s, 1e-12).upper_interval);
}

TEST(Determinism, WorkerCountDoesNotChangeValues) {
    DiscreteConfig many;
    many.iteration.workers = 4;
    const auto a = solve_reference(0.02);
    const auto b = solve_discrete(reference_problem(), 0.02, kGrid, many, 2.0);
    EXPECT_EQ(a.value, b.value);
    EXPECT_EQ(*a.threshold, *b.threshold);
    EXPECT_EQ(a.iterations, b.iterations);
}
