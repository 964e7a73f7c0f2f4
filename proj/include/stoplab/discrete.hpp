#pragma once

// Discrete-time stopping on a log-spaced grid:
//
//   V^h(x) = max(phi(x), e^{-rh} E[V^h(S_h) | S_0 = x]),
//
// with the one-step expectation taken by Gauss-Hermite quadrature over the
// lognormal step and V^h read between nodes by monotone cubic interpolation in
// log x. Quadrature destinations that leave the grid are absorbed: they are
// settled at the payoff of the destination itself.

#include "stoplab/error.hpp"
#include "stoplab/interp.hpp"
#include "stoplab/model.hpp"
#include "stoplab/parallel.hpp"
#include "stoplab/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

namespace stoplab {

struct GridSpec {
    double x_min = 0.0;
    double x_max = 0.0;
    std::size_t n_nodes = 4096;

    static GridSpec around_threshold(double threshold, std::size_t n_nodes = 4096) {
        return {threshold / 100.0, 10.0 * threshold, n_nodes};
    }

    double log_min() const { return std::log(x_min); }
    double log_step() const { return (std::log(x_max) - std::log(x_min)) / static_cast<double>(n_nodes - 1); }
    double node(std::size_t i) const {
        if (i + 1 == n_nodes) return x_max;
        return std::exp(log_min() + static_cast<double>(i) * log_step());
    }
    std::vector<double> nodes() const {
        std::vector<double> x(n_nodes);
        for (std::size_t i = 0; i < n_nodes; ++i) x[i] = node(i);
        return x;
    }

    void validate() const {
        require(x_min > 0.0 && x_max > x_min, "grid needs 0 < x_min < x_max");
        require(n_nodes >= 64, "grid needs at least 64 nodes");
    }

    /// The continuous threshold must sit at least five cells inside the grid.
    void validate_contains(double threshold) const {
        validate();
        const double pos = (std::log(threshold) - log_min()) / log_step();
        if (!(pos >= 5.0 && pos <= static_cast<double>(n_nodes - 1) - 5.0)) {
            fail(ErrorCode::GridTooNarrow, "grid too narrow: threshold within 5 cells of the boundary");
        }
    }
};

/// One-step expectation operator on the grid.
struct TransitionKernel {
    double h = 0.0;
    int order = 0;
    GridSpec grid;
    GaussHermite rule;
    std::vector<double> dest;           ///< n_nodes x order destinations
    std::vector<double> weight;         ///< n_nodes x order weights
    std::vector<double> clamped_mass;   ///< per node, mass leaving the grid
    std::vector<double> absorbed;       ///< per node, sum of w phi(dest) over mass above the grid
    /// Below x_min the value is extended as v(x_min) (d / x_min)^tail_exponent, the
    /// decaying solution of the discounted generator equation for the coefficients at x_min.
    double tail_exponent = 0.0;
    std::vector<double> lower_tail;     ///< per node, sum of w (d / x_min)^tail_exponent below the grid
    // Interpolation stencil for in-grid destinations, premultiplied by weight.
    std::vector<std::int32_t> cell;     ///< left node index, -1 when absorbed
    std::vector<HermiteWeights> stencil;

    double clamped_mass_max() const {
        return clamped_mass.empty() ? 0.0 : *std::max_element(clamped_mass.begin(), clamped_mass.end());
    }
};

inline constexpr double kClampTolerance = 1e-8;

namespace detail {

struct GridLocation {
    bool inside;
    std::int32_t cell;
    double t;
};

inline GridLocation locate(const GridSpec& grid, double x, double log_min, double log_step) {
    if (!(x >= grid.x_min && x <= grid.x_max)) return {false, -1, 0.0};
    const double z = (std::log(x) - log_min) / log_step;
    const auto last = static_cast<std::int32_t>(grid.n_nodes) - 2;
    const auto j = std::clamp(static_cast<std::int32_t>(std::floor(z)), 0, last);
    return {true, j, std::clamp(z - j, 0.0, 1.0)};
}

/// Lognormal step coefficients at a source state (frozen for tabulated models).
inline std::pair<double, double> step_coefficients(const StoppingProblem& p, double x) {
    if (p.diffusion.is_gbm()) return {p.diffusion.as_gbm().drift, p.diffusion.as_gbm().volatility};
    if (x < p.diffusion.domain_lower() || x > p.diffusion.domain_upper()) {
        fail(ErrorCode::OutOfDomain, "grid node outside the coefficient tabulation (out of domain)");
    }
    return {p.diffusion.drift(x), p.diffusion.volatility(x)};
}

} // namespace detail

/// Builds the quadrature kernel. When `threshold` is given, mass leaving the grid
/// from a node within a factor 1.1 of it is an error.
inline TransitionKernel build_transition(const StoppingProblem& problem, double h, const GridSpec& grid,
                                         int order = 64, std::optional<double> threshold = {}) {
    require(h > 0.0, "transition step h must be > 0");
    grid.validate();
    TransitionKernel k;
    k.h = h;
    k.order = order;
    k.grid = grid;
    k.rule = gauss_hermite(order);
    const std::size_t n = grid.n_nodes;
    const auto q = static_cast<std::size_t>(order);
    k.dest.resize(n * q);
    k.weight.resize(n * q);
    k.cell.resize(n * q);
    k.stencil.resize(n * q);
    k.clamped_mass.assign(n, 0.0);
    k.absorbed.assign(n, 0.0);
    k.lower_tail.assign(n, 0.0);
    {
        const auto [b0, s0] = detail::step_coefficients(problem, grid.x_min);
        k.tail_exponent = gbm_exponent(b0, s0, problem.rate);
    }
    const double log_min = grid.log_min();
    const double log_step = grid.log_step();
    for (std::size_t i = 0; i < n; ++i) {
        const double x = grid.node(i);
        const auto [b, s] = detail::step_coefficients(problem, x);
        for (std::size_t r = 0; r < q; ++r) {
            const std::size_t at = i * q + r;
            const double w = k.rule.weights[r];
            const double d = gbm_step_exact(x, h, k.rule.nodes[r], b, s);
            k.dest[at] = d;
            k.weight[at] = w;
            const auto loc = detail::locate(grid, d, log_min, log_step);
            if (!loc.inside) {
                k.cell[at] = -1;
                k.stencil[at] = {0.0, 0.0, 0.0, 0.0};
                k.clamped_mass[i] += w;
                if (d < grid.x_min) {
                    k.lower_tail[i] += w * std::pow(d / grid.x_min, k.tail_exponent);
                } else {
                    k.absorbed[i] += w * problem.payoff.eval(d, 0);
                }
                continue;
            }
            const auto hw = hermite_weights(loc.t, log_step);
            k.cell[at] = loc.cell;
            k.stencil[at] = {w * hw.value_left, w * hw.slope_left, w * hw.value_right, w * hw.slope_right};
        }
        if (threshold && std::abs(std::log(x / *threshold)) <= std::log(1.1) &&
            k.clamped_mass[i] > kClampTolerance) {
            fail(ErrorCode::GridTooNarrow, "grid too narrow: mass leaves the grid near the threshold");
        }
    }
    return k;
}

struct ValueIterationConfig {
    double tol = 1e-10;
    std::int64_t max_iterations = 1'000'000;
    unsigned workers = 1;
};

struct ExerciseStructure {
    bool upper_interval = true;
    std::size_t first_exercise_node = 0;  ///< n_nodes when the exercise set is empty
    std::size_t holes = 0;                ///< continuation nodes above the first exercise node
};

struct DiscreteSolution {
    double h = 0.0;
    double rate = 0.0;
    GridSpec grid;
    std::vector<double> value;
    std::vector<double> payoff;
    std::optional<double> threshold;
    std::int64_t iterations = 0;
    double final_update = 0.0;
    double residual = 0.0;      ///< sup |V - T V| after convergence
    double clamped_mass_max = 0.0;
    double tol = 0.0;
    double payoff_scale = 0.0;  ///< max phi over the grid

    /// Solution tolerance eps_sol = 10 tol max phi.
    double eps_sol() const { return 10.0 * tol * payoff_scale; }
};

namespace detail {

/// One Bellman sweep: out = max(phi, e^{-rh} K v). Returns sup |out - v|.
inline double bellman_sweep(const TransitionKernel& k, std::span<const double> phi, double discount,
                            std::span<const double> v, std::span<double> slopes, std::span<double> out,
                            unsigned workers) {
    const std::size_t n = v.size();
    const auto q = static_cast<std::size_t>(k.order);
    pchip_slopes_uniform(k.grid.log_step(), v, slopes);
    const unsigned chunks = std::max(1u, workers);
    std::vector<double> chunk_max(chunks, 0.0);
    parallel_blocks(chunks, workers, [&](std::size_t c) {
        const std::size_t begin = n * c / chunks;
        const std::size_t end = n * (c + 1) / chunks;
        double local = 0.0;
        for (std::size_t i = begin; i < end; ++i) {
            double cont = k.absorbed[i] + k.lower_tail[i] * v[0];
            const std::size_t base = i * q;
            for (std::size_t r = 0; r < q; ++r) {
                const std::int32_t j = k.cell[base + r];
                if (j < 0) continue;
                const auto& s = k.stencil[base + r];
                const auto ju = static_cast<std::size_t>(j);
                cont += s.value_left * v[ju] + s.slope_left * slopes[ju] + s.value_right * v[ju + 1] +
                        s.slope_right * slopes[ju + 1];
            }
            const double next = std::max(phi[i], discount * cont);
            local = std::max(local, std::abs(next - v[i]));
            out[i] = next;
        }
        chunk_max[c] = local;
    });
    return *std::max_element(chunk_max.begin(), chunk_max.end());
}

} // namespace detail

/// Value iteration from V^0 = phi, stopped when the sup-norm update falls to
/// tol (1 - e^{-rh}) max phi.
inline DiscreteSolution value_iteration(const StoppingProblem& problem, double h, const GridSpec& grid,
                                        const TransitionKernel& kernel, const ValueIterationConfig& cfg = {}) {
    require(kernel.h == h && kernel.grid.n_nodes == grid.n_nodes && kernel.grid.x_min == grid.x_min &&
                kernel.grid.x_max == grid.x_max,
            "kernel was built for a different step or grid");
    require(cfg.tol > 0.0 && cfg.max_iterations >= 1, "value iteration needs tol > 0 and max_iterations >= 1");
    const std::size_t n = grid.n_nodes;
    DiscreteSolution sol;
    sol.h = h;
    sol.rate = problem.rate;
    sol.grid = grid;
    sol.tol = cfg.tol;
    sol.clamped_mass_max = kernel.clamped_mass_max();
    sol.payoff.resize(n);
    for (std::size_t i = 0; i < n; ++i) sol.payoff[i] = problem.payoff.eval(grid.node(i), 0);
    sol.payoff_scale = *std::max_element(sol.payoff.begin(), sol.payoff.end());

    const double discount = std::exp(-problem.rate * h);
    const double target = cfg.tol * (1.0 - discount) * sol.payoff_scale;
    std::vector<double> v = sol.payoff;
    std::vector<double> next(n);
    std::vector<double> slopes(n);
    double update = 0.0;
    std::int64_t k = 0;
    bool converged = false;
    while (k < cfg.max_iterations) {
        update = detail::bellman_sweep(kernel, sol.payoff, discount, v, slopes, next, cfg.workers);
        ++k;
        v.swap(next);
        if (update <= target) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        fail(ErrorCode::NoConvergence, "no convergence after " + std::to_string(k) +
                                           " iterations; final update " + std::to_string(update));
    }
    sol.iterations = k;
    sol.final_update = update;
    sol.residual = detail::bellman_sweep(kernel, sol.payoff, discount, v, slopes, next, cfg.workers);
    sol.value = std::move(v);
    return sol;
}

/// Monotone cubic readout of V^h in log x; exact at nodes.
class DiscreteValue {
public:
    explicit DiscreteValue(const DiscreteSolution& sol) : grid_(sol.grid) {
        std::vector<double> t(sol.grid.n_nodes);
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::log(sol.grid.node(i));
        curve_ = MonotoneCubic(std::move(t), sol.value);
    }

    bool contains(double x) const { return x >= grid_.x_min && x <= grid_.x_max; }

    double operator()(double x) const {
        if (!contains(x)) fail(ErrorCode::OutOfDomain, "V^h requested outside the grid (out of domain)");
        return curve_(std::clamp(std::log(x), curve_.lower(), curve_.upper()));
    }

private:
    GridSpec grid_;
    MonotoneCubic curve_;
};

inline double value_at_h(const DiscreteSolution& sol, double x) { return DiscreteValue(sol)(x); }

/// Continuation minus payoff at an arbitrary state, with a fresh quadrature at x.
inline double continuation_gap(const StoppingProblem& problem, const TransitionKernel& kernel,
                               const DiscreteValue& value, double x) {
    const auto [b, s] = detail::step_coefficients(problem, x);
    double cont = 0.0;
    for (int r = 0; r < kernel.order; ++r) {
        const double d = gbm_step_exact(x, kernel.h, kernel.rule.nodes[r], b, s);
        double v = 0.0;
        if (value.contains(d)) {
            v = value(d);
        } else if (d < kernel.grid.x_min) {
            v = value(kernel.grid.x_min) * std::pow(d / kernel.grid.x_min, kernel.tail_exponent);
        } else {
            v = problem.payoff.eval(d, 0);
        }
        cont += kernel.rule.weights[r] * v;
    }
    return std::exp(-problem.rate * kernel.h) * cont - problem.payoff.eval(x, 0);
}

/// Root of the continuation-minus-payoff gap, bracketed between grid nodes and
/// bisected in log x to relative tolerance 1e-8.
inline double extract_threshold(const StoppingProblem& problem, double h, const TransitionKernel& kernel,
                                DiscreteSolution& solution, double rel_tol = 1e-8) {
    require(kernel.h == h && solution.h == h, "threshold extraction needs matching step sizes");
    const DiscreteValue value(solution);
    const GridSpec& grid = solution.grid;
    double g_prev = continuation_gap(problem, kernel, value, grid.node(0));
    std::optional<std::size_t> left;
    for (std::size_t i = 0; i + 1 < grid.n_nodes; ++i) {
        const double g_next = continuation_gap(problem, kernel, value, grid.node(i + 1));
        if (g_prev > 0.0 && g_next <= 0.0) {
            left = i;
            break;
        }
        g_prev = g_next;
    }
    if (!left) {
        fail(ErrorCode::ThresholdNotBracketed, "threshold not bracketed (grid or h out of range)");
    }
    double lo = std::log(grid.node(*left));
    double hi = std::log(grid.node(*left + 1));
    const double tol = std::log1p(rel_tol);
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        (continuation_gap(problem, kernel, value, std::exp(mid)) > 0.0 ? lo : hi) = mid;
    }
    solution.threshold = std::exp(0.5 * (lo + hi));
    return *solution.threshold;
}

/// Exercise set {V^h - phi <= eps} must be an upper interval of the grid.
inline ExerciseStructure exercise_structure(const DiscreteSolution& sol, std::optional<double> eps = {}) {
    const double tol = eps.value_or(sol.eps_sol());
    ExerciseStructure out;
    const std::size_t n = sol.value.size();
    out.first_exercise_node = n;
    for (std::size_t i = 0; i < n; ++i) {
        const bool exercise = sol.value[i] - sol.payoff[i] <= tol;
        if (exercise && out.first_exercise_node == n) out.first_exercise_node = i;
        if (!exercise && out.first_exercise_node < n) ++out.holes;
    }
    out.upper_interval = out.holes == 0;
    return out;
}

struct DiscreteConfig {
    int quad_order = 64;
    ValueIterationConfig iteration;
};

/// Kernel, value iteration and threshold for one step size.
inline DiscreteSolution solve_discrete(const StoppingProblem& problem, double h, const GridSpec& grid,
                                       const DiscreteConfig& cfg = {}, std::optional<double> threshold = {}) {
    require_valid(problem);
    if (threshold) grid.validate_contains(*threshold);
    const auto kernel = build_transition(problem, h, grid, cfg.quad_order, threshold);
    auto sol = value_iteration(problem, h, grid, kernel, cfg.iteration);
    extract_threshold(problem, h, kernel, sol);
    return sol;
}

} // namespace stoplab
