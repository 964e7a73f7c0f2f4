#pragma once

// Monte Carlo estimation of the ladder-walk constants
//
//   H(u) = E W_N^2,  M(u) = E W_N,  Theta = int_0^1 H,  Gamma = int_0^1 M,
//
// where W_t = B_t - B_u (t >= u) and N = inf{n >= 1 : W_n >= 0}. Alternate
// estimators use occupation time of [0, inf) and the Tanaka local time on a
// fine grid over [u, N].
//
// Random-stream layout per path p (see rng.hpp):
//   stream 0            integer-time walk increments
//   stream s + 1        bridge fill of segment s ([u,1] is segment 0, [s,s+1] is s)
//   stream 0xFFFFFFFF   randomized offset u

#include "stoplab/error.hpp"
#include "stoplab/model.hpp"
#include "stoplab/parallel.hpp"
#include "stoplab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace stoplab {

struct FinePath {
    std::vector<double> times;
    std::vector<double> values;
};

struct LadderSample {
    double offset = 0.0;
    std::int64_t stopping_index = 0;
    double terminal = 0.0;
    bool truncated = false;
    std::optional<FinePath> fine;
};

inline constexpr std::int64_t kDefaultLadderCap = 100000;
inline constexpr int kDefaultFineSteps = 64;

/// A bridge segment whose endpoints are both below zero is skipped when the
/// probability its maximum reaches zero, exp(-2ab/dt), is below e^-40.
inline constexpr double kBridgeSkipExponent = 40.0;

/// Integer-time ladder walk driven by an arbitrary standard-normal source.
template <class NormalSource>
LadderSample walk_ladder(double u, NormalSource&& normal, std::int64_t n_max) {
    require(u >= 0.0 && u < 1.0, "ladder offset u must lie in [0, 1)");
    require(n_max >= 1, "ladder cap must be >= 1");
    LadderSample s;
    s.offset = u;
    double w = std::sqrt(1.0 - u) * normal();
    std::int64_t n = 1;
    while (w < 0.0 && n < n_max) {
        w += normal();
        ++n;
    }
    s.stopping_index = n;
    s.terminal = w;
    s.truncated = w < 0.0;
    return s;
}

/// Fine grid times on segment `segment`: {u, j/m > u} for segment 0, s + j/m otherwise.
inline std::vector<double> segment_times(std::int64_t segment, double u, int m) {
    std::vector<double> t;
    if (segment == 0) {
        t.push_back(u);
        for (int j = static_cast<int>(std::floor(u * m)) + 1; j <= m; ++j) {
            t.push_back(static_cast<double>(j) / m);
        }
    } else {
        t.reserve(static_cast<std::size_t>(m) + 1);
        for (int j = 0; j <= m; ++j) t.push_back(static_cast<double>(segment) + static_cast<double>(j) / m);
    }
    return t;
}

/// Brownian bridge through the segment's fine times, pinned at both ends.
/// Calls step(t_a, w_a, t_b, w_b) for every fine step in order.
template <class Step>
void fill_bridge(std::span<const double> times, double w_start, double w_end, NormalStream rng,
                 Step&& step) {
    const double t_end = times.back();
    double t = times.front();
    double w = w_start;
    for (std::size_t j = 1; j < times.size(); ++j) {
        const double t_next = times[j];
        double w_next = w_end;
        if (j + 1 < times.size()) {
            const double span = t_end - t;
            const double mean = w + (t_next - t) / span * (w_end - w);
            const double var = (t_next - t) * (t_end - t_next) / span;
            w_next = mean + std::sqrt(var) * rng();
        }
        step(t, w, t_next, w_next);
        t = t_next;
        w = w_next;
    }
}

/// Fine-grid functionals of one path on [u, N].
struct FineFunctionals {
    double occupation = 0.0;  ///< sum of step lengths with W(t_j) >= 0
    double tanaka_sum = 0.0;  ///< sum of 1{W(t_j) >= 0} (W(t_{j+1}) - W(t_j))

    void add(double t0, double w0, double t1, double w1) {
        if (w0 >= 0.0) {
            occupation += t1 - t0;
            tanaka_sum += w1 - w0;
        }
    }

    double local_time(double terminal) const { return std::max(terminal, 0.0) - tanaka_sum; }
};

inline double occupation_time(const FinePath& path) {
    FineFunctionals f;
    for (std::size_t j = 0; j + 1 < path.values.size(); ++j) {
        f.add(path.times[j], path.values[j], path.times[j + 1], path.values[j + 1]);
    }
    return f.occupation;
}

/// Tanaka discretization L = W_end^+ - sum 1{W_j >= 0} (W_{j+1} - W_j).
inline double tanaka_local_time(std::span<const double> values) {
    double sum = 0.0;
    for (std::size_t j = 0; j + 1 < values.size(); ++j) {
        if (values[j] >= 0.0) sum += values[j + 1] - values[j];
    }
    return std::max(values.back(), 0.0) - sum;
}

namespace detail {

/// Walks path `path` to N and, when `fine_steps` > 0, feeds fine steps to `step`.
/// With `full` set every segment is bridged; otherwise segments that cannot
/// reach zero are skipped (their contribution to both functionals vanishes).
template <class Step>
LadderSample run_path(double u, std::uint64_t seed, std::uint64_t path, std::int64_t n_max,
                      int fine_steps, bool full, Step&& step) {
    NormalStream walk(seed, path, kStreamWalk);
    LadderSample s;
    s.offset = u;
    double w_prev = 0.0;
    std::int64_t n = 0;
    for (;;) {
        const double dt = (n == 0) ? 1.0 - u : 1.0;
        const double w = w_prev + std::sqrt(dt) * walk();
        ++n;
        if (fine_steps > 0) {
            const std::int64_t segment = n - 1;
            const bool reachable =
                w >= 0.0 || w_prev >= 0.0 || 2.0 * w_prev * w / dt <= kBridgeSkipExponent;
            if (full || reachable) {
                const auto times = segment_times(segment, u, fine_steps);
                fill_bridge(times, w_prev, w,
                            NormalStream(seed, path, static_cast<std::uint32_t>(segment + 1)), step);
            }
        }
        w_prev = w;
        if (w >= 0.0 || n >= n_max) break;
    }
    s.stopping_index = n;
    s.terminal = w_prev;
    s.truncated = w_prev < 0.0;
    return s;
}

inline void check_cap(std::size_t truncated, std::size_t n, double bound) {
    const double fraction = static_cast<double>(truncated) / static_cast<double>(n);
    if (fraction > bound) {
        fail(ErrorCode::CapTooSmall, "ladder cap too small: truncated fraction " +
                                         std::to_string(fraction) + " exceeds bound " +
                                         std::to_string(bound));
    }
}

inline constexpr std::size_t kPathsPerBlock = 4096;

inline std::size_t block_count(std::size_t n) { return (n + kPathsPerBlock - 1) / kPathsPerBlock; }

} // namespace detail

/// Ladder sample for (seed, path). With fine_steps > 0 the full fine path on [u, N] is attached.
inline LadderSample sample_ladder(double u, std::uint64_t seed, std::uint64_t path,
                                  std::int64_t n_max = kDefaultLadderCap, int fine_steps = 0) {
    require(u >= 0.0 && u < 1.0, "ladder offset u must lie in [0, 1)");
    require(n_max >= 1, "ladder cap must be >= 1");
    require(fine_steps >= 0, "fine step count must be >= 0");
    FinePath fine;
    if (fine_steps > 0) {
        fine.times.push_back(u);
        fine.values.push_back(0.0);
    }
    auto s = detail::run_path(u, seed, path, n_max, fine_steps, true,
                              [&](double, double, double t1, double w1) {
                                  fine.times.push_back(t1);
                                  fine.values.push_back(w1);
                              });
    if (fine_steps > 0) s.fine = std::move(fine);
    return s;
}

struct EstimatorOptions {
    std::int64_t n_max = kDefaultLadderCap;
    double max_truncated_fraction = 0.01;
    unsigned workers = 1;
};

struct MeanEstimate {
    double mean = 0.0;
    double se = 0.0;
};

/// Running sums of x, x^2 for a sample mean and its standard error.
struct MomentSums {
    double sum = 0.0;
    double sum_sq = 0.0;

    void add(double x) {
        sum += x;
        sum_sq += x * x;
    }
    void merge(const MomentSums& o) {
        sum += o.sum;
        sum_sq += o.sum_sq;
    }
    MeanEstimate estimate(std::size_t n) const {
        const double dn = static_cast<double>(n);
        const double mean = sum / dn;
        const double var = n > 1 ? std::max(0.0, (sum_sq - dn * mean * mean) / (dn - 1.0)) : 0.0;
        return {mean, std::sqrt(var / dn)};
    }
};

inline double combined_se(double a, double b) { return std::sqrt(a * a + b * b); }

struct HMEstimate {
    double u = 0.0;
    MeanEstimate H;
    MeanEstimate M;
    std::size_t n_paths = 0;
    double truncated_fraction = 0.0;
};

/// Moment estimators H(u) = mean W_N^2 and M(u) = mean W_N; truncated paths score 0.
inline HMEstimate estimate_H_M(double u, std::size_t n_paths, std::uint64_t seed,
                               const EstimatorOptions& opt = {}) {
    require(n_paths >= 2, "estimate_H_M needs n_paths >= 2");
    require(u >= 0.0 && u < 1.0, "ladder offset u must lie in [0, 1)");
    struct Block {
        MomentSums h, m;
        std::size_t truncated = 0;
    };
    std::vector<Block> blocks(detail::block_count(n_paths));
    parallel_blocks(blocks.size(), opt.workers, [&](std::size_t b) {
        Block acc;
        const std::size_t end = std::min(n_paths, (b + 1) * detail::kPathsPerBlock);
        for (std::size_t p = b * detail::kPathsPerBlock; p < end; ++p) {
            const auto s = detail::run_path(u, seed, p, opt.n_max, 0, false,
                                            [](double, double, double, double) {});
            const double w = s.truncated ? 0.0 : s.terminal;
            acc.truncated += s.truncated;
            acc.h.add(w * w);
            acc.m.add(w);
        }
        blocks[b] = acc;
    });
    Block total;
    for (const auto& b : blocks) {
        total.h.merge(b.h);
        total.m.merge(b.m);
        total.truncated += b.truncated;
    }
    detail::check_cap(total.truncated, n_paths, opt.max_truncated_fraction);
    HMEstimate out;
    out.u = u;
    out.H = total.h.estimate(n_paths);
    out.M = total.m.estimate(n_paths);
    out.n_paths = n_paths;
    out.truncated_fraction = static_cast<double>(total.truncated) / static_cast<double>(n_paths);
    return out;
}

enum class OffsetMode { Randomized, FixedGrid };

struct ConstantsConfig {
    std::size_t n_paths = 2'000'000;
    OffsetMode mode = OffsetMode::Randomized;
    std::size_t grid_points = 64;  ///< J for the fixed-grid midpoint rule
    std::int64_t n_max = kDefaultLadderCap;
    std::uint64_t seed = 20240611;
    double max_truncated_fraction = 0.01;
    unsigned workers = 1;
};

struct OffsetCurvePoint {
    double u;
    MeanEstimate H;
    MeanEstimate M;
    std::size_t n_paths;
};

struct ConstantsEstimate {
    double theta = 0.0;
    double gamma = 0.0;
    double theta_se = 0.0;
    double gamma_se = 0.0;
    double gap_se = 0.0;  ///< standard error of theta - gamma^2 (delta method)
    std::size_t n_paths = 0;
    double truncated_fraction = 0.0;
    OffsetMode mode = OffsetMode::Randomized;
    std::size_t grid_points = 0;
    std::int64_t n_max = 0;
    std::uint64_t seed = 0;
    std::vector<OffsetCurvePoint> curve;  ///< per-u estimates (fixed-grid mode only)
};

inline double fixed_grid_offset(std::size_t j, std::size_t grid_points) {
    return (static_cast<double>(j) + 0.5) / static_cast<double>(grid_points);
}

inline double randomized_offset(std::uint64_t seed, std::uint64_t path) {
    return keyed_uniform(seed, path, kStreamOffset);
}

/// Theta and Gamma by plain sample means over uniform offsets, or by the
/// midpoint rule over J fixed offsets. Path p uses offset cell p mod J in the latter.
inline ConstantsEstimate estimate_theta_gamma(const ConstantsConfig& cfg) {
    require(cfg.n_paths >= 2, "estimate_theta_gamma needs n_paths >= 2");
    const bool grid = cfg.mode == OffsetMode::FixedGrid;
    const std::size_t cells = grid ? cfg.grid_points : 1;
    require(cells >= 1 && cfg.n_paths >= 2 * cells, "fixed grid needs at least two paths per offset");

    struct Cell {
        MomentSums h, m;
        double cross = 0.0;  ///< sum of W^3, for cov(W^2, W)
        std::size_t count = 0;
        std::size_t truncated = 0;
    };
    const std::size_t n_blocks = detail::block_count(cfg.n_paths);
    std::vector<std::vector<Cell>> blocks(n_blocks);
    parallel_blocks(n_blocks, cfg.workers, [&](std::size_t b) {
        std::vector<Cell> acc(cells);
        const std::size_t end = std::min(cfg.n_paths, (b + 1) * detail::kPathsPerBlock);
        for (std::size_t p = b * detail::kPathsPerBlock; p < end; ++p) {
            const std::size_t c = grid ? p % cells : 0;
            const double u = grid ? fixed_grid_offset(c, cells) : randomized_offset(cfg.seed, p);
            const auto s = detail::run_path(u, cfg.seed, p, cfg.n_max, 0, false,
                                            [](double, double, double, double) {});
            const double w = s.truncated ? 0.0 : s.terminal;
            auto& cell = acc[c];
            cell.h.add(w * w);
            cell.m.add(w);
            cell.cross += w * w * w;
            ++cell.count;
            cell.truncated += s.truncated;
        }
        blocks[b] = std::move(acc);
    });

    std::vector<Cell> total(cells);
    std::size_t truncated = 0;
    for (const auto& block : blocks) {
        for (std::size_t c = 0; c < cells; ++c) {
            total[c].h.merge(block[c].h);
            total[c].m.merge(block[c].m);
            total[c].cross += block[c].cross;
            total[c].count += block[c].count;
            total[c].truncated += block[c].truncated;
            truncated += block[c].truncated;
        }
    }
    detail::check_cap(truncated, cfg.n_paths, cfg.max_truncated_fraction);

    ConstantsEstimate out;
    out.n_paths = cfg.n_paths;
    out.truncated_fraction = static_cast<double>(truncated) / static_cast<double>(cfg.n_paths);
    out.mode = cfg.mode;
    out.grid_points = grid ? cells : 0;
    out.n_max = cfg.n_max;
    out.seed = cfg.seed;

    double var_theta = 0.0;
    double var_gamma = 0.0;
    double cov = 0.0;
    for (std::size_t c = 0; c < cells; ++c) {
        const auto& cell = total[c];
        const double n = static_cast<double>(cell.count);
        const auto H = cell.h.estimate(cell.count);
        const auto M = cell.m.estimate(cell.count);
        out.theta += H.mean / static_cast<double>(cells);
        out.gamma += M.mean / static_cast<double>(cells);
        var_theta += H.se * H.se;
        var_gamma += M.se * M.se;
        cov += (cell.cross - n * H.mean * M.mean) / (n - 1.0) / n;
        if (grid) out.curve.push_back({fixed_grid_offset(c, cells), H, M, cell.count});
    }
    const double j2 = static_cast<double>(cells * cells);
    var_theta /= j2;
    var_gamma /= j2;
    cov /= j2;
    out.theta_se = std::sqrt(var_theta);
    out.gamma_se = std::sqrt(var_gamma);
    const double g = out.gamma;
    out.gap_se = std::sqrt(std::max(0.0, var_theta + 4.0 * g * g * var_gamma - 4.0 * g * cov));
    return out;
}

struct FineEstimate {
    double u = 0.0;
    int fine_steps = 0;
    MeanEstimate occupation;  ///< estimates H(u)
    MeanEstimate local_time;  ///< estimates M(u)
    std::size_t n_paths = 0;
    double truncated_fraction = 0.0;
};

/// Occupation-time and Tanaka local-time estimators on the same fine paths.
inline FineEstimate estimate_fine_functionals(double u, std::size_t n_paths, int fine_steps,
                                              std::uint64_t seed, const EstimatorOptions& opt = {}) {
    require(fine_steps >= 16, "fine step count m must be >= 16");
    require(n_paths >= 2, "fine estimators need n_paths >= 2");
    require(u >= 0.0 && u < 1.0, "ladder offset u must lie in [0, 1)");
    struct Block {
        MomentSums occ, loc;
        std::size_t truncated = 0;
    };
    std::vector<Block> blocks(detail::block_count(n_paths));
    parallel_blocks(blocks.size(), opt.workers, [&](std::size_t b) {
        Block acc;
        const std::size_t end = std::min(n_paths, (b + 1) * detail::kPathsPerBlock);
        for (std::size_t p = b * detail::kPathsPerBlock; p < end; ++p) {
            FineFunctionals f;
            const auto s = detail::run_path(u, seed, p, opt.n_max, fine_steps, false,
                                            [&](double t0, double w0, double t1, double w1) {
                                                f.add(t0, w0, t1, w1);
                                            });
            acc.truncated += s.truncated;
            acc.occ.add(s.truncated ? 0.0 : f.occupation);
            acc.loc.add(s.truncated ? 0.0 : f.local_time(s.terminal));
        }
        blocks[b] = acc;
    });
    Block total;
    for (const auto& b : blocks) {
        total.occ.merge(b.occ);
        total.loc.merge(b.loc);
        total.truncated += b.truncated;
    }
    detail::check_cap(total.truncated, n_paths, opt.max_truncated_fraction);
    FineEstimate out;
    out.u = u;
    out.fine_steps = fine_steps;
    out.occupation = total.occ.estimate(n_paths);
    out.local_time = total.loc.estimate(n_paths);
    out.n_paths = n_paths;
    out.truncated_fraction = static_cast<double>(total.truncated) / static_cast<double>(n_paths);
    return out;
}

inline MeanEstimate estimate_H_occupation(double u, std::size_t n_paths, int fine_steps,
                                          std::uint64_t seed, const EstimatorOptions& opt = {}) {
    return estimate_fine_functionals(u, n_paths, fine_steps, seed, opt).occupation;
}

inline MeanEstimate estimate_M_localtime(double u, std::size_t n_paths, int fine_steps,
                                         std::uint64_t seed, const EstimatorOptions& opt = {}) {
    return estimate_fine_functionals(u, n_paths, fine_steps, seed, opt).local_time;
}

// ---------------------------------------------------------------------------
// Fractional-part uniformity of discretely observed hitting times.

/// Kolmogorov-Smirnov distance between the empirical law of `samples` and Uniform[0, 1).
inline double ks_distance_uniform(std::vector<double> samples) {
    require(!samples.empty(), "KS distance of an empty sample");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double x = std::clamp(samples[i], 0.0, 1.0);
        d = std::max({d, (static_cast<double>(i) + 1.0) / n - x, x - static_cast<double>(i) / n});
    }
    return d;
}

struct UniformityConfig {
    double x0 = 1.0;
    double target = 1.9;
    double h = 0.01;
    int fine_steps = 32;
    std::size_t hits = 10000;       ///< hitting paths to collect
    double horizon = 50.0;          ///< paths not hitting by this time are excluded
    std::size_t max_paths = 0;      ///< simulation budget; 0 means 100 * hits + 1000
    bool interpolate_crossing = true;
    std::uint64_t seed = 20240611;
    unsigned workers = 1;
};

struct UniformityDiagnostic {
    double ks = 0.0;
    double reference_ks = 0.0;  ///< KS of a direct uniform sample of the same size
    std::size_t hits = 0;
    std::size_t simulated = 0;
    std::size_t excluded = 0;
    bool out_of_regime = false;
    std::vector<double> fractional_parts;
};

namespace detail {

/// Hitting time of level `level` by y_t = mu t + sigma B_t on the fine grid h/m,
/// as (cell index, fractional part); nullopt if not hit within `cells`.
inline std::optional<std::pair<std::int64_t, double>> first_fine_hit(
    double mu, double sigma, double level, double h, int m, std::int64_t cells,
    bool interpolate, std::uint64_t seed, std::uint64_t path) {
    NormalStream coarse(seed, path, kStreamWalk);
    const double var_cell = sigma * sigma * h;
    double y0 = 0.0;
    for (std::int64_t n = 0; n < cells; ++n) {
        const double y1 = y0 + mu * h + std::sqrt(var_cell) * coarse();
        const double a = level - y0;
        const double b = level - y1;
        if (b <= 0.0 || 2.0 * a * b / var_cell <= kBridgeSkipExponent) {
            // Bridge in units of fine steps: times 0..m, variance var_cell / m per unit.
            NormalStream bridge(seed, path, static_cast<std::uint32_t>(n + 1));
            double y = y0;
            for (int j = 1; j <= m; ++j) {
                double y_next = y1;
                if (j < m) {
                    const double left = static_cast<double>(m - j + 1);
                    const double mean = y + (y1 - y) / left;
                    const double var = var_cell / m * (left - 1.0) / left;
                    y_next = mean + std::sqrt(var) * bridge();
                }
                if (y_next >= level) {
                    double frac = static_cast<double>(j) / m;
                    if (interpolate) {
                        const double lambda = (level - y) / (y_next - y);
                        frac = (static_cast<double>(j - 1) + lambda) / m;
                    }
                    if (frac >= 1.0) return std::pair{n + 1, frac - 1.0};
                    return std::pair{n, frac};
                }
                y = y_next;
            }
        }
        y0 = y1;
    }
    return std::nullopt;
}

} // namespace detail

/// Fractional parts U = tau/h - floor(tau/h) of GBM hitting times of `target`,
/// compared with Uniform[0, 1) by the KS distance.
inline UniformityDiagnostic diagnose_fractional_uniformity(const StoppingProblem& problem,
                                                           const UniformityConfig& cfg) {
    if (!problem.diffusion.is_gbm()) {
        fail(ErrorCode::InvalidArgument, "uniformity diagnostic requires a GBM diffusion");
    }
    require(cfg.x0 > 0.0 && cfg.x0 < cfg.target, "uniformity diagnostic needs 0 < x0 < x_target");
    require(cfg.h > 0.0 && cfg.fine_steps >= 1 && cfg.horizon > 0.0,
            "uniformity diagnostic needs h > 0, m >= 1 and a positive horizon");
    if (cfg.hits < 100) fail(ErrorCode::InsufficientHits, "insufficient hits: fewer than 100 hitting paths requested");

    const auto& g = problem.diffusion.as_gbm();
    const double mu = g.drift - 0.5 * g.volatility * g.volatility;
    const double level = std::log(cfg.target / cfg.x0);
    const auto cells = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(cfg.horizon / cfg.h)));
    require(cells < static_cast<std::int64_t>(kStreamReserved), "horizon / h exceeds the stream budget");
    const std::size_t budget = cfg.max_paths ? cfg.max_paths : 100 * cfg.hits + 1000;

    UniformityDiagnostic out;
    out.out_of_regime = cfg.h >= cfg.horizon;
    constexpr std::size_t kBlock = 1024;
    std::size_t next_path = 0;
    while (out.fractional_parts.size() < cfg.hits && next_path < budget) {
        const std::size_t remaining = cfg.hits - out.fractional_parts.size();
        const std::size_t n_blocks = std::max<std::size_t>(1, std::min<std::size_t>(
            (2 * remaining + kBlock - 1) / kBlock, (budget - next_path + kBlock - 1) / kBlock));
        std::vector<std::vector<std::optional<double>>> results(n_blocks);
        parallel_blocks(n_blocks, cfg.workers, [&](std::size_t b) {
            const std::size_t begin = next_path + b * kBlock;
            const std::size_t end = std::min(budget, begin + kBlock);
            auto& r = results[b];
            for (std::size_t p = begin; p < end; ++p) {
                const auto hit = detail::first_fine_hit(mu, g.volatility, level, cfg.h, cfg.fine_steps,
                                                        cells, cfg.interpolate_crossing, cfg.seed, p);
                r.push_back(hit ? std::optional<double>(hit->second) : std::nullopt);
            }
        });
        for (const auto& r : results) {
            for (const auto& hit : r) {
                if (out.fractional_parts.size() == cfg.hits) break;
                ++out.simulated;
                if (hit) {
                    out.fractional_parts.push_back(*hit);
                } else {
                    ++out.excluded;
                }
            }
        }
        next_path += n_blocks * kBlock;
    }
    out.hits = out.fractional_parts.size();
    if (out.hits < 100) {
        fail(ErrorCode::InsufficientHits, "insufficient hits: only " + std::to_string(out.hits) +
                                              " paths reached the target");
    }
    out.ks = ks_distance_uniform(out.fractional_parts);
    std::vector<double> reference(out.hits);
    for (std::size_t i = 0; i < out.hits; ++i) reference[i] = keyed_uniform(cfg.seed, i, kStreamReserved);
    out.reference_ks = ks_distance_uniform(std::move(reference));
    return out;
}

} // namespace stoplab
