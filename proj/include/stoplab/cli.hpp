#pragma once

// Command-line driver. Every subcommand materializes its full configuration as
// JSON (defaults, then a previous report's "config" via --config, then explicit
// flags), runs the module pipeline and writes a report embedding that config.

#include "stoplab/constants.hpp"
#include "stoplab/continuous.hpp"
#include "stoplab/discrete.hpp"
#include "stoplab/error.hpp"
#include "stoplab/problem_io.hpp"
#include "stoplab/rates.hpp"
#include "stoplab/report.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <deque>
#include <functional>
#include <iostream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#ifndef STOPLAB_VERSION
#define STOPLAB_VERSION "0.0.0"
#endif

namespace stoplab::cli {

inline constexpr const char* kVersion = STOPLAB_VERSION;
inline constexpr std::uint64_t kBuiltinSeed = 20240611;

enum ExitCode : int { kExitOk = 0, kExitDomain = 1, kExitUsage = 2, kExitNumerical = 3 };

/// Bad command-line input detected after CLI11 parsing (exit 2).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::optional<std::uint64_t> parse_count(const std::string& s) {
    std::uint64_t v = 0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end || s.empty()) return std::nullopt;
    return v;
}

inline std::optional<double> parse_real(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

inline std::optional<std::vector<double>> parse_real_list(const std::string& s) {
    std::vector<double> out;
    std::size_t begin = 0;
    while (begin <= s.size()) {
        const std::size_t comma = std::min(s.find(',', begin), s.size());
        const auto v = parse_real(s.substr(begin, comma - begin));
        if (!v) return std::nullopt;
        out.push_back(*v);
        begin = comma + 1;
    }
    return out;
}

/// STOPLAB_SEED overrides the built-in default seed.
inline std::uint64_t default_seed() {
    const char* env = std::getenv("STOPLAB_SEED");
    if (env == nullptr || *env == '\0') return kBuiltinSeed;
    const auto v = parse_count(env);
    if (!v) throw UsageError(std::string("STOPLAB_SEED must be an unsigned integer, got '") + env + "'");
    return *v;
}

inline Json reference_problem_json() {
    return to_json(StoppingProblem{DiffusionSpec::gbm(0.0, 1.0), Payoff::call(1.0), 1.0});
}

// ---------------------------------------------------------------------------
// Typed access to the effective config.

inline const Json& config_at(const Json& cfg, const std::string& key) {
    if (!cfg.contains(key)) fail(ErrorCode::InvalidArgument, "config key '" + key + "' is missing");
    return cfg.at(key);
}

inline double get_real(const Json& cfg, const std::string& key) {
    const Json& v = config_at(cfg, key);
    if (!v.is_number()) fail(ErrorCode::InvalidArgument, "config key '" + key + "' must be a number");
    return v.get<double>();
}

inline std::uint64_t get_count(const Json& cfg, const std::string& key) {
    const Json& v = config_at(cfg, key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (d >= 0.0 && d == std::floor(d) && d < 1.8e19) return static_cast<std::uint64_t>(d);
    }
    fail(ErrorCode::InvalidArgument, "config key '" + key + "' must be a non-negative integer");
}

inline std::string get_text(const Json& cfg, const std::string& key) {
    const Json& v = config_at(cfg, key);
    if (!v.is_string()) fail(ErrorCode::InvalidArgument, "config key '" + key + "' must be a string");
    return v.get<std::string>();
}

inline std::vector<double> get_reals(const Json& cfg, const std::string& key) {
    const Json& v = config_at(cfg, key);
    if (v.is_number()) return {v.get<double>()};
    if (!v.is_array()) fail(ErrorCode::InvalidArgument, "config key '" + key + "' must be a list of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) fail(ErrorCode::InvalidArgument, "config key '" + key + "' must be a list of numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

inline unsigned get_workers(const Json& cfg) {
    const auto w = get_count(cfg, "workers");
    require(w >= 1 && w <= 1024, "workers must lie in [1, 1024]");
    return static_cast<unsigned>(w);
}

// ---------------------------------------------------------------------------
// Subcommand plumbing.

enum class Kind { Real, Count, Text, RealList, ProblemFile };

struct Setting {
    std::string flag;
    std::string key;
    Kind kind;
    std::string raw;
    CLI::Option* option = nullptr;
};

struct Outcome {
    Json result;
    std::optional<CsvTable> csv;
};

class Command {
public:
    using Runner = std::function<Outcome(Json& cfg, bool want_csv)>;

    Command(CLI::App& parent, const std::string& name, const std::string& description, Json defaults,
            Runner run)
        : app_(parent.add_subcommand(name, description)), name_(name), defaults_(std::move(defaults)),
          run_(std::move(run)) {
        app_->set_help_flag("--help", "print this help and exit");
        app_->add_option("--out", out_, "JSON report path (stdout when omitted)");
        app_->add_option("--csv", csv_, "CSV output path");
    }

    CLI::Option* add(const std::string& flag, const std::string& key, Kind kind, const std::string& help) {
        auto& s = settings_.emplace_back(Setting{flag, key, kind, {}, nullptr});
        std::string text = help;
        if (defaults_.contains(key)) text += " [" + defaults_.at(key).dump() + "]";
        s.option = app_->add_option(flag, s.raw, text);
        return s.option;
    }

    bool selected() const { return app_->parsed(); }
    const std::string& name() const { return name_; }
    const std::string& out_path() const { return out_; }
    const std::string& csv_path() const { return csv_; }
    const Json& defaults() const { return defaults_; }
    const Runner& runner() const { return run_; }

    /// Writes explicitly given flags into cfg.
    void apply_flags(Json& cfg) const {
        for (const auto& s : settings_) {
            if (s.option->count() == 0) continue;
            switch (s.kind) {
            case Kind::Real: {
                const auto v = parse_real(s.raw);
                if (!v) throw UsageError(s.flag + " expects a finite number, got '" + s.raw + "'");
                cfg[s.key] = *v;
                break;
            }
            case Kind::Count: {
                const auto v = parse_count(s.raw);
                if (!v) throw UsageError(s.flag + " expects a non-negative integer, got '" + s.raw + "'");
                cfg[s.key] = *v;
                break;
            }
            case Kind::RealList: {
                const auto v = parse_real_list(s.raw);
                if (!v) throw UsageError(s.flag + " expects a comma-separated list of numbers, got '" + s.raw + "'");
                cfg[s.key] = *v;
                break;
            }
            case Kind::Text:
                cfg[s.key] = s.raw;
                break;
            case Kind::ProblemFile:
                cfg["problem"] = to_json(load_problem(s.raw));
                cfg["problem_file"] = s.raw;
                break;
            }
        }
    }

private:
    CLI::App* app_;
    std::string name_;
    Json defaults_;
    Runner run_;
    std::deque<Setting> settings_;
    std::string out_;
    std::string csv_;
};

/// The "config" object of a previous report, or the file itself when it is a bare config.
inline Json load_rerun_config(const std::string& path, const std::string& subcommand) {
    const Json file = read_json_file(path);
    if (!file.is_object()) fail(ErrorCode::InvalidArgument, "'" + path + "' is not a JSON object");
    if (file.contains("subcommand") && file.at("subcommand") != subcommand) {
        throw UsageError("'" + path + "' was written by '" + file.at("subcommand").get<std::string>() +
                         "', not '" + subcommand + "'");
    }
    const Json cfg = file.contains("config") ? file.at("config") : file;
    if (!cfg.is_object()) fail(ErrorCode::InvalidArgument, "'" + path + "' has no config object");
    return cfg;
}

inline void merge_config(Json& cfg, const Json& given) {
    for (auto it = given.begin(); it != given.end(); ++it) {
        if (!cfg.contains(it.key())) fail(ErrorCode::InvalidArgument, "unknown config key '" + it.key() + "'");
        cfg[it.key()] = it.value();
    }
}

inline StoppingProblem problem_of(Json& cfg) {
    const auto problem = problem_from_json(config_at(cfg, "problem"));
    cfg["problem"] = to_json(problem);
    return problem;
}

inline OdeConfig ode_config(const Json& cfg) {
    OdeConfig ode;
    ode.x_lo = get_real(cfg, "ode_x_lo");
    ode.x_hi = get_real(cfg, "ode_x_hi");
    ode.steps = static_cast<int>(get_count(cfg, "ode_steps"));
    ode.root_tol = get_real(cfg, "ode_root_tol");
    return ode;
}

inline GridSpec grid_config(const Json& cfg, const StoppingProblem& problem, const ContinuousSolution& cont) {
    GridSpec g = default_grid(problem, cont, get_count(cfg, "grid_n"));
    if (const double lo = get_real(cfg, "grid_min"); lo != 0.0) g.x_min = lo;
    if (const double hi = get_real(cfg, "grid_max"); hi != 0.0) g.x_max = hi;
    g.validate();
    return g;
}

inline DiscreteConfig discrete_config(const Json& cfg) {
    DiscreteConfig d;
    d.quad_order = static_cast<int>(get_count(cfg, "quad_order"));
    d.iteration.tol = get_real(cfg, "tol");
    d.iteration.max_iterations = static_cast<std::int64_t>(get_count(cfg, "max_iterations"));
    d.iteration.workers = get_workers(cfg);
    return d;
}

inline void add_grid_flags(Command& c) {
    c.add("--grid-min", "grid_min", Kind::Real, "lowest grid node, 0 for x*/100");
    c.add("--grid-max", "grid_max", Kind::Real, "highest grid node, 0 for 10 x*");
    c.add("--grid-n", "grid_n", Kind::Count, "number of log-uniform grid nodes");
    c.add("--quad-order", "quad_order", Kind::Count, "Gauss-Hermite order");
    c.add("--tol", "tol", Kind::Real, "value iteration tolerance");
    c.add("--max-iterations", "max_iterations", Kind::Count, "value iteration cap");
}

inline void add_ode_flags(Command& c) {
    c.add("--ode-x-lo", "ode_x_lo", Kind::Real, "ODE start, 0 for kink/20");
    c.add("--ode-x-hi", "ode_x_hi", Kind::Real, "ODE end, 0 for 100 max(kink, x_lo)");
    c.add("--ode-steps", "ode_steps", Kind::Count, "RK4 steps");
    c.add("--ode-root-tol", "ode_root_tol", Kind::Real, "smooth-fit bisection tolerance in log x");
}

inline Json grid_defaults() {
    return {{"grid_min", 0.0}, {"grid_max", 0.0}, {"grid_n", 4096}, {"quad_order", 64}, {"tol", 1e-10},
            {"max_iterations", 1000000}};
}

inline Json ode_defaults() { return {{"ode_x_lo", 0.0}, {"ode_x_hi", 0.0}, {"ode_steps", 20000}, {"ode_root_tol", 1e-13}}; }

inline Json base_defaults(bool with_problem) {
    Json d = {{"seed", default_seed()}, {"workers", 1}};
    if (with_problem) {
        d["problem"] = reference_problem_json();
        d["problem_file"] = "";
    }
    return d;
}

inline Json with(Json a, const Json& b) {
    for (auto it = b.begin(); it != b.end(); ++it) a[it.key()] = it.value();
    return a;
}

// ---------------------------------------------------------------------------
// constants

inline Outcome run_constants(Json& cfg, bool want_csv) {
    ConstantsConfig c;
    c.n_paths = get_count(cfg, "paths");
    c.seed = get_count(cfg, "seed");
    const auto mode = get_text(cfg, "u_mode");
    if (mode == "randomized") {
        c.mode = OffsetMode::Randomized;
    } else if (mode == "fixed-grid") {
        c.mode = OffsetMode::FixedGrid;
    } else {
        fail(ErrorCode::InvalidArgument, "u_mode must be 'randomized' or 'fixed-grid'");
    }
    c.grid_points = get_count(cfg, "grid_points");
    c.n_max = static_cast<std::int64_t>(get_count(cfg, "n_max"));
    c.max_truncated_fraction = get_real(cfg, "max_truncated_fraction");
    c.workers = get_workers(cfg);
    const auto fine_steps = static_cast<int>(get_count(cfg, "fine_steps"));
    const auto duality_u = get_reals(cfg, "duality_u");
    const auto duality_paths = get_count(cfg, "duality_paths");
    if (want_csv && c.mode != OffsetMode::FixedGrid) throw UsageError("--csv needs --u-mode fixed-grid");

    const auto est = estimate_theta_gamma(c);
    Outcome o{to_json(est), {}};
    if (fine_steps > 0) {
        const EstimatorOptions opt{c.n_max, c.max_truncated_fraction, c.workers};
        Json rows = Json::array();
        for (const double u : duality_u) {
            const auto hm = estimate_H_M(u, duality_paths, c.seed, opt);
            const auto fine = estimate_fine_functionals(u, duality_paths, fine_steps, c.seed, opt);
            rows.push_back({{"u", u},
                            {"H_hat", hm.H.mean},
                            {"H_se", hm.H.se},
                            {"H_occ", fine.occupation.mean},
                            {"H_occ_se", fine.occupation.se},
                            {"H_gap", fine.occupation.mean - hm.H.mean},
                            {"H_combined_se", combined_se(hm.H.se, fine.occupation.se)},
                            {"M_hat", hm.M.mean},
                            {"M_se", hm.M.se},
                            {"M_loc", fine.local_time.mean},
                            {"M_loc_se", fine.local_time.se},
                            {"M_gap", fine.local_time.mean - hm.M.mean},
                            {"M_combined_se", combined_se(hm.M.se, fine.local_time.se)}});
        }
        o.result["duality"] = {{"fine_steps", fine_steps}, {"n_paths", duality_paths}, {"rows", rows}};
    }
    if (want_csv) o.csv = curve_csv(est);
    return o;
}

// ---------------------------------------------------------------------------
// solve-continuous

inline ContinuousSolution continuous_by_method(const StoppingProblem& problem, const Json& cfg) {
    const auto method = get_text(cfg, "method");
    const auto ode = ode_config(cfg);
    if (method == "auto") return solve_continuous(problem, ode);
    if (method == "ode") return solve_general(problem, ode);
    if (method == "closed-form") {
        require_valid(problem);
        if (!problem.diffusion.is_gbm() || problem.payoff.kind() != Payoff::Kind::Call) {
            fail(ErrorCode::InvalidArgument, "the closed form needs a GBM diffusion and a Call payoff");
        }
        const auto& g = problem.diffusion.as_gbm();
        return solve_gbm_call(g.drift, g.volatility, problem.rate, problem.payoff.strike());
    }
    fail(ErrorCode::InvalidArgument, "method must be 'auto', 'closed-form' or 'ode'");
}

inline Outcome run_solve_continuous(Json& cfg, bool want_csv) {
    const auto problem = problem_of(cfg);
    const auto sol = continuous_by_method(problem, cfg);
    Outcome o{to_json(sol), {}};
    if (want_csv) {
        const auto n = get_count(cfg, "csv_points");
        require(n >= 2, "csv_points must be >= 2");
        double lo = get_real(cfg, "csv_x_min");
        double hi = get_real(cfg, "csv_x_max");
        if (lo == 0.0) lo = std::max(sol.threshold / 10.0, sol.domain_lower());
        if (hi == 0.0) hi = 3.0 * sol.threshold;
        require(lo > 0.0 && hi > lo, "CSV sample range must satisfy 0 < x_min < x_max");
        CsvTable t{{"x", "V"}, {}};
        for (std::uint64_t i = 0; i < n; ++i) {
            const double x = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n - 1));
            t.rows.push_back({x, value_at(sol, x)});
        }
        o.csv = std::move(t);
    }
    return o;
}

// ---------------------------------------------------------------------------
// solve-discrete

inline Outcome run_solve_discrete(Json& cfg, bool want_csv) {
    const auto problem = problem_of(cfg);
    require_valid(problem);
    const double h = get_real(cfg, "h");
    require(h > 0.0, "h must be > 0");
    const auto cont = solve_continuous(problem, ode_config(cfg));
    const auto grid = grid_config(cfg, problem, cont);
    const auto sol = solve_discrete(problem, h, grid, discrete_config(cfg), cont.threshold);
    Outcome o{to_json(sol), {}};
    o.result["x_star"] = cont.threshold;
    o.result["boundary_gap"] = cont.threshold - *sol.threshold;
    if (want_csv) o.csv = values_csv(sol);
    return o;
}

// ---------------------------------------------------------------------------
// sweep

inline UniversalConstants builtin_constants() { return {0.589, 0.582, 0.0, 0.0}; }

/// `builtin`, `mc`, an inline "theta,gamma[,theta_se,gamma_se]" or a JSON file
/// (a constants report or an object with theta and gamma).
inline std::pair<UniversalConstants, std::string> resolve_constants(const Json& cfg) {
    const auto source = get_text(cfg, "constants");
    if (source == "builtin") return {builtin_constants(), "builtin"};
    if (source == "mc") {
        ConstantsConfig c;
        c.n_paths = get_count(cfg, "constants_paths");
        c.seed = get_count(cfg, "seed");
        c.workers = get_workers(cfg);
        return {UniversalConstants::from_estimate(estimate_theta_gamma(c)), "monte-carlo"};
    }
    if (source.find(',') != std::string::npos) {
        const auto v = parse_real_list(source);
        if (!v || (v->size() != 2 && v->size() != 4)) {
            fail(ErrorCode::InvalidArgument, "inline constants must be 'theta,gamma' or 'theta,gamma,theta_se,gamma_se'");
        }
        UniversalConstants u{(*v)[0], (*v)[1], 0.0, 0.0};
        if (v->size() == 4) {
            u.theta_se = (*v)[2];
            u.gamma_se = (*v)[3];
        }
        return {u, "inline"};
    }
    const Json file = read_json_file(source);
    const Json& body = file.contains("result") ? file.at("result") : file;
    try {
        return {UniversalConstants{body.at("theta").get<double>(), body.at("gamma").get<double>(),
                                   body.value("theta_se", 0.0), body.value("gamma_se", 0.0)},
                "file"};
    } catch (const Json::exception&) {
        fail(ErrorCode::InvalidArgument, "'" + source + "' does not hold theta and gamma");
    }
}

inline Json to_json(const TwoTermFit& f) {
    return {{"leading", f.leading}, {"correction", f.correction}, {"residual_norm", f.residual_norm}};
}

inline Outcome run_sweep_command(Json& cfg, bool want_csv) {
    const auto problem = problem_of(cfg);
    require_valid(problem);
    SweepConfig sc;
    sc.h_list = get_reals(cfg, "h_list");
    sc.ode = ode_config(cfg);
    sc.discrete = discrete_config(cfg);
    sc.workers = get_workers(cfg);
    sc.discrete.iteration.workers = 1;
    const auto x_refs = get_reals(cfg, "x_ref");
    if (!x_refs.empty()) sc.x_ref = x_refs.front();
    const auto cont = solve_continuous(problem, sc.ode);
    sc.grid = grid_config(cfg, problem, cont);
    const auto [consts, source] = resolve_constants(cfg);
    const RateTolerances tol{get_real(cfg, "tol_boundary"), get_real(cfg, "tol_value")};

    const auto sweep = run_sweep(problem, sc);
    Json r;
    r["continuous"] = to_json(sweep.continuous);
    r["x_ref"] = sweep.x_ref;
    r["value_ref"] = sweep.value_ref;
    r["grid"] = to_json(sweep.grid);
    Json rows = Json::array();
    bool negative = true;
    for (const auto& row : sweep.rows) {
        rows.push_back(to_json(row));
        negative = negative && row.rel_value_gap < 0.0;
    }
    r["rows"] = rows;
    r["value_gaps_negative"] = negative;
    r["checks"] = to_json(sweep.checks);
    r["constants"] = {{"source", source}, {"theta", consts.theta}, {"gamma", consts.gamma},
                      {"theta_se", consts.theta_se}, {"gamma_se", consts.gamma_se}};
    Json notes = Json::array();

    std::optional<TheoryCoefficients> theory;
    if (sweep.continuous.A > 0.0) {
        theory = theory_coefficients(sweep.continuous, consts);
        r["theory"] = to_json(*theory);
    } else {
        notes.push_back("curvature jump A = 0: no rate coefficients predicted");
    }
    if (sweep.rows.size() >= 3) {
        const auto bands = rate_bands(sweep.rows);
        r["bands"] = {{"boundary_width", bands.boundary_width}, {"value_width", bands.value_width}};
        const auto fitted = fit_rates(sweep.rows);
        r["fitted"] = {{"boundary", to_json(fitted.boundary)}, {"value", to_json(fitted.value)}};
        if (theory) {
            const auto cmp = compare_report(fitted, *theory, tol);
            r["comparison"] = {{"boundary", to_json(cmp.boundary)}, {"value", to_json(cmp.value)},
                               {"pass", cmp.pass()}};
            if (!cmp.value.pass) {
                notes.push_back("value coefficient outside tolerance at x_ref = " + format_double(sweep.x_ref) +
                                "; the o(h) remainder may be large near 0 or x*");
            }
        }
    } else {
        notes.push_back("fewer than 3 step sizes: rates not fitted");
    }

    // Additional reference points reuse the solved value functions.
    Json scan = Json::array();
    for (std::size_t i = 1; i < x_refs.size(); ++i) {
        const double x = x_refs[i];
        require(x > 0.0 && x < sweep.continuous.threshold, "x_ref must lie in (0, x*)");
        require(x >= sweep.grid.x_min && x <= sweep.grid.x_max, "x_ref must lie inside the grid");
        const double v = value_at(sweep.continuous, x);
        std::vector<RateRow> at_x = sweep.rows;
        Json gaps = Json::array();
        for (std::size_t k = 0; k < at_x.size(); ++k) {
            at_x[k].value_h = value_at_h(sweep.solutions[k], x);
            at_x[k].rel_value_gap = (at_x[k].value_h - v) / v;
            gaps.push_back({{"h", at_x[k].h}, {"v_h", at_x[k].value_h}, {"rel_value_gap", at_x[k].rel_value_gap}});
        }
        Json entry = {{"x_ref", x}, {"value_ref", v}, {"rows", gaps}};
        if (at_x.size() >= 3) {
            const auto fitted = fit_rates(at_x);
            entry["fitted_value"] = to_json(fitted.value);
            if (theory) entry["value"] = to_json(judge(fitted.value.leading, theory->value, tol.value));
        }
        scan.push_back(entry);
    }
    if (!scan.empty()) r["x_ref_scan"] = scan;
    r["notes"] = notes;
    Outcome o{r, {}};
    if (want_csv) o.csv = sweep_csv(sweep);
    return o;
}

// ---------------------------------------------------------------------------
// diagnose-uniformity

inline Outcome run_uniformity(Json& cfg, bool want_csv) {
    const auto problem = problem_of(cfg);
    require_valid(problem);
    UniformityConfig u;
    u.x0 = get_real(cfg, "x0");
    u.target = get_real(cfg, "target");
    u.h = get_real(cfg, "h");
    u.fine_steps = static_cast<int>(get_count(cfg, "fine_steps"));
    u.hits = get_count(cfg, "hits");
    u.horizon = get_real(cfg, "horizon");
    u.max_paths = get_count(cfg, "max_paths");
    const auto crossing = get_text(cfg, "crossing");
    if (crossing != "interpolate" && crossing != "node") {
        fail(ErrorCode::InvalidArgument, "crossing must be 'interpolate' or 'node'");
    }
    u.interpolate_crossing = crossing == "interpolate";
    u.seed = get_count(cfg, "seed");
    u.workers = get_workers(cfg);
    const auto d = diagnose_fractional_uniformity(problem, u);
    Outcome o{to_json(d), {}};
    if (want_csv) {
        CsvTable t{{"U"}, {}};
        for (const double x : d.fractional_parts) t.rows.push_back({x});
        o.csv = std::move(t);
    }
    return o;
}

// ---------------------------------------------------------------------------

inline Json error_object(const std::string& code, const std::string& message, int exit_code) {
    return {{"error", {{"code", code}, {"message", message}, {"exit_code", exit_code}}}};
}

inline int report_error(std::ostream& err, const std::string& code, const std::string& message, int exit_code) {
    err << error_object(code, message, exit_code).dump() << "\n";
    return exit_code;
}

inline int run_command(int argc, const char* const* argv, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr) {
    std::deque<Command> commands;
    CLI::App app{"numerical lab for discretely monitored optimal stopping", "stoplab"};
    app.set_help_flag("--help", "print this help and exit");
    app.require_subcommand(1, 1);
    app.fallthrough();
    app.set_version_flag("--version", std::string(kVersion));
    std::string workers_raw;
    std::string config_path;
    auto* workers_opt = app.add_option("--workers", workers_raw, "worker threads (results do not depend on it)");
    app.add_option("--config", config_path, "previous report (or bare config) to rerun");

    try {
        auto& constants = commands.emplace_back(
            app, "constants", "Monte Carlo estimates of the ladder constants Theta and Gamma",
            with(base_defaults(false), {{"paths", 2000000}, {"u_mode", "randomized"}, {"grid_points", 64},
                                        {"n_max", kDefaultLadderCap}, {"max_truncated_fraction", 0.01},
                                        {"fine_steps", 0}, {"duality_u", {0.0, 0.25, 0.5}},
                                        {"duality_paths", 500000}}),
            run_constants);
        constants.add("--paths", "paths", Kind::Count, "ladder paths");
        constants.add("--seed", "seed", Kind::Count, "RNG seed");
        constants.add("--u-mode", "u_mode", Kind::Text, "offset sampling")
            ->check(CLI::IsMember({"randomized", "fixed-grid"}));
        constants.add("--grid-points", "grid_points", Kind::Count, "offsets for fixed-grid mode");
        constants.add("--n-max", "n_max", Kind::Count, "ladder cap");
        constants.add("--max-truncated-fraction", "max_truncated_fraction", Kind::Real, "allowed capped fraction");
        constants.add("--fine-steps", "fine_steps", Kind::Count, "m for occupation/local-time cross-checks, 0 = off");
        constants.add("--duality-u", "duality_u", Kind::RealList, "offsets for the cross-checks");
        constants.add("--duality-paths", "duality_paths", Kind::Count, "paths per cross-check estimator");

        auto& cont = commands.emplace_back(
            app, "solve-continuous", "continuous-time threshold, value and curvature jump",
            with(with(base_defaults(true), ode_defaults()),
                 {{"method", "auto"}, {"csv_x_min", 0.0}, {"csv_x_max", 0.0}, {"csv_points", 201}}),
            run_solve_continuous);
        cont.add("--problem", "problem", Kind::ProblemFile, "problem JSON (reference GBM call when omitted)");
        cont.add("--method", "method", Kind::Text, "solver")->check(CLI::IsMember({"auto", "closed-form", "ode"}));
        add_ode_flags(cont);
        cont.add("--csv-x-min", "csv_x_min", Kind::Real, "first CSV sample, 0 for x*/10");
        cont.add("--csv-x-max", "csv_x_max", Kind::Real, "last CSV sample, 0 for 3 x*");
        cont.add("--csv-points", "csv_points", Kind::Count, "log-spaced CSV samples");
        cont.add("--seed", "seed", Kind::Count, "recorded seed");

        auto& disc = commands.emplace_back(
            app, "solve-discrete", "value iteration for one exercise spacing h",
            with(with(with(base_defaults(true), ode_defaults()), grid_defaults()), {{"h", 0.01}}),
            run_solve_discrete);
        disc.add("--problem", "problem", Kind::ProblemFile, "problem JSON (reference GBM call when omitted)");
        disc.add("--h", "h", Kind::Real, "exercise spacing");
        add_grid_flags(disc);
        add_ode_flags(disc);
        disc.add("--seed", "seed", Kind::Count, "recorded seed");

        auto& sweep = commands.emplace_back(
            app, "sweep", "h sweep with fitted and predicted convergence rates",
            with(with(with(base_defaults(true), ode_defaults()), grid_defaults()),
                 {{"h_list", {0.04, 0.02, 0.01, 0.005, 0.0025}},
                  {"x_ref", Json::array()},
                  {"constants", "builtin"},
                  {"constants_paths", 2000000},
                  {"tol_boundary", 0.10},
                  {"tol_value", 0.15}}),
            run_sweep_command);
        sweep.add("--problem", "problem", Kind::ProblemFile, "problem JSON (reference GBM call when omitted)");
        sweep.add("--h-list", "h_list", Kind::RealList, "decreasing step sizes");
        sweep.add("--x-ref", "x_ref", Kind::RealList, "reference states in (0, x*), first one drives the CSV; empty for x*/2");
        sweep.add("--constants", "constants", Kind::Text, "builtin | mc | FILE | theta,gamma[,theta_se,gamma_se]");
        sweep.add("--constants-paths", "constants_paths", Kind::Count, "paths for --constants mc");
        sweep.add("--tol-boundary", "tol_boundary", Kind::Real, "relative tolerance on c_boundary");
        sweep.add("--tol-value", "tol_value", Kind::Real, "relative tolerance on c_value");
        add_grid_flags(sweep);
        add_ode_flags(sweep);
        sweep.add("--seed", "seed", Kind::Count, "RNG seed (for --constants mc)");

        auto& unif = commands.emplace_back(
            app, "diagnose-uniformity", "KS test of hitting-time fractional parts against Uniform[0, 1)",
            with(base_defaults(true), {{"x0", 1.0}, {"target", 1.9}, {"h", 0.01}, {"fine_steps", 32},
                                       {"hits", 10000}, {"horizon", 50.0}, {"max_paths", 0},
                                       {"crossing", "interpolate"}}),
            run_uniformity);
        unif.add("--problem", "problem", Kind::ProblemFile, "GBM problem JSON (reference when omitted)");
        unif.add("--x0", "x0", Kind::Real, "start");
        unif.add("--target", "target", Kind::Real, "level to hit");
        unif.add("--h", "h", Kind::Real, "cell width");
        unif.add("--fine-steps", "fine_steps", Kind::Count, "substeps m per cell");
        unif.add("--hits", "hits", Kind::Count, "hitting paths to collect");
        unif.add("--horizon", "horizon", Kind::Real, "paths not hitting by this time are excluded");
        unif.add("--max-paths", "max_paths", Kind::Count, "simulation budget, 0 for 100 hits + 1000");
        unif.add("--crossing", "crossing", Kind::Text, "crossing position within a substep")
            ->check(CLI::IsMember({"interpolate", "node"}));
        unif.add("--seed", "seed", Kind::Count, "RNG seed");
    } catch (const UsageError& e) {
        return report_error(err, "USAGE", e.what(), kExitUsage);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        report_error(err, "USAGE", e.what(), kExitUsage);
        err << app.help();
        return kExitUsage;
    }

    const Command* cmd = nullptr;
    for (const auto& c : commands) {
        if (c.selected()) cmd = &c;
    }
    if (cmd == nullptr) return report_error(err, "USAGE", "no subcommand given", kExitUsage);

    try {
        Json cfg = cmd->defaults();
        if (!config_path.empty()) merge_config(cfg, load_rerun_config(config_path, cmd->name()));
        cmd->apply_flags(cfg);
        if (workers_opt->count() > 0) {
            const auto w = parse_count(workers_raw);
            if (!w || *w == 0) throw UsageError("--workers expects a positive integer, got '" + workers_raw + "'");
            cfg["workers"] = *w;
        }

        const auto start = std::chrono::steady_clock::now();
        Outcome o = cmd->runner()(cfg, !cmd->csv_path().empty());
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

        const Json report = {{"tool", "stoplab"},
                             {"version", kVersion},
                             {"subcommand", cmd->name()},
                             {"seed", config_at(cfg, "seed")},
                             {"config", cfg},
                             {"result", o.result},
                             {"runtime_seconds", seconds}};
        // Serialize everything first so a bad value never leaves a partial artifact.
        const std::string json_text = dump_stable(report);
        const std::string csv_text = o.csv ? to_csv(*o.csv) : std::string();
        if (cmd->out_path().empty()) {
            out << json_text;
        } else {
            write_text_file(cmd->out_path(), json_text);
        }
        if (o.csv) write_text_file(cmd->csv_path(), csv_text);
        return kExitOk;
    } catch (const UsageError& e) {
        return report_error(err, "USAGE", e.what(), kExitUsage);
    } catch (const Error& e) {
        return report_error(err, std::string(to_string(e.code())), e.what(),
                            is_numerical_failure(e.code()) ? kExitNumerical : kExitDomain);
    } catch (const Json::exception& e) {
        return report_error(err, std::string(to_string(ErrorCode::InvalidArgument)), e.what(), kExitDomain);
    } catch (const std::exception& e) {
        return report_error(err, "INTERNAL", e.what(), kExitNumerical);
    }
}

} // namespace stoplab::cli
