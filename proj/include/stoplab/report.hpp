#pragma once

// Report serialization. JSON keys are sorted and every floating-point value is
// written with 17 significant digits, so identical results give identical bytes.

#include "stoplab/constants.hpp"
#include "stoplab/continuous.hpp"
#include "stoplab/discrete.hpp"
#include "stoplab/error.hpp"
#include "stoplab/problem_io.hpp"
#include "stoplab/rates.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

namespace stoplab {

inline std::string format_double(double x) {
    if (!std::isfinite(x)) fail(ErrorCode::NonFiniteReport, "non-finite in report");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace detail {

inline void dump_stable(const Json& j, std::string& out, int indent, int depth) {
    const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
    const std::string close(static_cast<std::size_t>(indent * depth), ' ');
    switch (j.type()) {
    case Json::value_t::object: {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += "{\n";
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {  // std::map order: sorted keys
            if (!first) out += ",\n";
            first = false;
            out += pad + Json(it.key()).dump() + ": ";
            dump_stable(it.value(), out, indent, depth + 1);
        }
        out += "\n" + close + "}";
        return;
    }
    case Json::value_t::array: {
        if (j.empty()) {
            out += "[]";
            return;
        }
        out += "[\n";
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (i) out += ",\n";
            out += pad;
            dump_stable(j[i], out, indent, depth + 1);
        }
        out += "\n" + close + "]";
        return;
    }
    case Json::value_t::number_float:
        out += format_double(j.get<double>());
        return;
    default:
        out += j.dump();
        return;
    }
}

} // namespace detail

inline std::string dump_stable(const Json& j, int indent = 2) {
    std::string out;
    detail::dump_stable(j, out, indent, 0);
    out += "\n";
    return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorCode::Io, "cannot write '" + path + "'");
    f << content;
    if (!f) fail(ErrorCode::Io, "write failed for '" + path + "'");
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

inline std::string to_csv(const CsvTable& table) {
    std::string out;
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        if (i) out += ',';
        out += table.header[i];
    }
    out += '\n';
    for (const auto& row : table.rows) {
        require(row.size() == table.header.size(), "CSV row width does not match the header");
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += format_double(row[i]);
        }
        out += '\n';
    }
    return out;
}

enum class ReportFormat { Json, Csv };

/// Serializes before touching the file, so a non-finite value never leaves a partial artifact.
inline void write_report(const Json& report, const std::string& path) {
    write_text_file(path, dump_stable(report));
}

inline void write_report(const CsvTable& table, const std::string& path) {
    write_text_file(path, to_csv(table));
}

// ---------------------------------------------------------------------------
// Result records.

inline Json to_json(const MeanEstimate& e) { return {{"mean", e.mean}, {"se", e.se}}; }

inline std::string to_string(OffsetMode m) { return m == OffsetMode::Randomized ? "randomized" : "fixed-grid"; }

inline Json to_json(const ConstantsEstimate& e) {
    Json j = {{"theta", e.theta},
              {"gamma", e.gamma},
              {"theta_se", e.theta_se},
              {"gamma_se", e.gamma_se},
              {"theta_minus_gamma_sq", e.theta - e.gamma * e.gamma},
              {"theta_minus_gamma_sq_se", e.gap_se},
              {"n_paths", e.n_paths},
              {"truncated_fraction", e.truncated_fraction},
              {"u_mode", to_string(e.mode)},
              {"n_max", e.n_max},
              {"seed", e.seed}};
    if (e.mode == OffsetMode::FixedGrid) {
        j["grid_points"] = e.grid_points;
        Json curve = Json::array();
        for (const auto& p : e.curve) {
            curve.push_back({{"u", p.u}, {"H_hat", p.H.mean}, {"H_se", p.H.se}, {"M_hat", p.M.mean},
                             {"M_se", p.M.se}, {"n_paths", p.n_paths}});
        }
        j["curve"] = curve;
    }
    return j;
}

inline CsvTable curve_csv(const ConstantsEstimate& e) {
    CsvTable t{{"u", "H_hat", "H_se", "M_hat", "M_se"}, {}};
    for (const auto& p : e.curve) t.rows.push_back({p.u, p.H.mean, p.H.se, p.M.mean, p.M.se});
    return t;
}

inline Json to_json(const ContinuousSolution& s) {
    Json j = {{"x_star", s.threshold},
              {"A", s.A},
              {"curvature_left", s.curvature_left},
              {"degenerate", s.degenerate},
              {"sigma_at_threshold", s.sigma_at_threshold},
              {"drift_at_threshold", s.drift_at_threshold},
              {"residuals", {{"value_match", s.value_match_residual}, {"smooth_fit", s.smooth_fit_residual}}}};
    if (s.is_closed_form()) {
        j["representation"] = "closed-form";
        j["alpha"] = s.closed_form().alpha;
        j["B"] = s.closed_form().B;
    } else {
        const auto& t = s.tabulated();
        j["representation"] = "tabulated-ode";
        j["c1"] = t.c1;
        j["ode_x_lo"] = std::exp(t.t0);
        j["ode_nodes"] = t.g.size();
    }
    return j;
}

inline Json to_json(const GridSpec& g) {
    return {{"x_min", g.x_min}, {"x_max", g.x_max}, {"n_nodes", g.n_nodes}};
}

inline Json to_json(const DiscreteSolution& s) {
    const auto structure = exercise_structure(s);
    Json j = {{"h", s.h},
              {"iterations", s.iterations},
              {"final_update", s.final_update},
              {"residual", s.residual},
              {"clamped_mass_max", s.clamped_mass_max},
              {"eps_sol", s.eps_sol()},
              {"grid", to_json(s.grid)},
              {"exercise_upper_interval", structure.upper_interval},
              {"exercise_first_node", structure.first_exercise_node}};
    if (s.threshold) j["x_star_h"] = *s.threshold;
    return j;
}

inline CsvTable values_csv(const DiscreteSolution& s) {
    CsvTable t{{"x_i", "V_h"}, {}};
    for (std::size_t i = 0; i < s.value.size(); ++i) t.rows.push_back({s.grid.node(i), s.value[i]});
    return t;
}

inline Json to_json(const TheoryCoefficients& t) {
    return {{"c_boundary", t.boundary},
            {"c_value", t.value},
            {"theta", t.constants.theta},
            {"gamma", t.constants.gamma},
            {"theta_se", t.constants.theta_se},
            {"gamma_se", t.constants.gamma_se},
            {"x_star", t.threshold},
            {"A", t.A},
            {"sigma_at_threshold", t.sigma}};
}

inline Json to_json(const CoefficientVerdict& v) {
    return {{"fitted", v.fitted}, {"theory", v.theory}, {"rel_error", v.rel_error},
            {"tolerance", v.tolerance}, {"pass", v.pass}};
}

inline Json to_json(const RateRow& r) {
    return {{"h", r.h},
            {"x_star_h", r.threshold_h},
            {"v_h_at_xref", r.value_h},
            {"boundary_gap", r.boundary_gap},
            {"rel_value_gap", r.rel_value_gap},
            {"iterations", r.iterations},
            {"final_update", r.final_update},
            {"residual", r.residual},
            {"clamped_mass_max", r.clamped_mass_max},
            {"exercise_upper_interval", r.upper_interval}};
}

inline Json to_json(const SweepChecks& c) {
    return {{"max_payoff_excess", c.max_below_payoff},
            {"max_excess_over_continuous", c.max_above_continuous},
            {"max_refinement_excess", c.max_refinement_excess},
            {"refinement_pairs", c.refinement_pairs},
            {"max_threshold_excess", c.max_threshold_excess},
            {"upper_intervals", c.upper_intervals},
            {"eps_sol", c.eps_sol},
            {"ordering_holds", c.ordering_holds()}};
}

inline CsvTable sweep_csv(const SweepResult& s) {
    CsvTable t{{"h", "x_star_h", "boundary_gap", "boundary_gap_over_sqrt_h", "v_h_at_xref", "rel_value_gap",
                "rel_value_gap_over_h"},
               {}};
    for (const auto& r : s.rows) {
        t.rows.push_back({r.h, r.threshold_h, r.boundary_gap, r.boundary_gap / std::sqrt(r.h), r.value_h,
                          r.rel_value_gap, r.rel_value_gap / r.h});
    }
    return t;
}

inline Json to_json(const UniformityDiagnostic& d) {
    return {{"ks", d.ks},
            {"reference_ks", d.reference_ks},
            {"hits", d.hits},
            {"simulated", d.simulated},
            {"excluded", d.excluded},
            {"out_of_asymptotic_regime", d.out_of_regime}};
}

} // namespace stoplab
