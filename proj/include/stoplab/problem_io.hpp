#pragma once

// JSON form of stopping problems:
//
//   {"diffusion": {"family": "GBM", "b": 0.0, "sigma": 1.0},
//    "payoff": {"kind": "Call", "k": 1.0},
//    "r": 1.0}
//
// Tabulated diffusions use {"family": "TabulatedCoefficients", "nodes": [...],
// "b": [...], "sigma": [...]}; a scalar "b" or "sigma" is broadcast over the nodes.
// Power baskets use {"kind": "PowerBasket", "k": 0.0, "terms": [{"A": 1, "alpha": 2}]}.

#include "stoplab/error.hpp"
#include "stoplab/model.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <string>

namespace stoplab {

using Json = nlohmann::json;

namespace detail {

inline std::vector<double> node_array(const Json& value, std::size_t n, const char* field) {
    if (value.is_number()) return std::vector<double>(n, value.get<double>());
    if (!value.is_array() || value.size() != n) {
        fail(ErrorCode::InvalidArgument,
             std::string("diffusion.") + field + " must be a scalar or one value per node");
    }
    return value.get<std::vector<double>>();
}

} // namespace detail

inline Json to_json(const DiffusionSpec& d) {
    if (d.is_gbm()) {
        return {{"family", "GBM"}, {"b", d.as_gbm().drift}, {"sigma", d.as_gbm().volatility}};
    }
    const auto& t = d.as_tabulated();
    return {{"family", "TabulatedCoefficients"}, {"nodes", t.nodes}, {"b", t.drift},
            {"sigma", t.volatility}};
}

inline Json to_json(const Payoff& p) {
    if (p.kind() == Payoff::Kind::Call) return {{"kind", "Call"}, {"k", p.strike()}};
    Json terms = Json::array();
    for (const auto& t : p.terms()) terms.push_back({{"A", t.coefficient}, {"alpha", t.exponent}});
    return {{"kind", "PowerBasket"}, {"k", p.strike()}, {"terms", terms}};
}

inline Json to_json(const StoppingProblem& problem) {
    return {{"diffusion", to_json(problem.diffusion)},
            {"payoff", to_json(problem.payoff)},
            {"r", problem.rate}};
}

inline StoppingProblem problem_from_json(const Json& j) {
    try {
        StoppingProblem problem;
        const Json& d = j.at("diffusion");
        const std::string family = d.at("family").get<std::string>();
        if (family == "GBM") {
            problem.diffusion = DiffusionSpec::gbm(d.at("b").get<double>(), d.at("sigma").get<double>());
        } else if (family == "TabulatedCoefficients") {
            auto nodes = d.at("nodes").get<std::vector<double>>();
            const std::size_t n = nodes.size();
            problem.diffusion = DiffusionSpec::tabulated(
                {std::move(nodes), detail::node_array(d.at("b"), n, "b"),
                 detail::node_array(d.at("sigma"), n, "sigma")});
        } else {
            fail(ErrorCode::InvalidArgument, "unknown diffusion.family '" + family + "'");
        }

        const Json& p = j.at("payoff");
        const std::string kind = p.at("kind").get<std::string>();
        if (kind == "Call") {
            problem.payoff = Payoff::call(p.at("k").get<double>());
        } else if (kind == "PowerBasket") {
            std::vector<PowerTerm> terms;
            for (const auto& t : p.at("terms")) {
                if (t.is_array()) {
                    terms.push_back({t.at(0).get<double>(), t.at(1).get<double>()});
                } else {
                    terms.push_back({t.at("A").get<double>(), t.at("alpha").get<double>()});
                }
            }
            problem.payoff = Payoff::power_basket(std::move(terms), p.value("k", 0.0));
        } else {
            fail(ErrorCode::InvalidArgument, "unknown payoff.kind '" + kind + "'");
        }
        problem.rate = j.at("r").get<double>();
        return problem;
    } catch (const Json::exception& e) {
        fail(ErrorCode::InvalidArgument, std::string("malformed problem config: ") + e.what());
    }
}

inline Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Io, "cannot read '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        fail(ErrorCode::InvalidArgument, "'" + path + "' is not valid JSON: " + e.what());
    }
}

inline StoppingProblem load_problem(const std::string& path) {
    return problem_from_json(read_json_file(path));
}

} // namespace stoplab
