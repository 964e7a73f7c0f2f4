#pragma once

// Diffusion models dS/S = b(S) dt + sigma(S) dB, payoffs, and stopping problems.

#include "stoplab/error.hpp"
#include "stoplab/interp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace stoplab {

struct Gbm {
    double drift = 0.0;
    double volatility = 0.0;
};

/// Coefficients sampled on increasing price nodes, interpolated by monotone cubics.
struct TabulatedCoefficients {
    std::vector<double> nodes;
    std::vector<double> drift;
    std::vector<double> volatility;
};

class DiffusionSpec {
public:
    DiffusionSpec() = default;

    static DiffusionSpec gbm(double drift, double volatility) {
        DiffusionSpec spec;
        spec.family_ = Gbm{drift, volatility};
        return spec;
    }

    static DiffusionSpec tabulated(TabulatedCoefficients table) {
        require(table.nodes.size() >= 2 && table.drift.size() == table.nodes.size() &&
                    table.volatility.size() == table.nodes.size(),
                "tabulated coefficients need >= 2 nodes and one drift/volatility per node");
        for (double x : table.nodes) {
            if (!(x > 0.0) || !std::isfinite(x)) {
                fail(ErrorCode::ValidationTabulation, "tabulation nodes must be finite and positive");
            }
        }
        for (std::size_t i = 0; i < table.nodes.size(); ++i) {
            if (!std::isfinite(table.drift[i]) || !std::isfinite(table.volatility[i])) {
                fail(ErrorCode::ValidationTabulation, "tabulated coefficients must be finite");
            }
        }
        DiffusionSpec spec;
        spec.drift_curve_ = MonotoneCubic(table.nodes, table.drift);
        spec.vol_curve_ = MonotoneCubic(table.nodes, table.volatility);
        spec.family_ = std::move(table);
        return spec;
    }

    /// Tabulation of GBM constants on the given nodes.
    static DiffusionSpec tabulated_from_gbm(double drift, double volatility,
                                            std::vector<double> nodes) {
        const std::size_t n = nodes.size();
        return tabulated({std::move(nodes), std::vector<double>(n, drift),
                          std::vector<double>(n, volatility)});
    }

    bool is_gbm() const { return std::holds_alternative<Gbm>(family_); }
    const Gbm& as_gbm() const { return std::get<Gbm>(family_); }
    const TabulatedCoefficients& as_tabulated() const {
        return std::get<TabulatedCoefficients>(family_);
    }

    /// State interval where coefficients are defined.
    double domain_lower() const {
        return is_gbm() ? 0.0 : as_tabulated().nodes.front();
    }
    double domain_upper() const {
        return is_gbm() ? std::numeric_limits<double>::infinity() : as_tabulated().nodes.back();
    }

    double drift(double x) const {
        if (is_gbm()) return as_gbm().drift;
        return drift_curve_(x);
    }

    double volatility(double x) const {
        if (is_gbm()) return as_gbm().volatility;
        return vol_curve_(x);
    }

    /// Smallest volatility over the family's parameters or tabulation nodes.
    double min_volatility() const {
        if (is_gbm()) return as_gbm().volatility;
        const auto& v = as_tabulated().volatility;
        return *std::min_element(v.begin(), v.end());
    }

private:
    std::variant<Gbm, TabulatedCoefficients> family_ = Gbm{};
    MonotoneCubic drift_curve_;
    MonotoneCubic vol_curve_;
};

struct PowerTerm {
    double coefficient;
    double exponent;
};

/// phi(x) = (x - k)^+ or (sum_i A_i x^alpha_i - k)^+.
class Payoff {
public:
    enum class Kind { Call, PowerBasket };

    static Payoff call(double strike) {
        require(std::isfinite(strike) && strike >= 0.0, "call strike must be finite and >= 0");
        Payoff p;
        p.kind_ = Kind::Call;
        p.floor_ = strike;
        p.terms_ = {{1.0, 1.0}};
        return p;
    }

    static Payoff power_basket(std::vector<PowerTerm> terms, double floor) {
        require(!terms.empty(), "power basket needs at least one term");
        for (const auto& t : terms) {
            require(t.coefficient > 0.0 && t.exponent > 0.0 && std::isfinite(t.coefficient) &&
                        std::isfinite(t.exponent),
                    "power basket terms need A_i > 0 and alpha_i > 0");
        }
        require(std::isfinite(floor) && floor >= 0.0, "power basket floor must be finite and >= 0");
        Payoff p;
        p.kind_ = Kind::PowerBasket;
        p.floor_ = floor;
        p.terms_ = std::move(terms);
        return p;
    }

    Kind kind() const { return kind_; }
    double strike() const { return floor_; }
    const std::vector<PowerTerm>& terms() const { return terms_; }

    /// Price where the inner function crosses the floor; 0 when the floor is 0.
    double kink() const {
        if (floor_ == 0.0) return 0.0;
        if (kind_ == Kind::Call) return floor_;
        double lo = 0.0;
        double hi = 1.0;
        while (inner(hi) < floor_) hi *= 2.0;
        for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            (inner(mid) < floor_ ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }

    double inner(double x) const {
        double s = 0.0;
        for (const auto& t : terms_) s += t.coefficient * std::pow(x, t.exponent);
        return s;
    }

    /// phi (order 0), phi' (order 1) or phi'' (order 2) at x > 0.
    double eval(double x, int order = 0) const {
        require(x > 0.0, "payoff evaluated at non-positive price");
        require(order >= 0 && order <= 2, "payoff derivative order must be 0, 1 or 2");
        const double excess = (kind_ == Kind::Call) ? x - floor_ : inner(x) - floor_;
        if (order == 0) return std::max(excess, 0.0);
        if (excess == 0.0 && floor_ > 0.0) {
            fail(ErrorCode::Nondifferentiable, "payoff derivative requested at the kink (nondifferentiable point)");
        }
        if (excess < 0.0) return 0.0;
        if (kind_ == Kind::Call) return order == 1 ? 1.0 : 0.0;
        double s = 0.0;
        for (const auto& t : terms_) {
            s += (order == 1) ? t.coefficient * t.exponent * std::pow(x, t.exponent - 1.0)
                              : t.coefficient * t.exponent * (t.exponent - 1.0) *
                                    std::pow(x, t.exponent - 2.0);
        }
        return s;
    }

private:
    Kind kind_ = Kind::Call;
    double floor_ = 0.0;
    std::vector<PowerTerm> terms_;
};

inline double payoff_eval(const Payoff& payoff, double x, int order) { return payoff.eval(x, order); }

struct StoppingProblem {
    DiffusionSpec diffusion;
    Payoff payoff;
    double rate = 0.0;
};

struct ValidationIssue {
    ErrorCode code;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> errors;
    std::vector<std::string> warnings;

    bool valid() const { return errors.empty(); }
};

inline ValidationReport validate_problem(const StoppingProblem& problem) {
    ValidationReport report;
    const auto& diff = problem.diffusion;

    if (!(diff.min_volatility() > 0.0)) {
        report.errors.push_back({ErrorCode::ValidationSigma, "sigma not bounded below by a positive constant"});
    }
    if (!(problem.rate > 0.0) || !std::isfinite(problem.rate)) {
        report.errors.push_back({ErrorCode::ValidationRate, "discount rate r must be positive"});
    }

    if (diff.is_gbm()) {
        const auto& g = diff.as_gbm();
        if (!std::isfinite(g.drift) || !std::isfinite(g.volatility)) {
            report.errors.push_back({ErrorCode::ValidationTabulation, "GBM coefficients must be finite"});
        }
        if (problem.payoff.kind() == Payoff::Kind::Call && !(problem.rate > g.drift)) {
            report.errors.push_back({ErrorCode::ValidationInfiniteValue,
                                     "value infinite or no optimal stopping time: GBM call needs r > b"});
        }
        if (problem.payoff.kind() == Payoff::Kind::PowerBasket) {
            for (const auto& t : problem.payoff.terms()) {
                const double growth = t.exponent * g.drift +
                                      0.5 * t.exponent * (t.exponent - 1.0) * g.volatility * g.volatility;
                if (!(problem.rate > growth)) {
                    report.warnings.push_back("discounted power term does not decay; value may be infinite");
                    break;
                }
            }
        }
    } else if (problem.payoff.kind() == Payoff::Kind::Call) {
        // Sufficient condition for threshold-type exercise regions: r >= sup (b + x b').
        const auto& tab = diff.as_tabulated();
        const std::size_t n = tab.nodes.size();
        double sup = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t lo = (i == 0) ? 0 : i - 1;
            const std::size_t hi = (i + 1 == n) ? n - 1 : i + 1;
            const double slope = (tab.drift[hi] - tab.drift[lo]) / (tab.nodes[hi] - tab.nodes[lo]);
            sup = std::max(sup, tab.drift[i] + tab.nodes[i] * slope);
        }
        if (problem.rate < sup) {
            report.warnings.push_back("r < max(b + x b') on the tabulation; threshold structure not guaranteed");
        }
    }
    return report;
}

/// Throws the first hard validation error, if any.
inline void require_valid(const StoppingProblem& problem) {
    const auto report = validate_problem(problem);
    if (!report.valid()) fail(report.errors.front().code, report.errors.front().message);
}

/// Exact lognormal step of a GBM: x exp((b - sigma^2/2) h + sigma sqrt(h) z).
inline double gbm_step_exact(double x, double h, double z, double drift, double volatility) {
    require(x > 0.0 && h > 0.0, "gbm step needs x > 0 and h > 0");
    return x * std::exp((drift - 0.5 * volatility * volatility) * h + volatility * std::sqrt(h) * z);
}

/// Positive root of (sigma^2/2) a^2 + (b - sigma^2/2) a - r = 0, i.e. with x^a solving L f = r f.
inline double gbm_exponent(double drift, double volatility, double rate) {
    const double s2 = volatility * volatility;
    const double shift = 0.5 - drift / s2;
    return shift + std::sqrt(shift * shift + 2.0 * rate / s2);
}

} // namespace stoplab
