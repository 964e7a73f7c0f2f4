// Acceptance run on the reference problem: GBM with b = 0, sigma = 1, call strike 1, r = 1.
// Prints one PASS/FAIL line per criterion and exits nonzero if any fails.

#include "stoplab/constants.hpp"
#include "stoplab/continuous.hpp"
#include "stoplab/discrete.hpp"
#include "stoplab/rates.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>

using namespace stoplab;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
    std::fflush(stdout);
    failures += !pass;
}

std::string fmt(const char* f, double a = 0, double b = 0, double c = 0, double d = 0, double e = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d, e);
    return buf;
}

template <class F>
double seconds(F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const StoppingProblem kReference{DiffusionSpec::gbm(0.0, 1.0), Payoff::call(1.0), 1.0};

SweepConfig sweep_config(unsigned workers) {
    SweepConfig cfg;
    cfg.x_ref = 1.0;
    cfg.workers = workers;
    cfg.discrete.iteration.workers = workers;
    return cfg;
}

} // namespace

int main() {
    // 1. Ladder constants.
    ConstantsConfig ccfg;
    ConstantsEstimate consts;
    const double t_consts = seconds([&] { consts = estimate_theta_gamma(ccfg); });
    report(1,
           consts.theta >= 0.579 && consts.theta <= 0.599 && consts.gamma >= 0.572 && consts.gamma <= 0.592 &&
               consts.theta_se <= 0.002 && consts.gamma_se <= 0.002 && t_consts <= 60.0,
           fmt("theta %.5f (se %.5f), gamma %.5f (se %.5f), %.1f s", consts.theta, consts.theta_se, consts.gamma,
               consts.gamma_se, t_consts));

    // 2. Occupation time and local time against the direct moments.
    {
        bool ok = true;
        std::string detail;
        for (double u : {0.0, 0.25, 0.5}) {
            const std::size_t n = 500000;
            const auto hm = estimate_H_M(u, n, ccfg.seed);
            const auto fine = estimate_fine_functionals(u, n, 64, ccfg.seed);
            const double dh = std::abs(fine.occupation.mean - hm.H.mean);
            const double dm = std::abs(fine.local_time.mean - hm.M.mean);
            const double bh = 3.0 * combined_se(fine.occupation.se, hm.H.se) + 0.02;
            const double bm = 3.0 * combined_se(fine.local_time.se, hm.M.se) + 0.02;
            ok = ok && dh <= bh && dm <= bm;
            detail += fmt("u=%.2f |dH| %.4f<=%.4f |dM| %.4f<=%.4f; ", u, dh, bh, dm, bm);
        }
        report(2, ok, detail);
    }

    // 3. Closed form.
    const auto cont = solve_continuous(kReference);
    {
        const double e = std::max({std::abs(cont.threshold - 2.0), std::abs(cont.A - 0.5),
                                   std::abs(value_at(cont, 1.0) - 0.25), std::abs(cont.closed_form().alpha - 2.0),
                                   std::abs(cont.closed_form().B - 0.25)});
        report(3, e <= 1e-12, fmt("x* %.15g, A %.15g, V(1) %.15g, max error %.2g", cont.threshold, cont.A,
                                  value_at(cont, 1.0), e));
    }

    // 4. General solver against the closed form.
    {
        OdeConfig ocfg;
        ocfg.x_lo = 0.05;
        const auto ode = solve_general(kReference, ocfg);
        double e = std::abs(ode.threshold - cont.threshold);
        for (double x : {0.5, 1.0, 1.5}) e = std::max(e, std::abs(value_at(ode, x) - value_at(cont, x)));
        const double res = std::max(ode.value_match_residual, ode.smooth_fit_residual);
        report(4, e <= 1e-6 && res <= 1e-6,
               fmt("max |V_ode - V| and |x*_ode - x*| %.2g, residuals %.2g", e, res));
    }

    // 5-8. Sweep over h = 0.04 ... 0.0025.
    SweepResult sweep;
    const double t_sweep = seconds([&] { sweep = run_sweep(kReference, sweep_config(1)); });
    const auto theory = theory_coefficients(cont, UniversalConstants::from_estimate(consts));
    const auto fitted = fit_rates(sweep.rows);
    const auto cmp = compare_report(fitted, theory);
    report(5, cmp.boundary.pass && t_sweep <= 120.0,
           fmt("c_boundary fitted %.5f vs theory %.5f (rel %.4f <= 0.10), sweep %.1f s", cmp.boundary.fitted,
               cmp.boundary.theory, cmp.boundary.rel_error, t_sweep));
    {
        bool negative = true;
        for (const auto& r : sweep.rows) negative = negative && r.rel_value_gap < 0.0;
        report(6, cmp.value.pass && negative,
               fmt("c_value fitted %.5f vs theory %.5f (rel %.4f <= 0.15), all gaps negative: %g",
                   cmp.value.fitted, cmp.value.theory, cmp.value.rel_error, negative));
    }
    {
        const auto& c = sweep.checks;
        report(7, c.ordering_holds(),
               fmt("phi - V^h %.2g, V^h - V %.2g, V^2h - V^h %.2g, x*^h - x* %.2g, eps %.2g", c.max_below_payoff,
                   c.max_above_continuous, c.max_refinement_excess, c.max_threshold_excess, c.eps_sol));
    }
    {
        bool ok = true;
        for (const auto& s : sweep.solutions) ok = ok && exercise_structure(s).upper_interval;
        report(8, ok, fmt("exercise set is an upper interval for all %g step sizes",
                          static_cast<double>(sweep.solutions.size())));
    }

    // 9. Fractional parts of hitting times.
    UniformityDiagnostic unif;
    {
        unif = diagnose_fractional_uniformity(kReference, {});
        report(9, unif.ks <= 0.02 && !unif.out_of_regime,
               fmt("KS %.5f <= 0.02 (reference KS %.5f, %g hits)", unif.ks, unif.reference_ks,
                   static_cast<double>(unif.hits)));
    }

    // 10. Worker count does not change results.
    {
        ConstantsConfig c4 = ccfg;
        c4.workers = 4;
        const auto consts4 = estimate_theta_gamma(c4);
        const auto sweep4 = run_sweep(kReference, sweep_config(4));
        bool same = consts4.theta == consts.theta && consts4.gamma == consts.gamma &&
                    consts4.theta_se == consts.theta_se && consts4.gamma_se == consts.gamma_se;
        for (std::size_t i = 0; i < sweep.rows.size(); ++i) {
            same = same && sweep4.rows[i].threshold_h == sweep.rows[i].threshold_h &&
                   sweep4.rows[i].value_h == sweep.rows[i].value_h &&
                   sweep4.solutions[i].value == sweep.solutions[i].value;
        }
        UniformityConfig u4;
        u4.workers = 4;
        same = same && diagnose_fractional_uniformity(kReference, u4).ks == unif.ks;
        report(10, same, "constants, sweep and uniformity bit-identical with 1 and 4 workers");
    }

    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
