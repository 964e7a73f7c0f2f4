#pragma once

#include "stoplab/error.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <vector>

namespace stoplab {

/// Gauss-Hermite rule for E[g(Z)], Z ~ N(0, 1): sum_q weights[q] g(nodes[q]).
struct GaussHermite {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Golub-Welsch on the probabilists' Hermite recurrence (Jacobi matrix with
/// off-diagonal sqrt(k)); nodes are refined by Newton steps on He_n.
inline GaussHermite gauss_hermite(int order) {
    require(order >= 1 && order <= 400, "Gauss-Hermite order must be in [1, 400]");
    const int n = order;
    GaussHermite rule;
    if (n == 1) {
        rule.nodes = {0.0};
        rule.weights = {1.0};
        return rule;
    }
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd sub(n - 1);
    for (int k = 1; k < n; ++k) sub[k - 1] = std::sqrt(static_cast<double>(k));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    if (solver.info() != Eigen::Success) fail(ErrorCode::NoConvergence, "Gauss-Hermite eigen solve failed");

    rule.nodes.resize(n);
    rule.weights.resize(n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        double x = solver.eigenvalues()[i];
        // Newton polish on the normalized recurrence p_k = (x p_{k-1} - sqrt(k-1) p_{k-2}) / sqrt(k).
        for (int it = 0; it < 3; ++it) {
            double p0 = 1.0, p1 = x, d0 = 0.0, d1 = 1.0;
            for (int k = 2; k <= n; ++k) {
                const double sk = std::sqrt(static_cast<double>(k));
                const double skm = std::sqrt(static_cast<double>(k - 1));
                const double p2 = (x * p1 - skm * p0) / sk;
                const double d2 = (p1 + x * d1 - skm * d0) / sk;
                p0 = p1; p1 = p2; d0 = d1; d1 = d2;
            }
            if (d1 == 0.0) break;
            x -= p1 / d1;
        }
        rule.nodes[i] = x;
        const double v = solver.eigenvectors()(0, i);
        rule.weights[i] = v * v;
        total += rule.weights[i];
    }
    for (double& w : rule.weights) w /= total;
    return rule;
}

} // namespace stoplab
