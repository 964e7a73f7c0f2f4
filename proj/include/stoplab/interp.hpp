#pragma once

// Shape-preserving (Fritsch-Carlson / PCHIP) cubic Hermite interpolation.

#include "stoplab/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace stoplab {

/// Cubic Hermite basis on t in [0, 1], derivative terms already scaled by the cell width.
struct HermiteWeights {
    double value_left;
    double slope_left;
    double value_right;
    double slope_right;
};

inline HermiteWeights hermite_weights(double t, double width) {
    const double t2 = t * t;
    const double t3 = t2 * t;
    return {2.0 * t3 - 3.0 * t2 + 1.0, (t3 - 2.0 * t2 + t) * width, -2.0 * t3 + 3.0 * t2,
            (t3 - t2) * width};
}

namespace detail {

inline double pchip_end_slope(double h0, double h1, double d0, double d1) {
    double slope = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (std::signbit(slope) != std::signbit(d0) || d0 == 0.0) {
        slope = 0.0;
    } else if (std::signbit(d0) != std::signbit(d1) && std::abs(slope) > 3.0 * std::abs(d0)) {
        slope = 3.0 * d0;
    }
    return slope;
}

} // namespace detail

/// Node slopes for PCHIP. Writes one slope per node into `slopes`.
inline void pchip_slopes(std::span<const double> x, std::span<const double> y,
                         std::span<double> slopes) {
    const std::size_t n = x.size();
    if (n == 2) {
        const double d = (y[1] - y[0]) / (x[1] - x[0]);
        slopes[0] = slopes[1] = d;
        return;
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double h0 = x[i] - x[i - 1];
        const double h1 = x[i + 1] - x[i];
        const double d0 = (y[i] - y[i - 1]) / h0;
        const double d1 = (y[i + 1] - y[i]) / h1;
        if (d0 * d1 <= 0.0) {
            slopes[i] = 0.0;
        } else {
            const double w0 = 2.0 * h1 + h0;
            const double w1 = h1 + 2.0 * h0;
            slopes[i] = (w0 + w1) / (w0 / d0 + w1 / d1);
        }
    }
    slopes[0] = detail::pchip_end_slope(x[1] - x[0], x[2] - x[1], (y[1] - y[0]) / (x[1] - x[0]),
                                        (y[2] - y[1]) / (x[2] - x[1]));
    slopes[n - 1] = detail::pchip_end_slope(
        x[n - 1] - x[n - 2], x[n - 2] - x[n - 3], (y[n - 1] - y[n - 2]) / (x[n - 1] - x[n - 2]),
        (y[n - 2] - y[n - 3]) / (x[n - 2] - x[n - 3]));
}

/// Same as pchip_slopes for nodes with constant spacing `dx`.
inline void pchip_slopes_uniform(double dx, std::span<const double> y, std::span<double> slopes) {
    const std::size_t n = y.size();
    if (n == 2) {
        slopes[0] = slopes[1] = (y[1] - y[0]) / dx;
        return;
    }
    const double inv = 1.0 / dx;
    double d_prev = (y[1] - y[0]) * inv;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double d_next = (y[i + 1] - y[i]) * inv;
        slopes[i] = (d_prev * d_next <= 0.0) ? 0.0 : 2.0 / (1.0 / d_prev + 1.0 / d_next);
        d_prev = d_next;
    }
    slopes[0] = detail::pchip_end_slope(dx, dx, (y[1] - y[0]) * inv, (y[2] - y[1]) * inv);
    slopes[n - 1] = detail::pchip_end_slope(dx, dx, (y[n - 1] - y[n - 2]) * inv,
                                            (y[n - 2] - y[n - 3]) * inv);
}

/// Monotone cubic interpolant over strictly increasing nodes.
class MonotoneCubic {
public:
    MonotoneCubic() = default;

    MonotoneCubic(std::vector<double> x, std::vector<double> y)
        : x_(std::move(x)), y_(std::move(y)), slopes_(x_.size()) {
        require(x_.size() >= 2 && x_.size() == y_.size(),
                "monotone cubic needs at least two nodes with matching values");
        for (std::size_t i = 1; i < x_.size(); ++i) {
            require(x_[i] > x_[i - 1], "interpolation nodes must be strictly increasing");
        }
        pchip_slopes(x_, y_, slopes_);
    }

    double lower() const { return x_.front(); }
    double upper() const { return x_.back(); }
    std::span<const double> nodes() const { return x_; }
    std::span<const double> values() const { return y_; }

    bool contains(double x) const { return x >= x_.front() && x <= x_.back(); }

    double operator()(double x) const {
        if (!contains(x)) fail(ErrorCode::OutOfDomain, "interpolation query outside node range");
        auto it = std::upper_bound(x_.begin(), x_.end(), x);
        std::size_t j = static_cast<std::size_t>(it - x_.begin());
        j = std::clamp<std::size_t>(j, 1, x_.size() - 1) - 1;
        return eval_cell(j, x);
    }

    /// First derivative of the interpolant.
    double derivative(double x) const {
        if (!contains(x)) fail(ErrorCode::OutOfDomain, "interpolation query outside node range");
        auto it = std::upper_bound(x_.begin(), x_.end(), x);
        std::size_t j = static_cast<std::size_t>(it - x_.begin());
        j = std::clamp<std::size_t>(j, 1, x_.size() - 1) - 1;
        const double w = x_[j + 1] - x_[j];
        const double t = (x - x_[j]) / w;
        const double t2 = t * t;
        return (6.0 * t2 - 6.0 * t) / w * y_[j] + (3.0 * t2 - 4.0 * t + 1.0) * slopes_[j] +
               (-6.0 * t2 + 6.0 * t) / w * y_[j + 1] + (3.0 * t2 - 2.0 * t) * slopes_[j + 1];
    }

private:
    double eval_cell(std::size_t j, double x) const {
        const double w = x_[j + 1] - x_[j];
        const auto hw = hermite_weights((x - x_[j]) / w, w);
        return hw.value_left * y_[j] + hw.slope_left * slopes_[j] + hw.value_right * y_[j + 1] +
               hw.slope_right * slopes_[j + 1];
    }

    std::vector<double> x_;
    std::vector<double> y_;
    std::vector<double> slopes_;
};

} // namespace stoplab
