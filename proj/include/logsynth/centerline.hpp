#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "logsynth/chebyshev.hpp"
#include "logsynth/common.hpp"
#include "logsynth/optim.hpp"

namespace logsynth {

struct CartesianPoint {
    double x = 0.0;  // longitudinal scanner axis, mm
    double y = 0.0;
    double z = 0.0;
};

/// Log centerline as two Chebyshev series y(x), z(x) on [x_min, x_max].
/// The constant term is omitted (the curve is stored mean-centered); the mean
/// removed during fitting is kept as metadata so Cartesian geometry stays
/// exact for off-axis clouds.
struct Centerline {
    int n = 0;  // coefficients per axis, degrees 1..n
    Eigen::VectorXd coeffs_y;
    Eigen::VectorXd coeffs_z;
    double x_min = 0.0;
    double x_max = 1.0;
    double mean_y = 0.0;
    double mean_z = 0.0;

    static Centerline straight(double x_min, double x_max, int n = 5) {
        Centerline c;
        c.n = n;
        c.coeffs_y = Eigen::VectorXd::Zero(n);
        c.coeffs_z = Eigen::VectorXd::Zero(n);
        c.x_min = x_min;
        c.x_max = x_max;
        return c;
    }

    double domain_length() const { return x_max - x_min; }
};

struct CenterlineFitOptions {
    double slice_width = 10.0;         // mm
    double extrapolation_margin = 0.05;  // fraction of the domain allowed beyond the ends
};

inline void check_centerline_domain(const Centerline& c, double x, double margin_fraction) {
    const double margin = margin_fraction * c.domain_length();
    if (x < c.x_min - margin || x > c.x_max + margin)
        throw std::domain_error("centerline: x outside domain");
}

/// (y, z) at x. Mean offset plus the centered Chebyshev series.
inline std::pair<double, double> evaluate_centerline(const Centerline& c, double x,
                                                     double margin_fraction = 0.05) {
    check_centerline_domain(c, x, margin_fraction);
    const double t = chebyshev_map(x, c.x_min, c.x_max);
    const double y = c.mean_y + (c.n > 0 ? chebyshev_eval(c.coeffs_y, t, 1) : 0.0);
    const double z = c.mean_z + (c.n > 0 ? chebyshev_eval(c.coeffs_z, t, 1) : 0.0);
    return {y, z};
}

/// d(y,z)/dx at x by the derivative recurrence (central difference of the
/// series would lose accuracy near the ends).
inline std::pair<double, double> centerline_derivative(const Centerline& c, double x) {
    // T_k'(t) = k * U_{k-1}(t); evaluate the U-series directly.
    const double t = chebyshev_map(x, c.x_min, c.x_max);
    const double dt_dx = 2.0 / c.domain_length();
    double u_prev = 1.0;  // U_0
    double u_cur = 2.0 * t;  // U_1
    double dy = 0.0, dz = 0.0;
    for (int i = 0; i < c.n; ++i) {
        const int k = i + 1;  // degree of T
        double u;  // U_{k-1}
        if (k == 1) {
            u = 1.0;
        } else if (k == 2) {
            u = 2.0 * t;
        } else {
            const double u_next = 2.0 * t * u_cur - u_prev;
            u_prev = u_cur;
            u_cur = u_next;
            u = u_cur;
        }
        dy += c.coeffs_y[i] * k * u;
        dz += c.coeffs_z[i] * k * u;
    }
    return {dy * dt_dx, dz * dt_dx};
}

/// Slice the cloud along x, take per-slice centroids, center them, and fit the
/// Chebyshev series per axis by linear least squares.
inline Centerline fit_centerline(const std::vector<CartesianPoint>& points, int n = 5,
                                 const CenterlineFitOptions& opts = {}) {
    if (n < 1) throw std::invalid_argument("fit_centerline: n must be >= 1");
    if (points.empty()) throw std::invalid_argument("fit_centerline: no points");

    double x_min = points[0].x, x_max = points[0].x;
    for (const auto& p : points) {
        x_min = std::min(x_min, p.x);
        x_max = std::max(x_max, p.x);
    }
    if (!(x_max > x_min)) throw std::invalid_argument("fit_centerline: degenerate x range");

    const int n_slices = std::max(1, static_cast<int>(std::ceil((x_max - x_min) / opts.slice_width)));
    struct Slice {
        double sum_x = 0.0, sum_y = 0.0, sum_z = 0.0;
        long count = 0;
    };
    std::vector<Slice> slices(static_cast<size_t>(n_slices));
    const double width = (x_max - x_min) / n_slices;
    for (const auto& p : points) {
        int idx = static_cast<int>((p.x - x_min) / width);
        idx = std::clamp(idx, 0, n_slices - 1);
        auto& s = slices[static_cast<size_t>(idx)];
        s.sum_x += p.x;
        s.sum_y += p.y;
        s.sum_z += p.z;
        s.count += 1;
    }

    // per-slice centroids, each paired with its own mean x
    std::vector<double> ts;
    std::vector<double> cy, cz;
    for (const auto& s : slices) {
        if (s.count == 0) continue;
        ts.push_back(chebyshev_map(s.sum_x / s.count, x_min, x_max));
        cy.push_back(s.sum_y / s.count);
        cz.push_back(s.sum_z / s.count);
    }
    if (static_cast<int>(ts.size()) < n + 1)
        throw validation_error("fit_centerline: fewer than n+1 valid slices");

    // centroids weighted equally, then mean-centered
    double mean_y = 0.0, mean_z = 0.0;
    for (size_t i = 0; i < ts.size(); ++i) {
        mean_y += cy[i];
        mean_z += cz[i];
    }
    mean_y /= static_cast<double>(ts.size());
    mean_z /= static_cast<double>(ts.size());

    Eigen::VectorXd ty(static_cast<Eigen::Index>(ts.size())), tz(static_cast<Eigen::Index>(ts.size()));
    for (size_t i = 0; i < ts.size(); ++i) {
        ty[static_cast<Eigen::Index>(i)] = cy[i] - mean_y;
        tz[static_cast<Eigen::Index>(i)] = cz[i] - mean_z;
    }
    // regress with the constant included to avoid centering bias, then fold
    // the fitted constant back into the stored mean; the serialized series
    // stays constant-free.
    const Eigen::MatrixXd design = chebyshev_design(ts, n + 1, 0);
    const Eigen::VectorXd sol_y = linear_least_squares(design, ty);
    const Eigen::VectorXd sol_z = linear_least_squares(design, tz);

    Centerline c;
    c.n = n;
    c.coeffs_y = sol_y.tail(n);
    c.coeffs_z = sol_z.tail(n);
    c.x_min = x_min;
    c.x_max = x_max;
    c.mean_y = mean_y + sol_y[0];
    c.mean_z = mean_z + sol_z[0];
    return c;
}

}  // namespace logsynth
