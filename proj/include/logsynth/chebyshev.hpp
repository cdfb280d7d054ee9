#pragma once

#include <Eigen/Dense>
#include <vector>

namespace logsynth {

/// Maps x in [x_min, x_max] to the Chebyshev domain [-1, 1].
inline double chebyshev_map(double x, double x_min, double x_max) {
    return 2.0 * (x - x_min) / (x_max - x_min) - 1.0;
}

/// Sum of coeffs[i] * T_{first_degree + i}(t).
inline double chebyshev_eval(const Eigen::VectorXd& coeffs, double t, int first_degree = 0) {
    double t_prev = 1.0;  // T_0
    double t_cur = t;     // T_1
    int degree = 0;
    double sum = 0.0;
    auto term = [&](int k) -> double {
        if (k == 0) return 1.0;
        if (k == 1) return t;
        return t_cur;
    };
    for (int i = 0; i < coeffs.size(); ++i) {
        const int k = first_degree + i;
        while (degree < k) {
            if (degree >= 1) {
                const double t_next = 2.0 * t * t_cur - t_prev;
                t_prev = t_cur;
                t_cur = t_next;
            }
            ++degree;
        }
        sum += coeffs[i] * term(k);
    }
    return sum;
}

/// Design matrix with columns T_{first_degree} .. T_{first_degree+count-1}
/// evaluated at the given mapped-domain points.
inline Eigen::MatrixXd chebyshev_design(const std::vector<double>& ts, int count,
                                        int first_degree = 0) {
    Eigen::MatrixXd design(static_cast<Eigen::Index>(ts.size()), count);
    for (size_t row = 0; row < ts.size(); ++row) {
        const double t = ts[row];
        double t_prev = 1.0;
        double t_cur = t;
        for (int k = 0; k < first_degree + count; ++k) {
            double value;
            if (k == 0) {
                value = 1.0;
            } else if (k == 1) {
                value = t;
            } else {
                const double t_next = 2.0 * t * t_cur - t_prev;
                t_prev = t_cur;
                t_cur = t_next;
                value = t_cur;
            }
            if (k >= first_degree) design(static_cast<Eigen::Index>(row), k - first_degree) = value;
        }
    }
    return design;
}

}  // namespace logsynth
