#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "logsynth/chebyshev.hpp"
#include "logsynth/common.hpp"
#include "logsynth/heightmap.hpp"
#include "logsynth/optim.hpp"

namespace logsynth {

/// Low-frequency surface band: each heightmap row is projected on the first
/// n_fourier harmonics (DC plus paired sin/cos), and each harmonic's evolution
/// along l is a Chebyshev series with m_cheb coefficients. One stored
/// "coefficient" is such a pair, so the default 10x10 setup carries 100.
struct BaseShape {
    int n_fourier = 10;
    int m_cheb = 10;
    Eigen::MatrixXd coeffs_cos;  // m_cheb x n_fourier, column k = harmonic k
    Eigen::MatrixXd coeffs_sin;  // m_cheb x n_fourier, column 0 unused (zero)
    double l_min = 0.0;
    double l_max = 1.0;

    double dc_at(double l) const {
        const double t = chebyshev_map(l, l_min, l_max);
        return chebyshev_eval(coeffs_cos.col(0), t, 0);
    }
};

inline double eval_base_shape(const BaseShape& bs, double theta, double l) {
    const double t = chebyshev_map(l, bs.l_min, bs.l_max);
    const double th = normalize_angle(theta);
    double value = chebyshev_eval(bs.coeffs_cos.col(0), t, 0);
    for (int k = 1; k < bs.n_fourier; ++k) {
        const double ak = chebyshev_eval(bs.coeffs_cos.col(k), t, 0);
        const double bk = chebyshev_eval(bs.coeffs_sin.col(k), t, 0);
        value += ak * std::cos(k * th) + bk * std::sin(k * th);
    }
    return value;
}

/// Per-row Fourier projection followed by per-harmonic Chebyshev least
/// squares. Exact for surfaces inside the truncated basis.
inline BaseShape fit_base_shape(const Heightmap& h, int n_fourier = 10, int m_cheb = 10) {
    if (n_fourier < 1 || m_cheb < 1)
        throw std::invalid_argument("fit_base_shape: coefficient counts must be >= 1");
    if (n_fourier > h.n_theta / 2)
        throw std::invalid_argument("fit_base_shape: n_fourier exceeds n_theta/2");
    if (m_cheb > h.n_l) throw std::invalid_argument("fit_base_shape: m_cheb exceeds n_l");

    int bad_rows = 0;
    for (int i = 0; i < h.n_l; ++i) {
        int masked = 0;
        for (int j = 0; j < h.n_theta; ++j)
            if (!h.mask(i, j)) ++masked;
        if (2 * masked > h.n_theta) ++bad_rows;
    }
    if (2 * bad_rows > h.n_l)
        throw validation_error("fit_base_shape: more than half the rows are mostly unobserved");

    // row-wise truncated Fourier projection at the cell-center angles
    Eigen::MatrixXd row_cos(h.n_l, n_fourier), row_sin(h.n_l, n_fourier);
    row_sin.setZero();
    const double dth = h.cell_theta();
    for (int i = 0; i < h.n_l; ++i) {
        for (int k = 0; k < n_fourier; ++k) {
            double ac = 0.0, as = 0.0;
            for (int j = 0; j < h.n_theta; ++j) {
                const double ang = k * (j + 0.5) * dth;
                ac += h.values(i, j) * std::cos(ang);
                as += h.values(i, j) * std::sin(ang);
            }
            const double scale = (k == 0 ? 1.0 : 2.0) / h.n_theta;
            row_cos(i, k) = ac * scale;
            if (k > 0) row_sin(i, k) = as * scale;
        }
    }

    // Chebyshev least squares along l for every harmonic
    std::vector<double> ts(static_cast<size_t>(h.n_l));
    for (int i = 0; i < h.n_l; ++i)
        ts[static_cast<size_t>(i)] = chebyshev_map(h.l_center(i), h.l_min, h.l_max);
    const Eigen::MatrixXd design = chebyshev_design(ts, m_cheb, 0);

    BaseShape bs;
    bs.n_fourier = n_fourier;
    bs.m_cheb = m_cheb;
    bs.l_min = h.l_min;
    bs.l_max = h.l_max;
    bs.coeffs_cos.resize(m_cheb, n_fourier);
    bs.coeffs_sin.setZero(m_cheb, n_fourier);
    for (int k = 0; k < n_fourier; ++k) {
        bs.coeffs_cos.col(k) = linear_least_squares(design, row_cos.col(k));
        if (k > 0) bs.coeffs_sin.col(k) = linear_least_squares(design, row_sin.col(k));
    }
    return bs;
}

}  // namespace logsynth
