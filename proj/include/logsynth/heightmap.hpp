#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "logsynth/common.hpp"
#include "logsynth/logcentric.hpp"

namespace logsynth {

/// Cyclic grid of surface radius rho over (theta, l). Rows index l, columns
/// index theta; column 0 is adjacent to column n_theta-1. mask(i,j) is 1 for
/// cells holding observed data and 0 for cells filled by interpolation.
struct Heightmap {
    int n_theta = 0;
    int n_l = 0;
    double l_min = 0.0;
    double l_max = 0.0;
    Eigen::MatrixXd values;                             // n_l x n_theta, mm
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> mask;

    double cell_theta() const { return kTwoPi / n_theta; }
    double cell_l() const { return (l_max - l_min) / n_l; }
    double theta_center(int j) const { return (j + 0.5) * cell_theta(); }
    double l_center(int i) const { return l_min + (i + 0.5) * cell_l(); }

    double mean_radius() const { return values.mean(); }

    void validate() const {
        if (n_theta < 1 || n_l < 1) throw validation_error("heightmap: empty grid");
        if (!(l_max > l_min)) throw validation_error("heightmap: empty l-domain");
        if (values.rows() != n_l || values.cols() != n_theta)
            throw validation_error("heightmap: value shape mismatch");
        for (int i = 0; i < n_l; ++i)
            for (int j = 0; j < n_theta; ++j)
                if (!(values(i, j) > 0.0))
                    throw validation_error("heightmap: nonpositive surface radius at row " +
                                           std::to_string(i) + ", col " + std::to_string(j));
    }
};

/// Median-binned heightmap. Empty cells are filled by iterative neighbor
/// averaging (cyclic in theta) and flagged in the mask.
inline Heightmap build_heightmap(const std::vector<LogCentricPoint>& points, int n_theta, int n_l,
                                 double l_min, double l_max) {
    if (n_theta < 8 || n_l < 8) throw std::invalid_argument("build_heightmap: grid sizes must be >= 8");
    if (!(l_max > l_min)) throw std::invalid_argument("build_heightmap: empty l-domain");

    Heightmap h;
    h.n_theta = n_theta;
    h.n_l = n_l;
    h.l_min = l_min;
    h.l_max = l_max;
    h.values = Eigen::MatrixXd::Zero(n_l, n_theta);
    h.mask.setZero(n_l, n_theta);

    std::vector<std::vector<double>> bins(static_cast<size_t>(n_l) * n_theta);
    const double dth = h.cell_theta();
    const double dl = h.cell_l();
    for (const auto& p : points) {
        if (p.l < l_min || p.l > l_max) continue;
        const int i = std::clamp(static_cast<int>((p.l - l_min) / dl), 0, n_l - 1);
        const int j = std::clamp(static_cast<int>(normalize_angle(p.theta) / dth), 0, n_theta - 1);
        bins[static_cast<size_t>(i) * n_theta + static_cast<size_t>(j)].push_back(p.rho);
    }

    long filled = 0;
    double observed_sum = 0.0;
    for (int i = 0; i < n_l; ++i) {
        for (int j = 0; j < n_theta; ++j) {
            auto& b = bins[static_cast<size_t>(i) * n_theta + static_cast<size_t>(j)];
            if (b.empty()) continue;
            const size_t mid = b.size() / 2;
            std::nth_element(b.begin(), b.begin() + static_cast<long>(mid), b.end());
            double med = b[mid];
            if (b.size() % 2 == 0) {
                const double lower = *std::max_element(b.begin(), b.begin() + static_cast<long>(mid));
                med = 0.5 * (med + lower);
            }
            h.values(i, j) = med;
            h.mask(i, j) = 1;
            observed_sum += med;
            ++filled;
        }
    }
    if (filled == 0) throw validation_error("build_heightmap: all cells empty");

    // fill unobserved cells by Jacobi relaxation toward their neighbors
    const double init = observed_sum / static_cast<double>(filled);
    for (int i = 0; i < n_l; ++i)
        for (int j = 0; j < n_theta; ++j)
            if (!h.mask(i, j)) h.values(i, j) = init;

    if (filled < static_cast<long>(n_l) * n_theta) {
        Eigen::MatrixXd next = h.values;
        for (int iter = 0; iter < 50000; ++iter) {
            double max_delta = 0.0;
            for (int i = 0; i < n_l; ++i) {
                for (int j = 0; j < n_theta; ++j) {
                    if (h.mask(i, j)) continue;
                    double sum = 0.0;
                    int count = 0;
                    const int jl = (j + n_theta - 1) % n_theta;
                    const int jr = (j + 1) % n_theta;
                    sum += h.values(i, jl) + h.values(i, jr);
                    count += 2;
                    if (i > 0) { sum += h.values(i - 1, j); ++count; }
                    if (i + 1 < n_l) { sum += h.values(i + 1, j); ++count; }
                    const double v = sum / count;
                    max_delta = std::max(max_delta, std::abs(v - h.values(i, j)));
                    next(i, j) = v;
                }
            }
            h.values.swap(next);
            next = h.values;
            if (max_delta < 1e-6) break;
        }
    }
    return h;
}

/// Bilinear interpolation, cyclic in theta, clamped to cell centers at the
/// l edges. l must lie within [l_min, l_max].
inline double heightmap_sample(const Heightmap& h, double theta, double l) {
    if (l < h.l_min - 1e-9 || l > h.l_max + 1e-9)
        throw std::domain_error("heightmap_sample: l outside domain");

    const double u_raw = normalize_angle(theta) / h.cell_theta() - 0.5;
    const double u = (u_raw < 0.0) ? u_raw + h.n_theta : u_raw;
    const int j0 = std::min(static_cast<int>(u), h.n_theta - 1);
    const int j1 = (j0 + 1) % h.n_theta;
    const double fu = u - j0;

    double v = (l - h.l_min) / h.cell_l() - 0.5;
    v = std::clamp(v, 0.0, static_cast<double>(h.n_l - 1));
    const int i0 = std::min(static_cast<int>(v), h.n_l - 1);
    const int i1 = std::min(i0 + 1, h.n_l - 1);
    const double fv = v - i0;

    return (1.0 - fv) * ((1.0 - fu) * h.values(i0, j0) + fu * h.values(i0, j1)) +
           fv * ((1.0 - fu) * h.values(i1, j0) + fu * h.values(i1, j1));
}

/// 3x3 median filter, cyclic in theta, clamped in l.
inline Eigen::MatrixXd median_filter3(const Eigen::MatrixXd& grid) {
    const int rows = static_cast<int>(grid.rows());
    const int cols = static_cast<int>(grid.cols());
    Eigen::MatrixXd out(rows, cols);
    std::array<double, 9> window{};
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            int count = 0;
            for (int di = -1; di <= 1; ++di) {
                const int ii = i + di;
                if (ii < 0 || ii >= rows) continue;
                for (int dj = -1; dj <= 1; ++dj) {
                    const int jj = (j + dj + cols) % cols;
                    window[static_cast<size_t>(count++)] = grid(ii, jj);
                }
            }
            auto mid = window.begin() + count / 2;
            std::nth_element(window.begin(), mid, window.begin() + count);
            double med = *mid;
            if (count % 2 == 0) {
                const double lower = *std::max_element(window.begin(), mid);
                med = 0.5 * (med + lower);
            }
            out(i, j) = med;
        }
    }
    return out;
}

}  // namespace logsynth
