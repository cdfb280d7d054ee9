#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>

#include "logsynth/common.hpp"

namespace logsynth {

/// Sparse Gabor convolution noise for the high-frequency grain band. The
/// frequency vector points along the arc direction, so ridges run
/// longitudinally. Octaves double the frequency and scale by persistence;
/// the summed field is rescaled so its standard deviation equals amplitude.
struct GrainConfig {
    int octaves = 4;
    double base_frequency = 0.15;   // cycles per mm across the arc direction
    double kernel_bandwidth = 4.0;  // Gaussian envelope width, mm
    double impulse_density = 0.05;  // impulses per mm^2
    double amplitude = 0.6;         // target field standard deviation, mm
    double persistence = 0.5;       // per-octave relative amplitude
    std::uint64_t seed = 0;

    void validate() const {
        if (octaves < 1) throw validation_error("grain: octaves must be >= 1");
        if (!(persistence > 0.0 && persistence <= 1.0))
            throw validation_error("grain: persistence must be in (0, 1]");
        if (amplitude < 0.0) throw validation_error("grain: amplitude must be >= 0");
        if (!(kernel_bandwidth > 0.0)) throw validation_error("grain: bandwidth must be > 0");
        if (!(base_frequency > 0.0)) throw validation_error("grain: frequency must be > 0");
        if (impulse_density < 0.0) throw validation_error("grain: density must be >= 0");
    }
};

namespace detail {

inline std::uint64_t grain_cell_seed(std::uint64_t seed, int octave, long cx, long cy) {
    std::uint64_t s = seed;
    s ^= 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(octave + 1);
    s ^= 0xc2b2ae3d27d4eb4fULL * static_cast<std::uint64_t>(cx + 0x10000);
    s ^= 0x165667b19e3779f9ULL * static_cast<std::uint64_t>(cy + 0x10000);
    return splitmix64(s);
}

inline double grain_uniform(std::uint64_t& state) {
    return static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
}

inline int grain_poisson(std::uint64_t& state, double mean) {
    const double g = std::exp(-mean);
    int count = 0;
    double t = grain_uniform(state);
    while (t > g && count < 4096) {
        ++count;
        t *= grain_uniform(state);
    }
    return count;
}

}  // namespace detail

/// Evaluates the grain field at the cell centers of an (n_theta x n_l) grid
/// whose arc width is 2*pi*reference_radius. Cyclic across the theta seam:
/// impulse cells wrap, so the left and right edges join seamlessly.
inline Eigen::MatrixXd gabor_grain(int n_theta, int n_l, double l_min, double l_max,
                                   double reference_radius, const GrainConfig& cfg) {
    cfg.validate();
    if (n_theta < 1 || n_l < 1 || !(l_max > l_min) || !(reference_radius > 0.0))
        throw std::invalid_argument("gabor_grain: invalid grid");

    Eigen::MatrixXd field = Eigen::MatrixXd::Zero(n_l, n_theta);
    if (cfg.amplitude == 0.0 || cfg.impulse_density == 0.0) return field;

    const double width = kTwoPi * reference_radius;  // arc circumference, mm
    const double height = l_max - l_min;
    const double cell_x_mm = width / n_theta;
    const double cell_y_mm = height / n_l;

    for (int octave = 0; octave < cfg.octaves; ++octave) {
        const double freq = cfg.base_frequency * std::pow(2.0, octave);
        const double bw = cfg.kernel_bandwidth / std::pow(2.0, octave);
        const double rel_amp = std::pow(cfg.persistence, octave);
        const double radius = 3.0 * bw;
        const long cells_x = std::max<long>(1, std::lround(width / radius));
        const long cells_y = std::max<long>(1, std::lround(height / radius));
        const double cw = width / static_cast<double>(cells_x);  // exact cyclic tiling
        const double ch = height / static_cast<double>(cells_y);
        const double lambda = cfg.impulse_density * cw * ch;

        for (int i = 0; i < n_l; ++i) {
            const double py = (i + 0.5) * cell_y_mm;
            const long cy = static_cast<long>(py / ch);
            for (int j = 0; j < n_theta; ++j) {
                const double px = (j + 0.5) * cell_x_mm;
                const long cx = static_cast<long>(px / cw);
                double sum = 0.0;
                for (long dj = -1; dj <= 1; ++dj) {
                    const long ny = cy + dj;
                    if (ny < -1 || ny > cells_y) continue;
                    for (long di = -1; di <= 1; ++di) {
                        const long nx_raw = cx + di;
                        const long nx = ((nx_raw % cells_x) + cells_x) % cells_x;
                        std::uint64_t state = detail::grain_cell_seed(cfg.seed, octave, nx, ny);
                        const int impulses = detail::grain_poisson(state, lambda);
                        const double ox = static_cast<double>(nx_raw) * cw;
                        const double oy = static_cast<double>(ny) * ch;
                        for (int imp = 0; imp < impulses; ++imp) {
                            const double ix = ox + cw * detail::grain_uniform(state);
                            const double iy = oy + ch * detail::grain_uniform(state);
                            const double w = 2.0 * detail::grain_uniform(state) - 1.0;
                            const double dx = px - ix;
                            const double dy = py - iy;
                            const double d2 = dx * dx + dy * dy;
                            if (d2 > radius * radius) continue;
                            const double envelope = std::exp(-d2 / (2.0 * bw * bw));
                            const double wave = std::cos(kTwoPi * freq * dx);
                            sum += w * envelope * wave;
                        }
                    }
                }
                field(i, j) += rel_amp * sum;
            }
        }
    }

    const double mean = field.mean();
    const double sd = std::sqrt((field.array() - mean).square().mean());
    if (sd > 0.0) field *= cfg.amplitude / sd;
    return field;
}

}  // namespace logsynth
