#pragma once

#include <cmath>
#include <vector>

#include "logsynth/base_shape.hpp"
#include "logsynth/common.hpp"
#include "logsynth/grain.hpp"
#include "logsynth/heightmap.hpp"
#include "logsynth/surface_knot.hpp"
#include "logsynth/thickness.hpp"

namespace logsynth {

struct ComposeOptions {
    /// Replace the base shape's DC band with the thickness profile (model
    /// generation); fitted models keep their fitted DC band.
    const ThicknessModel* thickness_dc = nullptr;
    bool include_grain = true;
    /// Imprints are truncated at this many depression widths from the center.
    double knot_cutoff_sigmas = 3.0;
};

/// Base band + surface-knot imprints + grain on an (n_theta x n_l) grid.
/// Throws if any resulting cell is nonpositive.
inline Heightmap compose_heightmap(const BaseShape& bs, const std::vector<SurfaceKnot>& knots,
                                   const GrainConfig& grain, int n_theta, int n_l,
                                   const ComposeOptions& opts = {}) {
    if (n_theta < 8 || n_l < 8)
        throw std::invalid_argument("compose_heightmap: grid sizes must be >= 8");

    Heightmap h;
    h.n_theta = n_theta;
    h.n_l = n_l;
    h.l_min = bs.l_min;
    h.l_max = bs.l_max;
    h.values.resize(n_l, n_theta);
    h.mask.setOnes(n_l, n_theta);

    for (int i = 0; i < n_l; ++i) {
        const double l = h.l_center(i);
        const double dc_swap =
            opts.thickness_dc ? eval_thickness(*opts.thickness_dc, l) - bs.dc_at(l) : 0.0;
        for (int j = 0; j < n_theta; ++j)
            h.values(i, j) = eval_base_shape(bs, h.theta_center(j), l) + dc_swap;
    }

    for (const auto& k : knots) {
        k.validate();
        // footprint in arc millimeters, scaled by the base radius at the center
        double rho_c = eval_base_shape(bs, k.theta, k.l);
        if (opts.thickness_dc) rho_c += eval_thickness(*opts.thickness_dc, k.l) - bs.dc_at(k.l);
        if (!(rho_c > 0.0)) throw validation_error("compose_heightmap: knot center below the pith");

        const double s1t = dog_sigma_from_radius(k.r_theta, k.alpha_theta, k.m);
        const double s1l = dog_sigma_from_radius(k.r_l, k.alpha_l, k.m);
        const double cut = opts.knot_cutoff_sigmas;
        for (int i = 0; i < n_l; ++i) {
            const double dl = h.l_center(i) - k.l;
            if (std::abs(dl) > cut * s1l) continue;
            for (int j = 0; j < n_theta; ++j) {
                const double darc = wrap_angle_diff(h.theta_center(j), k.theta) * rho_c;
                const double e = (darc / s1t) * (darc / s1t) + (dl / s1l) * (dl / s1l);
                if (e > cut * cut) continue;
                h.values(i, j) += k.amplitude * surface_knot_imprint(k, darc, dl);
            }
        }
    }

    if (opts.include_grain && grain.amplitude > 0.0) {
        const double rho_ref = h.values.mean();
        if (!(rho_ref > 0.0)) throw validation_error("compose_heightmap: nonpositive mean radius");
        h.values += gabor_grain(n_theta, n_l, h.l_min, h.l_max, rho_ref, grain);
    }

    for (int i = 0; i < n_l; ++i)
        for (int j = 0; j < n_theta; ++j)
            if (!(h.values(i, j) > 0.0))
                throw validation_error("compose_heightmap: nonphysical surface (cell <= 0)");
    return h;
}

}  // namespace logsynth
