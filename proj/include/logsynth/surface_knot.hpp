#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "logsynth/common.hpp"
#include "logsynth/optim.hpp"

namespace logsynth {

/// Standard deviation of the depression Gaussian placing the difference-of-
/// Gaussians zero crossing exactly at radius r, given the width ratio
/// alpha = sigma_core / sigma and the core multiplier m.
inline double dog_sigma_from_radius(double r, double alpha, double m) {
    if (!(m > 1.0)) throw validation_error("surface knot: multiplier m must be > 1");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw validation_error("surface knot: axis multiplier must be in (0, 1)");
    if (!(r > 0.0)) throw validation_error("surface knot: radius must be > 0");
    return std::sqrt(r * r * (1.0 / (alpha * alpha) - 1.0) / (2.0 * std::log(m)));
}

/// Surface-knot bump: an elliptical difference of Gaussians. The elevated
/// core is the narrower Gaussian (width alpha * sigma per axis, multiplier m)
/// and the surrounding depression the wider one, so the kernel is m - 1 at
/// the center, crosses zero at the per-axis radius, and dips negative beyond
/// it. Footprint distances are arc-length millimeters.
struct SurfaceKnot {
    double theta = 0.0;      // center angle, rad
    double l = 0.0;          // center longitudinal position, mm
    double r_theta = 10.0;   // zero-crossing radius across the arc direction, mm
    double r_l = 10.0;       // zero-crossing radius along l, mm
    double alpha_theta = 0.5;  // core/depression width ratio per axis, (0, 1)
    double alpha_l = 0.5;
    double m = 2.0;          // core multiplier, > 1
    double amplitude = 1.0;  // imprint scale, mm
    bool degenerate = false;      // fitted against an (almost) empty patch
    bool low_confidence = false;  // fit did not converge

    void validate() const {
        if (!(m > 1.0)) throw validation_error("surface knot: multiplier m must be > 1");
        if (!(alpha_theta > 0.0 && alpha_theta < 1.0) || !(alpha_l > 0.0 && alpha_l < 1.0))
            throw validation_error("surface knot: axis multipliers must be in (0, 1)");
        if (!(r_theta > 0.0) || !(r_l > 0.0))
            throw validation_error("surface knot: radii must be > 0");
    }
};

/// Dimensionless kernel value at an offset from the center (arc-length mm);
/// the stored amplitude is applied where imprints are composed.
inline double surface_knot_imprint(const SurfaceKnot& k, double d_theta_arc, double d_l) {
    const double s1t = dog_sigma_from_radius(k.r_theta, k.alpha_theta, k.m);
    const double s1l = dog_sigma_from_radius(k.r_l, k.alpha_l, k.m);
    const double s2t = k.alpha_theta * s1t;
    const double s2l = k.alpha_l * s1l;
    const double qt = d_theta_arc * d_theta_arc;
    const double ql = d_l * d_l;
    const double core = std::exp(-0.5 * (qt / (s2t * s2t) + ql / (s2l * s2l)));
    const double surround = std::exp(-0.5 * (qt / (s1t * s1t) + ql / (s1l * s1l)));
    return k.m * core - surround;
}

struct SurfaceKnotFitResult {
    SurfaceKnot knot;
    double rmse = 0.0;
    bool converged = true;
};

/// Fits (alpha_theta, alpha_l, m, amplitude) of an imprint to a residual
/// patch. The radii come from the internal knot model and stay fixed. patch,
/// d_theta_arc and d_l are parallel arrays over the window cells.
inline SurfaceKnotFitResult fit_surface_knot(const Eigen::VectorXd& patch,
                                             const Eigen::VectorXd& d_theta_arc,
                                             const Eigen::VectorXd& d_l, double r_theta,
                                             double r_l, const LMOptions& lm = {}) {
    if (patch.size() == 0 || patch.size() != d_theta_arc.size() || patch.size() != d_l.size())
        throw std::invalid_argument("fit_surface_knot: inconsistent patch arrays");

    SurfaceKnotFitResult out;
    out.knot.r_theta = r_theta;
    out.knot.r_l = r_l;

    const double peak = patch.cwiseAbs().maxCoeff();
    if (peak < 1e-9) {
        out.knot.amplitude = 0.0;
        out.knot.degenerate = true;
        out.rmse = std::sqrt(patch.squaredNorm() / patch.size());
        return out;
    }

    const std::vector<ParamTransform> transforms = {
        ParamTransform::logit_box(0.02, 0.98),   // alpha_theta
        ParamTransform::logit_box(0.02, 0.98),   // alpha_l
        ParamTransform::logit_box(1.005, 30.0),  // m
        ParamTransform::identity(),              // amplitude, mm
    };
    const auto assemble = [&](const Eigen::VectorXd& p) {
        SurfaceKnot k = out.knot;
        k.alpha_theta = p[0];
        k.alpha_l = p[1];
        k.m = p[2];
        k.amplitude = p[3];
        return k;
    };
    const auto residual = [&](const Eigen::VectorXd& z) -> Eigen::VectorXd {
        const SurfaceKnot k = assemble(to_external(transforms, z));
        Eigen::VectorXd r(patch.size());
        for (Eigen::Index i = 0; i < patch.size(); ++i)
            r[i] = k.amplitude * surface_knot_imprint(k, d_theta_arc[i], d_l[i]) - patch[i];
        return r;
    };

    Eigen::VectorXd p0(4);
    p0 << 0.5, 0.5, 2.0, patch.maxCoeff();
    const auto [z_opt, report] = levenberg_marquardt(residual, to_internal(transforms, p0), lm);
    out.knot = assemble(to_external(transforms, z_opt));
    out.rmse = std::sqrt(report.final_cost / patch.size());
    out.converged = report.converged;
    out.knot.low_confidence = !report.converged;
    return out;
}

}  // namespace logsynth
