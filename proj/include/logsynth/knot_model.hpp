#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "logsynth/common.hpp"
#include "logsynth/heightmap.hpp"
#include "logsynth/logcentric.hpp"

namespace logsynth {

/// The nine scalars describing a single knot: origin (s0, l0), ovality gamma,
/// the axis-curve triple (rho_max, phi0, phi1) and the radius-curve triple
/// (r_max, psi0, psi1). phi/psi are bounded shape ratios in (0, 1]: *1 is the
/// endpoint incline as a fraction of the chord slope, *0 maps to the
/// exponential rate as 2/phi0 so every admissible curve is concave.
struct KnotParams {
    double s0 = 0.0;
    double l0 = 0.0;
    double gamma = 1.0;
    double rho_max = 100.0;
    double phi0 = 1.0;
    double phi1 = 1.0;
    double r_max = 10.0;
    double psi0 = 1.0;
    double psi1 = 1.0;

    void validate() const {
        auto check = [](bool ok, const char* what) {
            if (!ok) throw validation_error(std::string("knot parameters: ") + what);
        };
        check(std::isfinite(s0) && std::isfinite(l0), "non-finite origin");
        check(gamma > 0.0, "gamma must be > 0");
        check(rho_max > 0.0, "rho_max must be > 0");
        check(r_max > 0.0, "r_max must be > 0");
        check(phi0 > 0.0 && phi0 <= 1.0, "phi0 must be in (0, 1]");
        check(phi1 > 0.0 && phi1 <= 1.0, "phi1 must be in (0, 1]");
        check(psi0 > 0.0 && psi0 <= 1.0, "psi0 must be in (0, 1]");
        check(psi1 > 0.0 && psi1 <= 1.0, "psi1 must be in (0, 1]");
    }
};

/// Knot with the derived coefficients resolved: the vertical model
/// l(rho) = alpha_l (1 - exp(-E_l rho / max(0, rho_max - rho))) + L_l rho and
/// the radius model r(c) of the same form over the axis arc length c.
/// delta_l is the longitudinal rise magnitude; l_sign applies it downward for
/// knots growing toward the butt end.
struct ResolvedKnot {
    KnotParams params;
    double delta_l = 0.0;
    double c_max = 0.0;
    double alpha_l = 0.0;
    double L_l = 0.0;
    double E_l = 2.0;
    double alpha_r = 0.0;
    double L_r = 0.0;
    double E_r = 2.0;
    int l_sign = 1;
};

namespace detail {

inline double growth_curve(double x, double x_max, double alpha, double lin, double expo) {
    if (x >= x_max) return alpha + lin * x;
    return alpha * (1.0 - std::exp(-expo * x / (x_max - x))) + lin * x;
}

inline double growth_slope(double x, double x_max, double alpha, double lin, double expo) {
    if (x >= x_max) return lin;
    const double denom = x_max - x;
    const double g = expo * x / denom;
    const double gp = expo * x_max / (denom * denom);
    const double e = std::exp(-g);
    return (e == 0.0) ? lin : alpha * e * gp + lin;
}

}  // namespace detail

inline double knot_axis(const ResolvedKnot& k, double rho) {
    return detail::growth_curve(rho, k.params.rho_max, k.alpha_l, k.L_l, k.E_l);
}

inline double knot_axis_slope(const ResolvedKnot& k, double rho) {
    return detail::growth_slope(rho, k.params.rho_max, k.alpha_l, k.L_l, k.E_l);
}

inline double knot_radius(const ResolvedKnot& k, double c) {
    return detail::growth_curve(c, k.c_max, k.alpha_r, k.L_r, k.E_r);
}

namespace detail {

/// Composite 3-point Gauss-Legendre arc length of the axis curve over one
/// rho interval, subdivided to keep the error well below a micron.
inline double axis_segment_arc(const ResolvedKnot& k, double a, double b, int slices = 4) {
    static constexpr double gn[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
    static constexpr double gw[3] = {0.5555555555555556, 0.8888888888888888,
                                     0.5555555555555556};
    double total = 0.0;
    for (int s = 0; s < slices; ++s) {
        const double sa = a + (b - a) * s / slices;
        const double sb = a + (b - a) * (s + 1) / slices;
        const double mid = 0.5 * (sa + sb), half = 0.5 * (sb - sa);
        double seg = 0.0;
        for (int q = 0; q < 3; ++q) {
            const double m = knot_axis_slope(k, mid + half * gn[q]);
            seg += gw[q] * std::sqrt(1.0 + m * m);
        }
        total += seg * half;
    }
    return total;
}

}  // namespace detail

/// Arc length of the axis curve from 0 to rho by adaptive Simpson quadrature
/// (relative tolerance 1e-6). Always >= rho.
inline double arc_length(const ResolvedKnot& k, double rho) {
    if (rho <= 0.0) return 0.0;
    const auto f = [&k](double t) {
        const double m = knot_axis_slope(k, t);
        return std::sqrt(1.0 + m * m);
    };
    struct Simpson {
        const decltype(f)& fn;
        int evals = 0;
        double run(double a, double b, double fa, double fm, double fb, double whole, double tol,
                   int depth) {
            const double m = 0.5 * (a + b);
            const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
            const double flm = fn(lm), frm = fn(rm);
            evals += 2;
            if (evals > 200000) throw numeric_error("arc_length: quadrature did not converge");
            const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            const double delta = left + right - whole;
            if (depth <= 0) {
                if (std::abs(delta) > 15.0 * tol)
                    throw numeric_error("arc_length: quadrature did not converge");
                return left + right + delta / 15.0;
            }
            if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
            return run(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
                   run(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
        }
    };
    const double fa = f(0.0), fb = f(rho), fm = f(0.5 * rho);
    const double whole = rho / 6.0 * (fa + 4.0 * fm + fb);
    Simpson s{f};
    const double tol = 1e-6 * std::max(std::abs(whole), rho);
    return s.run(0.0, rho, fa, fm, fb, whole, tol, 48);
}

/// Resolves the bounded ratios into the growth-curve coefficients. delta_l
/// may be signed; its magnitude shapes the axis and its sign is kept as the
/// longitudinal direction flag.
inline ResolvedKnot resolve_knot(const KnotParams& p, double delta_l) {
    p.validate();
    if (!std::isfinite(delta_l)) throw validation_error("resolve_knot: non-finite delta_l");

    ResolvedKnot k;
    k.params = p;
    k.l_sign = (delta_l < 0.0) ? -1 : 1;
    k.delta_l = std::abs(delta_l);

    k.L_l = p.phi1 * k.delta_l / p.rho_max;
    k.alpha_l = k.delta_l * (1.0 - p.phi1);
    k.E_l = 2.0 / p.phi0;

    k.c_max = arc_length(k, p.rho_max);

    k.L_r = p.psi1 * p.r_max / k.c_max;
    k.alpha_r = p.r_max * (1.0 - p.psi1);
    k.E_r = 2.0 / p.psi0;
    return k;
}

/// Rise of a knot from (theta0, l0) to the surface: fixed-point iteration of
/// delta = rho(theta0, l0 + delta) * tan(tau). Returns the signed rise and the
/// surface radius at the intersection.
struct SurfaceRise {
    double delta_l = 0.0;
    double rho_max = 0.0;
};

inline SurfaceRise surface_rise(const Heightmap& h, double theta0, double l0, double tau,
                                int max_iterations = 10, double tolerance = 0.1) {
    const double tan_tau = std::tan(tau);
    double delta = 0.0;
    double rho;
    try {
        rho = heightmap_sample(h, theta0, l0);
    } catch (const std::domain_error&) {
        throw validation_error("surface_rise: knot origin outside the heightmap domain");
    }
    for (int iter = 0; iter < max_iterations; ++iter) {
        const double next = rho * tan_tau;
        if (l0 + next < h.l_min || l0 + next > h.l_max)
            throw validation_error("surface_rise: knot exits the heightmap domain (too close to a log end)");
        rho = heightmap_sample(h, theta0, l0 + next);
        if (std::abs(next - delta) < tolerance) {
            delta = next;
            break;
        }
        delta = next;
    }
    return {delta, rho};
}

/// Shell samples of the knot body in the knot frame: ellipse cross-sections
/// perpendicular to the axis curve, horizontal semi-axis K_r(c) and vertical
/// semi-axis gamma * K_r(c).
inline std::vector<KnotFramePoint> knot_body_frame_points(const ResolvedKnot& k, int samples_axis,
                                                          int samples_angle) {
    if (samples_axis < 4 || samples_angle < 4)
        throw std::invalid_argument("knot_body_frame_points: sample counts must be >= 4");

    // cumulative arc table over the stations (Gauss per interval; reused by K_r)
    std::vector<KnotFramePoint> out;
    out.reserve(static_cast<size_t>(samples_axis) * samples_angle);
    double c_acc = 0.0;
    double rho_prev = 0.0;
    for (int i = 0; i < samples_axis; ++i) {
        const double rho = k.params.rho_max * i / (samples_axis - 1);
        if (i > 0) c_acc += detail::axis_segment_arc(k, rho_prev, rho);
        rho_prev = rho;

        const double axis_l = knot_axis(k, rho);
        const double slope = knot_axis_slope(k, rho);
        const double w = std::sqrt(1.0 + slope * slope);
        const double radius = knot_radius(k, c_acc);
        for (int a = 0; a < samples_angle; ++a) {
            const double psi = kTwoPi * a / samples_angle;
            const double horis = radius * std::cos(psi);
            const double vert = k.params.gamma * radius * std::sin(psi);
            KnotFramePoint q;
            q.s = k.params.s0 + horis;
            // vertical direction tilts with the axis tangent: (0, 1, -slope)/w
            q.l = k.params.l0 + k.l_sign * (axis_l + vert / w);
            q.rho = rho + vert * (-slope) / w;
            out.push_back(q);
        }
    }
    return out;
}

/// Converts a knot-frame point back through the arc-length chart:
/// theta = theta_mean + s / rho. Near the pith the chart degenerates, so the
/// angular offset is clamped to half a turn.
inline LogCentricPoint knot_frame_to_log_centric(const KnotFramePoint& q, double theta_mean) {
    LogCentricPoint p;
    p.l = q.l;
    p.rho = std::max(q.rho, 0.0);
    double dtheta = (p.rho > 1e-9) ? q.s / p.rho : 0.0;
    dtheta = std::clamp(dtheta, -kPi, kPi);
    p.theta = normalize_angle(theta_mean + dtheta);
    return p;
}

inline std::vector<LogCentricPoint> knot_body_points(const ResolvedKnot& k, double theta_mean,
                                                     int samples_axis, int samples_angle) {
    const auto frame_points = knot_body_frame_points(k, samples_axis, samples_angle);
    std::vector<LogCentricPoint> out;
    out.reserve(frame_points.size());
    for (const auto& q : frame_points) out.push_back(knot_frame_to_log_centric(q, theta_mean));
    return out;
}

/// Precomputed axis stations for fast point-to-shell distances. Used by the
/// knot fit residual and by shell containment checks.
class KnotShellEvaluator {
public:
    explicit KnotShellEvaluator(const ResolvedKnot& k, int stations = 96) : knot_(k) {
        stations = std::max(stations, 8);
        rho_.resize(static_cast<size_t>(stations));
        axis_l_.resize(rho_.size());
        arc_.resize(rho_.size());
        double c_acc = 0.0;
        for (size_t i = 0; i < rho_.size(); ++i) {
            const double rho = k.params.rho_max * static_cast<double>(i) /
                               static_cast<double>(rho_.size() - 1);
            if (i > 0) c_acc += detail::axis_segment_arc(knot_, rho_[i - 1], rho, 2);
            rho_[i] = rho;
            arc_[i] = c_acc;
            axis_l_[i] = k.params.l0 + k.l_sign * knot_axis(k, rho);
        }
    }

    const ResolvedKnot& knot() const { return knot_; }

    /// Signed distance from a knot-frame point to the knot shell: distance to
    /// the axis curve minus the local ellipse radius along the point's
    /// direction. Negative inside the shell.
    double shell_distance(const KnotFramePoint& q) const {
        size_t best = 0;
        double best_d = station_dist2(q, 0);
        for (size_t i = 1; i < rho_.size(); ++i) {
            const double d = station_dist2(q, i);
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        // parabolic/golden refinement between the neighbors of the best station
        const double lo = rho_[best > 0 ? best - 1 : 0];
        const double hi = rho_[std::min(best + 1, rho_.size() - 1)];
        double a = lo, b = hi;
        const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
        double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
        double f1 = point_dist2(q, c1), f2 = point_dist2(q, c2);
        for (int it = 0; it < 40 && (b - a) > 1e-7 * knot_.params.rho_max; ++it) {
            if (f1 < f2) {
                b = c2; c2 = c1; f2 = f1;
                c1 = b - gr * (b - a);
                f1 = point_dist2(q, c1);
            } else {
                a = c1; c1 = c2; f1 = f2;
                c2 = a + gr * (b - a);
                f2 = point_dist2(q, c2);
            }
        }
        const double rho_star = 0.5 * (a + b);
        return signed_residual(q, rho_star);
    }

private:
    double arc_at(double rho) const {
        const double step = knot_.params.rho_max / static_cast<double>(rho_.size() - 1);
        const double fi = std::clamp(rho / step, 0.0, static_cast<double>(rho_.size() - 1));
        const size_t i = std::min(static_cast<size_t>(fi), rho_.size() - 2);
        const double frac = fi - static_cast<double>(i);
        return arc_[i] + frac * (arc_[i + 1] - arc_[i]);
    }

    double station_dist2(const KnotFramePoint& q, size_t i) const {
        const double ds = q.s - knot_.params.s0;
        const double dl = q.l - axis_l_[i];
        const double dr = q.rho - rho_[i];
        return ds * ds + dl * dl + dr * dr;
    }

    double point_dist2(const KnotFramePoint& q, double rho) const {
        const double ds = q.s - knot_.params.s0;
        const double dl = q.l - (knot_.params.l0 + knot_.l_sign * knot_axis(knot_, rho));
        const double dr = q.rho - rho;
        return ds * ds + dl * dl + dr * dr;
    }

    double signed_residual(const KnotFramePoint& q, double rho_star) const {
        const double slope = knot_.l_sign * knot_axis_slope(knot_, rho_star);
        const double w = std::sqrt(1.0 + slope * slope);
        const double axis_l = knot_.params.l0 + knot_.l_sign * knot_axis(knot_, rho_star);
        const double ds = q.s - knot_.params.s0;
        const double dl = q.l - axis_l;
        const double dr = q.rho - rho_star;
        // in-plane components: e1 = s-direction, e2 = (0, 1, -slope)/w
        const double du = ds;
        const double dv = (dl - slope * dr) / w;
        const double dt = (dl * slope + dr) / w;  // along the axis tangent
        const double dist = std::sqrt(du * du + dv * dv + dt * dt);

        const double r_h = knot_radius(knot_, arc_at(rho_star));
        const double r_v = knot_.params.gamma * r_h;
        double r_dir = r_h;
        const double plane = std::sqrt(du * du + dv * dv);
        if (plane > 1e-12 && r_h > 0.0) {
            const double cosx = du / plane, sinx = dv / plane;
            r_dir = (r_h * r_v) / std::sqrt(r_v * r_v * cosx * cosx + r_h * r_h * sinx * sinx);
        }
        return dist - r_dir;
    }

    ResolvedKnot knot_;
    std::vector<double> rho_;
    std::vector<double> axis_l_;
    std::vector<double> arc_;
};

}  // namespace logsynth
