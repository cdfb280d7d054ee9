#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "logsynth/centerline.hpp"
#include "logsynth/common.hpp"

namespace logsynth {

struct LogCentricPoint {
    double theta = 0.0;  // angle around the centerline, [0, 2pi)
    double l = 0.0;      // arc position along the centerline, mm
    double rho = 0.0;    // distance from the centerline, mm
};

struct KnotFramePoint {
    double s = 0.0;    // arc-length coordinate (theta - theta_mean) * rho, mm
    double l = 0.0;    // longitudinal, mm
    double rho = 0.0;  // radial, mm
};

/// Precomputed geometry for one centerline: cumulative arc length and a
/// rotation-minimizing frame transported along the curve (seeded by global +z
/// at the start), so theta is measured without twist. Stations cover the
/// domain plus the extrapolation margin; queries between stations take one
/// exact double-reflection step from the nearest station.
class CenterlineFrame {
public:
    explicit CenterlineFrame(const Centerline& c, double margin_fraction = 0.05,
                             double station_spacing = 2.0)
        : centerline_(c), margin_(margin_fraction * c.domain_length()) {
        x_lo_ = c.x_min - margin_;
        x_hi_ = c.x_max + margin_;
        const int count = std::max(16, static_cast<int>(std::ceil((x_hi_ - x_lo_) / station_spacing)));
        step_ = (x_hi_ - x_lo_) / count;

        xs_.resize(static_cast<size_t>(count) + 1);
        arcs_.resize(xs_.size());
        us_.resize(xs_.size());
        tangents_.resize(xs_.size());

        for (size_t i = 0; i < xs_.size(); ++i) xs_[i] = x_lo_ + static_cast<double>(i) * step_;

        tangents_[0] = tangent_at(xs_[0]);
        us_[0] = seed_normal(tangents_[0]);
        for (size_t i = 1; i < xs_.size(); ++i) {
            tangents_[i] = tangent_at(xs_[i]);
            us_[i] = double_reflect(position(xs_[i - 1]), tangents_[i - 1], us_[i - 1],
                                    position(xs_[i]), tangents_[i]);
        }

        // arc length measured from x_min, Gauss-Legendre per station interval
        arcs_[0] = -segment_arc(x_lo_, centerline_.x_min);
        for (size_t i = 1; i < xs_.size(); ++i)
            arcs_[i] = arcs_[i - 1] + segment_arc(xs_[i - 1], xs_[i]);
    }

    const Centerline& centerline() const { return centerline_; }
    double x_lo() const { return x_lo_; }
    double x_hi() const { return x_hi_; }
    double arc_min() const { return arcs_.front(); }
    double arc_max() const { return arcs_.back(); }

    Eigen::Vector3d position(double x) const {
        auto [y, z] = evaluate_point(x);
        return {x, y, z};
    }

    Eigen::Vector3d tangent_at(double x) const {
        auto [dy, dz] = centerline_derivative(centerline_, x);
        return Eigen::Vector3d(1.0, dy, dz).normalized();
    }

    double speed(double x) const {
        auto [dy, dz] = centerline_derivative(centerline_, x);
        return std::sqrt(1.0 + dy * dy + dz * dz);
    }

    /// Twist-free normal-plane basis (u, v) plus tangent at x.
    void frame_at(double x, Eigen::Vector3d& t, Eigen::Vector3d& u, Eigen::Vector3d& v) const {
        const size_t i = station_index(x);
        t = tangent_at(x);
        u = double_reflect(position(xs_[i]), tangents_[i], us_[i], position(x), t);
        v = t.cross(u);
    }

    double arc_length_at(double x) const {
        const size_t i = station_index(x);
        return arcs_[i] + segment_arc(xs_[i], x);
    }

    /// Inverse of arc_length_at (monotone), Newton with table bracketing.
    double x_from_arc(double l) const {
        if (l < arcs_.front() - 1e-9 || l > arcs_.back() + 1e-9)
            throw std::domain_error("centerline: arc position outside domain");
        const auto it = std::upper_bound(arcs_.begin(), arcs_.end(), l);
        size_t i = static_cast<size_t>(std::distance(arcs_.begin(), it));
        i = std::min(std::max<size_t>(i, 1), arcs_.size() - 1) - 1;
        double x = xs_[i] + (l - arcs_[i]) / speed(xs_[i]);
        for (int iter = 0; iter < 50; ++iter) {
            const double f = arcs_[i] + segment_arc(xs_[i], x) - l;
            const double dx = f / speed(x);
            x -= dx;
            x = std::clamp(x, x_lo_, x_hi_);
            if (std::abs(dx) < 1e-12) break;
        }
        return x;
    }

    /// Nearest-point parameter on the curve, clamped to the extended domain.
    double project(const Eigen::Vector3d& p) const {
        double x = std::clamp(p.x(), x_lo_, x_hi_);
        bool converged = false;
        for (int iter = 0; iter < 60; ++iter) {
            const Eigen::Vector3d d = p - position(x);
            const Eigen::Vector3d tg = tangent_unnormalized(x);
            const double g = d.dot(tg);
            const double h = 1e-4 * std::max(1.0, std::abs(x));
            const Eigen::Vector3d tg2 = tangent_unnormalized(x + h);
            const Eigen::Vector3d d2 = p - position(x + h);
            const double gp = (d2.dot(tg2) - g) / h;
            if (std::abs(gp) < 1e-300) break;
            double x_new = x - g / gp;
            x_new = std::clamp(x_new, x_lo_, x_hi_);
            if (std::abs(x_new - x) < 1e-12 * std::max(1.0, std::abs(x))) {
                x = x_new;
                converged = true;
                break;
            }
            x = x_new;
        }
        if (!converged) {
            // fall back to a coarse scan plus golden-section refinement
            double best_x = x_lo_, best_d = (p - position(x_lo_)).squaredNorm();
            const int scan = 512;
            for (int i = 1; i <= scan; ++i) {
                const double xc = x_lo_ + (x_hi_ - x_lo_) * i / scan;
                const double dist = (p - position(xc)).squaredNorm();
                if (dist < best_d) {
                    best_d = dist;
                    best_x = xc;
                }
            }
            double a = std::max(x_lo_, best_x - (x_hi_ - x_lo_) / scan);
            double b = std::min(x_hi_, best_x + (x_hi_ - x_lo_) / scan);
            const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
            double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
            double f1 = (p - position(c1)).squaredNorm(), f2 = (p - position(c2)).squaredNorm();
            while (b - a > 1e-12 * std::max(1.0, std::abs(b))) {
                if (f1 < f2) {
                    b = c2; c2 = c1; f2 = f1;
                    c1 = b - gr * (b - a);
                    f1 = (p - position(c1)).squaredNorm();
                } else {
                    a = c1; c1 = c2; f1 = f2;
                    c2 = a + gr * (b - a);
                    f2 = (p - position(c2)).squaredNorm();
                }
            }
            x = 0.5 * (a + b);
        }
        return x;
    }

private:
    std::pair<double, double> evaluate_point(double x) const {
        const double t = chebyshev_map(x, centerline_.x_min, centerline_.x_max);
        const double y = centerline_.mean_y +
                         (centerline_.n > 0 ? chebyshev_eval(centerline_.coeffs_y, t, 1) : 0.0);
        const double z = centerline_.mean_z +
                         (centerline_.n > 0 ? chebyshev_eval(centerline_.coeffs_z, t, 1) : 0.0);
        return {y, z};
    }

    Eigen::Vector3d tangent_unnormalized(double x) const {
        auto [dy, dz] = centerline_derivative(centerline_, x);
        return {1.0, dy, dz};
    }

    size_t station_index(double x) const {
        const double fi = (x - x_lo_) / step_;
        const long i = std::lround(std::floor(fi));
        return static_cast<size_t>(std::clamp<long>(i, 0, static_cast<long>(xs_.size()) - 1));
    }

    static Eigen::Vector3d seed_normal(const Eigen::Vector3d& t) {
        Eigen::Vector3d ref = Eigen::Vector3d::UnitZ();
        if (std::abs(t.dot(ref)) > 0.9) ref = Eigen::Vector3d::UnitY();
        return (ref - t.dot(ref) * t).normalized();
    }

    static Eigen::Vector3d double_reflect(const Eigen::Vector3d& p0, const Eigen::Vector3d& t0,
                                          const Eigen::Vector3d& u0, const Eigen::Vector3d& p1,
                                          const Eigen::Vector3d& t1) {
        const Eigen::Vector3d d1 = p1 - p0;
        const double c1 = d1.squaredNorm();
        if (c1 < 1e-300) return (u0 - t1.dot(u0) * t1).normalized();
        const Eigen::Vector3d u_l = u0 - (2.0 / c1) * d1.dot(u0) * d1;
        const Eigen::Vector3d t_l = t0 - (2.0 / c1) * d1.dot(t0) * d1;
        const Eigen::Vector3d d2 = t1 - t_l;
        const double c2 = d2.squaredNorm();
        Eigen::Vector3d u1 = (c2 < 1e-300) ? u_l : (u_l - (2.0 / c2) * d2.dot(u_l) * d2).eval();
        u1 = (u1 - t1.dot(u1) * t1).normalized();
        return u1;
    }

    /// 5-point Gauss-Legendre arc length of one x interval (speed is smooth).
    double segment_arc(double a, double b) const {
        static constexpr double nodes[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                            0.5384693101056831, 0.9061798459386640};
        static constexpr double weights[5] = {0.2369268850561891, 0.4786286704993665,
                                              0.5688888888888889, 0.4786286704993665,
                                              0.2369268850561891};
        const double mid = 0.5 * (a + b);
        const double half = 0.5 * (b - a);
        double sum = 0.0;
        for (int i = 0; i < 5; ++i) sum += weights[i] * speed(mid + half * nodes[i]);
        return sum * half;
    }

    Centerline centerline_;
    double margin_;
    double x_lo_ = 0.0, x_hi_ = 0.0, step_ = 1.0;
    std::vector<double> xs_;
    std::vector<double> arcs_;
    std::vector<Eigen::Vector3d> us_;
    std::vector<Eigen::Vector3d> tangents_;
};

/// Cartesian -> (theta, l, rho) around the frame's centerline. A point on the
/// centerline maps to theta = 0, rho = 0.
inline LogCentricPoint to_log_centric(const CartesianPoint& p, const CenterlineFrame& frame) {
    if (p.x < frame.x_lo() || p.x > frame.x_hi())
        throw std::domain_error("to_log_centric: point beyond centerline domain margin");
    const Eigen::Vector3d q(p.x, p.y, p.z);
    const double x = frame.project(q);
    Eigen::Vector3d t, u, v;
    frame.frame_at(x, t, u, v);
    const Eigen::Vector3d offset = q - frame.position(x);
    const Eigen::Vector3d normal_part = offset - offset.dot(t) * t;

    LogCentricPoint out;
    out.l = frame.arc_length_at(x);
    out.rho = normal_part.norm();
    out.theta = (out.rho > 0.0) ? normalize_angle(std::atan2(normal_part.dot(v), normal_part.dot(u)))
                                : 0.0;
    return out;
}

inline CartesianPoint from_log_centric(const LogCentricPoint& q, const CenterlineFrame& frame) {
    if (q.rho < 0.0) throw std::invalid_argument("from_log_centric: negative rho");
    const double x = frame.x_from_arc(q.l);
    Eigen::Vector3d t, u, v;
    frame.frame_at(x, t, u, v);
    const Eigen::Vector3d p =
        frame.position(x) + q.rho * (std::cos(q.theta) * u + std::sin(q.theta) * v);
    return {p.x(), p.y(), p.z()};
}

/// Unwraps angles so the largest angular gap straddles the cut, then returns
/// the unwrapped angles in the same order. Input angles may be any real.
inline std::vector<double> unwrap_angles(const std::vector<double>& thetas) {
    if (thetas.empty()) return {};
    std::vector<double> norm(thetas.size());
    for (size_t i = 0; i < thetas.size(); ++i) norm[i] = normalize_angle(thetas[i]);
    std::vector<double> sorted = norm;
    std::sort(sorted.begin(), sorted.end());

    // largest gap between consecutive sorted angles (cyclically)
    double best_gap = kTwoPi - sorted.back() + sorted.front();
    double cut = sorted.back();  // angles <= cut stay, i.e. cut sits inside the wrap gap
    for (size_t i = 0; i + 1 < sorted.size(); ++i) {
        const double gap = sorted[i + 1] - sorted[i];
        if (gap > best_gap) {
            best_gap = gap;
            cut = sorted[i];
        }
    }
    for (auto& a : norm)
        if (a > cut + 1e-15) a -= kTwoPi;
    return norm;
}

/// Knot-frame conversion: s = (theta - theta_mean) * rho with the mean taken
/// over unwrapped angles. Returns the frame points and theta_mean in [0, 2pi).
inline std::pair<std::vector<KnotFramePoint>, double> to_knot_frame(
    const std::vector<LogCentricPoint>& points) {
    if (points.empty()) throw std::invalid_argument("to_knot_frame: empty input");
    std::vector<double> thetas(points.size());
    for (size_t i = 0; i < points.size(); ++i) thetas[i] = points[i].theta;
    const std::vector<double> unwrapped = unwrap_angles(thetas);

    double mean = 0.0;
    for (double a : unwrapped) mean += a;
    mean /= static_cast<double>(unwrapped.size());

    std::vector<KnotFramePoint> out(points.size());
    for (size_t i = 0; i < points.size(); ++i) {
        out[i].s = (unwrapped[i] - mean) * points[i].rho;
        out[i].l = points[i].l;
        out[i].rho = points[i].rho;
    }
    return {out, normalize_angle(mean)};
}

}  // namespace logsynth
