#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "logsynth/knot_model.hpp"

using namespace logsynth;

namespace {

KnotParams random_valid_params(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    KnotParams p;
    p.s0 = -20.0 + 40.0 * u(rng);
    p.l0 = 500.0 + 1000.0 * u(rng);
    p.gamma = 0.5 + 1.5 * u(rng);
    p.rho_max = 50.0 + 150.0 * u(rng);
    p.phi0 = 0.05 + 0.95 * u(rng);
    p.phi1 = 0.05 + 0.95 * u(rng);
    p.r_max = 5.0 + 35.0 * u(rng);
    p.psi0 = 0.05 + 0.95 * u(rng);
    p.psi1 = 0.05 + 0.95 * u(rng);
    return p;
}

Heightmap constant_heightmap(double rho, double l_min = 0.0, double l_max = 1000.0) {
    Heightmap h;
    h.n_theta = 32;
    h.n_l = 32;
    h.l_min = l_min;
    h.l_max = l_max;
    h.values = Eigen::MatrixXd::Constant(32, 32, rho);
    h.mask.setOnes(32, 32);
    return h;
}

}  // namespace

TEST_CASE("resolve: phi1 = 1 degenerates the axis to a straight line") {
    KnotParams p;
    p.rho_max = 100.0;
    p.phi1 = 1.0;
    const ResolvedKnot k = resolve_knot(p, 50.0);
    REQUIRE(k.alpha_l == 0.0);
    REQUIRE(std::abs(k.L_l - 0.5) < 1e-15);
    for (double rho : {10.0, 50.0, 90.0})
        REQUIRE(std::abs(knot_axis(k, rho) - k.L_l * rho) < 1e-12);
}

TEST_CASE("resolve: direct coefficient substitution") {
    KnotParams p;
    p.rho_max = 100.0;
    p.phi1 = 0.4;
    const ResolvedKnot k = resolve_knot(p, 50.0);
    REQUIRE(std::abs(k.L_l - 0.2) < 1e-15);
    REQUIRE(std::abs(k.alpha_l - 30.0) < 1e-12);
    // identity alpha_l = delta_l - L_l * rho_max
    REQUIRE(std::abs(k.alpha_l - (k.delta_l - k.L_l * p.rho_max)) < 1e-12);
}

TEST_CASE("resolve: phi0 = 1 is the flattest admissible exponential") {
    KnotParams p;
    p.phi0 = 1.0;
    const ResolvedKnot k = resolve_knot(p, 30.0);
    REQUIRE(k.E_l == 2.0);
}

TEST_CASE("resolve rejects invalid parameters") {
    KnotParams p;
    p.phi0 = 0.0;
    REQUIRE_THROWS_AS(resolve_knot(p, 10.0), validation_error);
    p.phi0 = 0.5;
    p.rho_max = -1.0;
    REQUIRE_THROWS_AS(resolve_knot(p, 10.0), validation_error);
    p.rho_max = 100.0;
    p.psi0 = 0.0;
    REQUIRE_THROWS_AS(resolve_knot(p, 10.0), validation_error);
}

TEST_CASE("axis curve boundary values and the hand-evaluated interior point") {
    KnotParams p;
    p.rho_max = 100.0;
    p.phi0 = 1.0;
    p.phi1 = 0.4;
    const ResolvedKnot k = resolve_knot(p, 50.0);
    REQUIRE(knot_axis(k, 0.0) == 0.0);
    REQUIRE(std::abs(knot_axis(k, 100.0) - 50.0) < 1e-12);
    // independent evaluation: 30 (1 - e^{-2*50/(100-50)}) + 0.2*50
    const double expected = 30.0 * (1.0 - std::exp(-2.0)) + 10.0;
    REQUIRE(std::abs(knot_axis(k, 50.0) - expected) < 1e-12);
    REQUIRE(std::abs(expected - 35.94) < 0.005);
}

TEST_CASE("radius curve boundary values and the linear cone case") {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 20; ++i) {
        KnotParams p = random_valid_params(rng);
        const ResolvedKnot k = resolve_knot(p, 0.4 * p.rho_max);
        REQUIRE(knot_radius(k, 0.0) == 0.0);
        REQUIRE(std::abs(knot_radius(k, k.c_max) - p.r_max) < 1e-9 * p.r_max);
    }
    KnotParams cone = random_valid_params(rng);
    cone.psi1 = 1.0;
    const ResolvedKnot k = resolve_knot(cone, 20.0);
    for (double c = 0.0; c < k.c_max; c += k.c_max / 7.0)
        REQUIRE(std::abs(knot_radius(k, c) - cone.r_max / k.c_max * c) < 1e-9);
}

TEST_CASE("arc length: degenerate, straight-line, and polyline oracle") {
    KnotParams p;
    p.rho_max = 100.0;
    p.phi1 = 1.0;  // straight axis
    const ResolvedKnot straight = resolve_knot(p, 50.0);
    REQUIRE(arc_length(straight, 0.0) == 0.0);
    REQUIRE(std::abs(arc_length(straight, 100.0) - std::sqrt(100.0 * 100.0 + 50.0 * 50.0)) <
            1e-6);

    std::mt19937_64 rng(4);
    for (int i = 0; i < 5; ++i) {
        const KnotParams q = random_valid_params(rng);
        const ResolvedKnot k = resolve_knot(q, 0.5 * q.rho_max);
        const double quad = arc_length(k, q.rho_max);

        double poly = 0.0;
        const int segments = 1000000;
        double prev_l = knot_axis(k, 0.0);
        for (int s = 1; s <= segments; ++s) {
            const double rho = q.rho_max * s / segments;
            const double cur_l = knot_axis(k, rho);
            poly += std::hypot(q.rho_max / segments, cur_l - prev_l);
            prev_l = cur_l;
        }
        REQUIRE(std::abs(quad - poly) < 1e-4 * poly);
        REQUIRE(quad >= q.rho_max);
    }
}

TEST_CASE("surface rise on a cylinder") {
    const Heightmap h = constant_heightmap(100.0);
    const SurfaceRise flat = surface_rise(h, 1.0, 500.0, 0.0);
    REQUIRE(flat.delta_l == 0.0);
    REQUIRE(std::abs(flat.rho_max - 100.0) < 1e-12);

    const SurfaceRise rise = surface_rise(h, 1.0, 500.0, std::atan(0.5));
    REQUIRE(std::abs(rise.delta_l - 50.0) < 1e-9);
    REQUIRE(std::abs(rise.rho_max - 100.0) < 1e-12);
}

TEST_CASE("surface rise matches a bisection oracle on a tapering surface") {
    Heightmap h;
    h.n_theta = 32;
    h.n_l = 256;
    h.l_min = 0.0;
    h.l_max = 2000.0;
    h.values.resize(256, 32);
    for (int i = 0; i < 256; ++i)
        h.values.row(i).setConstant(150.0 - 0.02 * h.l_center(i));
    h.mask.setOnes(256, 32);

    const double tau = std::atan(0.6);
    const double l0 = 800.0;
    const SurfaceRise rise = surface_rise(h, 2.0, l0, tau);

    double lo = 0.0, hi = 500.0;
    const auto f = [&](double d) { return d - heightmap_sample(h, 2.0, l0 + d) * std::tan(tau); };
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (f(lo) * f(mid) <= 0.0)
            hi = mid;
        else
            lo = mid;
    }
    REQUIRE(std::abs(rise.delta_l - 0.5 * (lo + hi)) < 0.1);
}

TEST_CASE("surface rise fails when the knot exits the log end") {
    const Heightmap h = constant_heightmap(100.0, 0.0, 500.0);
    REQUIRE_THROWS_AS(surface_rise(h, 0.0, 480.0, std::atan(1.0)), validation_error);
}

TEST_CASE("knot body: circular sections for gamma = 1 and collapse at the origin") {
    KnotParams p;
    p.gamma = 1.0;
    p.rho_max = 100.0;
    p.r_max = 15.0;
    const ResolvedKnot k = resolve_knot(p, 40.0);
    const auto pts = knot_body_frame_points(k, 9, 16);
    REQUIRE(pts.size() == 9u * 16u);

    // first station collapses to the origin point
    for (int a = 0; a < 16; ++a) {
        REQUIRE(std::abs(pts[static_cast<size_t>(a)].s - p.s0) < 1e-12);
        REQUIRE(std::abs(pts[static_cast<size_t>(a)].l - p.l0) < 1e-12);
        REQUIRE(std::abs(pts[static_cast<size_t>(a)].rho) < 1e-12);
    }

    // circular: every ring point sits at the same distance from its center
    for (int station = 1; station < 9; ++station) {
        const double rho_i = p.rho_max * station / 8.0;
        const double center_l = p.l0 + knot_axis(k, rho_i);
        double rmin = 1e300, rmax = 0.0;
        for (int a = 0; a < 16; ++a) {
            const auto& q = pts[static_cast<size_t>(station * 16 + a)];
            const double d = std::sqrt((q.s - p.s0) * (q.s - p.s0) +
                                       (q.l - center_l) * (q.l - center_l) +
                                       (q.rho - rho_i) * (q.rho - rho_i));
            rmin = std::min(rmin, d);
            rmax = std::max(rmax, d);
        }
        REQUIRE(rmax / rmin < 1.0 + 1e-9);
    }
}

TEST_CASE("knot body points re-evaluate against the construction formulas") {
    KnotParams p;
    p.s0 = 4.0;
    p.gamma = 1.4;
    p.rho_max = 120.0;
    p.r_max = 18.0;
    p.phi0 = 0.6;
    p.phi1 = 0.5;
    p.psi0 = 0.8;
    p.psi1 = 0.7;
    p.l0 = 700.0;
    const ResolvedKnot k = resolve_knot(p, 60.0);
    const int n_axis = 12, n_angle = 10;
    const auto pts = knot_body_frame_points(k, n_axis, n_angle);

    // independent arc oracle: dense polyline sum up to each station
    const auto polyline_arc = [&](double rho_end) {
        if (rho_end <= 0.0) return 0.0;
        const int segments = 200000;
        double acc = 0.0, prev_l = knot_axis(k, 0.0);
        for (int s = 1; s <= segments; ++s) {
            const double rho = rho_end * s / segments;
            const double cur_l = knot_axis(k, rho);
            acc += std::hypot(rho_end / segments, cur_l - prev_l);
            prev_l = cur_l;
        }
        return acc;
    };

    for (int i = 0; i < n_axis; ++i) {
        const double rho_i = p.rho_max * i / (n_axis - 1);
        const double axis_l = p.l0 + knot_axis(k, rho_i);
        const double slope = knot_axis_slope(k, rho_i);
        const double w = std::sqrt(1.0 + slope * slope);
        const double radius = knot_radius(k, polyline_arc(rho_i));
        for (int a = 0; a < n_angle; ++a) {
            const auto& q = pts[static_cast<size_t>(i * n_angle + a)];
            const double psi = kTwoPi * a / n_angle;
            const double expect_s = p.s0 + radius * std::cos(psi);
            const double vert = p.gamma * radius * std::sin(psi);
            const double expect_l = axis_l + vert / w;
            const double expect_rho = rho_i - vert * slope / w;
            REQUIRE(std::abs(q.s - expect_s) < 1e-6);
            REQUIRE(std::abs(q.l - expect_l) < 1e-6);
            REQUIRE(std::abs(q.rho - expect_rho) < 1e-6);
            // center offset identity and the ellipse bound
            const double d = std::sqrt((q.s - p.s0) * (q.s - p.s0) +
                                       (q.l - axis_l) * (q.l - axis_l) +
                                       (q.rho - rho_i) * (q.rho - rho_i));
            REQUIRE(d <= std::max(1.0, p.gamma) * radius + 1e-9);
        }
    }
}

TEST_CASE("log-centric conversion of body points inverts the arc-length chart") {
    KnotParams p;
    p.s0 = 5.0;
    p.rho_max = 100.0;
    p.r_max = 12.0;
    const ResolvedKnot k = resolve_knot(p, 40.0);
    const double theta_mean = 2.2;
    const auto frame_pts = knot_body_frame_points(k, 10, 8);
    const auto lc = knot_body_points(k, theta_mean, 10, 8);
    REQUIRE(lc.size() == frame_pts.size());
    for (size_t i = 0; i < lc.size(); ++i) {
        if (frame_pts[i].rho < 10.0) continue;  // the chart degenerates near the pith
        const double s_back = wrap_angle_diff(lc[i].theta, theta_mean) * lc[i].rho;
        REQUIRE(std::abs(s_back - frame_pts[i].s) < 1e-9);
    }
}

TEST_CASE("property suite over random valid draws") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int draw = 0; draw < 400; ++draw) {
        const KnotParams p = random_valid_params(rng);
        const double delta = 0.8 * p.rho_max * u(rng);
        const ResolvedKnot k = resolve_knot(p, delta);

        REQUIRE(k.alpha_l >= 0.0);
        REQUIRE(k.alpha_r >= 0.0);
        REQUIRE(k.E_l >= 2.0);
        REQUIRE(k.E_r >= 2.0);
        REQUIRE(std::abs(knot_axis(k, 0.0)) < 1e-12);
        REQUIRE(std::abs(knot_axis(k, p.rho_max) - k.delta_l) <=
                1e-9 * std::max(k.delta_l, 1.0));
        REQUIRE(std::abs(knot_radius(k, k.c_max) - p.r_max) <= 1e-9 * p.r_max);

        // concavity and monotonicity on an interior grid
        const int grid = 200;
        const double h = p.rho_max / (grid + 1);
        double prev = knot_axis(k, h);
        for (int i = 2; i <= grid; ++i) {
            const double x = i * h;
            const double cur = knot_axis(k, x);
            const double second =
                (knot_axis(k, x + h) - 2.0 * cur + knot_axis(k, x - h)) / (h * h);
            REQUIRE(second <= 1e-9);
            REQUIRE(cur >= prev - 1e-9);
            prev = cur;
        }

        // exact saturation beyond rho_max
        for (double f : {1.01, 1.5, 3.0}) {
            const double rho = f * p.rho_max;
            REQUIRE(knot_axis(k, rho) - (k.alpha_l + k.L_l * rho) == 0.0);
        }
    }
}

TEST_CASE("shell distance is zero on the shell and negative inside") {
    KnotParams p;
    p.gamma = 1.3;
    p.rho_max = 100.0;
    p.r_max = 15.0;
    p.phi0 = 0.7;
    p.phi1 = 0.6;
    p.l0 = 500.0;
    const ResolvedKnot k = resolve_knot(p, 45.0);
    const KnotShellEvaluator shell(k);
    const auto pts = knot_body_frame_points(k, 14, 12);
    for (size_t i = 12; i < pts.size(); ++i) {  // skip the degenerate origin ring
        REQUIRE(std::abs(shell.shell_distance(pts[i])) < 0.05);
    }
    // a point on the axis mid-way is well inside
    KnotFramePoint inside;
    inside.s = p.s0;
    inside.rho = 60.0;
    inside.l = p.l0 + knot_axis(k, 60.0);
    REQUIRE(shell.shell_distance(inside) < 0.0);
}
