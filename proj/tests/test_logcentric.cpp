#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "logsynth/heightmap.hpp"
#include "logsynth/logcentric.hpp"

using namespace logsynth;

namespace {

Centerline random_smooth_centerline(std::mt19937_64& rng, double x0 = 0.0, double x1 = 3000.0) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Centerline c = Centerline::straight(x0, x1, 4);
    for (int i = 0; i < c.n; ++i) {
        // gentle sweep: amplitudes shrink with degree
        c.coeffs_y[i] = 15.0 * normal(rng) / std::pow(2.0, i);
        c.coeffs_z[i] = 15.0 * normal(rng) / std::pow(2.0, i);
    }
    return c;
}

}  // namespace

TEST_CASE("straight centerline maps +z offsets to theta zero") {
    const Centerline c = Centerline::straight(0.0, 100.0);
    const CenterlineFrame frame(c);
    const LogCentricPoint q = to_log_centric({10.0, 0.0, 5.0}, frame);
    REQUIRE(std::abs(q.theta) < 1e-12);
    REQUIRE(std::abs(q.l - 10.0) < 1e-9);
    REQUIRE(std::abs(q.rho - 5.0) < 1e-9);
}

TEST_CASE("a point on the centerline degenerates to rho and theta zero") {
    const Centerline c = Centerline::straight(0.0, 100.0);
    const CenterlineFrame frame(c);
    const LogCentricPoint q = to_log_centric({42.0, 0.0, 0.0}, frame);
    REQUIRE(q.rho == 0.0);
    REQUIRE(q.theta == 0.0);
    REQUIRE(std::abs(q.l - 42.0) < 1e-9);
}

TEST_CASE("projection agrees with a dense polyline search on a curved centerline") {
    Centerline c = Centerline::straight(0.0, 1000.0, 2);
    c.coeffs_y[1] = 12.0;  // quadratic bend
    const CenterlineFrame frame(c);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ux(50.0, 950.0);
    std::uniform_real_distribution<double> uoff(-80.0, 80.0);
    for (int trial = 0; trial < 25; ++trial) {
        const CartesianPoint p{ux(rng), uoff(rng), uoff(rng)};
        const LogCentricPoint q = to_log_centric(p, frame);

        // brute force: nearest vertex of a dense polyline, arc length by sum
        const int segments = 100000;
        double best_d2 = std::numeric_limits<double>::infinity();
        double best_arc = 0.0;
        double arc = 0.0;
        Eigen::Vector3d prev = frame.position(0.0);
        const Eigen::Vector3d pv(p.x, p.y, p.z);
        for (int i = 0; i <= segments; ++i) {
            const double x = 1000.0 * i / segments;
            const Eigen::Vector3d pos = frame.position(x);
            if (i > 0) arc += (pos - prev).norm();
            const double d2 = (pv - pos).squaredNorm();
            if (d2 < best_d2) {
                best_d2 = d2;
                best_arc = arc;
            }
            prev = pos;
        }
        REQUIRE(std::abs(q.l - best_arc) < 0.01);
        REQUIRE(std::abs(q.rho - std::sqrt(best_d2)) < 0.01);
    }
}

TEST_CASE("log centric round trip is exact to a micron") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> utheta(0.0, kTwoPi);
    std::uniform_real_distribution<double> ul(100.0, 2900.0);
    std::uniform_real_distribution<double> urho(1.0, 200.0);
    for (int rep = 0; rep < 4; ++rep) {
        const Centerline c = random_smooth_centerline(rng);
        const CenterlineFrame frame(c);
        double max_err = 0.0;
        for (int i = 0; i < 250; ++i) {
            LogCentricPoint q;
            q.theta = utheta(rng);
            q.l = ul(rng);
            q.rho = urho(rng);
            const CartesianPoint p = from_log_centric(q, frame);
            const LogCentricPoint back = to_log_centric(p, frame);
            const CartesianPoint p2 = from_log_centric(back, frame);
            const double err = std::hypot(p.x - p2.x, p.y - p2.y, p.z - p2.z);
            max_err = std::max(max_err, err);
            REQUIRE(std::abs(back.rho - q.rho) < 1e-6);
            REQUIRE(std::abs(back.l - q.l) < 1e-6);
        }
        REQUIRE(max_err < 1e-6);
    }
}

TEST_CASE("straight-line inverse map matches the frame convention") {
    const Centerline c = Centerline::straight(0.0, 100.0);
    const CenterlineFrame frame(c);
    const CartesianPoint p = from_log_centric({0.0, 10.0, 5.0}, frame);
    REQUIRE(std::abs(p.x - 10.0) < 1e-9);
    REQUIRE(std::abs(p.y - 0.0) < 1e-9);
    REQUIRE(std::abs(p.z - 5.0) < 1e-9);

    const CartesianPoint on_axis = from_log_centric({1.23, 77.0, 0.0}, frame);
    REQUIRE(std::abs(on_axis.x - 77.0) < 1e-9);
    REQUIRE(std::abs(on_axis.y) < 1e-12);
    REQUIRE(std::abs(on_axis.z) < 1e-12);
}

TEST_CASE("arc positions outside the margin are rejected") {
    const Centerline c = Centerline::straight(0.0, 100.0);
    const CenterlineFrame frame(c);
    REQUIRE_THROWS_AS(from_log_centric({0.0, 150.0, 10.0}, frame), std::domain_error);
}

TEST_CASE("rigid rotation about a straight centerline shifts theta uniformly") {
    const Centerline c = Centerline::straight(0.0, 1000.0);
    const CenterlineFrame frame(c);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double delta = 1.1;
    for (int i = 0; i < 50; ++i) {
        const double x = 100.0 + 800.0 * u(rng);
        const double y = -90.0 + 180.0 * u(rng);
        const double z = -90.0 + 180.0 * u(rng);
        if (std::hypot(y, z) < 1.0) continue;
        const LogCentricPoint a = to_log_centric({x, y, z}, frame);
        // right-handed rotation about +x by delta
        const double yr = y * std::cos(delta) - z * std::sin(delta);
        const double zr = y * std::sin(delta) + z * std::cos(delta);
        const LogCentricPoint b = to_log_centric({x, yr, zr}, frame);
        REQUIRE(std::abs(wrap_angle_diff(b.theta, a.theta + delta)) < 1e-9);
        REQUIRE(std::abs(b.rho - a.rho) < 1e-9);
        REQUIRE(std::abs(b.l - a.l) < 1e-9);
    }
}

TEST_CASE("knot frame: arc coordinate follows s = (theta - mean) * rho") {
    std::vector<LogCentricPoint> pts = {{1.0, 0.0, 100.0}, {1.2, 10.0, 100.0}, {0.8, -10.0, 100.0}};
    const auto [frame_pts, mean] = to_knot_frame(pts);
    REQUIRE(std::abs(mean - 1.0) < 1e-12);
    REQUIRE(std::abs(frame_pts[0].s) < 1e-12);            // theta == mean
    REQUIRE(std::abs(frame_pts[1].s - 20.0) < 1e-12);     // 0.2 rad * 100 mm
    REQUIRE(std::abs(frame_pts[2].s + 20.0) < 1e-12);
    // pass-through of l and rho
    REQUIRE(frame_pts[1].l == 10.0);
    REQUIRE(frame_pts[1].rho == 100.0);
}

TEST_CASE("knot frame matches the direct formula at 0.1 rad offset") {
    std::vector<LogCentricPoint> pts = {{0.55, 0.0, 100.0}, {0.45, 0.0, 100.0}};
    const auto [frame_pts, mean] = to_knot_frame(pts);
    REQUIRE(std::abs(mean - 0.5) < 1e-12);
    REQUIRE(std::abs(frame_pts[0].s - (0.55 - 0.5) * 100.0) < 1e-12);
}

TEST_CASE("knot frame is invariant across the 0/2pi seam") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> uth(-0.3, 0.3);
    std::uniform_real_distribution<double> url(50.0, 150.0);
    std::vector<LogCentricPoint> straddling, rotated;
    for (int i = 0; i < 40; ++i) {
        const double th = uth(rng);  // cluster straddles theta == 0
        const double rho = url(rng);
        const double l = url(rng);
        straddling.push_back({normalize_angle(th), l, rho});
        rotated.push_back({normalize_angle(th + kPi), l, rho});
    }
    const auto [fp_a, mean_a] = to_knot_frame(straddling);
    const auto [fp_b, mean_b] = to_knot_frame(rotated);
    REQUIRE(std::abs(wrap_angle_diff(mean_b, mean_a + kPi)) < 1e-9);
    for (size_t i = 0; i < fp_a.size(); ++i) {
        REQUIRE(std::abs(fp_a[i].s - fp_b[i].s) < 1e-9);
        REQUIRE(fp_a[i].l == fp_b[i].l);
        REQUIRE(fp_a[i].rho == fp_b[i].rho);
    }
}

TEST_CASE("to_knot_frame rejects empty input") {
    REQUIRE_THROWS_AS(to_knot_frame({}), std::invalid_argument);
}

TEST_CASE("heightmap binning reproduces a perfect cylinder") {
    std::vector<LogCentricPoint> pts;
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> uth(0.0, kTwoPi);
    std::uniform_real_distribution<double> ul(0.0, 500.0);
    for (int i = 0; i < 60000; ++i) pts.push_back({uth(rng), ul(rng), 100.0});
    const Heightmap h = build_heightmap(pts, 32, 16, 0.0, 500.0);
    REQUIRE(h.mask.minCoeff() == 1);
    REQUIRE(std::abs(h.values.maxCoeff() - 100.0) < 1e-12);
    REQUIRE(std::abs(h.values.minCoeff() - 100.0) < 1e-12);
}

TEST_CASE("an isolated empty cell is filled from its neighbors and masked") {
    std::vector<LogCentricPoint> pts;
    const int n_theta = 16, n_l = 8;
    const Heightmap probe{n_theta, n_l, 0.0, 80.0, {}, {}};
    for (int i = 0; i < n_l; ++i) {
        for (int j = 0; j < n_theta; ++j) {
            if (i == 4 && j == 7) continue;  // leave one cell empty
            pts.push_back({probe.theta_center(j), probe.l_center(i), 100.0});
        }
    }
    const Heightmap h = build_heightmap(pts, n_theta, n_l, 0.0, 80.0);
    REQUIRE(h.mask(4, 7) == 0);
    REQUIRE(std::abs(h.values(4, 7) - 100.0) < 1e-5);
    REQUIRE(h.mask(0, 0) == 1);
}

TEST_CASE("binned heightmap matches an analytic cosine surface") {
    std::vector<LogCentricPoint> pts;
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> uth(0.0, kTwoPi);
    std::uniform_real_distribution<double> ul(0.0, 400.0);
    for (int i = 0; i < 200000; ++i) {
        const double th = uth(rng);
        pts.push_back({th, ul(rng), 100.0 + 5.0 * std::cos(th)});
    }
    const int n_theta = 64, n_l = 16;
    const Heightmap h = build_heightmap(pts, n_theta, n_l, 0.0, 400.0);
    // max analytic slope of 5 cos(theta) is 5 per radian; half a cell wide
    const double bound = 0.5 * 5.0 * h.cell_theta() + 1e-6;
    for (int i = 0; i < n_l; ++i)
        for (int j = 0; j < n_theta; ++j)
            REQUIRE(std::abs(h.values(i, j) - (100.0 + 5.0 * std::cos(h.theta_center(j)))) <
                    bound);
}

TEST_CASE("empty point set fails to build a heightmap") {
    REQUIRE_THROWS_AS(build_heightmap({}, 16, 8, 0.0, 100.0), validation_error);
}

TEST_CASE("heightmap sampling: cell centers, cyclicity, and midpoints") {
    Heightmap h;
    h.n_theta = 8;
    h.n_l = 8;
    h.l_min = 0.0;
    h.l_max = 80.0;
    h.values = Eigen::MatrixXd::Constant(8, 8, 50.0);
    h.mask.setOnes(8, 8);
    h.values(3, 2) = 60.0;
    h.values(3, 3) = 70.0;

    REQUIRE(heightmap_sample(h, h.theta_center(2), h.l_center(3)) == 60.0);
    // midway between two cell centers in theta: arithmetic mean
    const double mid = 0.5 * (h.theta_center(2) + h.theta_center(3));
    REQUIRE(std::abs(heightmap_sample(h, mid, h.l_center(3)) - 65.0) < 1e-12);
    // exact cyclicity at the seam
    REQUIRE(heightmap_sample(h, 0.0, 40.0) == heightmap_sample(h, kTwoPi, 40.0));
    REQUIRE(heightmap_sample(h, 0.3, 40.0) ==
            Catch::Approx(heightmap_sample(h, 0.3 + kTwoPi, 40.0)).margin(1e-12));
    REQUIRE_THROWS_AS(heightmap_sample(h, 0.0, -5.0), std::domain_error);
    REQUIRE_THROWS_AS(heightmap_sample(h, 0.0, 85.0), std::domain_error);
}
