#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <future>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "logsynth/heightmap.hpp"
#include "logsynth/logcentric.hpp"
#include "logsynth/model.hpp"
#include "logsynth/optim.hpp"
#include "logsynth/stats.hpp"
#include "logsynth/surface_model.hpp"

namespace logsynth {

struct AnnotatedKnot {
    int knot_id = 0;
    int cluster_id = -1;  // -1: unknown, assigned during fitting
    std::vector<CartesianPoint> points;
};

struct AnnotatedLogData {
    std::string name;
    std::vector<CartesianPoint> surface_points;
    std::vector<AnnotatedKnot> knots;
};

struct KnotFitResult {
    KnotParams params;
    double delta_l = 0.0;     // signed, mm
    double theta_mean = 0.0;
    double rmse = 0.0;
    long point_count = 0;
    bool converged = false;
};

struct FitConfig {
    int centerline_n = 5;
    double centerline_slice = 10.0;  // mm
    int n_theta = 128;
    double l_cell = 10.0;            // mm of log length per heightmap row
    int min_knot_points = 30;
    double cluster_threshold = 150.0;  // mm gap that separates whorls
    int base_n_fourier = 10;
    int base_m_cheb = 10;
    GrainConfig grain;
    int threads = 0;  // 0: hardware concurrency
    LMOptions knot_lm = [] {
        LMOptions o;
        o.max_iterations = 80;
        return o;
    }();
};

/// Per-log fit summary; the text table mirrors the per-log knot-RMSE layout
/// used for reporting (count, mean, standard deviation).
struct FitReport {
    struct KnotRow {
        int knot_id = 0;
        double rmse = 0.0;
        long points = 0;
        bool converged = false;
        bool skipped = false;  // too few points
    };
    std::string log_name;
    std::vector<KnotRow> knots;
    long fitted_count = 0;
    double rmse_mean = 0.0;
    double rmse_sd = 0.0;
    double heightmap_rms_residual = 0.0;   // heightmap minus base band
    double surface_rms_after_knots = 0.0;  // after subtracting fitted imprints

    void finalize() {
        fitted_count = 0;
        double sum = 0.0;
        for (const auto& k : knots)
            if (!k.skipped) {
                ++fitted_count;
                sum += k.rmse;
            }
        rmse_mean = fitted_count ? sum / static_cast<double>(fitted_count) : 0.0;
        double var = 0.0;
        for (const auto& k : knots)
            if (!k.skipped) var += (k.rmse - rmse_mean) * (k.rmse - rmse_mean);
        rmse_sd = fitted_count > 1 ? std::sqrt(var / static_cast<double>(fitted_count - 1)) : 0.0;
    }

    std::string table_text() const {
        std::ostringstream os;
        os << "Log        " << (log_name.empty() ? "-" : log_name) << "\n";
        os << "Knots      " << fitted_count << "\n";
        char line[64];
        std::snprintf(line, sizeof(line), "RMSE  mu   %.2f\n", rmse_mean);
        os << line;
        std::snprintf(line, sizeof(line), "      sigma %.2f\n", rmse_sd);
        os << line;
        return os.str();
    }
};

/// 1-D gap clustering of knot origins: sort l0, split where the gap exceeds
/// the threshold. Returns per-input cluster ids and the cluster centers.
inline std::pair<std::vector<int>, std::vector<double>> cluster_knots(
    const std::vector<double>& l0s, double threshold = 150.0) {
    if (l0s.empty()) return {{}, {}};
    std::vector<size_t> order(l0s.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return l0s[a] < l0s[b]; });

    std::vector<int> ids(l0s.size(), 0);
    int cluster = 0;
    for (size_t i = 1; i < order.size(); ++i) {
        if (l0s[order[i]] - l0s[order[i - 1]] > threshold) ++cluster;
        ids[order[i]] = cluster;
    }
    ids[order[0]] = 0;

    std::vector<double> centers(static_cast<size_t>(cluster) + 1, 0.0);
    std::vector<long> counts(static_cast<size_t>(cluster) + 1, 0);
    for (size_t i = 0; i < l0s.size(); ++i) {
        centers[static_cast<size_t>(ids[i])] += l0s[i];
        counts[static_cast<size_t>(ids[i])] += 1;
    }
    for (size_t c = 0; c < centers.size(); ++c) centers[c] /= static_cast<double>(counts[c]);
    return {ids, centers};
}

namespace detail {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

inline LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
    const size_t n = xs.size();
    if (n < 2) return {};
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double denom = n * sxx - sx * sx;
    if (std::abs(denom) < 1e-12) return {};
    LineFit f;
    f.slope = (n * sxy - sx * sy) / denom;
    f.intercept = (sy - f.slope * sx) / static_cast<double>(n);
    return f;
}

inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    const size_t idx = static_cast<size_t>(q * static_cast<double>(v.size() - 1));
    std::nth_element(v.begin(), v.begin() + static_cast<long>(idx), v.end());
    return v[idx];
}

}  // namespace detail

/// Least-squares initialization of the nine knot parameters from the frame
/// points, followed by Levenberg-Marquardt over the transformed parameters.
/// The residual is the signed distance to the knot shell.
inline KnotFitResult fit_knot(const std::vector<LogCentricPoint>& points, const Heightmap& h,
                              const FitConfig& config = {}) {
    if (static_cast<int>(points.size()) < config.min_knot_points)
        throw std::invalid_argument("fit_knot: too few points");

    auto [frame_points, theta_mean] = to_knot_frame(points);
    const size_t n = frame_points.size();

    // order by radial distance
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return frame_points[a].rho < frame_points[b].rho; });

    const auto median_of = [&](size_t lo, size_t hi, auto getter) {
        std::vector<double> vals;
        vals.reserve(hi - lo);
        for (size_t i = lo; i < hi; ++i) vals.push_back(getter(frame_points[order[i]]));
        return detail::quantile(vals, 0.5);
    };

    const size_t inner_n = std::max<size_t>(5, n / 10);
    const double l0_init = median_of(0, inner_n, [](const KnotFramePoint& p) { return p.l; });
    const double s0_init = median_of(0, inner_n, [](const KnotFramePoint& p) { return p.s; });

    // exit position: the surface-most points form a ring around the exit
    // disc; selecting them by distance to the surface radius (not by order
    // statistics of rho) keeps the ring phase-balanced, so its median l sits
    // on the exit center
    const double rho_top = frame_points[order[n - 1]].rho;
    const double l_top = frame_points[order[n - 1]].l;
    double rho_surf = rho_top;
    try {
        rho_surf = heightmap_sample(h, theta_mean, std::clamp(l_top, h.l_min, h.l_max));
    } catch (const std::domain_error&) {
    }
    // midrange of the near-surface band is robust against the one-sided
    // contamination from the last interior station
    double l_exit = l_top;
    {
        std::vector<double> ls;
        for (double band = std::max(4.0, 0.04 * rho_surf); ls.size() < 8; band *= 2.0) {
            ls.clear();
            for (const auto& q : frame_points)
                if (std::abs(q.rho - rho_surf) <= band) ls.push_back(q.l);
            if (band > 4.0 * rho_surf) break;
        }
        if (ls.size() >= 4)
            l_exit = 0.5 * (detail::quantile(ls, 0.1) + detail::quantile(ls, 0.9));
    }

    const double delta_raw = l_exit - l0_init;
    const int sign = delta_raw < 0.0 ? -1 : 1;
    const double delta_init = std::max(std::abs(delta_raw), 1e-3);
    const double rho_max_init = std::max(rho_surf, 1.0);

    // axis incline ratios from line fits on the inner and outer thirds
    const auto slope_of = [&](size_t lo, size_t hi) {
        std::vector<double> xs, ys;
        for (size_t i = lo; i < hi; ++i) {
            xs.push_back(frame_points[order[i]].rho);
            ys.push_back(sign * (frame_points[order[i]].l - l0_init));
        }
        return detail::fit_line(xs, ys).slope;
    };
    const double chord = delta_init / rho_max_init;
    double phi1 = 0.6, phi0 = 0.7;
    const double slope_out = slope_of(n - n / 3, n);
    const double slope_in = slope_of(0, n / 3);
    if (chord > 1e-9) {
        phi1 = std::clamp(slope_out / chord, 0.1, 0.9);
        const double denom = slope_in - phi1 * chord;
        if (denom > 1e-9)
            phi0 = std::clamp(2.0 * (1.0 - phi1) * chord / denom, 0.1, 0.9);
        else
            phi0 = 0.9;
    }

    // radius profile from binned spreads around the axis
    KnotParams init;
    init.s0 = s0_init;
    init.l0 = l0_init;
    init.rho_max = rho_max_init;
    init.phi0 = phi0;
    init.phi1 = phi1;

    const int bins = 8;
    std::vector<double> bin_r(bins, 0.0), bin_v(bins, 0.0), bin_rho(bins, 0.0);
    std::vector<bool> bin_ok(bins, false);
    {
        std::vector<std::vector<double>> ss(bins), lls(bins), rhos(bins);
        for (size_t i = 0; i < n; ++i) {
            int b = static_cast<int>(frame_points[i].rho / rho_max_init * bins);
            b = std::clamp(b, 0, bins - 1);
            ss[static_cast<size_t>(b)].push_back(frame_points[i].s);
            lls[static_cast<size_t>(b)].push_back(frame_points[i].l);
            rhos[static_cast<size_t>(b)].push_back(frame_points[i].rho);
        }
        for (int b = 0; b < bins; ++b) {
            auto& sb = ss[static_cast<size_t>(b)];
            if (sb.size() < 6) continue;
            const double s_med = detail::quantile(sb, 0.5);
            const double l_med = detail::quantile(lls[static_cast<size_t>(b)], 0.5);
            std::vector<double> s_dev, l_dev;
            for (double v : sb) s_dev.push_back(std::abs(v - s_med));
            for (double v : lls[static_cast<size_t>(b)]) l_dev.push_back(std::abs(v - l_med));
            bin_r[static_cast<size_t>(b)] = detail::quantile(s_dev, 0.9) / 0.987;
            bin_v[static_cast<size_t>(b)] = detail::quantile(l_dev, 0.9) / 0.987;
            bin_rho[static_cast<size_t>(b)] = detail::quantile(rhos[static_cast<size_t>(b)], 0.5);
            bin_ok[static_cast<size_t>(b)] = true;
        }
    }
    std::vector<double> gammas;
    for (int b = bins / 2; b < bins; ++b)
        if (bin_ok[static_cast<size_t>(b)] && bin_r[static_cast<size_t>(b)] > 0.5)
            gammas.push_back(bin_v[static_cast<size_t>(b)] / bin_r[static_cast<size_t>(b)]);
    init.gamma = gammas.empty() ? 1.0 : std::clamp(detail::quantile(gammas, 0.5), 0.3, 3.0);

    double r_max_init = 5.0;
    for (int b = bins - 1; b >= 0; --b)
        if (bin_ok[static_cast<size_t>(b)]) {
            r_max_init = std::max(1.0, bin_r[static_cast<size_t>(b)]);
            break;
        }
    init.r_max = r_max_init;

    // radius incline ratios against the axis arc length
    {
        ResolvedKnot probe = resolve_knot(init, sign * delta_init);
        std::vector<double> cs, rs;
        for (int b = 0; b < bins; ++b)
            if (bin_ok[static_cast<size_t>(b)]) {
                cs.push_back(detail::axis_segment_arc(probe, 0.0,
                                                      std::min(bin_rho[static_cast<size_t>(b)],
                                                               probe.params.rho_max)));
                rs.push_back(bin_r[static_cast<size_t>(b)]);
            }
        double psi0 = 0.7, psi1 = 0.6;
        if (cs.size() >= 4) {
            const size_t half = cs.size() / 2;
            const double chord_r = r_max_init / std::max(cs.back(), 1e-9);
            const std::vector<double> cs_out(cs.begin() + static_cast<long>(half), cs.end());
            const std::vector<double> rs_out(rs.begin() + static_cast<long>(half), rs.end());
            const std::vector<double> cs_in(cs.begin(), cs.begin() + static_cast<long>(half));
            const std::vector<double> rs_in(rs.begin(), rs.begin() + static_cast<long>(half));
            const double out_slope = detail::fit_line(cs_out, rs_out).slope;
            const double in_slope = detail::fit_line(cs_in, rs_in).slope;
            if (chord_r > 1e-9) {
                psi1 = std::clamp(out_slope / chord_r, 0.1, 0.9);
                const double denom = in_slope - psi1 * chord_r;
                if (denom > 1e-9)
                    psi0 = std::clamp(2.0 * (1.0 - psi1) * chord_r / denom, 0.1, 0.9);
                else
                    psi0 = 0.9;
            }
        }
        init.psi0 = psi0;
        init.psi1 = psi1;
    }

    // Levenberg-Marquardt refinement of the nine parameters plus the rise;
    // the rise is only weakly constrained by the surface (a cylinder says
    // nothing about it), so it must stay free for the shell data to pin it
    const std::vector<ParamTransform> transforms = {
        ParamTransform::identity(),            // s0
        ParamTransform::identity(),            // l0
        ParamTransform::log_positive(),        // gamma
        ParamTransform::log_positive(),        // rho_max
        ParamTransform::logit_box(0.01, 1.0),  // phi0
        ParamTransform::logit_box(0.01, 1.0),  // phi1
        ParamTransform::log_positive(),        // r_max
        ParamTransform::logit_box(0.01, 1.0),  // psi0
        ParamTransform::logit_box(0.01, 1.0),  // psi1
        ParamTransform::identity(),            // delta_l, signed
    };
    const auto assemble = [](const Eigen::VectorXd& p) {
        KnotParams k;
        k.s0 = p[0];
        k.l0 = p[1];
        k.gamma = p[2];
        k.rho_max = p[3];
        k.phi0 = p[4];
        k.phi1 = p[5];
        k.r_max = p[6];
        k.psi0 = p[7];
        k.psi1 = p[8];
        return k;
    };
    Eigen::VectorXd p0(10);
    p0 << init.s0, init.l0, init.gamma, init.rho_max, init.phi0, init.phi1, init.r_max,
        init.psi0, init.psi1, sign * delta_init;
    const auto residual = [&](const Eigen::VectorXd& z) -> Eigen::VectorXd {
        const Eigen::VectorXd p = to_external(transforms, z);
        const KnotShellEvaluator shell(resolve_knot(assemble(p), p[9]));
        Eigen::VectorXd r(static_cast<Eigen::Index>(n));
        for (size_t i = 0; i < n; ++i)
            r[static_cast<Eigen::Index>(i)] = shell.shell_distance(frame_points[i]);
        return r;
    };

    KnotFitResult out;
    out.theta_mean = theta_mean;
    out.point_count = static_cast<long>(n);
    try {
        Eigen::VectorXd z0 = to_internal(transforms, p0);
        auto [z_opt, report] = levenberg_marquardt(residual, z0, config.knot_lm);
        Eigen::VectorXd p = to_external(transforms, z_opt);
        // a ratio pinned against its box boundary has a vanishing logistic
        // gradient and can freeze the refinement; re-center and retry once
        bool saturated = false;
        for (int idx : {4, 5, 7, 8})
            if (p[idx] < 0.02 || p[idx] > 0.99) {
                p[idx] = 0.5;
                saturated = true;
            }
        if (saturated) {
            const auto [z2, report2] = levenberg_marquardt(residual, to_internal(transforms, p),
                                                           config.knot_lm);
            if (report2.final_cost < report.final_cost) {
                z_opt = z2;
                report = report2;
                p = to_external(transforms, z_opt);
            } else {
                p = to_external(transforms, z_opt);
            }
        }
        out.params = assemble(p);
        out.delta_l = p[9];
        out.rmse = std::sqrt(report.final_cost / static_cast<double>(n));
        out.converged = report.converged;
    } catch (const numeric_error&) {
        out.params = init;
        out.delta_l = sign * delta_init;
        const Eigen::VectorXd r0 = residual(to_internal(transforms, p0));
        out.rmse = std::sqrt(r0.squaredNorm() / static_cast<double>(n));
        out.converged = false;
    }
    return out;
}

/// Fits every component of the log model: centerline, heightmap, knots
/// (concurrently), whorl clustering, thickness, base shape, and per-knot
/// surface imprints on the grain-suppressed medium band.
inline std::pair<LogModel, FitReport> fit_log(const AnnotatedLogData& data,
                                              const FitConfig& config = {}) {
    if (data.surface_points.empty()) throw std::invalid_argument("fit_log: no surface points");

    LogModel model;
    model.name = data.name;
    model.source = "fit";
    FitReport report;
    report.log_name = data.name;

    model.centerline = fit_centerline(data.surface_points, config.centerline_n,
                                      {config.centerline_slice, 0.05});
    const CenterlineFrame frame(model.centerline);

    std::vector<LogCentricPoint> surface;
    surface.reserve(data.surface_points.size());
    for (const auto& p : data.surface_points) surface.push_back(to_log_centric(p, frame));

    double l_lo = surface.front().l, l_hi = surface.front().l;
    for (const auto& q : surface) {
        l_lo = std::min(l_lo, q.l);
        l_hi = std::max(l_hi, q.l);
    }
    const int n_l = std::max(8, static_cast<int>(std::ceil((l_hi - l_lo) / config.l_cell)));
    const Heightmap heightmap = build_heightmap(surface, config.n_theta, n_l, l_lo, l_hi);

    // per-knot fits, independent and concurrent
    struct KnotTask {
        int knot_id;
        int provided_cluster;
        std::vector<LogCentricPoint> points;
        bool skipped = false;
    };
    std::vector<KnotTask> tasks;
    for (const auto& k : data.knots) {
        KnotTask t;
        t.knot_id = k.knot_id;
        t.provided_cluster = k.cluster_id;
        if (static_cast<int>(k.points.size()) < config.min_knot_points) {
            t.skipped = true;
        } else {
            t.points.reserve(k.points.size());
            for (const auto& p : k.points) t.points.push_back(to_log_centric(p, frame));
        }
        tasks.push_back(std::move(t));
    }

    std::vector<KnotFitResult> results(tasks.size());
    {
        const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
        const unsigned workers =
            config.threads > 0 ? static_cast<unsigned>(config.threads) : hw;
        std::atomic<size_t> next{0};
        std::vector<std::future<void>> futures;
        for (unsigned w = 0; w < std::min<size_t>(workers, tasks.size()); ++w) {
            futures.push_back(std::async(std::launch::async, [&]() {
                for (size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1)) {
                    if (tasks[i].skipped) continue;
                    results[i] = fit_knot(tasks[i].points, heightmap, config);
                }
            }));
        }
        for (auto& f : futures) f.get();
    }

    std::vector<double> fitted_l0;
    std::vector<size_t> fitted_idx;
    for (size_t i = 0; i < tasks.size(); ++i) {
        FitReport::KnotRow row;
        row.knot_id = tasks[i].knot_id;
        row.skipped = tasks[i].skipped;
        if (!tasks[i].skipped) {
            row.rmse = results[i].rmse;
            row.points = results[i].point_count;
            row.converged = results[i].converged;
            fitted_l0.push_back(results[i].params.l0);
            fitted_idx.push_back(i);
        }
        report.knots.push_back(row);
    }
    report.finalize();

    // whorl clustering: use provided ids when complete, else gap clustering
    std::vector<int> cluster_ids(fitted_idx.size(), -1);
    std::vector<double> centers;
    bool all_provided = !tasks.empty();
    for (size_t j = 0; j < fitted_idx.size(); ++j)
        if (tasks[fitted_idx[j]].provided_cluster < 0) all_provided = false;
    if (all_provided && !fitted_idx.empty()) {
        int max_id = 0;
        for (size_t j = 0; j < fitted_idx.size(); ++j) {
            cluster_ids[j] = tasks[fitted_idx[j]].provided_cluster;
            max_id = std::max(max_id, cluster_ids[j]);
        }
        centers.assign(static_cast<size_t>(max_id) + 1, 0.0);
        std::vector<long> counts(centers.size(), 0);
        for (size_t j = 0; j < fitted_idx.size(); ++j) {
            centers[static_cast<size_t>(cluster_ids[j])] += fitted_l0[j];
            counts[static_cast<size_t>(cluster_ids[j])] += 1;
        }
        for (size_t c = 0; c < centers.size(); ++c)
            if (counts[c]) centers[c] /= static_cast<double>(counts[c]);
    } else if (!fitted_idx.empty()) {
        std::tie(cluster_ids, centers) = cluster_knots(fitted_l0, config.cluster_threshold);
    }

    // thickness over the whorl centers, then the low-frequency base band
    std::vector<double> centers_in_domain;
    for (double c : centers)
        if (c >= heightmap.l_min && c <= heightmap.l_max) centers_in_domain.push_back(c);
    const ThicknessFitResult thickness = fit_thickness(heightmap, centers_in_domain);
    model.thickness = thickness.model;
    model.base_shape = fit_base_shape(heightmap, config.base_n_fourier, config.base_m_cheb);
    model.dc_source = LogModel::DcSource::Base;
    model.grain = config.grain;

    // medium band: heightmap minus base, median-filtered to suppress grain
    Eigen::MatrixXd base_values(heightmap.n_l, heightmap.n_theta);
    for (int i = 0; i < heightmap.n_l; ++i)
        for (int j = 0; j < heightmap.n_theta; ++j)
            base_values(i, j) =
                eval_base_shape(model.base_shape, heightmap.theta_center(j), heightmap.l_center(i));
    const Eigen::MatrixXd residual_band = median_filter3(heightmap.values - base_values);
    report.heightmap_rms_residual =
        std::sqrt((heightmap.values - base_values).array().square().mean());

    Eigen::MatrixXd imprints = Eigen::MatrixXd::Zero(heightmap.n_l, heightmap.n_theta);
    for (size_t j = 0; j < fitted_idx.size(); ++j) {
        const KnotFitResult& kf = results[fitted_idx[j]];
        ModelKnot mk;
        mk.params = kf.params;
        mk.delta_l = kf.delta_l;
        mk.theta_mean = kf.theta_mean;
        mk.knot_id = tasks[fitted_idx[j]].knot_id;
        mk.cluster_id = cluster_ids[j];
        mk.fit_rmse = kf.rmse;
        mk.fit_converged = kf.converged;
        model.knots.push_back(mk);

        // surface imprint fitted around the exit point on the medium band
        const double rho_exit = kf.params.rho_max;
        const double theta_exit =
            normalize_angle(kf.theta_mean + kf.params.s0 / std::max(rho_exit, 1e-6));
        const double l_exit = kf.params.l0 + kf.delta_l;
        const double r_theta = std::max(kf.params.r_max, 1.0);
        const double r_l = std::max(kf.params.gamma * kf.params.r_max, 1.0);

        std::vector<double> patch, dts, dls;
        for (int i = 0; i < heightmap.n_l; ++i) {
            const double dl = heightmap.l_center(i) - l_exit;
            if (std::abs(dl) > 3.0 * r_l) continue;
            for (int jj = 0; jj < heightmap.n_theta; ++jj) {
                const double darc =
                    wrap_angle_diff(heightmap.theta_center(jj), theta_exit) * rho_exit;
                if (std::abs(darc) > 3.0 * r_theta) continue;
                patch.push_back(residual_band(i, jj));
                dts.push_back(darc);
                dls.push_back(dl);
            }
        }
        SurfaceKnot sk;
        sk.theta = theta_exit;
        sk.l = l_exit;
        sk.r_theta = r_theta;
        sk.r_l = r_l;
        if (patch.size() >= 16) {
            const SurfaceKnotFitResult sf = fit_surface_knot(
                Eigen::Map<Eigen::VectorXd>(patch.data(), static_cast<Eigen::Index>(patch.size())),
                Eigen::Map<Eigen::VectorXd>(dts.data(), static_cast<Eigen::Index>(dts.size())),
                Eigen::Map<Eigen::VectorXd>(dls.data(), static_cast<Eigen::Index>(dls.size())),
                r_theta, r_l);
            sk = sf.knot;
            sk.theta = theta_exit;
            sk.l = l_exit;
        } else {
            sk.degenerate = true;
            sk.amplitude = 0.0;
        }
        model.surface_knots.push_back(sk);

        if (!sk.degenerate) {
            for (int i = 0; i < heightmap.n_l; ++i) {
                const double dl = heightmap.l_center(i) - sk.l;
                if (std::abs(dl) > 3.0 * r_l) continue;
                for (int jj = 0; jj < heightmap.n_theta; ++jj) {
                    const double darc =
                        wrap_angle_diff(heightmap.theta_center(jj), sk.theta) * rho_exit;
                    if (std::abs(darc) > 3.0 * r_theta) continue;
                    imprints(i, jj) += sk.amplitude * surface_knot_imprint(sk, darc, dl);
                }
            }
        }
    }

    const Eigen::MatrixXd high_band = heightmap.values - base_values - imprints;
    report.surface_rms_after_knots = std::sqrt(high_band.array().square().mean());
    // the grain realization is not recoverable; keep its configuration with
    // the amplitude estimated from the remaining high-frequency energy
    model.grain.amplitude = report.surface_rms_after_knots;

    model.validate();
    return {model, report};
}

struct ReconstructOptions {
    int n_theta = 128;
    int n_l = 0;  // 0: one row per 10 mm
    bool include_grain = true;
    int body_samples_axis = 32;
    int body_samples_angle = 16;
};

struct Reconstruction {
    Heightmap heightmap;
    std::vector<std::vector<LogCentricPoint>> knot_shells;
};

/// Heightmap composition plus per-knot shell geometry in the model's
/// log-centric frame.
inline Reconstruction reconstruct(const LogModel& model, const ReconstructOptions& opts = {}) {
    model.validate();
    const int n_l = opts.n_l > 0
                        ? opts.n_l
                        : std::max(8, static_cast<int>((model.l_max() - model.l_min()) / 10.0));
    ComposeOptions copts;
    copts.include_grain = opts.include_grain;
    if (model.dc_source == LogModel::DcSource::Thickness) copts.thickness_dc = &model.thickness;

    Reconstruction rec;
    rec.heightmap =
        compose_heightmap(model.base_shape, model.surface_knots, model.grain, opts.n_theta, n_l, copts);
    for (const auto& k : model.knots) {
        const ResolvedKnot resolved = resolve_knot(k.params, k.delta_l);
        rec.knot_shells.push_back(knot_body_points(resolved, k.theta_mean, opts.body_samples_axis,
                                                   opts.body_samples_angle));
    }
    return rec;
}

}  // namespace logsynth
