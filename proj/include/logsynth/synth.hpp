#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "logsynth/fitting.hpp"
#include "logsynth/model.hpp"
#include "logsynth/stats.hpp"
#include "logsynth/surface_model.hpp"

namespace logsynth {

struct GenerationConfig {
    std::uint64_t seed = 0;
    double log_length = 0.0;  // mm; 0 samples from the statistics' range
    int n_theta = 128;
    int n_l = 0;              // 0: one row per 10 mm
    int body_samples_axis = 32;
    int body_samples_angle = 16;
    double end_margin = 300.0;  // keep whorls away from the log ends, mm
    int max_attempts = 10;

    void validate() const {
        if (log_length < 0.0) throw validation_error("generation: negative length");
        if (n_theta < 64 || (n_l != 0 && n_l < 64))
            throw validation_error("generation: grid must be at least 64x64");
    }
};

struct GeneratedLog {
    LogModel model;
    Heightmap heightmap;
    std::vector<std::vector<LogCentricPoint>> knot_shells;
};

namespace detail {

inline int sample_count(std::mt19937_64& rng, const ScalarNormal& s, int lo, int hi) {
    std::normal_distribution<double> normal(s.mean, std::max(s.sd, 1e-9));
    const int v = static_cast<int>(std::lround(normal(rng)));
    return std::clamp(v, lo, hi);
}

}  // namespace detail

/// Ordered generation pipeline: centerline, thickness + whorl layout, base
/// shape, knot hierarchy, per-knot surface intersection, surface knots,
/// grain. Invalid draws are regenerated a bounded number of times.
inline GeneratedLog generate_log(const ModelStatistics& stats, const GenerationConfig& cfg = {}) {
    stats.validate();
    cfg.validate();
    std::mt19937_64 rng(derive_seed(cfg.seed, 0x10de));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const double length = cfg.log_length > 0.0
                              ? cfg.log_length
                              : stats.length_min + (stats.length_max - stats.length_min) * unit(rng);
    const int n_l = cfg.n_l > 0 ? cfg.n_l : std::max(64, static_cast<int>(length / 10.0));

    LogModel model;
    model.name = "generated";
    model.source = "generate";
    model.seed = cfg.seed;
    model.dc_source = LogModel::DcSource::Thickness;
    model.grain = stats.grain;
    model.grain.seed = rng();
    GeneratedLog out;

    // 1) centerline
    {
        const Eigen::VectorXd coeffs = sample_mvn_cov(stats.centerline.mean, stats.centerline.cov, rng);
        model.centerline.n = stats.centerline_n;
        model.centerline.coeffs_y = coeffs.head(stats.centerline_n);
        model.centerline.coeffs_z = coeffs.tail(stats.centerline_n);
        model.centerline.x_min = 0.0;
        model.centerline.x_max = length;
    }

    // 2) thickness line and whorl layout
    for (int attempt = 0;; ++attempt) {
        const Eigen::VectorXd line = sample_mvn_cov(stats.thickness_line.mean, stats.thickness_line.cov, rng);
        model.thickness.a = line[0];
        model.thickness.b = line[1];
        if (model.thickness.b > 10.0 && model.thickness.a * length + model.thickness.b > 10.0)
            break;
        if (attempt >= cfg.max_attempts)
            throw numeric_error("generate_log: could not draw a physical thickness line");
    }
    {
        std::normal_distribution<double> ln_gap(stats.whorl_spacing_ln.mean,
                                                std::max(stats.whorl_spacing_ln.sd, 1e-9));
        double pos = cfg.end_margin + std::exp(ln_gap(rng)) * unit(rng);
        while (pos < length - cfg.end_margin) {
            ThicknessModel::Cluster cl;
            cl.center = pos;
            const Eigen::VectorXd g =
                sample_mvn_cov(stats.thickness_cluster.mean, stats.thickness_cluster.cov, rng);
            cl.alpha = std::max(g[0], 0.0);
            cl.beta = std::clamp(g[1], -80.0, 80.0);
            cl.gamma = std::clamp(std::exp(g[2]), 5.0, 400.0);
            model.thickness.clusters.push_back(cl);
            pos += std::exp(ln_gap(rng));
        }
    }

    // 3) base-shape coefficients from independent normals
    {
        std::normal_distribution<double> normal(0.0, 1.0);
        model.base_shape.n_fourier = stats.base_n_fourier;
        model.base_shape.m_cheb = stats.base_m_cheb;
        model.base_shape.l_min = 0.0;
        model.base_shape.l_max = length;
        model.base_shape.coeffs_cos.resize(stats.base_m_cheb, stats.base_n_fourier);
        model.base_shape.coeffs_sin.resize(stats.base_m_cheb, stats.base_n_fourier);
        for (int q = 0; q < stats.base_m_cheb; ++q)
            for (int k = 0; k < stats.base_n_fourier; ++k) {
                model.base_shape.coeffs_cos(q, k) =
                    stats.base_cos_mean(q, k) + stats.base_cos_sd(q, k) * normal(rng);
                model.base_shape.coeffs_sin(q, k) =
                    (k == 0) ? 0.0
                             : stats.base_sin_mean(q, k) + stats.base_sin_sd(q, k) * normal(rng);
            }
    }

    // base surface (no knots, no grain) for the surface intersections
    GrainConfig no_grain = model.grain;
    no_grain.amplitude = 0.0;
    ComposeOptions base_opts;
    base_opts.thickness_dc = &model.thickness;
    base_opts.include_grain = false;
    const Heightmap base_surface =
        compose_heightmap(model.base_shape, {}, no_grain, cfg.n_theta, n_l, base_opts);

    // 4) knot parameter hierarchy over the whorls
    const int n_clusters = static_cast<int>(model.thickness.clusters.size());
    if (n_clusters > 0) {
        std::vector<int> per_cluster(static_cast<size_t>(n_clusters));
        for (auto& c : per_cluster) c = detail::sample_count(rng, stats.knots_per_cluster, 1, 12);
        const auto hierarchy =
            sample_knot_hierarchy(stats.knot_params, rng, n_clusters, per_cluster);

        int knot_id = 0;
        for (int c = 0; c < n_clusters; ++c) {
            const double center = model.thickness.clusters[static_cast<size_t>(c)].center;
            for (const auto& sampled : hierarchy[static_cast<size_t>(c)]) {
                // 5) place the knot and intersect it with the base surface
                bool placed = false;
                for (int attempt = 0; attempt < cfg.max_attempts && !placed; ++attempt) {
                    ModelKnot mk;
                    mk.params = sampled.params;
                    mk.theta_mean = kTwoPi * unit(rng);
                    // late attempts fall back to the whorl center itself
                    const double offset =
                        attempt < cfg.max_attempts / 2 ? sampled.params.l0 : 0.0;
                    mk.params.l0 = std::clamp(center + offset, cfg.end_margin * 0.5,
                                              length - cfg.end_margin * 0.5);
                    try {
                        const SurfaceRise rise =
                            surface_rise(base_surface, mk.theta_mean, mk.params.l0, sampled.tau);
                        mk.params.rho_max = rise.rho_max;
                        mk.delta_l = rise.delta_l;
                        mk.knot_id = knot_id;
                        mk.cluster_id = c;
                        resolve_knot(mk.params, mk.delta_l);  // validates
                        model.knots.push_back(mk);
                        placed = true;
                    } catch (const validation_error&) {
                    }
                }
                if (!placed)
                    throw numeric_error("generate_log: knot placement failed repeatedly");
                ++knot_id;
            }
        }

        // 6) surface knots at the intersections
        for (const auto& mk : model.knots) {
            const Eigen::VectorXd z = sample_mvn_cov(stats.surface_knot.mean, stats.surface_knot.cov, rng);
            const Eigen::VectorXd raw = to_external(surface_knot_transforms(), z);
            SurfaceKnot sk;
            sk.alpha_theta = raw[0];
            sk.alpha_l = raw[1];
            sk.m = raw[2];
            sk.amplitude = raw[3];
            sk.theta = normalize_angle(mk.theta_mean + mk.params.s0 / mk.params.rho_max);
            sk.l = std::clamp(mk.params.l0 + mk.delta_l, 0.0, length);
            sk.r_theta = mk.params.r_max;
            sk.r_l = mk.params.gamma * mk.params.r_max;
            model.surface_knots.push_back(sk);
        }
    }

    // 7) full composition with grain
    ComposeOptions full_opts;
    full_opts.thickness_dc = &model.thickness;
    full_opts.include_grain = true;
    out.heightmap =
        compose_heightmap(model.base_shape, model.surface_knots, model.grain, cfg.n_theta, n_l, full_opts);

    // 8) labeled knot geometry
    for (const auto& mk : model.knots) {
        const ResolvedKnot resolved = resolve_knot(mk.params, mk.delta_l);
        out.knot_shells.push_back(knot_body_points(resolved, mk.theta_mean, cfg.body_samples_axis,
                                                   cfg.body_samples_angle));
    }

    model.validate();
    out.model = std::move(model);
    return out;
}

/// Stratified random sampling of a heightmap surface, converted to Cartesian
/// through the model's centerline. Expected point count is density times the
/// surface area.
inline std::vector<CartesianPoint> sample_surface_points(const LogModel& model, const Heightmap& h,
                                                         double density, std::mt19937_64& rng) {
    if (!(density > 0.0)) throw std::invalid_argument("sample_surface_points: density must be > 0");
    const CenterlineFrame frame(model.centerline);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<CartesianPoint> out;
    const double dldth = h.cell_l() * h.cell_theta();
    for (int i = 0; i < h.n_l; ++i) {
        for (int j = 0; j < h.n_theta; ++j) {
            const double area = dldth * h.values(i, j);  // cell area in mm^2
            const double expected = density * area;
            int count = static_cast<int>(expected);
            if (unit(rng) < expected - count) ++count;
            for (int p = 0; p < count; ++p) {
                LogCentricPoint q;
                q.theta = normalize_angle((j + unit(rng)) * h.cell_theta());
                q.l = h.l_min + (i + unit(rng)) * h.cell_l();
                q.rho = heightmap_sample(h, q.theta, q.l);
                out.push_back(from_log_centric(q, frame));
            }
        }
    }
    return out;
}

}  // namespace logsynth
