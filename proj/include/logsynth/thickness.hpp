#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "logsynth/common.hpp"
#include "logsynth/heightmap.hpp"
#include "logsynth/optim.hpp"

namespace logsynth {

/// Average log radius along l: a line (taper) plus one scaled Gaussian per
/// knot cluster.
struct ThicknessModel {
    struct Cluster {
        double center = 0.0;  // cluster position c_i on l, mm
        double alpha = 0.0;   // peak height, mm
        double beta = 0.0;    // center offset, mm
        double gamma = 50.0;  // width, mm, > 0
    };
    double a = 0.0;  // slope, mm per mm
    double b = 0.0;  // intercept, mm
    std::vector<Cluster> clusters;
};

inline double eval_thickness(const ThicknessModel& t, double l) {
    double value = t.a * l + t.b;
    for (const auto& c : t.clusters) {
        const double d = l - (c.center + c.beta);
        value += c.alpha * std::exp(-d * d / (2.0 * c.gamma * c.gamma));
    }
    return value;
}

struct ThicknessFitResult {
    ThicknessModel model;
    double rmse = 0.0;
};

struct ThicknessFitOptions {
    double gamma_guess = 50.0;    // initial Gaussian width, mm
    double far_factor = 3.0;      // rows farther than far_factor * gamma_guess fit the line
    LMOptions lm;
};

/// Fits Eq.-style thickness to the per-row circumferential mean of a
/// heightmap: line by least squares on rows far from every cluster, then a
/// joint Levenberg-Marquardt polish of the line and all cluster Gaussians.
inline ThicknessFitResult fit_thickness(const Heightmap& h, const std::vector<double>& cluster_centers,
                                        const ThicknessFitOptions& opts = {}) {
    if (h.n_l < 3) throw validation_error("fit_thickness: degenerate heightmap (fewer than 3 rows)");
    for (double c : cluster_centers)
        if (c < h.l_min || c > h.l_max)
            throw std::invalid_argument("fit_thickness: cluster center outside the l-domain");

    Eigen::VectorXd ls(h.n_l), means(h.n_l);
    for (int i = 0; i < h.n_l; ++i) {
        ls[i] = h.l_center(i);
        means[i] = h.values.row(i).mean();
    }

    // line on rows far from every cluster
    std::vector<int> far_rows;
    for (int i = 0; i < h.n_l; ++i) {
        bool far = true;
        for (double c : cluster_centers)
            if (std::abs(ls[i] - c) <= opts.far_factor * opts.gamma_guess) far = false;
        if (far) far_rows.push_back(i);
    }
    if (far_rows.size() < 2)
        throw validation_error("fit_thickness: too few rows away from clusters to fit the taper line");

    Eigen::MatrixXd design(static_cast<Eigen::Index>(far_rows.size()), 2);
    Eigen::VectorXd target(static_cast<Eigen::Index>(far_rows.size()));
    for (size_t r = 0; r < far_rows.size(); ++r) {
        design(static_cast<Eigen::Index>(r), 0) = ls[far_rows[r]];
        design(static_cast<Eigen::Index>(r), 1) = 1.0;
        target[static_cast<Eigen::Index>(r)] = means[far_rows[r]];
    }
    const Eigen::VectorXd line = linear_least_squares(design, target);

    ThicknessModel model;
    model.a = line[0];
    model.b = line[1];
    for (double c : cluster_centers) {
        ThicknessModel::Cluster cl;
        cl.center = c;
        // initialize from the largest residual near the cluster
        double best = 0.0, best_l = c;
        for (int i = 0; i < h.n_l; ++i) {
            if (std::abs(ls[i] - c) > 2.0 * opts.far_factor * opts.gamma_guess) continue;
            const double res = means[i] - (model.a * ls[i] + model.b);
            if (res > best) {
                best = res;
                best_l = ls[i];
            }
        }
        cl.alpha = std::max(best, 0.1);
        cl.beta = best_l - c;
        cl.gamma = opts.gamma_guess;
        model.clusters.push_back(cl);
    }

    // joint polish: [a, b, (alpha, beta, log gamma) per cluster]
    const size_t k = model.clusters.size();
    std::vector<ParamTransform> transforms;
    transforms.push_back(ParamTransform::identity());
    transforms.push_back(ParamTransform::identity());
    for (size_t i = 0; i < k; ++i) {
        transforms.push_back(ParamTransform::identity());      // alpha
        transforms.push_back(ParamTransform::identity());      // beta
        transforms.push_back(ParamTransform::log_positive());  // gamma
    }
    Eigen::VectorXd p0(2 + 3 * static_cast<Eigen::Index>(k));
    p0[0] = model.a;
    p0[1] = model.b;
    for (size_t i = 0; i < k; ++i) {
        p0[2 + 3 * static_cast<Eigen::Index>(i)] = model.clusters[i].alpha;
        p0[3 + 3 * static_cast<Eigen::Index>(i)] = model.clusters[i].beta;
        p0[4 + 3 * static_cast<Eigen::Index>(i)] = model.clusters[i].gamma;
    }
    const auto assemble = [&](const Eigen::VectorXd& p) {
        ThicknessModel m = model;
        m.a = p[0];
        m.b = p[1];
        for (size_t i = 0; i < k; ++i) {
            m.clusters[i].alpha = p[2 + 3 * static_cast<Eigen::Index>(i)];
            m.clusters[i].beta = p[3 + 3 * static_cast<Eigen::Index>(i)];
            m.clusters[i].gamma = p[4 + 3 * static_cast<Eigen::Index>(i)];
        }
        return m;
    };
    const auto residual = [&](const Eigen::VectorXd& z) -> Eigen::VectorXd {
        const ThicknessModel m = assemble(to_external(transforms, z));
        Eigen::VectorXd r(h.n_l);
        for (int i = 0; i < h.n_l; ++i) r[i] = eval_thickness(m, ls[i]) - means[i];
        return r;
    };
    const auto [z_opt, report] = levenberg_marquardt(residual, to_internal(transforms, p0), opts.lm);

    ThicknessFitResult out;
    out.model = assemble(to_external(transforms, z_opt));
    out.rmse = std::sqrt(report.final_cost / h.n_l);
    return out;
}

}  // namespace logsynth
