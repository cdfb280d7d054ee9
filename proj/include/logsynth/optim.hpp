#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

#include "logsynth/common.hpp"

namespace logsynth {

struct LMOptions {
    double lambda_init = 1e-3;
    double lambda_up = 10.0;
    double lambda_down = 0.1;
    int max_iterations = 200;
    double relative_cost_tolerance = 1e-8;
    double step_tolerance = 1e-10;
    double jacobian_step = 1e-6;  // relative forward-difference step
};

/// Outcome of one Levenberg-Marquardt run. cost_trace holds the cost at x0
/// followed by the cost after each accepted step; it is non-increasing.
struct LMReport {
    double final_cost = 0.0;
    int iterations = 0;  // accepted steps
    bool converged = false;
    std::vector<double> cost_trace;
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Minimum-norm least-squares solution of design * x ~= targets via a
/// rank-revealing complete orthogonal decomposition.
inline Eigen::VectorXd linear_least_squares(const Eigen::MatrixXd& design,
                                            const Eigen::VectorXd& targets) {
    if (design.rows() == 0 || design.cols() == 0)
        throw std::invalid_argument("linear_least_squares: empty system");
    if (design.rows() != targets.size())
        throw std::invalid_argument("linear_least_squares: row/target size mismatch");
    if (design.rows() < design.cols())
        throw std::invalid_argument("linear_least_squares: fewer rows than columns");
    if (!design.allFinite() || !targets.allFinite())
        throw std::invalid_argument("linear_least_squares: non-finite entries");
    return design.completeOrthogonalDecomposition().solve(targets);
}

/// Forward-difference Jacobian of residual_fn at x, given the residual r at x.
/// Falls back to a backward step for columns where the forward point is not
/// evaluable.
inline Eigen::MatrixXd forward_difference_jacobian(const ResidualFn& residual_fn,
                                                   const Eigen::VectorXd& x,
                                                   const Eigen::VectorXd& r,
                                                   double relative_step = 1e-6) {
    const int n = static_cast<int>(x.size());
    const int m = static_cast<int>(r.size());
    Eigen::MatrixXd jac(m, n);
    for (int j = 0; j < n; ++j) {
        const double h = relative_step * std::max(std::abs(x[j]), 1.0);
        Eigen::VectorXd xp = x;
        xp[j] += h;
        Eigen::VectorXd rp = residual_fn(xp);
        if (rp.size() != m || !rp.allFinite()) {
            xp[j] = x[j] - h;
            rp = residual_fn(xp);
            if (rp.size() != m || !rp.allFinite())
                throw numeric_error("forward_difference_jacobian: non-finite residual");
            jac.col(j) = (r - rp) / h;
        } else {
            jac.col(j) = (rp - r) / h;
        }
    }
    return jac;
}

/// Damped Gauss-Newton with a forward-difference Jacobian. Steps are accepted
/// only when the cost decreases, so the accepted-step cost trace is monotone.
inline std::pair<Eigen::VectorXd, LMReport> levenberg_marquardt(const ResidualFn& residual_fn,
                                                                const Eigen::VectorXd& x0,
                                                                const LMOptions& opts = {}) {
    Eigen::VectorXd x = x0;
    Eigen::VectorXd r = residual_fn(x);
    if (!r.allFinite())
        throw numeric_error("levenberg_marquardt: residual non-finite at the start point");

    const int n = static_cast<int>(x.size());
    double cost = r.squaredNorm();
    double lambda = opts.lambda_init;

    LMReport report;
    report.cost_trace.push_back(cost);

    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        const Eigen::MatrixXd jac = forward_difference_jacobian(residual_fn, x, r, opts.jacobian_step);

        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd jtr = jac.transpose() * r;
        Eigen::VectorXd diag = jtj.diagonal();
        const double diag_floor = 1e-12 * (diag.maxCoeff() + 1.0);
        for (int j = 0; j < n; ++j) diag[j] = std::max(diag[j], diag_floor);

        bool accepted = false;
        while (!accepted) {
            Eigen::MatrixXd a = jtj;
            a.diagonal() += lambda * diag;
            const Eigen::VectorXd step = a.ldlt().solve(-jtr);
            const Eigen::VectorXd x_new = x + step;
            Eigen::VectorXd r_new = residual_fn(x_new);
            const double cost_new = r_new.allFinite()
                                        ? r_new.squaredNorm()
                                        : std::numeric_limits<double>::infinity();
            if (cost_new < cost) {
                const double cost_change = cost - cost_new;
                x = x_new;
                r = std::move(r_new);
                cost = cost_new;
                lambda = std::max(lambda * opts.lambda_down, 1e-15);
                accepted = true;
                ++report.iterations;
                report.cost_trace.push_back(cost);
                if (cost_change <= opts.relative_cost_tolerance * std::max(cost, 1e-300) ||
                    step.norm() <= opts.step_tolerance * (x.norm() + opts.step_tolerance)) {
                    report.converged = true;
                }
            } else {
                lambda *= opts.lambda_up;
                if (lambda > 1e12) break;  // stuck: cannot decrease along any damping
            }
        }
        if (!accepted || report.converged) {
            if (!accepted) report.converged = true;  // local minimum within tolerance
            break;
        }
    }

    report.final_cost = cost;
    return {x, report};
}

/// Smooth bijections between an unconstrained internal coordinate and a
/// bounded external parameter, used to keep LM unconstrained while fits honor
/// parameter boxes.
struct ParamTransform {
    enum class Kind { Identity, Log, Logit };
    Kind kind = Kind::Identity;
    double lo = 0.0;
    double hi = 1.0;

    static ParamTransform identity() { return {Kind::Identity, 0.0, 0.0}; }
    static ParamTransform log_positive() { return {Kind::Log, 0.0, 0.0}; }
    static ParamTransform logit_box(double lo, double hi) { return {Kind::Logit, lo, hi}; }

    double to_external(double z) const {
        switch (kind) {
            case Kind::Identity: return z;
            case Kind::Log: return std::exp(z);
            case Kind::Logit: return lo + (hi - lo) / (1.0 + std::exp(-z));
        }
        return z;
    }
    double to_internal(double p) const {
        switch (kind) {
            case Kind::Identity: return p;
            case Kind::Log: return std::log(std::max(p, 1e-300));
            case Kind::Logit: {
                double t = (p - lo) / (hi - lo);
                t = std::min(std::max(t, 1e-12), 1.0 - 1e-12);
                return std::log(t / (1.0 - t));
            }
        }
        return p;
    }
};

inline Eigen::VectorXd to_external(const std::vector<ParamTransform>& transforms,
                                   const Eigen::VectorXd& z) {
    Eigen::VectorXd p(z.size());
    for (int i = 0; i < z.size(); ++i) p[i] = transforms[static_cast<size_t>(i)].to_external(z[i]);
    return p;
}

inline Eigen::VectorXd to_internal(const std::vector<ParamTransform>& transforms,
                                   const Eigen::VectorXd& p) {
    Eigen::VectorXd z(p.size());
    for (int i = 0; i < p.size(); ++i) z[i] = transforms[static_cast<size_t>(i)].to_internal(p[i]);
    return z;
}

}  // namespace logsynth
