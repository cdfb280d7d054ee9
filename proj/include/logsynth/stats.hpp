#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "logsynth/common.hpp"
#include "logsynth/grain.hpp"
#include "logsynth/knot_model.hpp"
#include "logsynth/model.hpp"
#include "logsynth/optim.hpp"

namespace logsynth {

// ---------------------------------------------------------------------------
// parameter-space transforms
//
// Knot statistics are fitted and sampled in a per-dimension transformed space
// (logit for the bounded ratios, log for the positive scales), so every draw
// maps back into a valid parameter box without rejection or clipping.
// Vector layout: [s0, l0 - cluster_center, ln gamma', ln rho_max', logit phi0,
// logit phi1, ln r_max', logit psi0, logit psi1, tau] where ' marks the raw
// value. tau is the mean incline angle atan(delta_l / rho_max); it is not one
// of the nine shape parameters but generation needs it.
// ---------------------------------------------------------------------------

inline const std::vector<ParamTransform>& knot_param_transforms() {
    static const std::vector<ParamTransform> transforms = {
        ParamTransform::identity(),           // s0
        ParamTransform::identity(),           // l0 offset from cluster center
        ParamTransform::log_positive(),       // gamma
        ParamTransform::log_positive(),       // rho_max
        ParamTransform::logit_box(0.0, 1.0),  // phi0
        ParamTransform::logit_box(0.0, 1.0),  // phi1
        ParamTransform::log_positive(),       // r_max
        ParamTransform::logit_box(0.0, 1.0),  // psi0
        ParamTransform::logit_box(0.0, 1.0),  // psi1
        ParamTransform::identity(),           // tau
    };
    return transforms;
}

inline constexpr int kKnotStatDim = 10;

inline Eigen::VectorXd knot_params_to_vector(const KnotParams& p, double tau,
                                             double cluster_center) {
    Eigen::VectorXd raw(kKnotStatDim);
    raw << p.s0, p.l0 - cluster_center, p.gamma, p.rho_max, p.phi0, p.phi1, p.r_max, p.psi0,
        p.psi1, tau;
    return to_internal(knot_param_transforms(), raw);
}

struct SampledKnot {
    KnotParams params;  // l0 holds the offset from the cluster center
    double tau = 0.0;
};

inline SampledKnot knot_vector_to_params(const Eigen::VectorXd& z) {
    if (z.size() != kKnotStatDim)
        throw std::invalid_argument("knot_vector_to_params: wrong dimension");
    const Eigen::VectorXd raw = to_external(knot_param_transforms(), z);
    for (int i = 0; i < raw.size(); ++i)
        if (!std::isfinite(raw[i]))
            throw numeric_error("knot parameter sample non-finite in dimension " +
                                std::to_string(i));
    SampledKnot out;
    out.params.s0 = raw[0];
    out.params.l0 = raw[1];
    out.params.gamma = raw[2];
    out.params.rho_max = raw[3];
    out.params.phi0 = raw[4];
    out.params.phi1 = raw[5];
    out.params.r_max = raw[6];
    out.params.psi0 = raw[7];
    out.params.psi1 = raw[8];
    out.tau = raw[9];
    return out;
}

/// Surface-knot statistics space: [logit alpha_theta, logit alpha_l,
/// logit-box m, ln amplitude].
inline const std::vector<ParamTransform>& surface_knot_transforms() {
    static const std::vector<ParamTransform> transforms = {
        ParamTransform::logit_box(0.02, 0.98),
        ParamTransform::logit_box(0.02, 0.98),
        ParamTransform::logit_box(1.005, 30.0),
        ParamTransform::log_positive(),
    };
    return transforms;
}

// ---------------------------------------------------------------------------
// correlation utilities and multivariate normal sampling
// ---------------------------------------------------------------------------

/// Clips negative eigenvalues and renormalizes the diagonal to one. A matrix
/// that is already positive semi-definite comes back essentially unchanged.
inline Eigen::MatrixXd psd_repair_correlation(const Eigen::MatrixXd& p) {
    Eigen::MatrixXd sym = 0.5 * (p + p.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    Eigen::VectorXd vals = eig.eigenvalues();
    bool clipped = false;
    for (int i = 0; i < vals.size(); ++i)
        if (vals[i] < 0.0) {
            vals[i] = 1e-12;
            clipped = true;
        }
    if (!clipped) return sym;
    Eigen::MatrixXd repaired =
        eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
    for (int i = 0; i < repaired.rows(); ++i) {
        const double d = std::sqrt(std::max(repaired(i, i), 1e-12));
        repaired.row(i) /= d;
        repaired.col(i) /= d;
    }
    return 0.5 * (repaired + repaired.transpose());
}

/// Lower-triangular factor of a covariance, eigendecomposition fallback for
/// semi-definite inputs.
inline Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& cov) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (cov + cov.transpose()));
    Eigen::VectorXd vals = eig.eigenvalues();
    const double floor = -1e-8 * std::max(1.0, vals.cwiseAbs().maxCoeff());
    for (int i = 0; i < vals.size(); ++i) {
        if (vals[i] < floor) throw numeric_error("covariance is not positive semi-definite");
        vals[i] = std::sqrt(std::max(vals[i], 0.0));
    }
    return eig.eigenvectors() * vals.asDiagonal();
}

inline Eigen::VectorXd sample_mvn_cov(const Eigen::VectorXd& mu, const Eigen::MatrixXd& cov,
                                      std::mt19937_64& rng) {
    if (cov.rows() != mu.size() || cov.cols() != mu.size())
        throw std::invalid_argument("sample_mvn: dimension mismatch");
    const Eigen::MatrixXd factor = covariance_factor(cov);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd z(mu.size());
    for (int i = 0; i < z.size(); ++i) z[i] = normal(rng);
    return mu + factor * z;
}

/// Draw from N(mu, (sigma sigma^T) .* P).
inline Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mu, const Eigen::VectorXd& sigma,
                                  const Eigen::MatrixXd& p, std::mt19937_64& rng) {
    if (sigma.size() != mu.size() || p.rows() != mu.size() || p.cols() != mu.size())
        throw std::invalid_argument("sample_mvn: dimension mismatch");
    const Eigen::MatrixXd cov =
        (sigma * sigma.transpose()).cwiseProduct(psd_repair_correlation(p));
    return sample_mvn_cov(mu, cov, rng);
}

// ---------------------------------------------------------------------------
// hierarchical statistics
// ---------------------------------------------------------------------------

/// Compound Gaussian over knot parameters: each cluster draws its own mean
/// and standard-deviation vectors from the global level, knots within the
/// cluster share them through X ~ N(mu_c, (sigma_c sigma_c^T) .* P).
struct HierarchicalGaussian {
    int dimension = 0;
    Eigen::VectorXd global_mu_mean;
    Eigen::VectorXd global_mu_sd;
    Eigen::VectorXd global_sigma_mean;
    Eigen::VectorXd global_sigma_sd;
    Eigen::MatrixXd correlation;
    std::vector<std::string> levels = {"log", "cluster", "knot"};
    long knot_count = 0;
    long cluster_count = 0;
    bool mu_sd_defaulted = false;     // fewer than 2 clusters
    bool sigma_defaulted = false;     // no cluster had 2+ knots

    void validate() const {
        if (dimension < 1) throw validation_error("hierarchical gaussian: empty dimension");
        const auto expect_dim = [&](const Eigen::VectorXd& v, const char* name) {
            if (v.size() != dimension)
                throw validation_error(std::string("hierarchical gaussian: bad size of ") + name);
        };
        expect_dim(global_mu_mean, "global_mu_mean");
        expect_dim(global_mu_sd, "global_mu_sd");
        expect_dim(global_sigma_mean, "global_sigma_mean");
        expect_dim(global_sigma_sd, "global_sigma_sd");
        if (global_mu_sd.minCoeff() < 0.0 || global_sigma_sd.minCoeff() < 0.0 ||
            global_sigma_mean.minCoeff() < 0.0)
            throw validation_error("hierarchical gaussian: negative standard deviation");
        if (correlation.rows() != dimension || correlation.cols() != dimension)
            throw validation_error("hierarchical gaussian: correlation shape mismatch");
        for (int i = 0; i < dimension; ++i) {
            if (std::abs(correlation(i, i) - 1.0) > 1e-9)
                throw validation_error("hierarchical gaussian: correlation diagonal must be 1");
            for (int j = 0; j < dimension; ++j)
                if (std::abs(correlation(i, j) - correlation(j, i)) > 1e-9)
                    throw validation_error("hierarchical gaussian: correlation not symmetric");
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(correlation);
        if (eig.eigenvalues().minCoeff() < -1e-8)
            throw validation_error("hierarchical gaussian: correlation not PSD");
    }
};

/// One cluster of knot-parameter vectors in the transformed space.
struct KnotCluster {
    std::vector<Eigen::VectorXd> knots;
};

/// Method-of-moments fit of the hierarchy: cluster means give the
/// distribution of mu, within-cluster standard deviations the distribution of
/// sigma, and the correlation is pooled from within-cluster standardized
/// residuals with 1/n shrinkage toward the identity.
inline HierarchicalGaussian fit_knot_hierarchy(const std::vector<KnotCluster>& clusters) {
    if (clusters.empty()) throw std::invalid_argument("fit_knot_hierarchy: no clusters");
    const int d = static_cast<int>(clusters.front().knots.at(0).size());

    HierarchicalGaussian hg;
    hg.dimension = d;

    std::vector<Eigen::VectorXd> mus;
    std::vector<Eigen::VectorXd> sigmas;
    std::vector<Eigen::VectorXd> standardized;
    long total = 0;
    for (const auto& c : clusters) {
        if (c.knots.empty()) continue;
        total += static_cast<long>(c.knots.size());
        Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
        for (const auto& k : c.knots) mu += k;
        mu /= static_cast<double>(c.knots.size());
        mus.push_back(mu);
        if (c.knots.size() >= 2) {
            Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
            for (const auto& k : c.knots) var += (k - mu).cwiseAbs2();
            var /= static_cast<double>(c.knots.size() - 1);
            const Eigen::VectorXd sd = var.cwiseSqrt();
            sigmas.push_back(sd);
            for (const auto& k : c.knots) {
                Eigen::VectorXd z = k - mu;
                for (int i = 0; i < d; ++i) z[i] /= std::max(sd[i], 1e-9);
                standardized.push_back(z);
            }
        }
    }
    if (mus.empty()) throw std::invalid_argument("fit_knot_hierarchy: no populated clusters");

    hg.cluster_count = static_cast<long>(mus.size());
    hg.knot_count = total;

    const auto moments = [d](const std::vector<Eigen::VectorXd>& xs, Eigen::VectorXd& mean,
                             Eigen::VectorXd& sd) {
        mean = Eigen::VectorXd::Zero(d);
        for (const auto& x : xs) mean += x;
        mean /= static_cast<double>(xs.size());
        sd = Eigen::VectorXd::Zero(d);
        if (xs.size() >= 2) {
            for (const auto& x : xs) sd += (x - mean).cwiseAbs2();
            sd = (sd / static_cast<double>(xs.size() - 1)).cwiseSqrt();
        }
    };
    moments(mus, hg.global_mu_mean, hg.global_mu_sd);
    hg.mu_sd_defaulted = mus.size() < 2;

    if (!sigmas.empty()) {
        moments(sigmas, hg.global_sigma_mean, hg.global_sigma_sd);
        if (sigmas.size() < 2) hg.global_sigma_sd.setZero();
    } else {
        hg.global_sigma_mean = Eigen::VectorXd::Zero(d);
        hg.global_sigma_sd = Eigen::VectorXd::Zero(d);
        hg.sigma_defaulted = true;
    }

    hg.correlation = Eigen::MatrixXd::Identity(d, d);
    if (standardized.size() >= 3) {
        Eigen::VectorXd mean, sd;
        moments(standardized, mean, sd);
        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
        for (const auto& z : standardized) {
            const Eigen::VectorXd c = z - mean;
            cov += c * c.transpose();
        }
        cov /= static_cast<double>(standardized.size() - 1);
        Eigen::MatrixXd corr(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                corr(i, j) =
                    cov(i, j) / std::max(std::sqrt(cov(i, i) * cov(j, j)), 1e-12);
        const double shrink = 1.0 / static_cast<double>(standardized.size());
        corr = (1.0 - shrink) * corr + shrink * Eigen::MatrixXd::Identity(d, d);
        hg.correlation = psd_repair_correlation(corr);
        for (int i = 0; i < d; ++i) hg.correlation(i, i) = 1.0;
    }
    return hg;
}

/// Draws n_clusters cluster-level (mu, sigma) pairs, then knots within each,
/// in the transformed space. Cluster sigma draws are truncated at zero.
inline std::vector<std::vector<Eigen::VectorXd>> sample_knot_hierarchy_raw(
    const HierarchicalGaussian& hg, std::mt19937_64& rng, int n_clusters,
    const std::vector<int>& knots_per_cluster) {
    hg.validate();
    if (n_clusters < 1 || static_cast<int>(knots_per_cluster.size()) != n_clusters)
        throw std::invalid_argument("sample_knot_hierarchy: bad cluster layout");

    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::vector<Eigen::VectorXd>> out;
    out.reserve(static_cast<size_t>(n_clusters));
    for (int c = 0; c < n_clusters; ++c) {
        Eigen::VectorXd mu(hg.dimension), sigma(hg.dimension);
        for (int i = 0; i < hg.dimension; ++i) {
            mu[i] = hg.global_mu_mean[i] + hg.global_mu_sd[i] * normal(rng);
            sigma[i] =
                std::max(0.0, hg.global_sigma_mean[i] + hg.global_sigma_sd[i] * normal(rng));
        }
        std::vector<Eigen::VectorXd> cluster;
        cluster.reserve(static_cast<size_t>(knots_per_cluster[static_cast<size_t>(c)]));
        for (int k = 0; k < knots_per_cluster[static_cast<size_t>(c)]; ++k)
            cluster.push_back(sample_mvn(mu, sigma, hg.correlation, rng));
        out.push_back(std::move(cluster));
    }
    return out;
}

/// Same draw mapped back through the parameter transforms, so every returned
/// knot satisfies its parameter boxes by construction.
inline std::vector<std::vector<SampledKnot>> sample_knot_hierarchy(
    const HierarchicalGaussian& hg, std::mt19937_64& rng, int n_clusters,
    const std::vector<int>& knots_per_cluster) {
    const auto raw = sample_knot_hierarchy_raw(hg, rng, n_clusters, knots_per_cluster);
    std::vector<std::vector<SampledKnot>> out;
    out.reserve(raw.size());
    for (const auto& cluster : raw) {
        std::vector<SampledKnot> mapped;
        mapped.reserve(cluster.size());
        for (const auto& z : cluster) mapped.push_back(knot_vector_to_params(z));
        out.push_back(std::move(mapped));
    }
    return out;
}

// ---------------------------------------------------------------------------
// whole-model statistics
// ---------------------------------------------------------------------------

struct MvnStats {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    long count = 0;
    bool defaulted = false;

    void validate() const {
        if (mean.size() == 0) throw validation_error("mvn stats: empty mean");
        if (cov.rows() != mean.size() || cov.cols() != mean.size())
            throw validation_error("mvn stats: covariance shape mismatch");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (cov + cov.transpose()));
        if (eig.eigenvalues().minCoeff() < -1e-8 * std::max(1.0, cov.cwiseAbs().maxCoeff()))
            throw validation_error("mvn stats: covariance not PSD");
    }

    static MvnStats from_samples(const std::vector<Eigen::VectorXd>& xs) {
        if (xs.empty()) throw std::invalid_argument("MvnStats: no samples");
        const int d = static_cast<int>(xs.front().size());
        MvnStats s;
        s.count = static_cast<long>(xs.size());
        s.mean = Eigen::VectorXd::Zero(d);
        for (const auto& x : xs) s.mean += x;
        s.mean /= static_cast<double>(xs.size());
        s.cov = Eigen::MatrixXd::Zero(d, d);
        if (xs.size() >= 2) {
            for (const auto& x : xs) {
                const Eigen::VectorXd c = x - s.mean;
                s.cov += c * c.transpose();
            }
            s.cov /= static_cast<double>(xs.size() - 1);
        } else {
            s.defaulted = true;
        }
        return s;
    }
};

struct ScalarNormal {
    double mean = 0.0;
    double sd = 0.0;
    long count = 0;
    bool defaulted = false;
};

inline ScalarNormal scalar_normal_from(const std::vector<double>& xs) {
    ScalarNormal s;
    s.count = static_cast<long>(xs.size());
    if (xs.empty()) {
        s.defaulted = true;
        return s;
    }
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    if (xs.size() >= 2) {
        double var = 0.0;
        for (double x : xs) var += (x - s.mean) * (x - s.mean);
        s.sd = std::sqrt(var / static_cast<double>(xs.size() - 1));
    } else {
        s.defaulted = true;
    }
    return s;
}

/// Everything needed to synthesize new logs: the knot hierarchy, surface-knot
/// and centerline MVNs, independent normals per base-shape coefficient,
/// thickness statistics, whorl layout distributions and size ranges.
struct ModelStatistics {
    HierarchicalGaussian knot_params;
    MvnStats surface_knot;   // transformed space, see surface_knot_transforms()
    MvnStats centerline;     // [coeffs_y; coeffs_z], 2n entries
    int centerline_n = 5;
    Eigen::MatrixXd base_cos_mean, base_cos_sd;  // m_cheb x n_fourier
    Eigen::MatrixXd base_sin_mean, base_sin_sd;
    int base_n_fourier = 10;
    int base_m_cheb = 10;
    MvnStats thickness_line;     // (a, b)
    MvnStats thickness_cluster;  // (alpha, beta, ln gamma)
    ScalarNormal whorl_spacing_ln;   // of ln(spacing in mm)
    ScalarNormal knots_per_cluster;
    double length_min = 3000.0;
    double length_max = 5000.0;
    GrainConfig grain;
    long log_count = 0;

    void validate() const {
        knot_params.validate();
        surface_knot.validate();
        centerline.validate();
        thickness_line.validate();
        thickness_cluster.validate();
        if (centerline.mean.size() != 2 * centerline_n)
            throw validation_error("model statistics: centerline dimension mismatch");
        if (base_cos_mean.rows() != base_m_cheb || base_cos_mean.cols() != base_n_fourier ||
            base_cos_sd.rows() != base_m_cheb || base_sin_mean.rows() != base_m_cheb)
            throw validation_error("model statistics: base-shape stat shape mismatch");
        if (!(length_max >= length_min) || length_min <= 0.0)
            throw validation_error("model statistics: bad length range");
        if ((base_cos_sd.array() < 0.0).any() || (base_sin_sd.array() < 0.0).any())
            throw validation_error("model statistics: negative base-shape sd");
        grain.validate();
    }
};

/// Hand-tuned statistics in the spirit of mid-size Scots pine sawlogs. Used
/// as the generation prior when no fitted statistics are available and by the
/// self-consistency tests.
inline ModelStatistics reference_statistics() {
    ModelStatistics s;
    const auto& kt = knot_param_transforms();

    Eigen::VectorXd mu(kKnotStatDim), mu_sd(kKnotStatDim), sg(kKnotStatDim), sg_sd(kKnotStatDim);
    // raw-space anchors: s0 0, l0 offset 0, gamma 1.3, rho_max 85, phi0 0.5,
    // phi1 0.55, r_max 14, psi0 0.6, psi1 0.6, tau 0.42
    const double anchors[kKnotStatDim] = {0.0, 0.0, 1.3, 85.0, 0.5, 0.55, 14.0, 0.6, 0.6, 0.42};
    for (int i = 0; i < kKnotStatDim; ++i) mu[i] = kt[static_cast<size_t>(i)].to_internal(anchors[i]);
    mu_sd << 4.0, 12.0, 0.10, 0.10, 0.30, 0.30, 0.18, 0.30, 0.30, 0.07;
    sg << 5.0, 16.0, 0.08, 0.06, 0.35, 0.35, 0.14, 0.35, 0.35, 0.05;
    sg_sd = 0.3 * sg;

    HierarchicalGaussian hg;
    hg.dimension = kKnotStatDim;
    hg.global_mu_mean = mu;
    hg.global_mu_sd = mu_sd;
    hg.global_sigma_mean = sg;
    hg.global_sigma_sd = sg_sd;
    hg.correlation = Eigen::MatrixXd::Identity(kKnotStatDim, kKnotStatDim);
    hg.correlation(3, 6) = hg.correlation(6, 3) = 0.4;   // bigger exit radius, bigger knot
    hg.correlation(5, 8) = hg.correlation(8, 5) = 0.3;   // endpoint inclines move together
    hg.correlation = psd_repair_correlation(hg.correlation);
    hg.knot_count = 0;
    hg.cluster_count = 0;
    s.knot_params = hg;

    const auto& st = surface_knot_transforms();
    Eigen::VectorXd sk_mu(4);
    sk_mu << st[0].to_internal(0.45), st[1].to_internal(0.5), st[2].to_internal(2.5),
        st[3].to_internal(1.5);
    MvnStats sk;
    sk.mean = sk_mu;
    sk.cov = Eigen::Vector4d(0.09, 0.09, 0.16, 0.09).asDiagonal();
    sk.defaulted = true;
    s.surface_knot = sk;

    s.centerline_n = 5;
    MvnStats cl;
    cl.mean = Eigen::VectorXd::Zero(10);
    Eigen::VectorXd cl_sd(10);
    cl_sd << 8.0, 4.0, 2.0, 1.0, 0.5, 8.0, 4.0, 2.0, 1.0, 0.5;
    cl.cov = cl_sd.cwiseAbs2().asDiagonal();
    cl.defaulted = true;
    s.centerline = cl;

    s.base_n_fourier = 10;
    s.base_m_cheb = 10;
    s.base_cos_mean.setZero(10, 10);
    s.base_cos_sd.setZero(10, 10);
    s.base_sin_mean.setZero(10, 10);
    s.base_sin_sd.setZero(10, 10);
    for (int q = 0; q < 10; ++q) {
        for (int k = 1; k < 10; ++k) {
            const double sd = 1.2 / ((1.0 + q) * (1.0 + k));
            s.base_cos_sd(q, k) = sd;
            s.base_sin_sd(q, k) = sd;
        }
        // DC band is replaced by the thickness profile during generation;
        // keep mild statistics anyway so fitted-style models can be sampled
        s.base_cos_sd(q, 0) = (q == 0) ? 4.0 : 1.0 / (1.0 + q);
    }
    s.base_cos_mean(0, 0) = 145.0;

    MvnStats line;
    line.mean = Eigen::Vector2d(-0.004, 150.0);
    line.cov = Eigen::Vector2d(1e-6, 36.0).asDiagonal();
    line.defaulted = true;
    s.thickness_line = line;

    MvnStats cluster;
    cluster.mean = Eigen::Vector3d(2.5, 0.0, std::log(50.0));
    cluster.cov = Eigen::Vector3d(0.64, 100.0, 0.0625).asDiagonal();
    cluster.defaulted = true;
    s.thickness_cluster = cluster;

    s.whorl_spacing_ln = {std::log(480.0), 0.22, 0, true};
    s.knots_per_cluster = {4.5, 1.4, 0, true};
    s.length_min = 3600.0;
    s.length_max = 4400.0;
    s.grain = GrainConfig{};
    s.log_count = 0;
    return s;
}

/// Pools fitted models into generation statistics. Knots group into clusters
/// per log (stored ids); knots without a cluster id become singletons.
inline ModelStatistics fit_statistics(const std::vector<LogModel>& models) {
    if (models.empty()) throw std::invalid_argument("fit_statistics: no models");

    ModelStatistics s;
    s.log_count = static_cast<long>(models.size());

    // --- knot hierarchy ---
    std::vector<KnotCluster> clusters;
    for (const auto& model : models) {
        std::map<int, std::vector<const ModelKnot*>> groups;
        int synthetic_id = -2;
        for (const auto& k : model.knots) {
            const int id = k.cluster_id >= 0 ? k.cluster_id : synthetic_id--;
            groups[id].push_back(&k);
        }
        for (const auto& [id, members] : groups) {
            double center = 0.0;
            for (const auto* k : members) center += k->params.l0;
            center /= static_cast<double>(members.size());
            KnotCluster c;
            for (const auto* k : members)
                c.knots.push_back(knot_params_to_vector(k->params, k->tau(), center));
            clusters.push_back(std::move(c));
        }
    }
    if (clusters.empty()) throw std::invalid_argument("fit_statistics: models contain no knots");
    s.knot_params = fit_knot_hierarchy(clusters);

    // --- surface knots ---
    {
        const auto& tr = surface_knot_transforms();
        std::vector<Eigen::VectorXd> xs;
        for (const auto& model : models)
            for (const auto& sk : model.surface_knots) {
                if (sk.degenerate || !(sk.amplitude > 1e-6)) continue;
                Eigen::VectorXd raw(4);
                raw << sk.alpha_theta, sk.alpha_l, sk.m, sk.amplitude;
                xs.push_back(to_internal(tr, raw));
            }
        if (xs.empty()) {
            s.surface_knot = reference_statistics().surface_knot;
            s.surface_knot.defaulted = true;
        } else {
            s.surface_knot = MvnStats::from_samples(xs);
        }
    }

    // --- centerline coefficients ---
    {
        s.centerline_n = models.front().centerline.n;
        std::vector<Eigen::VectorXd> xs;
        for (const auto& model : models) {
            if (model.centerline.n != s.centerline_n)
                throw validation_error("fit_statistics: centerline degree mismatch across models");
            Eigen::VectorXd v(2 * s.centerline_n);
            v << model.centerline.coeffs_y, model.centerline.coeffs_z;
            xs.push_back(v);
        }
        s.centerline = MvnStats::from_samples(xs);
    }

    // --- base-shape coefficients, independently distributed ---
    {
        const auto& first = models.front().base_shape;
        s.base_n_fourier = first.n_fourier;
        s.base_m_cheb = first.m_cheb;
        s.base_cos_mean.setZero(first.m_cheb, first.n_fourier);
        s.base_sin_mean.setZero(first.m_cheb, first.n_fourier);
        s.base_cos_sd.setZero(first.m_cheb, first.n_fourier);
        s.base_sin_sd.setZero(first.m_cheb, first.n_fourier);
        for (const auto& model : models) {
            if (model.base_shape.n_fourier != first.n_fourier ||
                model.base_shape.m_cheb != first.m_cheb)
                throw validation_error("fit_statistics: base-shape size mismatch across models");
            s.base_cos_mean += model.base_shape.coeffs_cos;
            s.base_sin_mean += model.base_shape.coeffs_sin;
        }
        s.base_cos_mean /= static_cast<double>(models.size());
        s.base_sin_mean /= static_cast<double>(models.size());
        if (models.size() >= 2) {
            for (const auto& model : models) {
                s.base_cos_sd += (model.base_shape.coeffs_cos - s.base_cos_mean).cwiseAbs2();
                s.base_sin_sd += (model.base_shape.coeffs_sin - s.base_sin_mean).cwiseAbs2();
            }
            s.base_cos_sd = (s.base_cos_sd / static_cast<double>(models.size() - 1)).cwiseSqrt();
            s.base_sin_sd = (s.base_sin_sd / static_cast<double>(models.size() - 1)).cwiseSqrt();
        }
    }

    // --- thickness ---
    {
        std::vector<Eigen::VectorXd> lines, gaussians;
        for (const auto& model : models) {
            lines.push_back(Eigen::Vector2d(model.thickness.a, model.thickness.b));
            for (const auto& c : model.thickness.clusters)
                gaussians.push_back(Eigen::Vector3d(c.alpha, c.beta, std::log(std::max(c.gamma, 1e-3))));
        }
        s.thickness_line = MvnStats::from_samples(lines);
        if (gaussians.empty()) {
            s.thickness_cluster = reference_statistics().thickness_cluster;
            s.thickness_cluster.defaulted = true;
        } else {
            s.thickness_cluster = MvnStats::from_samples(gaussians);
        }
    }

    // --- whorl layout and sizes ---
    {
        std::vector<double> ln_spacings, per_cluster;
        double len_min = 1e300, len_max = 0.0;
        for (const auto& model : models) {
            std::map<int, std::pair<double, long>> by_cluster;
            for (const auto& k : model.knots) {
                if (k.cluster_id < 0) continue;
                auto& slot = by_cluster[k.cluster_id];
                slot.first += k.params.l0;
                slot.second += 1;
            }
            std::vector<double> centers;
            for (const auto& [id, slot] : by_cluster) {
                centers.push_back(slot.first / static_cast<double>(slot.second));
                per_cluster.push_back(static_cast<double>(slot.second));
            }
            std::sort(centers.begin(), centers.end());
            for (size_t i = 1; i < centers.size(); ++i) {
                const double gap = centers[i] - centers[i - 1];
                if (gap > 1.0) ln_spacings.push_back(std::log(gap));
            }
            len_min = std::min(len_min, model.l_max() - model.l_min());
            len_max = std::max(len_max, model.l_max() - model.l_min());
        }
        const ModelStatistics ref = reference_statistics();
        s.whorl_spacing_ln = ln_spacings.empty() ? ref.whorl_spacing_ln
                                                 : scalar_normal_from(ln_spacings);
        s.knots_per_cluster =
            per_cluster.empty() ? ref.knots_per_cluster : scalar_normal_from(per_cluster);
        s.length_min = len_min;
        s.length_max = std::max(len_max, len_min);
    }

    s.grain = models.front().grain;
    return s;
}

}  // namespace logsynth
