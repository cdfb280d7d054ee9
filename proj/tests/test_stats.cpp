#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "logsynth/stats.hpp"

using namespace logsynth;

TEST_CASE("mvn sampling with identity correlation has no cross-correlation") {
    Eigen::VectorXd mu(3), sigma(3);
    mu << 1.0, -2.0, 0.5;
    sigma << 1.0, 2.0, 0.5;
    const Eigen::MatrixXd p = Eigen::MatrixXd::Identity(3, 3);
    std::mt19937_64 rng(1);

    const int n = 100000;
    Eigen::MatrixXd samples(n, 3);
    for (int i = 0; i < n; ++i) samples.row(i) = sample_mvn(mu, sigma, p, rng).transpose();
    const Eigen::RowVectorXd mean = samples.colwise().mean();
    const Eigen::MatrixXd centered = samples.rowwise() - mean;
    const Eigen::MatrixXd cov = centered.transpose() * centered / (n - 1);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            if (i == j) continue;
            const double corr = cov(i, j) / std::sqrt(cov(i, i) * cov(j, j));
            REQUIRE(std::abs(corr) < 0.02);
        }
}

TEST_CASE("mvn sampling with zero sigma returns the mean exactly") {
    Eigen::VectorXd mu(4);
    mu << 1.0, 2.0, 3.0, 4.0;
    const Eigen::VectorXd sigma = Eigen::VectorXd::Zero(4);
    const Eigen::MatrixXd p = Eigen::MatrixXd::Identity(4, 4);
    std::mt19937_64 rng(2);
    for (int i = 0; i < 10; ++i) REQUIRE((sample_mvn(mu, sigma, p, rng) - mu).norm() == 0.0);
}

TEST_CASE("mvn empirical covariance matches (sigma sigma^T) .* P") {
    Eigen::VectorXd mu(3), sigma(3);
    mu << 0.0, 1.0, -1.0;
    sigma << 1.5, 0.7, 2.0;
    Eigen::MatrixXd p(3, 3);
    p << 1.0, 0.5, -0.3, 0.5, 1.0, 0.2, -0.3, 0.2, 1.0;
    const Eigen::MatrixXd target = (sigma * sigma.transpose()).cwiseProduct(p);

    std::mt19937_64 rng(3);
    const int n = 100000;
    Eigen::MatrixXd samples(n, 3);
    for (int i = 0; i < n; ++i) samples.row(i) = sample_mvn(mu, sigma, p, rng).transpose();
    const Eigen::RowVectorXd mean = samples.colwise().mean();
    const Eigen::MatrixXd centered = samples.rowwise() - mean;
    const Eigen::MatrixXd cov = centered.transpose() * centered / (n - 1);
    REQUIRE((cov - target).norm() < 0.05 * target.norm());
}

TEST_CASE("psd repair is a near no-op on an already valid correlation") {
    Eigen::MatrixXd p(3, 3);
    p << 1.0, 0.4, 0.1, 0.4, 1.0, -0.2, 0.1, -0.2, 1.0;
    const Eigen::MatrixXd repaired = psd_repair_correlation(p);
    REQUIRE((repaired - p).norm() < 1e-6);
}

TEST_CASE("psd repair fixes a broken correlation") {
    Eigen::MatrixXd p(3, 3);
    p << 1.0, 0.95, -0.95, 0.95, 1.0, 0.95, -0.95, 0.95, 1.0;  // indefinite
    const Eigen::MatrixXd repaired = psd_repair_correlation(p);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(repaired);
    REQUIRE(eig.eigenvalues().minCoeff() > -1e-10);
    for (int i = 0; i < 3; ++i) REQUIRE(std::abs(repaired(i, i) - 1.0) < 1e-9);
}

TEST_CASE("knot parameter transforms round-trip and land in valid boxes") {
    KnotParams p;
    p.s0 = -7.0;
    p.l0 = 1234.0;
    p.gamma = 1.7;
    p.rho_max = 92.0;
    p.phi0 = 0.33;
    p.phi1 = 0.71;
    p.r_max = 18.0;
    p.psi0 = 0.52;
    p.psi1 = 0.44;
    const double tau = 0.37;
    const Eigen::VectorXd z = knot_params_to_vector(p, tau, 1200.0);
    const SampledKnot back = knot_vector_to_params(z);
    REQUIRE(std::abs(back.params.s0 - p.s0) < 1e-9);
    REQUIRE(std::abs(back.params.l0 - (p.l0 - 1200.0)) < 1e-9);
    REQUIRE(std::abs(back.params.gamma - p.gamma) < 1e-9);
    REQUIRE(std::abs(back.params.rho_max - p.rho_max) < 1e-6);
    REQUIRE(std::abs(back.params.phi0 - p.phi0) < 1e-9);
    REQUIRE(std::abs(back.params.psi1 - p.psi1) < 1e-9);
    REQUIRE(std::abs(back.tau - tau) < 1e-12);
}

TEST_CASE("hierarchy fit: a single cluster flags the upper level and keeps sample moments") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal(0.0, 1.0);
    KnotCluster cluster;
    for (int i = 0; i < 40; ++i) {
        Eigen::VectorXd z(3);
        z << 2.0 + 0.5 * normal(rng), -1.0 + 0.2 * normal(rng), 0.1 * normal(rng);
        cluster.knots.push_back(z);
    }
    const HierarchicalGaussian hg = fit_knot_hierarchy({cluster});
    REQUIRE(hg.mu_sd_defaulted);
    REQUIRE(hg.global_mu_sd.cwiseAbs().maxCoeff() == 0.0);

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(3), sd = Eigen::VectorXd::Zero(3);
    for (const auto& k : cluster.knots) mean += k;
    mean /= 40.0;
    for (const auto& k : cluster.knots) sd += (k - mean).cwiseAbs2();
    sd = (sd / 39.0).cwiseSqrt();
    REQUIRE((hg.global_mu_mean - mean).norm() < 1e-12);
    REQUIRE((hg.global_sigma_mean - sd).norm() < 1e-12);
}

TEST_CASE("hierarchy fit recovers generator truth within three standard errors") {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int d = 3;
    Eigen::VectorXd mu_mean(d), mu_sd(d), sg_mean(d);
    mu_mean << 1.0, -0.5, 2.0;
    mu_sd << 0.6, 0.3, 0.9;
    sg_mean << 0.4, 0.2, 0.5;
    const Eigen::MatrixXd p = Eigen::MatrixXd::Identity(d, d);

    const int n_clusters = 200, per_cluster = 6;
    std::vector<KnotCluster> clusters;
    for (int c = 0; c < n_clusters; ++c) {
        Eigen::VectorXd mu(d), sigma(d);
        for (int i = 0; i < d; ++i) {
            mu[i] = mu_mean[i] + mu_sd[i] * normal(rng);
            sigma[i] = sg_mean[i];  // fixed within-cluster scale
        }
        KnotCluster cl;
        for (int k = 0; k < per_cluster; ++k) cl.knots.push_back(sample_mvn(mu, sigma, p, rng));
        clusters.push_back(cl);
    }
    const HierarchicalGaussian hg = fit_knot_hierarchy(clusters);
    for (int i = 0; i < d; ++i) {
        // cluster means scatter with variance mu_sd^2 + sigma^2/n
        const double se =
            std::sqrt((mu_sd[i] * mu_sd[i] + sg_mean[i] * sg_mean[i] / per_cluster) / n_clusters);
        REQUIRE(std::abs(hg.global_mu_mean[i] - mu_mean[i]) < 3.0 * se);
    }
    REQUIRE((hg.correlation - p).norm() < 0.2);
}

TEST_CASE("hierarchy fit is invariant under duplication except for the counts") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<KnotCluster> clusters;
    for (int c = 0; c < 5; ++c) {
        KnotCluster cl;
        for (int k = 0; k < 6; ++k) {
            Eigen::VectorXd z(2);
            z << normal(rng), 2.0 * normal(rng);
            cl.knots.push_back(z);
        }
        clusters.push_back(cl);
    }
    std::vector<KnotCluster> doubled = clusters;
    doubled.insert(doubled.end(), clusters.begin(), clusters.end());
    const HierarchicalGaussian a = fit_knot_hierarchy(clusters);
    const HierarchicalGaussian b = fit_knot_hierarchy(doubled);
    REQUIRE((a.global_mu_mean - b.global_mu_mean).norm() < 1e-9);
    REQUIRE((a.global_sigma_mean - b.global_sigma_mean).norm() < 1e-9);
    REQUIRE(b.knot_count == 2 * a.knot_count);
    // the shrinkage weight differs with the pooled count; compare loosely
    REQUIRE((a.correlation - b.correlation).norm() < 0.05);
}

TEST_CASE("hierarchical sampling: zero variances collapse every knot to the mean") {
    HierarchicalGaussian hg = reference_statistics().knot_params;
    hg.global_mu_sd.setZero();
    hg.global_sigma_mean.setZero();
    hg.global_sigma_sd.setZero();
    std::mt19937_64 rng(19);
    const auto clusters = sample_knot_hierarchy(hg, rng, 3, {2, 2, 2});
    const SampledKnot expected = knot_vector_to_params(hg.global_mu_mean);
    for (const auto& cl : clusters)
        for (const auto& k : cl) {
            REQUIRE(std::abs(k.params.gamma - expected.params.gamma) < 1e-12);
            REQUIRE(std::abs(k.params.phi0 - expected.params.phi0) < 1e-12);
            REQUIRE(std::abs(k.tau - expected.tau) < 1e-12);
        }
}

TEST_CASE("hierarchical sampling always lands in valid parameter boxes") {
    HierarchicalGaussian hg = reference_statistics().knot_params;
    hg.global_mu_sd *= 5.0;  // deliberately wild
    hg.global_sigma_mean *= 3.0;
    std::mt19937_64 rng(23);
    const auto clusters = sample_knot_hierarchy(hg, rng, 50, std::vector<int>(50, 4));
    for (const auto& cl : clusters)
        for (const auto& k : cl) {
            REQUIRE(k.params.gamma > 0.0);
            REQUIRE(k.params.rho_max > 0.0);
            REQUIRE(k.params.r_max > 0.0);
            REQUIRE(k.params.phi0 > 0.0);
            REQUIRE(k.params.phi0 <= 1.0);
            REQUIRE(k.params.phi1 > 0.0);
            REQUIRE(k.params.phi1 <= 1.0);
            REQUIRE(k.params.psi0 > 0.0);
            REQUIRE(k.params.psi1 <= 1.0);
        }
}

TEST_CASE("within-cluster variance is below between-cluster variance when mu spread dominates") {
    HierarchicalGaussian hg;
    hg.dimension = 2;
    hg.global_mu_mean = Eigen::Vector2d(0.0, 1.0);
    hg.global_mu_sd = Eigen::Vector2d(2.0, 1.5);      // large spread of cluster means
    hg.global_sigma_mean = Eigen::Vector2d(0.3, 0.2);  // small within-cluster scale
    hg.global_sigma_sd = Eigen::Vector2d(0.05, 0.05);
    hg.correlation = Eigen::MatrixXd::Identity(2, 2);

    std::mt19937_64 rng(29);
    const int n_clusters = 1000, per = 6;
    const auto clusters = sample_knot_hierarchy_raw(hg, rng, n_clusters, std::vector<int>(n_clusters, per));

    for (int dim = 0; dim < 2; ++dim) {
        double grand = 0.0;
        std::vector<double> cluster_means;
        double within = 0.0;
        long within_df = 0;
        for (const auto& cl : clusters) {
            double m = 0.0;
            for (const auto& z : cl) m += z[dim];
            m /= static_cast<double>(cl.size());
            cluster_means.push_back(m);
            for (const auto& z : cl) {
                within += (z[dim] - m) * (z[dim] - m);
                ++within_df;
            }
            grand += m;
        }
        grand /= static_cast<double>(cluster_means.size());
        double between = 0.0;
        for (double m : cluster_means) between += (m - grand) * (m - grand);
        between /= static_cast<double>(cluster_means.size() - 1);
        within /= static_cast<double>(within_df - static_cast<long>(cluster_means.size()));
        REQUIRE(within < between);
    }
}

TEST_CASE("reference statistics are valid and sampleable") {
    const ModelStatistics s = reference_statistics();
    REQUIRE_NOTHROW(s.validate());
    std::mt19937_64 rng(31);
    const auto clusters = sample_knot_hierarchy(s.knot_params, rng, 4, {3, 4, 5, 3});
    REQUIRE(clusters.size() == 4);
    REQUIRE(clusters[2].size() == 5);
}
