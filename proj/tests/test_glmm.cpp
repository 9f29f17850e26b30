#include <catch2/catch_amalgamated.hpp>

#include "iterboot/fit.hpp"
#include "iterboot/io.hpp"
#include "iterboot/simulate.hpp"
#include "oracles/oracles.hpp"

using namespace ib;

namespace {
const std::string kFixtures = ITERBOOT_FIXTURE_DIR;

GlmmDesign fixture_design(CsvData& data) {
    data = read_csv(kFixtures + "/glmm_m20n5q6.csv");
    return GlmmDesign(data.X, data.cluster);
}
}  // namespace

TEST_CASE("quadrature rule integrates polynomials exactly", "[glmm]") {
    // degree <= 2k-1 against exp(-x^2); odd moments vanish, even moments
    // are Gamma((m+1)/2)
    const GaussHermiteRule rule = gauss_hermite(8);
    for (int m = 0; m <= 15; ++m) {
        double acc = 0.0, scale = 0.0;
        for (int k = 0; k < 8; ++k) {
            acc += rule.weights[k] * std::pow(rule.nodes[k], m);
            scale += rule.weights[k] * std::pow(std::fabs(rule.nodes[k]), m);
        }
        const double expect = m % 2 == 1 ? 0.0 : std::tgamma((m + 1) / 2.0);
        CHECK(std::fabs(acc - expect) <= 1e-12 * std::max(1.0, scale));
    }
    CHECK_THROWS_AS(gauss_hermite(0), std::invalid_argument);
}

TEST_CASE("pirls profile behaves on a well-posed dataset", "[glmm]") {
    const int q = 2, m = 40, ni = 10, n = m * ni;
    Eigen::MatrixXd X = draw_covariates(n, q, 0.0, 1.0, 5);
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i / ni;
    GlmmDesign d(X, labels);
    GlmmParams params;
    params.beta0 = 0.5;
    params.beta.resize(q);
    params.beta << 1.0, -1.0;
    params.sigma2 = 1.0;
    const Eigen::VectorXd y = simulate_glmm(d, params, 42);

    EstimatorSpec spec;
    spec.kind = EstimatorKind::GlmmPIRLS;
    const FitResult fit = glmm_pirls(d, y, spec);
    REQUIRE(fit.converged);
    CHECK_FALSE(fit.at_boundary);
    CHECK(std::exp(fit.theta_hat[q + 1]) > 0.1);
    CHECK(std::exp(fit.theta_hat[q + 1]) < 3.0);
    CHECK(std::fabs(fit.theta_hat[1] - 1.0) < 0.5);
}

TEST_CASE("degenerate variance data pins the profile at its floor", "[glmm]") {
    const int q = 1, m = 30, ni = 8, n = m * ni;
    Eigen::MatrixXd X = draw_covariates(n, q, 0.0, 1.0, 6);
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i / ni;
    GlmmDesign d(X, labels);
    GlmmParams params;
    params.beta0 = 0.2;
    params.beta.resize(1);
    params.beta << 0.8;
    params.sigma2 = 0.0;  // no cluster effect in the generator
    const Eigen::VectorXd y = simulate_glmm(d, params, 43);

    EstimatorSpec spec;
    spec.kind = EstimatorKind::GlmmPIRLS;
    const FitResult fit = glmm_pirls(d, y, spec);
    CHECK(std::exp(fit.theta_hat[q + 1]) < 0.2);

    // pooled fit comparison for the regression part
    Eigen::MatrixXd Xf(n, q + 1);
    Xf.col(0).setOnes();
    Xf.rightCols(q) = X;
    EstimatorSpec mle;
    mle.kind = EstimatorKind::LogisticMLE;
    const FitResult pooled = logistic_irls(LogisticDesign(Xf), y, mle);
    CHECK((fit.theta_hat.head(q + 1) - pooled.theta_hat).lpNorm<Eigen::Infinity>() < 0.2);
}

TEST_CASE("one observation per cluster is flagged degenerate", "[glmm]") {
    Eigen::MatrixXd X = draw_covariates(12, 1, 0.0, 1.0, 7);
    std::vector<int> labels(12);
    for (int i = 0; i < 12; ++i) labels[static_cast<std::size_t>(i)] = i;
    GlmmDesign d(X, labels);
    Eigen::VectorXd y(12);
    y << 1, 0, 1, 1, 0, 0, 1, 0, 1, 0, 0, 1;
    EstimatorSpec spec;
    spec.kind = EstimatorKind::GlmmPIRLS;
    const FitResult fit = glmm_pirls(d, y, spec);
    CHECK_FALSE(fit.converged);
    CHECK(fit.at_boundary);
}

TEST_CASE("marginal fit with the variance pinned at zero is the pooled fit", "[glmm]") {
    const int q = 2, m = 40, ni = 10, n = m * ni;
    Eigen::MatrixXd X = draw_covariates(n, q, 0.0, 1.0, 5);
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i / ni;
    GlmmDesign d(X, labels);
    GlmmParams params;
    params.beta0 = 0.5;
    params.beta.resize(q);
    params.beta << 1.0, -1.0;
    params.sigma2 = 0.0;
    const Eigen::VectorXd y = simulate_glmm(d, params, 43);

    EstimatorSpec spec;
    spec.kind = EstimatorKind::GlmmGHQ;
    const FitResult fit = glmm_ghq(d, y, spec, kLogSigma2Floor);
    Eigen::MatrixXd Xf(n, q + 1);
    Xf.col(0).setOnes();
    Xf.rightCols(q) = X;
    EstimatorSpec mle;
    mle.kind = EstimatorKind::LogisticMLE;
    const FitResult pooled = logistic_irls(LogisticDesign(Xf), y, mle);
    REQUIRE(fit.converged);
    CHECK((fit.theta_hat.head(q + 1) - pooled.theta_hat).lpNorm<Eigen::Infinity>() < 1e-4);
}

TEST_CASE("one-cluster marginal maximizer matches the trapezoid oracle", "[glmm]") {
    Eigen::MatrixXd X(3, 0);
    GlmmDesign d(X, {0, 0, 0});
    Eigen::VectorXd y(3);
    y << 1.0, 1.0, 0.0;
    EstimatorSpec spec;
    spec.kind = EstimatorKind::GlmmGHQ;
    spec.ghq_nodes = 25;
    const double log_s2 = std::log(1.5);
    const FitResult fit = glmm_ghq(d, y, spec, log_s2);
    REQUIRE(fit.converged);
    const json expected = read_json_file(kFixtures + "/expected/oracle_values.json");
    const double oracle_beta0 = expected.at("glmm_onecluster").at("beta0_hat").get<double>();
    CHECK(std::fabs(fit.theta_hat[0] - oracle_beta0) < 1e-4);
}

TEST_CASE("estimates are stable in the node count", "[glmm]") {
    CsvData data;
    const GlmmDesign d = fixture_design(data);
    EstimatorSpec spec;
    spec.kind = EstimatorKind::GlmmGHQ;
    spec.ghq_nodes = 15;
    const FitResult f15 = glmm_ghq(d, data.y, spec);
    spec.ghq_nodes = 25;
    const FitResult f25 = glmm_ghq(d, data.y, spec);
    REQUIRE(f15.converged);
    REQUIRE(f25.converged);
    CHECK((f15.theta_hat - f25.theta_hat).lpNorm<Eigen::Infinity>() < 1e-4);
}

TEST_CASE("pirls converges across seeds at the committed geometry", "[glmm][slow]") {
    // robustness smoke run; threshold fixed up front
    const int q = 6, m = 20, ni = 5, n = m * ni;
    Eigen::VectorXd beta(q);
    beta << 0.5, 0.5, -0.7, -0.7, 0.0, 0.0;
    int converged = 0;
    const int total = 100;
    for (int r = 0; r < total; ++r) {
        const std::uint64_t rm = derive_seed(88, 2, static_cast<std::uint64_t>(r));
        Eigen::MatrixXd X = draw_covariates(n, q, 0.0, 0.4, derive_seed(rm, 0, 0));
        std::vector<int> labels(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i / ni;
        GlmmDesign d(X, labels);
        GlmmParams params;
        params.beta0 = 0.0;
        params.beta = beta;
        params.sigma2 = 1.5;
        const Eigen::VectorXd y = simulate_glmm(d, params, derive_seed(rm, 0, 1));
        EstimatorSpec spec;
        spec.kind = EstimatorKind::GlmmPIRLS;
        spec.delta = 0.01;
        const FitResult fit = fit_estimator(d, y, spec);
        if (fit.converged && fit.theta_hat.allFinite()) ++converged;
    }
    CHECK(converged >= 95);
}
