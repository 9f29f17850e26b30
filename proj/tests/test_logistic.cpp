#include <catch2/catch_amalgamated.hpp>

#include "iterboot/data.hpp"
#include "iterboot/fit.hpp"
#include "iterboot/io.hpp"
#include "oracles/oracles.hpp"

using namespace ib;

namespace {
const std::string kFixtures = ITERBOOT_FIXTURE_DIR;

EstimatorSpec mle_spec(double delta = 0.0) {
    EstimatorSpec s;
    s.kind = EstimatorKind::LogisticMLE;
    s.delta = delta;
    return s;
}
}  // namespace

TEST_CASE("pseudo-values map binary responses into {delta, 1-delta}", "[estimators]") {
    Eigen::VectorXd y(4);
    y << 1, 0, 1, 0;
    const Eigen::VectorXd t = pseudo_values(y, 0.01);
    CHECK(t[0] == Catch::Approx(0.99));
    CHECK(t[1] == Catch::Approx(0.01));
    CHECK((pseudo_values(y, 0.0) - y).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(pseudo_values(y, 0.5), std::invalid_argument);
    Eigen::VectorXd frac(1);
    frac << 0.4;
    CHECK_THROWS_AS(pseudo_values(frac, 0.01), std::invalid_argument);
}

TEST_CASE("intercept-only fits hit the closed forms", "[estimators]") {
    LogisticDesign d(Eigen::MatrixXd::Ones(4, 1));
    Eigen::VectorXd y(4);
    y << 0, 0, 1, 1;
    FitResult f = logistic_irls(d, y, mle_spec());
    CHECK(f.converged);
    CHECK(std::fabs(f.theta_hat[0]) < 1e-9);

    y << 1, 1, 1, 0;
    f = logistic_irls(d, y, mle_spec());
    CHECK(f.converged);
    CHECK(f.theta_hat[0] == Catch::Approx(std::log(3.0)).epsilon(1e-8));
}

TEST_CASE("fixture fit matches the bisection oracle", "[estimators]") {
    const CsvData data = read_csv(kFixtures + "/logistic_n8q2.csv");
    const json expected = read_json_file(kFixtures + "/expected/oracle_values.json");
    LogisticDesign d(data.X);
    const FitResult fit = logistic_irls(d, data.y, mle_spec());
    REQUIRE(fit.converged);
    const auto& oracle_beta = expected.at("logistic_n8q2").at("beta_hat");
    CHECK(std::fabs(fit.theta_hat[0] - oracle_beta[0].get<double>()) < 1e-6);
    CHECK(std::fabs(fit.theta_hat[1] - oracle_beta[1].get<double>()) < 1e-6);
}

TEST_CASE("separation flags the raw fit and spares the transformed one", "[estimators]") {
    const CsvData data = read_csv(kFixtures + "/sep_perfect_n8.csv");
    LogisticDesign d(data.X);
    const FitResult raw = logistic_irls(d, data.y, mle_spec());
    CHECK_FALSE(raw.converged);
    const FitResult pseudo = fit_estimator(d, data.y, mle_spec(0.01));
    CHECK(pseudo.converged);
    CHECK(pseudo.theta_hat.allFinite());
    CHECK(pseudo.theta_hat.lpNorm<Eigen::Infinity>() < 20.0);
}

TEST_CASE("score equation holds at every converged fit", "[estimators]") {
    // property-style sweep over random designs and responses
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 30 + 5 * trial;
        const int q = 2 + trial % 3;
        LogisticDesign d(draw_covariates(n, q, 0.0, 0.5, derive_seed(1000, 0, trial)));
        Eigen::VectorXd beta = Eigen::VectorXd::Zero(q);
        beta[0] = 1.0;
        const Eigen::VectorXd y =
            simulate_logistic(d, beta, derive_seed(1000, 1, static_cast<std::uint64_t>(trial)));
        const EstimatorSpec spec = mle_spec(trial % 2 == 0 ? 0.01 : 0.0);
        const FitResult fit = fit_estimator(d, y, spec);
        if (!fit.converged) continue;
        const Eigen::VectorXd y_used = spec.delta > 0 ? pseudo_values(y, spec.delta) : y;
        Eigen::VectorXd mu(n);
        for (int i = 0; i < n; ++i) mu[i] = sigmoid(d.X.row(i).dot(fit.theta_hat));
        const double resid =
            ((d.X.transpose() * (y_used - mu)) / n).lpNorm<Eigen::Infinity>();
        CHECK(resid <= spec.irls.tol * 1.0000001);
    }
}

TEST_CASE("pseudo-value fits shrink the intercept toward zero", "[estimators]") {
    LogisticDesign d(Eigen::MatrixXd::Ones(8, 1));
    Eigen::VectorXd y(8);
    y << 1, 1, 1, 1, 1, 1, 0, 1;  // heavily unbalanced
    const double raw = logistic_irls(d, y, mle_spec()).theta_hat[0];
    const double shrunk = fit_estimator(d, y, mle_spec(0.05)).theta_hat[0];
    CHECK(raw > 0.0);
    CHECK(shrunk > 0.0);
    CHECK(shrunk < raw);
}

TEST_CASE("adjusted-score fit preserves symmetry and matches its oracle", "[estimators]") {
    LogisticDesign d(Eigen::MatrixXd::Ones(4, 1));
    Eigen::VectorXd y(4);
    y << 0, 0, 1, 1;
    EstimatorSpec spec;
    spec.kind = EstimatorKind::LogisticFirth;
    const FitResult bal = logistic_firth(d, y, spec);
    CHECK(bal.converged);
    CHECK(std::fabs(bal.theta_hat[0]) < 1e-9);

    const CsvData data = read_csv(kFixtures + "/logistic_n8q2.csv");
    const json expected = read_json_file(kFixtures + "/expected/oracle_values.json");
    LogisticDesign fd(data.X);
    const FitResult fit = logistic_firth(fd, data.y, spec);
    REQUIRE(fit.converged);
    const auto& oracle_beta = expected.at("firth_n8q2").at("beta_hat");
    CHECK(std::fabs(fit.theta_hat[0] - oracle_beta[0].get<double>()) < 1e-5);
    CHECK(std::fabs(fit.theta_hat[1] - oracle_beta[1].get<double>()) < 1e-5);
}

TEST_CASE("adjusted-score fits stay finite on the separation corpus", "[estimators]") {
    EstimatorSpec spec;
    spec.kind = EstimatorKind::LogisticFirth;
    for (const char* name : {"sep_perfect_n8.csv", "sep_quasi_n12.csv", "sep_allones_n10.csv"}) {
        const CsvData data = read_csv(kFixtures + "/" + std::string(name));
        LogisticDesign d(data.X);
        const FitResult fit = logistic_firth(d, data.y, spec);
        INFO(name);
        CHECK(fit.converged);
        CHECK(fit.theta_hat.allFinite());
        CHECK(fit.theta_hat.lpNorm<Eigen::Infinity>() < 20.0);
    }
}
