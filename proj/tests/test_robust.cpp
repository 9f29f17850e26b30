#include <catch2/catch_amalgamated.hpp>

#include "iterboot/fit.hpp"
#include "iterboot/io.hpp"
#include "oracles/oracles.hpp"

using namespace ib;

namespace {
const std::string kFixtures = ITERBOOT_FIXTURE_DIR;

EstimatorSpec robust_spec(double c, double delta = 0.0) {
    EstimatorSpec s;
    s.kind = EstimatorKind::LogisticRobust;
    s.huber_c = c;
    s.delta = delta;
    return s;
}
}  // namespace

TEST_CASE("clipped identity", "[robust]") {
    CHECK(huber_psi(0.5, 1.345) == 0.5);
    CHECK(huber_psi(10.0, 1.345) == 1.345);
    CHECK(huber_psi(-10.0, 1.345) == -1.345);
    CHECK(huber_psi(1.345, 1.345) == 1.345);
    CHECK_THROWS_AS(huber_psi(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("leverage weights agree with the dense hat matrix", "[robust]") {
    LogisticDesign intercept_only(Eigen::MatrixXd::Ones(4, 1));
    const Eigen::VectorXd w = leverage_weights(intercept_only);
    for (int i = 0; i < 4; ++i) CHECK(w[i] == Catch::Approx(std::sqrt(0.75)).epsilon(1e-12));

    // saturated design: every observation carries leverage one
    Eigen::MatrixXd sq = Eigen::MatrixXd::Identity(3, 3);
    const Eigen::VectorXd w_sat = leverage_weights(LogisticDesign(sq));
    for (int i = 0; i < 3; ++i) CHECK(w_sat[i] == Catch::Approx(0.0).margin(1e-7));

    const CsvData data = read_csv(kFixtures + "/logistic_n8q2.csv");
    LogisticDesign d(data.X);
    const Eigen::VectorXd lib = leverage_weights(d);
    const Eigen::VectorXd dense = oracle::leverage_weights_dense(data.X);
    CHECK((lib - dense).cwiseAbs().maxCoeff() < 1e-10);

    // trace of the hat matrix equals the column count
    double h_sum = 0.0;
    for (int i = 0; i < d.n(); ++i) h_sum += 1.0 - lib[i] * lib[i];
    CHECK(h_sum == Catch::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("symmetric data keeps the robust intercept at zero", "[robust]") {
    LogisticDesign d(Eigen::MatrixXd::Ones(4, 1));
    Eigen::VectorXd y(4);
    y << 0, 0, 1, 1;
    for (double c : {0.8, 1.345, 3.0}) {
        const FitResult fit = robust_m_estimator(d, y, robust_spec(c));
        CHECK(fit.converged);
        CHECK(std::fabs(fit.theta_hat[0]) < 1e-7);
    }
}

TEST_CASE("large clip and zero transform recover the score fit", "[robust]") {
    // an equal-leverage design makes the leverage weights constant, so the
    // weighted and unweighted score equations share their root
    const CsvData data = read_csv(kFixtures + "/balanced_n12q2.csv");
    LogisticDesign d(data.X);
    const FitResult robust = robust_m_estimator(d, data.y, robust_spec(1e6));
    EstimatorSpec mle;
    mle.kind = EstimatorKind::LogisticMLE;
    const FitResult score = logistic_irls(d, data.y, mle);
    REQUIRE(robust.converged);
    REQUIRE(score.converged);
    CHECK((robust.theta_hat - score.theta_hat).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("bounded influence keeps the flipped fit near the clean one", "[robust]") {
    const CsvData clean = read_csv(kFixtures + "/robust_n20q2_clean.csv");
    const CsvData dirty = read_csv(kFixtures + "/robust_n20q2_flipped.csv");
    LogisticDesign d(clean.X);
    EstimatorSpec mle;
    mle.kind = EstimatorKind::LogisticMLE;

    const Eigen::VectorXd mle_clean = logistic_irls(d, clean.y, mle).theta_hat;
    const Eigen::VectorXd mle_dirty = logistic_irls(d, dirty.y, mle).theta_hat;
    const FitResult rob_clean = robust_m_estimator(d, clean.y, robust_spec(1.345));
    const FitResult rob_dirty = robust_m_estimator(d, dirty.y, robust_spec(1.345));
    REQUIRE(rob_clean.converged);
    REQUIRE(rob_dirty.converged);

    const double mle_shift = (mle_dirty - mle_clean).norm();
    const double rob_shift = (rob_dirty.theta_hat - rob_clean.theta_hat).norm();
    CHECK(rob_shift < mle_shift);
}

TEST_CASE("estimating equation holds at converged robust fits", "[robust]") {
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 60, q = 3;
        LogisticDesign d(draw_covariates(n, q, 0.0, 0.3, derive_seed(2000, 0, trial)));
        Eigen::VectorXd beta(q);
        beta << 0.8, -0.5, 0.0;
        const Eigen::VectorXd y =
            simulate_logistic(d, beta, derive_seed(2000, 1, static_cast<std::uint64_t>(trial)));
        const EstimatorSpec spec = robust_spec(1.345, 0.01);
        const FitResult fit = fit_estimator(d, y, spec);
        if (!fit.converged) continue;
        const Eigen::VectorXd lw = leverage_weights(d);
        const Eigen::VectorXd phi = detail::robust_estfun(
            d, pseudo_values(y, 0.01), lw, fit.theta_hat, spec.huber_c, spec.delta);
        CHECK(phi.lpNorm<Eigen::Infinity>() <= spec.irls.tol * 1.0000001);
    }
}
