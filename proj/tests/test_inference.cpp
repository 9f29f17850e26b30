#include <catch2/catch_amalgamated.hpp>

#include "iterboot/inference.hpp"
#include "iterboot/numerics.hpp"
#include "iterboot/toys.hpp"

using namespace ib;

namespace {
IBConfig mc_cfg(int H, std::uint64_t master) {
    IBConfig cfg;
    cfg.H = H;
    cfg.seeds = {master, H};
    cfg.tol = 1e-8;
    return cfg;
}
}  // namespace

TEST_CASE("equal simulated fits give a zero covariance", "[inference]") {
    LinearBiasToy toy = LinearBiasToy::identity_toy(2);
    toy.noise_sd = 0.0;  // every draw equals the binding mean
    Eigen::VectorXd theta(2);
    theta << 0.5, -1.0;
    const Eigen::MatrixXd cov = bootstrap_cov_pi(theta, toy.mc_problem(), mc_cfg(2, 9));
    CHECK(cov.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("bootstrap covariance matches the chi-square law", "[inference]") {
    const VarianceToy toy{10};
    Eigen::VectorXd theta(1);
    theta << 2.0;
    const Eigen::MatrixXd cov = bootstrap_cov_pi(theta, toy.mc_problem(), mc_cfg(10000, 55));
    const double analytic = 2.0 * 4.0 * 9.0 / 100.0;  // 2 theta^2 (n-1)/n^2
    CHECK(std::fabs(cov(0, 0) - analytic) / analytic < 0.05);
}

TEST_CASE("covariance is invariant to the order of the fits", "[inference]") {
    LinearBiasToy toy = LinearBiasToy::identity_toy(2);
    toy.noise_sd = 1.0;
    Eigen::VectorXd theta(2);
    theta << 0.0, 0.0;
    const IBConfig cfg = mc_cfg(64, 321);

    // assemble the same covariance from a permuted copy of the fits
    Eigen::MatrixXd fits(2, 64);
    for (int h = 1; h <= 64; ++h)
        fits.col(h - 1) =
            toy.mc_problem().simulate_fit(theta, cfg.seeds.sim_seed(static_cast<std::uint64_t>(h))).theta_hat;
    const Eigen::VectorXd mean = fits.rowwise().mean();
    Eigen::MatrixXd cov_fwd = Eigen::MatrixXd::Zero(2, 2), cov_rev = Eigen::MatrixXd::Zero(2, 2);
    for (int h = 0; h < 64; ++h) {
        const Eigen::VectorXd d = fits.col(h) - mean;
        cov_fwd += d * d.transpose();
    }
    for (int h = 63; h >= 0; --h) {
        const Eigen::VectorXd d = fits.col(h) - mean;
        cov_rev += d * d.transpose();
    }
    CHECK(((cov_fwd - cov_rev) / 63.0).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("jacobian of an affine map is exact", "[inference]") {
    LinearBiasToy toy = LinearBiasToy::identity_toy(3);
    toy.M << 0.2, 0.05, 0.0, -0.1, 0.3, 0.02, 0.0, 0.01, -0.15;
    const Eigen::MatrixXd target = Eigen::MatrixXd::Identity(3, 3) + toy.M;
    const Eigen::VectorXd theta = Eigen::VectorXd::Zero(3);
    for (double step : {1e-1, 1e-3, 1e-6}) {
        const Eigen::MatrixXd B =
            numerical_jacobian_B(theta, toy.exact_problem(), mc_cfg(4, 1), step);
        CHECK((B - target).norm() / target.norm() < 10.0 * 1e-16 / step + 1e-12);
    }
}

TEST_CASE("jacobian of the variance toy binding is its slope", "[inference]") {
    const VarianceToy toy{10};
    Eigen::VectorXd theta(1);
    theta << 2.0;
    const Eigen::MatrixXd B = numerical_jacobian_B(theta, toy.exact_problem(), mc_cfg(4, 1));
    CHECK(B(0, 0) == Catch::Approx(0.9).epsilon(1e-9));
}

TEST_CASE("seed-frozen differencing is stable under step halving", "[inference]") {
    // continuous Monte Carlo binding: the estimate moves only at the
    // discretization order between step and step/2
    LinearBiasToy toy = LinearBiasToy::identity_toy(2);
    toy.M << 0.25, 0.1, -0.05, 0.3;
    toy.noise_sd = 1.0;
    Eigen::VectorXd theta(2);
    theta << 0.4, -0.7;
    const IBConfig cfg = mc_cfg(500, 777);
    const Eigen::MatrixXd b1 = numerical_jacobian_B(theta, toy.mc_problem(), cfg, 1e-3);
    const Eigen::MatrixXd b2 = numerical_jacobian_B(theta, toy.mc_problem(), cfg, 5e-4);
    CHECK((b1 - b2).norm() / b1.norm() < 1e-3);
}

TEST_CASE("sandwich assembly obeys its scalings", "[inference]") {
    Eigen::MatrixXd sigma(2, 2);
    sigma << 2.0, 0.3, 0.3, 1.0;
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2, 2);

    // identity jacobian, huge H: the covariance passes through
    const Eigen::MatrixXd v1 = assemble_var_theta(sigma, eye, 1000000000);
    CHECK((v1 - sigma).cwiseAbs().maxCoeff() < 1e-6);

    // B = 2I, H = 1: (1 + 1/1) * (1/4) = 1/2
    const Eigen::MatrixXd v2 = assemble_var_theta(sigma, 2.0 * eye, 1);
    CHECK((v2 - 0.5 * sigma).cwiseAbs().maxCoeff() < 1e-12);

    // linear in sigma
    const Eigen::MatrixXd v3 = assemble_var_theta(3.0 * sigma, 2.0 * eye, 7);
    CHECK((v3 - 3.0 * assemble_var_theta(sigma, 2.0 * eye, 7)).cwiseAbs().maxCoeff() < 1e-12);

    Eigen::MatrixXd singular = Eigen::MatrixXd::Zero(2, 2);
    CHECK_THROWS_AS(assemble_var_theta(sigma, singular, 10), std::invalid_argument);
}

TEST_CASE("symmetrization repair stays within rounding distance", "[inference]") {
    Eigen::MatrixXd sigma(2, 2);
    sigma << 1.0, 0.999999, 0.999999, 1.0;  // nearly rank one
    Eigen::MatrixXd B(2, 2);
    B << 1.0, 0.2, 0.0, 1.0;
    const Eigen::MatrixXd v = assemble_var_theta(sigma, B, 50);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v);
    CHECK(es.eigenvalues()[0] >= -1e-12);
    CHECK((v - v.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("normal quantiles and intervals", "[inference]") {
    CHECK(normal_quantile(0.975) == Catch::Approx(1.959963984540054).epsilon(1e-9));
    CHECK(normal_quantile(0.5) == Catch::Approx(0.0).margin(1e-12));
    // self-check against the complementary error function across the range
    for (double p : {1e-6, 0.01, 0.3, 0.7, 0.99, 1.0 - 1e-6}) {
        const double x = normal_quantile(p);
        CHECK(std::fabs(0.5 * std::erfc(-x / std::sqrt(2.0)) - p) < 1e-12);
    }
    CHECK_THROWS_AS(normal_quantile(0.0), std::invalid_argument);

    Eigen::VectorXd theta(2);
    theta << 1.0, -2.0;
    Eigen::MatrixXd var = Eigen::MatrixXd::Zero(2, 2);
    CiResult ci = normal_ci(theta, var, 0.95);
    CHECK(ci.lo[0] == theta[0]);
    CHECK(ci.hi[0] == theta[0]);

    var(0, 0) = 1.0;
    var(1, 1) = -1e-5;  // negative diagonal is clamped and flagged
    ci = normal_ci(theta, var, 0.95);
    CHECK(ci.hi[0] - theta[0] == Catch::Approx(1.959963984540054).epsilon(1e-9));
    CHECK(ci.se[1] == 0.0);
    CHECK(ci.clamped_variance);
}

TEST_CASE("variance pipeline reuses the cached last-iteration fits", "[inference]") {
    LinearBiasToy toy = LinearBiasToy::identity_toy(1);
    toy.M(0, 0) = 0.3;
    toy.noise_sd = 1.0;
    Eigen::VectorXd pi_obs(1);
    pi_obs << 1.0;
    IBConfig cfg = mc_cfg(64, 99);
    cfg.tol = 1e-6;
    cfg.max_iter = 200;
    cfg.store_last_fits = true;
    const auto [theta, trace] = ib_run(pi_obs, toy.mc_problem(), cfg);
    REQUIRE(trace.last_fits.has_value());

    const Eigen::MatrixXd from_cache =
        bootstrap_cov_pi(theta, toy.mc_problem(), cfg, &trace, 0);
    const Eigen::MatrixXd recomputed =
        bootstrap_cov_pi(theta, toy.mc_problem(), cfg, nullptr, cfg.H);
    CHECK((from_cache - recomputed).cwiseAbs().maxCoeff() < 1e-12);
}
