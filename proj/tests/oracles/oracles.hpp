#ifndef ITERBOOT_TEST_ORACLES_HPP
#define ITERBOOT_TEST_ORACLES_HPP

// Independent reference computations backing the committed expected
// values. Everything here deliberately avoids the library's solvers:
// roots are located by coordinate bisection or dense grids, moments by
// brute-force Monte Carlo, integrals by trapezoid sums. `regenerate_all`
// rewrites the fixture CSVs and expected-value files; `verify_all`
// recomputes and diffs against what is committed.

#include <Eigen/Dense>
#include <iosfwd>
#include <string>

namespace ib::oracle {

// score-equation root by cyclic coordinate bisection (the score is
// strictly decreasing in each coordinate)
Eigen::VectorXd logistic_root_bisection(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                        double tol = 1e-12);

// adjusted-score root by damped Newton on an explicitly coded adjusted
// score with a forward-difference Jacobian
Eigen::VectorXd firth_root_newton(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                  double tol = 1e-11);

// leverage weights from the explicitly inverted hat matrix
Eigen::VectorXd leverage_weights_dense(const Eigen::MatrixXd& X);

// Monte Carlo mean and variance of the divisor-n variance statistic on
// N(0, sqrt(theta)) samples
struct MomentEstimate {
    double mean = 0.0;
    double variance = 0.0;
    int replicates = 0;
};
MomentEstimate variance_toy_moments(double theta, int n, int replicates, std::uint64_t seed);

// marginal likelihood of a one-cluster random-intercept model by dense
// trapezoid integration over the intercept, maximized over beta0 by
// golden-section search
double glmm_onecluster_beta0_trapezoid(const Eigen::VectorXd& y, double sigma2,
                                       double lo = -6.0, double hi = 6.0);

// fixture management
void regenerate_all(const std::string& dir);
bool verify_all(const std::string& dir, std::ostream& os);

}  // namespace ib::oracle

#endif
