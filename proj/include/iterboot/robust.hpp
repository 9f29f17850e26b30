#ifndef ITERBOOT_ROBUST_HPP
#define ITERBOOT_ROBUST_HPP

// Bounded-influence M-estimator for the logistic model: Huber-clipped
// Pearson residuals, leverage-based design weights, and the closed-form
// consistency correction for two-point responses.

#include <Eigen/Dense>
#include <cmath>

#include "iterboot/data.hpp"
#include "iterboot/estimators.hpp"
#include "iterboot/logistic.hpp"
#include "iterboot/numerics.hpp"

namespace ib {

inline double huber_psi(double r, double c) {
    if (!(c > 0.0)) throw std::invalid_argument("huber_psi: c <= 0");
    if (r > c) return c;
    if (r < -c) return -c;
    return r;
}

namespace detail {

// Estimating function (1/n) sum_i w_i sqrt(V_i) x_i [psi_c(r_i) - E psi_c(r_i)]
// and the expected scoring matrix. The correction expectation runs over
// the binary model law (value 1 with probability mu_i, 0 otherwise), so it
// vanishes as c grows and the limit is the leverage-weighted score of the
// responses as supplied. Clipping the correction at the two-point law of
// transformed responses instead would cancel the transform algebraically
// and reintroduce the separation failure the transform exists to prevent.
// The scoring matrix is the positive semi-definite form
//   M = (1/n) X' diag(w_i sqrt(V_i) V_i [psi_c(r_1) - psi_c(r_0)]) X.
inline Eigen::VectorXd robust_estfun(const LogisticDesign& design, const Eigen::VectorXd& y,
                                     const Eigen::VectorXd& lev_w, const Eigen::VectorXd& beta,
                                     double c, double /*delta*/,
                                     Eigen::MatrixXd* scoring = nullptr) {
    const int n = design.n();
    const int q = design.q();
    const double inv_n = 1.0 / static_cast<double>(n);
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(q);
    Eigen::VectorXd diag;
    if (scoring) diag.resize(n);
    const Eigen::VectorXd eta = design.X * beta;
    for (int i = 0; i < n; ++i) {
        const double mu = sigmoid(eta[i]);
        const double v = std::max(mu * (1.0 - mu), 1e-12);
        const double sv = std::sqrt(v);
        const double r = (y[i] - mu) / sv;
        const double psi_one = huber_psi((1.0 - mu) / sv, c);
        const double psi_zero = huber_psi(-mu / sv, c);
        const double expect = mu * psi_one + (1.0 - mu) * psi_zero;
        phi += (huber_psi(r, c) - expect) * lev_w[i] * sv * design.X.row(i).transpose();
        if (scoring) diag[i] = lev_w[i] * sv * v * (psi_one - psi_zero);
    }
    if (scoring) *scoring = design.X.transpose() * diag.asDiagonal() * design.X * inv_n;
    return phi * inv_n;
}

}  // namespace detail

// Root of the corrected estimating equation via damped Newton with a
// forward-difference Jacobian, warm-started at the plain score fit.
inline FitResult robust_m_estimator(const LogisticDesign& design, const Eigen::VectorXd& y,
                                    const EstimatorSpec& spec) {
    using Eigen::MatrixXd;
    using Eigen::VectorXd;
    const int n = design.n();
    const int q = design.q();
    if (y.size() != n) throw std::invalid_argument("robust_m_estimator: y length != n");
    if (!(spec.huber_c > 0.0)) throw std::invalid_argument("robust_m_estimator: huber_c <= 0");

    const VectorXd lev_w = leverage_weights(design);
    const double c = spec.huber_c;
    const double delta = spec.delta;

    FitResult start = logistic_irls(design, y, spec);
    VectorXd beta = start.theta_hat.allFinite() ? start.theta_hat : VectorXd::Zero(q);
    if (beta.lpNorm<Eigen::Infinity>() > 50.0) beta = VectorXd::Zero(q);
    // The estimating function vanishes at infinity, so on some samples it
    // has no root (the robust analogue of separation) and the iteration
    // would march outward forever. Confine it to a ball around the score
    // fit: an interior root is the estimate; ending on the boundary is the
    // non-existence case, flagged, with a bounded value.
    const double radius = 1.3 * beta.norm() + 5.0;

    FitResult out;
    MatrixXd scoring(q, q);
    VectorXd phi = detail::robust_estfun(design, y, lev_w, beta, c, delta, &scoring);
    double norm2 = phi.squaredNorm();
    double sup_norm = phi.lpNorm<Eigen::Infinity>();

    int it = 0;
    for (; it < spec.irls.max_iter; ++it) {
        sup_norm = phi.lpNorm<Eigen::Infinity>();
        if (sup_norm <= spec.irls.tol) break;

        VectorXd step =
            (scoring + 1e-10 * MatrixXd::Identity(q, q)).ldlt().solve(phi);
        if (!step.allFinite()) break;

        double scale = 1.0;
        bool accepted = false;
        for (int h = 0; h < 40; ++h) {
            VectorXd cand = beta + scale * step;
            if (cand.norm() > radius) cand *= radius / cand.norm();
            MatrixXd scoring_c(q, q);
            const VectorXd phi_c =
                detail::robust_estfun(design, y, lev_w, cand, c, delta, &scoring_c);
            if (phi_c.squaredNorm() < norm2 && cand != beta) {
                beta = cand;
                phi = phi_c;
                scoring = scoring_c;
                norm2 = phi_c.squaredNorm();
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if (!accepted) break;
    }

    sup_norm = phi.lpNorm<Eigen::Infinity>();
    out.theta_hat = beta;
    out.iterations = it;
    out.final_grad_norm = sup_norm;
    out.converged = sup_norm <= spec.irls.tol && beta.norm() < radius * (1.0 - 1e-9);
    return out;
}

}  // namespace ib

#endif
