#ifndef ITERBOOT_LOGISTIC_HPP
#define ITERBOOT_LOGISTIC_HPP

// Logistic regression fitters: the plain score-equation solver (IRLS with
// step halving, accepts fractional responses) and the adjusted-score
// variant whose solution stays finite under separation.

#include <Eigen/Dense>
#include <cmath>

#include "iterboot/data.hpp"
#include "iterboot/estimators.hpp"
#include "iterboot/numerics.hpp"

namespace ib {

namespace detail {

// fitted probabilities numerically at 0/1 mean the score root ran off to
// infinity; used to flag separation on raw binary responses
inline constexpr double kBoundaryEta = 13.8;  // |eta| with mu within 1e-6 of {0,1}

inline bool is_binary(const Eigen::VectorXd& y) {
    for (int i = 0; i < y.size(); ++i)
        if (y[i] != 0.0 && y[i] != 1.0) return false;
    return true;
}

inline double logistic_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& eta) {
    double ll = 0.0;
    for (int i = 0; i < y.size(); ++i) ll += bernoulli_loglik(y[i], sigmoid(eta[i]));
    return ll;
}

}  // namespace detail

// Solves (1/n) sum_i x_i (y_i - mu_i(beta)) = 0 by Newton steps with
// step-halving on the log-likelihood. Fractional y in [0,1] is allowed;
// the score equation is well defined for it.
inline FitResult logistic_irls(const LogisticDesign& design, const Eigen::VectorXd& y,
                               const EstimatorSpec& spec) {
    using Eigen::MatrixXd;
    using Eigen::VectorXd;
    const int n = design.n();
    const int q = design.q();
    if (y.size() != n) throw std::invalid_argument("logistic_irls: y length != n");
    for (int i = 0; i < n; ++i)
        if (!(y[i] >= 0.0 && y[i] <= 1.0))
            throw std::invalid_argument("logistic_irls: responses outside [0,1]");

    FitResult out;
    VectorXd beta = VectorXd::Zero(q);
    VectorXd eta = design.X * beta;
    double ll = detail::logistic_loglik(y, eta);

    const double inv_n = 1.0 / static_cast<double>(n);
    double score_norm = std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < spec.irls.max_iter; ++it) {
        VectorXd mu(n), w(n);
        for (int i = 0; i < n; ++i) {
            mu[i] = sigmoid(eta[i]);
            w[i] = std::max(mu[i] * (1.0 - mu[i]), 1e-12);
        }
        const VectorXd score = design.X.transpose() * (y - mu) * inv_n;
        score_norm = score.lpNorm<Eigen::Infinity>();
        if (score_norm <= spec.irls.tol) break;

        const MatrixXd info = design.X.transpose() * w.asDiagonal() * design.X * inv_n;
        VectorXd step = info.ldlt().solve(score);
        if (!step.allFinite()) break;

        // step halving keeps the likelihood from being overshot
        double scale = 1.0;
        for (int h = 0; h < 20; ++h) {
            const VectorXd cand = beta + scale * step;
            const VectorXd eta_c = design.X * cand;
            const double ll_c = detail::logistic_loglik(y, eta_c);
            if (ll_c >= ll - 1e-12) {
                beta = cand;
                eta = eta_c;
                ll = ll_c;
                break;
            }
            scale *= 0.5;
        }
        if (beta.lpNorm<Eigen::Infinity>() > 1e6) break;  // runaway iterates
    }

    out.theta_hat = beta;
    out.iterations = it;
    out.final_grad_norm = score_norm;
    out.converged = score_norm <= spec.irls.tol;

    // on binary data a "root" with saturated fitted probabilities is the
    // non-existence case (separation), not a usable estimate
    if (out.converged && detail::is_binary(y) &&
        eta.lpNorm<Eigen::Infinity>() > detail::kBoundaryEta) {
        out.converged = false;
    }
    return out;
}

// sqrt(1 - h_ii) from the unweighted hat matrix X (X'X)^-1 X'
inline Eigen::VectorXd leverage_weights(const LogisticDesign& design) {
    const Eigen::MatrixXd xtx = design.X.transpose() * design.X;
    const Eigen::LDLT<Eigen::MatrixXd> solver(xtx);
    Eigen::VectorXd w(design.n());
    for (int i = 0; i < design.n(); ++i) {
        const Eigen::VectorXd xi = design.X.row(i).transpose();
        const double h = xi.dot(solver.solve(xi));
        w[i] = std::sqrt(std::max(0.0, 1.0 - std::min(1.0, h)));
    }
    return w;
}

// Adjusted-score fit: sum_i x_i [y_i - mu_i + h_i (1/2 - mu_i)] = 0 with
// h_i the leverage of the weighted design. Equivalent to maximizing the
// likelihood penalized by (1/2) log det X'WX, which keeps the solution
// finite under separation.
inline FitResult logistic_firth(const LogisticDesign& design, const Eigen::VectorXd& y,
                                const EstimatorSpec& spec) {
    using Eigen::MatrixXd;
    using Eigen::VectorXd;
    const int n = design.n();
    const int q = design.q();
    if (y.size() != n) throw std::invalid_argument("logistic_firth: y length != n");
    if (!detail::is_binary(y))
        throw std::invalid_argument("logistic_firth: responses must be binary");

    auto penalized_ll = [&](const VectorXd& eta, const MatrixXd& info) {
        const double ll = detail::logistic_loglik(y, eta);
        const Eigen::LLT<MatrixXd> llt(info);
        if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
        double logdet = 0.0;
        for (int j = 0; j < q; ++j) logdet += std::log(llt.matrixL()(j, j));
        return ll + logdet;  // logdet = (1/2) log det(info)
    };

    FitResult out;
    VectorXd beta = VectorXd::Zero(q);
    const double inv_n = 1.0 / static_cast<double>(n);
    double adj_norm = std::numeric_limits<double>::infinity();

    VectorXd eta = design.X * beta;
    VectorXd mu(n), w(n);
    MatrixXd info;
    double pll = -std::numeric_limits<double>::infinity();

    auto refresh = [&](const VectorXd& b) {
        eta = design.X * b;
        for (int i = 0; i < n; ++i) {
            mu[i] = sigmoid(eta[i]);
            w[i] = std::max(mu[i] * (1.0 - mu[i]), 1e-12);
        }
        info = design.X.transpose() * w.asDiagonal() * design.X;
    };
    refresh(beta);
    pll = penalized_ll(eta, info);

    int it = 0;
    for (; it < spec.irls.max_iter; ++it) {
        // leverages of the weighted design
        const Eigen::LDLT<MatrixXd> solver(info);
        VectorXd adj_resid(n);
        for (int i = 0; i < n; ++i) {
            const VectorXd xi = design.X.row(i).transpose();
            const double h = w[i] * xi.dot(solver.solve(xi));
            adj_resid[i] = y[i] - mu[i] + h * (0.5 - mu[i]);
        }
        const VectorXd adj_score = design.X.transpose() * adj_resid * inv_n;
        adj_norm = adj_score.lpNorm<Eigen::Infinity>();
        if (adj_norm <= spec.irls.tol) break;

        VectorXd step = solver.solve(design.X.transpose() * adj_resid);
        if (!step.allFinite()) break;

        double scale = 1.0;
        for (int h = 0; h < 20; ++h) {
            const VectorXd cand = beta + scale * step;
            VectorXd eta_c = design.X * cand;
            VectorXd w_c(n);
            for (int i = 0; i < n; ++i) {
                const double m = sigmoid(eta_c[i]);
                w_c[i] = std::max(m * (1.0 - m), 1e-12);
            }
            const MatrixXd info_c = design.X.transpose() * w_c.asDiagonal() * design.X;
            const double pll_c = penalized_ll(eta_c, info_c);
            if (pll_c >= pll - 1e-12) {
                beta = cand;
                refresh(beta);
                pll = pll_c;
                break;
            }
            scale *= 0.5;
        }
    }

    out.theta_hat = beta;
    out.iterations = it;
    out.final_grad_norm = adj_norm;
    out.converged = adj_norm <= spec.irls.tol;
    return out;
}

}  // namespace ib

#endif
