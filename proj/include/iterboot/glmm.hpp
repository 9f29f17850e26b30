#ifndef ITERBOOT_GLMM_HPP
#define ITERBOOT_GLMM_HPP

// Random-intercept logistic model. Two fitters share the parameter packing
// (beta0, beta_1..beta_q, log sigma^2):
//   - glmm_pirls: joint penalized mode in (beta, u) with the variance
//     profiled against a Laplace-at-mode criterion. Fast, usable as an
//     initial estimator, not asymptotically exact.
//   - glmm_ghq: marginal likelihood by mode-centered, curvature-scaled
//     Gauss-Hermite quadrature, maximized over all parameters.

#include <Eigen/Dense>
#include <cmath>
#include <optional>

#include "iterboot/data.hpp"
#include "iterboot/estimators.hpp"
#include "iterboot/logistic.hpp"
#include "iterboot/numerics.hpp"

namespace ib {

// log sigma^2 is clamped to this window (sigma^2 in [1e-8, 1e4])
inline constexpr double kLogSigma2Floor = -18.420680743952367;
inline constexpr double kLogSigma2Ceil = 9.210340371976184;

struct GaussHermiteRule {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;  // for the weight function exp(-x^2)
};

// Golub-Welsch on the Hermite Jacobi matrix
inline GaussHermiteRule gauss_hermite(int k) {
    if (k < 1) throw std::invalid_argument("gauss_hermite: need at least one node");
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(k, k);
    for (int i = 1; i < k; ++i) {
        const double b = std::sqrt(static_cast<double>(i) / 2.0);
        jac(i, i - 1) = b;
        jac(i - 1, i) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
    GaussHermiteRule rule;
    rule.nodes = es.eigenvalues();
    rule.weights.resize(k);
    const double sqrt_pi = std::sqrt(3.14159265358979323846);
    for (int i = 0; i < k; ++i) {
        const double v0 = es.eigenvectors()(0, i);
        rule.weights[i] = sqrt_pi * v0 * v0;
    }
    return rule;
}

namespace detail {

struct GlmmWork {
    Eigen::MatrixXd Xf;  // [1 | X], n x (q+1)
    const GlmmDesign* design;
    std::vector<std::vector<int>> members;  // row indices per cluster
};

inline GlmmWork glmm_work(const GlmmDesign& d) {
    GlmmWork w;
    w.Xf.resize(d.n(), d.q() + 1);
    w.Xf.col(0).setOnes();
    if (d.q() > 0) w.Xf.rightCols(d.q()) = d.X;
    w.design = &d;
    w.members.resize(static_cast<std::size_t>(d.m));
    for (int i = 0; i < d.n(); ++i)
        w.members[static_cast<std::size_t>(d.cluster[static_cast<std::size_t>(i)])].push_back(i);
    return w;
}

// penalized log-likelihood in (beta, u) at fixed sigma^2
inline double glmm_penalized_ll(const GlmmWork& w, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& beta_full, const Eigen::VectorXd& u,
                                double sigma2) {
    const GlmmDesign& d = *w.design;
    const Eigen::VectorXd eta_fix = w.Xf * beta_full;
    double ll = 0.0;
    for (int i = 0; i < d.n(); ++i)
        ll += bernoulli_loglik(y[i], sigmoid(eta_fix[i] + u[d.cluster[static_cast<std::size_t>(i)]]));
    ll -= u.squaredNorm() / (2.0 * sigma2);
    return ll;
}

struct PirlsState {
    Eigen::VectorXd beta_full;  // q+1
    Eigen::VectorXd u;          // m
    double penalized_ll = 0.0;
    double grad_norm = 0.0;
    bool converged = false;
    Eigen::VectorXd cluster_w;  // per-cluster curvature sums at the mode
};

// joint Newton over (beta, u) for fixed sigma^2, step halving on the
// penalized log-likelihood
inline PirlsState pirls_inner(const GlmmWork& w, const Eigen::VectorXd& y, double sigma2,
                              Eigen::VectorXd beta0, Eigen::VectorXd u0, double tol,
                              int max_iter) {
    using Eigen::MatrixXd;
    using Eigen::VectorXd;
    const GlmmDesign& d = *w.design;
    const int n = d.n();
    const int p_fix = static_cast<int>(w.Xf.cols());
    const int m = d.m;

    PirlsState st;
    st.beta_full = std::move(beta0);
    st.u = std::move(u0);
    st.penalized_ll = glmm_penalized_ll(w, y, st.beta_full, st.u, sigma2);

    VectorXd mu(n), wvec(n);
    st.cluster_w.resize(m);
    for (int it = 0; it < max_iter; ++it) {
        const VectorXd eta_fix = w.Xf * st.beta_full;
        st.cluster_w.setZero();
        VectorXd grad_u = VectorXd::Zero(m);
        for (int i = 0; i < n; ++i) {
            const int c = d.cluster[static_cast<std::size_t>(i)];
            mu[i] = sigmoid(eta_fix[i] + st.u[c]);
            wvec[i] = std::max(mu[i] * (1.0 - mu[i]), 1e-12);
            st.cluster_w[c] += wvec[i];
            grad_u[c] += y[i] - mu[i];
        }
        const VectorXd grad_beta = w.Xf.transpose() * (y - mu);
        grad_u -= st.u / sigma2;

        double gn = grad_beta.lpNorm<Eigen::Infinity>();
        gn = std::max(gn, grad_u.lpNorm<Eigen::Infinity>());
        st.grad_norm = gn;
        if (gn <= tol) {
            st.converged = true;
            return st;
        }

        MatrixXd H = MatrixXd::Zero(p_fix + m, p_fix + m);
        H.topLeftCorner(p_fix, p_fix) = w.Xf.transpose() * wvec.asDiagonal() * w.Xf;
        for (int i = 0; i < n; ++i) {
            const int c = d.cluster[static_cast<std::size_t>(i)];
            H.block(0, p_fix + c, p_fix, 1) += wvec[i] * w.Xf.row(i).transpose();
        }
        H.bottomLeftCorner(m, p_fix) = H.topRightCorner(p_fix, m).transpose();
        for (int c = 0; c < m; ++c) H(p_fix + c, p_fix + c) = st.cluster_w[c] + 1.0 / sigma2;

        VectorXd g(p_fix + m);
        g.head(p_fix) = grad_beta;
        g.tail(m) = grad_u;
        VectorXd step = H.ldlt().solve(g);
        if (!step.allFinite()) return st;

        double scale = 1.0;
        bool accepted = false;
        for (int hs = 0; hs < 20; ++hs) {
            const VectorXd cand_b = st.beta_full + scale * step.head(p_fix);
            const VectorXd cand_u = st.u + scale * step.tail(m);
            const double cand_ll = glmm_penalized_ll(w, y, cand_b, cand_u, sigma2);
            if (cand_ll >= st.penalized_ll - 1e-12) {
                st.beta_full = cand_b;
                st.u = cand_u;
                st.penalized_ll = cand_ll;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if (!accepted) return st;
    }
    return st;
}

}  // namespace detail

// Returns (beta0, beta, log sigma2_hat). The variance profile uses the
// Laplace-at-joint-mode criterion
//   pen_ll(beta_hat, u_hat) - (1/2) sum_i log(1 + sigma^2 W_i).
inline FitResult glmm_pirls(const GlmmDesign& design, const Eigen::VectorXd& y,
                            const EstimatorSpec& spec) {
    using Eigen::VectorXd;
    const int q = design.q();
    if (y.size() != design.n()) throw std::invalid_argument("glmm_pirls: y length != n");
    if (design.m < 2) throw std::invalid_argument("glmm_pirls: need at least 2 clusters");

    FitResult out;
    out.theta_hat = VectorXd::Zero(q + 2);

    // no within-cluster replication: the variance component is not
    // identified; report the pooled fit with the variance at its floor
    bool any_repl = false;
    for (int sz : design.cluster_sizes)
        if (sz > 1) { any_repl = true; break; }

    const detail::GlmmWork w = detail::glmm_work(design);

    // pooled logistic start
    LogisticDesign pooled(w.Xf);
    EstimatorSpec pooled_spec = spec;
    pooled_spec.kind = EstimatorKind::LogisticMLE;
    FitResult pooled_fit = logistic_irls(pooled, y, pooled_spec);
    VectorXd beta_start = pooled_fit.theta_hat;
    if (!beta_start.allFinite()) beta_start = VectorXd::Zero(q + 1);

    if (!any_repl) {
        out.theta_hat.head(q + 1) = beta_start;
        out.theta_hat[q + 1] = kLogSigma2Floor;
        out.at_boundary = true;
        out.converged = false;
        out.final_grad_norm = pooled_fit.final_grad_norm;
        return out;
    }

    // Profile the variance against the Laplace criterion at the joint mode,
    //   pen_ll(beta_hat, u_hat) - (1/2) sum_c log(1 + sigma2 W_c),
    // warm-starting each inner solve from the previous mode. A boundary
    // solution (the criterion peaks at the variance floor) is a legitimate
    // value of the statistic and is flagged, not failed.
    VectorXd beta_cur = beta_start;
    VectorXd u_cur = VectorXd::Zero(design.m);
    const double inner_tol = std::max(spec.irls.tol, 1e-7);
    detail::PirlsState st;
    int evals = 0;
    auto neg_criterion = [&](double log_s2) {
        const double s2 = std::exp(log_s2);
        st = detail::pirls_inner(w, y, s2, beta_cur, u_cur, inner_tol, spec.irls.max_iter);
        ++evals;
        if (st.converged) {
            beta_cur = st.beta_full;
            u_cur = st.u;
        }
        double crit = st.penalized_ll;
        for (int c = 0; c < design.m; ++c) crit -= 0.5 * std::log1p(s2 * st.cluster_w[c]);
        return -crit;
    };

    double log_s2 = brent_minimize(neg_criterion, kLogSigma2Floor, kLogSigma2Ceil, 1e-7, 200);
    // the bracketing minimizer never probes the endpoints; accept the floor
    // when it beats the interior candidate
    if (neg_criterion(kLogSigma2Floor) < neg_criterion(log_s2)) log_s2 = kLogSigma2Floor;
    neg_criterion(log_s2);  // leave st at the solution

    out.theta_hat.head(q + 1) = st.beta_full;
    out.theta_hat[q + 1] = log_s2;
    out.iterations = evals;
    out.final_grad_norm = st.grad_norm;
    out.converged = st.converged;
    if (log_s2 <= kLogSigma2Floor + 1e-6 || log_s2 >= kLogSigma2Ceil - 1e-6)
        out.at_boundary = true;
    return out;
}

// Marginal MLE by adaptive Gauss-Hermite quadrature. `fixed_log_sigma2`
// pins the variance so only the regression part is maximized.
inline FitResult glmm_ghq(const GlmmDesign& design, const Eigen::VectorXd& y,
                          const EstimatorSpec& spec,
                          std::optional<double> fixed_log_sigma2 = {}) {
    using Eigen::VectorXd;
    const int q = design.q();
    const int n = design.n();
    if (y.size() != n) throw std::invalid_argument("glmm_ghq: y length != n");
    for (int i = 0; i < n; ++i)
        if (y[i] != 0.0 && y[i] != 1.0)
            throw std::invalid_argument("glmm_ghq: responses must be binary");

    const detail::GlmmWork w = detail::glmm_work(design);
    const GaussHermiteRule rule = gauss_hermite(spec.ghq_nodes);
    const double sqrt2 = std::sqrt(2.0);
    const double log_2pi = std::log(2.0 * 3.14159265358979323846);

    // marginal log-likelihood at packed (beta0, beta, log sigma2)
    auto marginal_ll = [&](const VectorXd& theta) {
        const VectorXd beta_full = theta.head(q + 1);
        const double log_s2 = std::min(std::max(theta[q + 1], kLogSigma2Floor), kLogSigma2Ceil);
        const double s2 = std::exp(log_s2);
        const VectorXd eta_fix = w.Xf * beta_full;

        if (s2 < 1e-12) {  // integral collapses to the pooled model
            double ll = 0.0;
            for (int i = 0; i < n; ++i) ll += bernoulli_loglik(y[i], sigmoid(eta_fix[i]));
            return ll;
        }

        // group observations per cluster once
        double total = 0.0;
        for (int c = 0; c < design.m; ++c) {
            // conditional log-density and derivatives in u
            const auto& rows = w.members[static_cast<std::size_t>(c)];
            auto cond = [&](double u, double* d1, double* d2) {
                double g = -u * u / (2.0 * s2) - 0.5 * (log_2pi + log_s2);
                double g1 = -u / s2;
                double g2 = -1.0 / s2;
                for (const int i : rows) {
                    const double mu = sigmoid(eta_fix[i] + u);
                    g += bernoulli_loglik(y[i], mu);
                    g1 += y[i] - mu;
                    g2 -= std::max(mu * (1.0 - mu), 1e-12);
                }
                if (d1) *d1 = g1;
                if (d2) *d2 = g2;
                return g;
            };

            // posterior mode by Newton with halving (the integrand is
            // strictly log-concave in u)
            double u_hat = 0.0;
            double g = cond(u_hat, nullptr, nullptr);
            for (int it = 0; it < 50; ++it) {
                double g1, g2;
                cond(u_hat, &g1, &g2);
                if (std::fabs(g1) < 1e-11) break;
                double step = -g1 / g2;
                double scale = 1.0;
                for (int hs = 0; hs < 30; ++hs) {
                    const double cand = u_hat + scale * step;
                    const double gc = cond(cand, nullptr, nullptr);
                    if (gc >= g - 1e-14) {
                        u_hat = cand;
                        g = gc;
                        break;
                    }
                    scale *= 0.5;
                }
            }
            double g1, g2;
            cond(u_hat, &g1, &g2);
            const double tau = 1.0 / std::sqrt(-g2);

            // sum_k w_k exp(g(u_hat + sqrt2 tau x_k) + x_k^2), log-sum-exp
            double max_exp = -std::numeric_limits<double>::infinity();
            VectorXd terms(spec.ghq_nodes);
            for (int k = 0; k < spec.ghq_nodes; ++k) {
                const double u = u_hat + sqrt2 * tau * rule.nodes[k];
                terms[k] = std::log(rule.weights[k]) + cond(u, nullptr, nullptr) +
                           rule.nodes[k] * rule.nodes[k];
                max_exp = std::max(max_exp, terms[k]);
            }
            double acc = 0.0;
            for (int k = 0; k < spec.ghq_nodes; ++k) acc += std::exp(terms[k] - max_exp);
            total += std::log(sqrt2 * tau) + max_exp + std::log(acc);
        }
        return total;
    };

    // warm start at the cheap joint-mode fit
    VectorXd start(q + 2);
    if (design.m >= 2 && !fixed_log_sigma2) {
        EstimatorSpec pspec = spec;
        pspec.kind = EstimatorKind::GlmmPIRLS;
        const FitResult pirls = glmm_pirls(design, y, pspec);
        start = pirls.theta_hat;
    } else {
        LogisticDesign pooled(w.Xf);
        EstimatorSpec pooled_spec = spec;
        pooled_spec.kind = EstimatorKind::LogisticMLE;
        const FitResult pf = logistic_irls(pooled, y, pooled_spec);
        start.head(q + 1) = pf.theta_hat.allFinite() ? pf.theta_hat : VectorXd::Zero(q + 1);
        start[q + 1] = fixed_log_sigma2 ? *fixed_log_sigma2 : std::log(0.5);
    }

    FitResult out;
    if (fixed_log_sigma2) {
        const double ls2 = *fixed_log_sigma2;
        auto negll = [&](const VectorXd& b) {
            VectorXd theta(q + 2);
            theta.head(q + 1) = b;
            theta[q + 1] = ls2;
            return -marginal_ll(theta);
        };
        const MinimizeResult res = bfgs_minimize(negll, start.head(q + 1), 1e-5, 150);
        out.theta_hat.resize(q + 2);
        out.theta_hat.head(q + 1) = res.x;
        out.theta_hat[q + 1] = ls2;
        out.converged = res.converged;
        out.iterations = res.iterations;
        out.final_grad_norm = res.grad_norm;
    } else {
        auto negll = [&](const VectorXd& th) { return -marginal_ll(th); };
        const MinimizeResult res = bfgs_minimize(negll, start, 1e-5, 150);
        out.theta_hat = res.x;
        out.theta_hat[q + 1] =
            std::min(std::max(out.theta_hat[q + 1], kLogSigma2Floor), kLogSigma2Ceil);
        out.converged = res.converged;
        out.iterations = res.iterations;
        out.final_grad_norm = res.grad_norm;
        if (out.theta_hat[q + 1] <= kLogSigma2Floor + 1e-6) out.at_boundary = true;
    }
    if (!out.theta_hat.allFinite()) out.converged = false;
    return out;
}

}  // namespace ib

#endif
