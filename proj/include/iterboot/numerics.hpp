#ifndef ITERBOOT_NUMERICS_HPP
#define ITERBOOT_NUMERICS_HPP

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace ib {

inline double sigmoid(double eta) noexcept {
    // split at 0 so neither branch overflows
    if (eta >= 0.0) {
        const double e = std::exp(-eta);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

// log Bernoulli(y | mu) for fractional y in [0,1]; clamps mu away from
// the boundary so saturated fits stay finite
inline double bernoulli_loglik(double y, double mu) noexcept {
    const double m = std::min(std::max(mu, 1e-15), 1.0 - 1e-15);
    return y * std::log(m) + (1.0 - y) * std::log(1.0 - m);
}

// Mean over a fixed-order pairwise reduction. The tree shape depends only
// on the element count, so the result is identical no matter how the
// inputs were produced (serial or parallel workers).
inline Eigen::VectorXd pairwise_sum(const std::vector<Eigen::VectorXd>& xs,
                                    std::size_t lo, std::size_t hi) {
    if (hi - lo <= 8) {
        Eigen::VectorXd acc = xs[lo];
        for (std::size_t i = lo + 1; i < hi; ++i) acc += xs[i];
        return acc;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    return pairwise_sum(xs, lo, mid) + pairwise_sum(xs, mid, hi);
}

inline Eigen::VectorXd pairwise_mean(const std::vector<Eigen::VectorXd>& xs) {
    if (xs.empty()) throw std::invalid_argument("pairwise_mean: empty input");
    return pairwise_sum(xs, 0, xs.size()) / static_cast<double>(xs.size());
}

// Inverse standard normal CDF. Acklam's rational approximation followed by
// one Halley step against erfc, giving near machine precision without any
// external dependency.
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p outside (0,1)");

    static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                -2.759285104469687e+02, 1.383577518672690e+02,
                                -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                -1.556989798598866e+02, 6.680131188771972e+01,
                                -1.328068155288572e+01};
    static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                -2.400758277161838e+00, -2.549732539343734e+00,
                                4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;

    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    // Halley refinement: e = Phi(x) - p
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * std::sqrt(2.0 * 3.14159265358979323846) * std::exp(x * x / 2.0);
    x = x - u / (1.0 + x * u / 2.0);
    return x;
}

// Brent-style derivative-free 1-D minimizer on [lo, hi].
inline double brent_minimize(const std::function<double(double)>& f, double lo, double hi,
                             double tol = 1e-10, int max_iter = 200) {
    const double gold = 0.3819660112501051;
    double a = lo, b = hi;
    double x = a + gold * (b - a), w = x, v = x;
    double fx = f(x), fw = fx, fv = fx;
    double d = 0.0, e = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        const double m = 0.5 * (a + b);
        const double tol1 = tol * (std::fabs(x) + 1e-12);
        const double tol2 = 2.0 * tol1;
        if (std::fabs(x - m) <= tol2 - 0.5 * (b - a)) break;
        bool parabolic = false;
        if (std::fabs(e) > tol1) {
            const double r = (x - w) * (fx - fv);
            double q = (x - v) * (fx - fw);
            double pnum = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if (q > 0.0) pnum = -pnum;
            q = std::fabs(q);
            const double e_old = e;
            e = d;
            if (std::fabs(pnum) < std::fabs(0.5 * q * e_old) && pnum > q * (a - x) &&
                pnum < q * (b - x)) {
                d = pnum / q;
                const double u = x + d;
                if (u - a < tol2 || b - u < tol2) d = (x < m) ? tol1 : -tol1;
                parabolic = true;
            }
        }
        if (!parabolic) {
            e = (x < m) ? (b - x) : (a - x);
            d = gold * e;
        }
        const double u = (std::fabs(d) >= tol1) ? (x + d) : (x + ((d > 0) ? tol1 : -tol1));
        const double fu = f(u);
        if (fu <= fx) {
            if (u < x) b = x; else a = x;
            v = w; fv = fw;
            w = x; fw = fx;
            x = u; fx = fu;
        } else {
            if (u < x) a = u; else b = u;
            if (fu <= fw || w == x) {
                v = w; fv = fw;
                w = u; fw = fu;
            } else if (fu <= fv || v == x || v == w) {
                v = u; fv = fu;
            }
        }
    }
    return x;
}

struct MinimizeResult {
    Eigen::VectorXd x;
    double fval = std::numeric_limits<double>::quiet_NaN();
    bool converged = false;
    int iterations = 0;
    double grad_norm = std::numeric_limits<double>::quiet_NaN();
};

// BFGS with central-difference gradients and backtracking line search.
// Meant for small smooth problems (p up to a few dozen).
inline MinimizeResult bfgs_minimize(const std::function<double(const Eigen::VectorXd&)>& f,
                                    const Eigen::VectorXd& x0, double grad_tol = 1e-7,
                                    int max_iter = 200) {
    using Eigen::MatrixXd;
    using Eigen::VectorXd;
    const int p = static_cast<int>(x0.size());

    auto grad = [&](const VectorXd& x) {
        VectorXd g(p);
        for (int j = 0; j < p; ++j) {
            const double h = 1e-6 * (1.0 + std::fabs(x[j]));
            VectorXd xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            g[j] = (f(xp) - f(xm)) / (xp[j] - xm[j]);
        }
        return g;
    };

    MinimizeResult out;
    VectorXd x = x0;
    double fx = f(x);
    VectorXd g = grad(x);
    MatrixXd Hinv = MatrixXd::Identity(p, p);

    int it = 0;
    for (; it < max_iter; ++it) {
        if (g.lpNorm<Eigen::Infinity>() <= grad_tol) {
            out.converged = true;
            break;
        }
        VectorXd dir = -Hinv * g;
        if (dir.dot(g) >= 0.0) dir = -g;  // reset on loss of descent

        double step = 1.0;
        double f_new = fx;
        VectorXd x_new = x;
        bool ok = false;
        for (int ls = 0; ls < 40; ++ls) {
            x_new = x + step * dir;
            f_new = f(x_new);
            if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * g.dot(dir)) {
                ok = true;
                break;
            }
            step *= 0.5;
        }
        if (!ok) break;

        const VectorXd g_new = grad(x_new);
        const VectorXd s = x_new - x;
        const VectorXd yv = g_new - g;
        const double sy = s.dot(yv);
        if (sy > 1e-14) {
            const double rho = 1.0 / sy;
            const MatrixXd I = MatrixXd::Identity(p, p);
            Hinv = (I - rho * s * yv.transpose()) * Hinv * (I - rho * yv * s.transpose()) +
                   rho * s * s.transpose();
        }
        x = x_new;
        fx = f_new;
        g = g_new;
    }
    out.x = x;
    out.fval = fx;
    out.iterations = it;
    out.grad_norm = g.lpNorm<Eigen::Infinity>();
    if (out.grad_norm <= grad_tol) out.converged = true;
    return out;
}

}  // namespace ib

#endif
