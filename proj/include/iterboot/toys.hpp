#ifndef ITERBOOT_TOYS_HPP
#define ITERBOOT_TOYS_HPP

// Oracle problems with known binding functions. Both toys expose an exact
// route (the deterministic expectation of the initial estimator, playing
// the role of an infinite simulation budget) and a Monte Carlo twin, so
// engine properties can be checked with and without simulation noise.

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "iterboot/ib.hpp"
#include "iterboot/rng.hpp"

namespace ib {

// Affine-bias estimator family: the mean of the initial estimator is
//   pi(theta, n) = (I + M + L_n) theta + s + c_n
// with M the asymptotic bias slope (contractive when ||M||_F < 1), s the
// constant offset, and L_n, c_n the vanishing finite-sample parts.
struct LinearBiasToy {
    Eigen::MatrixXd M;
    Eigen::VectorXd s;
    Eigen::MatrixXd L_n;
    Eigen::VectorXd c_n;
    double noise_sd = 0.0;
    int n = 100;

    static LinearBiasToy identity_toy(int p, int n = 100) {
        LinearBiasToy t;
        t.M = Eigen::MatrixXd::Zero(p, p);
        t.s = Eigen::VectorXd::Zero(p);
        t.L_n = Eigen::MatrixXd::Zero(p, p);
        t.c_n = Eigen::VectorXd::Zero(p);
        t.n = n;
        return t;
    }

    int dim() const { return static_cast<int>(s.size()); }

    void validate() const {
        const int p = dim();
        if (M.rows() != p || M.cols() != p || L_n.rows() != p || L_n.cols() != p ||
            c_n.size() != p)
            throw std::invalid_argument("LinearBiasToy: inconsistent dimensions");
        if (!M.allFinite() || !s.allFinite() || !L_n.allFinite() || !c_n.allFinite())
            throw std::invalid_argument("LinearBiasToy: non-finite fields");
        if (n < 1) throw std::invalid_argument("LinearBiasToy: n < 1");
    }

    bool contractive() const { return M.norm() < 1.0; }  // Frobenius norm

    Eigen::VectorXd binding_exact(const Eigen::VectorXd& theta) const {
        return theta + M * theta + s + L_n * theta + c_n;
    }

    // root of pi(theta) = pi_obs
    Eigen::VectorXd fixed_point_closed_form(const Eigen::VectorXd& pi_obs) const {
        const int p = dim();
        const Eigen::MatrixXd B = Eigen::MatrixXd::Identity(p, p) + M + L_n;
        const Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
        if (!lu.isInvertible())
            throw std::invalid_argument("LinearBiasToy: I + M + L_n is singular");
        return lu.solve(pi_obs - s - c_n);
    }

    // one draw of the initial estimator: exact mean plus zero-mean noise
    Eigen::VectorXd simulate_pi(const Eigen::VectorXd& theta, std::uint64_t seed) const {
        Eigen::VectorXd out = binding_exact(theta);
        if (noise_sd > 0.0) {
            Xoshiro256pp gen(seed);
            const double sd = noise_sd / std::sqrt(static_cast<double>(n));
            for (int j = 0; j < out.size(); ++j) out[j] += gen.normal(0.0, sd);
        }
        return out;
    }

    ProblemBinding exact_problem() const {
        validate();
        ProblemBinding b;
        b.dim = dim();
        const LinearBiasToy toy = *this;
        b.exact_binding = [toy](const Eigen::VectorXd& theta) { return toy.binding_exact(theta); };
        return b;
    }

    ProblemBinding mc_problem() const {
        validate();
        ProblemBinding b;
        b.dim = dim();
        const LinearBiasToy toy = *this;
        b.simulate_fit = [toy](const Eigen::VectorXd& theta, std::uint64_t seed) {
            FitResult f;
            f.theta_hat = toy.simulate_pi(theta, seed);
            f.converged = true;
            return f;
        };
        return b;
    }
};

// Scalar variance estimation with the divisor-n estimator on N(0, theta)
// samples: pi(theta, n) = theta (1 - 1/n), so the initial estimator
// carries the classical O(1/n) downward bias.
struct VarianceToy {
    int n = 10;

    void validate() const {
        if (n < 2) throw std::invalid_argument("VarianceToy: n < 2");
    }

    double binding_exact(double theta) const {
        return theta * (1.0 - 1.0 / static_cast<double>(n));
    }

    double fixed_point_closed_form(double pi_obs) const {
        return pi_obs * static_cast<double>(n) / static_cast<double>(n - 1);
    }

    // n draws from N(0, sqrt(theta)), then the divisor-n variance
    double simulate_pi(double theta, std::uint64_t seed) const {
        const double sd = std::sqrt(std::max(theta, 0.0));
        Xoshiro256pp gen(seed);
        double sum = 0.0, sumsq = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = gen.normal(0.0, sd);
            sum += x;
            sumsq += x * x;
        }
        const double mean = sum / static_cast<double>(n);
        return sumsq / static_cast<double>(n) - mean * mean;
    }

    Eigen::VectorXd simulate_sample(double theta, std::uint64_t seed) const {
        const double sd = std::sqrt(std::max(theta, 0.0));
        Xoshiro256pp gen(seed);
        Eigen::VectorXd x(n);
        for (int i = 0; i < n; ++i) x[i] = gen.normal(0.0, sd);
        return x;
    }

    static double divisor_n_variance(const Eigen::VectorXd& x) {
        const double mean = x.mean();
        return (x.array() - mean).square().sum() / static_cast<double>(x.size());
    }

    ProblemBinding exact_problem() const {
        validate();
        ProblemBinding b;
        b.dim = 1;
        const VarianceToy toy = *this;
        b.exact_binding = [toy](const Eigen::VectorXd& theta) {
            Eigen::VectorXd out(1);
            out[0] = toy.binding_exact(theta[0]);
            return out;
        };
        return b;
    }

    ProblemBinding mc_problem() const {
        validate();
        ProblemBinding b;
        b.dim = 1;
        const VarianceToy toy = *this;
        b.simulate_fit = [toy](const Eigen::VectorXd& theta, std::uint64_t seed) {
            FitResult f;
            f.theta_hat.resize(1);
            f.theta_hat[0] = toy.simulate_pi(theta[0], seed);
            f.converged = true;
            return f;
        };
        return b;
    }
};

}  // namespace ib

#endif
