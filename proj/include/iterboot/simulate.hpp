#ifndef ITERBOOT_SIMULATE_HPP
#define ITERBOOT_SIMULATE_HPP

// Data generators for the two models. Both are pure functions of
// (design, parameters, seed): the same inputs reproduce the same sample
// bit for bit, regardless of threads or call order.

#include <Eigen/Dense>
#include <stdexcept>

#include "iterboot/data.hpp"
#include "iterboot/numerics.hpp"
#include "iterboot/rng.hpp"

namespace ib {

// y_i ~ Bernoulli(sigmoid(x_i' beta)), independent across i
inline Eigen::VectorXd simulate_logistic(const LogisticDesign& design,
                                         const Eigen::VectorXd& beta, std::uint64_t seed) {
    if (beta.size() != design.q())
        throw std::invalid_argument("simulate_logistic: dim(beta) != q");
    // sub-key 1 is the response stream (0 is reserved for latent effects,
    // which this model does not have; keeps draws aligned with the GLMM
    // at sigma^2 = 0)
    Xoshiro256pp gen(subkey(seed, 1));
    const Eigen::VectorXd eta = design.X * beta;
    Eigen::VectorXd y(design.n());
    for (int i = 0; i < design.n(); ++i) y[i] = gen.bernoulli(sigmoid(eta[i])) ? 1.0 : 0.0;
    return y;
}

struct GlmmParams {
    double beta0 = 0.0;
    Eigen::VectorXd beta;  // q slopes
    double sigma2 = 0.0;
};

// logit(mu_ij) = beta0 + x_ij' beta + u_i, u_i ~ N(0, sigma2) per cluster
inline Eigen::VectorXd simulate_glmm(const GlmmDesign& design, const GlmmParams& params,
                                     std::uint64_t seed) {
    if (params.beta.size() != design.q())
        throw std::invalid_argument("simulate_glmm: dim(beta) != q");
    if (!(params.sigma2 >= 0.0)) throw std::invalid_argument("simulate_glmm: sigma2 < 0");

    Xoshiro256pp gen_u(subkey(seed, 0));
    Xoshiro256pp gen_y(subkey(seed, 1));

    const double sd = std::sqrt(params.sigma2);
    Eigen::VectorXd u(design.m);
    for (int i = 0; i < design.m; ++i) u[i] = sd == 0.0 ? 0.0 : gen_u.normal(0.0, sd);

    Eigen::VectorXd eta = design.X * params.beta;
    Eigen::VectorXd y(design.n());
    for (int i = 0; i < design.n(); ++i) {
        const double e = params.beta0 + eta[i] + u[static_cast<std::size_t>(design.cluster[static_cast<std::size_t>(i)])];
        y[i] = gen_y.bernoulli(sigmoid(e)) ? 1.0 : 0.0;
    }
    return y;
}

// iid N(mean, variance) covariate entries
inline Eigen::MatrixXd draw_covariates(int n, int q, double mean, double variance,
                                       std::uint64_t seed) {
    Xoshiro256pp gen(seed);
    const double sd = std::sqrt(variance);
    Eigen::MatrixXd X(n, q);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < q; ++j) X(i, j) = gen.normal(mean, sd);
    return X;
}

}  // namespace ib

#endif
