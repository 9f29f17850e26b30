#ifndef ITERBOOT_BINDINGS_HPP
#define ITERBOOT_BINDINGS_HPP

// Glue between the data generators / estimators and the engine: a binding
// closes over a fixed design and an estimator configuration, exposing
// only "simulate at theta with this seed, then fit".

#include "iterboot/fit.hpp"
#include "iterboot/ib.hpp"
#include "iterboot/simulate.hpp"

namespace ib {

inline ProblemBinding make_logistic_binding(const LogisticDesign& design,
                                            const EstimatorSpec& spec) {
    spec.validate();
    ProblemBinding b;
    b.dim = design.q();
    b.simulate_fit = [design, spec](const Eigen::VectorXd& theta, std::uint64_t seed) {
        const Eigen::VectorXd y = simulate_logistic(design, theta, seed);
        return fit_estimator(design, y, spec);
    };
    return b;
}

// How the variance component travels through the engine's parameter
// vector. LogVariance keeps iterates unconstrained; NaturalVariance
// matches the variance on its own scale, clamping simulation inputs at 0.
enum class GlmmPacking { LogVariance, NaturalVariance };

inline ProblemBinding make_glmm_binding(const GlmmDesign& design, const EstimatorSpec& spec,
                                        GlmmPacking packing = GlmmPacking::LogVariance) {
    spec.validate();
    ProblemBinding b;
    b.dim = design.q() + 2;
    b.simulate_fit = [design, spec, packing](const Eigen::VectorXd& theta, std::uint64_t seed) {
        const int q = design.q();
        GlmmParams params;
        params.beta0 = theta[0];
        params.beta = theta.segment(1, q);
        if (packing == GlmmPacking::LogVariance) {
            const double ls2 = std::min(std::max(theta[q + 1], kLogSigma2Floor), kLogSigma2Ceil);
            params.sigma2 = std::exp(ls2);
        } else {
            params.sigma2 = std::max(theta[q + 1], 0.0);
        }
        const Eigen::VectorXd y = simulate_glmm(design, params, seed);
        FitResult fit = fit_estimator(design, y, spec);
        if (packing == GlmmPacking::NaturalVariance)
            fit.theta_hat[q + 1] = std::exp(fit.theta_hat[q + 1]);
        return fit;
    };
    return b;
}

// Packs a fitted result onto the binding scale
inline Eigen::VectorXd pack_glmm_theta(const FitResult& fit, int q, GlmmPacking packing) {
    Eigen::VectorXd theta = fit.theta_hat;
    if (packing == GlmmPacking::NaturalVariance) theta[q + 1] = std::exp(theta[q + 1]);
    return theta;
}

// Iterate box for the variance coordinate (regression coordinates stay
// free). Keeps the engine off parameter values the simulator cannot
// realize; hitting the floor is the boundary answer, not a failure.
inline void set_glmm_bounds(IBConfig& cfg, int q, GlmmPacking packing) {
    const int p = q + 2;
    const double inf = std::numeric_limits<double>::infinity();
    cfg.lower_bounds = Eigen::VectorXd::Constant(p, -inf);
    cfg.upper_bounds = Eigen::VectorXd::Constant(p, inf);
    if (packing == GlmmPacking::LogVariance) {
        cfg.lower_bounds[q + 1] = kLogSigma2Floor;
        cfg.upper_bounds[q + 1] = kLogSigma2Ceil;
    } else {
        cfg.lower_bounds[q + 1] = std::exp(kLogSigma2Floor);
        cfg.upper_bounds[q + 1] = std::exp(kLogSigma2Ceil);
    }
}

}  // namespace ib

#endif
