#ifndef ITERBOOT_FIT_HPP
#define ITERBOOT_FIT_HPP

// Single entry point used by the engine and the harness: takes raw binary
// responses, applies the pseudo-value transform the estimator is
// configured with, and dispatches to the fitter. Observed and simulated
// data pass through the same path, so the initial estimator is the same
// function of the data on both sides of the matching equation.

#include "iterboot/estimators.hpp"
#include "iterboot/glmm.hpp"
#include "iterboot/logistic.hpp"
#include "iterboot/robust.hpp"

namespace ib {

namespace detail {
inline Eigen::VectorXd maybe_transform(const Eigen::VectorXd& y, const EstimatorSpec& spec) {
    if (spec.delta == 0.0) return y;
    return pseudo_values(y, spec.delta);
}
}  // namespace detail

inline FitResult fit_estimator(const LogisticDesign& design, const Eigen::VectorXd& y_raw,
                               const EstimatorSpec& spec) {
    spec.validate();
    switch (spec.kind) {
        case EstimatorKind::LogisticMLE:
            return logistic_irls(design, detail::maybe_transform(y_raw, spec), spec);
        case EstimatorKind::LogisticFirth:
            return logistic_firth(design, y_raw, spec);
        case EstimatorKind::LogisticRobust:
            return robust_m_estimator(design, detail::maybe_transform(y_raw, spec), spec);
        default:
            throw std::invalid_argument("fit_estimator: estimator does not apply to a logistic design");
    }
}

inline FitResult fit_estimator(const GlmmDesign& design, const Eigen::VectorXd& y_raw,
                               const EstimatorSpec& spec) {
    spec.validate();
    switch (spec.kind) {
        case EstimatorKind::GlmmPIRLS:
            return glmm_pirls(design, detail::maybe_transform(y_raw, spec), spec);
        case EstimatorKind::GlmmGHQ:
            return glmm_ghq(design, y_raw, spec);
        default:
            throw std::invalid_argument("fit_estimator: estimator does not apply to a GLMM design");
    }
}

}  // namespace ib

#endif
