#ifndef ITERBOOT_ESTIMATORS_HPP
#define ITERBOOT_ESTIMATORS_HPP

#include <Eigen/Dense>
#include <limits>
#include <stdexcept>
#include <string>

#include "iterboot/data.hpp"

namespace ib {

enum class EstimatorKind {
    LogisticMLE,
    LogisticFirth,
    LogisticRobust,
    GlmmPIRLS,
    GlmmGHQ,
};

inline const char* estimator_kind_name(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::LogisticMLE: return "LogisticMLE";
        case EstimatorKind::LogisticFirth: return "LogisticFirth";
        case EstimatorKind::LogisticRobust: return "LogisticRobust";
        case EstimatorKind::GlmmPIRLS: return "GlmmPIRLS";
        case EstimatorKind::GlmmGHQ: return "GlmmGHQ";
    }
    return "?";
}

inline EstimatorKind estimator_kind_from_name(const std::string& s) {
    if (s == "LogisticMLE") return EstimatorKind::LogisticMLE;
    if (s == "LogisticFirth") return EstimatorKind::LogisticFirth;
    if (s == "LogisticRobust") return EstimatorKind::LogisticRobust;
    if (s == "GlmmPIRLS") return EstimatorKind::GlmmPIRLS;
    if (s == "GlmmGHQ") return EstimatorKind::GlmmGHQ;
    throw std::invalid_argument("unknown estimator kind: " + s);
}

struct IrlsControl {
    double tol = 1e-8;  // sup-norm of the estimating equation
    int max_iter = 100;
};

struct EstimatorSpec {
    EstimatorKind kind = EstimatorKind::LogisticMLE;
    double delta = 0.0;    // pseudo-value transform, in [0, 0.5)
    double huber_c = 1.345;  // conventional 95%-efficiency constant
    int ghq_nodes = 15;
    IrlsControl irls;

    void validate() const {
        if (!(delta >= 0.0 && delta < 0.5))
            throw std::invalid_argument("EstimatorSpec: delta outside [0, 0.5)");
        if (!(huber_c > 0.0)) throw std::invalid_argument("EstimatorSpec: huber_c <= 0");
        if (ghq_nodes < 1) throw std::invalid_argument("EstimatorSpec: ghq_nodes < 1");
        if (!(irls.tol > 0.0) || irls.max_iter < 1)
            throw std::invalid_argument("EstimatorSpec: bad irls control");
        const bool binary_only =
            kind == EstimatorKind::LogisticFirth || kind == EstimatorKind::GlmmGHQ;
        if (binary_only && delta != 0.0)
            throw std::invalid_argument("EstimatorSpec: this estimator fits raw binary responses");
    }
};

struct FitResult {
    Eigen::VectorXd theta_hat;
    bool converged = false;
    int iterations = 0;
    double final_grad_norm = std::numeric_limits<double>::quiet_NaN();
    bool at_boundary = false;  // variance component pinned at its floor
};

// y_i in {0,1} -> {delta, 1-delta}
inline Eigen::VectorXd pseudo_values(const Eigen::VectorXd& y, double delta) {
    if (!(delta >= 0.0 && delta < 0.5))
        throw std::invalid_argument("pseudo_values: delta outside [0, 0.5)");
    for (int i = 0; i < y.size(); ++i)
        if (y[i] != 0.0 && y[i] != 1.0)
            throw std::invalid_argument("pseudo_values: responses must be 0/1");
    return (1.0 - delta) * y.array() + delta * (1.0 - y.array());
}

}  // namespace ib

#endif
