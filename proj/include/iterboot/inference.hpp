#ifndef ITERBOOT_INFERENCE_HPP
#define ITERBOOT_INFERENCE_HPP

// Variance of the bias-corrected estimator: parametric-bootstrap
// covariance of the initial estimator at theta_hat, a seed-frozen
// numerical Jacobian of the binding map, and the sandwich
//   (1 + 1/H) (B^-1)' Sigma_pi B^-1
// feeding per-coordinate normal intervals.

#include <Eigen/Dense>
#include <cmath>
#include <optional>

#include "iterboot/ib.hpp"
#include "iterboot/numerics.hpp"

namespace ib {

struct VarianceEstimate {
    Eigen::MatrixXd sigma_pi;   // covariance of the initial estimator
    Eigen::MatrixXd B_hat;      // Jacobian of theta -> mean fitted value
    Eigen::MatrixXd var_theta;  // assembled covariance of theta_hat
    int H_used = 0;
};

// Sample covariance of the H simulated fits at theta_hat. Reuses the fits
// cached by ib_run when they are present and match the requested count;
// otherwise the fits are recomputed with the same seed derivation.
inline Eigen::MatrixXd bootstrap_cov_pi(const Eigen::VectorXd& theta_hat,
                                        const ProblemBinding& binding, const IBConfig& cfg,
                                        const IBTrace* trace = nullptr, int h_var = 0) {
    binding.validate();
    if (binding.analytic())
        throw std::invalid_argument("bootstrap_cov_pi: needs a simulation route");
    const int H = h_var > 0 ? h_var : cfg.H;
    if (H < 2) throw std::invalid_argument("bootstrap_cov_pi: H < 2");
    const int p = binding.dim;

    Eigen::MatrixXd fits(p, H);
    if (trace && trace->last_fits && trace->last_fits->cols() == H && h_var <= 0) {
        fits = *trace->last_fits;
    } else {
        std::vector<Eigen::VectorXd> cols(static_cast<std::size_t>(H));
        parallel_for(H, cfg.inner_workers, [&](int idx) {
            const FitResult fit =
                binding.simulate_fit(theta_hat, cfg.seeds.sim_seed(static_cast<std::uint64_t>(idx) + 1));
            cols[static_cast<std::size_t>(idx)] = fit.theta_hat;
        });
        for (int h = 0; h < H; ++h) fits.col(h) = cols[static_cast<std::size_t>(h)];
    }

    std::vector<Eigen::VectorXd> cols(static_cast<std::size_t>(H));
    for (int h = 0; h < H; ++h) cols[static_cast<std::size_t>(h)] = fits.col(h);
    const Eigen::VectorXd mean = pairwise_mean(cols);

    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(p, p);
    for (int h = 0; h < H; ++h) {
        const Eigen::VectorXd d = fits.col(h) - mean;
        cov += d * d.transpose();
    }
    cov /= static_cast<double>(H - 1);
    return cov;
}

// Central differences of the seed-frozen map theta -> mean_h pi*_h(theta).
// Common random numbers on both sides keep the averaged map smooth enough
// to difference; the realized coordinate step is used as the denominator.
inline Eigen::MatrixXd numerical_jacobian_B(const Eigen::VectorXd& theta_hat,
                                            const ProblemBinding& binding, const IBConfig& cfg,
                                            double step_scale = 1e-3) {
    binding.validate();
    if (!(step_scale > 0.0)) throw std::invalid_argument("numerical_jacobian_B: step <= 0");
    const int p = binding.dim;

    auto mean_at = [&](const Eigen::VectorXd& theta) {
        return detail::mean_simulated_fits(theta, binding, cfg, 1, false).mean;
    };

    Eigen::MatrixXd B(p, p);
    for (int j = 0; j < p; ++j) {
        const double h = step_scale * (1.0 + std::fabs(theta_hat[j]));
        Eigen::VectorXd tp = theta_hat, tm = theta_hat;
        tp[j] += h;
        tm[j] -= h;
        const Eigen::VectorXd diff = mean_at(tp) - mean_at(tm);
        if (!diff.allFinite())
            throw std::runtime_error("numerical_jacobian_B: non-finite difference");
        B.col(j) = diff / (tp[j] - tm[j]);
    }
    return B;
}

// (1 + 1/H) (B^-1)' Sigma B^-1, symmetrized, with tiny negative
// eigenvalues clamped. Repair beyond rounding noise is an error.
inline Eigen::MatrixXd assemble_var_theta(const Eigen::MatrixXd& sigma_pi,
                                          const Eigen::MatrixXd& B_hat, int H) {
    if (H < 1) throw std::invalid_argument("assemble_var_theta: H < 1");
    if (sigma_pi.rows() != sigma_pi.cols() || B_hat.rows() != B_hat.cols() ||
        sigma_pi.rows() != B_hat.rows())
        throw std::invalid_argument("assemble_var_theta: dimension mismatch");

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(B_hat);
    const auto& sv = svd.singularValues();
    if (!(sv[sv.size() - 1] > 0.0) || sv[0] / sv[sv.size() - 1] > 1e12)
        throw std::invalid_argument("assemble_var_theta: B_hat is singular");

    const Eigen::MatrixXd B_inv = B_hat.inverse();
    Eigen::MatrixXd var =
        (1.0 + 1.0 / static_cast<double>(H)) * B_inv.transpose() * sigma_pi * B_inv;
    const Eigen::MatrixXd sym = 0.5 * (var + var.transpose());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    Eigen::VectorXd ev = es.eigenvalues();
    const double trace_v = std::max(sym.trace(), 0.0);
    if (ev[0] < -1e-10 * std::max(trace_v, 1e-300))
        throw std::runtime_error("assemble_var_theta: matrix is not PSD within tolerance");
    bool clamped = false;
    for (int i = 0; i < ev.size(); ++i)
        if (ev[i] < 0.0) {
            ev[i] = 0.0;
            clamped = true;
        }
    Eigen::MatrixXd repaired =
        clamped ? Eigen::MatrixXd(es.eigenvectors() * ev.asDiagonal() *
                                  es.eigenvectors().transpose())
                : sym;
    const double drift = (repaired - var).norm();
    if (drift > 1e-8 * std::max(var.norm(), 1e-300) + 1e-300)
        throw std::runtime_error("assemble_var_theta: PSD repair moved the matrix too far");
    return repaired;
}

struct CiResult {
    Eigen::VectorXd estimate;
    Eigen::VectorXd se;
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
    bool clamped_variance = false;  // a negative diagonal entry was floored at 0
};

inline CiResult normal_ci(const Eigen::VectorXd& theta_hat, const Eigen::MatrixXd& var_theta,
                          double level) {
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("normal_ci: bad level");
    if (var_theta.rows() != theta_hat.size() || var_theta.cols() != theta_hat.size())
        throw std::invalid_argument("normal_ci: dimension mismatch");
    const double z = normal_quantile(0.5 * (1.0 + level));
    CiResult out;
    out.estimate = theta_hat;
    const int p = static_cast<int>(theta_hat.size());
    out.se.resize(p);
    out.lo.resize(p);
    out.hi.resize(p);
    for (int j = 0; j < p; ++j) {
        double v = var_theta(j, j);
        if (v < 0.0) {
            v = 0.0;
            out.clamped_variance = true;
        }
        out.se[j] = std::sqrt(v);
        out.lo[j] = theta_hat[j] - z * out.se[j];
        out.hi[j] = theta_hat[j] + z * out.se[j];
    }
    return out;
}

struct VarianceOptions {
    int h_var = 0;  // 0 selects max(H, 200)
    double jac_step_scale = 1e-3;
    double level = 0.95;
};

inline VarianceEstimate estimate_variance(const Eigen::VectorXd& theta_hat,
                                          const ProblemBinding& binding, const IBConfig& cfg,
                                          const IBTrace* trace = nullptr,
                                          VarianceOptions opts = {}) {
    VarianceEstimate out;
    const int h_var = opts.h_var > 0 ? opts.h_var : std::max(cfg.H, 200);
    out.H_used = cfg.H;
    out.sigma_pi = bootstrap_cov_pi(theta_hat, binding, cfg, trace, h_var);
    out.B_hat = numerical_jacobian_B(theta_hat, binding, cfg, opts.jac_step_scale);
    out.var_theta = assemble_var_theta(out.sigma_pi, out.B_hat, cfg.H);
    return out;
}

}  // namespace ib

#endif
