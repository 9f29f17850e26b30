#ifndef ITERBOOT_IB_HPP
#define ITERBOOT_IB_HPP

// The iterative bootstrap engine. One step moves the iterate by the
// (damped) discrepancy between the initial estimate on the observed data
// and the average initial estimate over H samples simulated at the
// current iterate:
//
//   theta_k = theta_{k-1} + eps_k * [pi_obs - mean_h pi*_h(theta_{k-1})]
//
// With seeds held fixed across iterations the step map is deterministic,
// so the limit is a genuine fixed point and the k=1 iterate started at
// pi_obs is exactly the classical bootstrap bias-corrected estimate.

#include <Eigen/Dense>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "iterboot/estimators.hpp"
#include "iterboot/numerics.hpp"
#include "iterboot/parallel.hpp"
#include "iterboot/rng.hpp"

namespace ib {

// eps_k schedule; constant 1 reproduces the undamped iteration
struct DampingSchedule {
    double constant = 1.0;
    bool geometric = false;
    double initial = 1.0;
    double decay = 0.9;
    double floor = 0.1;

    double at(int k) const {  // k >= 1
        if (!geometric) return constant;
        return std::max(floor, initial * std::pow(decay, k - 1));
    }
    void validate() const {
        if (!(constant > 0.0 && constant <= 1.0))
            throw std::invalid_argument("DampingSchedule: constant outside (0,1]");
        if (geometric && !(initial > 0.0 && initial <= 1.0 && floor > 0.0 && decay > 0.0 &&
                           decay <= 1.0))
            throw std::invalid_argument("DampingSchedule: bad geometric parameters");
    }
};

struct IBConfig {
    int H = 100;
    int max_iter = 200;
    double tol = 0.0;  // <= 0 selects the scale-aware default 1e-6 * sqrt(p)
    DampingSchedule damping;
    SeedSet seeds;
    bool fixed_seeds = true;   // reuse omega_1..omega_H across iterations
    int inner_workers = 1;     // the H fits within one step are independent
    double inner_failure_budget = 0.10;
    bool store_last_fits = true;
    // optional box for the iterates (empty = unconstrained); a coordinate
    // pinned at its bound is a legitimate boundary solution, flagged in
    // the trace
    Eigen::VectorXd lower_bounds;
    Eigen::VectorXd upper_bounds;

    double resolved_tol(int p) const {
        return tol > 0.0 ? tol : 1e-6 * std::sqrt(static_cast<double>(p));
    }
    void validate() const {
        if (H < 1) throw std::invalid_argument("IBConfig: H < 1");
        if (max_iter < 1) throw std::invalid_argument("IBConfig: max_iter < 1");
        damping.validate();
    }
    Eigen::VectorXd clamp(Eigen::VectorXd theta, bool* clamped = nullptr) const {
        if (lower_bounds.size() == theta.size())
            for (int j = 0; j < theta.size(); ++j)
                if (theta[j] < lower_bounds[j]) {
                    theta[j] = lower_bounds[j];
                    if (clamped) *clamped = true;
                }
        if (upper_bounds.size() == theta.size())
            for (int j = 0; j < theta.size(); ++j)
                if (theta[j] > upper_bounds[j]) {
                    theta[j] = upper_bounds[j];
                    if (clamped) *clamped = true;
                }
        return theta;
    }
};

enum class IBStatus { Converged, MaxIterExceeded, InnerFailureBudgetExceeded };

struct IBTrace {
    std::vector<Eigen::VectorXd> iterates;  // theta^(0) .. theta^(K)
    std::vector<double> step_norms;         // ||theta^(k) - theta^(k-1)||_2
    double residual_norm = std::numeric_limits<double>::quiet_NaN();
    IBStatus status = IBStatus::MaxIterExceeded;
    bool converged = false;
    bool clamped = false;  // some iterate hit a configured bound
    int inner_failures = 0;
    long n_evals = 0;  // binding evaluations (simulated fits or exact calls)
    double wall_time_ms = 0.0;
    std::optional<Eigen::MatrixXd> last_fits;  // p x H fits at the final iterate
};

// Packages the model for the engine: either a Monte Carlo route
// (simulate at theta with an explicit seed, then fit) or an analytic
// binding function for exact oracle work.
struct ProblemBinding {
    int dim = 0;
    std::function<FitResult(const Eigen::VectorXd&, std::uint64_t)> simulate_fit;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> exact_binding;

    bool analytic() const { return static_cast<bool>(exact_binding); }
    void validate() const {
        if (dim < 1) throw std::invalid_argument("ProblemBinding: dim < 1");
        if (!simulate_fit && !exact_binding)
            throw std::invalid_argument("ProblemBinding: no route provided");
    }
};

namespace detail {

struct MeanFits {
    Eigen::VectorXd mean;
    int failures = 0;
    long evals = 0;
    bool usable = false;  // at least one converged fit entered the mean
    std::vector<Eigen::VectorXd> fits;  // kept when requested (converged only)
};

// mean_h pi*_h(theta) over the converged fits. Failed fits are counted but
// excluded: the initial estimator is then the same root-conditional
// statistic on the observed and the simulated side. The fixed-order
// pairwise reduction makes the result independent of the inner worker
// count.
inline MeanFits mean_simulated_fits(const Eigen::VectorXd& theta, const ProblemBinding& binding,
                                    const IBConfig& cfg, int k, bool keep_fits) {
    MeanFits out;
    if (binding.analytic()) {
        out.mean = binding.exact_binding(theta);
        out.evals = 1;
        out.usable = true;
        return out;
    }
    std::vector<Eigen::VectorXd> fits(static_cast<std::size_t>(cfg.H));
    std::vector<char> failed(static_cast<std::size_t>(cfg.H), 0);
    parallel_for(cfg.H, cfg.inner_workers, [&](int idx) {
        const std::uint64_t h = static_cast<std::uint64_t>(idx) + 1;
        const std::uint64_t seed = cfg.fixed_seeds
                                       ? cfg.seeds.sim_seed(h)
                                       : cfg.seeds.sim_seed(static_cast<std::uint64_t>(k), h);
        const FitResult fit = binding.simulate_fit(theta, seed);
        fits[static_cast<std::size_t>(idx)] = fit.theta_hat;
        failed[static_cast<std::size_t>(idx)] = fit.converged ? 0 : 1;
    });
    std::vector<Eigen::VectorXd> kept;
    kept.reserve(fits.size());
    for (std::size_t i = 0; i < fits.size(); ++i) {
        if (failed[i]) ++out.failures;
        else kept.push_back(std::move(fits[i]));
    }
    out.evals = cfg.H;
    out.usable = !kept.empty();
    out.mean = out.usable ? pairwise_mean(kept) : Eigen::VectorXd::Zero(binding.dim);
    if (keep_fits) out.fits = std::move(kept);
    return out;
}

}  // namespace detail

// One iteration of the sequence. `stats` receives failure/eval counts when
// provided.
inline Eigen::VectorXd ib_step(const Eigen::VectorXd& theta_prev, const Eigen::VectorXd& pi_obs,
                               const ProblemBinding& binding, const IBConfig& cfg, int k,
                               detail::MeanFits* stats = nullptr) {
    binding.validate();
    cfg.validate();
    if (theta_prev.size() != binding.dim || pi_obs.size() != binding.dim)
        throw std::invalid_argument("ib_step: dimension mismatch");
    detail::MeanFits mf = detail::mean_simulated_fits(theta_prev, binding, cfg, k, false);
    const Eigen::VectorXd next =
        cfg.clamp(theta_prev + cfg.damping.at(k) * (pi_obs - mf.mean));
    if (stats) *stats = std::move(mf);
    return next;
}

// Runs the iteration from theta^(0) = pi_obs until the step norm falls
// under tol or the iteration budget runs out. The residual at the final
// iterate is evaluated with the same seeds and stored in the trace
// (together with the per-sample fits, which the variance estimator
// reuses).
inline std::pair<Eigen::VectorXd, IBTrace> ib_run(const Eigen::VectorXd& pi_obs,
                                                  const ProblemBinding& binding,
                                                  const IBConfig& cfg) {
    binding.validate();
    cfg.validate();
    if (pi_obs.size() != binding.dim) throw std::invalid_argument("ib_run: dimension mismatch");

    const auto t0 = std::chrono::steady_clock::now();
    const double tol = cfg.resolved_tol(binding.dim);

    IBTrace trace;
    Eigen::VectorXd theta = pi_obs;
    trace.iterates.push_back(theta);

    long total_fits = 0;
    int total_failures = 0;
    double rescue_scale = 1.0;  // halved when the step norms keep growing
    int consecutive_increases = 0;
    double best_step = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_theta = theta;

    for (int k = 1; k <= cfg.max_iter; ++k) {
        detail::MeanFits mf = detail::mean_simulated_fits(theta, binding, cfg, k, false);
        total_fits += mf.evals;
        total_failures += mf.failures;
        // the budget is judged on the cumulative rate, with a warm-up
        // window: early iterates far from the solution may sit in a region
        // the estimator dislikes, which the iteration itself escapes
        if (!binding.analytic() &&
            (!mf.usable ||
             (static_cast<double>(total_failures) >
                  cfg.inner_failure_budget * static_cast<double>(total_fits) &&
              total_fits >= 3 * cfg.H))) {
            trace.status = IBStatus::InnerFailureBudgetExceeded;
            trace.inner_failures = total_failures;
            trace.n_evals = total_fits;
            trace.wall_time_ms = std::chrono::duration<double, std::milli>(
                                     std::chrono::steady_clock::now() - t0)
                                     .count();
            return {best_theta, trace};
        }

        const double eps = rescue_scale * cfg.damping.at(k);
        const Eigen::VectorXd next =
            cfg.clamp(theta + eps * (pi_obs - mf.mean), &trace.clamped);
        const double step_norm = (next - theta).norm();
        trace.iterates.push_back(next);
        trace.step_norms.push_back(step_norm);
        theta = next;

        if (step_norm < best_step) {
            best_step = step_norm;
            best_theta = theta;
            consecutive_increases = 0;
        } else if (trace.step_norms.size() >= 2 &&
                   step_norm > trace.step_norms[trace.step_norms.size() - 2]) {
            ++consecutive_increases;
            // persistent growth means the undamped map is not contracting
            // here; shrink the step and restart from the best point seen
            if (consecutive_increases >= 10) {
                rescue_scale *= 0.5;
                consecutive_increases = 0;
                theta = best_theta;
            }
        } else {
            consecutive_increases = 0;
        }

        if (step_norm <= tol) {
            trace.status = IBStatus::Converged;
            trace.converged = true;
            break;
        }
    }

    // residual of the matching equation at the final iterate
    detail::MeanFits final_mf =
        detail::mean_simulated_fits(theta, binding, cfg, cfg.max_iter + 1, cfg.store_last_fits);
    total_fits += final_mf.evals;
    total_failures += final_mf.failures;
    if (final_mf.usable) trace.residual_norm = (pi_obs - final_mf.mean).norm();
    if (cfg.store_last_fits && !binding.analytic() && !final_mf.fits.empty()) {
        Eigen::MatrixXd fits(binding.dim, static_cast<int>(final_mf.fits.size()));
        for (int h = 0; h < fits.cols(); ++h)
            fits.col(h) = final_mf.fits[static_cast<std::size_t>(h)];
        trace.last_fits = std::move(fits);
    }

    trace.inner_failures = total_failures;
    trace.n_evals = total_fits;
    trace.wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return {theta, trace};
}

// Discrepancy vector of the matching equation at theta
inline Eigen::VectorXd ii_residual(const Eigen::VectorXd& theta, const Eigen::VectorXd& pi_obs,
                                   const ProblemBinding& binding, const IBConfig& cfg) {
    binding.validate();
    cfg.validate();
    const detail::MeanFits mf = detail::mean_simulated_fits(theta, binding, cfg, 1, false);
    return pi_obs - mf.mean;
}

// Quadratic form residual' Phi residual; Phi must be symmetric positive
// definite (identity gives the plain squared norm)
inline double ii_objective(const Eigen::VectorXd& theta, const Eigen::VectorXd& pi_obs,
                           const ProblemBinding& binding, const IBConfig& cfg,
                           const Eigen::MatrixXd& phi) {
    if (phi.rows() != binding.dim || phi.cols() != binding.dim)
        throw std::invalid_argument("ii_objective: Phi dimension mismatch");
    if (!phi.isApprox(phi.transpose(), 1e-12))
        throw std::invalid_argument("ii_objective: Phi not symmetric");
    const Eigen::LLT<Eigen::MatrixXd> llt(phi);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument("ii_objective: Phi not positive definite");
    const Eigen::VectorXd r = ii_residual(theta, pi_obs, binding, cfg);
    return r.dot(phi * r);
}

struct RateFit {
    double epsilon_hat = std::numeric_limits<double>::quiet_NaN();
    double r2 = std::numeric_limits<double>::quiet_NaN();
};

// Least-squares slope of log step_norm against k; exp(slope) estimates the
// per-iteration contraction factor.
inline RateFit convergence_rate_fit(const IBTrace& trace) {
    constexpr double kNoiseFloor = 1e-12;
    std::vector<double> ks, logs;
    for (std::size_t i = 0; i < trace.step_norms.size(); ++i) {
        if (trace.step_norms[i] > kNoiseFloor) {
            ks.push_back(static_cast<double>(i + 1));
            logs.push_back(std::log(trace.step_norms[i]));
        }
    }
    if (ks.size() < 5)
        throw std::invalid_argument("convergence_rate_fit: fewer than 5 usable step norms");

    const double n = static_cast<double>(ks.size());
    double sk = 0, sl = 0, skk = 0, skl = 0, sll = 0;
    for (std::size_t i = 0; i < ks.size(); ++i) {
        sk += ks[i];
        sl += logs[i];
        skk += ks[i] * ks[i];
        skl += ks[i] * logs[i];
        sll += logs[i] * logs[i];
    }
    const double slope = (n * skl - sk * sl) / (n * skk - sk * sk);
    const double intercept = (sl - slope * sk) / n;
    double ss_res = 0, ss_tot = 0;
    const double mean_l = sl / n;
    for (std::size_t i = 0; i < ks.size(); ++i) {
        const double fittedv = intercept + slope * ks[i];
        ss_res += (logs[i] - fittedv) * (logs[i] - fittedv);
        ss_tot += (logs[i] - mean_l) * (logs[i] - mean_l);
    }
    RateFit out;
    out.epsilon_hat = std::exp(slope);
    out.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    return out;
}

struct TwoStepResult {
    Eigen::VectorXd theta;
    IBTrace stage1;
    IBTrace stage2;
    long total_evals = 0;
};

// Runs the procedure twice: the second pass replaces the initial
// estimator by the map "data -> first-pass estimate", whose observed value
// is the stage-one result. Simulated evaluations of the new initial
// estimator nest a full inner run seeded from the outer replica seed.
inline TwoStepResult two_step_ib(const Eigen::VectorXd& pi_obs, const ProblemBinding& binding,
                                 const IBConfig& cfg) {
    binding.validate();
    cfg.validate();
    TwoStepResult out;

    auto stage1 = ib_run(pi_obs, binding, cfg);
    out.stage1 = std::move(stage1.second);
    if (out.stage1.status == IBStatus::InnerFailureBudgetExceeded) {
        out.theta = stage1.first;
        out.total_evals = out.stage1.n_evals;
        return out;
    }

    std::atomic<long> nested_evals{0};
    ProblemBinding stage2_binding;
    stage2_binding.dim = binding.dim;
    if (binding.analytic()) {
        stage2_binding.exact_binding = [&, cfg](const Eigen::VectorXd& theta) {
            auto sub = ib_run(binding.exact_binding(theta), binding, cfg);
            nested_evals += sub.second.n_evals + 1;
            return sub.first;
        };
    } else {
        stage2_binding.simulate_fit = [&, cfg](const Eigen::VectorXd& theta,
                                               std::uint64_t seed) {
            const FitResult inner = binding.simulate_fit(theta, seed);
            IBConfig sub_cfg = cfg;
            sub_cfg.seeds.master = seed;  // hierarchical seed tree
            sub_cfg.store_last_fits = false;
            auto sub = ib_run(inner.theta_hat, binding, sub_cfg);
            nested_evals += sub.second.n_evals + 1;
            FitResult out_fit;
            out_fit.theta_hat = sub.first;
            out_fit.converged = inner.converged && sub.second.converged;
            return out_fit;
        };
    }

    auto stage2 = ib_run(stage1.first, stage2_binding, cfg);
    out.theta = stage2.first;
    out.stage2 = std::move(stage2.second);
    out.total_evals = out.stage1.n_evals + out.stage2.n_evals + nested_evals.load();
    return out;
}

}  // namespace ib

#endif
