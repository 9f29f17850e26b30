#ifndef ITERBOOT_HARNESS_HPP
#define ITERBOOT_HARNESS_HPP

// Simulation-study runner: draws covariates and responses per replicate,
// optionally contaminates the responses, runs a bank of estimators
// (plain fits and bias-corrected wrappers), and aggregates bias / RMSE /
// Monte Carlo standard errors. Replicates own disjoint seed branches, so
// the report is identical for any worker count.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "iterboot/bindings.hpp"
#include "iterboot/data.hpp"
#include "iterboot/fit.hpp"
#include "iterboot/ib.hpp"
#include "iterboot/parallel.hpp"
#include "iterboot/simulate.hpp"

namespace ib {

enum class ModelKind { Logistic, GlmmRandomIntercept };
enum class ContaminationMode { ExtremeSwap, RandomFlips };

struct IBRunSettings {
    int H = 100;
    int max_iter = 200;
    double tol = 0.0;         // <= 0 keeps the engine default
    double tol_robust = 0.0;  // stop rule for robust wrappers (their
                              // statistic is noisier); <= 0 falls back to tol
    double damping = 1.0;
    bool fixed_seeds = true;
    double inner_failure_budget = 0.10;
};

struct SimSetting {
    std::string name = "study";
    ModelKind model = ModelKind::Logistic;
    int n = 200;
    int q = 20;               // slope covariates (logistic has no intercept column)
    int m = 0;                // clusters (GLMM)
    int n_per_cluster = 0;    // GLMM; n = m * n_per_cluster
    double beta0_true = 0.0;  // GLMM intercept
    Eigen::VectorXd beta_true;
    double sigma2_true = 1.5;
    double delta = 0.01;
    double covariate_mean = 0.0;
    double covariate_sd = 0.0;  // <= 0 selects the desk default 2/sqrt(n)
    double contamination_rate = 0.0;
    ContaminationMode contamination_mode = ContaminationMode::ExtremeSwap;
    int replicates = 200;
    double huber_c = 1.345;
    int ghq_nodes = 15;
    IBRunSettings ib;
    GlmmPacking glmm_packing = GlmmPacking::LogVariance;
    std::vector<std::string> estimators;  // empty selects the default bank
    bool faithful = true;

    // the source studies draw covariate entries with dispersion shrinking
    // as 1/sqrt(n) so the linear predictor scale stays stable in n
    static double sd_rule_4(int n) { return 4.0 / std::sqrt(static_cast<double>(n)); }
    static double sd_rule_desk(int n) { return 2.0 / std::sqrt(static_cast<double>(n)); }

    double resolved_covariate_sd() const {
        return covariate_sd > 0.0 ? covariate_sd : sd_rule_desk(n);
    }
    double covariate_variance() const {
        const double sd = resolved_covariate_sd();
        return sd * sd;
    }

    // slope pattern: two at +5, two at -7, remainder 0
    static Eigen::VectorXd default_beta(int q) {
        Eigen::VectorXd b = Eigen::VectorXd::Zero(q);
        if (q > 0) b[0] = 5.0;
        if (q > 1) b[1] = 5.0;
        if (q > 2) b[2] = -7.0;
        if (q > 3) b[3] = -7.0;
        return b;
    }

    std::vector<std::string> bank() const {
        if (!estimators.empty()) return estimators;
        if (model == ModelKind::Logistic)
            return {"MLE", "MLE-BR", "IB-MLE", "ROB", "IB-ROB"};
        return {"PIRLS", "GHQ", "IB"};
    }

    Eigen::VectorXd truth() const {
        if (model == ModelKind::Logistic) return beta_true;
        Eigen::VectorXd t(q + 2);
        t[0] = beta0_true;
        t.segment(1, q) = beta_true;
        t[q + 1] = sigma2_true;
        return t;
    }

    std::vector<std::string> coordinate_names() const {
        std::vector<std::string> names;
        if (model == ModelKind::Logistic) {
            for (int j = 1; j <= q; ++j) names.push_back("beta" + std::to_string(j));
        } else {
            names.push_back("beta0");
            for (int j = 1; j <= q; ++j) names.push_back("beta" + std::to_string(j));
            names.push_back("sigma2");
        }
        return names;
    }

    void validate() const {
        if (n < 1 || q < 1 || replicates < 0) throw std::invalid_argument("SimSetting: bad sizes");
        if (beta_true.size() != q) throw std::invalid_argument("SimSetting: beta_true size != q");
        if (model == ModelKind::GlmmRandomIntercept) {
            if (m < 2 || n_per_cluster < 1 || n != m * n_per_cluster)
                throw std::invalid_argument("SimSetting: bad cluster layout");
            if (!(sigma2_true >= 0.0)) throw std::invalid_argument("SimSetting: sigma2 < 0");
        }
        if (!(delta >= 0.0 && delta < 0.5)) throw std::invalid_argument("SimSetting: bad delta");
        if (!(contamination_rate >= 0.0 && contamination_rate < 0.5))
            throw std::invalid_argument("SimSetting: bad contamination rate");
        if (ib.H < 1) throw std::invalid_argument("SimSetting: bad H");
    }
};

// events per variable: least frequent outcome count over predictor count
inline double epv(const Eigen::VectorXd& y, int q) {
    if (q < 1) throw std::invalid_argument("epv: q < 1");
    int ones = 0;
    for (int i = 0; i < y.size(); ++i) ones += y[i] == 1.0 ? 1 : 0;
    const int zeros = static_cast<int>(y.size()) - ones;
    if (ones == 0 || zeros == 0) throw std::invalid_argument("epv: degenerate response");
    return static_cast<double>(std::min(ones, zeros)) / static_cast<double>(q);
}

// Misclassification contamination. ExtremeSwap flips the k most confident
// successes and the k most confident failures (k = round(rate * n)),
// judged by the supplied fitted probabilities. `shortfall` reports when a
// class had fewer than k members.
inline Eigen::VectorXd contaminate(const Eigen::VectorXd& y, const Eigen::VectorXd& mu_hat,
                                   double rate, std::uint64_t seed,
                                   ContaminationMode mode = ContaminationMode::ExtremeSwap,
                                   bool* shortfall = nullptr) {
    if (!(rate >= 0.0 && rate < 0.5)) throw std::invalid_argument("contaminate: bad rate");
    if (mu_hat.size() != y.size()) throw std::invalid_argument("contaminate: length mismatch");
    if (shortfall) *shortfall = false;
    Eigen::VectorXd out = y;
    const int n = static_cast<int>(y.size());
    const int k = static_cast<int>(std::lround(rate * n));
    if (k == 0) return out;

    if (mode == ContaminationMode::RandomFlips) {
        // flip k distinct positions
        std::vector<int> idx(static_cast<std::size_t>(n));
        std::iota(idx.begin(), idx.end(), 0);
        Xoshiro256pp gen(seed);
        for (int i = 0; i < k && i < n; ++i) {
            const int j = i + static_cast<int>(gen.next() % static_cast<std::uint64_t>(n - i));
            std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
            out[idx[static_cast<std::size_t>(i)]] = 1.0 - out[idx[static_cast<std::size_t>(i)]];
        }
        return out;
    }

    std::vector<int> ones, zeros;
    for (int i = 0; i < n; ++i) (y[i] == 1.0 ? ones : zeros).push_back(i);
    // stable orderings; ties broken by index for determinism
    std::sort(ones.begin(), ones.end(), [&](int a, int b) {
        return mu_hat[a] != mu_hat[b] ? mu_hat[a] > mu_hat[b] : a < b;
    });
    std::sort(zeros.begin(), zeros.end(), [&](int a, int b) {
        return mu_hat[a] != mu_hat[b] ? mu_hat[a] < mu_hat[b] : a < b;
    });
    const int k_eff = std::min({k, static_cast<int>(ones.size()), static_cast<int>(zeros.size())});
    if (shortfall && k_eff < k) *shortfall = true;
    for (int i = 0; i < k_eff; ++i) {
        out[ones[static_cast<std::size_t>(i)]] = 0.0;
        out[zeros[static_cast<std::size_t>(i)]] = 1.0;
    }
    return out;
}

struct EstimatorReport {
    std::string name;
    Eigen::VectorXd mean, bias, rmse, mc_se;
    int n_used = 0;
    int n_fail = 0;
};

struct MCReport {
    SimSetting setting;
    std::uint64_t master_seed = 0;
    std::vector<EstimatorReport> rows;
    double wall_time_ms = 0.0;
    int replicate_errors = 0;  // replicates that failed wholesale
};

// two-pass aggregation of the surviving replicate estimates
inline EstimatorReport summarize(const std::string& name,
                                 const std::vector<std::optional<Eigen::VectorXd>>& estimates,
                                 const Eigen::VectorXd& truth) {
    EstimatorReport rep;
    rep.name = name;
    const int p = static_cast<int>(truth.size());
    std::vector<const Eigen::VectorXd*> used;
    for (const auto& e : estimates)
        if (e) used.push_back(&*e);
        else ++rep.n_fail;
    rep.n_used = static_cast<int>(used.size());
    if (rep.n_used < 2) throw std::invalid_argument("summarize: fewer than 2 usable replicates");

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
    for (const auto* e : used) mean += *e;
    mean /= static_cast<double>(rep.n_used);

    Eigen::VectorXd var = Eigen::VectorXd::Zero(p);   // dispersion about the mean
    Eigen::VectorXd mse = Eigen::VectorXd::Zero(p);   // dispersion about the truth
    for (const auto* e : used) {
        var.array() += (e->array() - mean.array()).square();
        mse.array() += (e->array() - truth.array()).square();
    }
    var /= static_cast<double>(rep.n_used - 1);
    mse /= static_cast<double>(rep.n_used);

    rep.mean = mean;
    rep.bias = mean - truth;
    rep.rmse = mse.array().sqrt();
    rep.mc_se = (var / static_cast<double>(rep.n_used)).array().sqrt();
    return rep;
}

namespace detail {

struct ReplicateOut {
    // one slot per bank entry; nullopt = failed/dropped
    std::vector<std::optional<Eigen::VectorXd>> estimates;
    bool errored = false;
};

inline IBConfig make_ib_config(const SimSetting& s, std::uint64_t replicate_master) {
    IBConfig cfg;
    cfg.H = s.ib.H;
    cfg.max_iter = s.ib.max_iter;
    cfg.tol = s.ib.tol;
    cfg.damping.constant = s.ib.damping;
    cfg.fixed_seeds = s.ib.fixed_seeds;
    cfg.inner_failure_budget = s.ib.inner_failure_budget;
    cfg.seeds.master = replicate_master;
    cfg.seeds.h_max = s.ib.H;
    cfg.store_last_fits = false;
    return cfg;
}

inline EstimatorSpec spec_for(const SimSetting& s, EstimatorKind kind, double delta) {
    EstimatorSpec spec;
    spec.kind = kind;
    spec.delta = delta;
    spec.huber_c = s.huber_c;
    spec.ghq_nodes = s.ghq_nodes;
    // the robust estimating function lives on a much smaller natural scale
    // than the score; a sup-norm of 1e-5 already locates the root far
    // beyond Monte Carlo resolution, and kink stalls below it are fine
    if (kind == EstimatorKind::LogisticRobust) spec.irls.tol = 1e-5;
    return spec;
}

inline ReplicateOut run_replicate_logistic(const SimSetting& s, std::uint64_t replicate_master) {
    ReplicateOut out;
    const auto bank = s.bank();
    out.estimates.resize(bank.size());

    const Eigen::MatrixXd X =
        draw_covariates(s.n, s.q, s.covariate_mean, s.covariate_variance(),
                        derive_seed(replicate_master, SeedStream::Observed, 0));
    const LogisticDesign design(X);
    const Eigen::VectorXd y_clean =
        simulate_logistic(design, s.beta_true, derive_seed(replicate_master, SeedStream::Observed, 1));

    Eigen::VectorXd y = y_clean;
    if (s.contamination_rate > 0.0) {
        // fitted probabilities from a clean-data pseudo-value fit
        const FitResult clean_fit =
            fit_estimator(design, y_clean, spec_for(s, EstimatorKind::LogisticMLE, s.delta));
        const Eigen::VectorXd mu_hat =
            (design.X * clean_fit.theta_hat).unaryExpr([](double e) { return sigmoid(e); });
        y = contaminate(y_clean, mu_hat, s.contamination_rate,
                        derive_seed(replicate_master, SeedStream::Contamination, 0),
                        s.contamination_mode);
    }

    for (std::size_t b = 0; b < bank.size(); ++b) {
        const std::string& name = bank[b];
        try {
            if (name == "MLE" || name == "MLE-BR" || name == "ROB") {
                const EstimatorKind kind = name == "MLE" ? EstimatorKind::LogisticMLE
                                           : name == "MLE-BR" ? EstimatorKind::LogisticFirth
                                                              : EstimatorKind::LogisticRobust;
                const FitResult fit = fit_estimator(design, y, spec_for(s, kind, 0.0));
                if (fit.converged) out.estimates[b] = fit.theta_hat;
            } else if (name == "IB-MLE" || name == "IB-ROB") {
                const EstimatorKind kind =
                    name == "IB-MLE" ? EstimatorKind::LogisticMLE : EstimatorKind::LogisticRobust;
                const EstimatorSpec spec = spec_for(s, kind, s.delta);
                const FitResult pi_obs = fit_estimator(design, y, spec);
                if (!pi_obs.converged) continue;
                const ProblemBinding binding = make_logistic_binding(design, spec);
                IBConfig cfg = make_ib_config(s, replicate_master);
                if (name == "IB-ROB" && s.ib.tol_robust > 0.0) cfg.tol = s.ib.tol_robust;
                auto [theta, trace] = ib_run(pi_obs.theta_hat, binding, cfg);
                if (trace.converged && theta.allFinite()) out.estimates[b] = theta;
            } else {
                throw std::invalid_argument("unknown estimator: " + name);
            }
        } catch (const std::invalid_argument&) {
            throw;  // configuration problems are not per-replicate noise
        } catch (...) {
            // numerical failure counts against this estimator only
        }
    }
    return out;
}

inline ReplicateOut run_replicate_glmm(const SimSetting& s, std::uint64_t replicate_master) {
    ReplicateOut out;
    const auto bank = s.bank();
    out.estimates.resize(bank.size());
    const int q = s.q;

    const Eigen::MatrixXd X =
        draw_covariates(s.n, q, s.covariate_mean, s.covariate_variance(),
                        derive_seed(replicate_master, SeedStream::Observed, 0));
    std::vector<int> labels(static_cast<std::size_t>(s.n));
    for (int i = 0; i < s.n; ++i) labels[static_cast<std::size_t>(i)] = i / s.n_per_cluster;
    const GlmmDesign design(X, labels);

    GlmmParams params;
    params.beta0 = s.beta0_true;
    params.beta = s.beta_true;
    params.sigma2 = s.sigma2_true;
    const Eigen::VectorXd y =
        simulate_glmm(design, params, derive_seed(replicate_master, SeedStream::Observed, 1));

    auto natural_scale = [q](Eigen::VectorXd theta) {
        theta[q + 1] = std::exp(theta[q + 1]);  // log sigma^2 -> sigma^2
        return theta;
    };

    for (std::size_t b = 0; b < bank.size(); ++b) {
        const std::string& name = bank[b];
        try {
            if (name == "PIRLS" || name == "GHQ") {
                const EstimatorKind kind =
                    name == "PIRLS" ? EstimatorKind::GlmmPIRLS : EstimatorKind::GlmmGHQ;
                const FitResult fit = fit_estimator(design, y, spec_for(s, kind, 0.0));
                if (fit.converged) out.estimates[b] = natural_scale(fit.theta_hat);
            } else if (name == "IB") {
                const EstimatorSpec spec = spec_for(s, EstimatorKind::GlmmPIRLS, s.delta);
                const FitResult pi_fit = fit_estimator(design, y, spec);
                if (!pi_fit.converged) continue;
                const ProblemBinding binding = make_glmm_binding(design, spec, s.glmm_packing);
                IBConfig cfg = make_ib_config(s, replicate_master);
                set_glmm_bounds(cfg, q, s.glmm_packing);
                const Eigen::VectorXd pi_obs = pack_glmm_theta(pi_fit, q, s.glmm_packing);
                auto [theta, trace] = ib_run(pi_obs, binding, cfg);
                if (!trace.converged || !theta.allFinite()) continue;
                Eigen::VectorXd rep = theta;
                if (s.glmm_packing == GlmmPacking::LogVariance)
                    rep[q + 1] = std::exp(rep[q + 1]);
                else
                    rep[q + 1] = std::max(rep[q + 1], 0.0);
                out.estimates[b] = rep;
            } else {
                throw std::invalid_argument("unknown estimator: " + name);
            }
        } catch (const std::invalid_argument&) {
            throw;
        } catch (...) {
        }
    }
    return out;
}

}  // namespace detail

// Runs the whole study. Replicate r depends only on the seed branch
// derived from (master_seed, r); worker count never changes the report.
// Throws when more than 20% of replicates fail wholesale.
inline MCReport run_setting(const SimSetting& setting, std::uint64_t master_seed,
                            int workers = 1) {
    setting.validate();
    const auto t0 = std::chrono::steady_clock::now();

    MCReport report;
    report.setting = setting;
    report.master_seed = master_seed;
    const auto bank = setting.bank();
    const int R = setting.replicates;

    std::vector<detail::ReplicateOut> outs(static_cast<std::size_t>(R));
    SeedSet root{master_seed, setting.ib.H};
    parallel_for(R, workers, [&](int r) {
        const std::uint64_t rm = root.replicate_master(static_cast<std::uint64_t>(r));
        try {
            outs[static_cast<std::size_t>(r)] =
                setting.model == ModelKind::Logistic
                    ? detail::run_replicate_logistic(setting, rm)
                    : detail::run_replicate_glmm(setting, rm);
        } catch (const std::invalid_argument&) {
            throw;
        } catch (...) {
            outs[static_cast<std::size_t>(r)].errored = true;
            outs[static_cast<std::size_t>(r)].estimates.assign(bank.size(), std::nullopt);
        }
    });

    for (const auto& o : outs) report.replicate_errors += o.errored ? 1 : 0;
    if (R > 0 && report.replicate_errors > 0.2 * R)
        throw std::runtime_error("run_setting: replicate failure budget exceeded");

    const Eigen::VectorXd truth = setting.truth();
    if (R > 0) {
        for (std::size_t b = 0; b < bank.size(); ++b) {
            std::vector<std::optional<Eigen::VectorXd>> column;
            column.reserve(static_cast<std::size_t>(R));
            for (const auto& o : outs) column.push_back(o.estimates[b]);
            report.rows.push_back(summarize(bank[b], column, truth));
        }
    } else {
        // dry run keeps the report schema with empty aggregates
        for (const auto& name : bank) {
            EstimatorReport er;
            er.name = name;
            const int p = static_cast<int>(truth.size());
            er.mean = er.bias = er.rmse = er.mc_se = Eigen::VectorXd::Constant(p, 0.0);
            er.n_used = 0;
            er.n_fail = 0;
            report.rows.push_back(er);
        }
    }

    report.wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

// Monte Carlo estimate of the events-per-variable ratio a setting implies
inline double expected_epv(const SimSetting& setting, std::uint64_t seed, int reps = 50) {
    setting.validate();
    double acc = 0.0;
    SeedSet root{seed, 1};
    for (int r = 0; r < reps; ++r) {
        const std::uint64_t rm = root.replicate_master(static_cast<std::uint64_t>(r));
        const Eigen::MatrixXd X =
            draw_covariates(setting.n, setting.q, setting.covariate_mean,
                            setting.covariate_variance(), derive_seed(rm, SeedStream::Observed, 0));
        Eigen::VectorXd y;
        if (setting.model == ModelKind::Logistic) {
            const LogisticDesign d(X);
            y = simulate_logistic(d, setting.beta_true, derive_seed(rm, SeedStream::Observed, 1));
        } else {
            std::vector<int> labels(static_cast<std::size_t>(setting.n));
            for (int i = 0; i < setting.n; ++i)
                labels[static_cast<std::size_t>(i)] = i / setting.n_per_cluster;
            const GlmmDesign d(X, labels);
            GlmmParams params{setting.beta0_true, setting.beta_true, setting.sigma2_true};
            y = simulate_glmm(d, params, derive_seed(rm, SeedStream::Observed, 1));
        }
        acc += epv(y, setting.q);
    }
    return acc / static_cast<double>(reps);
}

}  // namespace ib

#endif
