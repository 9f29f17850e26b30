#ifndef ITERBOOT_PRESETS_HPP
#define ITERBOOT_PRESETS_HPP

// Committed study configurations. The desk presets run in minutes on a
// laptop; the full presets reproduce the source-scale experiments and are
// opt-in (hours of compute).

#include "iterboot/harness.hpp"

namespace ib {

// q=20, n=200: slope pattern (5,5,-7,-7,0,...), balanced classes,
// events-per-variable ~ 5. Covariate sd 2/sqrt(n) keeps the linear
// predictor scale moderate enough that every estimator in the bank is
// well-posed at this n; tolerances sit just above the Monte Carlo
// quantization floor of the seed-frozen matching map.
inline SimSetting desk_logistic_setting() {
    SimSetting s;
    s.name = "lrm_desk";
    s.model = ModelKind::Logistic;
    s.n = 200;
    s.q = 20;
    s.beta_true = SimSetting::default_beta(20);
    s.delta = 0.01;
    s.covariate_mean = 0.0;
    s.covariate_sd = SimSetting::sd_rule_desk(200);
    s.replicates = 200;
    s.huber_c = 1.345;
    s.ib.H = 100;
    s.ib.max_iter = 60;
    s.ib.tol = 0.3;
    s.ib.tol_robust = 1.2;
    s.ib.inner_failure_budget = 0.30;
    return s;
}

inline SimSetting desk_logistic_contaminated_setting() {
    SimSetting s = desk_logistic_setting();
    s.name = "lrm_desk_contaminated";
    s.contamination_rate = 0.02;
    return s;
}

// q=6, m=20 clusters of 5, sigma2 = 1.5. The slope pattern is the source
// pattern scaled by 1/10: at the source magnitudes the fixed effects
// saturate the responses so strongly that no estimator (including the
// exact marginal MLE) retains usable information about the variance
// component at m=20.
inline SimSetting desk_glmm_setting() {
    SimSetting s;
    s.name = "glmm_desk";
    s.model = ModelKind::GlmmRandomIntercept;
    s.q = 6;
    s.m = 20;
    s.n_per_cluster = 5;
    s.n = 100;
    s.beta0_true = 0.0;
    s.beta_true.resize(6);
    s.beta_true << 0.5, 0.5, -0.7, -0.7, 0.0, 0.0;
    s.sigma2_true = 1.5;
    s.delta = 0.01;
    s.covariate_sd = 0.6324555320336759;  // variance 0.4
    s.replicates = 200;
    s.ghq_nodes = 15;
    s.glmm_packing = GlmmPacking::NaturalVariance;
    s.ib.H = 50;
    s.ib.max_iter = 60;
    s.ib.tol = 0.1;
    s.ib.inner_failure_budget = 0.30;
    return s;
}

// source-scale runs (hours); Table-faithful generating values with the
// covariate dispersion read as a variance
inline SimSetting full_logistic_setting_I() {
    SimSetting s;
    s.name = "lrm_full_setting1";
    s.model = ModelKind::Logistic;
    s.n = 2000;
    s.q = 200;
    s.beta_true = SimSetting::default_beta(200);
    s.delta = 0.01;
    s.covariate_mean = 0.0;
    s.covariate_sd = std::sqrt(SimSetting::sd_rule_4(2000));
    s.replicates = 500;
    s.huber_c = 1.345;
    s.ib.H = 500;
    s.ib.max_iter = 100;
    s.ib.tol = 0.5;
    s.ib.tol_robust = 2.0;
    s.ib.inner_failure_budget = 0.30;
    return s;
}

inline SimSetting full_logistic_setting_II() {
    SimSetting s = full_logistic_setting_I();
    s.name = "lrm_full_setting2";
    s.n = 3000;
    s.covariate_mean = 0.6;
    s.covariate_sd = std::sqrt(SimSetting::sd_rule_4(3000));
    return s;
}

}  // namespace ib

#endif
