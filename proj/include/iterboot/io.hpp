#ifndef ITERBOOT_IO_HPP
#define ITERBOOT_IO_HPP

// JSON and CSV serialization for configs, fit results, traces, variance
// estimates, and study reports. Schemas are documented in docs/formats.md
// and versioned through kFormatVersion.

#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "iterboot/estimators.hpp"
#include "iterboot/harness.hpp"
#include "iterboot/ib.hpp"
#include "iterboot/inference.hpp"
#include "iterboot/toys.hpp"

namespace ib {

inline constexpr const char* kFormatVersion = "1";

using json = nlohmann::json;

namespace detail {
inline json vec_to_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}
inline Eigen::VectorXd vec_from_json(const json& a) {
    Eigen::VectorXd v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<int>(i)] = a[i].get<double>();
    return v;
}
inline json mat_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}
inline Eigen::MatrixXd mat_from_json(const json& rows) {
    const int r = static_cast<int>(rows.size());
    const int c = r > 0 ? static_cast<int>(rows[0].size()) : 0;
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
            m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].get<double>();
    return m;
}
inline std::string round12(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}
}  // namespace detail

// ---------------------------------------------------------------------------
// estimator spec / fit result

inline json to_json(const EstimatorSpec& s) {
    return json{{"kind", estimator_kind_name(s.kind)},
                {"delta", s.delta},
                {"huber_c", s.huber_c},
                {"ghq_nodes", s.ghq_nodes},
                {"irls_tol", s.irls.tol},
                {"irls_max_iter", s.irls.max_iter}};
}

inline EstimatorSpec estimator_spec_from_json(const json& j) {
    EstimatorSpec s;
    s.kind = estimator_kind_from_name(j.at("kind").get<std::string>());
    s.delta = j.value("delta", 0.0);
    s.huber_c = j.value("huber_c", 1.345);
    s.ghq_nodes = j.value("ghq_nodes", 15);
    s.irls.tol = j.value("irls_tol", 1e-8);
    s.irls.max_iter = j.value("irls_max_iter", 100);
    s.validate();
    return s;
}

inline json fit_result_to_json(const FitResult& f, EstimatorKind kind) {
    return json{{"kind", estimator_kind_name(kind)},
                {"theta_hat", detail::vec_to_json(f.theta_hat)},
                {"converged", f.converged},
                {"iterations", f.iterations},
                {"final_grad_norm", f.final_grad_norm}};
}

// ---------------------------------------------------------------------------
// IB trace

inline const char* ib_status_name(IBStatus s) {
    switch (s) {
        case IBStatus::Converged: return "converged";
        case IBStatus::MaxIterExceeded: return "max_iter_exceeded";
        case IBStatus::InnerFailureBudgetExceeded: return "inner_failure_budget_exceeded";
    }
    return "?";
}

inline json trace_to_json(const IBTrace& t, bool include_last_fits = true) {
    json iterates = json::array();
    for (const auto& it : t.iterates) iterates.push_back(detail::vec_to_json(it));
    json j{{"iterates", iterates},
           {"step_norms", t.step_norms},
           {"residual_norm", t.residual_norm},
           {"converged", t.converged},
           {"status", ib_status_name(t.status)},
           {"inner_failures", t.inner_failures},
           {"n_evals", t.n_evals},
           {"wall_time_ms", t.wall_time_ms}};
    if (include_last_fits && t.last_fits) j["last_fits"] = detail::mat_to_json(*t.last_fits);
    return j;
}

inline IBTrace trace_from_json(const json& j) {
    IBTrace t;
    for (const auto& it : j.at("iterates")) t.iterates.push_back(detail::vec_from_json(it));
    t.step_norms = j.at("step_norms").get<std::vector<double>>();
    t.residual_norm = j.at("residual_norm").get<double>();
    t.converged = j.at("converged").get<bool>();
    const std::string st = j.at("status").get<std::string>();
    t.status = st == "converged" ? IBStatus::Converged
               : st == "max_iter_exceeded" ? IBStatus::MaxIterExceeded
                                           : IBStatus::InnerFailureBudgetExceeded;
    t.inner_failures = j.at("inner_failures").get<int>();
    t.n_evals = j.at("n_evals").get<long>();
    t.wall_time_ms = j.at("wall_time_ms").get<double>();
    if (j.contains("last_fits")) t.last_fits = detail::mat_from_json(j.at("last_fits"));
    return t;
}

// ---------------------------------------------------------------------------
// simulation setting

inline json to_json(const SimSetting& s) {
    json j{{"name", s.name},
           {"model", s.model == ModelKind::Logistic ? "logistic" : "glmm_random_intercept"},
           {"n", s.n},
           {"q", s.q},
           {"beta_true", detail::vec_to_json(s.beta_true)},
           {"delta", s.delta},
           {"covariate_mean", s.covariate_mean},
           {"covariate_sd", s.resolved_covariate_sd()},
           {"contamination_rate", s.contamination_rate},
           {"contamination_mode",
            s.contamination_mode == ContaminationMode::ExtremeSwap ? "extreme_swap"
                                                                   : "random_flips"},
           {"replicates", s.replicates},
           {"huber_c", s.huber_c},
           {"ghq_nodes", s.ghq_nodes},
           {"estimators", s.bank()},
           {"faithful", s.faithful},
           {"ib", json{{"H", s.ib.H},
                       {"max_iter", s.ib.max_iter},
                       {"tol", s.ib.tol},
                       {"tol_robust", s.ib.tol_robust},
                       {"inner_failure_budget", s.ib.inner_failure_budget},
                       {"damping", s.ib.damping},
                       {"fixed_seeds", s.ib.fixed_seeds}}}};
    if (s.model == ModelKind::GlmmRandomIntercept) {
        j["m"] = s.m;
        j["n_per_cluster"] = s.n_per_cluster;
        j["beta0_true"] = s.beta0_true;
        j["sigma2_true"] = s.sigma2_true;
        j["glmm_packing"] =
            s.glmm_packing == GlmmPacking::LogVariance ? "log_variance" : "natural_variance";
    }
    return j;
}

inline SimSetting sim_setting_from_json(const json& j) {
    SimSetting s;
    s.name = j.value("name", "study");
    const std::string model = j.at("model").get<std::string>();
    if (model == "logistic") s.model = ModelKind::Logistic;
    else if (model == "glmm_random_intercept") s.model = ModelKind::GlmmRandomIntercept;
    else throw std::invalid_argument("unknown model: " + model);
    s.n = j.at("n").get<int>();
    s.q = j.at("q").get<int>();
    if (j.contains("beta_true")) s.beta_true = detail::vec_from_json(j.at("beta_true"));
    else s.beta_true = SimSetting::default_beta(s.q);
    s.delta = j.value("delta", 0.01);
    s.covariate_mean = j.value("covariate_mean", 0.0);
    s.covariate_sd = j.value("covariate_sd", 0.0);
    s.contamination_rate = j.value("contamination_rate", 0.0);
    const std::string cm = j.value("contamination_mode", "extreme_swap");
    s.contamination_mode =
        cm == "random_flips" ? ContaminationMode::RandomFlips : ContaminationMode::ExtremeSwap;
    s.replicates = j.value("replicates", 200);
    s.huber_c = j.value("huber_c", 1.345);
    s.ghq_nodes = j.value("ghq_nodes", 15);
    if (j.contains("estimators"))
        s.estimators = j.at("estimators").get<std::vector<std::string>>();
    s.faithful = j.value("faithful", true);
    if (j.contains("ib")) {
        const json& ibj = j.at("ib");
        s.ib.H = ibj.value("H", 100);
        s.ib.max_iter = ibj.value("max_iter", 200);
        s.ib.tol = ibj.value("tol", 0.0);
        s.ib.tol_robust = ibj.value("tol_robust", 0.0);
        s.ib.inner_failure_budget = ibj.value("inner_failure_budget", 0.10);
        s.ib.damping = ibj.value("damping", 1.0);
        s.ib.fixed_seeds = ibj.value("fixed_seeds", true);
    }
    if (s.model == ModelKind::GlmmRandomIntercept) {
        s.m = j.at("m").get<int>();
        s.n_per_cluster = j.at("n_per_cluster").get<int>();
        s.beta0_true = j.value("beta0_true", 0.0);
        s.sigma2_true = j.value("sigma2_true", 1.5);
        const std::string packing = j.value("glmm_packing", "log_variance");
        s.glmm_packing = packing == "natural_variance" ? GlmmPacking::NaturalVariance
                                                       : GlmmPacking::LogVariance;
    }
    s.validate();
    return s;
}

// ---------------------------------------------------------------------------
// study report

inline std::string report_to_csv(const MCReport& report) {
    std::ostringstream os;
    os << "estimator,coordinate,truth,mean,bias,rmse,mc_se,n_fail\n";
    const auto names = report.setting.coordinate_names();
    const Eigen::VectorXd truth = report.setting.truth();
    for (const auto& row : report.rows) {
        for (std::size_t c = 0; c < names.size(); ++c) {
            const int j = static_cast<int>(c);
            os << row.name << ',' << names[c] << ',' << detail::round12(truth[j]) << ','
               << (row.n_used > 0 ? detail::round12(row.mean[j]) : "") << ','
               << (row.n_used > 0 ? detail::round12(row.bias[j]) : "") << ','
               << (row.n_used > 0 ? detail::round12(row.rmse[j]) : "") << ','
               << (row.n_used > 0 ? detail::round12(row.mc_se[j]) : "") << ',' << row.n_fail
               << "\n";
        }
    }
    return os.str();
}

inline json report_meta_to_json(const MCReport& report, int workers) {
    json rows = json::array();
    for (const auto& r : report.rows)
        rows.push_back(json{{"estimator", r.name}, {"n_used", r.n_used}, {"n_fail", r.n_fail}});
    return json{{"format_version", kFormatVersion},
                {"setting", to_json(report.setting)},
                {"master_seed", report.master_seed},
                {"workers", workers},
                {"replicate_errors", report.replicate_errors},
                {"estimator_counts", rows},
                {"wall_time_ms", report.wall_time_ms}};
}

// ---------------------------------------------------------------------------
// variance estimate / intervals

inline json variance_estimate_to_json(const VarianceEstimate& v) {
    return json{{"sigma_pi", detail::mat_to_json(v.sigma_pi)},
                {"B_hat", detail::mat_to_json(v.B_hat)},
                {"var_theta", detail::mat_to_json(v.var_theta)},
                {"H_used", v.H_used}};
}

inline std::string ci_to_csv(const CiResult& ci) {
    std::ostringstream os;
    os << "coordinate,estimate,se,lo,hi\n";
    for (int j = 0; j < ci.estimate.size(); ++j)
        os << j + 1 << ',' << detail::round12(ci.estimate[j]) << ',' << detail::round12(ci.se[j])
           << ',' << detail::round12(ci.lo[j]) << ',' << detail::round12(ci.hi[j]) << "\n";
    return os.str();
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    json j;
    in >> j;
    return j;
}

inline void write_text_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << contents;
}

}  // namespace ib

#endif
