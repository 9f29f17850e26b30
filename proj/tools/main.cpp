// Command line front end: single fits, bias-corrected runs, interval
// estimation, Monte Carlo studies, and the oracle recomputation used to
// refresh the committed test expectations.
//
// Exit codes: 0 success, 1 usage/config error, 2 numerical
// non-convergence, 3 failure budget exceeded.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "iterboot/bindings.hpp"
#include "iterboot/harness.hpp"
#include "iterboot/inference.hpp"
#include "iterboot/io.hpp"
#include "iterboot/toys.hpp"
#include "oracles/oracles.hpp"

namespace {

using ib::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNoConvergence = 2;
constexpr int kExitBudget = 3;

struct IbProblem {
    ib::ProblemBinding binding;
    Eigen::VectorXd pi_obs;
    bool pi_converged = true;
    ib::IBConfig cfg;
};

// Builds the binding + observed initial estimate from an `ib` config and a
// data file. Supported models: logistic, glmm_random_intercept,
// variance_toy, linear_bias_toy.
IbProblem build_problem(const json& cfg_json, const std::string& data_path) {
    IbProblem out;
    const std::string model = cfg_json.at("model").get<std::string>();

    out.cfg.H = cfg_json.value("H", 100);
    out.cfg.max_iter = cfg_json.value("max_iter", 200);
    out.cfg.tol = cfg_json.value("tol", 0.0);
    out.cfg.damping.constant = cfg_json.value("damping", 1.0);
    out.cfg.fixed_seeds = cfg_json.value("fixed_seeds", true);
    out.cfg.inner_failure_budget = cfg_json.value("inner_failure_budget", 0.10);
    out.cfg.seeds.master = cfg_json.value("seed", 42ULL);
    out.cfg.seeds.h_max = out.cfg.H;

    if (model == "logistic" || model == "glmm_random_intercept") {
        if (data_path.empty()) throw std::runtime_error("this model needs --data");
        const ib::CsvData data = ib::read_csv(data_path);
        const ib::EstimatorSpec spec = ib::estimator_spec_from_json(cfg_json.at("estimator"));
        if (model == "logistic") {
            ib::LogisticDesign design(data.X);
            const ib::FitResult fit = ib::fit_estimator(design, data.y, spec);
            out.pi_obs = fit.theta_hat;
            out.pi_converged = fit.converged;
            out.binding = ib::make_logistic_binding(design, spec);
        } else {
            if (!data.has_cluster) throw std::runtime_error("glmm data needs a 'cluster' column");
            ib::GlmmDesign design(data.X, data.cluster);
            const std::string packing_name = cfg_json.value("glmm_packing", "natural_variance");
            const ib::GlmmPacking packing = packing_name == "log_variance"
                                                ? ib::GlmmPacking::LogVariance
                                                : ib::GlmmPacking::NaturalVariance;
            const ib::FitResult fit = ib::fit_estimator(design, data.y, spec);
            out.pi_obs = ib::pack_glmm_theta(fit, design.q(), packing);
            out.pi_converged = fit.converged;
            out.binding = ib::make_glmm_binding(design, spec, packing);
            ib::set_glmm_bounds(out.cfg, design.q(), packing);
        }
    } else if (model == "variance_toy") {
        ib::VarianceToy toy{cfg_json.value("n", 10)};
        out.binding = cfg_json.value("analytic", false) ? toy.exact_problem() : toy.mc_problem();
        if (!data_path.empty()) {
            const ib::CsvData data = ib::read_csv(data_path);
            out.pi_obs.resize(1);
            out.pi_obs[0] = ib::VarianceToy::divisor_n_variance(data.y);
        } else if (cfg_json.contains("pi_obs")) {
            out.pi_obs = ib::detail::vec_from_json(cfg_json.at("pi_obs"));
        } else {
            throw std::runtime_error("variance_toy needs --data or pi_obs");
        }
    } else if (model == "linear_bias_toy") {
        const int p = cfg_json.at("p").get<int>();
        ib::LinearBiasToy toy = ib::LinearBiasToy::identity_toy(p, cfg_json.value("n", 100));
        if (cfg_json.contains("M")) toy.M = ib::detail::mat_from_json(cfg_json.at("M"));
        if (cfg_json.contains("s")) toy.s = ib::detail::vec_from_json(cfg_json.at("s"));
        if (cfg_json.contains("L_n")) toy.L_n = ib::detail::mat_from_json(cfg_json.at("L_n"));
        if (cfg_json.contains("c_n")) toy.c_n = ib::detail::vec_from_json(cfg_json.at("c_n"));
        toy.noise_sd = cfg_json.value("noise_sd", 0.0);
        out.binding = cfg_json.value("analytic", toy.noise_sd == 0.0) ? toy.exact_problem()
                                                                      : toy.mc_problem();
        if (!cfg_json.contains("pi_obs")) throw std::runtime_error("linear_bias_toy needs pi_obs");
        out.pi_obs = ib::detail::vec_from_json(cfg_json.at("pi_obs"));
    } else {
        throw std::runtime_error("unknown model: " + model);
    }
    return out;
}

void emit(const std::string& out_path, const std::string& text) {
    if (out_path.empty()) std::cout << text;
    else ib::write_text_file(out_path, text);
}

int cmd_fit(const std::string& config_path, const std::string& data_path,
            const std::string& out_path) {
    const json cfg = ib::read_json_file(config_path);
    const json est = cfg.contains("estimator") ? cfg.at("estimator") : cfg;
    const ib::EstimatorSpec spec = ib::estimator_spec_from_json(est);
    const ib::CsvData data = ib::read_csv(data_path);

    ib::FitResult fit;
    if (spec.kind == ib::EstimatorKind::GlmmPIRLS || spec.kind == ib::EstimatorKind::GlmmGHQ) {
        if (!data.has_cluster) throw std::runtime_error(data_path + ": missing column 'cluster'");
        ib::GlmmDesign design(data.X, data.cluster);
        fit = ib::fit_estimator(design, data.y, spec);
    } else {
        ib::LogisticDesign design(data.X);
        fit = ib::fit_estimator(design, data.y, spec);
    }
    emit(out_path, ib::fit_result_to_json(fit, spec.kind).dump(2) + "\n");
    return fit.converged ? kExitOk : kExitNoConvergence;
}

int cmd_ib(const std::string& config_path, const std::string& data_path,
           const std::string& out_path, const json& overrides) {
    json cfg = ib::read_json_file(config_path);
    cfg.update(overrides);
    IbProblem problem = build_problem(cfg, data_path);
    if (!problem.pi_converged)
        std::cerr << "warning: initial estimator did not converge\n";

    auto [theta, trace] = ib::ib_run(problem.pi_obs, problem.binding, problem.cfg);
    json out{{"format_version", ib::kFormatVersion},
             {"theta_hat", ib::detail::vec_to_json(theta)},
             {"pi_obs", ib::detail::vec_to_json(problem.pi_obs)},
             {"seed", problem.cfg.seeds.master},
             {"H", problem.cfg.H},
             {"trace", ib::trace_to_json(trace)}};
    emit(out_path, out.dump(2) + "\n");
    if (trace.status == ib::IBStatus::InnerFailureBudgetExceeded) return kExitBudget;
    return trace.converged ? kExitOk : kExitNoConvergence;
}

int cmd_infer(const std::string& config_path, const std::string& data_path,
              const std::string& trace_path, const std::string& out_path, double level,
              int h_var) {
    const json cfg = ib::read_json_file(config_path);
    IbProblem problem = build_problem(cfg, data_path);
    const json saved = ib::read_json_file(trace_path);
    const Eigen::VectorXd theta = ib::detail::vec_from_json(saved.at("theta_hat"));
    const ib::IBTrace trace = ib::trace_from_json(saved.at("trace"));

    ib::VarianceOptions opts;
    opts.h_var = h_var;
    opts.level = level;
    const ib::VarianceEstimate var =
        ib::estimate_variance(theta, problem.binding, problem.cfg, &trace, opts);
    const ib::CiResult ci = ib::normal_ci(theta, var.var_theta, level);
    emit(out_path, ib::ci_to_csv(ci));
    if (!out_path.empty())
        ib::write_text_file(out_path + ".var.json", ib::variance_estimate_to_json(var).dump(2) + "\n");
    return kExitOk;
}

int cmd_study(const std::string& config_path, const std::string& out_dir,
              std::uint64_t seed_override, bool has_seed, int workers) {
    const json cfg = ib::read_json_file(config_path);
    ib::SimSetting setting = ib::sim_setting_from_json(cfg);
    const std::uint64_t seed = has_seed ? seed_override : cfg.value("master_seed", 42ULL);

    ib::MCReport report;
    try {
        report = ib::run_setting(setting, seed, workers);
    } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBudget;
    }

    const std::string csv = ib::report_to_csv(report);
    const json meta = ib::report_meta_to_json(report, workers);
    if (out_dir.empty()) {
        std::cout << csv;
    } else {
        std::filesystem::create_directories(out_dir);
        const std::string stem =
            out_dir + "/" + setting.name + "_seed" + std::to_string(seed);
        ib::write_text_file(stem + ".csv", csv);
        ib::write_text_file(stem + ".meta.json", meta.dump(2) + "\n");
        std::cerr << "wrote " << stem << ".csv\n";
    }
    return kExitOk;
}

int cmd_oracle(bool regen, const std::string& out_dir) {
    const std::string dir = out_dir.empty() ? "tests/fixtures" : out_dir;
    if (regen) {
        ib::oracle::regenerate_all(dir);
        std::cerr << "regenerated oracle fixtures under " << dir << "\n";
        return kExitOk;
    }
    const bool ok = ib::oracle::verify_all(dir, std::cout);
    return ok ? kExitOk : kExitNoConvergence;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"iterative bootstrap bias correction toolkit"};
    app.require_subcommand(1);

    std::string config_path, data_path, out_path, trace_path, out_dir;
    double level = 0.95;
    int h_var = 0;
    int workers = 1;
    std::uint64_t seed = 0;
    bool regen = false;

    json overrides = json::object();
    auto add_override_flags = [&](CLI::App* sub) {
        sub->add_option_function<int>("--H", [&](int v) { overrides["H"] = v; });
        sub->add_option_function<int>("--max-iter", [&](int v) { overrides["max_iter"] = v; });
        sub->add_option_function<double>("--tol", [&](double v) { overrides["tol"] = v; });
        sub->add_option_function<double>("--damping", [&](double v) { overrides["damping"] = v; });
        sub->add_option_function<std::uint64_t>("--seed",
                                                [&](std::uint64_t v) { overrides["seed"] = v; });
        sub->add_option_function<bool>("--fixed-seeds",
                                       [&](bool v) { overrides["fixed_seeds"] = v; });
    };

    auto* fit = app.add_subcommand("fit", "fit one estimator on a CSV dataset");
    fit->add_option("--config", config_path)->required();
    fit->add_option("--data", data_path)->required();
    fit->add_option("--out", out_path);

    auto* ib_cmd = app.add_subcommand("ib", "run the bias-corrected estimator");
    ib_cmd->add_option("--config", config_path)->required();
    ib_cmd->add_option("--data", data_path);
    ib_cmd->add_option("--out", out_path);
    add_override_flags(ib_cmd);

    auto* infer = app.add_subcommand("infer", "intervals from a saved run");
    infer->add_option("--config", config_path)->required();
    infer->add_option("--data", data_path);
    infer->add_option("--trace", trace_path)->required();
    infer->add_option("--out", out_path);
    infer->add_option("--level", level);
    infer->add_option("--h-var", h_var);

    auto* study = app.add_subcommand("study", "Monte Carlo simulation study");
    study->add_option("--config", config_path)->required();
    study->add_option("--out", out_dir);
    auto* seed_opt = study->add_option("--seed", seed);
    study->add_option("--workers", workers);

    auto* oracle = app.add_subcommand("oracle", "check (or --regen) oracle fixtures");
    oracle->add_flag("--regen", regen);
    oracle->add_option("--out", out_dir);

    CLI11_PARSE(app, argc, argv);

    try {
        if (fit->parsed()) return cmd_fit(config_path, data_path, out_path);
        if (ib_cmd->parsed()) return cmd_ib(config_path, data_path, out_path, overrides);
        if (infer->parsed())
            return cmd_infer(config_path, data_path, trace_path, out_path, level, h_var);
        if (study->parsed())
            return cmd_study(config_path, out_dir, seed, seed_opt->count() > 0, workers);
        if (oracle->parsed()) return cmd_oracle(regen, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
