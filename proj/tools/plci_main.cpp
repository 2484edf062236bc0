#include "plci/baselines.hpp"
#include "plci/function_ci.hpp"
#include "plci/harness.hpp"
#include "plci/stats.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace {

using namespace plci;

// Flat key=value config file; '#' starts a comment. Keys mirror the CLI
// flags plus every search knob.
bool apply_config_entry(HarnessConfig& h, const std::string& key, const std::string& value) {
    auto d = [&] { return std::stod(value); };
    auto i = [&] { return std::stoi(value); };
    if (key == "alpha") h.rvm.alpha = d();
    else if (key == "gamma") h.rvm.gamma = d();
    else if (key == "beta0") h.rvm.beta0 = d();
    else if (key == "beta1") h.rvm.beta1 = d();
    else if (key == "delta0-max") h.rvm.delta0_max = d();
    else if (key == "eps-step-factor") h.rvm.eps_step_factor = d();
    else if (key == "r0") h.rvm.r0_init = d();
    else if (key == "r1") h.rvm.r1_init = d();
    else if (key == "iter-max") h.rvm.iter_max = i();
    else if (key == "value-tol") { h.rvm.value_tol = d(); h.baseline.value_tol = d(); }
    else if (key == "grad-tol") h.rvm.grad_tol = d();
    else if (key == "freeze-release") h.rvm.freeze_release_iters = i();
    else if (key == "svd-rank-rtol") h.policy.svd_rank_rtol = d();
    else if (key == "eig-semidef-tol") h.policy.eig_semidef_tol = d();
    else if (key == "singular-policy") {
        if (value == "hold") h.policy.variant = SingularVariant::HoldDependent;
        else if (value == "mpi") h.policy.variant = SingularVariant::MoorePenrose;
        else return false;
    }
    else if (key == "opt-max-iters") h.baseline.opt.max_iters = i();
    else if (key == "opt-grad-tol") h.baseline.opt.grad_tol = d();
    else if (key == "penalty-weight") h.baseline.penalty_weight = d();
    else if (key == "unbounded-at") h.baseline.unbounded_at = d();
    else if (key == "diff-rel-step") h.diff.rel_step = d();
    else if (key == "diff-abs-floor") h.diff.abs_floor = d();
    else if (key == "seed") h.seed = std::stoull(value);
    else if (key == "replicates") h.replicates = i();
    else if (key == "jobs") h.jobs = i();
    else if (key == "family") {
        const auto f = family_from_string(value);
        if (!f) return false;
        h.family = *f;
    }
    else return false;
    return true;
}

bool load_config_file(HarnessConfig& h, const std::string& path, std::string& err) {
    std::ifstream in(path);
    if (!in) {
        err = "cannot open config file: " + path;
        return false;
    }
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            err = path + ":" + std::to_string(lineno) + ": expected key = value";
            return false;
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            if (!apply_config_entry(h, key, value)) {
                err = path + ":" + std::to_string(lineno) + ": unknown key or value: " + key;
                return false;
            }
        } catch (const std::exception&) {
            err = path + ":" + std::to_string(lineno) + ": bad value for " + key;
            return false;
        }
    }
    return true;
}

bool parse_methods(const std::string& csv, std::vector<MethodKind>& out, std::string& err) {
    out.clear();
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        const auto m = method_from_string(tok);
        if (!m) {
            err = "unknown method: " + tok;
            return false;
        }
        out.push_back(*m);
    }
    if (out.empty()) {
        err = "methods list is empty";
        return false;
    }
    return true;
}

// Demo models for the `ci` subcommand.
ObjectiveModel quadratic_demo(int n) {
    ObjectiveModel m;
    m.dim = n;
    m.value = [](const Vector& t) { return -0.5 * t.squaredNorm(); };
    m.gradient = [](const Vector& t) { return (-t).eval(); };
    m.hessian = [n](const Vector&) { return (-Matrix::Identity(n, n)).eval(); };
    return m;
}

ObjectiveModel flat_demo() {
    // two parameters; the likelihood ignores coordinate 0 entirely
    ObjectiveModel m;
    m.dim = 2;
    m.value = [](const Vector& t) { return -0.5 * t[1] * t[1]; };
    m.gradient = [](const Vector& t) {
        Vector g(2);
        g << 0.0, -t[1];
        return g;
    };
    m.hessian = [](const Vector&) {
        Matrix h(2, 2);
        h << 0.0, 0.0, 0.0, -1.0;
        return h;
    };
    return m;
}

std::string json_escape_free(double v) { return format_double(v); }

int run_ci_command(const HarnessConfig& h, const std::string& model_name, int n_data, int param,
                   const std::string& methods_csv, const std::string& out_path, bool trace) {
    std::vector<MethodKind> methods;
    std::string err;
    if (!parse_methods(methods_csv, methods, err)) {
        std::cerr << "error: " << err << "\n";
        return 1;
    }

    ObjectiveModel model;
    Vector theta_hat;
    BenchmarkFamily fam = h.family;
    bool benchmark_model = false;
    if (model_name == "quadratic") {
        model = quadratic_demo(2);
        theta_hat = Vector::Zero(2);
    } else if (model_name == "flat") {
        model = flat_demo();
        theta_hat = Vector::Zero(2);
    } else if (const auto f = family_from_string(model_name)) {
        fam = *f;
        benchmark_model = true;
        BenchmarkSpec spec;
        spec.family = fam;
        spec.n_data = n_data;
        spec.seed = h.seed;
        auto data = std::make_shared<Dataset>(simulate_dataset(spec));
        model = make_benchmark_model(data, fam);
        const FitResult fit =
            fit_mle(model, pack_transformed(fam, true_parameters(fam)), h.baseline.opt, h.diff);
        if (!fit.converged) {
            std::cerr << "error: MLE fit did not converge\n";
            return 2;
        }
        theta_hat = fit.theta;
    } else {
        std::cerr << "error: unknown model '" << model_name << "'\n";
        return 1;
    }
    if (param < 0 || param >= model.dim) {
        std::cerr << "error: parameter index out of range\n";
        return 1;
    }

    const ObjectiveModel pm = swap_to_front(model, param);
    Vector start = theta_hat;
    std::swap(start[0], start[param]);

    std::ofstream out;
    if (!out_path.empty()) {
        out.open(out_path);
        if (!out) {
            std::cerr << "error: cannot open output file " << out_path << "\n";
            return 2;
        }
    }

    RvmConfig rvm_cfg = h.rvm;
    SearchOptions opts;
    if (trace) opts.trace_stream = &std::cerr;

    for (MethodKind m : methods) {
        CiResult ci;
        if (m == MethodKind::Rvm && trace) {
            ci.upper = find_upper_endpoint(pm, start, rvm_cfg, h.policy, h.diff, opts);
            ci.lower = find_lower_endpoint(pm, start, rvm_cfg, h.policy, h.diff, opts);
        } else {
            ci = compute_ci(m, pm, start, rvm_cfg, h.policy, h.baseline, h.diff);
        }
        double lo = ci.lower.endpoint, up = ci.upper.endpoint;
        if (benchmark_model) {
            lo = std::isfinite(lo) ? to_native_scale(fam, param, lo) : lo;
            up = std::isfinite(up) ? to_native_scale(fam, param, up) : up;
        }
        std::cout << to_string(m) << " param " << param << ": [" << format_double(lo) << ", "
                  << format_double(up) << "]  status " << to_string(ci.lower.status) << "/"
                  << to_string(ci.upper.status) << "  evals "
                  << ci.lower.evals.total() + ci.upper.evals.total() << "\n";
        if (out) {
            out << "{\"method\":\"" << to_string(m) << "\",\"param\":" << param
                << ",\"lower\":\"" << json_escape_free(lo) << "\",\"upper\":\""
                << json_escape_free(up) << "\",\"status_lower\":\"" << to_string(ci.lower.status)
                << "\",\"status_upper\":\"" << to_string(ci.upper.status)
                << "\",\"evals\":" << ci.lower.evals.total() + ci.upper.evals.total() << "}\n";
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Profile likelihood confidence intervals: trust-region search, baseline "
                 "methods, and a simulation benchmark"};
    app.require_subcommand(1);

    HarnessConfig h;
    h.jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    std::string config_path;
    app.add_option("--config", config_path, "key=value configuration file");

    // ci
    auto* ci = app.add_subcommand("ci", "confidence interval for one model parameter");
    std::string ci_model = "quadratic";
    std::string ci_methods = "rvm";
    std::string ci_out;
    int ci_param = 0;
    int ci_n = 1000;
    bool ci_trace = false;
    ci->add_option("--model", ci_model, "quadratic | flat | transformed3 | transformed11 | glm11");
    ci->add_option("--param", ci_param, "parameter index");
    ci->add_option("--method", ci_methods, "comma-separated methods");
    ci->add_option("--n", ci_n, "dataset size for benchmark families");
    ci->add_option("--seed", h.seed, "RNG seed");
    ci->add_option("--alpha", h.rvm.alpha, "confidence level");
    ci->add_option("--out", ci_out, "JSON-lines output file");
    ci->add_flag("--trace", ci_trace, "log search iterations to stderr");

    // benchmark
    auto* bench = app.add_subcommand("benchmark", "run simulated benchmark scenarios");
    std::string b_family = "transformed3";
    std::vector<int> b_n = {1000};
    std::string b_methods = "rvm,vm,bisection,binary";
    std::string b_out = "benchmark";
    std::string b_policy = "hold";
    bool b_dump_data = false;
    bench->add_option("--family", b_family, "transformed3 | transformed11 | glm11");
    bench->add_option("--n", b_n, "dataset sizes")->expected(-1);
    bench->add_option("--replicates", h.replicates, "replicates per scenario");
    bench->add_option("--methods", b_methods, "comma-separated methods");
    bench->add_option("--alpha", h.rvm.alpha, "confidence level");
    bench->add_option("--seed", h.seed, "RNG seed");
    bench->add_option("--out", b_out, "output prefix (<out>_runs.csv, <out>_report.csv)");
    bench->add_option("--jobs", h.jobs, "worker threads");
    bench->add_option("--singular-policy", b_policy, "hold | mpi");
    bench->add_flag("--dump-data", b_dump_data, "also write <out>_data_<n>_<rep>.csv");

    // report
    auto* rep = app.add_subcommand("report", "aggregate run CSV files");
    std::vector<std::string> rep_inputs;
    std::string rep_out;
    rep->add_option("--inputs", rep_inputs, "run CSV files")->expected(-1)->required();
    rep->add_option("--out", rep_out, "report CSV output (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (!config_path.empty()) {
        std::string err;
        if (!load_config_file(h, config_path, err)) {
            std::cerr << "error: " << err << "\n";
            return 1;
        }
    }

    try {
        if (ci->parsed()) return run_ci_command(h, ci_model, ci_n, ci_param, ci_methods, ci_out,
                                                ci_trace);

        if (bench->parsed()) {
            const auto fam = family_from_string(b_family);
            if (!fam) {
                std::cerr << "error: unknown family " << b_family << "\n";
                return 1;
            }
            h.family = *fam;
            h.n_values = b_n;
            if (b_policy == "hold") h.policy.variant = SingularVariant::HoldDependent;
            else if (b_policy == "mpi") h.policy.variant = SingularVariant::MoorePenrose;
            else {
                std::cerr << "error: unknown singular policy " << b_policy << "\n";
                return 1;
            }
            std::string err;
            if (!parse_methods(b_methods, h.methods, err)) {
                std::cerr << "error: " << err << "\n";
                return 1;
            }
            const auto rows = run_benchmark(h);
            const auto report = aggregate(rows);

            std::ofstream runs(b_out + "_runs.csv");
            if (!runs) {
                std::cerr << "error: cannot write " << b_out << "_runs.csv\n";
                return 2;
            }
            write_scenario_csv(runs, rows);
            std::ofstream repf(b_out + "_report.csv");
            if (!repf) {
                std::cerr << "error: cannot write " << b_out << "_report.csv\n";
                return 2;
            }
            write_report_csv(repf, report);
            write_report_csv(std::cout, report);

            if (b_dump_data) {
                for (int n : h.n_values)
                    for (int r = 0; r < h.replicates; ++r) {
                        BenchmarkSpec spec;
                        spec.family = h.family;
                        spec.n_data = n;
                        spec.seed = split_seed(split_seed(h.seed, static_cast<std::uint64_t>(n)),
                                               static_cast<std::uint64_t>(r));
                        const Dataset d = simulate_dataset(spec);
                        std::ofstream df(b_out + "_data_" + std::to_string(n) + "_" +
                                         std::to_string(r) + ".csv");
                        if (df) write_dataset_csv(df, d);
                    }
            }
            return 0;
        }

        if (rep->parsed()) {
            std::vector<ScenarioRow> rows;
            for (const auto& path : rep_inputs) {
                std::ifstream in(path);
                if (!in) {
                    std::cerr << "error: cannot open " << path << "\n";
                    return 2;
                }
                CsvReadError err;
                if (!read_scenario_csv(in, rows, err)) {
                    std::cerr << "error: " << path << ":" << err.line << ": " << err.message
                              << "\n";
                    return 1;
                }
            }
            const auto report = aggregate(rows);
            if (rep_out.empty()) {
                write_report_csv(std::cout, report);
            } else {
                std::ofstream out(rep_out);
                if (!out) {
                    std::cerr << "error: cannot write " << rep_out << "\n";
                    return 2;
                }
                write_report_csv(out, report);
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
