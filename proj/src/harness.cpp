#include "plci/harness.hpp"

#include "plci/stats.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

namespace plci {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
} // namespace

void HarnessConfig::validate() const {
    if (replicates < 1) throw std::invalid_argument("HarnessConfig: replicates >= 1");
    if (methods.empty()) throw std::invalid_argument("HarnessConfig: methods must be nonempty");
    if (n_values.empty()) throw std::invalid_argument("HarnessConfig: n list must be nonempty");
    if (jobs < 1) throw std::invalid_argument("HarnessConfig: jobs >= 1");
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (v == kInf) return "inf";
    if (v == -kInf) return "-inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

namespace {

double parse_double(const std::string& s) {
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    if (s == "nan" || s.empty()) return std::numeric_limits<double>::quiet_NaN();
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("bad number: " + s);
    return v;
}

std::optional<SearchStatus> status_from_string(const std::string& s) {
    if (s == "Converged") return SearchStatus::Converged;
    if (s == "Inestimable") return SearchStatus::Inestimable;
    if (s == "IterationLimit") return SearchStatus::IterationLimit;
    if (s == "Failed") return SearchStatus::Failed;
    return std::nullopt;
}

// All rows of one replicate: every parameter, both sides, every method.
std::vector<ScenarioRow> run_replicate(const HarnessConfig& cfg, int n_data, int replicate) {
    std::vector<ScenarioRow> rows;
    BenchmarkSpec spec;
    spec.family = cfg.family;
    spec.n_data = n_data;
    spec.seed = split_seed(split_seed(cfg.seed, static_cast<std::uint64_t>(n_data)),
                           static_cast<std::uint64_t>(replicate));
    auto data = std::make_shared<Dataset>(simulate_dataset(spec));
    const ObjectiveModel model = make_benchmark_model(data, cfg.family);
    const Vector start = pack_transformed(cfg.family, true_parameters(cfg.family));

    const FitResult fit = fit_mle(model, start, cfg.baseline.opt, cfg.diff);
    if (!fit.converged) return rows;  // replicate discarded

    const double lstar = likelihood_threshold(fit.loglik, cfg.rvm.alpha);
    const int dim = model.dim;

    struct SideResult {
        MethodKind method;
        EndpointResult res;
    };

    for (int param = 0; param < dim; ++param) {
        const ObjectiveModel pm = swap_to_front(model, param);
        Vector theta_hat = fit.theta;
        std::swap(theta_hat[0], theta_hat[param]);

        std::vector<SideResult> lower, upper;
        for (MethodKind m : cfg.methods) {
            const CiResult ci = compute_ci(m, pm, theta_hat, cfg.rvm, cfg.policy, cfg.baseline,
                                           cfg.diff);
            lower.push_back({m, ci.lower});
            upper.push_back({m, ci.upper});
        }

        for (const bool is_upper : {false, true}) {
            const auto& side = is_upper ? upper : lower;
            std::vector<BoundOutcome> outcomes;
            outcomes.reserve(side.size());
            for (const auto& sr : side) {
                BoundOutcome o;
                o.status = sr.res.status;
                o.endpoint = sr.res.endpoint;
                o.value_at = std::isfinite(sr.res.value_at_endpoint) ? sr.res.value_at_endpoint
                                                                     : -kInf;
                outcomes.push_back(o);
            }
            const auto truth = consensus_truth(outcomes, lstar, is_upper,
                                               cfg.baseline.unbounded_at);
            if (!truth) continue;  // no admissible result: bound excluded

            const double native_truth =
                truth->unbounded ? (is_upper ? kInf : -kInf)
                                 : to_native_scale(cfg.family, param, truth->value);
            for (size_t mi = 0; mi < side.size(); ++mi) {
                const auto& sr = side[mi];
                ScenarioRow row;
                row.method = sr.method;
                row.family = cfg.family;
                row.n_data = n_data;
                row.replicate = replicate;
                row.param = param;
                row.upper = is_upper;
                row.endpoint = std::isfinite(sr.res.endpoint)
                                   ? to_native_scale(cfg.family, param, sr.res.endpoint)
                                   : sr.res.endpoint;
                row.truth = native_truth;
                row.status = sr.res.status;
                row.n_evals = sr.res.evals.total();
                const Score sc = score_run(outcomes[mi], row.endpoint, *truth, native_truth,
                                           cfg.baseline.unbounded_at);
                row.success = sc.success;
                row.error = sc.error;
                rows.push_back(row);
            }
        }
    }
    return rows;
}

} // namespace

std::vector<ScenarioRow> run_benchmark(const HarnessConfig& cfg) {
    cfg.validate();
    struct Task {
        int n_data;
        int replicate;
    };
    std::vector<Task> tasks;
    for (int n : cfg.n_values)
        for (int r = 0; r < cfg.replicates; ++r) tasks.push_back({n, r});

    std::vector<std::vector<ScenarioRow>> results(tasks.size());
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            results[i] = run_replicate(cfg, tasks[i].n_data, tasks[i].replicate);
        }
    };
    const int jobs = std::min<int>(cfg.jobs, static_cast<int>(tasks.size()));
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::vector<ScenarioRow> rows;
    for (auto& part : results) rows.insert(rows.end(), part.begin(), part.end());
    std::sort(rows.begin(), rows.end(), [](const ScenarioRow& a, const ScenarioRow& b) {
        return std::tuple(to_string(a.family), a.n_data, a.replicate, a.param, a.upper,
                          std::string(to_string(a.method))) <
               std::tuple(to_string(b.family), b.n_data, b.replicate, b.param, b.upper,
                          std::string(to_string(b.method)));
    });
    return rows;
}

std::vector<ReportRow> aggregate(const std::vector<ScenarioRow>& rows) {
    struct Acc {
        std::int64_t runs = 0, successes = 0;
        std::int64_t conv_with_error = 0, err_gt10 = 0, sub10_count = 0;
        double err_sum = 0.0, err_sub10_sum = 0.0;
        std::int64_t eval_count = 0;
        double eval_sum = 0.0;
    };
    std::map<std::tuple<std::string, int, std::string>, Acc> acc;
    for (const auto& r : rows) {
        auto& a = acc[{to_string(r.family), r.n_data, to_string(r.method)}];
        ++a.runs;
        if (r.success) {
            ++a.successes;
            a.eval_sum += static_cast<double>(r.n_evals);
            ++a.eval_count;
        }
        if (r.status == SearchStatus::Converged && std::isfinite(r.error)) {
            ++a.conv_with_error;
            a.err_sum += r.error;
            if (r.error > 10.0) {
                ++a.err_gt10;
            } else {
                a.err_sub10_sum += r.error;
                ++a.sub10_count;
            }
        }
    }
    std::vector<ReportRow> out;
    for (const auto& [key, a] : acc) {
        ReportRow rr;
        rr.family = *family_from_string(std::get<0>(key));
        rr.n_data = std::get<1>(key);
        rr.method = *method_from_string(std::get<2>(key));
        rr.runs = a.runs;
        rr.success_rate = a.runs ? static_cast<double>(a.successes) / a.runs : 0.0;
        if (a.conv_with_error) {
            rr.mean_error = a.err_sum / a.conv_with_error;
            rr.frac_error_gt10 = static_cast<double>(a.err_gt10) / a.conv_with_error;
        }
        if (a.sub10_count) rr.mean_error_sub10 = a.err_sub10_sum / a.sub10_count;
        if (a.eval_count) rr.mean_evals = a.eval_sum / a.eval_count;
        out.push_back(rr);
    }
    return out;
}

void write_scenario_csv(std::ostream& os, const std::vector<ScenarioRow>& rows) {
    os << "method,family,N,replicate,param,side,endpoint,truth,success,status,n_evals,error\n";
    for (const auto& r : rows) {
        os << to_string(r.method) << ',' << to_string(r.family) << ',' << r.n_data << ','
           << r.replicate << ',' << r.param << ',' << (r.upper ? "upper" : "lower") << ','
           << format_double(r.endpoint) << ',' << format_double(r.truth) << ','
           << (r.success ? 1 : 0) << ',' << to_string(r.status) << ',' << r.n_evals << ','
           << (std::isnan(r.error) ? std::string() : format_double(r.error)) << '\n';
    }
}

void write_report_csv(std::ostream& os, const std::vector<ReportRow>& rows) {
    auto field = [](double v) { return std::isnan(v) ? std::string() : format_double(v); };
    os << "method,family,N,runs,success_rate,mean_error,mean_error_sub10,frac_error_gt10,"
          "mean_evals\n";
    for (const auto& r : rows) {
        os << to_string(r.method) << ',' << to_string(r.family) << ',' << r.n_data << ','
           << r.runs << ',' << format_double(r.success_rate) << ',' << field(r.mean_error) << ','
           << field(r.mean_error_sub10) << ',' << field(r.frac_error_gt10) << ','
           << field(r.mean_evals) << '\n';
    }
}

bool read_scenario_csv(std::istream& is, std::vector<ScenarioRow>& rows, CsvReadError& err) {
    std::string line;
    int lineno = 0;
    bool header_seen = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (line.back() == ',') f.push_back("");
        if (!header_seen) {
            header_seen = true;
            if (line.rfind("method,family,N,replicate", 0) != 0) {
                err = {lineno, "unexpected header: " + line};
                return false;
            }
            continue;
        }
        if (f.size() != 12) {
            err = {lineno, "expected 12 fields, got " + std::to_string(f.size())};
            return false;
        }
        try {
            ScenarioRow r;
            const auto m = method_from_string(f[0]);
            const auto fam = family_from_string(f[1]);
            const auto st = status_from_string(f[9]);
            if (!m || !fam || !st) throw std::invalid_argument("bad enum value");
            r.method = *m;
            r.family = *fam;
            r.n_data = std::stoi(f[2]);
            r.replicate = std::stoi(f[3]);
            r.param = std::stoi(f[4]);
            if (f[5] != "upper" && f[5] != "lower") throw std::invalid_argument("bad side");
            r.upper = f[5] == "upper";
            r.endpoint = parse_double(f[6]);
            r.truth = parse_double(f[7]);
            if (f[8] != "0" && f[8] != "1") throw std::invalid_argument("bad success flag");
            r.success = f[8] == "1";
            r.status = *st;
            r.n_evals = std::stoll(f[10]);
            r.error = parse_double(f[11]);
            rows.push_back(r);
        } catch (const std::exception& e) {
            err = {lineno, e.what()};
            return false;
        }
    }
    if (!header_seen) {
        err = {0, "empty file"};
        return false;
    }
    return true;
}

void write_dataset_csv(std::ostream& os, const Dataset& data) {
    const int k = static_cast<int>(data.covariates.cols());
    os << "x";
    for (int j = 1; j <= k; ++j) os << ",c" << j;
    os << "\n";
    for (int i = 0; i < data.covariates.rows(); ++i) {
        os << data.responses[i];
        for (int j = 0; j < k; ++j) os << ',' << format_double(data.covariates(i, j));
        os << "\n";
    }
}

} // namespace plci
