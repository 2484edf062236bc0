#pragma once

#include "plci/baselines.hpp"
#include "plci/benchmark.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace plci {

struct HarnessConfig {
    BenchmarkFamily family = BenchmarkFamily::Transformed3;
    std::vector<int> n_values = {1000};
    int replicates = 50;
    std::vector<MethodKind> methods = {MethodKind::Rvm};
    std::uint64_t seed = 0;
    int jobs = 1;
    RvmConfig rvm;
    SingularPolicy policy;
    BaselineConfig baseline;
    DiffConfig diff;

    void validate() const;
};

// One benchmark record: a single method's result for one bound of one
// parameter of one replicate. Endpoints and errors are reported on the
// natural parameter scale; unbounded results serialize as inf/-inf.
struct ScenarioRow {
    MethodKind method = MethodKind::Rvm;
    BenchmarkFamily family = BenchmarkFamily::Transformed3;
    int n_data = 0;
    int replicate = 0;
    int param = 0;
    bool upper = true;
    double endpoint = 0.0;
    double truth = 0.0;
    bool success = false;
    SearchStatus status = SearchStatus::Failed;
    std::int64_t n_evals = 0;
    double error = std::numeric_limits<double>::quiet_NaN();
};

struct ReportRow {
    MethodKind method = MethodKind::Rvm;
    BenchmarkFamily family = BenchmarkFamily::Transformed3;
    int n_data = 0;
    std::int64_t runs = 0;
    double success_rate = 0.0;
    double mean_error = std::numeric_limits<double>::quiet_NaN();
    double mean_error_sub10 = std::numeric_limits<double>::quiet_NaN();
    double frac_error_gt10 = std::numeric_limits<double>::quiet_NaN();
    double mean_evals = std::numeric_limits<double>::quiet_NaN();
};

// Runs the configured scenarios. Replicates are dispatched to `jobs`
// worker threads; the returned rows are sorted into a canonical order so
// the output does not depend on the degree of parallelism.
std::vector<ScenarioRow> run_benchmark(const HarnessConfig& cfg);

// Per (method, family, N) aggregation. success_rate covers all rows;
// error statistics cover the rows where the method itself reported
// convergence (misleading-result detection); mean_evals covers the rows
// scored as successes.
std::vector<ReportRow> aggregate(const std::vector<ScenarioRow>& rows);

// CSV serialization. Schema (one header row each):
//   run rows:   method,family,N,replicate,param,side,endpoint,truth,success,status,n_evals,error
//   report:     method,family,N,runs,success_rate,mean_error,mean_error_sub10,frac_error_gt10,mean_evals
void write_scenario_csv(std::ostream& os, const std::vector<ScenarioRow>& rows);
void write_report_csv(std::ostream& os, const std::vector<ReportRow>& rows);

struct CsvReadError {
    int line = 0;
    std::string message;
};

// Parses rows written by write_scenario_csv; on schema errors returns the
// offending line number in `err`.
bool read_scenario_csv(std::istream& is, std::vector<ScenarioRow>& rows, CsvReadError& err);

// Audit dump of a simulated dataset: header x,c1,...,ck.
void write_dataset_csv(std::ostream& os, const Dataset& data);

// %.10g with inf/-inf/nan spelled out; the one formatting used everywhere
// so re-aggregation reproduces files byte for byte.
std::string format_double(double v);

} // namespace plci
