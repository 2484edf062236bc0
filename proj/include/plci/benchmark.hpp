#pragma once

#include "plci/model.hpp"
#include "plci/rvm.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

namespace plci {

// Simulated logistic-regression test problems. The "transformed" families
// raise each covariate to an unknown power alpha_j in (0,1); the GLM family
// keeps the covariates linear (alpha fixed at 1).
enum class BenchmarkFamily { Transformed3, Transformed11, Glm11 };

const char* to_string(BenchmarkFamily f);
std::optional<BenchmarkFamily> family_from_string(const std::string& s);

struct BenchmarkSpec {
    BenchmarkFamily family = BenchmarkFamily::Transformed3;
    int n_data = 1000;
    std::uint64_t seed = 0;
    double nb_mean = 5.0;
    double nb_var = 10.0;
    double binom_p = 0.2;
    double zero_perturbation = 1e-6;

    void validate() const;
};

// Generating parameter values, on the natural scale.
struct TrueParameters {
    Vector alpha;  // covariate powers (empty for the GLM)
    Vector beta;   // beta[0] is the intercept
};

TrueParameters true_parameters(BenchmarkFamily f);
int covariate_count(BenchmarkFamily f);
int param_count(BenchmarkFamily f);

struct Dataset {
    Matrix covariates;           // n_data x k, strictly positive
    Eigen::VectorXi responses;   // 0/1
};

// Deterministic seed derivation (splitmix64 of seed + index), so replicate
// streams are independently reproducible.
std::uint64_t split_seed(std::uint64_t base, std::uint64_t index);

// Count covariates: column 0, 2, 4, ... are negative binomial with the
// spec'd mean/variance; each following column is Binomial(previous, p).
// Every entry is then shifted by zero_perturbation so powers of zero cannot
// occur.
Matrix simulate_covariates(const BenchmarkSpec& spec);

// Bernoulli responses from the logistic model with the given parameters.
Eigen::VectorXi simulate_responses(const Matrix& covariates, const TrueParameters& params,
                                   BenchmarkFamily family, std::uint64_t seed);

Dataset simulate_dataset(const BenchmarkSpec& spec);

// softplus and its inverse; the alpha coordinates are searched on the
// unconstrained scale alpha' = inv_softplus(alpha).
double softplus(double x);
double inv_softplus(double x);

// Packed parameter vector on the transformed scale:
// (alpha'_1..alpha'_k, beta_0..beta_k) for the transformed families,
// (beta_0..beta_k) for the GLM.
Vector pack_transformed(BenchmarkFamily f, const TrueParameters& p);

// True iff coordinate `idx` of the packed vector is an alpha' coordinate.
bool is_alpha_coordinate(BenchmarkFamily f, int idx);

// Back-transform of one packed coordinate to the natural scale (softplus
// for alpha coordinates, identity for beta).
double to_native_scale(BenchmarkFamily f, int idx, double packed_value);

// Log-likelihood model over the packed transformed parameters, with
// analytic gradient and Hessian.
ObjectiveModel make_benchmark_model(std::shared_ptr<const Dataset> data, BenchmarkFamily family);

// ---- scoring --------------------------------------------------------------

// One method's result for a single bound, on the transformed scale.
struct BoundOutcome {
    SearchStatus status = SearchStatus::Failed;
    double endpoint = 0.0;   // +/-inf allowed (inestimable results)
    double value_at = 0.0;   // log-likelihood at the returned parameter vector
};

struct ConsensusTruth {
    bool unbounded = false;
    double value = 0.0;  // transformed scale; meaningless when unbounded
};

// Widest admissible endpoint across methods (admissible: value_at within
// 0.001 of the threshold or better). Endpoints beyond +/-1000 on the
// transformed scale mean the bound is unbounded. Returns nullopt when no
// method produced an admissible result.
std::optional<ConsensusTruth> consensus_truth(const std::vector<BoundOutcome>& outcomes,
                                              double lstar, bool upper_side,
                                              double unbounded_at = 1e3);

struct Score {
    bool success = false;
    double error = std::numeric_limits<double>::quiet_NaN();  // native scale; NaN if undefined
};

// Success: the method claimed a definite outcome and the endpoint is within
// 0.001 or 5 percent of the truth (both on the native scale); for unbounded
// truths, any reported-unbounded or inestimable result succeeds.
Score score_run(const BoundOutcome& outcome, double native_endpoint,
                const ConsensusTruth& truth, double native_truth, double unbounded_at = 1e3);

} // namespace plci
