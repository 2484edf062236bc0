#pragma once

#include "plci/model.hpp"
#include "plci/rvm.hpp"

#include <optional>

namespace plci {

enum class MethodKind { Rvm, Vm, Wald, GridSearch, Bisection, BinarySearch, SquaredPenalty };

const char* to_string(MethodKind m);
std::optional<MethodKind> method_from_string(const std::string& s);

struct OptimizerConfig {
    int max_iters = 500;
    double grad_tol = 1e-6;
    double armijo_c1 = 1e-4;
    double backtrack = 0.5;

    void validate() const;
};

struct BfgsResult {
    Vector x;
    double f = 0.0;
    bool converged = false;
    int iterations = 0;
};

// Standard BFGS with backtracking line search, minimizing the evaluator's
// model. Analytic gradients are used when the model carries them.
BfgsResult bfgs_minimize(Evaluator& ev, const Vector& x0, const OptimizerConfig& cfg = {});

struct FitResult {
    Vector theta;
    double loglik = 0.0;
    double grad_norm = 0.0;
    bool converged = false;
    EvalCounter evals;
};

// Trust-region Newton ascent on the model, used to polish BFGS estimates.
// Stops when ||g|| <= tol (default derived as 1e-6 * (1 + |l|)).
FitResult trust_refine(Evaluator& ev, const Vector& start, double tol = -1.0, int max_steps = 60);

// Maximum likelihood fit: BFGS on -l followed by trust-region refinement.
FitResult fit_mle(const ObjectiveModel& model, const Vector& theta_init,
                  const OptimizerConfig& cfg = {}, const DiffConfig& diff = {});

// Settings shared by the baseline interval methods.
struct BaselineConfig {
    double value_tol = 1e-4;     // |l - lstar| stopping tolerance
    double unbounded_at = 1e3;   // offsets beyond this count as an infinite bound
    double penalty_weight = 1.0; // weight of the squared term in the penalty method
    OptimizerConfig opt;         // inner nuisance optimizer
};

struct WaldResult {
    double lower = 0.0;
    double upper = 0.0;
    SearchStatus status = SearchStatus::Failed;
    Vector theta_hat;
    EvalCounter evals;
};

// theta0_hat +/- z * sqrt((-H)^(-1)_00); fails when H is not negative definite.
WaldResult wald_ci(const ObjectiveModel& model, const Vector& theta_hat, double alpha,
                   const DiffConfig& diff = {});

struct CiResult {
    EndpointResult lower;
    EndpointResult upper;
};

// Both endpoints for coordinate 0 by the requested method. The lower side
// always runs the upper-side search on the model flipped in coordinate 0.
CiResult compute_ci(MethodKind method, const ObjectiveModel& model, const Vector& theta_hat,
                    const RvmConfig& rvm_cfg = {}, const SingularPolicy& policy = {},
                    const BaselineConfig& bl = {}, const DiffConfig& diff = {});

// Upper-side searches of the individual baseline methods (exposed for tests).
EndpointResult vm_upper(const ObjectiveModel& model, const Vector& theta_hat, double alpha,
                        const BaselineConfig& bl = {}, const DiffConfig& diff = {});
EndpointResult binary_search_upper(const ObjectiveModel& model, const Vector& theta_hat,
                                   double alpha, const BaselineConfig& bl = {},
                                   const DiffConfig& diff = {});
EndpointResult bisection_upper(const ObjectiveModel& model, const Vector& theta_hat, double alpha,
                               const BaselineConfig& bl = {}, const DiffConfig& diff = {});
EndpointResult grid_search_upper(const ObjectiveModel& model, const Vector& theta_hat,
                                 double alpha, const BaselineConfig& bl = {},
                                 const DiffConfig& diff = {});
EndpointResult squared_penalty_upper(const ObjectiveModel& model, const Vector& theta_hat,
                                     double alpha, const BaselineConfig& bl = {},
                                     const DiffConfig& diff = {});

} // namespace plci
