#pragma once

#include "plci/model.hpp"
#include "plci/quadmodel.hpp"

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace plci {

// Search configuration. Tolerances marked "derived" are computed at search
// start when left at their negative sentinel.
struct RvmConfig {
    double alpha = 0.95;        // confidence level
    double gamma = 0.5;         // precision constant for step acceptance
    double beta0 = 2.0;         // divisor applied to d0 on repeated rejection
    double beta1 = 1.5;         // divisor applied to the trust radius
    double delta0_max = 1e3;    // largest single step of the interest parameter
    double eps_step_factor = 1e-8;  // discontinuity floor: eps = factor * (1 + ||g||)
    double r0_init = 1.0;       // initial d0 for unbounded subproblems
    double r1_init = 1.0;       // initial radius for unbounded subproblems
    int iter_max = 200;
    double value_tol = 1e-4;    // |l - lstar| convergence tolerance
    double grad_tol = -1.0;     // derived: 1e-4 * (1 + ||g(theta_hat)||) when < 0
    int freeze_release_iters = 3;  // iterations a frozen coordinate stays held
    double near_target_factor = 10.0;  // gradient rule applies when |l - lstar| <= factor * value_tol

    void validate() const;
};

enum class SearchStatus { Converged, Inestimable, IterationLimit, Failed };

const char* to_string(SearchStatus s);

// Which branch the step proposal took for the interest parameter.
enum class StepAction { Step, ResetThreshold, JumpMinimum, LargeProbe, BinaryRecovery };

const char* to_string(StepAction a);

struct StepProposal {
    StepAction action = StepAction::Step;
    double delta0 = 0.0;
};

// Step choice for the interest parameter given the profile quadratic
// lhat_PL(d0) = a d0^2 + p d0 + q + lstar_active. `above_threshold` is
// q >= 0. Threshold resets and binary recovery are reported as actions for
// the engine to execute.
StepProposal propose_delta0(const ProfileQuadratic& pq, double delta0_max);

struct AcceptContext {
    double delta0 = 0.0;
    bool unbounded_branch = false;
    double lbar = 0.0;          // value at the expansion point
    double lstar_active = 0.0;
    double lstar_original = -std::numeric_limits<double>::infinity();
    double gamma = 0.5;
    double value_tol = 1e-4;
    double near_target_factor = 10.0;
    double grad_norm = 0.0;     // ||g|| at the expansion point
    double grad_floor = 1e-4;   // scale floor for the gradient-precision rule
    double step_norm = 0.0;     // ||(d0, dt)||
    double eps_step = 0.0;      // discontinuity floor
};

// Acceptance cascade for a trial step: forward steps that beat the
// prediction are always taken; otherwise the unbounded-increase,
// approach-from-below, value-precision and (near the target)
// gradient-precision rules all have to pass. Pass `grad_checked = false`
// when the actual gradient was not evaluated (far from the target).
bool accept_step(double pred_value, double actual_value, const AcceptContext& ctx,
                 bool grad_checked = false, const Vector& pred_nuis_grad = Vector(),
                 const Vector& actual_nuis_grad = Vector());

struct TraceEntry {
    int iteration = 0;
    double delta0 = 0.0;
    double radius = -1.0;  // -1 for unconstrained trials
    double lbar = 0.0;
    double a = 0.0, p = 0.0, q = 0.0;
    StepAction action = StepAction::Step;
    bool accepted = false;
    bool maximizing = false;
    double lstar_active = 0.0;
    double step_norm = 0.0;
};

struct EndpointResult {
    double endpoint = std::numeric_limits<double>::quiet_NaN();
    SearchStatus status = SearchStatus::Failed;
    Vector theta_at_endpoint;
    int iterations = 0;
    int accepted_steps = 0;
    EvalCounter evals;
    double value_at_endpoint = std::numeric_limits<double>::quiet_NaN();
    double nuisance_grad_norm = std::numeric_limits<double>::quiet_NaN();
    double threshold = std::numeric_limits<double>::quiet_NaN();  // lstar
    bool discontinuity_stop = false;  // endpoint sits at a detected jump of l
    std::vector<TraceEntry> trace;    // filled when cfg asks for it
};

struct SearchOptions {
    bool keep_trace = false;
    std::ostream* trace_stream = nullptr;  // line-per-iteration text log
};

// Largest theta_0 whose profile log-likelihood still reaches the
// level-alpha threshold, found by trust-region Newton iteration from the
// MLE. `theta_hat` must be (approximately) the maximizer of the model.
EndpointResult find_upper_endpoint(const ObjectiveModel& model, const Vector& theta_hat,
                                   const RvmConfig& cfg = {}, const SingularPolicy& policy = {},
                                   const DiffConfig& diff = {}, const SearchOptions& opts = {});

// Lower endpoint via the upper search on the model flipped in
// coordinate 0; the returned endpoint is negated back.
EndpointResult find_lower_endpoint(const ObjectiveModel& model, const Vector& theta_hat,
                                   const RvmConfig& cfg = {}, const SingularPolicy& policy = {},
                                   const DiffConfig& diff = {}, const SearchOptions& opts = {});

} // namespace plci
