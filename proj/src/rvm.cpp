#include "plci/rvm.hpp"

#include "plci/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

namespace plci {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

bool nearly_zero(double x, double scale) { return std::abs(x) <= scale; }
} // namespace

void RvmConfig::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("RvmConfig: alpha in (0,1)");
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("RvmConfig: gamma in (0,1)");
    if (!(beta0 > 1.0) || !(beta1 > 1.0))
        throw std::invalid_argument("RvmConfig: beta0, beta1 must exceed 1");
    if (!(delta0_max > 0.0) || !(value_tol > 0.0) || !(eps_step_factor > 0.0) ||
        !(r0_init > 0.0) || !(r1_init > 0.0) || iter_max < 1)
        throw std::invalid_argument("RvmConfig: invalid tolerance or limit");
}

const char* to_string(SearchStatus s) {
    switch (s) {
        case SearchStatus::Converged: return "Converged";
        case SearchStatus::Inestimable: return "Inestimable";
        case SearchStatus::IterationLimit: return "IterationLimit";
        case SearchStatus::Failed: return "Failed";
    }
    return "?";
}

const char* to_string(StepAction a) {
    switch (a) {
        case StepAction::Step: return "Step";
        case StepAction::ResetThreshold: return "ResetThreshold";
        case StepAction::JumpMinimum: return "JumpMinimum";
        case StepAction::LargeProbe: return "LargeProbe";
        case StepAction::BinaryRecovery: return "BinaryRecovery";
    }
    return "?";
}

StepProposal propose_delta0(const ProfileQuadratic& pq, double delta0_max) {
    const double a = pq.a, p = pq.p, q = pq.q;
    const double p_scale = 1e-10 * (1.0 + std::abs(a) + std::abs(q));
    const double a_scale = 1e-12 * (1.0 + std::abs(p) + std::abs(q));
    const bool a_zero = nearly_zero(a, a_scale);
    const bool p_zero = nearly_zero(p, p_scale);

    if (a_zero && p_zero) {
        // Constant approximate profile: probe far out if admissible, else
        // stepping cannot help.
        if (q >= 0.0) return {StepAction::LargeProbe, delta0_max};
        return {StepAction::BinaryRecovery, 0.0};
    }

    const double disc = p * p - 4.0 * a * q;
    // A vanishing slope defers to the curvature: treat as decreasing when
    // the profile is concave, as increasing when convex.
    const bool decreasing = p_zero ? (a < 0.0) : (p < 0.0);
    if (q >= 0.0) {
        // Above the threshold.
        if (decreasing) {
            if (a_zero) return {StepAction::Step, -q / p};
            if (disc >= 0.0)
                return {StepAction::Step, -(p + std::sqrt(disc)) / (2.0 * a)};
            // Local minimum above the threshold: jump across it.
            return {StepAction::JumpMinimum, -p / a};
        }
        // Increasing profile: take the positive root when it exists.
        if (!a_zero && a < 0.0)
            return {StepAction::Step, -(p + std::sqrt(disc)) / (2.0 * a)};
        // Unbounded growth of the approximation: no positive root.
        return {StepAction::ResetThreshold, 0.0};
    }

    // Below the threshold: smallest step back to the admissible region.
    if (a_zero) return {StepAction::Step, -q / p};
    if (disc < 0.0) {
        // Local maximum below the threshold (only possible with a < 0).
        if (p_zero) return {StepAction::BinaryRecovery, 0.0};
        return {StepAction::Step, -p / (2.0 * a)};
    }
    const double root = (p < 0.0 && !p_zero) ? -(p + std::sqrt(disc)) / (2.0 * a)
                                             : -(p - std::sqrt(disc)) / (2.0 * a);
    return {StepAction::Step, root};
}

bool accept_step(double pred_value, double actual_value, const AcceptContext& ctx,
                 bool grad_checked, const Vector& pred_nuis_grad,
                 const Vector& actual_nuis_grad) {
    if (!std::isfinite(actual_value)) return false;

    // A step at the discontinuity floor that would drop an admissible
    // iterate below the threshold is evidence of a jump, not progress;
    // reject it so the discontinuity handling can decide.
    if (ctx.step_norm <= ctx.eps_step && ctx.lbar >= ctx.lstar_original &&
        actual_value < ctx.lstar_original)
        return false;

    // (1) forward steps that do at least as well as predicted are always taken
    if (ctx.delta0 >= 0.0 && actual_value >= pred_value) return true;

    // (2) unbounded subproblem steps must actually increase the likelihood,
    //     unless the step is already below the discontinuity floor
    if (ctx.unbounded_branch && ctx.step_norm > ctx.eps_step && actual_value < ctx.lbar)
        return false;

    // (3) from outside the admissible region we must approach the target
    if (ctx.lbar < ctx.lstar_active &&
        !(std::abs(actual_value - ctx.lstar_active) < std::abs(ctx.lbar - ctx.lstar_active)))
        return false;

    // (4) value precision relative to the distance from the target; the
    //     denominator is floored at value_tol so progress stays possible
    //     once lbar is within tolerance of the target
    const double dist = std::max(std::abs(ctx.lbar - ctx.lstar_active), ctx.value_tol);
    if (std::abs(pred_value - actual_value) > ctx.gamma * dist) return false;

    // (5) near the target the gradient prediction must be precise as well
    if (grad_checked &&
        std::abs(actual_value - ctx.lstar_active) <= ctx.near_target_factor * ctx.value_tol) {
        const double scale = std::max(ctx.grad_norm, 10.0 * ctx.grad_floor);
        if ((pred_nuis_grad - actual_nuis_grad).norm() > ctx.gamma * scale) return false;
    }
    return true;
}

namespace {

// One upper-endpoint search. Owns the evaluator (and thus the counter).
class UpperSearch {
public:
    UpperSearch(const ObjectiveModel& model, const Vector& theta_hat, const RvmConfig& cfg,
                const SingularPolicy& policy, const DiffConfig& diff, const SearchOptions& opts)
        : model_(model), cfg_(cfg), policy_(policy), opts_(opts), ev_(model, diff),
          theta_(theta_hat), base_diff_(diff) {
        cfg_.validate();
        policy_.validate();
    }

    EndpointResult run();

private:
    const ObjectiveModel& model_;
    RvmConfig cfg_;
    SingularPolicy policy_;
    SearchOptions opts_;
    Evaluator ev_;

    Vector theta_;
    double lmle_ = 0.0;
    double lstar0_ = 0.0;
    double lstar_act_ = 0.0;
    bool maximizing_ = false;
    double grad_tol_ = 0.0;
    double r_prev_ = -1.0;
    double r0_ = 0.0, r1_ = 0.0;  // adapted unbounded-step parameters
    double best_theta0_ = 0.0;
    Vector best_theta_;
    std::map<int, int> frozen_;  // full coordinate -> iterations left
    int accepted_ = 0;
    int iter_ = 0;
    double stencil_scale_ = 1.0;  // < 1 after spurious-curvature retries
    DiffConfig base_diff_;
    std::vector<TraceEntry> trace_;

    // per-iteration workspace
    BuildResult br_;
    std::vector<int> active_;  // full indices of non-frozen nuisance coords
    QuadraticModel qa_;        // quadratic over (interest, active nuisance)
    double eps_step_ = 0.0;

    enum class HandlerOutcome { Moved, Frozen, Terminate, Recovered };

    EndpointResult finish(SearchStatus status, const Vector& at, bool disc_stop = false);
    void record(const TraceEntry& te);
    Vector embed(double d0, const Vector& dt_active) const;
    void note_admissible(const Vector& th, double value);
    bool try_accept(double d0, const Vector& dt_active, double radius, StepAction action,
                    bool unbounded, double& out_actual);
    void recover();
    HandlerOutcome handle_discontinuity(double d0, const Vector& dt_active,
                                        bool gradient_rejection, const Vector& trial_grad);
    void nuisance_polish();
};

EndpointResult UpperSearch::finish(SearchStatus status, const Vector& at, bool disc_stop) {
    EndpointResult r;
    r.status = status;
    r.theta_at_endpoint = at;
    r.endpoint = (status == SearchStatus::Inestimable) ? kInf
                 : (at.size() > 0 ? at[0] : std::numeric_limits<double>::quiet_NaN());
    r.iterations = iter_;
    r.accepted_steps = accepted_;
    r.threshold = lstar0_;
    r.discontinuity_stop = disc_stop;
    if (at.size() > 0 && (status == SearchStatus::Converged || status == SearchStatus::Inestimable ||
                          status == SearchStatus::IterationLimit)) {
        r.value_at_endpoint = ev_.value(at);
        if (model_.dim > 1) {
            auto g = ev_.gradient(at);
            r.nuisance_grad_norm = g.g.tail(model_.dim - 1).norm();
        } else {
            r.nuisance_grad_norm = 0.0;
        }
    }
    r.evals = ev_.counter();
    if (opts_.keep_trace) r.trace = std::move(trace_);
    return r;
}

void UpperSearch::record(const TraceEntry& te) {
    if (opts_.keep_trace) trace_.push_back(te);
    if (opts_.trace_stream) {
        std::ostream& os = *opts_.trace_stream;
        os << "iter=" << te.iteration << " action=" << to_string(te.action)
           << " delta0=" << te.delta0 << " r=" << te.radius << " lbar=" << te.lbar
           << " accepted=" << (te.accepted ? 1 : 0) << " maximizing=" << (te.maximizing ? 1 : 0)
           << "\n";
    }
}

Vector UpperSearch::embed(double d0, const Vector& dt_active) const {
    Vector full = Vector::Zero(model_.dim);
    full[0] = d0;
    for (size_t k = 0; k < active_.size(); ++k) full[active_[k]] = dt_active[k];
    return full;
}

void UpperSearch::note_admissible(const Vector& th, double value) {
    if (value >= lstar0_ && th[0] > best_theta0_) {
        best_theta0_ = th[0];
        best_theta_ = th;
    }
}

// Evaluate a trial step and run the acceptance cascade. On success the
// iterate moves. `out_actual` always receives the actual value.
bool UpperSearch::try_accept(double d0, const Vector& dt_active, double radius,
                             StepAction action, bool unbounded, double& out_actual) {
    const Vector step = embed(d0, dt_active);
    const Vector trial = theta_ + step;
    if (!trial.allFinite()) {
        out_actual = -kInf;
        return false;
    }
    const double pred = qa_.eval(d0, dt_active);
    const double actual = ev_.value(trial);
    out_actual = actual;

    AcceptContext ctx;
    ctx.delta0 = d0;
    ctx.unbounded_branch = unbounded;
    ctx.lbar = br_.qm.lbar;
    ctx.lstar_active = lstar_act_;
    ctx.lstar_original = lstar0_;
    ctx.gamma = cfg_.gamma;
    ctx.value_tol = cfg_.value_tol;
    ctx.near_target_factor = cfg_.near_target_factor;
    ctx.grad_norm = br_.gradient.norm();
    ctx.grad_floor = grad_tol_;
    ctx.step_norm = step.norm();
    ctx.eps_step = eps_step_;

    bool grad_checked = false;
    Vector pred_gt, act_gt;
    if (std::isfinite(actual) &&
        std::abs(actual - lstar_act_) <= cfg_.near_target_factor * cfg_.value_tol &&
        model_.dim > 1) {
        const auto gr = ev_.gradient(trial);
        if (gr.ok) {
            grad_checked = true;
            act_gt = gr.g.tail(model_.dim - 1);
            pred_gt = (br_.gradient + br_.hessian * step).tail(model_.dim - 1);
        }
    }

    const bool ok = accept_step(pred, actual, ctx, grad_checked, pred_gt, act_gt);

    TraceEntry te;
    te.iteration = iter_;
    te.delta0 = d0;
    te.radius = radius;
    te.lbar = br_.qm.lbar;
    te.action = action;
    te.accepted = ok;
    te.maximizing = maximizing_;
    te.lstar_active = lstar_act_;
    te.step_norm = ctx.step_norm;
    record(te);

    if (ok) {
        theta_ = trial;
        ++accepted_;
        note_admissible(trial, actual);
        r_prev_ = radius > 0.0 ? radius : std::max(dt_active.size() ? dt_active.norm() : 0.0,
                                                   1e-12);
    }
    return ok;
}

// Binary search back to the admissible region between the current iterate
// and the best admissible point seen so far.
void UpperSearch::recover() {
    maximizing_ = false;
    lstar_act_ = lstar0_;
    if (ev_.value(theta_) >= lstar0_) return;  // already admissible
    Vector cur = theta_;
    for (int k = 0; k < 50; ++k) {
        const Vector mid = 0.5 * (cur + best_theta_);
        const double lm = ev_.value(mid);
        if (lm >= lstar0_) {
            theta_ = mid;
            return;
        }
        cur = mid;
    }
    theta_ = best_theta_;
}

// Fixed-interest maximization over the nuisance coordinates, used when a
// discontinuity in the interest direction is hit while the nuisance block
// is not yet optimal. Trust-region Newton on the active nuisance block.
void UpperSearch::nuisance_polish() {
    if (active_.empty()) return;
    double radius = std::max(r_prev_, 1.0);
    for (int k = 0; k < 20; ++k) {
        BuildResult b = build_quadratic(ev_, theta_);
        if (!b.derivatives_ok) return;
        Vector gt(active_.size());
        Matrix ht(active_.size(), active_.size());
        for (size_t i = 0; i < active_.size(); ++i) {
            gt[i] = b.gradient[active_[i]];
            for (size_t j = 0; j < active_.size(); ++j)
                ht(i, j) = b.hessian(active_[i], active_[j]);
        }
        if (gt.norm() <= grad_tol_) return;
        const TrustSolution ts = solve_trust_subproblem(gt, ht, radius);
        const Vector trial = theta_ + embed(0.0, ts.step);
        const double lt = ev_.value(trial);
        if (lt > b.qm.lbar) {
            theta_ = trial;
            note_admissible(trial, lt);
            radius *= 2.0;
        } else {
            radius /= 4.0;
            if (radius < 1e-12) return;
        }
    }
}

UpperSearch::HandlerOutcome UpperSearch::handle_discontinuity(double d0, const Vector& dt_active,
                                                              bool gradient_rejection,
                                                              const Vector& trial_grad) {
    const int n = model_.dim;
    const Vector step = embed(d0, dt_active);

    // Gradient discontinuity: freeze nuisance components whose gradient
    // flips from positive to negative across the step, take the rest.
    if (gradient_rejection && trial_grad.size() == n) {
        std::vector<int> flips;
        for (int j = 1; j < n; ++j)
            if (br_.gradient[j] > 0.0 && trial_grad[j] < 0.0 && step[j] != 0.0)
                flips.push_back(j);
        if (!flips.empty()) {
            Vector move = step;
            for (int j : flips) {
                move[j] = 0.0;
                frozen_[j] = cfg_.freeze_release_iters;
            }
            theta_ += move;
            note_admissible(theta_, ev_.value(theta_));
            return HandlerOutcome::Moved;
        }
    }

    // Component scan: add coordinates one at a time and find the ones on
    // which the quadratic prediction breaks down.
    std::vector<int> culprits;
    std::vector<char> decreased;
    Vector partial = Vector::Zero(n);
    double l_prev = br_.qm.lbar;
    double l_far0 = std::numeric_limits<double>::quiet_NaN();  // value across the interest jump
    const double mismatch_scale =
        cfg_.gamma * std::max(std::abs(br_.qm.lbar - lstar_act_), cfg_.value_tol);
    for (int k = 0; k < n; ++k) {
        if (step[k] == 0.0) continue;
        Vector cand = partial;
        cand[k] += step[k];
        const double pred = br_.qm.lbar + br_.gradient.dot(cand) +
                            0.5 * cand.dot(br_.hessian * cand);
        const double lc = ev_.value(theta_ + cand);
        if (k == 0) l_far0 = lc;
        const bool mismatch = !std::isfinite(lc) || std::abs(pred - lc) > mismatch_scale;
        if (mismatch) {
            culprits.push_back(k);
            decreased.push_back(lc < l_prev ? 1 : 0);
        } else {
            partial = cand;
            l_prev = lc;
        }
    }

    if (culprits.empty()) {
        // The quadratic failed at moderate steps but the function is smooth
        // at small ones: a stencil that straddles a nearby jump has faked
        // the curvature. Rebuild with a finer stencil before concluding.
        if (!model_.has_hessian() && stencil_scale_ > 1e-5) {
            stencil_scale_ *= 1e-2;
            if (maximizing_) {
                maximizing_ = false;
                lstar_act_ = lstar0_;
            }
            return HandlerOutcome::Moved;
        }
        if (br_.qm.lbar >= lstar0_) return HandlerOutcome::Terminate;
        recover();
        return HandlerOutcome::Recovered;
    }

    if (culprits.front() == 0) {
        // Jump in the interest direction. First make sure the nuisance
        // block is actually optimal here; otherwise polish it and retry.
        const Vector gt_full = br_.gradient.tail(n - 1);
        const bool nuis_opt = n == 1 || gt_full.norm() <= 10.0 * grad_tol_;
        if (!nuis_opt) {
            nuisance_polish();
            return HandlerOutcome::Moved;
        }
        const double l_far = l_far0;
        if (l_far >= lstar_act_ || l_far > br_.qm.lbar) {
            Vector move = Vector::Zero(n);
            move[0] = step[0];
            theta_ += move;
            note_admissible(theta_, std::isfinite(l_far) ? l_far : -kInf);
            return HandlerOutcome::Moved;
        }
        if (l_far < lstar0_ && br_.qm.lbar >= lstar0_) return HandlerOutcome::Terminate;
        recover();
        return HandlerOutcome::Recovered;
    }

    // Nuisance discontinuities: hold the coordinates whose change lowers
    // the likelihood, keep the rest of the step.
    std::vector<int> to_freeze;
    for (size_t i = 0; i < culprits.size(); ++i)
        if (decreased[i]) to_freeze.push_back(culprits[i]);
    if (to_freeze.empty()) {
        // All problematic components improved the value: take the full step.
        theta_ += step;
        note_admissible(theta_, ev_.value(theta_));
        return HandlerOutcome::Moved;
    }
    for (int j : to_freeze) frozen_[j] = cfg_.freeze_release_iters;
    return HandlerOutcome::Frozen;
}

EndpointResult UpperSearch::run() {
    const int n = model_.dim;
    lmle_ = ev_.value(theta_);
    if (!std::isfinite(lmle_)) return finish(SearchStatus::Failed, Vector());
    lstar0_ = likelihood_threshold(lmle_, cfg_.alpha);
    lstar_act_ = lstar0_;
    {
        auto g0 = ev_.gradient(theta_);
        grad_tol_ = cfg_.grad_tol > 0.0 ? cfg_.grad_tol : 1e-4 * (1.0 + g0.g.norm());
    }
    r0_ = cfg_.r0_init;
    r1_ = cfg_.r1_init;
    best_theta0_ = theta_[0];
    best_theta_ = theta_;
    const double theta0_floor = theta_[0] - 1e-9 * (1.0 + std::abs(theta_[0]));

    for (iter_ = 0; iter_ < cfg_.iter_max; ++iter_) {
        ev_.diff_config().rel_step = base_diff_.rel_step * stencil_scale_ * stencil_scale_;
        ev_.diff_config().abs_floor = base_diff_.abs_floor * stencil_scale_ * stencil_scale_;
        br_ = build_quadratic(ev_, theta_);
        if (!br_.derivatives_ok) {
            // one retry with a finer stencil before giving up
            ev_.diff_config().rel_step *= 0.1;
            br_ = build_quadratic(ev_, theta_);
            if (!br_.derivatives_ok) return finish(SearchStatus::Failed, theta_);
        }
        eps_step_ = cfg_.eps_step_factor * (1.0 + br_.gradient.norm());

        // convergence test against the original threshold
        const double nuis_norm = n > 1 ? br_.gradient.tail(n - 1).norm() : 0.0;
        if (std::abs(br_.qm.lbar - lstar0_) <= cfg_.value_tol && nuis_norm <= grad_tol_ &&
            theta_[0] >= theta0_floor)
            return finish(SearchStatus::Converged, theta_);

        // frozen-coordinate bookkeeping
        for (auto it = frozen_.begin(); it != frozen_.end();) {
            if (--it->second <= 0)
                it = frozen_.erase(it);
            else
                ++it;
        }
        active_.clear();
        for (int j = 1; j < n; ++j)
            if (!frozen_.count(j)) active_.push_back(j);

        // quadratic over the active block
        qa_.lbar = br_.qm.lbar;
        qa_.g0 = br_.qm.g0;
        qa_.h00 = br_.qm.h00;
        qa_.gt.resize(active_.size());
        qa_.ht0.resize(active_.size());
        qa_.ht.resize(active_.size(), active_.size());
        for (size_t i = 0; i < active_.size(); ++i) {
            qa_.gt[i] = br_.gradient[active_[i]];
            qa_.ht0[i] = br_.hessian(active_[i], 0);
            for (size_t j = 0; j < active_.size(); ++j)
                qa_.ht(i, j) = br_.hessian(active_[i], active_[j]);
        }

        const double ht_scale = qa_.ht.size() > 0 ? qa_.ht.cwiseAbs().maxCoeff() : 0.0;
        const bool nd = is_negative_definite(qa_.ht);
        const bool nsd =
            nd || is_negative_semidefinite(qa_.ht, policy_.eig_semidef_tol * std::max(ht_scale, 1.0));

        bool unbounded = !nsd;
        double d0 = 0.0;
        StepAction action = StepAction::Step;
        bool probe = false;

        if (!unbounded) {
            ProfileQuadratic pq = profile_coefficients(qa_, lstar_act_, policy_);
            if (maximizing_ && (br_.qm.lbar < lstar0_ || pq.a < 0.0)) {
                maximizing_ = false;
                pq.q += lstar_act_ - lstar0_;
                lstar_act_ = lstar0_;
            }
            StepProposal prop = propose_delta0(pq, cfg_.delta0_max);
            if (prop.action == StepAction::ResetThreshold) {
                const double lhat_pl0 = pq.q + lstar_act_;
                const double raised = std::max(lhat_pl0 + 1.0, 0.5 * (br_.qm.lbar + lmle_));
                maximizing_ = true;
                pq.q = lhat_pl0 - raised;
                lstar_act_ = raised;
                prop = propose_delta0(pq, cfg_.delta0_max);
                TraceEntry te;
                te.iteration = iter_;
                te.action = StepAction::ResetThreshold;
                te.lbar = br_.qm.lbar;
                te.maximizing = true;
                te.lstar_active = lstar_act_;
                record(te);
            }
            if (prop.action == StepAction::BinaryRecovery) {
                TraceEntry te;
                te.iteration = iter_;
                te.action = StepAction::BinaryRecovery;
                te.lbar = br_.qm.lbar;
                te.lstar_active = lstar_act_;
                record(te);
                recover();
                continue;
            }
            action = prop.action;
            d0 = prop.delta0;
            probe = action == StepAction::LargeProbe ||
                    (d0 > cfg_.delta0_max && br_.qm.lbar >= lstar0_);
            d0 = std::clamp(d0, -cfg_.delta0_max, cfg_.delta0_max);

            // nuisance solve at the proposed step; an inconsistent singular
            // system means the approximation is unbounded after all
            NuisanceSolve ns = nuisance_optimum(qa_, d0, policy_);
            if (!nd && !ns.consistent) {
                unbounded = true;
            } else {
                double actual = 0.0;
                bool trial0_done = false;
                if (probe) {
                    // Clamped probe: an admissible landing confirms the
                    // profile never crosses the threshold; otherwise the
                    // step shrinks like any rejected trial.
                    const Vector trial = theta_ + embed(d0, ns.step);
                    const double lt = trial.allFinite() ? ev_.value(trial) : -kInf;
                    TraceEntry te;
                    te.iteration = iter_;
                    te.delta0 = d0;
                    te.radius = -1.0;
                    te.lbar = br_.qm.lbar;
                    te.action = action;
                    te.accepted = lt >= lstar0_;
                    te.maximizing = maximizing_;
                    te.lstar_active = lstar_act_;
                    record(te);
                    if (lt >= lstar0_) {
                        theta_ = trial;
                        return finish(SearchStatus::Inestimable, theta_);
                    }
                    trial0_done = true;
                }
                // trial 0: unconstrained step
                if (!trial0_done && try_accept(d0, ns.step, -1.0, action, false, actual))
                    continue;
                const double unc_norm = std::max(ns.step.size() ? ns.step.norm() : 0.0, 1e-12);
                double radius = r_prev_ > 0.0 ? std::sqrt(unc_norm * r_prev_) : unc_norm / cfg_.beta1;
                if (radius >= 0.999 * unc_norm) radius = unc_norm / cfg_.beta1;
                bool moved = false;
                for (int trial = 1; trial < 120; ++trial) {
                    Vector dt;
                    if (!active_.empty()) {
                        const Vector glin = qa_.gt + d0 * qa_.ht0;
                        dt = solve_trust_subproblem(glin, qa_.ht, radius).step;
                    } else {
                        dt = Vector();
                    }
                    if (try_accept(d0, dt, radius, action, false, actual)) {
                        moved = true;
                        break;
                    }
                    const double sn = embed(d0, dt).norm();
                    if (sn <= eps_step_) {
                        const auto out = handle_discontinuity(d0, dt, false, Vector());
                        if (out == HandlerOutcome::Terminate)
                            return finish(SearchStatus::Converged, theta_, true);
                        moved = true;
                        break;
                    }
                    d0 /= cfg_.beta0;
                    radius /= cfg_.beta1;
                }
                if (!moved) return finish(SearchStatus::Failed, theta_);
                continue;
            }
        }

        if (unbounded) {
            if (maximizing_ && br_.qm.lbar < lstar0_) {
                maximizing_ = false;
                lstar_act_ = lstar0_;
            }
            double d0u = r0_;
            double radius = r1_;
            if (!active_.empty()) {
                for (int k = 0; k < 60; ++k) {
                    const Vector glin = qa_.gt + d0u * qa_.ht0;
                    const TrustSolution ts = solve_trust_subproblem(glin, qa_.ht, radius);
                    if (qa_.eval(d0u, ts.step) > br_.qm.lbar + 1e-14 * (1.0 + std::abs(br_.qm.lbar)))
                        break;
                    d0u *= 0.5;
                    if (d0u < 1e-300) {
                        d0u = 0.0;
                        break;
                    }
                }
            }
            bool moved = false;
            double actual = 0.0;
            for (int trial = 0; trial < 120; ++trial) {
                Vector dt;
                if (!active_.empty()) {
                    const Vector glin = qa_.gt + d0u * qa_.ht0;
                    dt = solve_trust_subproblem(glin, qa_.ht, radius).step;
                } else {
                    dt = Vector();
                }
                if (try_accept(d0u, dt, radius, StepAction::Step, true, actual)) {
                    r0_ = 2.0 * std::max(d0u, 1e-6);
                    r1_ = 2.0 * radius;
                    moved = true;
                    break;
                }
                const double sn = embed(d0u, dt).norm();
                if (sn <= eps_step_) {
                    const auto out = handle_discontinuity(d0u, dt, false, Vector());
                    if (out == HandlerOutcome::Terminate)
                        return finish(SearchStatus::Converged, theta_, true);
                    moved = true;
                    break;
                }
                d0u /= cfg_.beta0;
                radius /= cfg_.beta1;
                r0_ = std::max(d0u, 1e-12);
                r1_ = std::max(radius, 1e-12);
            }
            if (!moved) return finish(SearchStatus::Failed, theta_);
        }
    }
    return finish(SearchStatus::IterationLimit, best_theta_.size() ? best_theta_ : theta_);
}

} // namespace

EndpointResult find_upper_endpoint(const ObjectiveModel& model, const Vector& theta_hat,
                                   const RvmConfig& cfg, const SingularPolicy& policy,
                                   const DiffConfig& diff, const SearchOptions& opts) {
    require_finite(theta_hat, "find_upper_endpoint");
    if (theta_hat.size() != model.dim)
        throw std::invalid_argument("find_upper_endpoint: theta dimension mismatch");
    UpperSearch search(model, theta_hat, cfg, policy, diff, opts);
    return search.run();
}

EndpointResult find_lower_endpoint(const ObjectiveModel& model, const Vector& theta_hat,
                                   const RvmConfig& cfg, const SingularPolicy& policy,
                                   const DiffConfig& diff, const SearchOptions& opts) {
    const ObjectiveModel flipped = flip_coordinate0(model);
    Vector start = theta_hat;
    start[0] = -start[0];
    EndpointResult res = find_upper_endpoint(flipped, start, cfg, policy, diff, opts);
    res.endpoint = -res.endpoint;
    if (res.theta_at_endpoint.size() > 0) res.theta_at_endpoint[0] = -res.theta_at_endpoint[0];
    return res;
}

} // namespace plci
