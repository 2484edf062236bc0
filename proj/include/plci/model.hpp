#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace plci {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Throws if any entry of v is NaN or infinite.
void require_finite(const Vector& v, const char* what);

// A twice-differentiable log-likelihood (or any smooth objective).
// `value` is mandatory; analytic `gradient` / `hessian` are optional and the
// numeric machinery in Evaluator fills the gap with central differences.
// Models must be pure functions of theta so they can be evaluated
// concurrently from independent searches.
struct ObjectiveModel {
    int dim = 0;
    std::function<double(const Vector&)> value;
    std::function<Vector(const Vector&)> gradient;  // may be empty
    std::function<Matrix(const Vector&)> hessian;   // may be empty

    bool has_gradient() const { return static_cast<bool>(gradient); }
    bool has_hessian() const { return static_cast<bool>(hessian); }
};

// Function-evaluation bookkeeping. Analytic derivative calls are charged as
// the number of plain value calls they replace (2n for a gradient,
// 2n(n+1) for a Hessian) so that methods with and without analytic
// derivatives can be compared on equal footing. Numeric derivatives charge
// the value calls they actually make.
struct EvalCounter {
    std::int64_t n_value = 0;
    std::int64_t n_gradient_equiv = 0;
    std::int64_t n_hessian_equiv = 0;

    std::int64_t total() const { return n_value + n_gradient_equiv + n_hessian_equiv; }

    EvalCounter& operator+=(const EvalCounter& o) {
        n_value += o.n_value;
        n_gradient_equiv += o.n_gradient_equiv;
        n_hessian_equiv += o.n_hessian_equiv;
        return *this;
    }
};

// Finite-difference configuration. First derivatives use a central stencil
// with per-coordinate step max(rel_step*|x_j|, abs_floor). Second
// derivatives use the square roots of both knobs; with the defaults this is
// 1e-3 relative / 1e-4 absolute, which keeps the roundoff error of second
// differences at the 1e-10 level instead of 1e-4.
struct DiffConfig {
    double rel_step = 1e-6;
    double abs_floor = 1e-8;

    void validate() const {
        if (!(rel_step > 0.0) || !(abs_floor > 0.0))
            throw std::invalid_argument("DiffConfig: steps must be positive");
    }
};

struct GradientResult {
    Vector g;
    bool ok = true;  // false when a stencil point evaluated to a non-finite value
};

struct HessianResult {
    Matrix h;
    bool ok = true;
};

// Relative discrepancies between analytic and numeric derivatives.
struct DerivativeCheck {
    double gradient_rel_error = 0.0;
    double hessian_rel_error = 0.0;
};

// Binds a model to an evaluation counter and a finite-difference
// configuration. One Evaluator belongs to one search; never share an
// Evaluator across concurrent searches.
class Evaluator {
public:
    Evaluator(const ObjectiveModel& model, DiffConfig cfg = {});

    const ObjectiveModel& model() const { return model_; }
    int dim() const { return model_.dim; }
    const EvalCounter& counter() const { return counter_; }
    DiffConfig& diff_config() { return cfg_; }

    // Folds the cost of a sub-search (e.g. an inner nuisance optimization)
    // into this evaluator's counter.
    void absorb(const EvalCounter& sub) { counter_ += sub; }

    // Returns l(theta); NaN results are mapped to -infinity so that cliff
    // regions read as inadmissible rather than poisoning later arithmetic.
    double value(const Vector& theta);

    // Analytic gradient when available, otherwise central differences.
    GradientResult gradient(const Vector& theta);

    // Analytic Hessian when available, otherwise central second differences
    // on the value function. The result is symmetrized as (A + A^T)/2.
    HessianResult hessian(const Vector& theta);

private:
    ObjectiveModel model_;
    DiffConfig cfg_;
    EvalCounter counter_;

    double raw_value(const Vector& theta);
};

// Compares analytic and numeric derivatives at theta. Requires the model to
// carry an analytic gradient (and uses the Hessian when present).
DerivativeCheck check_derivatives(const ObjectiveModel& model, const Vector& theta,
                                  DiffConfig cfg = {});

// ---- model adapters -------------------------------------------------------

// View of `m` with coordinate 0 negated: l'(t0, rest) = l(-t0, rest).
// Searching the upper bound of the flipped model finds the lower bound of
// the original one.
ObjectiveModel flip_coordinate0(const ObjectiveModel& m);

// View of `m` with coordinates 0 and `index` swapped, so any coordinate can
// be treated as the parameter of interest.
ObjectiveModel swap_to_front(const ObjectiveModel& m, int index);

// Model over the free coordinates only; the others are pinned at the values
// in `anchor`. Used for fixed-interest profile evaluations.
ObjectiveModel restrict_model(const ObjectiveModel& m, const Vector& anchor,
                              const std::vector<int>& free_indices);

} // namespace plci
