#pragma once

#include "plci/model.hpp"
#include "plci/rvm.hpp"

namespace plci {

// Scalar function of the parameters whose confidence interval is sought.
// Analytic derivatives are optional; without them the augmented model
// falls back to numeric differentiation.
struct ParameterFunction {
    std::function<double(const Vector&)> value;
    std::function<Vector(const Vector&)> gradient;  // may be empty
    std::function<Matrix(const Vector&)> hessian;   // may be empty

    bool has_gradient() const { return static_cast<bool>(gradient); }
    bool has_hessian() const { return static_cast<bool>(hessian); }
};

struct FunctionCiConfig {
    double epsilon = 1e-3;  // output-scale error bound of the augmented search

    void validate() const;
};

// Augmented (n+1)-dimensional model over (phi, theta):
//   lcheck(phi, theta) = l(theta) - 1/2 ((f(theta) - phi)/epsilon)^2 * chi2_1(alpha)
// Coordinate 0 is phi, so the ordinary endpoint search applies verbatim.
// Analytic derivatives are provided whenever both the model and the
// function supply the pieces the chain rule needs.
ObjectiveModel build_modified_model(const ObjectiveModel& model, const ParameterFunction& f,
                                    double epsilon, double alpha);

struct FunctionCiResult {
    EndpointResult lower;
    EndpointResult upper;
    double f_at_mle = 0.0;
    // |f(theta) - phi| at each converged endpoint; bounded by epsilon
    double residual_lower = 0.0;
    double residual_upper = 0.0;
    bool zero_information = false;  // f has (numerically) no gradient at the MLE
};

// Confidence interval for f(theta) by running the endpoint search on the
// augmented model in both directions from (f(theta_hat), theta_hat).
FunctionCiResult find_function_ci(const ObjectiveModel& model, const ParameterFunction& f,
                                  const Vector& theta_hat, const FunctionCiConfig& fcfg = {},
                                  const RvmConfig& cfg = {}, const SingularPolicy& policy = {},
                                  const DiffConfig& diff = {});

} // namespace plci
