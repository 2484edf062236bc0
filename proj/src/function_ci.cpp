#include "plci/function_ci.hpp"

#include "plci/stats.hpp"

#include <cmath>
#include <stdexcept>

namespace plci {

void FunctionCiConfig::validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("FunctionCiConfig: epsilon must be positive");
}

ObjectiveModel build_modified_model(const ObjectiveModel& model, const ParameterFunction& f,
                                    double epsilon, double alpha) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("build_modified_model: epsilon <= 0");
    if (!f.value) throw std::invalid_argument("build_modified_model: f has no evaluator");
    const double k = chi2_quantile_1df(alpha);
    const double w = k / (epsilon * epsilon);
    const int n = model.dim;

    ObjectiveModel out;
    out.dim = n + 1;
    out.value = [model, f, w](const Vector& x) {
        const Vector theta = x.tail(x.size() - 1);
        const double r = f.value(theta) - x[0];
        return model.value(theta) - 0.5 * w * r * r;
    };
    if (model.has_gradient() && f.has_gradient()) {
        out.gradient = [model, f, w, n](const Vector& x) {
            const Vector theta = x.tail(n);
            const double r = f.value(theta) - x[0];
            const Vector fg = f.gradient(theta);
            Vector g(n + 1);
            g[0] = w * r;
            g.tail(n) = model.gradient(theta) - w * r * fg;
            return g;
        };
        // The Hessian block over theta needs f's second derivatives; a
        // missing f.hessian is treated as zero, which is exact for the
        // linear functions this is mostly used with.
        if (model.has_hessian()) {
            out.hessian = [model, f, w, n](const Vector& x) {
                const Vector theta = x.tail(n);
                const double r = f.value(theta) - x[0];
                const Vector fg = f.gradient(theta);
                Matrix h(n + 1, n + 1);
                h(0, 0) = -w;
                h.block(0, 1, 1, n) = (w * fg).transpose();
                h.block(1, 0, n, 1) = w * fg;
                Matrix theta_block = model.hessian(theta) - w * (fg * fg.transpose());
                if (f.has_hessian()) theta_block -= w * r * f.hessian(theta);
                h.block(1, 1, n, n) = theta_block;
                return h;
            };
        }
    }
    return out;
}

FunctionCiResult find_function_ci(const ObjectiveModel& model, const ParameterFunction& f,
                                  const Vector& theta_hat, const FunctionCiConfig& fcfg,
                                  const RvmConfig& cfg, const SingularPolicy& policy,
                                  const DiffConfig& diff) {
    fcfg.validate();
    FunctionCiResult out;
    out.f_at_mle = f.value(theta_hat);

    // A function with no gradient at the MLE carries no information about
    // theta; the interval degenerates to f_at_mle +/- epsilon.
    {
        Vector fg;
        if (f.has_gradient()) {
            fg = f.gradient(theta_hat);
        } else {
            ObjectiveModel fm;
            fm.dim = model.dim;
            fm.value = f.value;
            Evaluator fe(fm, diff);
            fg = fe.gradient(theta_hat).g;
        }
        out.zero_information = fg.norm() <= 1e-12 * (1.0 + std::abs(out.f_at_mle));
    }

    const ObjectiveModel aug = build_modified_model(model, f, fcfg.epsilon, cfg.alpha);
    Vector start(model.dim + 1);
    start[0] = out.f_at_mle;
    start.tail(model.dim) = theta_hat;

    out.upper = find_upper_endpoint(aug, start, cfg, policy, diff);
    out.lower = find_lower_endpoint(aug, start, cfg, policy, diff);

    auto residual = [&](const EndpointResult& r) {
        if (r.theta_at_endpoint.size() != model.dim + 1 || !r.theta_at_endpoint.allFinite())
            return std::numeric_limits<double>::quiet_NaN();
        const Vector theta = r.theta_at_endpoint.tail(model.dim);
        return std::abs(f.value(theta) - r.theta_at_endpoint[0]);
    };
    out.residual_upper = residual(out.upper);
    out.residual_lower = residual(out.lower);
    return out;
}

} // namespace plci
