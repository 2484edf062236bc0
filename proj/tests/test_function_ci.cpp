#include "plci/function_ci.hpp"

#include "plci/stats.hpp"
#include "helpers.hpp"

#include <Eigen/Cholesky>
#include <doctest.h>

#include <cmath>
#include <random>

using namespace plci;
using namespace plci::testing;

namespace {

ParameterFunction coordinate0() {
    ParameterFunction f;
    f.value = [](const Vector& t) { return t[0]; };
    f.gradient = [](const Vector& t) {
        Vector g = Vector::Zero(t.size());
        g[0] = 1.0;
        return g;
    };
    f.hessian = [](const Vector& t) { return Matrix::Zero(t.size(), t.size()).eval(); };
    return f;
}

ParameterFunction coordinate_sum() {
    ParameterFunction f;
    f.value = [](const Vector& t) { return t.sum(); };
    f.gradient = [](const Vector& t) { return Vector::Ones(t.size()).eval(); };
    f.hessian = [](const Vector& t) { return Matrix::Zero(t.size(), t.size()).eval(); };
    return f;
}

} // namespace

TEST_CASE("modified model equals l on the consistency manifold") {
    const ObjectiveModel m = iso_quadratic(2);
    const ParameterFunction f = coordinate0();
    const double alpha = 0.95;
    const ObjectiveModel aug = build_modified_model(m, f, 1e-3, alpha);
    REQUIRE(aug.dim == 3);

    Vector theta(2);
    theta << 0.7, -0.3;
    Vector x(3);
    x << theta[0], theta[0], theta[1];  // phi = f(theta)
    CHECK(aug.value(x) == doctest::Approx(m.value(theta)).epsilon(1e-12));

    // one epsilon of deviation costs exactly half the chi-squared quantile
    x[0] = theta[0] + 1e-3;
    CHECK(aug.value(x) ==
          doctest::Approx(m.value(theta) - 0.5 * chi2_quantile_1df(alpha)).epsilon(1e-9));
}

TEST_CASE("modified model analytic derivatives match numeric ones") {
    std::mt19937_64 rng(21);
    const Matrix prec = random_spd(2, rng);
    const Vector mu = random_vector(2, rng);
    const ObjectiveModel aug =
        build_modified_model(gaussian_quadratic(mu, prec), coordinate_sum(), 1e-2, 0.95);
    Vector x(3);
    x << mu.sum() + 0.05, mu[0] + 0.1, mu[1] - 0.2;
    const auto chk = check_derivatives(aug, x);
    CHECK(chk.gradient_rel_error < 1e-6);
    CHECK(chk.hessian_rel_error < 1e-5);
}

TEST_CASE("function CI of the first coordinate matches the parameter CI") {
    std::mt19937_64 rng(8);
    const Matrix prec = random_spd(2, rng);
    const Vector mu = random_vector(2, rng);
    const ObjectiveModel m = gaussian_quadratic(mu, prec);

    const auto param_up = find_upper_endpoint(m, mu);
    const auto param_lo = find_lower_endpoint(m, mu);
    REQUIRE(param_up.status == SearchStatus::Converged);

    FunctionCiConfig fcfg;  // epsilon = 1e-3
    const auto res = find_function_ci(m, coordinate0(), mu, fcfg);
    REQUIRE(res.upper.status == SearchStatus::Converged);
    REQUIRE(res.lower.status == SearchStatus::Converged);
    CHECK(std::abs(res.upper.endpoint - param_up.endpoint) <= fcfg.epsilon);
    CHECK(std::abs(res.lower.endpoint - param_lo.endpoint) <= fcfg.epsilon);
    CHECK(res.residual_upper <= fcfg.epsilon);
    CHECK(res.residual_lower <= fcfg.epsilon);
    CHECK_FALSE(res.zero_information);
}

TEST_CASE("linear functional of an isotropic quadratic has a closed form") {
    const ObjectiveModel m = iso_quadratic(2);
    FunctionCiConfig fcfg;
    const auto res = find_function_ci(m, coordinate_sum(), Vector::Zero(2), fcfg);
    REQUIRE(res.upper.status == SearchStatus::Converged);
    REQUIRE(res.lower.status == SearchStatus::Converged);
    // Var(t0 + t1) = 2, so the endpoints are +-sqrt(2 chi2)
    const double expect = std::sqrt(2.0 * chi2_quantile_1df(0.95));
    CHECK(std::abs(res.upper.endpoint - expect) <= fcfg.epsilon);
    CHECK(std::abs(res.lower.endpoint + expect) <= fcfg.epsilon);
    CHECK(res.residual_upper <= fcfg.epsilon);
    CHECK(res.residual_lower <= fcfg.epsilon);
}

TEST_CASE("constant function degenerates to f +- epsilon") {
    const ObjectiveModel m = iso_quadratic(2);
    ParameterFunction f;
    f.value = [](const Vector&) { return 4.2; };
    f.gradient = [](const Vector& t) { return Vector::Zero(t.size()).eval(); };
    f.hessian = [](const Vector& t) { return Matrix::Zero(t.size(), t.size()).eval(); };
    FunctionCiConfig fcfg;
    fcfg.epsilon = 1e-2;
    const auto res = find_function_ci(m, f, Vector::Zero(2), fcfg);
    CHECK(res.zero_information);
    REQUIRE(res.upper.status == SearchStatus::Converged);
    CHECK(res.upper.endpoint == doctest::Approx(4.2 + fcfg.epsilon).epsilon(1e-4));
    CHECK(res.lower.endpoint == doctest::Approx(4.2 - fcfg.epsilon).epsilon(1e-4));
}

TEST_CASE("shrinking epsilon tightens the endpoint by at most the old epsilon") {
    std::mt19937_64 rng(12);
    const Matrix prec = random_spd(3, rng);
    const Vector mu = random_vector(3, rng);
    const ObjectiveModel m = gaussian_quadratic(mu, prec);
    FunctionCiConfig coarse, fine;
    coarse.epsilon = 1e-2;
    fine.epsilon = 1e-3;
    const auto res_c = find_function_ci(m, coordinate_sum(), mu, coarse);
    const auto res_f = find_function_ci(m, coordinate_sum(), mu, fine);
    REQUIRE(res_c.upper.status == SearchStatus::Converged);
    REQUIRE(res_f.upper.status == SearchStatus::Converged);
    CHECK(std::abs(res_c.upper.endpoint - res_f.upper.endpoint) <= coarse.epsilon + 1e-9);
    // both are within their own bound of the exact value
    const Matrix cov = prec.llt().solve(Matrix::Identity(3, 3));
    const double exact = mu.sum() + std::sqrt(chi2_quantile_1df(0.95) * cov.sum());
    CHECK(std::abs(res_c.upper.endpoint - exact) <= coarse.epsilon + 1e-9);
    CHECK(std::abs(res_f.upper.endpoint - exact) <= fine.epsilon + 1e-9);
}

TEST_CASE("feasible points never beat the reported maximum") {
    // phi_max >= f(theta) for any theta with l(theta) >= lstar, checked on
    // random feasible points of the quadratic
    const ObjectiveModel m = iso_quadratic(2);
    FunctionCiConfig fcfg;
    const auto res = find_function_ci(m, coordinate_sum(), Vector::Zero(2), fcfg);
    REQUIRE(res.upper.status == SearchStatus::Converged);
    const double lstar = -0.5 * chi2_quantile_1df(0.95);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int i = 0; i < 500; ++i) {
        Vector t(2);
        t << u(rng), u(rng);
        if (m.value(t) >= lstar) CHECK(res.upper.endpoint + fcfg.epsilon + 1e-9 >= t.sum());
    }
}
