#include "plci/model.hpp"

#include "plci/benchmark.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <atomic>
#include <cmath>
#include <memory>
#include <random>

using namespace plci;
using namespace plci::testing;

namespace {

// Independent scalar reference for the benchmark log-likelihood: plain
// Bernoulli mass function, no shared code with the library path.
double naive_benchmark_loglik(const Dataset& d, BenchmarkFamily fam, const Vector& packed) {
    const int k = static_cast<int>(d.covariates.cols());
    const bool glm = fam == BenchmarkFamily::Glm11;
    const int off = glm ? 0 : k;
    double l = 0.0;
    for (int i = 0; i < d.covariates.rows(); ++i) {
        double eta = packed[off];
        for (int j = 0; j < k; ++j) {
            const double a = glm ? 1.0 : std::log1p(std::exp(packed[j]));
            eta += packed[off + 1 + j] * std::pow(d.covariates(i, j), a);
        }
        const double p = 1.0 / (1.0 + std::exp(-eta));
        l += d.responses[i] == 1 ? std::log(p) : std::log(1.0 - p);
    }
    return l;
}

std::shared_ptr<Dataset> small_dataset(int n, std::uint64_t seed) {
    BenchmarkSpec spec;
    spec.family = BenchmarkFamily::Transformed3;
    spec.n_data = n;
    spec.seed = seed;
    return std::make_shared<Dataset>(simulate_dataset(spec));
}

} // namespace

TEST_CASE("eval_value on quadratic models") {
    Evaluator ev(iso_quadratic(2));
    CHECK(ev.value(Vector::Zero(2)) == doctest::Approx(0.0));
    Vector t(2);
    t << 2.0, 0.0;
    CHECK(ev.value(t) == doctest::Approx(-2.0));
    CHECK(ev.counter().n_value == 2);
}

TEST_CASE("eval_value rejects dimension mismatch") {
    Evaluator ev(iso_quadratic(2));
    CHECK_THROWS_AS(ev.value(Vector::Zero(3)), std::invalid_argument);
}

TEST_CASE("NaN values map to -inf") {
    ObjectiveModel m;
    m.dim = 1;
    m.value = [](const Vector& t) { return t[0] > 0 ? std::nan("") : -t[0] * t[0]; };
    Evaluator ev(m);
    CHECK(ev.value(Vector::Constant(1, 1.0)) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("benchmark value matches an independent scalar implementation") {
    auto data = small_dataset(100, 17);
    const auto fam = BenchmarkFamily::Transformed3;
    const ObjectiveModel m = make_benchmark_model(data, fam);
    const Vector packed = pack_transformed(fam, true_parameters(fam));
    Evaluator ev(m);
    const double got = ev.value(packed);
    CHECK(std::isfinite(got));
    CHECK(got < 0.0);
    CHECK(got == doctest::Approx(naive_benchmark_loglik(*data, fam, packed)).epsilon(1e-10));
}

TEST_CASE("gradient of the isotropic quadratic") {
    Evaluator ev(iso_quadratic(2));
    Vector t(2);
    t << 1.0, 2.0;
    const Vector g = ev.gradient(t).g;
    CHECK(g[0] == doctest::Approx(-1.0));
    CHECK(g[1] == doctest::Approx(-2.0));
    CHECK(ev.gradient(Vector::Zero(2)).g.norm() == doctest::Approx(0.0));
}

TEST_CASE("numeric central differences are exact on quadratics") {
    std::mt19937_64 rng(3);
    const Matrix prec = random_spd(3, rng);
    const Vector mu = random_vector(3, rng);
    const ObjectiveModel m = value_only(gaussian_quadratic(mu, prec));
    Evaluator ev(m);
    const Vector t = random_vector(3, rng);

    const Vector g_true = -(prec * (t - mu));
    const Vector g_num = ev.gradient(t).g;
    CHECK((g_num - g_true).norm() <= 1e-6 * (1.0 + g_true.norm()));

    const Matrix h_num = ev.hessian(t).h;
    CHECK((h_num + prec).norm() <= 1e-6 * prec.norm());
}

TEST_CASE("gradient and hessian do not mutate theta") {
    Evaluator ev(value_only(iso_quadratic(2)));
    Vector t(2);
    t << 0.5, -0.25;
    const Vector copy = t;
    ev.gradient(t);
    ev.hessian(t);
    CHECK(t == copy);
}

TEST_CASE("numeric derivative counting matches the stencil") {
    const int n = 3;
    auto calls = std::make_shared<std::atomic<int>>(0);
    ObjectiveModel m;
    m.dim = n;
    m.value = [calls](const Vector& t) {
        ++*calls;
        return -0.5 * t.squaredNorm();
    };
    Evaluator ev(m);
    const Vector t = Vector::Constant(n, 0.7);

    *calls = 0;
    const auto before_g = ev.counter().total();
    ev.gradient(t);
    CHECK(*calls == 2 * n);
    CHECK(ev.counter().total() - before_g == 2 * n);
    CHECK(ev.counter().n_gradient_equiv == 2 * n);

    *calls = 0;
    const auto before_h = ev.counter().total();
    ev.hessian(t);
    CHECK(*calls == 2 * n * n + 1);
    CHECK(ev.counter().total() - before_h == 2 * n * n + 1);
}

TEST_CASE("analytic derivatives are charged as value-call equivalents") {
    const int n = 4;
    Evaluator ev(iso_quadratic(n));
    ev.gradient(Vector::Zero(n));
    CHECK(ev.counter().n_gradient_equiv == 2 * n);
    ev.hessian(Vector::Zero(n));
    CHECK(ev.counter().n_hessian_equiv == 2 * n * (n + 1));
}

TEST_CASE("check_derivatives on exact quadratics") {
    const auto rep = check_derivatives(iso_quadratic(2), Vector::Constant(2, 0.3));
    CHECK(rep.gradient_rel_error < 1e-8);
    CHECK(rep.hessian_rel_error < 1e-8);
}

TEST_CASE("check_derivatives flags a wrong gradient sign") {
    ObjectiveModel m = iso_quadratic(2);
    m.gradient = [](const Vector& t) { return t; };  // sign flipped
    const auto rep = check_derivatives(m, Vector::Constant(2, 0.8));
    CHECK(rep.gradient_rel_error == doctest::Approx(2.0).epsilon(1e-4));
}

TEST_CASE("benchmark analytic derivatives agree with central differences") {
    auto data = small_dataset(200, 99);
    const auto fam = BenchmarkFamily::Transformed3;
    const ObjectiveModel m = make_benchmark_model(data, fam);
    std::mt19937_64 rng(5);
    Vector packed = pack_transformed(fam, true_parameters(fam));
    for (int rep = 0; rep < 3; ++rep) {
        const Vector t = packed + 0.3 * random_vector(m.dim, rng);
        const auto chk = check_derivatives(m, t);
        CHECK(chk.gradient_rel_error < 1e-5);
        CHECK(chk.hessian_rel_error < 1e-4);
    }
}

TEST_CASE("flip and swap adapters") {
    std::mt19937_64 rng(11);
    const Matrix prec = random_spd(3, rng);
    const Vector mu = random_vector(3, rng);
    const ObjectiveModel m = gaussian_quadratic(mu, prec);
    const Vector t = random_vector(3, rng);

    const ObjectiveModel f = flip_coordinate0(m);
    Vector tf = t;
    tf[0] = -tf[0];
    CHECK(f.value(tf) == doctest::Approx(m.value(t)));
    CHECK(f.gradient(tf)[0] == doctest::Approx(-m.gradient(t)[0]));
    CHECK(f.gradient(tf)[1] == doctest::Approx(m.gradient(t)[1]));
    CHECK(f.hessian(tf)(0, 1) == doctest::Approx(-m.hessian(t)(0, 1)));
    CHECK(f.hessian(tf)(0, 0) == doctest::Approx(m.hessian(t)(0, 0)));

    const ObjectiveModel s = swap_to_front(m, 2);
    Vector ts = t;
    std::swap(ts[0], ts[2]);
    CHECK(s.value(ts) == doctest::Approx(m.value(t)));
    CHECK(s.gradient(ts)[0] == doctest::Approx(m.gradient(t)[2]));
    CHECK(s.hessian(ts)(0, 0) == doctest::Approx(m.hessian(t)(2, 2)));
}

TEST_CASE("restrict_model pins the anchored coordinates") {
    const ObjectiveModel m = iso_quadratic(3);
    Vector anchor(3);
    anchor << 2.0, 0.0, 0.0;
    const ObjectiveModel r = restrict_model(m, anchor, {1, 2});
    Vector x(2);
    x << 1.0, -1.0;
    CHECK(r.value(x) == doctest::Approx(-0.5 * (4.0 + 1.0 + 1.0)));
    CHECK(r.gradient(x)[0] == doctest::Approx(-1.0));
    CHECK(r.hessian(x)(0, 0) == doctest::Approx(-1.0));
}
