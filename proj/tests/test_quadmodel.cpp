#include "plci/quadmodel.hpp"

#include "helpers.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <doctest.h>

#include <cmath>
#include <random>

using namespace plci;
using namespace plci::testing;

namespace {

QuadraticModel make_qm(double lbar, double g0, Vector gt, double h00, Vector ht0, Matrix ht) {
    QuadraticModel qm;
    qm.lbar = lbar;
    qm.g0 = g0;
    qm.gt = std::move(gt);
    qm.h00 = h00;
    qm.ht0 = std::move(ht0);
    qm.ht = std::move(ht);
    return qm;
}

// Brute-force maximum of gt.d + 1/2 d'H d over the ball ||d|| <= r, by polar
// or spherical sampling plus radial subdivision.
double grid_max_on_ball(const Vector& gt, const Matrix& ht, double r) {
    const int dim = static_cast<int>(gt.size());
    double best = -1e300;
    auto consider = [&](const Vector& d) {
        best = std::max(best, gt.dot(d) + 0.5 * d.dot(ht * d));
    };
    consider(Vector::Zero(dim));
    if (dim == 2) {
        const int na = 2400, nr = 500;
        for (int ia = 0; ia < na; ++ia) {
            const double ang = 2.0 * M_PI * ia / na;
            Vector u(2);
            u << std::cos(ang), std::sin(ang);
            for (int ir = 1; ir <= nr; ++ir) consider((r * ir / nr) * u);
        }
    } else {
        const int nu = 120, nv = 240, nr = 120;
        for (int iu = 0; iu <= nu; ++iu) {
            const double phi = M_PI * iu / nu;
            for (int iv = 0; iv < nv; ++iv) {
                const double lam = 2.0 * M_PI * iv / nv;
                Vector u(3);
                u << std::sin(phi) * std::cos(lam), std::sin(phi) * std::sin(lam), std::cos(phi);
                for (int ir = 1; ir <= nr; ++ir) consider((r * ir / nr) * u);
            }
        }
    }
    return best;
}

} // namespace

TEST_CASE("build_quadratic splits the expansion at theta=(1,1)") {
    Evaluator ev(iso_quadratic(2));
    const BuildResult br = build_quadratic(ev, Vector::Constant(2, 1.0));
    CHECK(br.qm.lbar == doctest::Approx(-1.0));
    CHECK(br.qm.g0 == doctest::Approx(-1.0));
    CHECK(br.qm.gt[0] == doctest::Approx(-1.0));
    CHECK(br.qm.h00 == doctest::Approx(-1.0));
    CHECK(br.qm.ht0[0] == doctest::Approx(0.0));
    CHECK(br.qm.ht(0, 0) == doctest::Approx(-1.0));
}

TEST_CASE("build_quadratic at the maximum has zero gradient") {
    std::mt19937_64 rng(1);
    const Vector mu = random_vector(3, rng);
    Evaluator ev(gaussian_quadratic(mu, random_spd(3, rng)));
    const BuildResult br = build_quadratic(ev, mu);
    CHECK(br.gradient.norm() <= 1e-12);
}

TEST_CASE("nuisance_optimum with invertible H") {
    Vector gt(2);
    gt << 1.0, 2.0;
    const auto qm = make_qm(0, 0, gt, -1, Vector::Zero(2), -Matrix::Identity(2, 2));
    const auto ns = nuisance_optimum(qm, 0.7, SingularPolicy{});
    CHECK(ns.step[0] == doctest::Approx(1.0));
    CHECK(ns.step[1] == doctest::Approx(2.0));
    CHECK(ns.consistent);
}

TEST_CASE("nuisance_optimum holds a dependent coordinate on a rank-1 system") {
    Matrix ht(2, 2);
    ht << -2, -2, -2, -2;
    Vector gt(2);
    gt << 2, 2;
    const auto qm = make_qm(0, 0, gt, -1, Vector::Zero(2), ht);
    SingularPolicy policy;
    policy.variant = SingularVariant::HoldDependent;

    const auto s = detect_dependent_rows(ht, gt, policy);
    REQUIRE(s.size() == 1);
    CHECK(s[0] == 1);  // ties break by ascending index, row 0 considered first

    const auto ns = nuisance_optimum(qm, 0.0, policy);
    CHECK(ns.step[0] == doctest::Approx(1.0));
    CHECK(ns.step[1] == doctest::Approx(0.0));
    CHECK(ns.consistent);
}

TEST_CASE("nuisance_optimum flags an inconsistent rank-1 system") {
    Matrix ht(2, 2);
    ht << -2, -2, -2, -2;
    Vector gt(2);
    gt << 3, 1;
    const auto qm = make_qm(0, 0, gt, -1, Vector::Zero(2), ht);
    SingularPolicy policy;
    const auto ns = nuisance_optimum(qm, 0.0, policy);
    CHECK(ns.step[0] == doctest::Approx(1.5));
    CHECK(ns.step[1] == doctest::Approx(0.0));
    CHECK_FALSE(ns.consistent);
    CHECK(ns.residual == doctest::Approx(std::hypot(0.0, -2.0)));
}

TEST_CASE("detect_dependent_rows") {
    SingularPolicy policy;
    SUBCASE("nonsingular matrix keeps every row") {
        std::mt19937_64 rng(2);
        const Matrix m = -random_spd(4, rng);
        CHECK(detect_dependent_rows(m, random_vector(4, rng), policy).empty());
    }
    SUBCASE("rank-1 matrix drops the row with the smaller gradient entry") {
        Matrix ht(2, 2);
        ht << -2, -2, -2, -2;
        Vector gt(2);
        gt << 3, 1;
        const auto s = detect_dependent_rows(ht, gt, policy);
        REQUIRE(s.size() == 1);
        CHECK(s[0] == 1);
    }
    SUBCASE("zero matrix holds every coordinate") {
        const auto s = detect_dependent_rows(Matrix::Zero(3, 3), Vector::Constant(3, 1.0), policy);
        CHECK(s == std::vector<int>{0, 1, 2});
    }
}

TEST_CASE("profile_coefficients on diagonal systems") {
    SingularPolicy policy;
    SUBCASE("zero gradient") {
        const auto qm =
            make_qm(0, 0, Vector::Zero(1), -1, Vector::Zero(1), -Matrix::Identity(1, 1));
        const auto pq = profile_coefficients(qm, -2.0, policy);
        CHECK(pq.a == doctest::Approx(-0.5));
        CHECK(pq.p == doctest::Approx(0.0));
        CHECK(pq.q == doctest::Approx(2.0));
    }
    SUBCASE("nonzero interest gradient") {
        const auto qm =
            make_qm(0, -1, Vector::Zero(1), -1, Vector::Zero(1), -Matrix::Identity(1, 1));
        const auto pq = profile_coefficients(qm, -2.0, policy);
        CHECK(pq.a == doctest::Approx(-0.5));
        CHECK(pq.p == doctest::Approx(-1.0));
        CHECK(pq.q == doctest::Approx(2.0));
    }
    SUBCASE("no nuisance block") {
        const auto qm = make_qm(1.5, 0.25, Vector(), -3, Vector(), Matrix());
        const auto pq = profile_coefficients(qm, -2.0, policy);
        CHECK(pq.a == doctest::Approx(-1.5));
        CHECK(pq.p == doctest::Approx(0.25));
        CHECK(pq.q == doctest::Approx(3.5));
    }
}

TEST_CASE("profile coefficients reproduce the exact profile of a quadratic") {
    std::mt19937_64 rng(7);
    for (int inst = 0; inst < 5; ++inst) {
        const int n = 4;
        const Matrix prec = random_spd(n, rng);
        const Vector mu = random_vector(n, rng);
        const Vector x0 = random_vector(n, rng);
        Evaluator ev(gaussian_quadratic(mu, prec));
        const BuildResult br = build_quadratic(ev, x0);
        const double lstar = -3.0;
        const auto pq = profile_coefficients(br.qm, lstar, SingularPolicy{});
        // independent route: complete the square in the nuisance block
        const Matrix ht = br.qm.ht;
        for (int k = 0; k < 10; ++k) {
            const double d0 = random_vector(1, rng)[0] * 2.0;
            const Vector rhs = -(br.qm.ht0 * d0 + br.qm.gt);
            const Vector dt = ht.ldlt().solve(rhs);
            const double direct = br.qm.eval(d0, dt);
            const double via_pq = pq.a * d0 * d0 + pq.p * d0 + pq.q + lstar;
            CHECK(direct == doctest::Approx(via_pq).epsilon(1e-8));
        }
    }
}

TEST_CASE("definiteness tests") {
    CHECK(is_negative_definite(-Matrix::Identity(2, 2)));
    CHECK_FALSE(is_negative_definite(Matrix::Zero(2, 2)));
    Matrix saddle(2, 2);
    saddle << -1, 0, 0, 1;
    CHECK_FALSE(is_negative_definite(saddle));

    Matrix rank1(2, 2);
    rank1 << -2, -2, -2, -2;
    CHECK(is_negative_semidefinite(rank1, 1e-10));  // eigenvalues 0, -4
    CHECK(is_negative_semidefinite(Matrix::Zero(2, 2), 1e-10));
    Matrix indef(2, 2);
    indef << 1, 0, 0, -1;
    CHECK_FALSE(is_negative_semidefinite(indef, 1e-10));
}

TEST_CASE("trust subproblem boundary and interior cases") {
    SUBCASE("boundary: scaled gradient") {
        Vector gt(2);
        gt << 3, 4;
        const auto sol = solve_trust_subproblem(gt, -Matrix::Identity(2, 2), 1.0);
        CHECK(sol.step[0] == doctest::Approx(0.6));
        CHECK(sol.step[1] == doctest::Approx(0.8));
        CHECK(sol.boundary);
    }
    SUBCASE("interior Newton point") {
        Vector gt(2);
        gt << 0.3, 0.4;
        const auto sol = solve_trust_subproblem(gt, -Matrix::Identity(2, 2), 1.0);
        CHECK(sol.step[0] == doctest::Approx(0.3));
        CHECK(sol.step[1] == doctest::Approx(0.4));
        CHECK_FALSE(sol.boundary);
        CHECK(sol.multiplier == doctest::Approx(0.0));
    }
    SUBCASE("indefinite Hessian matches the grid oracle") {
        Matrix ht(2, 2);
        ht << 1, 0, 0, -1;
        Vector gt(2);
        gt << 0, 1;
        const auto sol = solve_trust_subproblem(gt, ht, 1.0);
        const double brute = grid_max_on_ball(gt, ht, 1.0);
        CHECK(sol.value >= brute - 1e-3);
        CHECK(sol.value == doctest::Approx(0.75).epsilon(1e-6));
    }
    SUBCASE("pure saddle hard case") {
        Matrix ht(2, 2);
        ht << 1, 0, 0, -1;
        const auto sol = solve_trust_subproblem(Vector::Zero(2), ht, 1.0);
        CHECK(std::abs(sol.step[0]) == doctest::Approx(1.0));
        CHECK(sol.step[1] == doctest::Approx(0.0));
    }
    SUBCASE("one-dimensional ascent to the boundary") {
        const auto sol = solve_trust_subproblem(Vector::Constant(1, 1.0),
                                                Matrix::Constant(1, 1, 1.0), 1.0);
        CHECK(sol.step[0] == doctest::Approx(1.0));
    }
}

TEST_CASE("trust subproblem randomized instances beat the grid oracle") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> radius(0.5, 2.0);
    std::normal_distribution<double> normal;
    for (int inst = 0; inst < 40; ++inst) {
        const int dim = inst % 2 == 0 ? 2 : 3;
        Matrix a(dim, dim);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) a(i, j) = normal(rng);
        const Matrix ht = 0.5 * (a + a.transpose());
        const Vector gt = random_vector(dim, rng);
        const double r = radius(rng);
        const auto sol = solve_trust_subproblem(gt, ht, r);

        CHECK(sol.step.norm() <= r * (1.0 + 1e-10));
        const double brute = grid_max_on_ball(gt, ht, r);
        CHECK(sol.value >= brute - 1e-3);
        if (sol.boundary) {
            const Vector res = gt + ht * sol.step - sol.multiplier * sol.step;
            CHECK(res.norm() <= 1e-6 * (1.0 + gt.norm()));
        } else {
            CHECK((gt + ht * sol.step).norm() <= 1e-8 * (1.0 + gt.norm()));
            CHECK(is_negative_semidefinite(ht, 1e-10 * std::max(1.0, ht.cwiseAbs().maxCoeff())));
        }
    }
}

TEST_CASE("nuisance_optimum residual bound for random nonsingular systems") {
    std::mt19937_64 rng(9);
    for (int inst = 0; inst < 20; ++inst) {
        const int m = 3;
        const Matrix ht = -random_spd(m, rng);
        const Vector gt = random_vector(m, rng);
        const Vector ht0 = random_vector(m, rng);
        QuadraticModel qm = make_qm(0, 0, gt, -1, ht0, ht);
        const double d0 = random_vector(1, rng)[0];
        const auto ns = nuisance_optimum(qm, d0, SingularPolicy{});
        CHECK(ns.consistent);
        CHECK((qm.ht * ns.step + qm.ht0 * d0 + qm.gt).norm() <= 1e-8 * (1.0 + gt.norm()));
    }
}

TEST_CASE("singular policies agree with the exact solve on nonsingular systems") {
    std::mt19937_64 rng(13);
    for (int inst = 0; inst < 20; ++inst) {
        const int m = 3;
        QuadraticModel qm = make_qm(0, 0, random_vector(m, rng), -1, random_vector(m, rng),
                                    -random_spd(m, rng));
        const double d0 = random_vector(1, rng)[0];
        const Vector exact = qm.ht.ldlt().solve(-(qm.ht0 * d0 + qm.gt).eval());

        SingularPolicy hold;
        hold.variant = SingularVariant::HoldDependent;
        SingularPolicy mpi;
        mpi.variant = SingularVariant::MoorePenrose;
        CHECK((nuisance_optimum(qm, d0, hold).step - exact).norm() <= 1e-8);
        CHECK((nuisance_optimum(qm, d0, mpi).step - exact).norm() <= 1e-8);
    }
}

TEST_CASE("reduced systems pass the full-rank check and zero the held block") {
    std::mt19937_64 rng(15);
    SingularPolicy policy;
    for (int inst = 0; inst < 10; ++inst) {
        // rank-deficient by construction: B B' with B m x r, r < m
        const int m = 4, r = 2;
        Matrix b(m, r);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < r; ++j) b(i, j) = random_vector(1, rng)[0];
        QuadraticModel qm = make_qm(0, 0, random_vector(m, rng), -1, Vector::Zero(m),
                                    (-(b * b.transpose())).eval());
        const ReducedSystem rs = build_reduced_system(qm, policy);
        CHECK(rs.held.size() == static_cast<size_t>(m - r));
        Eigen::JacobiSVD<Matrix> svd(rs.h_dd);
        const auto& sv = svd.singularValues();
        CHECK(sv(sv.size() - 1) > policy.svd_rank_rtol * sv(0));
        const auto ns = nuisance_optimum(qm, 0.4, policy);
        for (int held : rs.held) CHECK(ns.step[held] == 0.0);
    }
}
