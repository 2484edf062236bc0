#pragma once

#include "plci/model.hpp"

#include <random>

namespace plci::testing {

// l(theta) = -1/2 ||theta||^2 with analytic derivatives.
inline ObjectiveModel iso_quadratic(int n) {
    ObjectiveModel m;
    m.dim = n;
    m.value = [](const Vector& t) { return -0.5 * t.squaredNorm(); };
    m.gradient = [](const Vector& t) { return (-t).eval(); };
    m.hessian = [n](const Vector&) { return (-Matrix::Identity(n, n)).eval(); };
    return m;
}

// l(theta) = -1/2 (theta-mu)' P (theta-mu) for a positive definite P.
inline ObjectiveModel gaussian_quadratic(const Vector& mu, const Matrix& prec) {
    ObjectiveModel m;
    m.dim = static_cast<int>(mu.size());
    m.value = [mu, prec](const Vector& t) {
        const Vector d = t - mu;
        return -0.5 * d.dot(prec * d);
    };
    m.gradient = [mu, prec](const Vector& t) { return (-(prec * (t - mu))).eval(); };
    m.hessian = [prec](const Vector&) { return (-prec).eval(); };
    return m;
}

// Random symmetric positive definite matrix with eigenvalues in [0.3, ~3].
inline Matrix random_spd(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    Matrix a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = normal(rng);
    return (a * a.transpose() / n + 0.3 * Matrix::Identity(n, n)).eval();
}

inline Vector random_vector(int n, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = normal(rng);
    return v;
}

// Value-only model (forces numeric differentiation).
inline ObjectiveModel value_only(const ObjectiveModel& m) {
    ObjectiveModel out;
    out.dim = m.dim;
    out.value = m.value;
    return out;
}

} // namespace plci::testing
