#pragma once

#include "plci/model.hpp"

#include <optional>
#include <vector>

namespace plci {

// Second-order Taylor model of the log-likelihood around the current
// iterate, split by the first coordinate (the parameter of interest):
//   lhat(d0, dt) = lbar + g0 d0 + gt.dt + 1/2 dt'Ht dt + d0 Ht0.dt + 1/2 H00 d0^2
struct QuadraticModel {
    double lbar = 0.0;
    double g0 = 0.0;
    Vector gt;   // length n-1
    double h00 = 0.0;
    Vector ht0;  // length n-1
    Matrix ht;   // (n-1) x (n-1), symmetric

    int nuisance_dim() const { return static_cast<int>(gt.size()); }

    // Model value at the step (d0, dt).
    double eval(double d0, const Vector& dt) const;

    // Gradient of the model with respect to the nuisance block at (d0, dt).
    Vector nuisance_gradient(double d0, const Vector& dt) const;
};

// Coefficients of the approximate profile log-likelihood minus the
// threshold: lhat_PL(d0) = a d0^2 + p d0 + q + lstar.
struct ProfileQuadratic {
    double a = 0.0;
    double p = 0.0;
    double q = 0.0;
};

enum class SingularVariant { MoorePenrose, HoldDependent };

// How singular nuisance Hessians are treated. The rank threshold is the
// knob both variants are sensitive to, so it is explicit configuration.
struct SingularPolicy {
    SingularVariant variant = SingularVariant::HoldDependent;
    double svd_rank_rtol = 1e-10;   // singular values below rtol * sigma_max count as zero
    double eig_semidef_tol = 1e-8;  // eigenvalues below tol * max|entry| count as non-positive

    void validate() const;
};

// Indices of linearly dependent rows of `ht`, built by adding rows in
// descending order of |gt| (ties by ascending index) and keeping the ones
// that raise the numeric rank. Rows that do not raise the rank form S.
std::vector<int> detect_dependent_rows(const Matrix& ht, const Vector& gt,
                                       const SingularPolicy& policy);

// The reduced full-rank system left after removing the S rows/columns.
// "d" indices stay free ("dependent" on the step), "f" indices are held.
struct ReducedSystem {
    std::vector<int> held;       // S
    std::vector<int> kept;       // complement of S, in ascending order
    Matrix h_dd;
    Matrix h_df;                 // kept rows x held cols
    Matrix h_ff;
    Vector g_d, g_f;
    Vector ht0_d, ht0_f;
};

ReducedSystem build_reduced_system(const QuadraticModel& qm, const SingularPolicy& policy);

struct NuisanceSolve {
    Vector step;           // length n-1, zeros at held coordinates
    bool consistent = true;
    double residual = 0.0; // || Ht step + Ht0 d0 + gt ||
};

// Maximizer of the model over the nuisance block at fixed d0:
// solves Ht dt = -(Ht0 d0 + gt) exactly when Ht is invertible, otherwise
// per the policy (Moore-Penrose least squares, or the reduced system with
// the held coordinates left unchanged). `consistent` reports whether the
// full stationarity condition holds at the returned step; it is the test
// that decides between the bounded and unbounded handling.
NuisanceSolve nuisance_optimum(const QuadraticModel& qm, double d0, const SingularPolicy& policy);

// Profile coefficients (a, p, q) of the model, using the policy's
// generalized inverse when the nuisance Hessian is singular.
ProfileQuadratic profile_coefficients(const QuadraticModel& qm, double lstar,
                                      const SingularPolicy& policy);

// True iff the Cholesky factorization of -M succeeds, i.e. M is negative
// definite. Empty matrices count as negative definite.
bool is_negative_definite(const Matrix& m);

// True iff every eigenvalue of M is at most `tol`.
bool is_negative_semidefinite(const Matrix& m, double tol);

struct TrustSolution {
    Vector step;
    double value = 0.0;       // gt.step + 1/2 step'Ht step
    double multiplier = 0.0;  // KKT multiplier; 0 for interior solutions
    bool boundary = false;
};

// Global maximizer of gt.dt + 1/2 dt'Ht dt over ||dt|| <= radius.
// Solved through an eigendecomposition of Ht with a safeguarded Newton
// search for the multiplier; the hard case is completed along the leading
// eigenvector.
TrustSolution solve_trust_subproblem(const Vector& gt, const Matrix& ht, double radius);

// Taylor expansion of the model at theta, split by coordinate 0.
struct BuildResult {
    QuadraticModel qm;
    Vector gradient;  // full gradient at theta
    Matrix hessian;   // full symmetrized Hessian at theta
    bool derivatives_ok = true;
};

BuildResult build_quadratic(Evaluator& ev, const Vector& theta);

} // namespace plci
