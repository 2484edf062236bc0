#include "plci/quadmodel.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace plci {

double QuadraticModel::eval(double d0, const Vector& dt) const {
    double v = lbar + g0 * d0 + 0.5 * h00 * d0 * d0;
    if (dt.size() > 0)
        v += gt.dot(dt) + 0.5 * dt.dot(ht * dt) + d0 * ht0.dot(dt);
    return v;
}

Vector QuadraticModel::nuisance_gradient(double d0, const Vector& dt) const {
    if (nuisance_dim() == 0) return Vector();
    return gt + ht * dt + d0 * ht0;
}

void SingularPolicy::validate() const {
    if (!(svd_rank_rtol > 0.0) || !(eig_semidef_tol > 0.0))
        throw std::invalid_argument("SingularPolicy: tolerances must be positive");
}

std::vector<int> detect_dependent_rows(const Matrix& ht, const Vector& gt,
                                       const SingularPolicy& policy) {
    const int m = static_cast<int>(ht.rows());
    if (ht.cols() != m) throw std::invalid_argument("detect_dependent_rows: matrix not square");
    if (m == 0) return {};

    // Rows in descending |gt| order, ties by ascending index.
    std::vector<int> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return std::abs(gt[a]) > std::abs(gt[b]);
    });

    const double scale =
        std::max(Eigen::JacobiSVD<Matrix>(ht).singularValues()(0), 1e-300);
    const double thresh = policy.svd_rank_rtol * scale;

    std::vector<int> held;
    std::vector<int> kept;
    int rank = 0;
    Matrix sub(m, m);
    for (int row : order) {
        kept.push_back(row);
        sub.topRows(static_cast<int>(kept.size())) = ht(kept, Eigen::all);
        const auto sv = Eigen::JacobiSVD<Matrix>(sub.topRows(static_cast<int>(kept.size())))
                            .singularValues();
        const int new_rank = static_cast<int>((sv.array() > thresh).count());
        if (new_rank > rank) {
            rank = new_rank;
        } else {
            kept.pop_back();
            held.push_back(row);
        }
    }
    std::sort(held.begin(), held.end());
    return held;
}

ReducedSystem build_reduced_system(const QuadraticModel& qm, const SingularPolicy& policy) {
    ReducedSystem rs;
    rs.held = detect_dependent_rows(qm.ht, qm.gt, policy);
    const int m = qm.nuisance_dim();
    std::vector<char> is_held(m, 0);
    for (int i : rs.held) is_held[i] = 1;
    for (int i = 0; i < m; ++i)
        if (!is_held[i]) rs.kept.push_back(i);

    rs.h_dd = qm.ht(rs.kept, rs.kept);
    rs.h_df = qm.ht(rs.kept, rs.held);
    rs.h_ff = qm.ht(rs.held, rs.held);
    rs.g_d = qm.gt(rs.kept);
    rs.g_f = qm.gt(rs.held);
    rs.ht0_d = qm.ht0(rs.kept);
    rs.ht0_f = qm.ht0(rs.held);
    return rs;
}

namespace {

double consistency_tol(const QuadraticModel& qm, double d0) {
    return 1e-6 * (1.0 + qm.gt.norm() + std::abs(d0) * qm.ht0.norm());
}

// Moore-Penrose solve of Ht x = rhs with the policy's rank threshold.
Vector pinv_solve(const Matrix& ht, const Vector& rhs, const SingularPolicy& policy) {
    Eigen::JacobiSVD<Matrix> svd(ht, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(policy.svd_rank_rtol);
    return svd.solve(rhs);
}

bool invertible(const Matrix& ht, const SingularPolicy& policy) {
    if (ht.rows() == 0) return true;
    Eigen::JacobiSVD<Matrix> svd(ht);
    const auto& sv = svd.singularValues();
    return sv(sv.size() - 1) > policy.svd_rank_rtol * std::max(sv(0), 1e-300);
}

} // namespace

NuisanceSolve nuisance_optimum(const QuadraticModel& qm, double d0,
                               const SingularPolicy& policy) {
    policy.validate();
    NuisanceSolve out;
    const int m = qm.nuisance_dim();
    out.step = Vector::Zero(m);
    if (m == 0) return out;

    const Vector rhs = -(qm.ht0 * d0 + qm.gt);
    if (invertible(qm.ht, policy)) {
        out.step = qm.ht.ldlt().solve(rhs);
    } else if (policy.variant == SingularVariant::MoorePenrose) {
        out.step = pinv_solve(qm.ht, rhs, policy);
    } else {
        const ReducedSystem rs = build_reduced_system(qm, policy);
        if (!rs.kept.empty()) {
            const Vector rhs_d = -(rs.ht0_d * d0 + rs.g_d);
            const Vector xd = rs.h_dd.ldlt().solve(rhs_d);
            for (size_t k = 0; k < rs.kept.size(); ++k) out.step[rs.kept[k]] = xd[k];
        }
        // held coordinates stay at zero
    }
    out.residual = (qm.ht * out.step + qm.ht0 * d0 + qm.gt).norm();
    out.consistent = out.residual <= consistency_tol(qm, d0);
    return out;
}

ProfileQuadratic profile_coefficients(const QuadraticModel& qm, double lstar,
                                      const SingularPolicy& policy) {
    policy.validate();
    ProfileQuadratic pq;
    const int m = qm.nuisance_dim();
    if (m == 0) {
        pq.a = 0.5 * qm.h00;
        pq.p = qm.g0;
        pq.q = qm.lbar - lstar;
        return pq;
    }
    Vector x_h, x_g;  // Ht^{-1} Ht0 and Ht^{-1} gt under the active inverse
    if (invertible(qm.ht, policy)) {
        const auto ldlt = qm.ht.ldlt();
        x_h = ldlt.solve(qm.ht0);
        x_g = ldlt.solve(qm.gt);
    } else if (policy.variant == SingularVariant::MoorePenrose) {
        x_h = pinv_solve(qm.ht, qm.ht0, policy);
        x_g = pinv_solve(qm.ht, qm.gt, policy);
    } else {
        const ReducedSystem rs = build_reduced_system(qm, policy);
        x_h = Vector::Zero(m);
        x_g = Vector::Zero(m);
        if (!rs.kept.empty()) {
            const auto ldlt = rs.h_dd.ldlt();
            const Vector xh_d = ldlt.solve(rs.ht0_d);
            const Vector xg_d = ldlt.solve(rs.g_d);
            for (size_t k = 0; k < rs.kept.size(); ++k) {
                x_h[rs.kept[k]] = xh_d[k];
                x_g[rs.kept[k]] = xg_d[k];
            }
        }
    }
    pq.a = 0.5 * (qm.h00 - qm.ht0.dot(x_h));
    pq.p = qm.g0 - qm.gt.dot(x_h);
    pq.q = qm.lbar - 0.5 * qm.gt.dot(x_g) - lstar;
    return pq;
}

bool is_negative_definite(const Matrix& m) {
    if (m.rows() == 0) return true;
    if (m.rows() != m.cols()) throw std::invalid_argument("is_negative_definite: not square");
    // Cholesky of -M succeeds iff M is negative definite. Eigen's LLT can
    // report success on semidefinite input when roundoff keeps pivots
    // marginally positive, so reject non-negative diagonal entries first.
    for (int i = 0; i < m.rows(); ++i)
        if (!(m(i, i) < 0.0)) return false;
    Eigen::LLT<Matrix> llt(-m);
    return llt.info() == Eigen::Success;
}

bool is_negative_semidefinite(const Matrix& m, double tol) {
    if (m.rows() == 0) return true;
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff() <= tol;
}

TrustSolution solve_trust_subproblem(const Vector& gt, const Matrix& ht, double radius) {
    if (!(radius > 0.0)) throw std::invalid_argument("solve_trust_subproblem: radius <= 0");
    const int m = static_cast<int>(gt.size());
    TrustSolution out;
    out.step = Vector::Zero(m);
    if (m == 0) return out;

    Eigen::SelfAdjointEigenSolver<Matrix> es(ht);
    const Vector lam = es.eigenvalues();  // ascending
    const Matrix& q = es.eigenvectors();
    const Vector ghat = q.transpose() * gt;
    const double lam_max = lam(m - 1);
    const double scale = std::max({std::abs(lam_max), std::abs(lam(0)), gt.norm(), 1.0});
    const double gap = 1e-12 * scale;

    // KKT: (mu I - Ht) step = gt with mu >= max(0, lam_max) and
    // mu (||step|| - radius) = 0.
    const double mu_lo = std::max(0.0, lam_max);

    auto step_at = [&](double mu) {
        Vector y(m);
        for (int i = 0; i < m; ++i) {
            const double denom = mu - lam(i);
            y[i] = denom > gap ? ghat[i] / denom : 0.0;
        }
        return (q * y).eval();
    };
    auto norm_at = [&](double mu) {
        double s = 0.0;
        for (int i = 0; i < m; ++i) {
            const double denom = mu - lam(i);
            if (denom > gap) s += (ghat[i] / denom) * (ghat[i] / denom);
        }
        return std::sqrt(s);
    };

    double near_mass = 0.0;
    for (int i = 0; i < m; ++i)
        if (mu_lo - lam(i) <= gap) near_mass += ghat[i] * ghat[i];

    if (std::sqrt(near_mass) <= 1e-11 * (1.0 + gt.norm())) {
        const Vector pseudo = step_at(mu_lo);
        const double pn = pseudo.norm();
        if (pn <= radius) {
            if (mu_lo <= 0.0) {
                // Interior (or semidefinite pseudo-) solution.
                out.step = pseudo;
                out.multiplier = 0.0;
                out.boundary = false;
            } else {
                // Hard case: complete to the boundary along the top eigenvector.
                const double tau = std::sqrt(std::max(0.0, radius * radius - pn * pn));
                Vector dir = q.col(m - 1);
                if (dir.dot(gt) < 0.0) dir = -dir;
                out.step = pseudo + tau * dir;
                out.multiplier = mu_lo;
                out.boundary = true;
            }
            out.value = gt.dot(out.step) + 0.5 * out.step.dot(ht * out.step);
            return out;
        }
    }

    // Boundary solution: find mu > mu_lo with ||step(mu)|| = radius.
    double lo = mu_lo;
    double hi = std::max(mu_lo + gt.norm() / radius, mu_lo * 2.0 + 1.0);
    while (norm_at(hi) > radius && std::isfinite(hi)) hi = 2.0 * hi + 1.0;
    double mu = 0.5 * (lo + hi);
    // Norm probe just above mu_lo with the top eigen-block included; if even
    // that cannot reach the radius the problem is in the hard case after all.
    if (norm_at(lo + 2.0 * gap) < radius) {
        // ||step|| never reaches the radius even at mu_lo; fall back to the
        // hard-case completion (can occur when near_mass is marginal).
        const Vector pseudo = step_at(mu_lo);
        const double pn = std::min(pseudo.norm(), radius);
        const double tau = std::sqrt(std::max(0.0, radius * radius - pn * pn));
        Vector dir = q.col(m - 1);
        if (dir.dot(gt) < 0.0) dir = -dir;
        out.step = pseudo.norm() > radius ? (radius / pseudo.norm()) * pseudo
                                          : (pseudo + tau * dir).eval();
        out.multiplier = mu_lo;
        out.boundary = true;
        out.value = gt.dot(out.step) + 0.5 * out.step.dot(ht * out.step);
        return out;
    }
    for (int it = 0; it < 200; ++it) {
        // Newton iteration on 1/||step(mu)|| - 1/radius, safeguarded by the bracket.
        double s2 = 0.0, s3 = 0.0;
        for (int i = 0; i < m; ++i) {
            const double denom = mu - lam(i);
            if (denom > gap) {
                const double t = ghat[i] / denom;
                s2 += t * t;
                s3 += t * t / denom;
            }
        }
        const double nrm = std::sqrt(s2);
        if (nrm > radius)
            lo = mu;
        else
            hi = mu;
        const double phi = 1.0 / nrm - 1.0 / radius;
        const double dphi = s3 / (s2 * nrm);
        double mu_next = mu - phi / dphi;
        if (!(mu_next > lo && mu_next < hi)) mu_next = 0.5 * (lo + hi);
        if (std::abs(mu_next - mu) <= 1e-15 * std::max(1.0, mu)) {
            mu = mu_next;
            break;
        }
        mu = mu_next;
    }
    out.step = step_at(mu);
    out.multiplier = mu;
    out.boundary = true;
    out.value = gt.dot(out.step) + 0.5 * out.step.dot(ht * out.step);
    return out;
}

BuildResult build_quadratic(Evaluator& ev, const Vector& theta) {
    require_finite(theta, "build_quadratic");
    BuildResult br;
    const int n = ev.dim();
    br.qm.lbar = ev.value(theta);
    auto gr = ev.gradient(theta);
    auto hr = ev.hessian(theta);
    br.derivatives_ok = gr.ok && hr.ok && std::isfinite(br.qm.lbar);
    br.gradient = gr.g;
    br.hessian = hr.h;
    br.qm.g0 = gr.g[0];
    br.qm.gt = gr.g.tail(n - 1);
    br.qm.h00 = hr.h(0, 0);
    br.qm.ht0 = hr.h.col(0).tail(n - 1);
    br.qm.ht = hr.h.bottomRightCorner(n - 1, n - 1);
    return br;
}

} // namespace plci
