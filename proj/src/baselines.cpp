#include "plci/baselines.hpp"

#include "plci/quadmodel.hpp"
#include "plci/stats.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace plci {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

ObjectiveModel negate(const ObjectiveModel& m) {
    ObjectiveModel out;
    out.dim = m.dim;
    out.value = [m](const Vector& x) { return -m.value(x); };
    if (m.has_gradient()) out.gradient = [m](const Vector& x) { return (-m.gradient(x)).eval(); };
    if (m.has_hessian()) out.hessian = [m](const Vector& x) { return (-m.hessian(x)).eval(); };
    return out;
}
} // namespace

const char* to_string(MethodKind m) {
    switch (m) {
        case MethodKind::Rvm: return "rvm";
        case MethodKind::Vm: return "vm";
        case MethodKind::Wald: return "wald";
        case MethodKind::GridSearch: return "grid";
        case MethodKind::Bisection: return "bisection";
        case MethodKind::BinarySearch: return "binary";
        case MethodKind::SquaredPenalty: return "penalty";
    }
    return "?";
}

std::optional<MethodKind> method_from_string(const std::string& s) {
    if (s == "rvm") return MethodKind::Rvm;
    if (s == "vm") return MethodKind::Vm;
    if (s == "wald") return MethodKind::Wald;
    if (s == "grid") return MethodKind::GridSearch;
    if (s == "bisection") return MethodKind::Bisection;
    if (s == "binary") return MethodKind::BinarySearch;
    if (s == "penalty") return MethodKind::SquaredPenalty;
    return std::nullopt;
}

void OptimizerConfig::validate() const {
    if (max_iters < 1 || !(grad_tol > 0.0) || !(armijo_c1 > 0.0) ||
        !(backtrack > 0.0 && backtrack < 1.0))
        throw std::invalid_argument("OptimizerConfig: invalid setting");
}

BfgsResult bfgs_minimize(Evaluator& ev, const Vector& x0, const OptimizerConfig& cfg) {
    cfg.validate();
    const int n = ev.dim();
    BfgsResult res;
    Vector x = x0;
    double fx = ev.value(x);
    if (!std::isfinite(fx)) {
        res.x = x;
        res.f = fx;
        return res;
    }
    Vector g = ev.gradient(x).g;
    Matrix hinv = Matrix::Identity(n, n);

    Vector best_x = x;
    double best_f = fx;

    for (int it = 0; it < cfg.max_iters; ++it) {
        res.iterations = it;
        if (g.norm() <= cfg.grad_tol) {
            res.converged = true;
            break;
        }
        Vector d = -(hinv * g);
        double gd = g.dot(d);
        if (!(gd < 0.0)) {  // not a descent direction; reset the metric
            hinv = Matrix::Identity(n, n);
            d = -g;
            gd = g.dot(d);
        }
        double t = 1.0;
        double ft = 0.0;
        bool ls_ok = false;
        for (int k = 0; k < 50; ++k) {
            ft = ev.value(x + t * d);
            if (std::isfinite(ft) && ft <= fx + cfg.armijo_c1 * t * gd) {
                ls_ok = true;
                break;
            }
            t *= cfg.backtrack;
        }
        if (!ls_ok) break;  // line search failure: return best so far
        const Vector x_new = x + t * d;
        const Vector g_new = ev.gradient(x_new).g;
        const Vector s = x_new - x;
        const Vector y = g_new - g;
        const double ys = y.dot(s);
        if (ys > 1e-12 * y.norm() * s.norm()) {
            const double rho = 1.0 / ys;
            const Matrix i = Matrix::Identity(n, n);
            hinv = (i - rho * s * y.transpose()) * hinv * (i - rho * y * s.transpose()) +
                   rho * s * s.transpose();
        }
        x = x_new;
        fx = ft;
        g = g_new;
        if (fx < best_f) {
            best_f = fx;
            best_x = x;
        }
    }
    if (fx <= best_f) {
        best_f = fx;
        best_x = x;
    }
    res.x = best_x;
    res.f = best_f;
    if (!res.converged && ev.gradient(best_x).g.norm() <= cfg.grad_tol) res.converged = true;
    return res;
}

FitResult trust_refine(Evaluator& ev, const Vector& start, double tol, int max_steps) {
    FitResult out;
    Vector x = start;
    double lx = ev.value(x);
    double radius = 1.0;
    for (int it = 0; it < max_steps; ++it) {
        const auto gr = ev.gradient(x);
        const double target = tol > 0.0 ? tol : 1e-6 * (1.0 + std::abs(lx));
        if (gr.g.norm() <= target) {
            out.converged = true;
            break;
        }
        const auto hr = ev.hessian(x);
        bool moved = false;
        for (int k = 0; k < 40; ++k) {
            const TrustSolution ts = solve_trust_subproblem(gr.g, hr.h, radius);
            const Vector trial = x + ts.step;
            const double lt = ev.value(trial);
            const double pred = ts.value;
            if (std::isfinite(lt) && lt > lx && pred > 0.0) {
                const double rho = (lt - lx) / pred;
                x = trial;
                lx = lt;
                if (rho > 0.75 && ts.boundary) radius *= 2.0;
                if (rho < 0.25) radius *= 0.5;
                moved = true;
                break;
            }
            radius *= 0.25;
            if (radius < 1e-14) break;
        }
        if (!moved) break;
    }
    out.theta = x;
    out.loglik = lx;
    out.grad_norm = ev.gradient(x).g.norm();
    if (!out.converged)
        out.converged = out.grad_norm <= (tol > 0.0 ? tol : 1e-6 * (1.0 + std::abs(lx)));
    out.evals = ev.counter();
    return out;
}

FitResult fit_mle(const ObjectiveModel& model, const Vector& theta_init,
                  const OptimizerConfig& cfg, const DiffConfig& diff) {
    const ObjectiveModel neg = negate(model);
    Evaluator nev(neg, diff);
    const BfgsResult b = bfgs_minimize(nev, theta_init, cfg);

    Evaluator ev(model, diff);
    FitResult out = trust_refine(ev, b.x);
    out.evals = nev.counter();
    out.evals += ev.counter();
    return out;
}

WaldResult wald_ci(const ObjectiveModel& model, const Vector& theta_hat, double alpha,
                   const DiffConfig& diff) {
    WaldResult out;
    out.theta_hat = theta_hat;
    Evaluator ev(model, diff);
    const auto hr = ev.hessian(theta_hat);
    out.evals = ev.counter();
    if (!hr.ok || !is_negative_definite(hr.h)) return out;  // Failed
    const Matrix cov = (-hr.h).llt().solve(Matrix::Identity(model.dim, model.dim));
    const double se = std::sqrt(cov(0, 0));
    const double z = std::sqrt(chi2_quantile_1df(alpha));
    out.lower = theta_hat[0] - z * se;
    out.upper = theta_hat[0] + z * se;
    out.status = SearchStatus::Converged;
    return out;
}

namespace {

// Fixed-interest profile evaluation: maximize the likelihood over the
// nuisance coordinates with coordinate 0 pinned. Warm-starts from the
// previous optimum. Second-order mode polishes the BFGS result with
// trust-region Newton steps, mirroring the cost profile of a constrained
// Newton-type inner solver.
class ProfileEvaluator {
public:
    ProfileEvaluator(Evaluator& master, const Vector& theta_hat, bool second_order,
                     const OptimizerConfig& opt, const DiffConfig& diff)
        : master_(master), warm_(theta_hat), second_order_(second_order), opt_(opt), diff_(diff) {
        free_.resize(theta_hat.size() > 1 ? theta_hat.size() - 1 : 0);
        for (size_t j = 0; j < free_.size(); ++j) free_[j] = static_cast<int>(j) + 1;
    }

    // Returns the profile log-likelihood at t0, or nullopt on inner failure.
    std::optional<double> eval(double t0) {
        Vector anchor = warm_;
        anchor[0] = t0;
        if (free_.empty()) {
            const double v = master_.value(anchor);
            last_theta_ = anchor;
            return std::isfinite(v) ? std::optional<double>(v) : std::nullopt;
        }
        const ObjectiveModel sub = restrict_model(master_.model(), anchor, free_);
        Evaluator sev(sub, diff_);
        Vector x0(free_.size());
        for (size_t k = 0; k < free_.size(); ++k) x0[k] = warm_[free_[k]];

        const ObjectiveModel subneg = negate(sub);
        Evaluator snev(subneg, diff_);
        const BfgsResult b = bfgs_minimize(snev, x0, opt_);
        master_.absorb(snev.counter());

        Vector xbest = b.x;
        double lbest = -b.f;
        bool ok = b.converged;
        if (second_order_) {
            const FitResult r = trust_refine(sev, xbest, opt_.grad_tol);
            master_.absorb(sev.counter());
            xbest = r.theta;
            lbest = r.loglik;
            ok = ok || r.converged;
        }
        if (!ok || !std::isfinite(lbest)) return std::nullopt;
        warm_ = anchor;
        for (size_t k = 0; k < free_.size(); ++k) warm_[free_[k]] = xbest[k];
        last_theta_ = warm_;
        return lbest;
    }

    const Vector& last_theta() const { return last_theta_; }

private:
    Evaluator& master_;
    Vector warm_;
    Vector last_theta_;
    bool second_order_;
    OptimizerConfig opt_;
    DiffConfig diff_;
    std::vector<int> free_;
};

EndpointResult make_result(SearchStatus st, double endpoint, const Vector& at, double value,
                           const EvalCounter& evals, double lstar, int iters) {
    EndpointResult r;
    r.status = st;
    r.endpoint = endpoint;
    r.theta_at_endpoint = at;
    r.value_at_endpoint = value;
    r.evals = evals;
    r.threshold = lstar;
    r.iterations = iters;
    return r;
}

} // namespace

EndpointResult vm_upper(const ObjectiveModel& model, const Vector& theta_hat, double alpha,
                        const BaselineConfig& bl, const DiffConfig& diff) {
    Evaluator ev(model, diff);
    const int n = model.dim;
    const double lmle = ev.value(theta_hat);
    if (!std::isfinite(lmle))
        return make_result(SearchStatus::Failed, NAN, theta_hat, lmle, ev.counter(), NAN, 0);
    const double lstar = likelihood_threshold(lmle, alpha);
    const double grad_tol = 1e-4 * (1.0 + ev.gradient(theta_hat).g.norm());

    Vector theta = theta_hat;
    SingularPolicy exact;  // only used for the coefficient formulas
    for (int it = 0; it < 200; ++it) {
        const BuildResult br = build_quadratic(ev, theta);
        if (!br.derivatives_ok)
            return make_result(SearchStatus::Failed, NAN, theta, br.qm.lbar, ev.counter(), lstar,
                               it);
        const double nuis = n > 1 ? br.gradient.tail(n - 1).norm() : 0.0;
        if (std::abs(br.qm.lbar - lstar) <= bl.value_tol && nuis <= grad_tol)
            return make_result(SearchStatus::Converged, theta[0], theta, br.qm.lbar, ev.counter(),
                               lstar, it);

        // plain Newton step: no trust region, no singular handling
        Eigen::LDLT<Matrix> ldlt;
        if (n > 1) {
            ldlt.compute(br.qm.ht);
            const bool singular = ldlt.info() != Eigen::Success ||
                                  (ldlt.vectorD().array().abs() <
                                   1e-12 * br.qm.ht.cwiseAbs().maxCoeff() + 1e-300)
                                      .any();
            if (singular)
                return make_result(SearchStatus::Failed, NAN, theta, br.qm.lbar, ev.counter(),
                                   lstar, it);
        }
        ProfileQuadratic pq;
        if (n > 1) {
            const Vector xh = ldlt.solve(br.qm.ht0);
            const Vector xg = ldlt.solve(br.qm.gt);
            pq.a = 0.5 * (br.qm.h00 - br.qm.ht0.dot(xh));
            pq.p = br.qm.g0 - br.qm.gt.dot(xh);
            pq.q = br.qm.lbar - 0.5 * br.qm.gt.dot(xg) - lstar;
        } else {
            pq.a = 0.5 * br.qm.h00;
            pq.p = br.qm.g0;
            pq.q = br.qm.lbar - lstar;
        }

        double roots[2];
        int n_roots = 0;
        if (std::abs(pq.a) < 1e-300) {
            if (pq.p == 0.0)
                return make_result(SearchStatus::Failed, NAN, theta, br.qm.lbar, ev.counter(),
                                   lstar, it);
            roots[n_roots++] = -pq.q / pq.p;
        } else {
            const double disc = pq.p * pq.p - 4.0 * pq.a * pq.q;
            if (disc < 0.0)
                return make_result(SearchStatus::Failed, NAN, theta, br.qm.lbar, ev.counter(),
                                   lstar, it);
            const double sq = std::sqrt(disc);
            roots[n_roots++] = (-pq.p + sq) / (2.0 * pq.a);
            roots[n_roots++] = (-pq.p - sq) / (2.0 * pq.a);
        }

        auto nuisance_at = [&](double d0) {
            if (n == 1) return Vector();
            return Vector(-ldlt.solve((br.qm.ht0 * d0 + br.qm.gt).eval()));
        };

        double d0 = 0.0;
        if (it == 0) {
            // move toward the upper endpoint on the first step
            double best = kInf;
            bool found = false;
            for (int k = 0; k < n_roots; ++k)
                if (roots[k] > 0.0 && roots[k] < best) {
                    best = roots[k];
                    found = true;
                }
            if (!found)
                return make_result(SearchStatus::Failed, NAN, theta, br.qm.lbar, ev.counter(),
                                   lstar, it);
            d0 = best;
        } else {
            // the root minimizing the norm of the full step
            double best = kInf;
            for (int k = 0; k < n_roots; ++k) {
                Vector full(n);
                full[0] = roots[k];
                if (n > 1) full.tail(n - 1) = nuisance_at(roots[k]);
                const double norm = full.norm();
                if (norm < best) {
                    best = norm;
                    d0 = roots[k];
                }
            }
        }
        if (!std::isfinite(d0) || std::abs(d0) > 1e6)
            return make_result(SearchStatus::Failed, NAN, theta, br.qm.lbar, ev.counter(), lstar,
                               it);
        Vector step(n);
        step[0] = d0;
        if (n > 1) step.tail(n - 1) = nuisance_at(d0);
        theta += step;
        if (!theta.allFinite() || !std::isfinite(ev.value(theta)))
            return make_result(SearchStatus::Failed, NAN, theta, -kInf, ev.counter(), lstar, it);
    }
    return make_result(SearchStatus::IterationLimit, theta[0], theta, ev.value(theta),
                       ev.counter(), likelihood_threshold(lmle, alpha), 200);
}

EndpointResult binary_search_upper(const ObjectiveModel& model, const Vector& theta_hat,
                                   double alpha, const BaselineConfig& bl,
                                   const DiffConfig& diff) {
    Evaluator ev(model, diff);
    const double lmle = ev.value(theta_hat);
    if (!std::isfinite(lmle))
        return make_result(SearchStatus::Failed, NAN, theta_hat, lmle, ev.counter(), NAN, 0);
    const double lstar = likelihood_threshold(lmle, alpha);
    ProfileEvaluator pl(ev, theta_hat, /*second_order=*/false, bl.opt, diff);

    // growth phase: offsets 1, 10, 100, 1000
    double good = theta_hat[0];
    Vector good_theta = theta_hat;
    double good_value = lmle;
    double bad = NAN;
    int iters = 0;
    for (double off = 1.0; off <= bl.unbounded_at + 0.5; off *= 10.0) {
        const auto y = pl.eval(theta_hat[0] + off);
        ++iters;
        if (!y)
            return make_result(SearchStatus::Failed, NAN, good_theta, good_value, ev.counter(),
                               lstar, iters);
        if (*y < lstar) {
            bad = theta_hat[0] + off;
            break;
        }
        good = theta_hat[0] + off;
        good_theta = pl.last_theta();
        good_value = *y;
        if (off >= bl.unbounded_at)
            return make_result(SearchStatus::Inestimable, kInf, good_theta, good_value,
                               ev.counter(), lstar, iters);
    }

    while (bad - good > bl.value_tol) {
        const double mid = 0.5 * (good + bad);
        const auto y = pl.eval(mid);
        ++iters;
        if (!y)
            return make_result(SearchStatus::Failed, NAN, good_theta, good_value, ev.counter(),
                               lstar, iters);
        if (*y >= lstar) {
            good = mid;
            good_theta = pl.last_theta();
            good_value = *y;
        } else {
            bad = mid;
        }
        if (iters > 300) break;
    }
    return make_result(SearchStatus::Converged, good, good_theta, good_value, ev.counter(), lstar,
                       iters);
}

EndpointResult bisection_upper(const ObjectiveModel& model, const Vector& theta_hat, double alpha,
                               const BaselineConfig& bl, const DiffConfig& diff) {
    Evaluator ev(model, diff);
    const double lmle = ev.value(theta_hat);
    if (!std::isfinite(lmle))
        return make_result(SearchStatus::Failed, NAN, theta_hat, lmle, ev.counter(), NAN, 0);
    const double lstar = likelihood_threshold(lmle, alpha);
    ProfileEvaluator pl(ev, theta_hat, /*second_order=*/false, bl.opt, diff);

    struct Point {
        double t, y;
        Vector theta;
    };
    std::vector<Point> pts{{theta_hat[0], lmle, theta_hat}};
    double t_good = theta_hat[0], y_good = lmle;
    Vector th_good = theta_hat;
    double t_bad = NAN, y_bad = NAN;
    const double t0 = theta_hat[0];

    auto constrained_root = [&](const Point& other) -> std::optional<double> {
        // quadratic through the MLE with zero slope there
        const double dt = other.t - t0;
        if (std::abs(dt) < 1e-300) return std::nullopt;
        const double a = (other.y - lmle) / (dt * dt);
        if (!(a < -1e-300)) return std::nullopt;  // not concave: no crossing ahead
        return t0 + std::sqrt((lstar - lmle) / a);
    };
    auto three_point_root = [&](const Point& p1, const Point& p2,
                                const Point& p3) -> std::optional<double> {
        Eigen::Matrix3d m;
        Eigen::Vector3d rhs;
        m << p1.t * p1.t, p1.t, 1.0, p2.t * p2.t, p2.t, 1.0, p3.t * p3.t, p3.t, 1.0;
        rhs << p1.y, p2.y, p3.y;
        const Eigen::FullPivLU<Eigen::Matrix3d> lu(m);
        if (!lu.isInvertible()) return std::nullopt;
        const Eigen::Vector3d c = lu.solve(rhs);  // y = c0 t^2 + c1 t + c2
        const double a = c[0], b = c[1], cc = c[2] - lstar;
        if (std::abs(a) < 1e-300) {
            if (std::abs(b) < 1e-300) return std::nullopt;
            return -cc / b;
        }
        const double disc = b * b - 4.0 * a * cc;
        if (disc < 0.0) return std::nullopt;
        const double sq = std::sqrt(disc);
        const double r1 = (-b + sq) / (2.0 * a);
        const double r2 = (-b - sq) / (2.0 * a);
        // prefer a root ahead of the MLE, the nearer one
        double best = NAN;
        for (double r : {r1, r2})
            if (r > t0 && (!std::isfinite(best) || r < best)) best = r;
        if (!std::isfinite(best)) return std::nullopt;
        return best;
    };

    int evals_used = 0;
    double t_next = t0 + 1.0;  // initial step of 1
    while (evals_used < 200) {
        // keep proposals inside the current bracket when one exists
        if (std::isfinite(t_bad)) {
            if (!(t_next > t_good && t_next < t_bad)) t_next = 0.5 * (t_good + t_bad);
            const double width = t_bad - t_good;
            // guard against stagnation at the bracket ends
            t_next = std::min(std::max(t_next, t_good + 1e-3 * width), t_bad - 1e-3 * width);
        }
        if (t_next - t0 > bl.unbounded_at && !std::isfinite(t_bad)) {
            const auto y = pl.eval(t0 + bl.unbounded_at);
            ++evals_used;
            if (y && *y >= lstar)
                return make_result(SearchStatus::Inestimable, kInf, pl.last_theta(), *y,
                                   ev.counter(), lstar, evals_used);
            if (!y)
                return make_result(SearchStatus::Failed, NAN, th_good, y_good, ev.counter(), lstar,
                                   evals_used);
            t_bad = t0 + bl.unbounded_at;
            y_bad = *y;
            continue;
        }
        const auto y = pl.eval(t_next);
        ++evals_used;
        if (!y)
            return make_result(SearchStatus::Failed, NAN, th_good, y_good, ev.counter(), lstar,
                               evals_used);
        pts.push_back({t_next, *y, pl.last_theta()});
        if (std::abs(*y - lstar) <= bl.value_tol)
            return make_result(SearchStatus::Converged, t_next, pl.last_theta(), *y, ev.counter(),
                               lstar, evals_used);
        if (*y >= lstar) {
            if (t_next > t_good) {
                t_good = t_next;
                y_good = *y;
                th_good = pl.last_theta();
            }
        } else if (!std::isfinite(t_bad) || t_next < t_bad) {
            t_bad = t_next;
            y_bad = *y;
        }

        std::optional<double> prop;
        if (std::isfinite(t_bad)) {
            prop = three_point_root({t0, lmle, theta_hat}, {t_good, y_good, th_good},
                                    {t_bad, y_bad, Vector()});
            if (!prop || !(*prop > t_good && *prop < t_bad)) prop = 0.5 * (t_good + t_bad);
        } else {
            // no bad point yet: interpolate through the two largest points
            std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a.t < b.t; });
            const Point& p1 = pts[pts.size() - 2];
            const Point& p2 = pts[pts.size() - 1];
            if (pts.size() >= 3)
                prop = three_point_root(pts[pts.size() - 3], p1, p2);
            if (!prop || !(*prop > t_good)) prop = constrained_root(p2);
            if (!prop) prop = t0 + 10.0 * (p2.t - t0);  // growth fallback
        }
        t_next = *prop;
    }
    return make_result(SearchStatus::IterationLimit, t_good, th_good, y_good, ev.counter(), lstar,
                       evals_used);
}

EndpointResult grid_search_upper(const ObjectiveModel& model, const Vector& theta_hat,
                                 double alpha, const BaselineConfig& bl, const DiffConfig& diff) {
    Evaluator ev(model, diff);
    const double lmle = ev.value(theta_hat);
    if (!std::isfinite(lmle))
        return make_result(SearchStatus::Failed, NAN, theta_hat, lmle, ev.counter(), NAN, 0);
    const double lstar = likelihood_threshold(lmle, alpha);
    ProfileEvaluator pl(ev, theta_hat, /*second_order=*/true, bl.opt, diff);

    double t_good = theta_hat[0];
    Vector th_good = theta_hat;
    double y_good = lmle;
    double step = 0.2;
    bool crossed = false;
    int budget = 200;
    int used = 0;
    while (used < budget) {
        const double t_try = t_good + step;
        const auto y = pl.eval(t_try);
        ++used;
        if (!y)
            return make_result(SearchStatus::Failed, NAN, th_good, y_good, ev.counter(), lstar,
                               used);
        if (std::abs(*y - lstar) <= bl.value_tol)
            return make_result(SearchStatus::Converged, t_try, pl.last_theta(), *y, ev.counter(),
                               lstar, used);
        if (*y >= lstar) {
            t_good = t_try;
            th_good = pl.last_theta();
            y_good = *y;
        } else {
            crossed = true;
            step *= 0.5;
            if (step < 1e-13 * (1.0 + std::abs(t_good)))
                return make_result(SearchStatus::Failed, t_good, th_good, y_good, ev.counter(),
                                   lstar, used);
        }
    }
    if (!crossed) {
        // budget exhausted while still admissible: one large probe
        const auto y = pl.eval(theta_hat[0] + bl.unbounded_at);
        if (y && *y >= lstar)
            return make_result(SearchStatus::Inestimable, kInf, pl.last_theta(), *y, ev.counter(),
                               lstar, used + 1);
    }
    return make_result(SearchStatus::IterationLimit, t_good, th_good, y_good, ev.counter(), lstar,
                       used);
}

EndpointResult squared_penalty_upper(const ObjectiveModel& model, const Vector& theta_hat,
                                     double alpha, const BaselineConfig& bl,
                                     const DiffConfig& diff) {
    Evaluator ev(model, diff);
    const double lmle = ev.value(theta_hat);
    if (!std::isfinite(lmle))
        return make_result(SearchStatus::Failed, NAN, theta_hat, lmle, ev.counter(), NAN, 0);
    const double lstar = likelihood_threshold(lmle, alpha);
    const double w = bl.penalty_weight;

    // minimize -theta0 + w (l(theta) - lstar)^2
    ObjectiveModel pen;
    pen.dim = model.dim;
    pen.value = [model, w, lstar](const Vector& x) {
        const double l = model.value(x);
        if (!std::isfinite(l)) return std::numeric_limits<double>::quiet_NaN();
        const double r = l - lstar;
        return -x[0] + w * r * r;
    };
    if (model.has_gradient()) {
        pen.gradient = [model, w, lstar](const Vector& x) {
            const double l = model.value(x);
            const double r = l - lstar;
            Vector g = (2.0 * w * r) * model.gradient(x);
            g[0] -= 1.0;
            return g;
        };
    }
    Evaluator pev(pen, diff);
    const BfgsResult b = bfgs_minimize(pev, theta_hat, bl.opt);
    ev.absorb(pev.counter());
    const double l_at = ev.value(b.x);
    const double offset = b.x[0] - theta_hat[0];
    if (offset > bl.unbounded_at && l_at >= lstar - bl.value_tol)
        return make_result(SearchStatus::Inestimable, kInf, b.x, l_at, ev.counter(), lstar,
                           b.iterations);
    if (b.converged && std::abs(l_at - lstar) <= bl.value_tol)
        return make_result(SearchStatus::Converged, b.x[0], b.x, l_at, ev.counter(), lstar,
                           b.iterations);
    return make_result(SearchStatus::Failed, b.x[0], b.x, l_at, ev.counter(), lstar, b.iterations);
}

namespace {

using UpperFn = EndpointResult (*)(const ObjectiveModel&, const Vector&, double,
                                   const BaselineConfig&, const DiffConfig&);

EndpointResult lower_via_flip(UpperFn fn, const ObjectiveModel& model, const Vector& theta_hat,
                              double alpha, const BaselineConfig& bl, const DiffConfig& diff) {
    const ObjectiveModel flipped = flip_coordinate0(model);
    Vector start = theta_hat;
    start[0] = -start[0];
    EndpointResult r = fn(flipped, start, alpha, bl, diff);
    r.endpoint = -r.endpoint;
    if (r.theta_at_endpoint.size() > 0) r.theta_at_endpoint[0] = -r.theta_at_endpoint[0];
    return r;
}

} // namespace

CiResult compute_ci(MethodKind method, const ObjectiveModel& model, const Vector& theta_hat,
                    const RvmConfig& rvm_cfg, const SingularPolicy& policy,
                    const BaselineConfig& bl, const DiffConfig& diff) {
    CiResult out;
    const double alpha = rvm_cfg.alpha;
    switch (method) {
        case MethodKind::Rvm:
            out.upper = find_upper_endpoint(model, theta_hat, rvm_cfg, policy, diff);
            out.lower = find_lower_endpoint(model, theta_hat, rvm_cfg, policy, diff);
            break;
        case MethodKind::Vm:
            out.upper = vm_upper(model, theta_hat, alpha, bl, diff);
            out.lower = lower_via_flip(&vm_upper, model, theta_hat, alpha, bl, diff);
            break;
        case MethodKind::Wald: {
            const WaldResult w = wald_ci(model, theta_hat, alpha, diff);
            out.upper.status = out.lower.status = w.status;
            out.upper.endpoint = w.upper;
            out.lower.endpoint = w.lower;
            // the single Hessian evaluation serves both sides
            out.upper.evals = w.evals;
            out.lower.evals = w.evals;
            if (w.status == SearchStatus::Converged) {
                Vector up = theta_hat, lo = theta_hat;
                up[0] = w.upper;
                lo[0] = w.lower;
                out.upper.theta_at_endpoint = up;
                out.lower.theta_at_endpoint = lo;
            }
            break;
        }
        case MethodKind::GridSearch:
            out.upper = grid_search_upper(model, theta_hat, alpha, bl, diff);
            out.lower = lower_via_flip(&grid_search_upper, model, theta_hat, alpha, bl, diff);
            break;
        case MethodKind::Bisection:
            out.upper = bisection_upper(model, theta_hat, alpha, bl, diff);
            out.lower = lower_via_flip(&bisection_upper, model, theta_hat, alpha, bl, diff);
            break;
        case MethodKind::BinarySearch:
            out.upper = binary_search_upper(model, theta_hat, alpha, bl, diff);
            out.lower = lower_via_flip(&binary_search_upper, model, theta_hat, alpha, bl, diff);
            break;
        case MethodKind::SquaredPenalty:
            out.upper = squared_penalty_upper(model, theta_hat, alpha, bl, diff);
            out.lower = lower_via_flip(&squared_penalty_upper, model, theta_hat, alpha, bl, diff);
            break;
    }
    return out;
}

} // namespace plci
