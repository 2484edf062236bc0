#include "plci/model.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace plci {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double fd_step(double x, double rel, double floor_) {
    return std::max(rel * std::abs(x), floor_);
}
} // namespace

void require_finite(const Vector& v, const char* what) {
    if (!v.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite entry");
}

Evaluator::Evaluator(const ObjectiveModel& model, DiffConfig cfg)
    : model_(model), cfg_(cfg) {
    cfg_.validate();
    if (model.dim < 1 || !model.value)
        throw std::invalid_argument("Evaluator: model needs dim >= 1 and a value function");
}

double Evaluator::raw_value(const Vector& theta) {
    if (theta.size() != model_.dim)
        throw std::invalid_argument("Evaluator: dimension mismatch");
    ++counter_.n_value;
    const double v = model_.value(theta);
    return std::isnan(v) ? kNegInf : v;
}

double Evaluator::value(const Vector& theta) { return raw_value(theta); }

GradientResult Evaluator::gradient(const Vector& theta) {
    const int n = model_.dim;
    require_finite(theta, "gradient");
    if (model_.has_gradient()) {
        counter_.n_gradient_equiv += 2 * n;
        return {model_.gradient(theta), true};
    }
    GradientResult res;
    res.g.resize(n);
    Vector x = theta;
    for (int j = 0; j < n; ++j) {
        const double h = fd_step(theta[j], cfg_.rel_step, cfg_.abs_floor);
        x[j] = theta[j] + h;
        const double fp = raw_value(x);
        x[j] = theta[j] - h;
        const double fm = raw_value(x);
        x[j] = theta[j];
        if (!std::isfinite(fp) || !std::isfinite(fm)) res.ok = false;
        res.g[j] = (fp - fm) / (2.0 * h);
    }
    // Numeric value calls were already tallied under n_value; move them to
    // the gradient bucket so total() stays "value calls + derivative cost".
    counter_.n_value -= 2 * n;
    counter_.n_gradient_equiv += 2 * n;
    return res;
}

HessianResult Evaluator::hessian(const Vector& theta) {
    const int n = model_.dim;
    require_finite(theta, "hessian");
    if (model_.has_hessian()) {
        counter_.n_hessian_equiv += 2 * n * (n + 1);
        Matrix h = model_.hessian(theta);
        h = 0.5 * (h + h.transpose()).eval();
        return {h, true};
    }
    HessianResult res;
    res.h.resize(n, n);
    const double rel = std::sqrt(cfg_.rel_step);
    const double flo = std::sqrt(cfg_.abs_floor);
    std::int64_t calls = 0;
    Vector x = theta;
    const double f0 = raw_value(x);
    ++calls;
    if (!std::isfinite(f0)) res.ok = false;
    std::vector<double> hs(n);
    for (int j = 0; j < n; ++j) hs[j] = fd_step(theta[j], rel, flo);
    for (int i = 0; i < n; ++i) {
        x[i] = theta[i] + hs[i];
        const double fp = raw_value(x);
        x[i] = theta[i] - hs[i];
        const double fm = raw_value(x);
        x[i] = theta[i];
        calls += 2;
        if (!std::isfinite(fp) || !std::isfinite(fm)) res.ok = false;
        res.h(i, i) = (fp - 2.0 * f0 + fm) / (hs[i] * hs[i]);
    }
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < i; ++j) {
            x[i] = theta[i] + hs[i];
            x[j] = theta[j] + hs[j];
            const double fpp = raw_value(x);
            x[j] = theta[j] - hs[j];
            const double fpm = raw_value(x);
            x[i] = theta[i] - hs[i];
            const double fmm = raw_value(x);
            x[j] = theta[j] + hs[j];
            const double fmp = raw_value(x);
            x[i] = theta[i];
            x[j] = theta[j];
            calls += 4;
            if (!std::isfinite(fpp) || !std::isfinite(fpm) || !std::isfinite(fmp) ||
                !std::isfinite(fmm))
                res.ok = false;
            res.h(i, j) = res.h(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * hs[i] * hs[j]);
        }
    }
    counter_.n_value -= calls;
    counter_.n_hessian_equiv += calls;
    res.h = 0.5 * (res.h + res.h.transpose()).eval();
    return res;
}

DerivativeCheck check_derivatives(const ObjectiveModel& model, const Vector& theta,
                                  DiffConfig cfg) {
    if (!model.has_gradient())
        throw std::invalid_argument("check_derivatives: model has no analytic gradient");
    DerivativeCheck out;

    ObjectiveModel numeric = model;
    numeric.gradient = nullptr;
    numeric.hessian = nullptr;

    Evaluator num(numeric, cfg);
    const Vector g_ana = model.gradient(theta);
    const Vector g_num = num.gradient(theta).g;
    const double gscale = std::max({g_ana.norm(), g_num.norm(), 1e-300});
    out.gradient_rel_error = (g_ana - g_num).norm() / gscale;

    if (model.has_hessian()) {
        Matrix h_ana = model.hessian(theta);
        h_ana = 0.5 * (h_ana + h_ana.transpose()).eval();
        const Matrix h_num = num.hessian(theta).h;
        const double hscale = std::max({h_ana.norm(), h_num.norm(), 1e-300});
        out.hessian_rel_error = (h_ana - h_num).norm() / hscale;
    }
    return out;
}

ObjectiveModel flip_coordinate0(const ObjectiveModel& m) {
    ObjectiveModel out;
    out.dim = m.dim;
    auto flip = [](Vector t) {
        t[0] = -t[0];
        return t;
    };
    out.value = [m, flip](const Vector& t) { return m.value(flip(t)); };
    if (m.has_gradient())
        out.gradient = [m, flip](const Vector& t) {
            Vector g = m.gradient(flip(t));
            g[0] = -g[0];
            return g;
        };
    if (m.has_hessian())
        out.hessian = [m, flip](const Vector& t) {
            Matrix h = m.hessian(flip(t));
            h.row(0) *= -1.0;
            h.col(0) *= -1.0;
            return h;
        };
    return out;
}

ObjectiveModel swap_to_front(const ObjectiveModel& m, int index) {
    if (index < 0 || index >= m.dim) throw std::invalid_argument("swap_to_front: bad index");
    if (index == 0) return m;
    ObjectiveModel out;
    out.dim = m.dim;
    auto swap = [index](Vector t) {
        std::swap(t[0], t[index]);
        return t;
    };
    out.value = [m, swap](const Vector& t) { return m.value(swap(t)); };
    if (m.has_gradient())
        out.gradient = [m, swap, index](const Vector& t) {
            Vector g = m.gradient(swap(t));
            std::swap(g[0], g[index]);
            return g;
        };
    if (m.has_hessian())
        out.hessian = [m, swap, index](const Vector& t) {
            Matrix h = m.hessian(swap(t));
            h.row(0).swap(h.row(index));
            h.col(0).swap(h.col(index));
            return h;
        };
    return out;
}

ObjectiveModel restrict_model(const ObjectiveModel& m, const Vector& anchor,
                              const std::vector<int>& free_indices) {
    if (anchor.size() != m.dim) throw std::invalid_argument("restrict_model: anchor dim");
    ObjectiveModel out;
    out.dim = static_cast<int>(free_indices.size());
    auto embed = [m, anchor, free_indices](const Vector& x) {
        Vector full = anchor;
        for (size_t k = 0; k < free_indices.size(); ++k) full[free_indices[k]] = x[k];
        return full;
    };
    out.value = [m, embed](const Vector& x) { return m.value(embed(x)); };
    if (m.has_gradient())
        out.gradient = [m, embed, free_indices](const Vector& x) {
            const Vector g = m.gradient(embed(x));
            Vector out_g(free_indices.size());
            for (size_t k = 0; k < free_indices.size(); ++k) out_g[k] = g[free_indices[k]];
            return out_g;
        };
    if (m.has_hessian())
        out.hessian = [m, embed, free_indices](const Vector& x) {
            const Matrix h = m.hessian(embed(x));
            const int nf = static_cast<int>(free_indices.size());
            Matrix out_h(nf, nf);
            for (int a = 0; a < nf; ++a)
                for (int b = 0; b < nf; ++b) out_h(a, b) = h(free_indices[a], free_indices[b]);
            return out_h;
        };
    return out;
}

} // namespace plci
