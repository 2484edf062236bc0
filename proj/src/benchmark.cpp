#include "plci/benchmark.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace plci {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double log1pexp(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double logistic(double x) { return x > 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }
} // namespace

const char* to_string(BenchmarkFamily f) {
    switch (f) {
        case BenchmarkFamily::Transformed3: return "transformed3";
        case BenchmarkFamily::Transformed11: return "transformed11";
        case BenchmarkFamily::Glm11: return "glm11";
    }
    return "?";
}

std::optional<BenchmarkFamily> family_from_string(const std::string& s) {
    if (s == "transformed3") return BenchmarkFamily::Transformed3;
    if (s == "transformed11") return BenchmarkFamily::Transformed11;
    if (s == "glm11") return BenchmarkFamily::Glm11;
    return std::nullopt;
}

void BenchmarkSpec::validate() const {
    if (n_data < 1) throw std::invalid_argument("BenchmarkSpec: n_data >= 1");
    if (!(nb_var > nb_mean && nb_mean > 0.0))
        throw std::invalid_argument("BenchmarkSpec: need nb_var > nb_mean > 0");
    if (!(binom_p > 0.0 && binom_p < 1.0))
        throw std::invalid_argument("BenchmarkSpec: binom_p in (0,1)");
}

TrueParameters true_parameters(BenchmarkFamily f) {
    TrueParameters p;
    switch (f) {
        case BenchmarkFamily::Transformed3:
            p.alpha = Vector::Constant(1, 0.5);
            p.beta = Vector(2);
            p.beta << -10.0, 5.0;
            break;
        case BenchmarkFamily::Transformed11:
            p.alpha = Vector(5);
            p.alpha << 0.2, 1.0, 0.1, 0.2, 0.5;
            p.beta = Vector(6);
            p.beta << -1.0, 5.0, 2.0, -1.0, -3.0, -2.0;
            break;
        case BenchmarkFamily::Glm11:
            p.alpha = Vector(0);
            p.beta = Vector(11);
            p.beta << 0.8, 0.2, -0.6, -1.0, -1.0, 0.2, 0.5, 0.1, -0.2, 0.2, 2.0;
            break;
    }
    return p;
}

int covariate_count(BenchmarkFamily f) {
    switch (f) {
        case BenchmarkFamily::Transformed3: return 1;
        case BenchmarkFamily::Transformed11: return 5;
        case BenchmarkFamily::Glm11: return 10;
    }
    return 0;
}

int param_count(BenchmarkFamily f) {
    const int k = covariate_count(f);
    return f == BenchmarkFamily::Glm11 ? k + 1 : 2 * k + 1;
}

std::uint64_t split_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t z = base + index + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Matrix simulate_covariates(const BenchmarkSpec& spec) {
    spec.validate();
    const int k = covariate_count(spec.family);
    const int n = spec.n_data;
    // Negative binomial with the requested moments: p = mean/var, r = mean*p/(1-p);
    // sampled as a gamma-Poisson mixture.
    const double p = spec.nb_mean / spec.nb_var;
    const double r = spec.nb_mean * p / (1.0 - p);
    const double gamma_scale = (1.0 - p) / p;

    std::mt19937_64 rng(split_seed(spec.seed, 0x636f76));
    std::gamma_distribution<double> gamma(r, gamma_scale);

    Matrix c(n, k);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < k; ++j) {
            if (j % 2 == 0) {
                const double lambda = gamma(rng);
                std::poisson_distribution<int> pois(std::max(lambda, 1e-12));
                c(i, j) = static_cast<double>(pois(rng));
            } else {
                const int count = static_cast<int>(c(i, j - 1));
                if (count > 0) {
                    std::binomial_distribution<int> bin(count, spec.binom_p);
                    c(i, j) = static_cast<double>(bin(rng));
                } else {
                    c(i, j) = 0.0;
                }
            }
        }
    }
    c.array() += spec.zero_perturbation;
    return c;
}

Eigen::VectorXi simulate_responses(const Matrix& covariates, const TrueParameters& params,
                                   BenchmarkFamily family, std::uint64_t seed) {
    const int n = static_cast<int>(covariates.rows());
    const int k = static_cast<int>(covariates.cols());
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Eigen::VectorXi x(n);
    for (int i = 0; i < n; ++i) {
        double eta = params.beta[0];
        for (int j = 0; j < k; ++j) {
            const double a = family == BenchmarkFamily::Glm11 ? 1.0 : params.alpha[j];
            eta += params.beta[j + 1] * std::pow(covariates(i, j), a);
        }
        x[i] = unif(rng) < logistic(eta) ? 1 : 0;
    }
    return x;
}

Dataset simulate_dataset(const BenchmarkSpec& spec) {
    Dataset d;
    d.covariates = simulate_covariates(spec);
    d.responses = simulate_responses(d.covariates, true_parameters(spec.family), spec.family,
                                     split_seed(spec.seed, 0x726573));
    return d;
}

double softplus(double x) {
    if (x == kInf) return kInf;
    return log1pexp(x);
}

double inv_softplus(double x) {
    if (!(x > 0.0)) throw std::invalid_argument("inv_softplus: x must be positive");
    // ln(e^x - 1), stable for large x
    return x > 30.0 ? x : std::log(std::expm1(x));
}

Vector pack_transformed(BenchmarkFamily f, const TrueParameters& p) {
    const int k = covariate_count(f);
    if (f == BenchmarkFamily::Glm11) return p.beta;
    Vector out(2 * k + 1);
    for (int j = 0; j < k; ++j) out[j] = inv_softplus(p.alpha[j]);
    out.tail(k + 1) = p.beta;
    return out;
}

bool is_alpha_coordinate(BenchmarkFamily f, int idx) {
    return f != BenchmarkFamily::Glm11 && idx < covariate_count(f);
}

double to_native_scale(BenchmarkFamily f, int idx, double packed_value) {
    if (!is_alpha_coordinate(f, idx)) return packed_value;
    if (packed_value == -kInf) return 0.0;
    return softplus(packed_value);
}

ObjectiveModel make_benchmark_model(std::shared_ptr<const Dataset> data, BenchmarkFamily family) {
    const int n = static_cast<int>(data->covariates.rows());
    const int k = static_cast<int>(data->covariates.cols());
    if (k != covariate_count(family))
        throw std::invalid_argument("make_benchmark_model: covariate count mismatch");
    const bool glm = family == BenchmarkFamily::Glm11;
    const int dim = param_count(family);
    auto logc = std::make_shared<Matrix>(data->covariates.array().log().matrix());

    ObjectiveModel m;
    m.dim = dim;

    m.value = [data, logc, n, k, glm](const Vector& th) {
        const int off = glm ? 0 : k;
        double l = 0.0;
        for (int i = 0; i < n; ++i) {
            double eta = th[off];
            for (int j = 0; j < k; ++j) {
                const double u = glm ? data->covariates(i, j)
                                     : std::exp(softplus(th[j]) * (*logc)(i, j));
                eta += th[off + 1 + j] * u;
            }
            l += data->responses[i] * eta - log1pexp(eta);
        }
        return l;
    };

    m.gradient = [data, logc, n, k, glm, dim](const Vector& th) {
        const int off = glm ? 0 : k;
        Vector g = Vector::Zero(dim);
        Vector t(dim);  // d eta / d theta for one observation
        for (int i = 0; i < n; ++i) {
            double eta = th[off];
            t.setZero();
            t[off] = 1.0;
            for (int j = 0; j < k; ++j) {
                const double lc = (*logc)(i, j);
                const double u = glm ? data->covariates(i, j) : std::exp(softplus(th[j]) * lc);
                const double b = th[off + 1 + j];
                eta += b * u;
                t[off + 1 + j] = u;
                if (!glm) t[j] = b * u * lc * logistic(th[j]);
            }
            const double w = data->responses[i] - logistic(eta);
            g += w * t;
        }
        return g;
    };

    m.hessian = [data, logc, n, k, glm, dim](const Vector& th) {
        const int off = glm ? 0 : k;
        Matrix h = Matrix::Zero(dim, dim);
        Vector t(dim);
        for (int i = 0; i < n; ++i) {
            double eta = th[off];
            t.setZero();
            t[off] = 1.0;
            for (int j = 0; j < k; ++j) {
                const double lc = (*logc)(i, j);
                const double u = glm ? data->covariates(i, j) : std::exp(softplus(th[j]) * lc);
                const double b = th[off + 1 + j];
                eta += b * u;
                t[off + 1 + j] = u;
                if (!glm) t[j] = b * u * lc * logistic(th[j]);
            }
            const double s = logistic(eta);
            const double w1 = data->responses[i] - s;
            const double w2 = s * (1.0 - s);
            h.noalias() -= w2 * (t * t.transpose());
            if (!glm) {
                // second derivatives of eta: only the (alpha_j, alpha_j) and
                // (alpha_j, beta_j) entries are nonzero
                for (int j = 0; j < k; ++j) {
                    const double lc = (*logc)(i, j);
                    const double sa = logistic(th[j]);
                    const double u = std::exp(softplus(th[j]) * lc);
                    const double b = th[off + 1 + j];
                    const double d_ab = u * lc * sa;  // d^2 eta / d alpha'_j d beta_j
                    const double d_aa = b * u * lc * (lc * sa * sa + sa * (1.0 - sa));
                    h(j, off + 1 + j) += w1 * d_ab;
                    h(off + 1 + j, j) += w1 * d_ab;
                    h(j, j) += w1 * d_aa;
                }
            }
        }
        return h;
    };
    return m;
}

std::optional<ConsensusTruth> consensus_truth(const std::vector<BoundOutcome>& outcomes,
                                              double lstar, bool upper_side, double unbounded_at) {
    bool any = false;
    bool unbounded = false;
    double widest = 0.0;
    for (const auto& o : outcomes) {
        if (o.status == SearchStatus::Failed) continue;
        const bool admissible = o.value_at >= lstar - 1e-3;
        if (!admissible) continue;
        if (o.status == SearchStatus::Inestimable || std::abs(o.endpoint) > unbounded_at) {
            unbounded = true;
            any = true;
            continue;
        }
        if (!std::isfinite(o.endpoint)) continue;
        if (!any || (upper_side ? o.endpoint > widest : o.endpoint < widest)) widest = o.endpoint;
        any = true;
    }
    if (!any) return std::nullopt;
    ConsensusTruth t;
    t.unbounded = unbounded;
    t.value = widest;
    return t;
}

Score score_run(const BoundOutcome& outcome, double native_endpoint, const ConsensusTruth& truth,
                double native_truth, double unbounded_at) {
    Score s;
    const bool definite =
        outcome.status == SearchStatus::Converged || outcome.status == SearchStatus::Inestimable;
    if (truth.unbounded) {
        s.success = definite && (outcome.status == SearchStatus::Inestimable ||
                                 std::abs(outcome.endpoint) > unbounded_at);
        return s;
    }
    if (outcome.status == SearchStatus::Converged && std::isfinite(native_endpoint)) {
        s.error = std::abs(native_endpoint - native_truth);
        s.success = s.error <= 0.001 || s.error <= 0.05 * std::abs(native_truth);
    } else if (std::isfinite(native_endpoint)) {
        s.error = std::abs(native_endpoint - native_truth);
    }
    return s;
}

} // namespace plci
