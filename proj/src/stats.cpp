#include "plci/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <stdexcept>

namespace plci {

double chi2_quantile_1df(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("chi2_quantile_1df: p must be in (0,1)");
    static const boost::math::chi_squared dist(1.0);
    return boost::math::quantile(dist, p);
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p must be in (0,1)");
    static const boost::math::normal dist;
    return boost::math::quantile(dist, p);
}

double likelihood_threshold(double loglik_at_mle, double confidence) {
    return loglik_at_mle - 0.5 * chi2_quantile_1df(confidence);
}

} // namespace plci
