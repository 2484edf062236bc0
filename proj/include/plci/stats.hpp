#pragma once

namespace plci {

// Quantile of the chi-squared distribution with one degree of freedom at
// probability `p` in (0,1). chi2_quantile_1df(0.95) = 3.8414588206941...
double chi2_quantile_1df(double p);

// Standard normal quantile (probit). normal_quantile(0.975) = 1.9599639845...
double normal_quantile(double p);

// Log-likelihood threshold for a level-`confidence` profile likelihood
// interval: l(theta_hat) - chi2_quantile_1df(confidence) / 2.
double likelihood_threshold(double loglik_at_mle, double confidence);

} // namespace plci
