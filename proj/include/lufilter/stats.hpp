#pragma once

namespace luf {

// log(sqrt(2 pi)), the normalizing constant of Gaussian log densities.
inline constexpr double kLogSqrt2Pi = 0.9189385332046727417803297364056176;

// Standard-normal distribution functions.
//
// The CDF and survival function go through erfc so both tails keep full
// relative accuracy (0.5*erfc(8/sqrt 2) ~ 6e-16 is exact to ~1 ulp, where
// 1 - Phi computed naively would be pure cancellation). The quantile is
// Wichura's PPND16 rational approximation, accurate to ~1e-15 relative over
// the whole open interval including subnormal-tail arguments.

double normal_cdf(double x);       // Phi(x)
double normal_sf(double x);        // 1 - Phi(x), accurate for large x
double normal_pdf(double x);
double normal_logpdf(double x);

// Inverse of normal_cdf. Requires p in (0,1); throws std::invalid_argument
// otherwise (p=0/1 would be +-infinity, which callers must handle themselves).
double normal_quantile(double p);

// P(a < X <= b) for X ~ N(0,1), a <= b. Evaluated on whichever side of the
// origin is better conditioned, so bins far in either tail keep relative
// accuracy instead of cancelling.
double normal_interval_prob(double a, double b);

// log density of the half-Cauchy(0, scale) distribution at x; -infinity for
// x <= 0 (outside support).
double log_half_cauchy(double x, double scale);

// log density of N(0, sd^2) at x.
double log_normal_density(double x, double sd);

}  // namespace luf
