#include "lufilter/stats.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace luf {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244008443621048490;

// Horner evaluation of c[0] + c[1] r + ... + c[N-1] r^{N-1}.
template <std::size_t N>
double horner(const std::array<double, N>& c, double r) {
  double s = c[N - 1];
  for (std::size_t i = N - 1; i-- > 0;) s = s * r + c[i];
  return s;
}

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double normal_sf(double x) { return 0.5 * std::erfc(x * kInvSqrt2); }

double normal_pdf(double x) { return std::exp(-0.5 * x * x - kLogSqrt2Pi); }

double normal_logpdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }

// Wichura (1988), algorithm AS 241, PPND16 coefficients (ascending order).
double normal_quantile(double p) {
  static constexpr std::array<double, 8> a = {
      3.3871328727963666080e+0, 1.3314166789178437745e+2, 1.9715909503065514427e+3,
      1.3731693765509461125e+4, 4.5921953931549871457e+4, 6.7265770927008700853e+4,
      3.3430575583588128105e+4, 2.5090809287301226727e+3};
  static constexpr std::array<double, 8> b = {
      1.0,                      4.2313330701600911252e+1, 6.8718700749205790830e+2,
      5.3941960214247511077e+3, 2.1213794301586595867e+4, 3.9307895800092710610e+4,
      2.8729085735721942674e+4, 5.2264952788528545610e+3};
  static constexpr std::array<double, 8> c = {
      1.42343711074968357734e+0, 4.63033784615654529590e+0, 5.76949722146069140550e+0,
      3.64784832476320460504e+0, 1.27045825245236838258e+0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4};
  static constexpr std::array<double, 8> d = {
      1.0,                       2.05319162663775882187e+0, 1.67638483018380384940e+0,
      6.89767334985100004550e-1, 1.48103976427480074590e-1, 1.51986665636164571966e-2,
      5.47593808499534494600e-4, 1.05075007164441684324e-9};
  static constexpr std::array<double, 8> e = {
      6.65790464350110377720e+0, 5.46378491116411436990e+0, 1.78482653991729133580e+0,
      2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7};
  static constexpr std::array<double, 8> f = {
      1.0,                       5.99832206555887937690e-1, 1.36929880922735805310e-1,
      1.48753612908506148525e-2, 7.86869131145613259100e-4, 1.84631831751005468180e-5,
      1.42151175831644588870e-7, 2.04426310338993978564e-15};

  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("normal_quantile: p must lie strictly in (0,1)");
  }
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q * horner(a, r) / horner(b, r);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double x;
  if (r <= 5.0) {
    r -= 1.6;
    x = horner(c, r) / horner(d, r);
  } else {
    r -= 5.0;
    x = horner(e, r) / horner(f, r);
  }
  return (q < 0.0) ? -x : x;
}

double normal_interval_prob(double a, double b) {
  if (!(a <= b)) throw std::invalid_argument("normal_interval_prob: requires a <= b");
  double p;
  if (a + b > 0.0) {
    p = normal_sf(a) - normal_sf(b);  // both bounds to the right: small minus smaller
  } else {
    p = normal_cdf(b) - normal_cdf(a);
  }
  return p < 0.0 ? 0.0 : p;
}

double log_half_cauchy(double x, double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("log_half_cauchy: scale must be > 0");
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  const double t = x / scale;
  // density 2 / (pi * scale * (1 + t^2))
  return std::log(2.0 / M_PI) - std::log(scale) - std::log1p(t * t);
}

double log_normal_density(double x, double sd) {
  if (!(sd > 0.0)) throw std::invalid_argument("log_normal_density: sd must be > 0");
  const double t = x / sd;
  return -kLogSqrt2Pi - std::log(sd) - 0.5 * t * t;
}

}  // namespace luf
