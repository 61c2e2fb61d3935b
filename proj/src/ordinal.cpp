#include "lufilter/ordinal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "lufilter/stats.hpp"

namespace luf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Intervals entirely beyond this many standard deviations leave the
// inverse-CDF path (whose conditioned uniform loses resolution out there)
// for rejection sampling.
constexpr double kTailCut = 5.0;

// Standardized draw from N(0,1) on (a, b) with a < b, neither bound beyond
// the tail cut on its own side. Conditioning happens on whichever tail
// function keeps the small values: survival form when the interval sits in
// the right half, CDF form otherwise.
double central_sample(double a, double b, Rng& rng) {
  const double u = rng.uniform();
  if (a == -kInf && b == kInf) return normal_quantile(u);
  const bool right_half = (a == -kInf) ? false : (b == kInf) ? true : a + b > 0.0;
  if (right_half) {
    const double sa = (a == -kInf) ? 1.0 : normal_sf(a);
    const double sb = (b == kInf) ? 0.0 : normal_sf(b);
    const double s = sb + (sa - sb) * u;
    return -normal_quantile(s);
  }
  const double ca = (a == -kInf) ? 0.0 : normal_cdf(a);
  const double cb = (b == kInf) ? 1.0 : normal_cdf(b);
  return normal_quantile(ca + (cb - ca) * u);
}

// Standardized draw from N(0,1) on (a, b) with a >= kTailCut: exponential
// rejection sampling. The proposal is Exp(lambda) shifted to a (truncated to
// the interval when b is finite) with lambda = (a + sqrt(a^2+4))/2, the rate
// minimizing the rejection bound; a proposal x is accepted with probability
// exp(-(x-lambda)^2/2). Acceptance stays above ~1/2 for every a >= 5, so the
// iteration cap is unreachable in practice and hitting it is a hard error.
double tail_sample(double a, double b, Rng& rng) {
  const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
  const double span = b - a;
  const double cap = std::isinf(span) ? 1.0 : -std::expm1(-lambda * span);
  for (int it = 0; it < 100000; ++it) {
    const double u = rng.uniform();
    const double e = std::isinf(span) ? -std::log(u) / lambda
                                      : -std::log1p(-cap * u) / lambda;
    const double x = a + e;
    const double t = x - lambda;
    if (rng.uniform() <= std::exp(-0.5 * t * t)) return x;
  }
  throw std::runtime_error("trunc_normal_sample: tail rejection failed to accept");
}

}  // namespace

void CutPoints::validate() const {
  if (gamma.size() < 1)
    throw std::invalid_argument("CutPoints: at least one cut point required (K >= 2)");
  for (Eigen::Index i = 0; i < gamma.size(); ++i) {
    if (!std::isfinite(gamma(i)))
      throw std::invalid_argument("CutPoints: cut points must be finite");
    if (i > 0 && !(gamma(i) > gamma(i - 1)))
      throw std::invalid_argument("CutPoints: cut points must be strictly increasing");
  }
}

double CutPoints::lower(int k) const {
  if (k < 1 || k > K()) throw std::invalid_argument("CutPoints::lower: level out of range");
  return k == 1 ? -kInf : gamma(k - 2);
}

double CutPoints::upper(int k) const {
  if (k < 1 || k > K()) throw std::invalid_argument("CutPoints::upper: level out of range");
  return k == K() ? kInf : gamma(k - 1);
}

CutPoints CutPoints::from_frequencies(const std::vector<long>& counts) {
  const int k = static_cast<int>(counts.size());
  if (k < 2) throw std::invalid_argument("CutPoints::from_frequencies: need K >= 2 levels");
  long total = 0;
  for (long c : counts) {
    if (c < 0) throw std::invalid_argument("CutPoints::from_frequencies: negative count");
    total += c;
  }
  if (total <= 0) throw std::invalid_argument("CutPoints::from_frequencies: no observations");
  // Half-count smoothing keeps the cumulative proportions strictly inside
  // (0,1) and strictly increasing even when some levels are unobserved.
  const double denom = static_cast<double>(total) + 0.5 * k;
  CutPoints out;
  out.gamma.resize(k - 1);
  long cum = 0;
  for (int i = 0; i < k - 1; ++i) {
    cum += counts[i];
    out.gamma(i) = normal_quantile((static_cast<double>(cum) + 0.5 * (i + 1)) / denom);
  }
  out.validate();
  return out;
}

int bin_latent(double z, const CutPoints& gamma) {
  if (std::isnan(z)) throw std::invalid_argument("bin_latent: z is NaN");
  const double* begin = gamma.gamma.data();
  const double* end = begin + gamma.gamma.size();
  // Level k occupies (gamma_{k-1}, gamma_k]: the first cut point >= z names
  // the level, so an exact boundary hit lands in the lower level.
  return static_cast<int>(std::lower_bound(begin, end, z) - begin) + 1;
}

double trunc_normal_sample(double mean, double sd, double lo, double hi, Rng& rng) {
  if (!std::isfinite(mean)) throw std::invalid_argument("trunc_normal_sample: mean not finite");
  if (!(sd > 0.0) || !std::isfinite(sd))
    throw std::invalid_argument("trunc_normal_sample: sd must be positive and finite");
  if (!(lo < hi)) throw std::invalid_argument("trunc_normal_sample: need lo < hi");

  const double a = (lo - mean) / sd;
  const double b = (hi - mean) / sd;
  double x;
  if (a >= kTailCut)
    x = tail_sample(a, b, rng);
  else if (b <= -kTailCut)
    x = -tail_sample(-b, -a, rng);
  else
    x = central_sample(a, b, rng);

  // Rounding at either end must not let the draw escape the open interval.
  double out = mean + sd * x;
  if (out <= lo) out = std::nextafter(lo, hi);
  if (out >= hi) out = std::nextafter(hi, lo);
  return out;
}

CutPoints update_cutpoints(const Eigen::VectorXd& zs, const std::vector<int>& y,
                           const CutPoints& gamma, Rng& rng) {
  gamma.validate();
  const int n = static_cast<int>(zs.size());
  const int k_levels = gamma.K();
  if (static_cast<int>(y.size()) != n)
    throw std::invalid_argument("update_cutpoints: zs and y differ in length");

  std::vector<double> level_max(k_levels + 1, -kInf);
  std::vector<double> level_min(k_levels + 1, kInf);
  for (int r = 0; r < n; ++r) {
    if (y[r] < 1 || y[r] > k_levels)
      throw std::invalid_argument("update_cutpoints: rating out of range");
    level_max[y[r]] = std::max(level_max[y[r]], zs(r));
    level_min[y[r]] = std::min(level_min[y[r]], zs(r));
  }
  // min over all levels strictly above k, per k.
  std::vector<double> above_min(k_levels + 2, kInf);
  for (int k = k_levels; k >= 1; --k) above_min[k] = std::min(level_min[k], above_min[k + 1]);

  CutPoints out = gamma;
  for (int k = 1; k <= k_levels - 1; ++k) {
    const int i = k - 1;
    double lo = level_max[k];
    if (lo == -kInf) lo = (k >= 2) ? out.gamma(i - 1) : gamma.gamma(0) - 1.0;
    double hi = above_min[k + 1];
    if (hi == kInf) hi = (k <= k_levels - 2) ? gamma.gamma(i + 1) : gamma.gamma(i) + 1.0;
    double g = rng.uniform(lo, hi);
    // Keep strict ordering (and the binning invariant) against endpoint
    // rounding: the draw must stay strictly between its neighbors and
    // strictly below the smallest latent value of the levels above.
    const double prev = (i > 0) ? out.gamma(i - 1) : -kInf;
    if (g <= prev) g = std::nextafter(prev, kInf);
    if (g >= hi) g = std::nextafter(hi, -kInf);
    out.gamma(i) = g;
  }
  out.validate();
  return out;
}

void update_latent(Eigen::VectorXd& zs, const std::vector<int>& y, const CutPoints& gamma,
                   const Eigen::MatrixXd& precision, const Eigen::VectorXd& mu, Rng& rng,
                   const std::vector<int>* order) {
  gamma.validate();
  const int n = static_cast<int>(zs.size());
  if (static_cast<int>(y.size()) != n || mu.size() != n || precision.rows() != n ||
      precision.cols() != n)
    throw std::invalid_argument("update_latent: dimension mismatch");
  if (order && static_cast<int>(order->size()) != n)
    throw std::invalid_argument("update_latent: order must list every site once");

  // Running image v = Lambda (z - mu), updated in O(n) per accepted site, so
  // each conditional mean costs one read instead of a fresh row product.
  Eigen::VectorXd v = precision * (zs - mu);
  for (int step = 0; step < n; ++step) {
    const int r = order ? (*order)[static_cast<std::size_t>(step)] : step;
    if (r < 0 || r >= n) throw std::invalid_argument("update_latent: order index out of range");
    const double lrr = precision(r, r);
    if (!(lrr > 0.0))
      throw std::runtime_error("update_latent: nonpositive diagonal in the precision matrix");
    const double var = 1.0 / lrr;
    const double c = mu(r) - var * (v(r) - lrr * (zs(r) - mu(r)));
    const int k = y[r];
    if (k < 1 || k > gamma.K())
      throw std::invalid_argument("update_latent: rating out of range");
    const double znew =
        trunc_normal_sample(c, std::sqrt(var), gamma.lower(k), gamma.upper(k), rng);
    const double dz = znew - zs(r);
    if (dz != 0.0) {
      v += precision.col(r) * dz;
      zs(r) = znew;
    }
  }
}

double ordinal_level_prob(int k, double mean, const CutPoints& gamma) {
  if (k < 1 || k > gamma.K())
    throw std::invalid_argument("ordinal_level_prob: level out of range");
  if (!std::isfinite(mean)) throw std::invalid_argument("ordinal_level_prob: mean not finite");
  if (k == 1) return normal_cdf(gamma.gamma(0) - mean);
  if (k == gamma.K()) return normal_sf(gamma.gamma(k - 2) - mean);
  return normal_interval_prob(gamma.gamma(k - 2) - mean, gamma.gamma(k - 1) - mean);
}

double pointwise_likelihood(int y_r, const Eigen::VectorXd& x_r, const Eigen::VectorXd& beta,
                            double ztilde_r, const CutPoints& gamma) {
  if (x_r.size() != beta.size())
    throw std::invalid_argument("pointwise_likelihood: covariates and beta differ in length");
  return ordinal_level_prob(y_r, x_r.dot(beta) + ztilde_r, gamma);
}

}  // namespace luf
