#pragma once

#include <Eigen/Dense>
#include <vector>

#include "lufilter/rng.hpp"

namespace luf {

// Interior cut points of the ordinal probit link: level k corresponds to the
// latent interval (gamma_{k-1}, gamma_k], with gamma_0 = -infinity and
// gamma_K = +infinity implicit.
struct CutPoints {
  Eigen::VectorXd gamma;  // strictly increasing, length K-1

  int K() const { return static_cast<int>(gamma.size()) + 1; }
  void validate() const;  // throws std::invalid_argument

  double lower(int k) const;  // gamma_{k-1}; -infinity for k = 1
  double upper(int k) const;  // gamma_k; +infinity for k = K

  // Starting values from observed level frequencies: gamma_k at the standard
  // normal quantile of the cumulative proportion through level k. Zero counts
  // are handled by clamping the proportions to [1/2n, 1-1/2n] and spacing
  // collided values 1/2n apart, so the result is always strictly increasing.
  static CutPoints from_frequencies(const std::vector<long>& counts);
};

// The unique k with gamma_{k-1} < z <= gamma_k (a boundary hit lands in the
// lower level; a measure-zero event for continuous z).
int bin_latent(double z, const CutPoints& gamma);

// One draw from N(mean, sd^2) truncated to the open interval (lo, hi); either
// bound may be infinite. Central intervals invert the CDF on the conditioned
// uniform (survival-form when the interval sits in the right half, so tails
// keep relative precision); intervals entirely beyond 5 standard deviations
// use exponential rejection sampling, where inverse-CDF precision runs out.
// The result is nudged strictly inside the interval.
double trunc_normal_sample(double mean, double sd, double lo, double hi, Rng& rng);

// Gibbs update of the cut points given latent values and ratings:
// gamma_k ~ U( max{z_r : y_r = k}, min{z_r : y_r > k} ). An empty lower set
// falls back to the just-updated gamma_{k-1} (gamma_1 - 1 when k = 1); an
// empty upper set to the current gamma_{k+1} (gamma_{K-1} + 1 when k = K-1);
// the fallbacks preserve strict ordering.
CutPoints update_cutpoints(const Eigen::VectorXd& zs, const std::vector<int>& y,
                           const CutPoints& gamma, Rng& rng);

// Sequential Gibbs sweep over the latent vector. Site r is drawn from
// N(c_r, 1/Lambda_rr) truncated to its rating's interval, with
// c_r = mu_r - (1/Lambda_rr) sum_{s != r} Lambda_rs (z_s - mu_s),
// conditioning on the latest values of every other site. A running image
// v = Lambda (z - mu) makes each site O(n). Sites are visited in ascending
// index order unless `order` supplies a permutation of 0..n-1 to follow
// instead. Throws std::runtime_error if a diagonal precision entry is not
// positive.
void update_latent(Eigen::VectorXd& zs, const std::vector<int>& y, const CutPoints& gamma,
                   const Eigen::MatrixXd& precision, const Eigen::VectorXd& mu, Rng& rng,
                   const std::vector<int>* order = nullptr);

// P(Y = k) when the latent response is N(mean, 1):
// Phi(gamma_k - mean) - Phi(gamma_{k-1} - mean).
double ordinal_level_prob(int k, double mean, const CutPoints& gamma);

// The per-observation ordinal likelihood given regression covariates and the
// spatial component: ordinal_level_prob of y_r at mean x_r'beta + ztilde_r.
double pointwise_likelihood(int y_r, const Eigen::VectorXd& x_r, const Eigen::VectorXd& beta,
                            double ztilde_r, const CutPoints& gamma);

}  // namespace luf
