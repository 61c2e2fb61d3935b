#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "lufilter/covariance.hpp"
#include "lufilter/dataset.hpp"
#include "lufilter/mcmc.hpp"
#include "lufilter/predict.hpp"

namespace luf {

// Quasi-Newton settings for the approximate-posterior maximization. The
// optimizer works on the transformed (log-positive) coordinates; gradients
// are central finite differences with step fd_step. A run stops when the
// gradient norm drops below grad_tol or a step is shorter than step_tol;
// hitting max_iter flags the result non-converged. n_starts independent
// runs begin at the given init plus N(0, jitter_sd^2 I) perturbations
// (the first start is unjittered) and the best posterior value wins.
struct OptConfig {
  int max_iter = 200;
  double grad_tol = 1e-5;
  double step_tol = 1e-8;
  double fd_step = 1e-5;
  int n_starts = 3;
  double jitter_sd = 0.5;
  std::uint64_t seed = 1;
  int n_workers = 0;  // starts run concurrently; 0 = one per hardware thread

  void validate() const;  // throws std::invalid_argument
};

// Outcome of maximizing the approximate marginal posterior over the
// covariance parameters. iterations / grad_norm / converged describe the
// winning start. y_mean is the grand mean removed from the ratings before
// fitting; predictions subtract the same constant.
struct MapFitResult {
  CovParams theta_hat;
  double log_posterior = 0.0;
  int iterations = 0;
  double grad_norm = 0.0;
  bool converged = false;
  double y_mean = 0.0;
  int best_start = 0;
};

// Log density of the Gaussian working model with beta and delta integrated
// out against their priors, plus the covariance-parameter log prior:
//   log N(y_c; 0, X S_b X' + M* S_d M*' + H Sigma(theta) H' + D)
//     + log_prior(theta),
// where S_b = beta_sd^2 I, S_d = delta_sd^2 I, Sigma(theta) is the
// unconstrained filtered covariance between sites and D holds the raw noise
// variances (sigma2 is a free parameter here, unlike the identified ordinal
// model; the stationary baseline keeps its unit-variance correlation form).
// Covariance factorization failure warns and returns -infinity.
double marginal_loglik(const Eigen::VectorXd& y_centered, const RatingsDataset& ds,
                       const CovParams& theta, const Priors& priors);

// Maximizes marginal_loglik(centered ratings, ds, theta, priors) over theta
// by BFGS with backtracking line search, multi-start as configured. init
// fixes the model kind, the +infinity decay pins, and Q. The ratings are
// centered by their grand mean internally.
MapFitResult fit_map(const RatingsDataset& ds, const CovParams& init, const Priors& priors,
                     const OptConfig& cfg = {});

// Conditional mean of the latent surface at the grid given the centered
// ratings, with the fitted covariance plugged in and beta = delta = 0 (their
// prior means; the approximate path never estimates them):
//   mu = Sigma(theta_hat)_{grid,sites} H' [H Sigma(theta_hat) H' + D]^{-1} y_c.
// Predictions are on the centered-rating scale (evaluation standardizes, so
// the scale washes out). Requires fit.converged.
Eigen::VectorXd approx_predict(const MapFitResult& fit, const RatingsDataset& ds,
                               const PredictionGrid& grid);

}  // namespace luf
