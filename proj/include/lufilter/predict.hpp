#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "lufilter/dataset.hpp"
#include "lufilter/geometry.hpp"
#include "lufilter/mcmc.hpp"

namespace luf {

// Locations at which the latent surface is predicted, each assigned to a
// land-use category (normally by nearest parcel). `ids` are output labels
// only; empty means "label by index".
struct PredictionGrid {
  std::vector<long> ids;
  std::vector<Location> locations;
  std::vector<int> categories;  // 1..Q, aligned with locations

  int G() const { return static_cast<int>(locations.size()); }

  // G x Q incidence of prediction points onto categories.
  Eigen::MatrixXd M_bar(int q_total) const;

  // Throws std::invalid_argument on size mismatches or categories outside
  // 1..q_total. An empty grid is legal (predictions are then empty).
  void validate(int q_total) const;
};

// The parameter state of one posterior draw, as the predictive equations
// consume it. Hand-constructible for tests; draw_at extracts one from a
// chain's stored draws.
struct PosteriorDraw {
  Eigen::VectorXd beta;   // p, empty when the dataset has no covariates
  Eigen::VectorXd delta;  // Q category shifts (the sampler keeps the first at 0)
  Eigen::VectorXd zstar;  // n latent responses
  CovParams theta = FilterCovParams{};
};

PosteriorDraw draw_at(const PosteriorDraws& draws, int b);

// Conditional Gaussian moments of the latent surface at the grid given one
// posterior draw:
//   mu    = Mbar delta + C R(theta)^{-1} (zstar - X beta - M* delta)
//   Sigma = S_grid    - C R(theta)^{-1} C'
// where C is the constrained cross-covariance between grid points and
// ratings, S_grid the constrained covariance among grid points, and R(theta)
// the observation correlation matrix. The surface itself carries no
// independent noise, so diag(S_grid) is each point's spatial variance
// proportion (filtering) or 1 - kappa (stationary).
struct PredictiveMoments {
  Eigen::VectorXd mu;          // G
  Eigen::VectorXd sigma_diag;  // G, the diagonal of Sigma
  Eigen::MatrixXd sigma;       // G x G; left 0x0 when diagonal_only
};

// diagonal_only skips the G x G covariance (sigma_diag is always filled),
// bounding memory on large grids. Grid ids, when present, must not collide
// with observed location ids.
PredictiveMoments predictive_moments(const PosteriorDraw& draw, const RatingsDataset& ds,
                                     const PredictionGrid& grid, bool diagonal_only = false);

// Pointwise posterior mean of the latent surface: the average over draws of
// the conditional means mu^[b]. The conditional covariance is never sampled;
// the surface is a summary of location, not a predictive draw.
struct LatentSurface {
  Eigen::VectorXd mean;        // G
  Eigen::MatrixXd draw_means;  // B x G per-draw conditional means; kept on request
};

struct SurfaceConfig {
  int block_size = 2048;        // grid points per cross-covariance block
  int n_workers = 0;            // 0 = hardware concurrency; draws are the tasks
  bool keep_draw_means = false;  // retain the B x G matrix in the result

  void validate() const;
};

// Draws are independent tasks; each writes its own slot and the final
// average reduces serially in draw order, so the result is independent of
// n_workers. Cross-covariances are computed in grid blocks of block_size
// rows to bound memory on fine grids.
LatentSurface posterior_mean_surface(const PosteriorDraws& draws, const RatingsDataset& ds,
                                     const PredictionGrid& grid, const SurfaceConfig& cfg = {});

// Widely applicable information criterion from the pointwise ordinal
// likelihoods p(Y_r | surface draw b):
//   lppd   = sum_r log mean_b p_rb
//   p_waic = sum_r var_b log p_rb   (sample variance over draws)
//   waic   = -2 (lppd - p_waic)
// The latent surface at the observed locations is regenerated per draw as a
// post-processing step: a sample from N(mu^[b], Sigma^[b]) over the distinct
// rated locations, seeded independently per draw so results do not depend on
// the worker schedule.
struct WaicConfig {
  long thin = 1;            // keep every thin-th stored draw
  std::uint64_t seed = 1;   // surface-regeneration noise
  int n_workers = 0;        // 0 = hardware concurrency

  void validate() const;
};

struct WaicResult {
  double waic = 0.0;
  double lppd = 0.0;
  double p_waic = 0.0;
  Eigen::VectorXd lppd_pointwise;    // n: log mean_b p_rb
  Eigen::VectorXd p_waic_pointwise;  // n: var_b log p_rb
  int n_draws_used = 0;
  long floored = 0;  // pointwise mean likelihoods clamped at the 1e-300 floor
};

WaicResult waic(const PosteriorDraws& draws, const RatingsDataset& ds, const WaicConfig& cfg = {});

// Prediction quality against a known truth: both vectors are standardized
// (mean 0, standard deviation 1) before the mean absolute error, so scale
// and location of either side do not matter; pearson is the plain
// correlation. Lengths must match, be at least 2, and both sides need
// nonzero variance.
struct PredictionScore {
  double mae = 0.0;
  double pearson = 0.0;
};

PredictionScore evaluate_predictions(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth);

}  // namespace luf
