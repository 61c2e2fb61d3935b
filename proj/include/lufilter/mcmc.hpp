#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lufilter/covariance.hpp"
#include "lufilter/dataset.hpp"
#include "lufilter/ordinal.hpp"
#include "lufilter/rng.hpp"

namespace luf {

// Independent priors for the sampled blocks: zero-mean normals on the
// regression coefficients and category shifts, half-Cauchy on every
// positive covariance parameter, a wide normal on the off-diagonal
// loadings, flat on the cutpoints.
struct Priors {
  double beta_sd = 1.0;
  double delta_sd = 1.0;
  double a_offdiag_sd = 10.0;     // N(0, 100) on off-diagonal loadings
  double halfcauchy_scale = 1.0;  // diag(A), phi, stationary phi and tau2

  void validate() const;  // all scales positive and finite
};

struct ChainConfig {
  long n_iter = 10000;   // main-phase iterations
  long burn_in = 5000;   // leading main-phase iterations discarded
  long thin = 1;         // keep every thin-th post-burn-in draw
  long pilot_iter = 10000;       // adaptation run with a diagonal proposal
  double proposal_scale = 0.25;  // multiplier on the pilot draw covariance
  std::uint64_t seed = 1;
  ModelKind model_kind = ModelKind::filtering;
  // Latent components whose range parameter is pinned at +infinity (a
  // pure-nugget component that never converges when sampled); 1-based.
  std::vector<int> inf_phi_components;
  bool randomize_sweep = false;  // permute the latent update order each sweep
  bool verbose = false;          // progress lines on standard error

  void validate() const;
};

// Post-burn-in, thinned draws: one row per retained iteration. Covariance
// parameters are stored on the natural scale in ThetaMap coordinate order;
// `prototype` carries the structural choices (Q, fixed sigma2, infinite-phi
// pattern) needed to rebuild full parameter sets from the rows.
struct PosteriorDraws {
  ModelKind kind = ModelKind::filtering;
  CovParams prototype = FilterCovParams{};
  bool sigma2_free = false;  // whether theta rows carry sigma2 coordinates
  std::vector<std::string> theta_names;
  std::vector<std::string> beta_names;

  Eigen::MatrixXd beta;   // B x p
  Eigen::MatrixXd delta;  // B x Q, first column identically 0
  Eigen::MatrixXd theta;  // B x dim, natural scale
  Eigen::MatrixXd gamma;  // B x (K-1)
  Eigen::MatrixXd zstar;  // B x n latent responses

  long proposals = 0;  // main phase
  long accepted = 0;
  long pilot_proposals = 0;
  long pilot_accepted = 0;
  long chol_failures = 0;  // across pilot and main phases
  double runtime_seconds = 0.0;

  int n_draws() const { return static_cast<int>(theta.rows()); }
  double acceptance_rate() const {
    return proposals > 0 ? static_cast<double>(accepted) / static_cast<double>(proposals) : 0.0;
  }
  // Covariance parameters of draw b, with the draw's delta installed.
  CovParams params_at(int b) const;
  CutPoints cutpoints_at(int b) const;
};

// Log prior density of the covariance parameters (the Gibbs blocks' normal
// priors live in gibbs_regression). Half-Cauchy on diag(A), each finite phi,
// and the stationary (phi, tau2); N(0, a_offdiag_sd^2) on the strict lower
// triangle of A; sigma2 enters (half-Cauchy) only when sigma2_free, matching
// ThetaMap's coordinate choice. Returns -infinity outside the support.
double log_prior(const CovParams& theta, const Priors& priors, bool sigma2_free = false);

// Joint conjugate draw of (beta, delta_2..Q) given the latent responses:
// with W = [X | M*_{.,2..Q}] and prior precision P,
//   V = (W' R^-1 W + P)^-1,  m = V W' R^-1 z*,  draw ~ N(m, V).
// delta_1 stays fixed at 0. Returns (beta, delta) with delta of length Q.
std::pair<Eigen::VectorXd, Eigen::VectorXd> gibbs_regression(
    const Eigen::VectorXd& zs, const SpdFactor& R_factor, const Eigen::MatrixXd& X,
    const Eigen::MatrixXd& M_star, const Priors& priors, Rng& rng);

struct MhResult {
  CovParams theta = FilterCovParams{};  // proposal if accepted, else the input
  bool accepted = false;
  bool chol_failed = false;  // proposed R(theta') was not factorizable
  double log_alpha = 0.0;    // log acceptance ratio of the proposed move
  // Factor of R(theta') when the move was accepted; empty otherwise so the
  // caller keeps reusing its current factor.
  std::optional<SpdFactor> factor;
};

// One Metropolis-Hastings update of the covariance parameters. The proposal
// is multivariate normal on the transformed scale (log for positive-support
// coordinates), centered at the current point, with covariance proposal_cov;
// the acceptance ratio therefore carries the Jacobian of the transform:
//   log alpha = [loglik + logprior + logjac](theta') - [...](theta).
// The likelihood is N(zs; mu, R(theta)) with mu held fixed, and the current
// delta is carried into the proposal unchanged (it is not part of theta).
// A Cholesky failure on the proposed R counts as a rejection and sets
// chol_failed. Passing the current factor of R(theta) (and the site distance
// matrix) skips recomputing them; both must match `theta` and `ds`.
MhResult mh_theta(const CovParams& theta, const Eigen::VectorXd& zs, const Eigen::VectorXd& mu,
                  const RatingsDataset& ds, const Priors& priors, const ThetaMap& map,
                  const Eigen::MatrixXd& proposal_cov, Rng& rng,
                  const SpdFactor* current_factor = nullptr,
                  const Eigen::MatrixXd* site_dists = nullptr);

// Proposal covariance from pilot draws on the transformed scale:
// scale * empirical covariance + 1e-8 I (the ridge keeps degenerate pilots
// positive definite). Fewer than 10,000 rows draws a warning on standard
// error — the adaptation heuristic is calibrated for at least that many.
Eigen::MatrixXd tune_proposal(const Eigen::MatrixXd& pilot_draws, double scale = 0.25);

// The full sampler: cutpoints -> latent sweep -> (beta, delta) Gibbs ->
// theta Metropolis-Hastings, after a pilot phase with a diagonal proposal
// whose draws feed tune_proposal. R(theta) and its inverse are refreshed
// only when a theta move is accepted. Aborts (std::runtime_error) when more
// than 1% of proposals fail to factor; warns when the tuned acceptance rate
// leaves [0.05, 0.6]. The overload without an Rng seeds one from cfg.seed;
// a fixed seed reproduces the draw sequence bit for bit.
PosteriorDraws run_chain(const RatingsDataset& ds, const ChainConfig& cfg, const Priors& priors,
                         Rng& rng);
PosteriorDraws run_chain(const RatingsDataset& ds, const ChainConfig& cfg, const Priors& priors);

}  // namespace luf
