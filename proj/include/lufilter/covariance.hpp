#pragma once

#include <Eigen/Dense>
#include <string>
#include <variant>
#include <vector>

#include "lufilter/dataset.hpp"
#include "lufilter/geometry.hpp"
#include "lufilter/rng.hpp"

namespace luf {

// Parameters of the land-use filtered latent process. Row q of the lower-
// triangular A holds the coregionalization weights a_q of category q; phi(q)
// is the exponential decay rate of latent component q, with +infinity
// encoding a spatially independent component (treated as a sentinel — the
// infinity never enters arithmetic, so no 0*inf NaNs); sigma2 are per-
// category noise variances (identically 1 in the identified ordinal model,
// free in the Gaussian approximation); delta are per-category mean shifts
// with delta(0) pinned to zero for identifiability.
struct FilterCovParams {
  Eigen::MatrixXd A;
  Eigen::VectorXd phi;
  Eigen::VectorXd sigma2;
  Eigen::VectorXd delta;

  int Q() const { return static_cast<int>(A.rows()); }
  // ||a_q||^2 + sigma2_q for 1-based category q (the per-site total variance)
  double total_var(int q) const;
  void validate() const;  // throws std::invalid_argument on any violation

  // A = diag(0.5), phi = phi0 everywhere, sigma2 = 1, delta = 0.
  static FilterCovParams diagonal(int q, double a_diag = 0.5, double phi0 = 1.0);
};

// Stationary comparator: correlation (1-kappa) exp(-phi d) + kappa 1{s=s'}
// with kappa = 1/(1+tau2).
struct StationaryCovParams {
  double phi = 1.0;
  double tau2 = 1.0;

  double kappa() const { return 1.0 / (1.0 + tau2); }
  void validate() const;
};

using CovParams = std::variant<FilterCovParams, StationaryCovParams>;

enum class ModelKind { filtering, stationary };

ModelKind kind_of(const CovParams& p);
void validate(const CovParams& p);
// Mean-shift vector of length q_total (stationary carries none -> zeros).
Eigen::VectorXd delta_of(const CovParams& p, int q_total);

// ---- scalar covariance operations (categories are 1-based) ------------------

// exp(-phi d); phi = +infinity gives the independence limit 1{d=0}.
// d < 0 or phi <= 0 throw std::invalid_argument.
double exp_corr(double d, double phi);

// a_{g(s)}' Gamma(||s-s'||) a_{g(s')} with Gamma = diag(rho_q): the land-use
// filtered covariance of the latent surface.
double filtered_cov(const Location& s, const Location& sp, int g_s, int g_sp,
                    const FilterCovParams& p);

// filtered_cov scaled to unit per-site total variance:
// filtered / sqrt(||a_{g(s)}||^2 + sigma2_{g(s)}) sqrt(||a_{g(s')}||^2 + sigma2_{g(s')}).
double constrained_cov(const Location& s, const Location& sp, int g_s, int g_sp,
                       const FilterCovParams& p);

// sigma2_q / (||a_q||^2 + sigma2_q): the noise share of the unit total variance.
double constrained_nugget(int q, const FilterCovParams& p);

// ||a_q||^2 / (||a_q||^2 + 1): variance proportion due to spatial structure
// (the sigma2 = 1 regime of the identified model).
double spatial_variance_proportion(int q, const Eigen::MatrixXd& a);

// Q x Q matrix C(s,s') with entry (q,q') the constrained cross-covariance
// between component process q at s and q' at s'. Entries touching component
// 1 are scalar multiples of rho_1 alone (row 1 of A has a single weight).
Eigen::MatrixXd cross_corr_block(const Location& s, const Location& sp,
                                 const FilterCovParams& p);

// Correlation of the no-replication variant (no independent errors):
// filtered_cov / (||a_{g(s)}|| ||a_{g(s')}||); unit at s=s' within category.
double noreplication_corr(const Location& s, const Location& sp, int g_s, int g_sp,
                          const FilterCovParams& p);

// ---- model-generic covariance (filtering or stationary) ---------------------

// Spatial covariance between categorized sites. constrained=true gives the
// unit-total-variance scaling used by the ordinal model; constrained=false
// the raw filtered covariance used by the Gaussian approximation. For the
// stationary model both equal (1-kappa) exp(-phi d).
double spatial_cov(const CovParams& p, const Location& a, int cat_a, const Location& b,
                   int cat_b, bool constrained);

// The matching independent-noise variance: constrained_nugget or sigma2 for
// filtering (by `constrained`), kappa for stationary.
double nugget_var(const CovParams& p, int cat, bool constrained);

Eigen::MatrixXd spatial_cov_matrix(const std::vector<Location>& locs,
                                   const std::vector<int>& cats, const CovParams& p,
                                   bool constrained);

// Same matrix from a precomputed distance matrix, evaluating each component
// kernel on the whole array at once. The samplers rebuild the covariance at
// every proposed theta over fixed sites, so they cache the distances and come
// through here.
Eigen::MatrixXd spatial_cov_from_dists(const Eigen::MatrixXd& dists, const std::vector<int>& cats,
                                       const CovParams& p, bool constrained);

Eigen::MatrixXd spatial_cross_cov_matrix(const std::vector<Location>& rows_locs,
                                         const std::vector<int>& rows_cats,
                                         const std::vector<Location>& cols_locs,
                                         const std::vector<int>& cols_cats, const CovParams& p,
                                         bool constrained);

// Cross-covariance from a precomputed rows x cols distance matrix, kernels
// evaluated on the whole array at once. Prediction sweeps rebuild the
// cross-covariance at every posterior draw over fixed point sets, so they
// cache the distances and come through here.
Eigen::MatrixXd spatial_cross_cov_from_dists(const Eigen::MatrixXd& dists,
                                             const std::vector<int>& rows_cats,
                                             const std::vector<int>& cols_cats, const CovParams& p,
                                             bool constrained);

// R(theta) over ratings: H Sigma~ H' + D~ — unit diagonal by construction
// (ratings at one location share the spatial covariance, nuggets are
// independent). Stationary: (1-kappa) H R_m(phi) H' + kappa I. The overload
// taking site_dists skips recomputing pairwise distances.
Eigen::MatrixXd observation_corr_matrix(const RatingsDataset& ds, const CovParams& p);
Eigen::MatrixXd observation_corr_matrix(const RatingsDataset& ds, const CovParams& p,
                                        const Eigen::MatrixXd& site_dists);

// The stationary baseline under its own name.
Eigen::MatrixXd stationary_corr_matrix(const RatingsDataset& ds, const StationaryCovParams& p);

// ---- factorization helpers ---------------------------------------------------

// Cholesky with the jitter ladder: plain, +1e-10 I, +1e-8 I, then throw
// std::runtime_error naming `context`. Exponential kernels at near-duplicate
// sites are routinely ill-conditioned; the ladder absorbs that without
// masking genuinely broken matrices.
struct SpdFactor {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;

  double log_det() const;  // of the factored (jittered) matrix
};

SpdFactor chol_spd(const Eigen::MatrixXd& a, const std::string& context);

// log N(x | 0, A) given the factor of A.
double mvn_logpdf_centered(const Eigen::VectorXd& x, const SpdFactor& f);

// One draw from N(mean, A) given the factor of A: mean + L xi, xi ~ N(0, I).
Eigen::VectorXd mvn_draw(const Eigen::VectorXd& mean, const SpdFactor& f, Rng& rng);

// ---- free-parameter coordinates ---------------------------------------------

// Bijection between covariance parameters and the free-coordinate vector the
// samplers and optimizers work in. Positive parameters (diag A, finite phi,
// sigma2 when free, stationary phi/tau2) travel on the log scale; strictly-
// lower A entries travel untransformed; delta, infinite phis and fixed
// sigma2 are not coordinates. Coordinate order — filtering: lower triangle
// of A row-major, then finite phis, then (if free) sigma2; stationary:
// phi, tau2.
class ThetaMap {
 public:
  ThetaMap() = default;
  static ThetaMap filtering(const FilterCovParams& prototype, bool sigma2_free);
  static ThetaMap stationary(const StationaryCovParams& prototype);
  static ThetaMap for_params(const CovParams& prototype, bool sigma2_free);

  int dim() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }
  ModelKind kind() const { return kind_; }
  bool sigma2_free() const { return sigma2_free_; }
  const CovParams& prototype() const { return proto_; }

  Eigen::VectorXd transformed(const CovParams& p) const;
  CovParams untransform(const Eigen::VectorXd& t) const;
  Eigen::VectorXd natural(const CovParams& p) const;
  CovParams from_natural(const Eigen::VectorXd& v) const;

  // log |d natural / d transformed| = sum of the log-scale coordinates.
  double log_jacobian(const Eigen::VectorXd& t) const;

 private:
  ModelKind kind_ = ModelKind::filtering;
  bool sigma2_free_ = false;
  CovParams proto_;
  std::vector<bool> log_scale_;
  std::vector<std::string> names_;
};

}  // namespace luf
