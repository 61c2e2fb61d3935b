#include "lufilter/approx.hpp"

#include <atomic>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <vector>

#include "lufilter/parallel.hpp"
#include "lufilter/rng.hpp"

namespace luf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Observation-level covariance of the residual under the Gaussian working
// model: V[r,c] = Sigma(theta)[loc_r, loc_c] + nugget(cat_r) 1{r=c}, i.e.
// H Sigma H' + D assembled through the rating->site index instead of the
// dense incidence product.
Eigen::MatrixXd obs_cov_unconstrained(const RatingsDataset& ds, const CovParams& theta,
                                      const Eigen::MatrixXd& site_dists) {
  Eigen::MatrixXd s = spatial_cov_from_dists(site_dists, ds.location_category, theta, false);
  const int n = ds.n();
  bool one_per_site = n == ds.m();
  for (int r = 0; one_per_site && r < n; ++r)
    one_per_site = ds.ratings[static_cast<std::size_t>(r)].loc == r;
  Eigen::MatrixXd v;
  if (one_per_site) {  // H is the identity; skip the indexed expansion
    v = std::move(s);
  } else {
    v.resize(n, n);
    for (int c = 0; c < n; ++c) {
      const int lc = ds.ratings[static_cast<std::size_t>(c)].loc;
      for (int r = 0; r < n; ++r) v(r, c) = s(ds.ratings[static_cast<std::size_t>(r)].loc, lc);
    }
  }
  for (int r = 0; r < n; ++r) v(r, r) += nugget_var(theta, ds.rating_category(r), false);
  return v;
}

// The approximate marginal posterior as a function of theta over fixed data,
// with everything theta-independent precomputed: site distances and the
// prior-induced term X S_b X' + M* S_d M*'. Evaluations are const and
// thread-safe (multi-start runs share one evaluator).
class MarginalEvaluator {
 public:
  MarginalEvaluator(const Eigen::VectorXd& y_centered, const RatingsDataset& ds,
                    const Priors& priors)
      : ds_(ds), priors_(priors), y_c_(y_centered) {
    ds.validate();
    priors.validate();
    if (y_centered.size() != ds.n())
      throw std::invalid_argument("marginal_loglik: response length " +
                                  std::to_string(y_centered.size()) + " != n = " +
                                  std::to_string(ds.n()));
    site_dists_ = pairwise_distances(ds.locations);
    const int n = ds.n();
    prior_base_ = Eigen::MatrixXd::Zero(n, n);
    if (ds.p() > 0) {
      Eigen::MatrixXd x = ds.X();
      prior_base_ = (priors.beta_sd * priors.beta_sd) * (x * x.transpose());
    }
    const double dv = priors.delta_sd * priors.delta_sd;
    for (int c = 0; c < n; ++c)
      for (int r = 0; r < n; ++r)
        if (ds.rating_category(r) == ds.rating_category(c)) prior_base_(r, c) += dv;
  }

  double operator()(const CovParams& theta) const {
    const bool s2_free = kind_of(theta) == ModelKind::filtering;
    const double lp = log_prior(theta, priors_, s2_free);
    if (!std::isfinite(lp)) return kNegInf;
    Eigen::MatrixXd v = obs_cov_unconstrained(ds_, theta, site_dists_);
    v += prior_base_;
    try {
      SpdFactor f = chol_spd(v, "approximate marginal covariance");
      return mvn_logpdf_centered(y_c_, f) + lp;
    } catch (const std::runtime_error& e) {
      if (warnings_.fetch_add(1) < 3)
        std::cerr << "[fit_map] warning: " << e.what() << "; treating density as -inf\n";
      return kNegInf;
    }
  }

  const Eigen::MatrixXd& site_dists() const { return site_dists_; }

 private:
  const RatingsDataset& ds_;
  Priors priors_;
  Eigen::VectorXd y_c_;
  Eigen::MatrixXd site_dists_;
  Eigen::MatrixXd prior_base_;
  mutable std::atomic<long> warnings_{0};
};

struct StartOutcome {
  Eigen::VectorXd t;
  double value = kNegInf;
  int iterations = 0;
  double grad_norm = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
};

// BFGS ascent on f(t) = evaluator(untransform(t)) with central-difference
// gradients and Armijo backtracking, implemented as descent on -f.
StartOutcome maximize_from(const MarginalEvaluator& ev, const ThetaMap& map, Eigen::VectorXd t,
                           const OptConfig& cfg) {
  const int dim = map.dim();
  // Trial points whose exp() leaves the support (overflow to +inf from a
  // long line-search jump) count as density zero rather than erroring out.
  auto h = [&](const Eigen::VectorXd& tt) {
    try {
      return -ev(map.untransform(tt));
    } catch (const std::invalid_argument&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  auto grad_h = [&](const Eigen::VectorXd& tt, Eigen::VectorXd& g) {
    for (int i = 0; i < dim; ++i) {
      Eigen::VectorXd tp = tt, tm = tt;
      tp(i) += cfg.fd_step;
      tm(i) -= cfg.fd_step;
      g(i) = (h(tp) - h(tm)) / (2.0 * cfg.fd_step);
    }
    return g.allFinite();
  };

  StartOutcome out;
  out.t = t;
  double ht = h(t);
  if (!std::isfinite(ht)) {
    out.value = -ht;
    return out;  // infeasible start; let another start win
  }
  Eigen::VectorXd g(dim);
  if (!grad_h(t, g)) {
    out.value = -ht;
    return out;
  }
  Eigen::MatrixXd b = Eigen::MatrixXd::Identity(dim, dim);  // inverse-Hessian approximation

  constexpr double kArmijo = 1e-4;
  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    out.grad_norm = g.norm();
    if (out.grad_norm < cfg.grad_tol) {
      out.converged = true;
      break;
    }
    Eigen::VectorXd d = -(b * g);
    double slope = g.dot(d);
    if (!(slope < 0.0)) {  // curvature gone stale; restart from steepest descent
      b.setIdentity();
      d = -g;
      slope = g.dot(d);
    }
    // On the log scale a move of 20 already rescales a parameter by e^20;
    // longer proposals only burn backtracking steps (or overflow exp), so
    // clip the direction, which preserves descent.
    constexpr double kMaxStep = 20.0;
    const double dn = d.norm();
    if (dn > kMaxStep) {
      d *= kMaxStep / dn;
      slope *= kMaxStep / dn;
    }
    double alpha = 1.0;
    double h_new = h(t + alpha * d);
    int backtracks = 0;
    while (!(h_new <= ht + kArmijo * alpha * slope) && backtracks < 60) {
      alpha *= 0.5;
      h_new = h(t + alpha * d);
      ++backtracks;
    }
    if (backtracks >= 60) {  // no acceptable step this short: stationary within noise
      out.converged = true;
      break;
    }
    Eigen::VectorXd step = alpha * d;
    Eigen::VectorXd t_new = t + step;
    Eigen::VectorXd g_new(dim);
    if (!grad_h(t_new, g_new)) {
      t = t_new;
      ht = h_new;
      out.iterations = iter + 1;
      break;  // gradient left the finite region; report best-so-far, non-converged
    }
    Eigen::VectorXd yv = g_new - g;
    const double sy = step.dot(yv);
    if (sy > 1e-12 * step.norm() * yv.norm()) {
      const double rho = 1.0 / sy;
      Eigen::MatrixXd i_sy =
          Eigen::MatrixXd::Identity(dim, dim) - rho * step * yv.transpose();
      b = i_sy * b * i_sy.transpose() + rho * step * step.transpose();
    }
    t = t_new;
    ht = h_new;
    g = g_new;
    out.iterations = iter + 1;
    out.grad_norm = g.norm();
    if (step.norm() < cfg.step_tol) {
      out.converged = true;
      break;
    }
  }
  out.t = t;
  out.value = -ht;
  return out;
}

}  // namespace

void OptConfig::validate() const {
  if (max_iter < 1) throw std::invalid_argument("OptConfig: max_iter must be >= 1");
  if (!(grad_tol > 0.0)) throw std::invalid_argument("OptConfig: grad_tol must be > 0");
  if (!(step_tol > 0.0)) throw std::invalid_argument("OptConfig: step_tol must be > 0");
  if (!(fd_step > 0.0)) throw std::invalid_argument("OptConfig: fd_step must be > 0");
  if (n_starts < 1) throw std::invalid_argument("OptConfig: n_starts must be >= 1");
  if (!(jitter_sd >= 0.0)) throw std::invalid_argument("OptConfig: jitter_sd must be >= 0");
  if (n_workers < 0) throw std::invalid_argument("OptConfig: n_workers must be >= 0");
}

double marginal_loglik(const Eigen::VectorXd& y_centered, const RatingsDataset& ds,
                       const CovParams& theta, const Priors& priors) {
  validate(theta);
  if (kind_of(theta) == ModelKind::filtering &&
      std::get<FilterCovParams>(theta).Q() != ds.Q)
    throw std::invalid_argument("marginal_loglik: theta has Q = " +
                                std::to_string(std::get<FilterCovParams>(theta).Q()) +
                                " but the dataset has Q = " + std::to_string(ds.Q));
  return MarginalEvaluator(y_centered, ds, priors)(theta);
}

MapFitResult fit_map(const RatingsDataset& ds, const CovParams& init, const Priors& priors,
                     const OptConfig& cfg) {
  cfg.validate();
  validate(init);
  if (kind_of(init) == ModelKind::filtering && std::get<FilterCovParams>(init).Q() != ds.Q)
    throw std::invalid_argument("fit_map: init has Q = " +
                                std::to_string(std::get<FilterCovParams>(init).Q()) +
                                " but the dataset has Q = " + std::to_string(ds.Q));

  auto [y_c, y_mean] = ds.centered_ratings();
  MarginalEvaluator ev(y_c, ds, priors);
  const bool s2_free = kind_of(init) == ModelKind::filtering;
  const ThetaMap map = ThetaMap::for_params(init, s2_free);

  // Jitters are drawn up front so results do not depend on scheduling.
  const Eigen::VectorXd t0 = map.transformed(init);
  std::vector<Eigen::VectorXd> starts(static_cast<std::size_t>(cfg.n_starts), t0);
  Rng rng(cfg.seed);
  for (int s = 1; s < cfg.n_starts; ++s)
    for (int i = 0; i < map.dim(); ++i) starts[static_cast<std::size_t>(s)](i) += cfg.jitter_sd * rng.normal();

  std::vector<StartOutcome> outcomes(static_cast<std::size_t>(cfg.n_starts));
  parallel_for(cfg.n_starts, cfg.n_workers, [&](int s) {
    outcomes[static_cast<std::size_t>(s)] = maximize_from(ev, map, starts[static_cast<std::size_t>(s)], cfg);
  });

  int best = 0;
  for (int s = 1; s < cfg.n_starts; ++s)
    if (outcomes[static_cast<std::size_t>(s)].value > outcomes[static_cast<std::size_t>(best)].value) best = s;
  const StartOutcome& win = outcomes[static_cast<std::size_t>(best)];
  if (!std::isfinite(win.value))
    throw std::runtime_error("fit_map: no start produced a finite posterior value");

  MapFitResult fit;
  fit.theta_hat = map.untransform(win.t);
  fit.log_posterior = win.value;
  fit.iterations = win.iterations;
  fit.grad_norm = win.grad_norm;
  fit.converged = win.converged;
  fit.y_mean = y_mean;
  fit.best_start = best;
  return fit;
}

Eigen::VectorXd approx_predict(const MapFitResult& fit, const RatingsDataset& ds,
                               const PredictionGrid& grid) {
  if (!fit.converged)
    throw std::invalid_argument("approx_predict: fit did not converge; refusing to predict");
  ds.validate();
  grid.validate(ds.Q);
  if (kind_of(fit.theta_hat) == ModelKind::filtering &&
      std::get<FilterCovParams>(fit.theta_hat).Q() != ds.Q)
    throw std::invalid_argument("approx_predict: theta_hat and dataset disagree on Q");
  if (grid.G() == 0) return Eigen::VectorXd();

  const Eigen::VectorXd y_c = ds.y_vec().array() - fit.y_mean;
  Eigen::MatrixXd v = obs_cov_unconstrained(ds, fit.theta_hat, pairwise_distances(ds.locations));
  SpdFactor f = chol_spd(v, "approx_predict residual covariance");

  // Cross-covariance grid x sites, spread over ratings through the
  // rating->site index (columns of H' select site columns).
  Eigen::MatrixXd c_sites =
      spatial_cross_cov_matrix(grid.locations, grid.categories, ds.locations,
                               ds.location_category, fit.theta_hat, false);
  Eigen::MatrixXd c_obs(grid.G(), ds.n());
  for (int r = 0; r < ds.n(); ++r)
    c_obs.col(r) = c_sites.col(ds.ratings[static_cast<std::size_t>(r)].loc);

  return c_obs * f.llt.solve(y_c);
}

}  // namespace luf
