#include "lufilter/mcmc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>

#include "lufilter/stats.hpp"

namespace luf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool is_positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

// Median over the strictly-upper-triangle entries of a distance matrix; 1
// when there are no pairs or every pair coincides. Feeds the range
// initialization phi = -log(0.05) / median distance.
double median_pair_distance(const Eigen::MatrixXd& dists) {
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(dists.rows()) * (dists.rows() > 0 ? dists.rows() - 1 : 0) / 2);
  for (Eigen::Index i = 0; i < dists.rows(); ++i)
    for (Eigen::Index j = i + 1; j < dists.cols(); ++j) d.push_back(dists(i, j));
  if (d.empty()) return 1.0;
  const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  const double med = *mid;
  return med > 0.0 ? med : 1.0;
}

}  // namespace

void Priors::validate() const {
  if (!is_positive_finite(beta_sd) || !is_positive_finite(delta_sd) ||
      !is_positive_finite(a_offdiag_sd) || !is_positive_finite(halfcauchy_scale))
    throw std::invalid_argument("Priors: every scale must be positive and finite");
}

void ChainConfig::validate() const {
  if (n_iter < 0) throw std::invalid_argument("ChainConfig: n_iter must be nonnegative");
  if (burn_in < 0 || burn_in > n_iter)
    throw std::invalid_argument("ChainConfig: burn_in must lie in [0, n_iter]");
  if (n_iter > 0 && burn_in >= n_iter)
    throw std::invalid_argument("ChainConfig: burn_in must be smaller than n_iter");
  if (thin < 1) throw std::invalid_argument("ChainConfig: thin must be at least 1");
  if (pilot_iter < 0) throw std::invalid_argument("ChainConfig: pilot_iter must be nonnegative");
  if (!is_positive_finite(proposal_scale))
    throw std::invalid_argument("ChainConfig: proposal_scale must be positive and finite");
  if (model_kind == ModelKind::stationary && !inf_phi_components.empty())
    throw std::invalid_argument("ChainConfig: the stationary model has no phi components to pin");
  std::vector<int> comps = inf_phi_components;
  std::sort(comps.begin(), comps.end());
  if (std::adjacent_find(comps.begin(), comps.end()) != comps.end())
    throw std::invalid_argument("ChainConfig: duplicate entry in inf_phi_components");
  for (int c : comps)
    if (c < 1) throw std::invalid_argument("ChainConfig: inf_phi_components entries are 1-based");
}

CovParams PosteriorDraws::params_at(int b) const {
  if (b < 0 || b >= n_draws()) throw std::invalid_argument("params_at: draw index out of range");
  const ThetaMap map = ThetaMap::for_params(prototype, sigma2_free);
  CovParams out = map.from_natural(theta.row(b).transpose());
  if (auto* f = std::get_if<FilterCovParams>(&out)) f->delta = delta.row(b).transpose();
  return out;
}

CutPoints PosteriorDraws::cutpoints_at(int b) const {
  if (b < 0 || b >= n_draws())
    throw std::invalid_argument("cutpoints_at: draw index out of range");
  CutPoints g;
  g.gamma = gamma.row(b).transpose();
  g.validate();
  return g;
}

double log_prior(const CovParams& theta, const Priors& priors, bool sigma2_free) {
  priors.validate();
  if (const auto* f = std::get_if<FilterCovParams>(&theta)) {
    const int q = static_cast<int>(f->A.rows());
    if (q < 1 || f->A.cols() != q || f->phi.size() != q || f->sigma2.size() != q)
      throw std::invalid_argument("log_prior: malformed filtering parameters");
    double acc = 0.0;
    for (int r = 0; r < q; ++r) {
      for (int c = r + 1; c < q; ++c)
        if (f->A(r, c) != 0.0)
          throw std::invalid_argument("log_prior: A must be lower triangular");
      for (int c = 0; c <= r; ++c) {
        const double a = f->A(r, c);
        if (!std::isfinite(a)) return kNegInf;
        if (r == c) {
          if (a <= 0.0) return kNegInf;
          acc += log_half_cauchy(a, priors.halfcauchy_scale);
        } else {
          acc += log_normal_density(a, priors.a_offdiag_sd);
        }
      }
    }
    for (int i = 0; i < q; ++i) {
      const double ph = f->phi(i);
      if (std::isinf(ph) && ph > 0.0) continue;  // pinned, not a parameter
      if (!is_positive_finite(ph)) return kNegInf;
      acc += log_half_cauchy(ph, priors.halfcauchy_scale);
    }
    if (sigma2_free) {
      for (int i = 0; i < q; ++i) {
        const double s2 = f->sigma2(i);
        if (!is_positive_finite(s2)) return kNegInf;
        acc += log_half_cauchy(s2, priors.halfcauchy_scale);
      }
    }
    return acc;
  }
  const auto& st = std::get<StationaryCovParams>(theta);
  if (!is_positive_finite(st.phi) || !is_positive_finite(st.tau2)) return kNegInf;
  return log_half_cauchy(st.phi, priors.halfcauchy_scale) +
         log_half_cauchy(st.tau2, priors.halfcauchy_scale);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> gibbs_regression(
    const Eigen::VectorXd& zs, const SpdFactor& R_factor, const Eigen::MatrixXd& X,
    const Eigen::MatrixXd& M_star, const Priors& priors, Rng& rng) {
  priors.validate();
  const Eigen::Index n = zs.size();
  if (X.rows() != n || M_star.rows() != n)
    throw std::invalid_argument("gibbs_regression: design rows must match the latent vector");
  if (M_star.cols() < 1)
    throw std::invalid_argument("gibbs_regression: M_star needs at least one category column");
  const int p = static_cast<int>(X.cols());
  const int q = static_cast<int>(M_star.cols());
  const int k = p + q - 1;

  Eigen::VectorXd delta = Eigen::VectorXd::Zero(q);
  if (k == 0) return {Eigen::VectorXd(0), delta};

  // W = [X | M*_{.,2..Q}]; the first category's column is dropped because
  // delta_1 is pinned at 0 for identifiability.
  Eigen::MatrixXd w(n, k);
  w.leftCols(p) = X;
  w.rightCols(q - 1) = M_star.rightCols(q - 1);

  const Eigen::MatrixXd riw = R_factor.llt.solve(w);
  Eigen::MatrixXd g = w.transpose() * riw;
  for (int i = 0; i < k; ++i) {
    const double sd = i < p ? priors.beta_sd : priors.delta_sd;
    g(i, i) += 1.0 / (sd * sd);
  }
  const SpdFactor gf = chol_spd(g, "gibbs_regression posterior precision");
  const Eigen::VectorXd m = gf.llt.solve(riw.transpose() * zs);

  // N(m, G^-1): with G = L L', m + L'^-1 xi has exactly that covariance.
  Eigen::VectorXd xi(k);
  for (int i = 0; i < k; ++i) xi(i) = rng.normal();
  const Eigen::VectorXd draw = m + gf.llt.matrixU().solve(xi);

  delta.tail(q - 1) = draw.tail(q - 1);
  return {draw.head(p), delta};
}

namespace {

// log N(zs; mu, R(theta)) + log prior + log Jacobian at the transformed point
// t = map.transformed(theta): the quantity whose differences drive the MH
// accept decision.
double theta_log_target(const CovParams& theta, const Eigen::VectorXd& t,
                        const Eigen::VectorXd& zs, const Eigen::VectorXd& mu,
                        const SpdFactor& factor, const Priors& priors, const ThetaMap& map) {
  const double lp = log_prior(theta, priors, map.sigma2_free());
  if (!std::isfinite(lp)) return kNegInf;
  return mvn_logpdf_centered(zs - mu, factor) + lp + map.log_jacobian(t);
}

}  // namespace

MhResult mh_theta(const CovParams& theta, const Eigen::VectorXd& zs, const Eigen::VectorXd& mu,
                  const RatingsDataset& ds, const Priors& priors, const ThetaMap& map,
                  const Eigen::MatrixXd& proposal_cov, Rng& rng, const SpdFactor* current_factor,
                  const Eigen::MatrixXd* site_dists) {
  if (kind_of(theta) != map.kind())
    throw std::invalid_argument("mh_theta: parameter kind does not match the coordinate map");
  if (zs.size() != mu.size() || zs.size() != ds.n())
    throw std::invalid_argument("mh_theta: latent and mean vectors must match the dataset");
  const int dim = map.dim();
  if (proposal_cov.rows() != dim || proposal_cov.cols() != dim)
    throw std::invalid_argument("mh_theta: proposal covariance has the wrong dimension");
  Eigen::LLT<Eigen::MatrixXd> prop_llt(proposal_cov);
  if (prop_llt.info() != Eigen::Success)
    throw std::invalid_argument("mh_theta: proposal covariance must be positive definite");

  const Eigen::MatrixXd dists =
      site_dists ? Eigen::MatrixXd() : pairwise_distances(ds.locations);
  const Eigen::MatrixXd& d = site_dists ? *site_dists : dists;

  const Eigen::VectorXd t = map.transformed(theta);
  SpdFactor own_factor;
  const SpdFactor* cur = current_factor;
  if (!cur) {
    own_factor = chol_spd(observation_corr_matrix(ds, theta, d), "mh_theta current R");
    cur = &own_factor;
  }
  const double current = theta_log_target(theta, t, zs, mu, *cur, priors, map);

  // Random-walk proposal on the transformed scale; the Jacobian terms in the
  // targets make the chain correct on the natural scale.
  Eigen::VectorXd xi(dim);
  for (int i = 0; i < dim; ++i) xi(i) = rng.normal();
  const Eigen::VectorXd t_prop = t + prop_llt.matrixL() * xi;
  CovParams proposal = map.untransform(t_prop);
  // theta carries no mean parameters: the current category shifts ride along.
  if (auto* f = std::get_if<FilterCovParams>(&proposal))
    f->delta = std::get<FilterCovParams>(theta).delta;

  MhResult out;
  out.theta = theta;
  out.log_alpha = kNegInf;

  SpdFactor prop_factor;
  try {
    prop_factor = chol_spd(observation_corr_matrix(ds, proposal, d), "mh_theta proposed R");
  } catch (const std::runtime_error&) {
    out.chol_failed = true;
    return out;
  }
  const double proposed =
      theta_log_target(proposal, t_prop, zs, mu, prop_factor, priors, map);
  out.log_alpha = proposed - current;
  if (std::log(rng.uniform()) < out.log_alpha) {
    out.accepted = true;
    out.theta = std::move(proposal);
    out.factor = std::move(prop_factor);
  }
  return out;
}

Eigen::MatrixXd tune_proposal(const Eigen::MatrixXd& pilot_draws, double scale) {
  if (!is_positive_finite(scale))
    throw std::invalid_argument("tune_proposal: scale must be positive and finite");
  const Eigen::Index b = pilot_draws.rows();
  const Eigen::Index dim = pilot_draws.cols();
  if (b < 2 || dim < 1)
    throw std::invalid_argument("tune_proposal: need at least two pilot draws");
  if (b < 10000)
    std::cerr << "[mcmc] warning: proposal tuned from " << b
              << " pilot draws; the adaptation heuristic expects at least 10000\n";
  const Eigen::MatrixXd centered = pilot_draws.rowwise() - pilot_draws.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(b - 1);
  // The 1e-8 ridge keeps a degenerate pilot (stuck chain, constant
  // coordinate) from producing a singular proposal.
  return scale * cov + 1e-8 * Eigen::MatrixXd::Identity(dim, dim);
}

namespace {

struct MhCounters {
  long proposals = 0;
  long accepted = 0;
};

}  // namespace

PosteriorDraws run_chain(const RatingsDataset& ds, const ChainConfig& cfg, const Priors& priors,
                         Rng& rng) {
  const auto t_start = std::chrono::steady_clock::now();
  ds.validate();
  cfg.validate();
  priors.validate();
  if (!ds.has_all_levels())
    throw std::invalid_argument("run_chain: every ordinal level 1..K must appear in the data");
  for (int c : cfg.inf_phi_components)
    if (c > ds.Q)
      throw std::invalid_argument("run_chain: inf_phi_components entry exceeds Q");

  const int n = ds.n();
  const int p = ds.p();
  const int q = ds.Q;
  const int k_levels = ds.K;
  const Eigen::MatrixXd x = ds.X();
  const Eigen::MatrixXd m_star = ds.M_star_dense();
  const Eigen::MatrixXd dists = pairwise_distances(ds.locations);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);

  std::vector<int> y(static_cast<std::size_t>(n));
  std::vector<long> level_counts(static_cast<std::size_t>(k_levels), 0);
  for (int r = 0; r < n; ++r) {
    y[static_cast<std::size_t>(r)] = ds.ratings[static_cast<std::size_t>(r)].y;
    ++level_counts[static_cast<std::size_t>(ds.ratings[static_cast<std::size_t>(r)].y - 1)];
  }

  // ---- initialization -------------------------------------------------------
  CutPoints gamma = CutPoints::from_frequencies(level_counts);
  Eigen::VectorXd z(n);
  for (int r = 0; r < n; ++r) {
    const int k = y[static_cast<std::size_t>(r)];
    if (k == 1)
      z(r) = gamma.gamma(0) - 0.5;
    else if (k == k_levels)
      z(r) = gamma.gamma(k_levels - 2) + 0.5;
    else
      z(r) = 0.5 * (gamma.gamma(k - 2) + gamma.gamma(k - 1));
  }
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd delta = Eigen::VectorXd::Zero(q);
  // Range heuristic: correlation 0.05 at the median pairwise distance.
  const double phi0 = -std::log(0.05) / median_pair_distance(dists);
  CovParams th;
  if (cfg.model_kind == ModelKind::filtering) {
    FilterCovParams f = FilterCovParams::diagonal(q, 0.5, phi0);
    for (int c : cfg.inf_phi_components)
      f.phi(c - 1) = std::numeric_limits<double>::infinity();
    th = f;
  } else {
    th = StationaryCovParams{phi0, 1.0};
  }
  const ThetaMap map = ThetaMap::for_params(th, /*sigma2_free=*/false);
  const int dim = map.dim();

  SpdFactor factor = chol_spd(observation_corr_matrix(ds, th, dists), "run_chain initial R");
  Eigen::MatrixXd lambda = factor.llt.solve(eye);
  Eigen::VectorXd mu = ds.mean_vec(beta, delta);

  long chol_failures = 0;
  long total_proposals = 0;
  MhCounters pilot_count, main_count;

  // One full Gibbs scan: cutpoints, latent sweep, regression block, theta.
  const auto iterate = [&](const Eigen::MatrixXd& proposal_cov, MhCounters& count) {
    gamma = update_cutpoints(z, y, gamma, rng);
    if (cfg.randomize_sweep) {
      std::vector<int> order(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
      for (int i = 0; i < n - 1; ++i)
        std::swap(order[static_cast<std::size_t>(i)],
                  order[static_cast<std::size_t>(rng.uniform_int(i, n - 1))]);
      update_latent(z, y, gamma, lambda, mu, rng, &order);
    } else {
      update_latent(z, y, gamma, lambda, mu, rng);
    }
    auto [b_draw, d_draw] = gibbs_regression(z, factor, x, m_star, priors, rng);
    beta = std::move(b_draw);
    delta = std::move(d_draw);
    if (auto* f = std::get_if<FilterCovParams>(&th)) f->delta = delta;
    mu = ds.mean_vec(beta, delta);

    MhResult res = mh_theta(th, z, mu, ds, priors, map, proposal_cov, rng, &factor, &dists);
    ++count.proposals;
    ++total_proposals;
    if (res.chol_failed) {
      ++chol_failures;
      if (chol_failures <= 5)
        std::cerr << "[mcmc] warning: proposed covariance failed to factor (failure "
                  << chol_failures << ")\n";
      if (total_proposals >= 200 &&
          chol_failures * 100 > total_proposals)
        throw std::runtime_error(
            "run_chain: aborting, " + std::to_string(chol_failures) +
            " Cholesky failures in " + std::to_string(total_proposals) +
            " proposals (>1%); the proposal covariance or data are pathological");
    }
    if (res.accepted) {
      ++count.accepted;
      th = std::move(res.theta);
      factor = std::move(*res.factor);
      // Lambda = R^-1 through the fresh Cholesky factor, reused for every
      // latent sweep until the next accepted move.
      lambda = factor.llt.solve(eye);
    }
  };

  // ---- pilot phase -----------------------------------------------------------
  Eigen::MatrixXd proposal_cov = 0.01 * Eigen::MatrixXd::Identity(dim, dim);
  if (cfg.pilot_iter > 0) {
    Eigen::MatrixXd pilot_draws(cfg.pilot_iter, dim);
    for (long it = 0; it < cfg.pilot_iter; ++it) {
      iterate(proposal_cov, pilot_count);
      pilot_draws.row(it) = map.transformed(th).transpose();
      if (cfg.verbose && (it + 1) % std::max<long>(1, cfg.pilot_iter / 10) == 0)
        std::cerr << "[mcmc] pilot " << (it + 1) << "/" << cfg.pilot_iter << "\n";
    }
    proposal_cov = tune_proposal(pilot_draws, cfg.proposal_scale);
    if (cfg.verbose)
      std::cerr << "[mcmc] pilot acceptance "
                << static_cast<double>(pilot_count.accepted) /
                       static_cast<double>(std::max<long>(1, pilot_count.proposals))
                << ", proposal tuned\n";
  }

  // ---- main phase ------------------------------------------------------------
  const long n_keep = (cfg.n_iter - cfg.burn_in) / cfg.thin;
  PosteriorDraws out;
  out.kind = cfg.model_kind;
  out.prototype = map.prototype();
  out.sigma2_free = false;
  out.theta_names = map.names();
  out.beta_names = ds.covariate_names;
  out.beta.resize(n_keep, p);
  out.delta.resize(n_keep, q);
  out.theta.resize(n_keep, dim);
  out.gamma.resize(n_keep, k_levels - 1);
  out.zstar.resize(n_keep, n);

  for (long it = 1; it <= cfg.n_iter; ++it) {
    iterate(proposal_cov, main_count);
    if (it > cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0) {
      const long row = (it - cfg.burn_in) / cfg.thin - 1;
      out.beta.row(row) = beta.transpose();
      out.delta.row(row) = delta.transpose();
      out.theta.row(row) = map.natural(th).transpose();
      out.gamma.row(row) = gamma.gamma.transpose();
      out.zstar.row(row) = z.transpose();
    }
    if (cfg.verbose && it % std::max<long>(1, cfg.n_iter / 10) == 0)
      std::cerr << "[mcmc] iteration " << it << "/" << cfg.n_iter << "\n";
  }

  out.proposals = main_count.proposals;
  out.accepted = main_count.accepted;
  out.pilot_proposals = pilot_count.proposals;
  out.pilot_accepted = pilot_count.accepted;
  out.chol_failures = chol_failures;
  out.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

  if (cfg.n_iter > 0) {
    const double rate = out.acceptance_rate();
    if (rate < 0.05 || rate > 0.6)
      std::cerr << "[mcmc] warning: acceptance rate " << rate
                << " outside the expected [0.05, 0.6] band; check the pilot length and "
                   "proposal scale\n";
  }
  return out;
}

PosteriorDraws run_chain(const RatingsDataset& ds, const ChainConfig& cfg, const Priors& priors) {
  Rng rng(cfg.seed);
  return run_chain(ds, cfg, priors, rng);
}

}  // namespace luf
