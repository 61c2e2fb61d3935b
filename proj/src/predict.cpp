#include "lufilter/predict.hpp"

#include <cmath>
#include <cstddef>
#include <iostream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>

#include "lufilter/covariance.hpp"
#include "lufilter/ordinal.hpp"
#include "lufilter/parallel.hpp"
#include "lufilter/rng.hpp"

namespace luf {

namespace {

// Probability floor applied wherever a pointwise likelihood reaches exact
// zero: the smallest comfortable normal double, so its log stays finite.
constexpr double kLikFloor = 1e-300;

void check_ids_disjoint(const PredictionGrid& grid, const RatingsDataset& ds) {
  if (grid.ids.empty()) return;  // labeled by index: nothing to collide
  std::unordered_set<long> observed;
  observed.reserve(ds.locations.size());
  for (const auto& l : ds.locations) observed.insert(l.id);
  for (long id : grid.ids) {
    if (observed.count(id) > 0)
      throw std::invalid_argument("prediction grid id " + std::to_string(id) +
                                  " collides with an observed location id");
  }
}

void check_draw_sizes(const PosteriorDraw& draw, const RatingsDataset& ds) {
  validate(draw.theta);
  if (const auto* f = std::get_if<FilterCovParams>(&draw.theta)) {
    if (f->Q() != ds.Q)
      throw std::invalid_argument("posterior draw has " + std::to_string(f->Q()) +
                                  " latent components but the dataset has " +
                                  std::to_string(ds.Q) + " categories");
  }
  if (draw.beta.size() != ds.p())
    throw std::invalid_argument("posterior draw beta length does not match the covariate count");
  if (draw.delta.size() != ds.Q)
    throw std::invalid_argument("posterior draw delta length does not match the category count");
  if (draw.zstar.size() != ds.n())
    throw std::invalid_argument("posterior draw zstar length does not match the rating count");
  if (!draw.beta.allFinite() || !draw.delta.allFinite() || !draw.zstar.allFinite())
    throw std::invalid_argument("posterior draw contains non-finite values");
}

// Row counts and widths of the stored draw matrices against the dataset.
void check_draws_shape(const PosteriorDraws& draws, const RatingsDataset& ds) {
  const int b = draws.n_draws();
  if (draws.beta.rows() != b || draws.delta.rows() != b || draws.gamma.rows() != b ||
      draws.zstar.rows() != b)
    throw std::invalid_argument("stored draw matrices disagree on the number of draws");
  if (draws.beta.cols() != ds.p())
    throw std::invalid_argument("stored beta draws do not match the covariate count");
  if (draws.delta.cols() != ds.Q)
    throw std::invalid_argument("stored delta draws do not match the category count");
  if (draws.zstar.cols() != ds.n())
    throw std::invalid_argument("stored zstar draws do not match the rating count");
}

}  // namespace

Eigen::MatrixXd PredictionGrid::M_bar(int q_total) const {
  validate(q_total);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(G(), q_total);
  for (int i = 0; i < G(); ++i) m(i, categories[static_cast<std::size_t>(i)] - 1) = 1.0;
  return m;
}

void PredictionGrid::validate(int q_total) const {
  if (q_total < 1) throw std::invalid_argument("PredictionGrid: q_total must be >= 1");
  if (categories.size() != locations.size())
    throw std::invalid_argument("PredictionGrid: categories and locations differ in length");
  if (!ids.empty() && ids.size() != locations.size())
    throw std::invalid_argument("PredictionGrid: ids must be empty or match locations in length");
  for (std::size_t i = 0; i < categories.size(); ++i) {
    int c = categories[i];
    if (c < 1 || c > q_total)
      throw std::invalid_argument("PredictionGrid: category " + std::to_string(c) +
                                  " at index " + std::to_string(i) + " outside 1.." +
                                  std::to_string(q_total));
  }
}

PosteriorDraw draw_at(const PosteriorDraws& draws, int b) {
  if (b < 0 || b >= draws.n_draws())
    throw std::invalid_argument("draw_at: draw index " + std::to_string(b) + " outside 0.." +
                                std::to_string(draws.n_draws() - 1));
  if (draws.beta.rows() != draws.n_draws() || draws.delta.rows() != draws.n_draws() ||
      draws.zstar.rows() != draws.n_draws())
    throw std::invalid_argument("draw_at: stored draw matrices disagree on the number of draws");
  PosteriorDraw d;
  d.beta = draws.beta.row(b).transpose();
  d.delta = draws.delta.row(b).transpose();
  d.zstar = draws.zstar.row(b).transpose();
  d.theta = draws.params_at(b);
  return d;
}

PredictiveMoments predictive_moments(const PosteriorDraw& draw, const RatingsDataset& ds,
                                     const PredictionGrid& grid, bool diagonal_only) {
  ds.validate();
  grid.validate(ds.Q);
  check_ids_disjoint(grid, ds);
  check_draw_sizes(draw, ds);

  PredictiveMoments out;
  const int g = grid.G();
  if (g == 0) {
    out.mu.resize(0);
    out.sigma_diag.resize(0);
    out.sigma.resize(0, 0);
    return out;
  }

  const Eigen::MatrixXd r_mat = observation_corr_matrix(ds, draw.theta);
  const SpdFactor f = chol_spd(r_mat, "predictive_moments: R(theta)");
  const Eigen::VectorXd resid = draw.zstar - ds.mean_vec(draw.beta, draw.delta);
  const Eigen::VectorXd alpha = f.llt.solve(resid);

  // Cross-covariance to the ratings: site-level first, then rating columns
  // replicate their site's column (H has one 1 per row).
  const Eigen::MatrixXd s_gs =
      spatial_cross_cov_matrix(grid.locations, grid.categories, ds.locations,
                               ds.location_category, draw.theta, /*constrained=*/true);
  const int n = ds.n();
  Eigen::MatrixXd c(g, n);
  for (int r = 0; r < n; ++r) c.col(r) = s_gs.col(ds.ratings[static_cast<std::size_t>(r)].loc);

  out.mu = grid.M_bar(ds.Q) * draw.delta + c * alpha;

  const Eigen::MatrixXd w = f.llt.matrixL().solve(c.transpose());  // n x g
  if (diagonal_only) {
    out.sigma_diag.resize(g);
    for (int i = 0; i < g; ++i) {
      const auto& loc = grid.locations[static_cast<std::size_t>(i)];
      const int cat = grid.categories[static_cast<std::size_t>(i)];
      out.sigma_diag(i) =
          spatial_cov(draw.theta, loc, cat, loc, cat, /*constrained=*/true) -
          w.col(i).squaredNorm();
    }
    out.sigma.resize(0, 0);
  } else {
    out.sigma = spatial_cov_matrix(grid.locations, grid.categories, draw.theta,
                                   /*constrained=*/true) -
                w.transpose() * w;
    out.sigma = out.sigma.selfadjointView<Eigen::Lower>();  // exact symmetry
    out.sigma_diag = out.sigma.diagonal();
  }
  return out;
}

void SurfaceConfig::validate() const {
  if (block_size < 1) throw std::invalid_argument("SurfaceConfig: block_size must be >= 1");
  if (n_workers < 0) throw std::invalid_argument("SurfaceConfig: n_workers must be >= 0");
}

LatentSurface posterior_mean_surface(const PosteriorDraws& draws, const RatingsDataset& ds,
                                     const PredictionGrid& grid, const SurfaceConfig& cfg) {
  cfg.validate();
  ds.validate();
  grid.validate(ds.Q);
  check_ids_disjoint(grid, ds);
  const int b_total = draws.n_draws();
  if (b_total < 1) throw std::invalid_argument("posterior_mean_surface: needs at least one draw");
  check_draws_shape(draws, ds);

  LatentSurface out;
  const int g = grid.G();
  if (g == 0) {
    out.mean.resize(0);
    return out;
  }

  // Geometry fixed across draws: site distances for R(theta), grid blocks
  // with their site cross-distances recomputed per draw to bound memory at
  // block_size x m.
  const Eigen::MatrixXd site_dists = pairwise_distances(ds.locations);
  const Eigen::MatrixXd m_bar = grid.M_bar(ds.Q);
  struct Block {
    int offset = 0;
    std::vector<Location> locs;
    std::vector<int> cats;
  };
  std::vector<Block> blocks;
  for (int start = 0; start < g; start += cfg.block_size) {
    const int len = std::min(cfg.block_size, g - start);
    Block blk;
    blk.offset = start;
    blk.locs.assign(grid.locations.begin() + start, grid.locations.begin() + start + len);
    blk.cats.assign(grid.categories.begin() + start, grid.categories.begin() + start + len);
    blocks.push_back(std::move(blk));
  }

  Eigen::MatrixXd mu_all(b_total, g);
  parallel_for(b_total, cfg.n_workers, [&](int b) {
    const CovParams theta = draws.params_at(b);
    const Eigen::MatrixXd r_mat = observation_corr_matrix(ds, theta, site_dists);
    const SpdFactor f = chol_spd(r_mat, "posterior_mean_surface: R(theta)");
    const Eigen::VectorXd resid =
        draws.zstar.row(b).transpose() -
        ds.mean_vec(draws.beta.row(b).transpose(), draws.delta.row(b).transpose());
    const Eigen::VectorXd alpha = f.llt.solve(resid);
    // mu = Mbar delta + S_{grid,sites} (H' alpha): replicate ratings at one
    // site collapse into the site's summed weight.
    Eigen::VectorXd site_alpha = Eigen::VectorXd::Zero(ds.m());
    for (int r = 0; r < ds.n(); ++r)
      site_alpha(ds.ratings[static_cast<std::size_t>(r)].loc) += alpha(r);
    Eigen::VectorXd mu = m_bar * draws.delta.row(b).transpose();
    for (const Block& blk : blocks) {
      const Eigen::MatrixXd d = cross_distances(blk.locs, ds.locations);
      const Eigen::MatrixXd s = spatial_cross_cov_from_dists(d, blk.cats, ds.location_category,
                                                             theta, /*constrained=*/true);
      mu.segment(blk.offset, static_cast<Eigen::Index>(blk.locs.size())) += s * site_alpha;
    }
    mu_all.row(b) = mu.transpose();
  });

  // Serial reduction in draw order: the result does not depend on n_workers.
  out.mean = (mu_all.colwise().sum() / static_cast<double>(b_total)).transpose();
  if (cfg.keep_draw_means) out.draw_means = std::move(mu_all);
  return out;
}

void WaicConfig::validate() const {
  if (thin < 1) throw std::invalid_argument("WaicConfig: thin must be >= 1");
  if (n_workers < 0) throw std::invalid_argument("WaicConfig: n_workers must be >= 0");
}

WaicResult waic(const PosteriorDraws& draws, const RatingsDataset& ds, const WaicConfig& cfg) {
  cfg.validate();
  ds.validate();
  const int b_total = draws.n_draws();
  if (b_total < 1) throw std::invalid_argument("waic: needs at least one draw");
  check_draws_shape(draws, ds);
  if (draws.gamma.cols() != ds.K - 1)
    throw std::invalid_argument("stored cutpoint draws do not match the ordinal level count");

  // The surface is regenerated at the distinct rated locations; ids stay
  // empty so the internal grid is exempt from the id-disjointness rule.
  PredictionGrid sites;
  sites.locations = ds.locations;
  sites.categories = ds.location_category;

  const int n = ds.n();
  const int b_used = static_cast<int>((static_cast<long>(b_total) + cfg.thin - 1) / cfg.thin);
  Eigen::MatrixXd p_mat(b_used, n);
  long floored = 0;  // flooring happens only in the serial reduction below

  parallel_for(b_used, cfg.n_workers, [&](int t) {
    const int b = static_cast<int>(static_cast<long>(t) * cfg.thin);
    const PosteriorDraw d = draw_at(draws, b);
    const PredictiveMoments mom = predictive_moments(d, ds, sites);
    const SpdFactor f = chol_spd(mom.sigma, "waic: conditional surface covariance");
    // One stream per stored draw index: results are identical under any
    // worker count or schedule.
    Rng stream = Rng(cfg.seed).child(static_cast<std::uint64_t>(b));
    const Eigen::VectorXd ztilde = mvn_draw(mom.mu, f, stream);
    const CutPoints gam = draws.cutpoints_at(b);
    for (int r = 0; r < n; ++r) {
      const auto& obs = ds.ratings[static_cast<std::size_t>(r)];
      p_mat(t, r) = pointwise_likelihood(obs.y, obs.x, d.beta, ztilde(obs.loc), gam);
    }
  });

  WaicResult out;
  out.n_draws_used = b_used;
  out.lppd_pointwise.resize(n);
  out.p_waic_pointwise.resize(n);
  for (int r = 0; r < n; ++r) {
    double mean_p = p_mat.col(r).mean();
    if (mean_p <= 0.0) {
      mean_p = kLikFloor;
      ++floored;
    }
    out.lppd_pointwise(r) = std::log(mean_p);
    if (b_used == 1) {
      out.p_waic_pointwise(r) = 0.0;
      continue;
    }
    // Sample variance of the log likelihoods, zeros floored so the log is
    // finite (an underflowed ordinal tail probability).
    Eigen::ArrayXd logs(b_used);
    for (int t = 0; t < b_used; ++t) {
      double p = p_mat(t, r);
      if (p <= 0.0) {
        p = kLikFloor;
        ++floored;
      }
      logs(t) = std::log(p);
    }
    out.p_waic_pointwise(r) = (logs - logs.mean()).square().sum() / (b_used - 1);
  }
  if (floored > 0)
    std::cerr << "waic: " << floored << " pointwise likelihood value(s) were zero and "
              << "were floored at 1e-300\n";
  out.floored = floored;
  out.lppd = out.lppd_pointwise.sum();
  out.p_waic = out.p_waic_pointwise.sum();
  out.waic = -2.0 * (out.lppd - out.p_waic);
  return out;
}

PredictionScore evaluate_predictions(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
  if (pred.size() != truth.size())
    throw std::invalid_argument("evaluate_predictions: vectors differ in length");
  if (pred.size() < 2) throw std::invalid_argument("evaluate_predictions: needs at least 2 values");
  if (!pred.allFinite() || !truth.allFinite())
    throw std::invalid_argument("evaluate_predictions: non-finite values");

  // Standardize with the sample (n-1) standard deviation.
  const auto standardize = [](const Eigen::VectorXd& v, const char* side) {
    const Eigen::ArrayXd c = v.array() - v.mean();
    const double sd = std::sqrt(c.square().sum() / static_cast<double>(v.size() - 1));
    if (!(sd > 0.0))
      throw std::invalid_argument(std::string("evaluate_predictions: ") + side +
                                  " vector has zero variance");
    return Eigen::ArrayXd(c / sd);
  };
  const Eigen::ArrayXd a = standardize(pred, "prediction");
  const Eigen::ArrayXd b = standardize(truth, "truth");

  PredictionScore s;
  s.mae = (a - b).abs().mean();
  s.pearson = (a * b).sum() / std::sqrt(a.square().sum() * b.square().sum());
  return s;
}

}  // namespace luf
