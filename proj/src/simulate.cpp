#include "lufilter/simulate.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>

#include "lufilter/parallel.hpp"
#include "lufilter/predict.hpp"

namespace luf {

namespace {

// Decay of the partition fields: correlation length 0.2 on the unit square,
// giving a handful of contiguous patches per field.
constexpr double kPartitionDecay = 5.0;
// Nugget added to the partition-field kernel: the smooth exponential kernel
// on a fine lattice is numerically singular, and a field jitter of sd 1e-3
// is invisible next to the unit field scale.
constexpr double kPartitionNugget = 1e-6;

void check_categorized(const std::vector<Location>& locs, const std::vector<int>& cats, int q,
                       const char* who) {
  if (locs.empty()) throw std::invalid_argument(std::string(who) + ": no locations");
  if (locs.size() != cats.size())
    throw std::invalid_argument(std::string(who) + ": locations/categories size mismatch");
  for (const auto& l : locs)
    if (!std::isfinite(l.x) || !std::isfinite(l.y))
      throw std::invalid_argument(std::string(who) + ": non-finite coordinates at location id " +
                                  std::to_string(l.id));
  for (int c : cats)
    if (c < 1 || c > q)
      throw std::invalid_argument(std::string(who) + ": category outside 1.." + std::to_string(q));
}

// The training half of one replication as a ratings dataset: one rating per
// location, no covariates.
RatingsDataset train_dataset(const std::vector<Location>& train,
                             const std::vector<int>& train_cats, const std::vector<int>& y,
                             int q, int k_levels) {
  RatingsDataset ds;
  ds.Q = q;
  ds.K = k_levels;
  ds.locations = train;
  ds.location_category = train_cats;
  ds.ratings.reserve(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    RatingObs obs;
    obs.loc = static_cast<int>(i);
    obs.y = y[i];
    obs.x = Eigen::VectorXd(0);
    ds.ratings.push_back(std::move(obs));
  }
  ds.validate();
  return ds;
}

// One replication over a partition computed by the caller (the study shares
// it across replications; it depends only on scenario.partition_seed).
ReplicationResult replicate_on(const SimScenario& sc, std::uint64_t seed,
                               const std::vector<Location>& grid,
                               const std::vector<int>& grid_cats) {
  const int g = static_cast<int>(grid.size());
  const int q = sc.theta_true.Q();
  Rng root(seed);

  // Training locations uniform on the unit square, ids above the grid's.
  Rng loc_rng = root.child(1);
  std::vector<Location> train;
  train.reserve(static_cast<std::size_t>(sc.n_train));
  for (int i = 0; i < sc.n_train; ++i) {
    const double x = loc_rng.uniform(0.0, 1.0);
    const double y = loc_rng.uniform(0.0, 1.0);
    train.push_back({static_cast<long>(g) + 1 + i, x, y});
  }
  const std::vector<int> train_cats = assign_train_categories(train, grid, grid_cats);

  // One joint realization over training then test locations.
  std::vector<Location> all = train;
  all.insert(all.end(), grid.begin(), grid.end());
  std::vector<int> all_cats = train_cats;
  all_cats.insert(all_cats.end(), grid_cats.begin(), grid_cats.end());
  Rng field_rng = root.child(2);
  const FilteredDraw draw = gen_filtered_data(all, all_cats, sc.theta_true, sc.gamma_true,
                                              field_rng, sc.truth_noiseless);
  const Eigen::VectorXd truth =
      sc.truth_noiseless ? draw.z_tilde.tail(g) : draw.z_star.tail(g);

  const std::vector<int> y_train(draw.y.begin(), draw.y.begin() + sc.n_train);
  const RatingsDataset ds = train_dataset(train, train_cats, y_train, q, sc.gamma_true.K());

  // Both fits, each on its own jitter stream. A fit that fails outright (no
  // start reaches a finite posterior) is treated like non-convergence: the
  // replication is flagged, not the study aborted.
  ReplicationResult out;
  out.seed = seed;
  MapFitResult filt, stat;
  OptConfig cfg = sc.opt;
  try {
    cfg.seed = root.child(3).seed();
    filt = fit_map(ds, FilterCovParams::diagonal(q, 0.5, 6.0), Priors{}, cfg);
    out.filter_converged = filt.converged;
  } catch (const std::runtime_error&) {
    out.filter_converged = false;
  }
  try {
    cfg.seed = root.child(4).seed();
    stat = fit_map(ds, StationaryCovParams{6.0, 1.0}, Priors{}, cfg);
    out.stationary_converged = stat.converged;
  } catch (const std::runtime_error&) {
    out.stationary_converged = false;
  }
  if (!out.usable()) return out;

  PredictionGrid pg;
  pg.locations = grid;
  pg.categories = grid_cats;
  pg.ids.reserve(grid.size());
  for (const auto& l : grid) pg.ids.push_back(l.id);

  const PredictionScore sf = evaluate_predictions(approx_predict(filt, ds, pg), truth);
  const PredictionScore ss = evaluate_predictions(approx_predict(stat, ds, pg), truth);
  out.mae_filter = sf.mae;
  out.pearson_filter = sf.pearson;
  out.mae_stationary = ss.mae;
  out.pearson_stationary = ss.pearson;
  return out;
}

}  // namespace

void SimScenario::validate() const {
  if (grid_side < 10) throw std::invalid_argument("scenario: grid_side must be >= 10");
  if (grid_side > 100)
    throw std::invalid_argument(
        "scenario: grid_side above 100 would need a non-dense simulation strategy");
  theta_true.validate();
  if (theta_true.delta.array().abs().maxCoeff() != 0.0)
    throw std::invalid_argument("scenario: the generative model has zero mean; delta must be 0");
  if (n_train < theta_true.Q())
    throw std::invalid_argument("scenario: n_train must be >= Q");
  gamma_true.validate();
  if (n_replications < 1) throw std::invalid_argument("scenario: n_replications must be >= 1");
  opt.validate();
}

SimScenario SimScenario::defaults() {
  SimScenario sc;
  sc.theta_true.A.setZero(3, 3);
  sc.theta_true.A << 1.8, 0.0, 0.0, 0.8, 1.2, 0.0, 0.9, 1.0, 1.25;
  sc.theta_true.phi.resize(3);
  sc.theta_true.phi << 40.0, 10.0, 2.0;
  sc.theta_true.sigma2 = Eigen::VectorXd::Ones(3);
  sc.theta_true.delta = Eigen::VectorXd::Zero(3);
  sc.gamma_true.gamma.resize(4);
  sc.gamma_true.gamma << -2.0, -0.5, 0.1, 1.1;
  sc.validate();
  return sc;
}

std::vector<Location> unit_square_grid(int side) {
  if (side < 1) throw std::invalid_argument("unit_square_grid: side must be >= 1");
  std::vector<Location> grid;
  grid.reserve(static_cast<std::size_t>(side) * static_cast<std::size_t>(side));
  const double step = 1.0 / side;
  for (int iy = 0; iy < side; ++iy)
    for (int ix = 0; ix < side; ++ix)
      grid.push_back({static_cast<long>(iy) * side + ix + 1, (ix + 0.5) * step, (iy + 0.5) * step});
  return grid;
}

std::vector<int> gen_partition(const std::vector<Location>& grid, int Q, std::uint64_t seed) {
  if (grid.empty()) throw std::invalid_argument("gen_partition: empty grid");
  if (Q < 1) throw std::invalid_argument("gen_partition: Q must be >= 1");
  const int g = static_cast<int>(grid.size());
  if (Q == 1) return std::vector<int>(static_cast<std::size_t>(g), 1);

  Eigen::MatrixXd k = pairwise_distances(grid);
  k = (-kPartitionDecay * k.array()).exp();
  k.diagonal().array() += kPartitionNugget;
  const SpdFactor f = chol_spd(k, "gen_partition: field kernel");

  Eigen::MatrixXd fields(g, Q);
  const Rng root(seed);
  for (int q = 0; q < Q; ++q) {
    Rng stream = root.child(static_cast<std::uint64_t>(q));
    Eigen::VectorXd xi(g);
    for (int i = 0; i < g; ++i) xi(i) = stream.normal();
    fields.col(q) = f.llt.matrixL() * xi;
  }

  std::vector<int> cats(static_cast<std::size_t>(g), 1);
  for (int i = 0; i < g; ++i) {
    int best = 0;
    for (int q = 1; q < Q; ++q)
      if (fields(i, q) > fields(i, best)) best = q;
    cats[static_cast<std::size_t>(i)] = best + 1;
  }
  return cats;
}

FilteredDraw gen_filtered_data(const std::vector<Location>& locs,
                               const std::vector<int>& categories,
                               const FilterCovParams& theta_true, const CutPoints& gamma_true,
                               Rng& rng, bool keep_surface) {
  theta_true.validate();
  if (theta_true.delta.array().abs().maxCoeff() != 0.0)
    throw std::invalid_argument("gen_filtered_data: the generative model has zero mean");
  gamma_true.validate();
  check_categorized(locs, categories, theta_true.Q(), "gen_filtered_data");

  const int n = static_cast<int>(locs.size());
  const CovParams p(theta_true);
  Eigen::MatrixXd cov = spatial_cov_matrix(locs, categories, p, true);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);

  FilteredDraw out;
  if (keep_surface) {
    const SpdFactor f = chol_spd(cov, "gen_filtered_data: joint surface covariance");
    out.z_tilde = mvn_draw(zero, f, rng);
    out.z_star = out.z_tilde;
    for (int i = 0; i < n; ++i)
      out.z_star(i) += std::sqrt(constrained_nugget(categories[static_cast<std::size_t>(i)],
                                                    theta_true)) *
                       rng.normal();
  } else {
    for (int i = 0; i < n; ++i)
      cov(i, i) += constrained_nugget(categories[static_cast<std::size_t>(i)], theta_true);
    const SpdFactor f = chol_spd(cov, "gen_filtered_data: joint latent covariance");
    out.z_star = mvn_draw(zero, f, rng);
  }

  out.y.resize(locs.size());
  for (int i = 0; i < n; ++i)
    out.y[static_cast<std::size_t>(i)] = bin_latent(out.z_star(i), gamma_true);
  return out;
}

std::vector<int> assign_train_categories(const std::vector<Location>& train_locs,
                                         const std::vector<Location>& test_grid,
                                         const std::vector<int>& test_categories) {
  if (test_grid.empty()) throw std::invalid_argument("assign_train_categories: empty test grid");
  if (test_grid.size() != test_categories.size())
    throw std::invalid_argument("assign_train_categories: grid/categories size mismatch");
  for (int c : test_categories)
    if (c < 1) throw std::invalid_argument("assign_train_categories: category below 1");
  for (const auto& l : test_grid)
    if (!std::isfinite(l.x) || !std::isfinite(l.y))
      throw std::invalid_argument(
          "assign_train_categories: non-finite coordinates at location id " +
          std::to_string(l.id));
  for (const auto& l : train_locs)
    if (!std::isfinite(l.x) || !std::isfinite(l.y))
      throw std::invalid_argument(
          "assign_train_categories: non-finite coordinates at location id " +
          std::to_string(l.id));

  std::vector<int> cats;
  cats.reserve(train_locs.size());
  for (const auto& t : train_locs) {
    std::size_t best = 0;
    double best_d = sq_dist(t, test_grid[0]);
    for (std::size_t j = 1; j < test_grid.size(); ++j) {
      const double d = sq_dist(t, test_grid[j]);
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    cats.push_back(test_categories[best]);
  }
  return cats;
}

ReplicationResult run_replication(const SimScenario& scenario, std::uint64_t seed) {
  scenario.validate();
  const std::vector<Location> grid = unit_square_grid(scenario.grid_side);
  const std::vector<int> part =
      gen_partition(grid, scenario.theta_true.Q(), scenario.partition_seed);
  return replicate_on(scenario, seed, grid, part);
}

StudySummary summarize(const std::vector<ReplicationResult>& results) {
  if (results.empty()) throw std::invalid_argument("summarize: no results");
  StudySummary s;
  std::vector<double> mae_d, pear_d;
  for (const auto& r : results) {
    if (!r.usable()) {
      ++s.n_excluded;
      continue;
    }
    ++s.n_used;
    s.mae_win_rate += r.mae_filter < r.mae_stationary ? 1.0 : 0.0;
    s.pearson_win_rate += r.pearson_filter > r.pearson_stationary ? 1.0 : 0.0;
    mae_d.push_back(r.mae_filter - r.mae_stationary);
    pear_d.push_back(r.pearson_filter - r.pearson_stationary);
  }
  if (s.n_used == 0) throw std::invalid_argument("summarize: no replication has both fits converged");
  s.mae_win_rate /= s.n_used;
  s.pearson_win_rate /= s.n_used;

  const auto mean_se = [](const std::vector<double>& d) {
    const double n = static_cast<double>(d.size());
    double mean = 0.0;
    for (double v : d) mean += v;
    mean /= n;
    if (d.size() < 2) return std::pair<double, double>(mean, 0.0);
    double ss = 0.0;
    for (double v : d) ss += (v - mean) * (v - mean);
    return std::pair<double, double>(mean, std::sqrt(ss / (n - 1.0) / n));
  };
  std::tie(s.mae_delta_mean, s.mae_delta_se) = mean_se(mae_d);
  std::tie(s.pearson_delta_mean, s.pearson_delta_se) = mean_se(pear_d);
  return s;
}

std::vector<ReplicationResult> run_study(const SimScenario& scenario, int n_workers) {
  scenario.validate();
  const std::vector<Location> grid = unit_square_grid(scenario.grid_side);
  const std::vector<int> part =
      gen_partition(grid, scenario.theta_true.Q(), scenario.partition_seed);

  SimScenario inner = scenario;
  if (effective_workers(scenario.n_replications, n_workers) > 1) inner.opt.n_workers = 1;

  std::vector<ReplicationResult> results(static_cast<std::size_t>(scenario.n_replications));
  parallel_for(scenario.n_replications, n_workers, [&](int k) {
    results[static_cast<std::size_t>(k)] =
        replicate_on(inner, scenario.field_seed + static_cast<std::uint64_t>(k), grid, part);
  });
  return results;
}

}  // namespace luf
