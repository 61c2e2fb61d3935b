#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "lufilter/approx.hpp"
#include "lufilter/covariance.hpp"
#include "lufilter/geometry.hpp"
#include "lufilter/ordinal.hpp"
#include "lufilter/rng.hpp"

namespace luf {

// A replication study of the generative filtering model: a grid_side^2 test
// grid on the unit square carries a synthetic land-use partition; each
// replication draws n_train training locations uniformly, categorizes them by
// nearest grid point, realizes ordinal data jointly over train and test
// locations, fits the filtering and stationary models by the approximate-MAP
// path, and scores both predictions against the true latent values at the
// test points.
struct SimScenario {
  int grid_side = 50;  // test grid = grid_side^2 cell centers of the unit square
  int n_train = 500;
  FilterCovParams theta_true;        // data-generating covariance (delta must be zero)
  CutPoints gamma_true;              // data-generating cut points
  std::uint64_t partition_seed = 1;  // stream of the synthetic partition fields
  std::uint64_t field_seed = 1;      // base seed; replication k runs at field_seed + k
  int n_replications = 30;
  // Score against the noiseless spatial surface instead of the latent
  // response (which carries the per-rating noise).
  bool truth_noiseless = false;
  OptConfig opt;  // optimizer settings shared by both fits

  // grid_side in [10, 100] (the joint-simulation covariance over
  // grid_side^2 + n_train points is factored densely; larger grids would
  // need a different simulation strategy), n_train >= Q, theta_true valid
  // with zero delta, gamma_true valid, n_replications >= 1.
  void validate() const;  // throws std::invalid_argument

  // The generative setting of the replication study at desk scale: three
  // strongly mixed categories with decays spanning 40 to 2 on the unit
  // square, cut points (-2, -0.5, 0.1, 1.1), 50x50 grid, 500 training
  // points, 30 replications.
  static SimScenario defaults();
};

// Scores of one replication. A fit that did not converge leaves its flag
// false and both of its scores zero; such replications are excluded from
// win-rate denominators and counted by summarize.
struct ReplicationResult {
  double mae_filter = 0.0;
  double mae_stationary = 0.0;
  double pearson_filter = 0.0;
  double pearson_stationary = 0.0;
  std::uint64_t seed = 0;
  bool filter_converged = false;
  bool stationary_converged = false;

  bool usable() const { return filter_converged && stationary_converged; }
};

// The grid_side^2 cell centers ((i+0.5)/side, (j+0.5)/side) of the unit
// square in row-major order (x fastest), ids 1..side^2.
std::vector<Location> unit_square_grid(int side);

// Synthetic land-use partition over the grid: Q independent smooth Gaussian
// fields (unit-variance exponential kernel with decay 5 per unit, plus a
// 1e-6 nugget so the near-singular smooth kernel factors), each cell assigned
// the argmax field index (lowest index on ties). One Cholesky serves all Q
// fields; field q draws from Rng(seed).child(q). Q = 1 short-circuits to all
// ones. Returns per-cell categories 1..Q.
std::vector<int> gen_partition(const std::vector<Location>& grid, int Q, std::uint64_t seed);

// One realization of the generative model over fixed categorized locations.
struct FilteredDraw {
  Eigen::VectorXd z_star;   // latent responses, one per location
  Eigen::VectorXd z_tilde;  // noiseless spatial surface; empty unless requested
  std::vector<int> y;       // z_star binned through the cut points, 1..K
};

// Draws the latent response jointly over all locations with mean zero and
// the unit-diagonal observation correlation R(theta_true), then bins each
// element through gamma_true. keep_surface draws the spatial surface and the
// independent noise separately (z_star = z_tilde + eps, the same law through
// a different stream) so the noiseless surface is available as truth.
FilteredDraw gen_filtered_data(const std::vector<Location>& locs,
                               const std::vector<int>& categories,
                               const FilterCovParams& theta_true, const CutPoints& gamma_true,
                               Rng& rng, bool keep_surface = false);

// Nearest-grid-point category per training location (strictly nearest;
// distance ties keep the lowest grid index).
std::vector<int> assign_train_categories(const std::vector<Location>& train_locs,
                                         const std::vector<Location>& test_grid,
                                         const std::vector<int>& test_categories);

// One replication, a pure function of (scenario, seed): rebuilds the
// partition from scenario.partition_seed, draws training locations and the
// joint latent realization from child streams of Rng(seed), fits both models
// on the training ordinal data, predicts the test grid, and scores against
// the true latent values there. Non-convergence of a fit is flagged, not
// thrown.
ReplicationResult run_replication(const SimScenario& scenario, std::uint64_t seed);

// Study aggregate over the usable replications (both fits converged).
struct StudySummary {
  double mae_win_rate = 0.0;      // fraction with mae_filter < mae_stationary
  double pearson_win_rate = 0.0;  // fraction with pearson_filter > pearson_stationary
  double mae_delta_mean = 0.0;    // mean of mae_filter - mae_stationary
  double mae_delta_se = 0.0;      // standard error of that mean (0 when n_used = 1)
  double pearson_delta_mean = 0.0;  // mean of pearson_filter - pearson_stationary
  double pearson_delta_se = 0.0;
  int n_used = 0;
  int n_excluded = 0;
};

// Win rates and paired metric differences. Ties count against the filtering
// model. Throws std::invalid_argument when results is empty or no
// replication is usable.
StudySummary summarize(const std::vector<ReplicationResult>& results);

// Runs the whole study: replication k at seed field_seed + k, concurrently
// across workers (0 = one per hardware thread). The partition is computed
// once and shared; results are bit-identical to independent run_replication
// calls and independent of the worker count. When replications run
// concurrently each fit is held to one worker so the pool is not
// oversubscribed.
std::vector<ReplicationResult> run_study(const SimScenario& scenario, int n_workers = 0);

}  // namespace luf
