#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "lufilter/geometry.hpp"
#include "lufilter/partition.hpp"

namespace luf {

// One ordinal rating: y in 1..K at locations[loc], with covariate row x.
struct RatingObs {
  int loc = 0;
  int y = 1;
  Eigen::VectorXd x;
};

// Observed data for the samplers: m distinct rated locations (each with a
// land-use category), n ratings referencing them. The incidence matrices are
// derived on demand — H (n×m) maps ratings to locations, M (m×Q) locations to
// categories, M* = HM. Ratings at the same location share its spatial effect
// but carry independent errors.
struct RatingsDataset {
  int Q = 1;  // land-use categories
  int K = 5;  // ordinal levels
  std::vector<Location> locations;
  std::vector<int> location_category;  // 1..Q, aligned with locations
  std::vector<RatingObs> ratings;
  std::vector<std::string> covariate_names;

  int m() const { return static_cast<int>(locations.size()); }
  int n() const { return static_cast<int>(ratings.size()); }
  int p() const { return static_cast<int>(covariate_names.size()); }

  // category of the location rating r references
  int rating_category(int r) const {
    return location_category[static_cast<std::size_t>(ratings[static_cast<std::size_t>(r)].loc)];
  }

  std::vector<int> counts_per_location() const;

  Eigen::MatrixXd X() const;        // n×p covariates
  Eigen::MatrixXd H_dense() const;  // n×m
  Eigen::MatrixXd M_dense() const;  // m×Q
  Eigen::MatrixXd M_star_dense() const;  // n×Q

  // X beta + M* delta without forming the dense incidence matrices.
  Eigen::VectorXd mean_vec(const Eigen::VectorXd& beta, const Eigen::VectorXd& delta) const;

  Eigen::VectorXd y_vec() const;  // ratings as reals
  // (y - grand mean, grand mean); the Gaussian-approximation response
  std::pair<Eigen::VectorXd, double> centered_ratings() const;

  bool has_all_levels() const;  // every ordinal level 1..K observed

  // Throws std::invalid_argument with a description on any broken invariant.
  void validate() const;
};

struct IngestOptions {
  int K = 5;
  int Q = 0;  // 0 = infer from data (max category seen)
  bool reverse_scale = false;  // recode y -> K+1-y before validation
  int congruence_k = 5;        // next-nearest parcels consulted on mismatch
};

struct IngestReport {
  long rows_read = 0;
  long rows_kept = 0;
  long rows_dropped = 0;            // ratings at category-incongruent locations
  std::vector<long> dropped_lines;  // their 1-based source lines
};

// Reads `location_id,x,y,rating,category[,cov_*...]` CSV into a validated
// dataset. The category column may be omitted when a partition is given
// (categories are then assigned by nearest parcel); when both are present,
// mismatches are reconciled through resolve_incongruence and rejected
// locations' rows are dropped and counted in the report. Malformed rows,
// out-of-range ratings, and inconsistent duplicate locations are hard errors
// carrying the source line.
RatingsDataset ingest_ratings(const std::string& path, const LandUsePartition* partition,
                              const IngestOptions& opt = {}, IngestReport* report = nullptr);

}  // namespace luf
