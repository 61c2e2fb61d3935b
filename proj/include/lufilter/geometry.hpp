#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

namespace luf {

// A point in the study region. Coordinates are planar in whatever length unit
// the dataset uses; decay rates carry the reciprocal unit. Ids must be unique
// within a dataset.
struct Location {
  long id = 0;
  double x = 0.0;
  double y = 0.0;
};

inline double sq_dist(const Location& a, const Location& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

inline double dist(const Location& a, const Location& b) {
  return std::sqrt(sq_dist(a, b));
}

// D(i,j) = ||s_i - s_j||, zero diagonal, symmetric.
// Throws std::invalid_argument on non-finite coordinates.
Eigen::MatrixXd pairwise_distances(const std::vector<Location>& locs);

// D(i,j) = ||rows_i - cols_j|| between two location sets.
// Throws std::invalid_argument on non-finite coordinates.
Eigen::MatrixXd cross_distances(const std::vector<Location>& rows,
                                const std::vector<Location>& cols);

}  // namespace luf
