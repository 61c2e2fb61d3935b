#include "lufilter/geometry.hpp"

#include <stdexcept>
#include <string>

namespace luf {

Eigen::MatrixXd pairwise_distances(const std::vector<Location>& locs) {
  const auto n = static_cast<Eigen::Index>(locs.size());
  for (const auto& l : locs) {
    if (!std::isfinite(l.x) || !std::isfinite(l.y)) {
      throw std::invalid_argument("pairwise_distances: non-finite coordinates at location id " +
                                  std::to_string(l.id));
    }
  }
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = dist(locs[static_cast<std::size_t>(i)], locs[static_cast<std::size_t>(j)]);
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

Eigen::MatrixXd cross_distances(const std::vector<Location>& rows,
                                const std::vector<Location>& cols) {
  for (const auto* set : {&rows, &cols}) {
    for (const auto& l : *set) {
      if (!std::isfinite(l.x) || !std::isfinite(l.y)) {
        throw std::invalid_argument("cross_distances: non-finite coordinates at location id " +
                                    std::to_string(l.id));
      }
    }
  }
  Eigen::MatrixXd d(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (Eigen::Index i = 0; i < d.rows(); ++i)
    for (Eigen::Index j = 0; j < d.cols(); ++j)
      d(i, j) = dist(rows[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)]);
  return d;
}

}  // namespace luf
