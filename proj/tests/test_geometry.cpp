#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "lufilter/geometry.hpp"
#include "lufilter/rng.hpp"

using namespace luf;

TEST_CASE("pairwise_distances: single location gives the 1x1 zero matrix") {
  const Eigen::MatrixXd d = pairwise_distances({{1, 0.3, -0.7}});
  REQUIRE(d.rows() == 1);
  CHECK(d(0, 0) == 0.0);
}

TEST_CASE("pairwise_distances: 3-4-5 triangle") {
  const Eigen::MatrixXd d = pairwise_distances({{1, 0.0, 0.0}, {2, 3.0, 4.0}});
  CHECK(d(0, 1) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(d(1, 0) == d(0, 1));
  CHECK(d(0, 0) == 0.0);
  CHECK(d(1, 1) == 0.0);
}

TEST_CASE("pairwise_distances: 100 random points match the per-pair formula") {
  Rng r(31);
  std::vector<Location> locs;
  for (long i = 0; i < 100; ++i) locs.push_back({i, r.uniform(-5, 5), r.uniform(-5, 5)});
  const Eigen::MatrixXd d = pairwise_distances(locs);
  REQUIRE(d.rows() == 100);
  for (int i = 0; i < 100; ++i) {
    for (int j = 0; j < 100; ++j) {
      const double dx = locs[i].x - locs[j].x, dy = locs[i].y - locs[j].y;
      CHECK(d(i, j) == doctest::Approx(std::sqrt(dx * dx + dy * dy)).epsilon(1e-14));
      CHECK(d(i, j) == d(j, i));
    }
  }
}

TEST_CASE("pairwise_distances rejects non-finite coordinates") {
  CHECK_THROWS_AS(
      pairwise_distances({{1, 0.0, 0.0}, {2, std::numeric_limits<double>::infinity(), 1.0}}),
      std::invalid_argument);
  CHECK_THROWS_AS(
      pairwise_distances({{1, std::numeric_limits<double>::quiet_NaN(), 0.0}}),
      std::invalid_argument);
}

TEST_CASE("cross_distances matches the per-pair formula and rejects bad input") {
  Rng r(77);
  std::vector<Location> rows, cols;
  for (long i = 0; i < 8; ++i) rows.push_back({i, r.uniform(-3, 3), r.uniform(-3, 3)});
  for (long j = 0; j < 5; ++j) cols.push_back({100 + j, r.uniform(-3, 3), r.uniform(-3, 3)});
  cols[2] = {102, rows[4].x, rows[4].y};  // one exactly coincident pair

  const Eigen::MatrixXd d = cross_distances(rows, cols);
  REQUIRE(d.rows() == 8);
  REQUIRE(d.cols() == 5);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 5; ++j)
      CHECK(d(i, j) == dist(rows[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)]));
  CHECK(d(4, 2) == 0.0);

  CHECK_THROWS_AS(
      cross_distances({{1, std::numeric_limits<double>::quiet_NaN(), 0.0}}, {{2, 0.0, 0.0}}),
      std::invalid_argument);
  CHECK_THROWS_AS(
      cross_distances({{1, 0.0, 0.0}}, {{2, 0.0, std::numeric_limits<double>::infinity()}}),
      std::invalid_argument);
}
