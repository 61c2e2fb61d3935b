#include <doctest.h>

#include <algorithm>
#include <tuple>
#include <vector>

#include "lufilter/partition.hpp"
#include "lufilter/rng.hpp"
#include "test_util.hpp"

using namespace luf;

namespace {

// Brute-force oracle: full scan ordered by (squared distance, id).
std::vector<std::size_t> brute_nearest(const std::vector<Parcel>& parcels, const Location& loc,
                                       std::size_t count) {
  std::vector<std::tuple<double, long, std::size_t>> all;
  for (std::size_t i = 0; i < parcels.size(); ++i) {
    all.emplace_back(sq_dist(loc, parcels[i].centroid), parcels[i].centroid.id, i);
  }
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < std::min(count, all.size()); ++i) out.push_back(std::get<2>(all[i]));
  return out;
}

std::vector<Parcel> random_parcels(Rng& rng, std::size_t n, int q, double lo = 0.0,
                                   double hi = 1.0) {
  std::vector<Parcel> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({{static_cast<long>(i + 1), rng.uniform(lo, hi), rng.uniform(lo, hi)},
                   "tc",
                   rng.uniform_int(1, q)});
  }
  return out;
}

}  // namespace

TEST_CASE("assign_category: coincident centroid and strictly-nearer parcel") {
  const LandUsePartition part(3, {{{1, 0.0, 0.0}, "r", 1},
                                  {{2, 10.0, 0.0}, "c", 2},
                                  {{3, 5.0, 5.0}, "o", 3}});
  CHECK(part.assign_category({99, 10.0, 0.0}) == 2);  // exactly on parcel 2
  CHECK(part.assign_category({99, 4.0, 0.0}) == 1);   // strictly nearer to parcel 1
}

TEST_CASE("assign_category ties break to the lowest parcel id") {
  // two centroids equidistant from the query; ids deliberately out of
  // insertion order
  const LandUsePartition part(2, {{{7, 1.0, 0.0}, "a", 2}, {{3, -1.0, 0.0}, "b", 1}});
  CHECK(part.assign_category({99, 0.0, 0.0}) == 1);  // id 3 < id 7
  // same point duplicated under different ids
  const LandUsePartition dup(2, {{{12, 2.0, 2.0}, "a", 2}, {{4, 2.0, 2.0}, "b", 1}});
  CHECK(dup.assign_category({99, 5.0, 5.0}) == 1);
}

TEST_CASE("assign_category matches brute force on random instances") {
  Rng rng(101);
  const auto parcels = random_parcels(rng, 50, 3);
  const LandUsePartition part(3, parcels);
  for (int t = 0; t < 20; ++t) {
    const Location q{1000 + t, rng.uniform(-0.2, 1.2), rng.uniform(-0.2, 1.2)};
    const auto expect = brute_nearest(parcels, q, 1)[0];
    CHECK(part.assign_category(q) == parcels[expect].category);
  }
}

TEST_CASE("nearest matches brute force including k-NN order, larger set") {
  Rng rng(555);
  auto parcels = random_parcels(rng, 400, 3);
  // inject exact duplicates and a dense cluster to stress tie handling
  for (int i = 0; i < 10; ++i) {
    parcels.push_back({{static_cast<long>(900 + i), 0.5, 0.5}, "dup", 1 + (i % 3)});
  }
  const LandUsePartition part(3, parcels);
  for (int t = 0; t < 50; ++t) {
    // queries both inside and far outside the bounding box
    const Location q{2000 + t, rng.uniform(-3.0, 4.0), rng.uniform(-3.0, 4.0)};
    for (const std::size_t k : {std::size_t{1}, std::size_t{6}, std::size_t{25}}) {
      CHECK(part.nearest(q, k) == brute_nearest(parcels, q, k));
    }
  }
  CHECK(part.nearest({1, 0.5, 0.5}, 10000).size() == parcels.size());
}

TEST_CASE("assign_category is deterministic and idempotent") {
  Rng rng(9);
  const auto parcels = random_parcels(rng, 64, 3);
  const LandUsePartition part(3, parcels);
  const Location q{5, 0.33, 0.77};
  const int first = part.assign_category(q);
  for (int i = 0; i < 5; ++i) CHECK(part.assign_category(q) == first);
}

TEST_CASE("resolve_incongruence: congruent, reassigned, and rejected cases") {
  // nearest is category 3; 3rd-nearest is category 1
  const LandUsePartition part(3, {{{1, 0.0, 0.0}, "t", 3},
                                  {{2, 1.0, 0.0}, "t", 2},
                                  {{3, 2.0, 0.0}, "t", 1},
                                  {{4, 3.0, 0.0}, "t", 3},
                                  {{5, 4.0, 0.0}, "t", 3},
                                  {{6, 5.0, 0.0}, "t", 3},
                                  {{7, 6.0, 0.0}, "t", 3}});
  const Location q{99, -0.1, 0.0};
  // nearest parcel agrees with the report
  CHECK(part.resolve_incongruence(q, 3).value() == 3);
  // report mismatches nearest but a within-k parcel agrees
  CHECK(part.resolve_incongruence(q, 1).value() == 1);
  CHECK(part.resolve_incongruence(q, 2).value() == 2);
  // k=1: only parcel 2 (category 2) is consulted beyond the nearest
  CHECK(!part.resolve_incongruence(q, 1, 1).has_value());

  // six nearest all category 3: report of 1 is rejected at the default k=5
  const LandUsePartition all3(3, {{{1, 0.0, 0.0}, "t", 3},
                                  {{2, 1.0, 0.0}, "t", 3},
                                  {{3, 2.0, 0.0}, "t", 3},
                                  {{4, 3.0, 0.0}, "t", 3},
                                  {{5, 4.0, 0.0}, "t", 3},
                                  {{6, 5.0, 0.0}, "t", 3},
                                  {{7, 60.0, 0.0}, "t", 1}});
  CHECK(!all3.resolve_incongruence(q, 1).has_value());
  // never returns anything but the reported category
  Rng rng(77);
  const auto parcels = random_parcels(rng, 30, 3);
  const LandUsePartition rnd(3, parcels);
  for (int t = 0; t < 30; ++t) {
    const Location qq{3000 + t, rng.uniform(0, 1), rng.uniform(0, 1)};
    const int rep = rng.uniform_int(1, 3);
    const auto res = rnd.resolve_incongruence(qq, rep);
    if (res) CHECK(*res == rep);
  }
}

TEST_CASE("construction rejects invalid configurations") {
  CHECK_THROWS_AS(LandUsePartition(3, {}), std::invalid_argument);
  CHECK_THROWS_AS(LandUsePartition(0, {{{1, 0, 0}, "t", 1}}), std::invalid_argument);
  CHECK_THROWS_AS(LandUsePartition(2, {{{1, 0, 0}, "t", 3}}), std::invalid_argument);
  CHECK_THROWS_AS(LandUsePartition(2, {{{1, 0, 0}, "t", 1}, {{1, 1, 1}, "t", 2}}),
                  std::invalid_argument);  // duplicate id
  CHECK_THROWS_AS(LandUsePartition(2, {{{1, 0, 0}, "t", 1}}, {"only_one"}),
                  std::invalid_argument);  // names size mismatch
  const LandUsePartition def3(3, {{{1, 0, 0}, "t", 1}});
  CHECK(def3.category_names() ==
        std::vector<std::string>{"residential", "nonresidential", "other"});
  CHECK_THROWS_AS(def3.resolve_incongruence({1, 0, 0}, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(def3.resolve_incongruence({1, 0, 0}, 9), std::invalid_argument);
}

TEST_CASE("load_parcels_csv: category column, tax map, and mismatch errors") {
  const auto csv = testutil::write_temp_file("parcels.csv",
                                             "parcel_id,x,y,tax_code,category\n"
                                             "1,0.0,0.0,R1,1\n"
                                             "2,1.0,0.0,C7,2\n"
                                             "3,0.0,1.0,X9,3\n");
  const LandUsePartition part = load_parcels_csv(csv);
  CHECK(part.Q() == 3);
  CHECK(part.parcels().size() == 3);
  CHECK(part.assign_category({9, 0.9, 0.1}) == 2);

  const auto taxmap_path = testutil::write_temp_file("tax.conf",
                                                     "[tax_codes]\nR1 = 1\nC7 = 2\nX9 = 3\n");
  const auto tax = load_tax_code_map(taxmap_path);
  CHECK(tax.at("C7") == 2);

  // no category column: map drives the assignment
  const auto csv_nocat = testutil::write_temp_file("parcels_nocat.csv",
                                                   "parcel_id,x,y,tax_code\n"
                                                   "1,0.0,0.0,R1\n"
                                                   "2,1.0,0.0,C7\n");
  CHECK_THROWS(load_parcels_csv(csv_nocat));  // needs the map
  const LandUsePartition part2 = load_parcels_csv(csv_nocat, &tax);
  CHECK(part2.parcels()[1].category == 2);

  // column and map disagree
  const auto csv_conflict = testutil::write_temp_file("parcels_conflict.csv",
                                                      "parcel_id,x,y,tax_code,category\n"
                                                      "1,0.0,0.0,R1,2\n");
  CHECK_THROWS(load_parcels_csv(csv_conflict, &tax));

  // unknown tax code
  const auto csv_unknown = testutil::write_temp_file("parcels_unknown.csv",
                                                     "parcel_id,x,y,tax_code\n"
                                                     "1,0.0,0.0,ZZ\n");
  CHECK_THROWS(load_parcels_csv(csv_unknown, &tax));
}
