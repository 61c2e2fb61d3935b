#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lufilter/geometry.hpp"

namespace luf {

struct Parcel {
  Location centroid;
  std::string tax_code;
  int category = 1;  // 1..Q
};

// Partition of the study region into Q land-use categories, backed by parcel
// centroids: g(s) is the category of the centroid nearest to s, with distance
// ties broken by lowest parcel id. Queries run through a uniform grid-bucket
// index with ring expansion; the index is exact (results always equal a
// brute-force scan), it only accelerates. Immutable after construction, so
// concurrent queries from multiple workers are safe.
class LandUsePartition {
 public:
  LandUsePartition(int Q, std::vector<Parcel> parcels,
                   std::vector<std::string> category_names = {});

  int Q() const { return q_; }
  const std::vector<Parcel>& parcels() const { return parcels_; }
  const std::vector<std::string>& category_names() const { return names_; }

  // g(s): category of the nearest parcel.
  int assign_category(const Location& loc) const;

  // Indices into parcels() of the `count` nearest parcels, ordered by
  // (distance, id) lexicographically; fewer if count exceeds the parcel set.
  std::vector<std::size_t> nearest(const Location& loc, std::size_t count) const;

  // Reconciles a reported category with the partition: accepted if the
  // nearest parcel agrees, or if any of the next k nearest parcels does.
  // nullopt means the report is rejected as a recording error — a normal
  // outcome for the caller to count, not a fault.
  std::optional<int> resolve_incongruence(const Location& loc, int reported_category,
                                          int k = 5) const;

 private:
  void build_index();
  std::size_t cell_of(double x, double y) const;

  int q_ = 1;
  std::vector<Parcel> parcels_;
  std::vector<std::string> names_;

  // uniform bucket grid over the centroid bounding box
  double min_x_ = 0.0, min_y_ = 0.0, cell_ = 1.0;
  int nx_ = 1, ny_ = 1;
  std::vector<std::vector<std::uint32_t>> buckets_;
};

// `tax_code = category` lines (optionally under a [tax_codes] section).
std::map<std::string, int> load_tax_code_map(const std::string& path);

// Reads `parcel_id,x,y,tax_code,category` CSV. When the category column is
// absent, tax_map is required and categories come from it; when both are
// present the column must agree with the map. Q defaults to the largest
// category seen; pass q > 0 to fix it explicitly.
LandUsePartition load_parcels_csv(const std::string& path,
                                  const std::map<std::string, int>* tax_map = nullptr,
                                  int q = 0);

}  // namespace luf
