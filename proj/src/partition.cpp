#include "lufilter/partition.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>
#include <unordered_set>

#include "lufilter/io.hpp"

namespace luf {

LandUsePartition::LandUsePartition(int q, std::vector<Parcel> parcels,
                                   std::vector<std::string> category_names)
    : q_(q), parcels_(std::move(parcels)), names_(std::move(category_names)) {
  if (q_ < 1) throw std::invalid_argument("LandUsePartition: Q must be >= 1");
  if (parcels_.empty()) {
    throw std::invalid_argument("LandUsePartition: parcel set is empty; category lookup "
                                "would be undefined everywhere");
  }
  std::unordered_set<long> ids;
  for (const auto& p : parcels_) {
    if (!std::isfinite(p.centroid.x) || !std::isfinite(p.centroid.y)) {
      throw std::invalid_argument("LandUsePartition: non-finite centroid for parcel id " +
                                  std::to_string(p.centroid.id));
    }
    if (p.category < 1 || p.category > q_) {
      throw std::invalid_argument("LandUsePartition: parcel id " + std::to_string(p.centroid.id) +
                                  " has category " + std::to_string(p.category) +
                                  " outside 1.." + std::to_string(q_));
    }
    if (!ids.insert(p.centroid.id).second) {
      throw std::invalid_argument("LandUsePartition: duplicate parcel id " +
                                  std::to_string(p.centroid.id));
    }
  }
  if (names_.empty()) {
    if (q_ == 3) {
      names_ = {"residential", "nonresidential", "other"};
    } else {
      for (int c = 1; c <= q_; ++c) names_.push_back("category_" + std::to_string(c));
    }
  } else if (static_cast<int>(names_.size()) != q_) {
    throw std::invalid_argument("LandUsePartition: category_names size != Q");
  }
  build_index();
}

void LandUsePartition::build_index() {
  double max_x = parcels_[0].centroid.x, max_y = parcels_[0].centroid.y;
  min_x_ = max_x;
  min_y_ = max_y;
  for (const auto& p : parcels_) {
    min_x_ = std::min(min_x_, p.centroid.x);
    min_y_ = std::min(min_y_, p.centroid.y);
    max_x = std::max(max_x, p.centroid.x);
    max_y = std::max(max_y, p.centroid.y);
  }
  const double w = max_x - min_x_, h = max_y - min_y_;
  const double side = std::max(w, h);
  // aim for ~2 parcels per bucket
  const int per_dim =
      std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(parcels_.size()) / 2.0))));
  cell_ = side > 0.0 ? side / per_dim : 1.0;
  nx_ = side > 0.0 ? static_cast<int>(std::floor(w / cell_)) + 1 : 1;
  ny_ = side > 0.0 ? static_cast<int>(std::floor(h / cell_)) + 1 : 1;
  buckets_.assign(static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_), {});
  for (std::uint32_t i = 0; i < parcels_.size(); ++i) {
    buckets_[cell_of(parcels_[i].centroid.x, parcels_[i].centroid.y)].push_back(i);
  }
}

std::size_t LandUsePartition::cell_of(double x, double y) const {
  const int gx = std::clamp(static_cast<int>(std::floor((x - min_x_) / cell_)), 0, nx_ - 1);
  const int gy = std::clamp(static_cast<int>(std::floor((y - min_y_) / cell_)), 0, ny_ - 1);
  return static_cast<std::size_t>(gy) * static_cast<std::size_t>(nx_) + static_cast<std::size_t>(gx);
}

std::vector<std::size_t> LandUsePartition::nearest(const Location& loc, std::size_t count) const {
  if (!std::isfinite(loc.x) || !std::isfinite(loc.y)) {
    throw std::invalid_argument("LandUsePartition::nearest: non-finite query coordinates");
  }
  const std::size_t want = std::min(count, parcels_.size());
  if (want == 0) return {};

  const int cx = std::clamp(static_cast<int>(std::floor((loc.x - min_x_) / cell_)), 0, nx_ - 1);
  const int cy = std::clamp(static_cast<int>(std::floor((loc.y - min_y_) / cell_)), 0, ny_ - 1);

  // (squared distance, parcel id, parcel index); the id is the tie rule
  using Cand = std::tuple<double, long, std::size_t>;
  std::vector<Cand> cand;

  const auto scan_bucket = [&](int gx, int gy) {
    const auto& b = buckets_[static_cast<std::size_t>(gy) * static_cast<std::size_t>(nx_) +
                             static_cast<std::size_t>(gx)];
    for (const std::uint32_t idx : b) {
      const Parcel& p = parcels_[idx];
      cand.emplace_back(sq_dist(loc, p.centroid), p.centroid.id, static_cast<std::size_t>(idx));
    }
  };

  const int ring_max = std::max(nx_, ny_);  // beyond this every bucket is scanned
  for (int r = 0; r <= ring_max; ++r) {
    const int x_lo = cx - r, x_hi = cx + r, y_lo = cy - r, y_hi = cy + r;
    for (int gy = std::max(0, y_lo); gy <= std::min(ny_ - 1, y_hi); ++gy) {
      const bool edge_row = (gy == y_lo || gy == y_hi);
      if (edge_row) {
        for (int gx = std::max(0, x_lo); gx <= std::min(nx_ - 1, x_hi); ++gx) scan_bucket(gx, gy);
      } else {
        if (x_lo >= 0) scan_bucket(x_lo, gy);
        if (x_hi <= nx_ - 1) scan_bucket(x_hi, gy);
      }
    }
    if (cand.size() >= want) {
      // kth-best squared distance so far
      std::vector<Cand> top(cand);
      std::nth_element(top.begin(), top.begin() + static_cast<std::ptrdiff_t>(want - 1), top.end());
      const double kth_d2 = std::get<0>(top[want - 1]);
      // Any parcel in ring r+1 or beyond lies at distance >= r*cell_ (r full
      // buckets of gap along one axis). Continue while that bound could still
      // tie the kth best, so an equidistant lower-id parcel is never missed.
      const double bound = static_cast<double>(r) * cell_;
      if (bound * bound > kth_d2) break;
    }
  }

  std::sort(cand.begin(), cand.end());
  cand.resize(want);
  std::vector<std::size_t> out(want);
  for (std::size_t i = 0; i < want; ++i) out[i] = std::get<2>(cand[i]);
  return out;
}

int LandUsePartition::assign_category(const Location& loc) const {
  return parcels_[nearest(loc, 1)[0]].category;
}

std::optional<int> LandUsePartition::resolve_incongruence(const Location& loc,
                                                          int reported_category, int k) const {
  if (k < 1) throw std::invalid_argument("resolve_incongruence: k must be >= 1");
  if (reported_category < 1 || reported_category > q_) {
    throw std::invalid_argument("resolve_incongruence: reported category " +
                                std::to_string(reported_category) + " outside 1.." +
                                std::to_string(q_));
  }
  const auto nn = nearest(loc, static_cast<std::size_t>(k) + 1);
  for (const std::size_t idx : nn) {
    if (parcels_[idx].category == reported_category) return reported_category;
  }
  return std::nullopt;
}

std::map<std::string, int> load_tax_code_map(const std::string& path) {
  const IniConfig cfg = IniConfig::parse_file(path);
  std::map<std::string, int> out;
  for (const auto& [sec, kv] : cfg.sections()) {
    if (!sec.empty() && sec != "tax_codes") continue;
    for (const auto& [code, value] : kv) {
      out[code] = static_cast<int>(parse_long(value, "tax code category for '" + code + "'", 0));
    }
  }
  if (out.empty()) throw std::runtime_error(path + ": no tax code mappings found");
  return out;
}

LandUsePartition load_parcels_csv(const std::string& path,
                                  const std::map<std::string, int>* tax_map, int q) {
  const CsvTable t = read_csv(path);
  const std::size_t c_id = t.require_column("parcel_id", path);
  const std::size_t c_x = t.require_column("x", path);
  const std::size_t c_y = t.require_column("y", path);
  const std::size_t c_tax = t.require_column("tax_code", path);
  const auto c_cat = t.column("category");
  if (!c_cat && tax_map == nullptr) {
    throw std::runtime_error(path + ": no category column and no tax-code map given");
  }

  std::vector<Parcel> parcels;
  parcels.reserve(t.rows.size());
  int max_cat = 0;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const long line = t.line_numbers[i];
    Parcel p;
    p.centroid.id = parse_long(row[c_id], "parcel_id", line);
    p.centroid.x = parse_double(row[c_x], "x", line);
    p.centroid.y = parse_double(row[c_y], "y", line);
    p.tax_code = row[c_tax];
    int from_map = 0;
    if (tax_map != nullptr) {
      const auto it = tax_map->find(p.tax_code);
      if (it == tax_map->end()) {
        throw std::runtime_error(path + ":" + std::to_string(line) + ": tax code '" +
                                 p.tax_code + "' not in the tax-code map");
      }
      from_map = it->second;
    }
    if (c_cat) {
      p.category = static_cast<int>(parse_long(row[*c_cat], "category", line));
      if (tax_map != nullptr && p.category != from_map) {
        throw std::runtime_error(path + ":" + std::to_string(line) +
                                 ": category column disagrees with the tax-code map");
      }
    } else {
      p.category = from_map;
    }
    max_cat = std::max(max_cat, p.category);
    parcels.push_back(std::move(p));
  }
  return LandUsePartition(q > 0 ? q : max_cat, std::move(parcels));
}

}  // namespace luf
