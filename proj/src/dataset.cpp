#include "lufilter/dataset.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "lufilter/io.hpp"

namespace luf {

std::vector<int> RatingsDataset::counts_per_location() const {
  std::vector<int> counts(locations.size(), 0);
  for (const auto& r : ratings) ++counts[static_cast<std::size_t>(r.loc)];
  return counts;
}

Eigen::MatrixXd RatingsDataset::X() const {
  Eigen::MatrixXd x(n(), p());
  for (int r = 0; r < n(); ++r) x.row(r) = ratings[static_cast<std::size_t>(r)].x.transpose();
  return x;
}

Eigen::MatrixXd RatingsDataset::H_dense() const {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n(), m());
  for (int r = 0; r < n(); ++r) h(r, ratings[static_cast<std::size_t>(r)].loc) = 1.0;
  return h;
}

Eigen::MatrixXd RatingsDataset::M_dense() const {
  Eigen::MatrixXd mm = Eigen::MatrixXd::Zero(m(), Q);
  for (int i = 0; i < m(); ++i) mm(i, location_category[static_cast<std::size_t>(i)] - 1) = 1.0;
  return mm;
}

Eigen::MatrixXd RatingsDataset::M_star_dense() const {
  Eigen::MatrixXd ms = Eigen::MatrixXd::Zero(n(), Q);
  for (int r = 0; r < n(); ++r) ms(r, rating_category(r) - 1) = 1.0;
  return ms;
}

Eigen::VectorXd RatingsDataset::mean_vec(const Eigen::VectorXd& beta,
                                         const Eigen::VectorXd& delta) const {
  if (beta.size() != p()) throw std::invalid_argument("mean_vec: beta size != p");
  if (delta.size() != Q) throw std::invalid_argument("mean_vec: delta size != Q");
  Eigen::VectorXd mu(n());
  for (int r = 0; r < n(); ++r) {
    mu(r) = delta(rating_category(r) - 1);
    if (p() > 0) mu(r) += ratings[static_cast<std::size_t>(r)].x.dot(beta);
  }
  return mu;
}

Eigen::VectorXd RatingsDataset::y_vec() const {
  Eigen::VectorXd y(n());
  for (int r = 0; r < n(); ++r) y(r) = static_cast<double>(ratings[static_cast<std::size_t>(r)].y);
  return y;
}

std::pair<Eigen::VectorXd, double> RatingsDataset::centered_ratings() const {
  Eigen::VectorXd y = y_vec();
  const double mean = y.mean();
  y.array() -= mean;
  return {std::move(y), mean};
}

bool RatingsDataset::has_all_levels() const {
  std::vector<bool> seen(static_cast<std::size_t>(K), false);
  for (const auto& r : ratings) seen[static_cast<std::size_t>(r.y - 1)] = true;
  for (const bool s : seen) {
    if (!s) return false;
  }
  return true;
}

void RatingsDataset::validate() const {
  if (Q < 1) throw std::invalid_argument("dataset: Q must be >= 1");
  if (K < 2) throw std::invalid_argument("dataset: K must be >= 2");
  if (locations.empty()) throw std::invalid_argument("dataset: no locations");
  if (ratings.empty()) throw std::invalid_argument("dataset: no ratings");
  if (locations.size() != location_category.size()) {
    throw std::invalid_argument("dataset: locations/location_category size mismatch");
  }
  std::unordered_map<long, std::size_t> ids;
  for (std::size_t i = 0; i < locations.size(); ++i) {
    const auto& l = locations[i];
    if (!std::isfinite(l.x) || !std::isfinite(l.y)) {
      throw std::invalid_argument("dataset: non-finite coordinates at location id " +
                                  std::to_string(l.id));
    }
    if (!ids.emplace(l.id, i).second) {
      throw std::invalid_argument("dataset: duplicate location id " + std::to_string(l.id));
    }
    const int c = location_category[i];
    if (c < 1 || c > Q) {
      throw std::invalid_argument("dataset: location id " + std::to_string(l.id) +
                                  " category outside 1..Q");
    }
  }
  std::vector<int> counts(locations.size(), 0);
  for (const auto& r : ratings) {
    if (r.loc < 0 || r.loc >= m()) {
      throw std::invalid_argument("dataset: rating references a nonexistent location");
    }
    ++counts[static_cast<std::size_t>(r.loc)];
    if (r.y < 1 || r.y > K) throw std::invalid_argument("dataset: rating outside 1..K");
    if (r.x.size() != p()) {
      throw std::invalid_argument("dataset: covariate row size != p");
    }
    for (int j = 0; j < r.x.size(); ++j) {
      if (!std::isfinite(r.x(j))) throw std::invalid_argument("dataset: non-finite covariate");
    }
  }
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == 0) {
      throw std::invalid_argument("dataset: location id " + std::to_string(locations[i].id) +
                                  " has no ratings");
    }
  }
}

RatingsDataset ingest_ratings(const std::string& path, const LandUsePartition* partition,
                              const IngestOptions& opt, IngestReport* report) {
  if (opt.K < 2) throw std::invalid_argument("ingest_ratings: K must be >= 2");
  const CsvTable t = read_csv(path);
  const std::size_t c_id = t.require_column("location_id", path);
  const std::size_t c_x = t.require_column("x", path);
  const std::size_t c_y = t.require_column("y", path);
  const std::size_t c_rating = t.require_column("rating", path);
  const auto c_cat = t.column("category");
  if (!c_cat && partition == nullptr) {
    throw std::runtime_error(path + ": no category column and no partition to assign one");
  }

  // every remaining column is a covariate; require the documented cov_ prefix
  // so stray columns are an error rather than silently entering the design
  std::vector<std::size_t> cov_cols;
  std::vector<std::string> cov_names;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (c == c_id || c == c_x || c == c_y || c == c_rating || (c_cat && c == *c_cat)) continue;
    if (t.header[c].rfind("cov_", 0) != 0) {
      throw std::runtime_error(path + ": unexpected column '" + t.header[c] +
                               "' (covariates must be named cov_*)");
    }
    cov_cols.push_back(c);
    cov_names.push_back(t.header[c]);
  }

  RatingsDataset ds;
  ds.K = opt.K;
  ds.covariate_names = cov_names;

  struct LocInfo {
    int index = -1;    // into ds.locations; -1 = rejected location
    double x = 0, y = 0;
    int reported_cat = 0;  // 0 = no category column
  };
  std::unordered_map<long, LocInfo> seen;
  IngestReport rep;

  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const long line = t.line_numbers[i];
    ++rep.rows_read;

    const long loc_id = parse_long(row[c_id], "location_id", line);
    const double x = parse_double(row[c_x], "x", line);
    const double y = parse_double(row[c_y], "y", line);
    if (!std::isfinite(x) || !std::isfinite(y)) {
      throw std::runtime_error(path + ":" + std::to_string(line) + ": non-finite coordinates");
    }
    long rating = parse_long(row[c_rating], "rating", line);
    if (opt.reverse_scale) rating = opt.K + 1 - rating;
    if (rating < 1 || rating > opt.K) {
      throw std::runtime_error(path + ":" + std::to_string(line) + ": rating " +
                               std::to_string(rating) + " outside 1.." + std::to_string(opt.K) +
                               (opt.reverse_scale ? " (after scale reversal)" : ""));
    }
    int reported_cat = 0;
    if (c_cat) {
      reported_cat = static_cast<int>(parse_long(row[*c_cat], "category", line));
      if (reported_cat < 1) {
        throw std::runtime_error(path + ":" + std::to_string(line) + ": category " +
                                 std::to_string(reported_cat) + " must be >= 1");
      }
    }

    auto it = seen.find(loc_id);
    if (it == seen.end()) {
      LocInfo info{-1, x, y, reported_cat};
      int category = 0;
      bool rejected = false;
      const Location loc{loc_id, x, y};
      if (partition != nullptr) {
        if (c_cat) {
          const auto resolved =
              partition->resolve_incongruence(loc, reported_cat, opt.congruence_k);
          if (resolved) {
            category = *resolved;
          } else {
            rejected = true;  // recorded category has no nearby congruent parcel
          }
        } else {
          category = partition->assign_category(loc);
        }
      } else {
        category = reported_cat;
      }
      if (!rejected) {
        info.index = ds.m();
        ds.locations.push_back(loc);
        ds.location_category.push_back(category);
      }
      it = seen.emplace(loc_id, info).first;
    } else {
      const LocInfo& info = it->second;
      if (info.x != x || info.y != y) {
        throw std::runtime_error(path + ":" + std::to_string(line) + ": location id " +
                                 std::to_string(loc_id) + " reappears with different coordinates");
      }
      if (info.reported_cat != reported_cat) {
        throw std::runtime_error(path + ":" + std::to_string(line) + ": location id " +
                                 std::to_string(loc_id) + " reappears with a different category");
      }
    }

    if (it->second.index < 0) {
      ++rep.rows_dropped;
      rep.dropped_lines.push_back(line);
      continue;
    }

    RatingObs obs;
    obs.loc = it->second.index;
    obs.y = static_cast<int>(rating);
    obs.x.resize(static_cast<Eigen::Index>(cov_cols.size()));
    for (std::size_t c = 0; c < cov_cols.size(); ++c) {
      obs.x(static_cast<Eigen::Index>(c)) = parse_double(row[cov_cols[c]], cov_names[c], line);
    }
    ds.ratings.push_back(std::move(obs));
    ++rep.rows_kept;
  }

  if (ds.ratings.empty()) {
    throw std::runtime_error(path + ": no usable ratings (all rows dropped or file empty)");
  }

  int max_cat = 0;
  for (const int c : ds.location_category) max_cat = std::max(max_cat, c);
  ds.Q = opt.Q > 0 ? opt.Q : (partition != nullptr ? partition->Q() : max_cat);
  if (max_cat > ds.Q) {
    throw std::runtime_error(path + ": category " + std::to_string(max_cat) + " exceeds Q = " +
                             std::to_string(ds.Q));
  }

  ds.validate();
  if (report != nullptr) *report = rep;
  return ds;
}

}  // namespace luf
