#include "lufilter/covariance.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "lufilter/stats.hpp"

namespace luf {

namespace {

bool is_positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

// Row-major lower-triangle coordinate names: a_11, a_21, a_22, ...
std::string a_name(int r, int c) {
  return "a_" + std::to_string(r + 1) + std::to_string(c + 1);
}

}  // namespace

double FilterCovParams::total_var(int q) const {
  if (q < 1 || q > Q()) throw std::invalid_argument("total_var: category out of range");
  return A.row(q - 1).squaredNorm() + sigma2(q - 1);
}

void FilterCovParams::validate() const {
  const int q = Q();
  if (q < 1) throw std::invalid_argument("FilterCovParams: A must be at least 1x1");
  if (A.cols() != q) throw std::invalid_argument("FilterCovParams: A must be square");
  for (int r = 0; r < q; ++r) {
    for (int c = 0; c < q; ++c) {
      if (!std::isfinite(A(r, c)))
        throw std::invalid_argument("FilterCovParams: A has a non-finite entry");
      if (c > r && A(r, c) != 0.0)
        throw std::invalid_argument("FilterCovParams: A must be lower triangular");
    }
    if (A(r, r) <= 0.0)
      throw std::invalid_argument("FilterCovParams: diagonal of A must be positive");
  }
  if (phi.size() != q || sigma2.size() != q || delta.size() != q)
    throw std::invalid_argument("FilterCovParams: phi, sigma2 and delta must have length Q");
  for (int i = 0; i < q; ++i) {
    const bool inf_phi = std::isinf(phi(i)) && phi(i) > 0.0;
    if (!inf_phi && !is_positive_finite(phi(i)))
      throw std::invalid_argument("FilterCovParams: phi must be positive or +infinity");
    if (!is_positive_finite(sigma2(i)))
      throw std::invalid_argument("FilterCovParams: sigma2 must be positive and finite");
    if (!std::isfinite(delta(i)))
      throw std::invalid_argument("FilterCovParams: delta has a non-finite entry");
  }
  if (delta(0) != 0.0)
    throw std::invalid_argument("FilterCovParams: delta_1 must be 0 for identifiability");
}

FilterCovParams FilterCovParams::diagonal(int q, double a_diag, double phi0) {
  FilterCovParams p;
  p.A = Eigen::MatrixXd::Identity(q, q) * a_diag;
  p.phi = Eigen::VectorXd::Constant(q, phi0);
  p.sigma2 = Eigen::VectorXd::Ones(q);
  p.delta = Eigen::VectorXd::Zero(q);
  p.validate();
  return p;
}

void StationaryCovParams::validate() const {
  if (!is_positive_finite(phi))
    throw std::invalid_argument("StationaryCovParams: phi must be positive and finite");
  if (!is_positive_finite(tau2))
    throw std::invalid_argument("StationaryCovParams: tau2 must be positive and finite");
}

ModelKind kind_of(const CovParams& p) {
  return std::holds_alternative<FilterCovParams>(p) ? ModelKind::filtering
                                                    : ModelKind::stationary;
}

void validate(const CovParams& p) {
  std::visit([](const auto& q) { q.validate(); }, p);
}

Eigen::VectorXd delta_of(const CovParams& p, int q_total) {
  if (const auto* f = std::get_if<FilterCovParams>(&p)) {
    if (f->Q() != q_total)
      throw std::invalid_argument("delta_of: parameter Q does not match requested length");
    return f->delta;
  }
  return Eigen::VectorXd::Zero(q_total);
}

double exp_corr(double d, double phi) {
  if (!(d >= 0.0)) throw std::invalid_argument("exp_corr: distance must be nonnegative");
  if (std::isinf(phi) && phi > 0.0) return d == 0.0 ? 1.0 : 0.0;
  if (!is_positive_finite(phi)) throw std::invalid_argument("exp_corr: phi must be positive");
  return std::exp(-phi * d);
}

namespace {

// Sum over components of a_{g,q} a_{g',q} rho_q(d), skipping the infinite-phi
// sentinel instead of evaluating exp at infinity.
double weighted_corr_sum(const Eigen::MatrixXd& a, const Eigen::VectorXd& phi, int g_s,
                         int g_sp, double d) {
  double acc = 0.0;
  for (int q = 0; q < a.rows(); ++q) {
    const double w = a(g_s - 1, q) * a(g_sp - 1, q);
    if (w == 0.0) continue;
    if (std::isinf(phi(q))) {
      if (d == 0.0) acc += w;
      continue;
    }
    acc += w * std::exp(-phi(q) * d);
  }
  return acc;
}

void check_category(int g, int q, const char* where) {
  if (g < 1 || g > q) throw std::invalid_argument(std::string(where) + ": category out of range");
}

}  // namespace

double filtered_cov(const Location& s, const Location& sp, int g_s, int g_sp,
                    const FilterCovParams& p) {
  check_category(g_s, p.Q(), "filtered_cov");
  check_category(g_sp, p.Q(), "filtered_cov");
  return weighted_corr_sum(p.A, p.phi, g_s, g_sp, dist(s, sp));
}

double constrained_cov(const Location& s, const Location& sp, int g_s, int g_sp,
                       const FilterCovParams& p) {
  return filtered_cov(s, sp, g_s, g_sp, p) /
         std::sqrt(p.total_var(g_s) * p.total_var(g_sp));
}

double constrained_nugget(int q, const FilterCovParams& p) {
  check_category(q, p.Q(), "constrained_nugget");
  return p.sigma2(q - 1) / p.total_var(q);
}

double spatial_variance_proportion(int q, const Eigen::MatrixXd& a) {
  if (q < 1 || q > a.rows())
    throw std::invalid_argument("spatial_variance_proportion: category out of range");
  const double s = a.row(q - 1).squaredNorm();
  return s / (s + 1.0);
}

Eigen::MatrixXd cross_corr_block(const Location& s, const Location& sp,
                                 const FilterCovParams& p) {
  const int q = p.Q();
  const double d = dist(s, sp);
  Eigen::VectorXd inv_sd(q);
  for (int i = 1; i <= q; ++i) inv_sd(i - 1) = 1.0 / std::sqrt(p.total_var(i));
  Eigen::MatrixXd block(q, q);
  for (int r = 1; r <= q; ++r)
    for (int c = 1; c <= q; ++c)
      block(r - 1, c - 1) =
          weighted_corr_sum(p.A, p.phi, r, c, d) * inv_sd(r - 1) * inv_sd(c - 1);
  return block;
}

double noreplication_corr(const Location& s, const Location& sp, int g_s, int g_sp,
                          const FilterCovParams& p) {
  check_category(g_s, p.Q(), "noreplication_corr");
  check_category(g_sp, p.Q(), "noreplication_corr");
  const double norms = p.A.row(g_s - 1).norm() * p.A.row(g_sp - 1).norm();
  return weighted_corr_sum(p.A, p.phi, g_s, g_sp, dist(s, sp)) / norms;
}

double spatial_cov(const CovParams& p, const Location& a, int cat_a, const Location& b,
                   int cat_b, bool constrained) {
  if (const auto* f = std::get_if<FilterCovParams>(&p))
    return constrained ? constrained_cov(a, b, cat_a, cat_b, *f)
                       : filtered_cov(a, b, cat_a, cat_b, *f);
  const auto& st = std::get<StationaryCovParams>(p);
  return (1.0 - st.kappa()) * exp_corr(dist(a, b), st.phi);
}

double nugget_var(const CovParams& p, int cat, bool constrained) {
  if (const auto* f = std::get_if<FilterCovParams>(&p)) {
    if (constrained) return constrained_nugget(cat, *f);
    check_category(cat, f->Q(), "nugget_var");
    return f->sigma2(cat - 1);
  }
  return std::get<StationaryCovParams>(p).kappa();
}

namespace {

// Per-site weight rows and scale factors so the pair loop touches no
// category bookkeeping: cov(i,j) = scale_i scale_j sum_q w_i(q) w_j(q) rho_q(d).
struct SiteWeights {
  Eigen::MatrixXd w;       // one row per site: the site's category row of A
  Eigen::VectorXd scale;   // 1/sqrt(total variance) when constrained, else 1
};

SiteWeights site_weights(const std::vector<int>& cats, const FilterCovParams& p,
                         bool constrained) {
  const int n = static_cast<int>(cats.size());
  SiteWeights sw;
  sw.w.resize(n, p.Q());
  sw.scale.resize(n);
  for (int i = 0; i < n; ++i) {
    check_category(cats[i], p.Q(), "spatial_cov_matrix");
    sw.w.row(i) = p.A.row(cats[i] - 1);
    sw.scale(i) = constrained ? 1.0 / std::sqrt(p.total_var(cats[i])) : 1.0;
  }
  return sw;
}

double pair_cov(const SiteWeights& sw, const Eigen::VectorXd& phi, int i, int j, double d) {
  double acc = 0.0;
  for (int q = 0; q < phi.size(); ++q) {
    const double w = sw.w(i, q) * sw.w(j, q);
    if (w == 0.0) continue;
    if (std::isinf(phi(q))) {
      if (d == 0.0) acc += w;
      continue;
    }
    acc += w * std::exp(-phi(q) * d);
  }
  return acc * sw.scale(i) * sw.scale(j);
}

void check_sizes(std::size_t locs, std::size_t cats, const char* where) {
  if (locs != cats)
    throw std::invalid_argument(std::string(where) + ": locations and categories differ in length");
  if (locs == 0) throw std::invalid_argument(std::string(where) + ": empty location set");
}

}  // namespace

Eigen::MatrixXd spatial_cov_matrix(const std::vector<Location>& locs,
                                   const std::vector<int>& cats, const CovParams& p,
                                   bool constrained) {
  check_sizes(locs.size(), cats.size(), "spatial_cov_matrix");
  const int n = static_cast<int>(locs.size());
  Eigen::MatrixXd out(n, n);
  if (const auto* f = std::get_if<FilterCovParams>(&p)) {
    const SiteWeights sw = site_weights(cats, *f, constrained);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j <= i; ++j) {
        const double v = pair_cov(sw, f->phi, i, j, dist(locs[i], locs[j]));
        out(i, j) = v;
        out(j, i) = v;
      }
    }
    return out;
  }
  const auto& st = std::get<StationaryCovParams>(p);
  const double amp = 1.0 - st.kappa();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double v = amp * std::exp(-st.phi * dist(locs[i], locs[j]));
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

Eigen::MatrixXd spatial_cov_from_dists(const Eigen::MatrixXd& dists, const std::vector<int>& cats,
                                       const CovParams& p, bool constrained) {
  if (dists.rows() != dists.cols())
    throw std::invalid_argument("spatial_cov_from_dists: distance matrix must be square");
  check_sizes(static_cast<std::size_t>(dists.rows()), cats.size(), "spatial_cov_from_dists");
  const int n = static_cast<int>(dists.rows());
  if (const auto* f = std::get_if<FilterCovParams>(&p)) {
    const SiteWeights sw = site_weights(cats, *f, constrained);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
    for (int q = 0; q < f->Q(); ++q) {
      const Eigen::VectorXd wq = sw.w.col(q);
      if ((wq.array() == 0.0).all()) continue;
      const Eigen::MatrixXd outer = wq * wq.transpose();
      if (std::isinf(f->phi(q))) {
        // Infinite range: the component correlates only exactly coincident
        // sites (never via exp at infinity).
        out.array() += outer.array() * (dists.array() == 0.0).cast<double>();
      } else {
        out.array() += outer.array() * (-f->phi(q) * dists.array()).exp();
      }
    }
    out.array() *= (sw.scale * sw.scale.transpose()).array();
    // Vectorized exp may round the two triangles apart by one ulp (SIMD body
    // versus scalar tail); reflect the lower triangle for exact symmetry.
    out = out.selfadjointView<Eigen::Lower>();
    return out;
  }
  const auto& st = std::get<StationaryCovParams>(p);
  Eigen::MatrixXd out = (1.0 - st.kappa()) * (-st.phi * dists.array()).exp();
  out = out.selfadjointView<Eigen::Lower>();
  return out;
}

Eigen::MatrixXd spatial_cross_cov_matrix(const std::vector<Location>& rows_locs,
                                         const std::vector<int>& rows_cats,
                                         const std::vector<Location>& cols_locs,
                                         const std::vector<int>& cols_cats, const CovParams& p,
                                         bool constrained) {
  check_sizes(rows_locs.size(), rows_cats.size(), "spatial_cross_cov_matrix");
  check_sizes(cols_locs.size(), cols_cats.size(), "spatial_cross_cov_matrix");
  const int nr = static_cast<int>(rows_locs.size());
  const int nc = static_cast<int>(cols_locs.size());
  Eigen::MatrixXd out(nr, nc);
  if (const auto* f = std::get_if<FilterCovParams>(&p)) {
    // One weight table over the concatenated sites keeps a single code path.
    std::vector<int> all_cats(rows_cats);
    all_cats.insert(all_cats.end(), cols_cats.begin(), cols_cats.end());
    const SiteWeights sw = site_weights(all_cats, *f, constrained);
    for (int i = 0; i < nr; ++i)
      for (int j = 0; j < nc; ++j)
        out(i, j) = pair_cov(sw, f->phi, i, nr + j, dist(rows_locs[i], cols_locs[j]));
    return out;
  }
  const auto& st = std::get<StationaryCovParams>(p);
  const double amp = 1.0 - st.kappa();
  for (int i = 0; i < nr; ++i)
    for (int j = 0; j < nc; ++j)
      out(i, j) = amp * std::exp(-st.phi * dist(rows_locs[i], cols_locs[j]));
  return out;
}

Eigen::MatrixXd spatial_cross_cov_from_dists(const Eigen::MatrixXd& dists,
                                             const std::vector<int>& rows_cats,
                                             const std::vector<int>& cols_cats, const CovParams& p,
                                             bool constrained) {
  check_sizes(static_cast<std::size_t>(dists.rows()), rows_cats.size(),
              "spatial_cross_cov_from_dists");
  check_sizes(static_cast<std::size_t>(dists.cols()), cols_cats.size(),
              "spatial_cross_cov_from_dists");
  if (const auto* f = std::get_if<FilterCovParams>(&p)) {
    const SiteWeights rw = site_weights(rows_cats, *f, constrained);
    const SiteWeights cw = site_weights(cols_cats, *f, constrained);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dists.rows(), dists.cols());
    for (int q = 0; q < f->Q(); ++q) {
      const Eigen::VectorXd wr = rw.w.col(q);
      const Eigen::VectorXd wc = cw.w.col(q);
      if ((wr.array() == 0.0).all() || (wc.array() == 0.0).all()) continue;
      const Eigen::MatrixXd outer = wr * wc.transpose();
      if (std::isinf(f->phi(q))) {
        out.array() += outer.array() * (dists.array() == 0.0).cast<double>();
      } else {
        out.array() += outer.array() * (-f->phi(q) * dists.array()).exp();
      }
    }
    out.array() *= (rw.scale * cw.scale.transpose()).array();
    return out;
  }
  const auto& st = std::get<StationaryCovParams>(p);
  return (1.0 - st.kappa()) * (-st.phi * dists.array()).exp();
}

Eigen::MatrixXd observation_corr_matrix(const RatingsDataset& ds, const CovParams& p) {
  return observation_corr_matrix(ds, p, pairwise_distances(ds.locations));
}

Eigen::MatrixXd observation_corr_matrix(const RatingsDataset& ds, const CovParams& p,
                                        const Eigen::MatrixXd& site_dists) {
  // Assemble at site level, then expand to ratings: replicate ratings at one
  // location share the site covariance and differ only by independent noise.
  const Eigen::MatrixXd site =
      spatial_cov_from_dists(site_dists, ds.location_category, p, /*constrained=*/true);
  const int n = ds.n();
  Eigen::MatrixXd r(n, n);
  for (int a = 0; a < n; ++a) {
    const int ia = ds.ratings[a].loc;
    for (int b = 0; b <= a; ++b) {
      const int ib = ds.ratings[b].loc;
      const double v = site(ia, ib);
      r(a, b) = v;
      r(b, a) = v;
    }
    r(a, a) += nugget_var(p, ds.location_category[ia], /*constrained=*/true);
  }
  return r;
}

Eigen::MatrixXd stationary_corr_matrix(const RatingsDataset& ds, const StationaryCovParams& p) {
  return observation_corr_matrix(ds, CovParams(p));
}

double SpdFactor::log_det() const {
  const auto& l = llt.matrixLLT();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) acc += std::log(l(i, i));
  return 2.0 * acc;
}

SpdFactor chol_spd(const Eigen::MatrixXd& a, const std::string& context) {
  if (a.rows() != a.cols()) throw std::invalid_argument("chol_spd: matrix must be square");
  SpdFactor f;
  f.llt.compute(a);
  if (f.llt.info() == Eigen::Success) return f;
  const double jitters[] = {1e-10, 1e-8};
  for (double j : jitters) {
    Eigen::MatrixXd boosted = a;
    boosted.diagonal().array() += j;
    f.llt.compute(boosted);
    if (f.llt.info() == Eigen::Success) {
      f.jitter = j;
      return f;
    }
  }
  throw std::runtime_error("chol_spd: " + context + ": " + std::to_string(a.rows()) + "x" +
                           std::to_string(a.cols()) +
                           " matrix is not positive definite even with 1e-8 jitter");
}

double mvn_logpdf_centered(const Eigen::VectorXd& x, const SpdFactor& f) {
  const Eigen::VectorXd z = f.llt.matrixL().solve(x);
  return -0.5 * f.log_det() - 0.5 * z.squaredNorm() -
         static_cast<double>(x.size()) * kLogSqrt2Pi;
}

Eigen::VectorXd mvn_draw(const Eigen::VectorXd& mean, const SpdFactor& f, Rng& rng) {
  if (mean.size() != f.llt.matrixLLT().rows())
    throw std::invalid_argument("mvn_draw: mean length does not match the factored matrix");
  Eigen::VectorXd xi(mean.size());
  for (Eigen::Index i = 0; i < xi.size(); ++i) xi(i) = rng.normal();
  return mean + f.llt.matrixL() * xi;
}

ThetaMap ThetaMap::filtering(const FilterCovParams& prototype, bool sigma2_free) {
  prototype.validate();
  ThetaMap m;
  m.kind_ = ModelKind::filtering;
  m.sigma2_free_ = sigma2_free;
  m.proto_ = prototype;
  const int q = prototype.Q();
  for (int r = 0; r < q; ++r) {
    for (int c = 0; c <= r; ++c) {
      m.names_.push_back(a_name(r, c));
      m.log_scale_.push_back(r == c);
    }
  }
  for (int i = 0; i < q; ++i) {
    if (std::isinf(prototype.phi(i))) continue;
    m.names_.push_back("phi_" + std::to_string(i + 1));
    m.log_scale_.push_back(true);
  }
  if (sigma2_free) {
    for (int i = 0; i < q; ++i) {
      m.names_.push_back("sigma2_" + std::to_string(i + 1));
      m.log_scale_.push_back(true);
    }
  }
  return m;
}

ThetaMap ThetaMap::stationary(const StationaryCovParams& prototype) {
  prototype.validate();
  ThetaMap m;
  m.kind_ = ModelKind::stationary;
  m.proto_ = prototype;
  m.names_ = {"phi", "tau2"};
  m.log_scale_ = {true, true};
  return m;
}

ThetaMap ThetaMap::for_params(const CovParams& prototype, bool sigma2_free) {
  if (const auto* f = std::get_if<FilterCovParams>(&prototype))
    return filtering(*f, sigma2_free);
  return stationary(std::get<StationaryCovParams>(prototype));
}

Eigen::VectorXd ThetaMap::natural(const CovParams& p) const {
  if (kind_of(p) != kind_)
    throw std::invalid_argument("ThetaMap: parameter kind does not match the map");
  Eigen::VectorXd v(dim());
  if (kind_ == ModelKind::stationary) {
    const auto& st = std::get<StationaryCovParams>(p);
    v << st.phi, st.tau2;
    return v;
  }
  const auto& f = std::get<FilterCovParams>(p);
  const auto& proto = std::get<FilterCovParams>(proto_);
  if (f.Q() != proto.Q())
    throw std::invalid_argument("ThetaMap: parameter Q does not match the map");
  int k = 0;
  for (int r = 0; r < f.Q(); ++r)
    for (int c = 0; c <= r; ++c) v(k++) = f.A(r, c);
  for (int i = 0; i < f.Q(); ++i) {
    if (std::isinf(proto.phi(i))) {
      if (!std::isinf(f.phi(i)))
        throw std::invalid_argument("ThetaMap: infinite-phi pattern does not match the map");
      continue;
    }
    v(k++) = f.phi(i);
  }
  if (sigma2_free_)
    for (int i = 0; i < f.Q(); ++i) v(k++) = f.sigma2(i);
  return v;
}

CovParams ThetaMap::from_natural(const Eigen::VectorXd& v) const {
  if (v.size() != dim())
    throw std::invalid_argument("ThetaMap: coordinate vector has the wrong length");
  if (kind_ == ModelKind::stationary) {
    StationaryCovParams st = std::get<StationaryCovParams>(proto_);
    st.phi = v(0);
    st.tau2 = v(1);
    st.validate();
    return st;
  }
  FilterCovParams f = std::get<FilterCovParams>(proto_);
  int k = 0;
  for (int r = 0; r < f.Q(); ++r)
    for (int c = 0; c <= r; ++c) f.A(r, c) = v(k++);
  for (int i = 0; i < f.Q(); ++i) {
    if (std::isinf(f.phi(i))) continue;
    f.phi(i) = v(k++);
  }
  if (sigma2_free_)
    for (int i = 0; i < f.Q(); ++i) f.sigma2(i) = v(k++);
  f.validate();
  return f;
}

Eigen::VectorXd ThetaMap::transformed(const CovParams& p) const {
  Eigen::VectorXd v = natural(p);
  for (int i = 0; i < dim(); ++i)
    if (log_scale_[i]) {
      if (v(i) <= 0.0)
        throw std::invalid_argument("ThetaMap: log-scale coordinate " + names_[i] +
                                    " must be positive");
      v(i) = std::log(v(i));
    }
  return v;
}

CovParams ThetaMap::untransform(const Eigen::VectorXd& t) const {
  if (t.size() != dim())
    throw std::invalid_argument("ThetaMap: coordinate vector has the wrong length");
  Eigen::VectorXd v = t;
  for (int i = 0; i < dim(); ++i)
    if (log_scale_[i]) v(i) = std::exp(v(i));
  return from_natural(v);
}

double ThetaMap::log_jacobian(const Eigen::VectorXd& t) const {
  if (t.size() != dim())
    throw std::invalid_argument("ThetaMap: coordinate vector has the wrong length");
  double acc = 0.0;
  for (int i = 0; i < dim(); ++i)
    if (log_scale_[i]) acc += t(i);
  return acc;
}

}  // namespace luf
