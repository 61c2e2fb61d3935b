#include "lufilter/covariance.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <vector>

#include "lufilter/rng.hpp"
#include "lufilter/stats.hpp"

using namespace luf;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// The simulation-truth coregionalization: three categories, component decay
// rates spanning fast to slow, unit noise variances.
FilterCovParams reference_params() {
  FilterCovParams p;
  p.A.setZero(3, 3);
  p.A.row(0) << 1.8, 0.0, 0.0;
  p.A.row(1) << 0.8, 1.2, 0.0;
  p.A.row(2) << 0.9, 1.0, 1.25;
  p.phi = (Eigen::VectorXd(3) << 40.0, 10.0, 2.0).finished();
  p.sigma2 = Eigen::VectorXd::Ones(3);
  p.delta = Eigen::VectorXd::Zero(3);
  p.validate();
  return p;
}

FilterCovParams random_params(int q, Rng& rng, bool with_inf_phi) {
  FilterCovParams p;
  p.A.setZero(q, q);
  for (int r = 0; r < q; ++r) {
    for (int c = 0; c < r; ++c) p.A(r, c) = 2.0 * rng.uniform() - 1.0;
    p.A(r, r) = 0.3 + 2.0 * rng.uniform();
  }
  p.phi.resize(q);
  for (int i = 0; i < q; ++i) {
    if (with_inf_phi && rng.uniform() < 0.3)
      p.phi(i) = kInf;
    else
      p.phi(i) = 0.5 + 30.0 * rng.uniform();
  }
  p.sigma2 = Eigen::VectorXd::Ones(q);
  p.delta = Eigen::VectorXd::Zero(q);
  p.validate();
  return p;
}

std::vector<Location> random_locations(int m, Rng& rng) {
  std::vector<Location> locs;
  locs.reserve(m);
  for (int i = 0; i < m; ++i) locs.push_back({i + 1, rng.uniform(), rng.uniform()});
  return locs;
}

std::vector<int> random_categories(int m, int q, Rng& rng) {
  std::vector<int> cats(m);
  for (int i = 0; i < m; ++i) cats[i] = rng.uniform_int(1, q);
  return cats;
}

// A dataset with replicate ratings, built directly (not through ingestion).
RatingsDataset make_dataset(const std::vector<Location>& locs, const std::vector<int>& cats,
                            int q, Rng& rng, int max_reps = 3) {
  RatingsDataset ds;
  ds.Q = q;
  ds.K = 5;
  ds.locations = locs;
  ds.location_category = cats;
  for (int i = 0; i < static_cast<int>(locs.size()); ++i) {
    const int reps = rng.uniform_int(1, max_reps);
    for (int r = 0; r < reps; ++r)
      ds.ratings.push_back({i, rng.uniform_int(1, 5), Eigen::VectorXd()});
  }
  ds.validate();
  return ds;
}

}  // namespace

TEST_CASE("exp_corr matches the exponential kernel and its independence limit") {
  // exp(-1) = 0.3678794411714423216 whenever phi * d = 1.
  const double e1 = 0.3678794411714423216;
  CHECK(exp_corr(1.0, 1.0) == doctest::Approx(e1).epsilon(1e-15));
  CHECK(exp_corr(0.025, 40.0) == doctest::Approx(e1).epsilon(1e-15));
  CHECK(exp_corr(0.5, 2.0) == doctest::Approx(e1).epsilon(1e-15));
  CHECK(exp_corr(0.0, 7.3) == 1.0);

  // +infinity decay is a sentinel for a spatially independent component.
  CHECK(exp_corr(0.0, kInf) == 1.0);
  CHECK(exp_corr(1e-300, kInf) == 0.0);
  CHECK(exp_corr(2.5, kInf) == 0.0);

  CHECK_THROWS_AS(exp_corr(-0.1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(exp_corr(1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(exp_corr(1.0, -3.0), std::invalid_argument);
  CHECK_THROWS_AS(exp_corr(1.0, -kInf), std::invalid_argument);
}

TEST_CASE("scalar covariance operations reproduce frozen reference values") {
  const FilterCovParams p = reference_params();

  // Total per-site variances ||a_q||^2 + sigma2_q.
  CHECK(p.total_var(1) == doctest::Approx(4.24).epsilon(1e-15));
  CHECK(p.total_var(2) == doctest::Approx(3.08).epsilon(1e-15));
  CHECK(p.total_var(3) == doctest::Approx(4.3725).epsilon(1e-15));

  // 3.24/4.24 and 1/4.24 at full precision.
  CHECK(spatial_variance_proportion(1, p.A) ==
        doctest::Approx(0.76415094339622641509).epsilon(1e-14));
  CHECK(constrained_nugget(1, p) == doctest::Approx(0.23584905660377358491).epsilon(1e-14));
  CHECK(spatial_variance_proportion(1, p.A) + constrained_nugget(1, p) ==
        doctest::Approx(1.0).epsilon(1e-15));

  const Location s{1, 0.0, 0.0};
  const Location sp{2, 0.07, 0.0};
  // 0.8*0.9*exp(-2.8) + 1.2*1.0*exp(-0.7) = 0.63968560963984835244
  CHECK(filtered_cov(s, sp, 2, 3, p) ==
        doctest::Approx(0.63968560963984835244).epsilon(1e-14));
  // divided by sqrt(3.08 * 4.3725) = 0.17431160976825689558
  CHECK(constrained_cov(s, sp, 2, 3, p) ==
        doctest::Approx(0.17431160976825689558).epsilon(1e-14));
  // symmetric in its arguments
  CHECK(constrained_cov(sp, s, 3, 2, p) == constrained_cov(s, sp, 2, 3, p));

  // at zero distance within a category: spatial share of the unit variance
  CHECK(constrained_cov(s, s, 2, 2, p) ==
        doctest::Approx(1.0 - constrained_nugget(2, p)).epsilon(1e-14));

  // no-replication variant at d = 0.1 between category-3 sites:
  // (0.81 e^-4 + e^-1 + 1.5625 e^-0.2) / 3.3725 = 0.49280412464215379149
  const Location sq{3, 0.1, 0.0};
  CHECK(noreplication_corr(s, sq, 3, 3, p) ==
        doctest::Approx(0.49280412464215379149).epsilon(1e-14));
  CHECK(noreplication_corr(s, s, 3, 3, p) == doctest::Approx(1.0).epsilon(1e-14));

  CHECK_THROWS_AS(filtered_cov(s, sp, 0, 3, p), std::invalid_argument);
  CHECK_THROWS_AS(filtered_cov(s, sp, 1, 4, p), std::invalid_argument);
  CHECK_THROWS_AS(constrained_nugget(4, p), std::invalid_argument);
  CHECK_THROWS_AS(spatial_variance_proportion(0, p.A), std::invalid_argument);
}

TEST_CASE("cross_corr_block agrees with constrained_cov and frozen ratios") {
  const FilterCovParams p = reference_params();
  const Location s{1, 0.2, 0.3};
  const Location sp{2, 0.26, 0.38};
  const Eigen::MatrixXd block = cross_corr_block(s, sp, p);
  REQUIRE(block.rows() == 3);
  REQUIRE(block.cols() == 3);

  // Entry (q, q') is the constrained covariance between a category-q site at
  // s and a category-q' site at s'.
  for (int q = 1; q <= 3; ++q)
    for (int qp = 1; qp <= 3; ++qp)
      CHECK(block(q - 1, qp - 1) ==
            doctest::Approx(constrained_cov(s, sp, q, qp, p)).epsilon(1e-14));

  // Component 1 has a single weight, so first-row entries are scalar
  // multiples of rho_1 alone: 1.44/sqrt(4.24*3.08), 1.62/sqrt(4.24*4.3725).
  const double d = dist(s, sp);
  const double rho1 = std::exp(-40.0 * d);
  CHECK(block(0, 1) / rho1 == doctest::Approx(0.39847786841278938718).epsilon(1e-13));
  CHECK(block(0, 2) / rho1 == doctest::Approx(0.37624191582362080572).epsilon(1e-13));
}

TEST_CASE("entries touching component 1 are proportional to rho_1 at every distance") {
  Rng rng(4401);
  for (int trial = 0; trial < 5; ++trial) {
    const FilterCovParams p = random_params(3, rng, false);
    const Location s{1, 0.0, 0.0};
    double ref12 = 0.0;
    double ref13 = 0.0;
    for (int k = 0; k < 20; ++k) {
      const double d = 0.005 + 0.028 * k;
      const Location sp{2, d, 0.0};
      const Eigen::MatrixXd block = cross_corr_block(s, sp, p);
      const double rho1 = std::exp(-p.phi(0) * d);
      const double r12 = block(0, 1) / rho1;
      const double r13 = block(0, 2) / rho1;
      if (k == 0) {
        ref12 = r12;
        ref13 = r13;
      } else {
        CHECK(std::abs(r12 - ref12) < 1e-10);
        CHECK(std::abs(r13 - ref13) < 1e-10);
      }
    }
  }
}

TEST_CASE("diagonal A decouples categories") {
  FilterCovParams p = FilterCovParams::diagonal(3, 0.9, 5.0);
  p.phi(1) = 12.0;
  const Location s{1, 0.1, 0.1};
  const Location sp{2, 0.4, 0.2};
  for (int q = 1; q <= 3; ++q)
    for (int qp = 1; qp <= 3; ++qp)
      if (q != qp) {
        CHECK(filtered_cov(s, sp, q, qp, p) == 0.0);
        CHECK(constrained_cov(s, sp, q, qp, p) == 0.0);
      }
  CHECK(filtered_cov(s, sp, 2, 2, p) ==
        doctest::Approx(0.81 * std::exp(-12.0 * dist(s, sp))).epsilon(1e-14));
}

TEST_CASE("mean shifts do not enter the covariance") {
  FilterCovParams p = reference_params();
  FilterCovParams shifted = p;
  shifted.delta << 0.0, 1.7, -2.4;
  const Location s{1, 0.0, 0.0};
  const Location sp{2, 0.3, 0.4};
  CHECK(constrained_cov(s, sp, 1, 3, p) == constrained_cov(s, sp, 1, 3, shifted));
  CHECK(constrained_nugget(2, p) == constrained_nugget(2, shifted));
}

TEST_CASE("parameter validation rejects malformed inputs") {
  FilterCovParams p = reference_params();
  CHECK_NOTHROW(p.validate());

  FilterCovParams bad = p;
  bad.A(0, 1) = 0.2;  // upper-triangular leak
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = p;
  bad.A(1, 1) = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = p;
  bad.A(1, 1) = -0.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = p;
  bad.phi(2) = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = p;
  bad.phi(2) = -kInf;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = p;
  bad.phi(2) = kInf;  // +infinity is allowed
  CHECK_NOTHROW(bad.validate());

  bad = p;
  bad.sigma2(0) = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = p;
  bad.delta(0) = 0.1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = p;
  bad.delta(2) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  StationaryCovParams st{3.0, 0.5};
  CHECK_NOTHROW(st.validate());
  CHECK(st.kappa() == doctest::Approx(0.66666666666666666667).epsilon(1e-15));
  st.tau2 = 0.0;
  CHECK_THROWS_AS(st.validate(), std::invalid_argument);
  st = {0.0, 1.0};
  CHECK_THROWS_AS(st.validate(), std::invalid_argument);
  st = {kInf, 1.0};
  CHECK_THROWS_AS(st.validate(), std::invalid_argument);
}

TEST_CASE("spatial_cov_matrix matches the scalar operations elementwise") {
  Rng rng(5150);
  const FilterCovParams p = random_params(3, rng, true);
  const auto locs = random_locations(24, rng);
  const auto cats = random_categories(24, 3, rng);
  const CovParams cp = p;

  for (bool constrained : {true, false}) {
    const Eigen::MatrixXd m = spatial_cov_matrix(locs, cats, cp, constrained);
    REQUIRE(m.rows() == 24);
    CHECK((m - m.transpose()).cwiseAbs().maxCoeff() == 0.0);
    for (int i = 0; i < 24; ++i)
      for (int j = 0; j < 24; ++j) {
        const double want = constrained
                                ? constrained_cov(locs[i], locs[j], cats[i], cats[j], p)
                                : filtered_cov(locs[i], locs[j], cats[i], cats[j], p);
        CHECK(m(i, j) == doctest::Approx(want).epsilon(1e-14));
      }
  }
}

TEST_CASE("spatial_cov_from_dists agrees with the pairwise assembly") {
  Rng rng(41117);
  for (int trial = 0; trial < 10; ++trial) {
    const int q = rng.uniform_int(1, 4);
    const bool with_inf = trial % 2 == 0;
    const FilterCovParams p = random_params(q, rng, with_inf);
    const int m = rng.uniform_int(4, 20);
    auto locs = random_locations(m, rng);
    if (m >= 2) locs[1] = {locs[1].id, locs[0].x, locs[0].y};  // coincident pair
    const auto cats = random_categories(m, q, rng);
    const Eigen::MatrixXd d = pairwise_distances(locs);
    for (bool constrained : {true, false}) {
      const Eigen::MatrixXd slow = spatial_cov_matrix(locs, cats, CovParams(p), constrained);
      const Eigen::MatrixXd fast = spatial_cov_from_dists(d, cats, CovParams(p), constrained);
      REQUIRE(fast.rows() == m);
      CHECK((fast - fast.transpose()).cwiseAbs().maxCoeff() == 0.0);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
          CHECK(fast(i, j) == doctest::Approx(slow(i, j)).epsilon(1e-13));
    }
  }

  const StationaryCovParams st{2.0, 0.5};
  const auto locs = random_locations(12, rng);
  const auto cats = random_categories(12, 3, rng);
  const Eigen::MatrixXd d = pairwise_distances(locs);
  const Eigen::MatrixXd slow = spatial_cov_matrix(locs, cats, CovParams(st), true);
  const Eigen::MatrixXd fast = spatial_cov_from_dists(d, cats, CovParams(st), true);
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j) CHECK(fast(i, j) == doctest::Approx(slow(i, j)).epsilon(1e-13));

  CHECK_THROWS_AS(spatial_cov_from_dists(Eigen::MatrixXd::Zero(3, 2), cats, CovParams(st), true),
                  std::invalid_argument);
  CHECK_THROWS_AS(spatial_cov_from_dists(Eigen::MatrixXd::Zero(3, 3), cats, CovParams(st), true),
                  std::invalid_argument);
}

TEST_CASE("spatial_cov_matrix plus nugget diagonal is positive definite") {
  Rng rng(6001);
  for (int trial = 0; trial < 8; ++trial) {
    const int q = rng.uniform_int(1, 4);
    const FilterCovParams p = random_params(q, rng, trial % 2 == 0);
    const int m = 40;
    const auto locs = random_locations(m, rng);
    const auto cats = random_categories(m, q, rng);
    Eigen::MatrixXd s = spatial_cov_matrix(locs, cats, CovParams(p), true);
    for (int i = 0; i < m; ++i) s(i, i) += constrained_nugget(cats[i], p);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
    CHECK(es.eigenvalues().minCoeff() > -1e-8);
    CHECK((s.diagonal().array() - 1.0).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("spatial_cross_cov_matrix matches scalar values and the joint matrix block") {
  Rng rng(7077);
  const FilterCovParams p = random_params(3, rng, false);
  const auto a_locs = random_locations(9, rng);
  const auto a_cats = random_categories(9, 3, rng);
  const auto b_locs = random_locations(13, rng);
  const auto b_cats = random_categories(13, 3, rng);
  const CovParams cp = p;

  for (bool constrained : {true, false}) {
    const Eigen::MatrixXd cross =
        spatial_cross_cov_matrix(a_locs, a_cats, b_locs, b_cats, cp, constrained);
    REQUIRE(cross.rows() == 9);
    REQUIRE(cross.cols() == 13);
    for (int i = 0; i < 9; ++i)
      for (int j = 0; j < 13; ++j) {
        const double want =
            constrained ? constrained_cov(a_locs[i], b_locs[j], a_cats[i], b_cats[j], p)
                        : filtered_cov(a_locs[i], b_locs[j], a_cats[i], b_cats[j], p);
        CHECK(cross(i, j) == doctest::Approx(want).epsilon(1e-14));
      }

    // The joint matrix over concatenated sites carries the same block.
    std::vector<Location> all_locs = a_locs;
    all_locs.insert(all_locs.end(), b_locs.begin(), b_locs.end());
    std::vector<int> all_cats = a_cats;
    all_cats.insert(all_cats.end(), b_cats.begin(), b_cats.end());
    const Eigen::MatrixXd joint = spatial_cov_matrix(all_locs, all_cats, cp, constrained);
    CHECK((joint.block(0, 9, 9, 13) - cross).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("observation_corr_matrix expands site covariance with independent nuggets") {
  const FilterCovParams p = reference_params();

  // Three sites, five ratings; site 0 is rated three times.
  RatingsDataset ds;
  ds.Q = 3;
  ds.K = 4;
  ds.locations = {{10, 0.0, 0.0}, {11, 0.05, 0.0}, {12, 0.3, 0.4}};
  ds.location_category = {2, 3, 1};
  ds.ratings = {{0, 1, {}}, {0, 2, {}}, {0, 4, {}}, {1, 3, {}}, {2, 2, {}}};
  ds.validate();

  const Eigen::MatrixXd r = observation_corr_matrix(ds, CovParams(p));
  REQUIRE(r.rows() == 5);

  for (int a = 0; a < 5; ++a) {
    for (int b = 0; b < 5; ++b) {
      const int ia = ds.ratings[a].loc;
      const int ib = ds.ratings[b].loc;
      double want = constrained_cov(ds.locations[ia], ds.locations[ib],
                                    ds.location_category[ia], ds.location_category[ib], p);
      if (a == b) want += constrained_nugget(ds.location_category[ia], p);
      CHECK(r(a, b) == doctest::Approx(want).epsilon(1e-14));
    }
  }
  CHECK((r.diagonal().array() - 1.0).abs().maxCoeff() < 1e-12);
  // Replicates at one site: off-diagonal equals the site's spatial share.
  CHECK(r(0, 1) == r(1, 0));
  CHECK(r(0, 1) == doctest::Approx(1.0 - constrained_nugget(2, p)).epsilon(1e-14));

  // Supplying the distances yourself is the same computation.
  const Eigen::MatrixXd r_cached =
      observation_corr_matrix(ds, CovParams(p), pairwise_distances(ds.locations));
  CHECK((r - r_cached).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("stationary correlation matrix has frozen entries and unit diagonal") {
  StationaryCovParams st{3.0, 0.5};

  RatingsDataset ds;
  ds.Q = 3;
  ds.K = 3;
  ds.locations = {{1, 0.0, 0.0}, {2, 0.25, 0.0}};
  ds.location_category = {1, 2};
  ds.ratings = {{0, 1, {}}, {0, 2, {}}, {1, 3, {}}};
  ds.validate();

  const Eigen::MatrixXd r = stationary_corr_matrix(ds, st);
  REQUIRE(r.rows() == 3);
  // kappa = 2/3; off-diagonal at d=0.25: (1/3) exp(-0.75) = 0.15745551758033823571
  CHECK(r(0, 2) == doctest::Approx(0.15745551758033823571).epsilon(1e-14));
  CHECK(r(2, 0) == r(0, 2));
  // Replicates share the spatial component (1 - kappa).
  CHECK(r(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK((r.diagonal().array() - 1.0).abs().maxCoeff() < 1e-12);
  // Same answer through the generic entry point.
  const Eigen::MatrixXd r2 = observation_corr_matrix(ds, CovParams(st));
  CHECK((r - r2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("random observation matrices are unit-diagonal and near-PSD") {
  Rng rng(8093);
  for (int trial = 0; trial < 25; ++trial) {
    const int q = rng.uniform_int(1, 4);
    const FilterCovParams p = random_params(q, rng, true);
    const int m = rng.uniform_int(5, 24);
    const auto locs = random_locations(m, rng);
    const auto cats = random_categories(m, q, rng);
    Rng ds_rng = rng.child(trial);
    const RatingsDataset ds = make_dataset(locs, cats, q, ds_rng);
    const Eigen::MatrixXd r = observation_corr_matrix(ds, CovParams(p));
    REQUIRE(r.rows() == ds.n());
    CHECK((r.diagonal().array() - 1.0).abs().maxCoeff() < 1e-12);
    CHECK((r - r.transpose()).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r);
    CHECK(es.eigenvalues().minCoeff() > -1e-8);
  }
}

TEST_CASE("chol_spd climbs the jitter ladder and reports failures") {
  Eigen::MatrixXd id = Eigen::MatrixXd::Identity(3, 3);
  const SpdFactor f = chol_spd(id, "identity");
  CHECK(f.jitter == 0.0);
  CHECK(f.log_det() == doctest::Approx(0.0).epsilon(1e-15));

  // Exactly singular: rank-1 ones matrix needs a boost but must succeed.
  Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(2, 2);
  const SpdFactor g = chol_spd(ones, "ones");
  CHECK(g.jitter > 0.0);
  CHECK(g.jitter <= 1e-8);

  // Indefinite: no ladder step can fix eigenvalue -1.
  Eigen::MatrixXd indef(2, 2);
  indef << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_WITH_AS(chol_spd(indef, "offended"),
                       doctest::Contains("offended"), std::runtime_error);

  CHECK_THROWS_AS(chol_spd(Eigen::MatrixXd::Zero(2, 3), "shape"), std::invalid_argument);
}

TEST_CASE("mvn_logpdf_centered matches scalar and 2x2 oracles") {
  // Scalar case reduces to the univariate normal density.
  Eigen::MatrixXd v(1, 1);
  v << 2.25;
  const SpdFactor f = chol_spd(v, "scalar");
  Eigen::VectorXd x(1);
  x << 0.7;
  CHECK(mvn_logpdf_centered(x, f) ==
        doctest::Approx(log_normal_density(0.7, 1.5)).epsilon(1e-14));

  // Sigma = [[2, 0.6], [0.6, 1.5]], x = (0.3, -1.1):
  // logpdf = -2.8821680401399730329
  Eigen::MatrixXd s(2, 2);
  s << 2.0, 0.6, 0.6, 1.5;
  const SpdFactor f2 = chol_spd(s, "pair");
  Eigen::VectorXd x2(2);
  x2 << 0.3, -1.1;
  CHECK(mvn_logpdf_centered(x2, f2) ==
        doctest::Approx(-2.8821680401399730329).epsilon(1e-13));
  CHECK(f2.log_det() == doctest::Approx(std::log(2.0 * 1.5 - 0.36)).epsilon(1e-14));
}

TEST_CASE("ThetaMap packs filtering parameters in documented order") {
  const FilterCovParams p = reference_params();
  const ThetaMap map = ThetaMap::filtering(p, /*sigma2_free=*/false);
  CHECK(map.kind() == ModelKind::filtering);
  CHECK(map.dim() == 9);
  const std::vector<std::string> want = {"a_11", "a_21", "a_22", "a_31", "a_32",
                                         "a_33", "phi_1", "phi_2", "phi_3"};
  CHECK(map.names() == want);

  const Eigen::VectorXd nat = map.natural(CovParams(p));
  Eigen::VectorXd expect(9);
  expect << 1.8, 0.8, 1.2, 0.9, 1.0, 1.25, 40.0, 10.0, 2.0;
  CHECK((nat - expect).cwiseAbs().maxCoeff() == 0.0);

  const Eigen::VectorXd t = map.transformed(CovParams(p));
  CHECK(t(0) == doctest::Approx(std::log(1.8)).epsilon(1e-15));
  CHECK(t(1) == 0.8);  // strictly-lower entries travel untransformed
  CHECK(t(6) == doctest::Approx(std::log(40.0)).epsilon(1e-15));

  // log|d natural/d transformed| sums the log-scale coordinates.
  double want_jac = std::log(1.8) + std::log(1.2) + std::log(1.25) + std::log(40.0) +
                    std::log(10.0) + std::log(2.0);
  CHECK(map.log_jacobian(t) == doctest::Approx(want_jac).epsilon(1e-14));

  const CovParams back = map.untransform(t);
  const auto& fb = std::get<FilterCovParams>(back);
  CHECK((fb.A - p.A).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((fb.phi - p.phi).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((fb.sigma2 - p.sigma2).cwiseAbs().maxCoeff() == 0.0);
  CHECK((fb.delta - p.delta).cwiseAbs().maxCoeff() == 0.0);

  const CovParams back2 = map.from_natural(nat);
  CHECK((std::get<FilterCovParams>(back2).A - p.A).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("ThetaMap fixes infinite-phi components and optionally frees sigma2") {
  FilterCovParams p = reference_params();
  p.phi(1) = kInf;
  const ThetaMap map = ThetaMap::filtering(p, /*sigma2_free=*/true);
  // 6 triangle entries + 2 finite phis + 3 sigma2.
  CHECK(map.dim() == 11);
  const std::vector<std::string> want = {"a_11", "a_21",  "a_22",    "a_31",
                                         "a_32", "a_33",  "phi_1",   "phi_3",
                                         "sigma2_1", "sigma2_2", "sigma2_3"};
  CHECK(map.names() == want);

  Eigen::VectorXd t = map.transformed(CovParams(p));
  t(7) = std::log(5.5);   // phi_3
  t(9) = std::log(0.25);  // sigma2_2
  const auto& back = std::get<FilterCovParams>(map.untransform(t));
  CHECK(std::isinf(back.phi(1)));
  CHECK(back.phi(1) > 0.0);
  CHECK(back.phi(2) == doctest::Approx(5.5).epsilon(1e-14));
  CHECK(back.sigma2(1) == doctest::Approx(0.25).epsilon(1e-14));

  // A params vector with finite phi_2 no longer fits this map.
  CHECK_THROWS_AS(map.natural(CovParams(reference_params())), std::invalid_argument);
}

TEST_CASE("ThetaMap handles the stationary model and rejects misuse") {
  StationaryCovParams st{3.0, 0.5};
  const ThetaMap map = ThetaMap::stationary(st);
  CHECK(map.kind() == ModelKind::stationary);
  CHECK(map.dim() == 2);
  CHECK(map.names() == std::vector<std::string>{"phi", "tau2"});

  const Eigen::VectorXd t = map.transformed(CovParams(st));
  CHECK(t(0) == doctest::Approx(std::log(3.0)).epsilon(1e-15));
  CHECK(map.log_jacobian(t) == doctest::Approx(std::log(3.0) + std::log(0.5)).epsilon(1e-14));
  const auto& back = std::get<StationaryCovParams>(map.untransform(t));
  CHECK(back.phi == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(back.tau2 == doctest::Approx(0.5).epsilon(1e-14));

  CHECK_THROWS_AS(map.natural(CovParams(reference_params())), std::invalid_argument);
  CHECK_THROWS_AS(map.untransform(Eigen::VectorXd::Zero(3)), std::invalid_argument);

  // from_natural validates: nonpositive coordinates are rejected.
  Eigen::VectorXd bad(2);
  bad << -1.0, 0.5;
  CHECK_THROWS_AS(map.from_natural(bad), std::invalid_argument);

  const ThetaMap fmap = ThetaMap::filtering(reference_params(), false);
  Eigen::VectorXd nat = fmap.natural(CovParams(reference_params()));
  nat(0) = -0.1;  // diagonal of A must stay positive
  CHECK_THROWS_AS(fmap.from_natural(nat), std::invalid_argument);

  // for_params dispatches on the variant.
  CHECK(ThetaMap::for_params(CovParams(st), false).kind() == ModelKind::stationary);
  CHECK(ThetaMap::for_params(CovParams(reference_params()), true).dim() == 12);
}

TEST_CASE("delta_of returns filtering shifts and stationary zeros") {
  FilterCovParams p = reference_params();
  p.delta << 0.0, 0.4, -0.2;
  const Eigen::VectorXd d = delta_of(CovParams(p), 3);
  CHECK(d(1) == 0.4);
  CHECK_THROWS_AS(delta_of(CovParams(p), 2), std::invalid_argument);
  const Eigen::VectorXd z = delta_of(CovParams(StationaryCovParams{1.0, 1.0}), 4);
  CHECK(z.size() == 4);
  CHECK(z.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("spatial_cross_cov_from_dists matches the per-pair cross builder") {
  Rng rng(412);
  for (int rep = 0; rep < 10; ++rep) {
    const FilterCovParams p = random_params(3, rng, /*with_inf_phi=*/rep % 2 == 1);
    std::vector<Location> rows = random_locations(7, rng);
    std::vector<Location> cols = random_locations(5, rng);
    cols[3] = {999, rows[2].x, rows[2].y};  // coincident pair exercises the d=0 branch
    std::vector<int> rows_cats, cols_cats;
    for (int i = 0; i < 7; ++i) rows_cats.push_back(rng.uniform_int(1, 3));
    for (int j = 0; j < 5; ++j) cols_cats.push_back(rng.uniform_int(1, 3));

    const Eigen::MatrixXd d = cross_distances(rows, cols);
    for (bool constrained : {false, true}) {
      const Eigen::MatrixXd fast =
          spatial_cross_cov_from_dists(d, rows_cats, cols_cats, p, constrained);
      const Eigen::MatrixXd slow =
          spatial_cross_cov_matrix(rows, rows_cats, cols, cols_cats, p, constrained);
      REQUIRE(fast.rows() == 7);
      REQUIRE(fast.cols() == 5);
      for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 5; ++j)
          CHECK(fast(i, j) == doctest::Approx(slow(i, j)).epsilon(1e-14));
    }
  }
}

TEST_CASE("spatial_cross_cov_from_dists handles the stationary model and bad sizes") {
  const StationaryCovParams st{2.0, 0.5};
  std::vector<Location> rows{{1, 0.0, 0.0}, {2, 0.5, 0.0}};
  std::vector<Location> cols{{3, 0.0, 1.0}};
  const Eigen::MatrixXd d = cross_distances(rows, cols);
  const Eigen::MatrixXd c = spatial_cross_cov_from_dists(d, {1, 1}, {1}, CovParams{st}, true);
  const double amp = 1.0 - st.kappa();
  CHECK(c(0, 0) == doctest::Approx(amp * std::exp(-2.0 * 1.0)).epsilon(1e-15));
  CHECK(c(1, 0) == doctest::Approx(amp * std::exp(-2.0 * d(1, 0))).epsilon(1e-15));

  CHECK_THROWS_AS(spatial_cross_cov_from_dists(d, {1}, {1}, CovParams{st}, true),
                  std::invalid_argument);
  CHECK_THROWS_AS(spatial_cross_cov_from_dists(d, {1, 1}, {1, 1}, CovParams{st}, true),
                  std::invalid_argument);
}

TEST_CASE("mvn_draw is mean plus the Cholesky factor times unit normals") {
  Eigen::MatrixXd a(2, 2);
  a << 2.0, 0.6, 0.6, 1.0;
  const SpdFactor f = chol_spd(a, "test");
  const Eigen::VectorXd mean = (Eigen::VectorXd(2) << -1.0, 4.0).finished();

  // Replay the identical normal stream and apply the algebra by hand.
  Rng draw_rng(2024), replay(2024);
  const Eigen::VectorXd z = mvn_draw(mean, f, draw_rng);
  Eigen::VectorXd xi(2);
  xi << replay.normal(), replay.normal();
  const Eigen::MatrixXd l = f.llt.matrixL();
  CHECK(z(0) == mean(0) + l(0, 0) * xi(0));
  CHECK(z(1) == doctest::Approx(mean(1) + l(1, 0) * xi(0) + l(1, 1) * xi(1)).epsilon(1e-15));

  CHECK_THROWS_AS(mvn_draw(Eigen::VectorXd::Zero(3), f, draw_rng), std::invalid_argument);
}
