#include <cmath>

#include "catch_amalgamated.hpp"
#include "oracles.hpp"
#include "ppgmm/metrics.hpp"

using namespace ppgmm;
using Catch::Matchers::WithinAbs;

namespace {

Basis ext(const Matrix& b) { return Basis{b, BasisOrigin::external}; }

Matrix cols3(std::initializer_list<std::array<double, 3>> columns) {
  Matrix b(3, static_cast<Eigen::Index>(columns.size()));
  Eigen::Index j = 0;
  for (const auto& c : columns) {
    b.col(j++) << c[0], c[1], c[2];
  }
  return b;
}

GaussianMixture diagonal_pair(const Vector& m1, const Vector& m2, const Vector& v1, const Vector& v2) {
  return GaussianMixture(Vector::Constant(2, 0.5), {m1, m2}, {Matrix(v1.asDiagonal()), Matrix(v2.asDiagonal())},
                         CovarianceModel::VVI);
}

}  // namespace

TEST_CASE("MC negentropy of a basis", "[metrics]") {
  Rng rng(1);
  const auto single = oracle::random_mixture(1, 4, rng);
  for (int t = 0; t < 5; ++t) {
    const Matrix b = oracle::random_orthonormal(4, 2, rng);
    const auto est = mc_negentropy_of_basis(single, Basis{b, BasisOrigin::orthonormalized}, 100000, 10 + t);
    CHECK(std::abs(est.negentropy) <= 3 * *est.mc_std_error);
  }
  const auto m = oracle::random_mixture(3, 4, rng);
  const Basis b{oracle::random_orthonormal(4, 2, rng), BasisOrigin::orthonormalized};
  const auto a = mc_negentropy_of_basis(m, b, 20000, 5);
  const auto direct = negentropy(project_mixture(m, b), {Estimator::MC, 20000, 5});
  CHECK_THAT(a.negentropy, WithinAbs(direct.negentropy, 1e-12));
  CHECK(mc_negentropy_of_basis(m, b, 20000, 5, 4).negentropy == a.negentropy);
  CHECK(CompareOptions{}.mc_samples == 100000);
  CHECK(EstimatorKind{}.mc_samples == 100000);
}

TEST_CASE("relative accuracy", "[metrics]") {
  CHECK_THAT(relative_accuracy(1.0025, 1.0210), WithinAbs(0.9818, 1e-4));
  CHECK_THAT(relative_accuracy(0.5684, 0.4905), WithinAbs(1.1589, 1e-4));
  CHECK(relative_accuracy(0.731, 0.731) == 1.0);
  CHECK_THROWS_AS(relative_accuracy(1.0, 0.0), NumericalError);
}

TEST_CASE("subspace distance examples", "[metrics]") {
  const Matrix e12 = cols3({{1, 0, 0}, {0, 1, 0}});
  const Matrix e13 = cols3({{1, 0, 0}, {0, 0, 1}});
  const double r = 1 / std::sqrt(2.0);
  const Matrix tilt = cols3({{1, 0, 0}, {0, r, r}});

  const auto same = subspace_distance(ext(e12), ext(e12));
  CHECK(same.delta <= 1e-15);
  CHECK(same.degrees <= 1e-12);
  const auto right = subspace_distance(ext(e12), ext(e13));
  CHECK_THAT(right.delta, WithinAbs(1.0, 1e-12));
  CHECK_THAT(right.degrees, WithinAbs(90.0, 1e-5));
  const auto half = subspace_distance(ext(e12), ext(tilt));
  CHECK_THAT(half.delta, WithinAbs(0.7071, 1e-4));
  CHECK_THAT(half.degrees, WithinAbs(45.0, 1e-10));

  // Non-orthonormal inputs use the general projector.
  CHECK_THAT(subspace_distance(ext(3.0 * e12), ext(e12 * (Matrix(2, 2) << 1, 2, 0, 1).finished())).degrees,
             WithinAbs(0.0, 1e-6));
  CHECK_THROWS_AS(subspace_distance(ext(e12), ext(Matrix::Identity(3, 1))), DataError);
  CHECK_THROWS(subspace_distance(ext(cols3({{1, 0, 0}, {2, 0, 0}})), ext(e12)));
}

TEST_CASE("subspace distance properties", "[metrics][property]") {
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    const auto p = 3 + static_cast<Eigen::Index>(rng.index(8));
    const auto d = 1 + static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(p - 1)));
    const Matrix b1 = oracle::random_orthonormal(p, d, rng);
    const Matrix b2 = oracle::random_orthonormal(p, d, rng);
    const Matrix b3 = oracle::random_orthonormal(p, d, rng);
    const Matrix q = oracle::random_orthogonal(d, rng);
    const Basis B1{b1, BasisOrigin::orthonormalized}, B2{b2, BasisOrigin::orthonormalized},
        B3{b3, BasisOrigin::orthonormalized};
    const auto d12 = subspace_distance(B1, B2);
    CHECK_THAT(subspace_distance(Basis{b1 * q, BasisOrigin::orthonormalized}, B2).delta, WithinAbs(d12.delta, 1e-10));
    CHECK(subspace_distance(B1, B3).degrees <= d12.degrees + subspace_distance(B2, B3).degrees + 1e-6);
    CHECK(d12.degrees >= 0.0);
    CHECK(d12.degrees <= 90.0);
    // Agrees with the principal-angle oracle.
    CHECK_THAT(d12.degrees, WithinAbs(oracle::largest_principal_angle_deg(b1, b2), 1e-6));
  }
}

TEST_CASE("feature screening", "[metrics]") {
  const auto m = diagonal_pair(Vector((Vector(2) << 2.0, 1.0).finished()), Vector((Vector(2) << 0.0, 1.0).finished()),
                               Vector::Constant(2, 0.25), Vector::Constant(2, 0.25));
  const auto s = screen_features(m);
  CHECK(s.signal(0) == 2.0);
  CHECK(s.abs_snr(0) == 2.0);
  CHECK(s.signal(1) == 0.0);
  CHECK(s.abs_snr(1) == 0.0);

  Rng rng(3);
  Vector m1(6), m2(6), v1(6), v2(6);
  for (Eigen::Index j = 0; j < 6; ++j) {
    m1(j) = rng.normal();
    m2(j) = rng.normal();
    v1(j) = rng.uniform(0.1, 2.0);
    v2(j) = rng.uniform(0.1, 2.0);
  }
  const auto a = screen_features(diagonal_pair(m1, m2, v1, v2));
  const auto b = screen_features(diagonal_pair(m2, m1, v2, v1));
  CHECK(a.signal.size() == 6);
  CHECK(a.abs_snr.size() == 6);
  CHECK(a.signal == -b.signal);
  CHECK(a.abs_snr == b.abs_snr);
  CHECK(a.abs_snr.minCoeff() >= 0.0);

  CHECK_THROWS_AS(screen_features(oracle::random_mixture(3, 2, rng)), UsageError);
  CHECK_THROWS_AS(screen_features(oracle::random_mixture(2, 3, rng)), UsageError);
}

TEST_CASE("estimator comparison", "[metrics]") {
  Rng rng(4);
  CompareOptions opt;
  opt.ga.pop_size = 30;
  opt.ga.max_iter = 40;
  opt.ga.run_stall = 20;
  opt.mc_samples = 20000;

  const Matrix x = oracle::random_matrix(200, 4, rng);
  const auto flat = oracle::random_mixture(1, 4, rng);
  const auto none = compare_estimators(flat, Dataset(x, {}), 2, opt);
  REQUIRE(none.columns.size() == 4);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(std::abs(*none.columns[k].negentropy) <= 1e-8);
    CHECK_FALSE(none.columns[k].relative.has_value());
  }
  CHECK(none.columns[3].label == "PCA");
  CHECK_FALSE(none.columns[3].negentropy.has_value());

  const auto m = oracle::random_mixture(3, 4, rng, 2.5);
  const auto rep = compare_estimators(m, Dataset(sample_points(m, 300, 9), {}), 2, opt);
  CHECK(rep.angles.rows() == 4);
  for (Eigen::Index i = 0; i < 4; ++i) {
    CHECK(rep.angles(i, i) == 0.0);
    for (Eigen::Index j = 0; j < 4; ++j) {
      CHECK(rep.angles(i, j) == rep.angles(j, i));
      CHECK(rep.angles(i, j) >= 0.0);
      CHECK(rep.angles(i, j) <= 90.0);
    }
  }
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& c = rep.columns[k];
    CHECK(c.error.empty());
    REQUIRE(c.relative.has_value());
    CHECK(*c.relative == *c.negentropy / *c.mc_negentropy);
    const auto mc = mc_negentropy_of_basis(m, *c.basis, opt.mc_samples, opt.mc_seed);
    CHECK(mc.negentropy == *c.mc_negentropy);
  }
  CHECK_THROWS_AS(compare_estimators(m, Dataset(x.leftCols(3), {}), 2, opt), DataError);
}
