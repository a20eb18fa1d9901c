#include <cmath>
#include <numbers>

#include "catch_amalgamated.hpp"
#include "oracles.hpp"
#include "ppgmm/gmm.hpp"

using namespace ppgmm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

GaussianMixture standard_normal_1d() { return GaussianMixture(Vector::Ones(1), {Vector::Zero(1)}, {Matrix::Identity(1, 1)}); }

Vector v1(double a) { return Vector::Constant(1, a); }

}  // namespace

TEST_CASE("log density examples", "[gmm]") {
  CHECK_THAT(log_density(standard_normal_1d(), v1(0.0)), WithinAbs(-0.5 * std::log(2 * std::numbers::pi), 1e-15));
  const GaussianMixture two(Vector::Constant(2, 0.5), {v1(-1.0), v1(1.0)}, {Matrix::Identity(1, 1), Matrix::Identity(1, 1)});
  CHECK_THAT(log_density(two, v1(0.0)), WithinAbs(-0.5 * std::log(2 * std::numbers::pi) - 0.5, 1e-15));
  CHECK_THAT(log_density(two, v1(0.0)), WithinAbs(-1.418939, 1e-6));
}

TEST_CASE("log-sum-exp path matches direct summation", "[gmm][oracle]") {
  Rng rng(101);
  for (int t = 0; t < 100; ++t) {
    const auto G = 1 + static_cast<Eigen::Index>(rng.index(4));
    const auto d = 1 + static_cast<Eigen::Index>(rng.index(4));
    const auto m = oracle::random_mixture(G, d, rng);
    Vector x(d);
    for (Eigen::Index j = 0; j < d; ++j) x(j) = 2.0 * rng.normal();
    const double direct = std::log(oracle::mixture_pdf(m, x));
    CHECK_THAT(log_density(m, x), WithinAbs(direct, 1e-12));
  }
}

TEST_CASE("log density survives far-away points", "[gmm]") {
  const auto m = standard_normal_1d();
  const double far = log_density(m, v1(60.0));
  CHECK(std::isfinite(far));
  CHECK_THAT(far, WithinRel(-0.5 * std::log(2 * std::numbers::pi) - 1800.0, 1e-14));
  CHECK_THROWS_AS(log_density(m, Vector::Zero(2)), DataError);
}

TEST_CASE("gradient of the density", "[gmm]") {
  const auto m = standard_normal_1d();
  CHECK(gradient_density(m, v1(0.0))(0) == 0.0);
  CHECK_THAT(gradient_density(m, v1(1.0))(0), WithinAbs(-0.241971, 1e-6));
  CHECK_THAT(gradient_density(m, v1(1.0))(0), WithinAbs(-std::exp(-0.5) / std::sqrt(2 * std::numbers::pi), 1e-15));
}

TEST_CASE("gradient matches central differences of the density", "[gmm][oracle][property]") {
  Rng rng(7);
  const double h = 1e-5;
  for (int t = 0; t < 100; ++t) {
    const auto G = 1 + static_cast<Eigen::Index>(rng.index(4));
    const auto d = 1 + static_cast<Eigen::Index>(rng.index(5));
    const auto m = oracle::random_mixture(G, d, rng, 1.0);
    Vector x(d);
    for (Eigen::Index j = 0; j < d; ++j) x(j) = rng.normal();
    const Vector g = gradient_density(m, x);
    for (Eigen::Index j = 0; j < d; ++j) {
      Vector a = x, b = x;
      a(j) += h;
      b(j) -= h;
      const double fd = (oracle::mixture_pdf(m, a) - oracle::mixture_pdf(m, b)) / (2 * h);
      CHECK_THAT(g(j), WithinAbs(fd, 1e-6));
    }
  }
}

TEST_CASE("parameter counts", "[gmm]") {
  CHECK(n_params(CovarianceModel::EII, 1, 2) == 3);
  CHECK(n_params(CovarianceModel::VVV, 2, 3) == 19);
  CHECK(n_params(CovarianceModel::VVI, 3, 21) == 128);
  CHECK(n_params(CovarianceModel::VII, 3, 2) == 2 + 6 + 3);
  CHECK(n_params(CovarianceModel::EEI, 3, 2) == 2 + 6 + 2);
  CHECK(n_params(CovarianceModel::EEE, 3, 2) == 2 + 6 + 3);
}

TEST_CASE("covariance model names", "[gmm]") {
  for (auto m : kAllCovarianceModels) CHECK(parse_covariance_model(to_string(m)) == m);
  CHECK_THROWS_AS(parse_covariance_model("VEV"), UsageError);
  CHECK(is_diagonal_model(CovarianceModel::VVI));
  CHECK_FALSE(is_diagonal_model(CovarianceModel::EEE));
}

TEST_CASE("mixture moments", "[gmm]") {
  Vector a(2), b(2);
  a << 1, 0;
  b << -1, 0;
  const GaussianMixture m(Vector::Constant(2, 0.5), {a, b}, {Matrix::Identity(2, 2), Matrix::Identity(2, 2)});
  const auto mom = mixture_moments(m);
  CHECK(mom.mean.isZero(1e-15));
  Matrix expected(2, 2);
  expected << 2, 0, 0, 1;
  CHECK((mom.covariance - expected).cwiseAbs().maxCoeff() <= 1e-15);

  Rng rng(3);
  const auto single = oracle::random_mixture(1, 3, rng);
  const auto s = mixture_moments(single);
  CHECK(s.mean == single.mean(0));
  CHECK(s.covariance == single.covariance(0));
}

TEST_CASE("mixture moments match sampled moments", "[gmm][oracle][property]") {
  Rng rng(11);
  for (int t = 0; t < 5; ++t) {
    const auto m = oracle::random_mixture(3, 3, rng);
    const Matrix x = sample_points(m, 100000, 1000 + t);
    const auto emp = oracle::empirical_moments(x);
    const auto mom = mixture_moments(m);
    for (Eigen::Index i = 0; i < 3; ++i) {
      CHECK(std::abs(emp.mean(i) - mom.mean(i)) <= 3 * emp.mean_se(i));
      for (Eigen::Index j = 0; j < 3; ++j) CHECK(std::abs(emp.cov(i, j) - mom.covariance(i, j)) <= 3 * emp.cov_se(i, j));
    }
  }
}

TEST_CASE("sampling", "[gmm]") {
  const auto d = sample(standard_normal_1d(), 100000, 5);
  CHECK_THAT(d.values.col(0).mean(), WithinAbs(0.0, 0.02));

  const GaussianMixture point(Vector((Vector(2) << 1.0, 0.0).finished()), {v1(-3.0), v1(3.0)},
                              {Matrix::Identity(1, 1), Matrix::Identity(1, 1)});
  const auto s = sample(point, 1000, 9);
  for (const auto& l : *s.labels) CHECK(l == "1");

  const auto again = sample(standard_normal_1d(), 100000, 5);
  CHECK(again.values == d.values);
  CHECK(sample(standard_normal_1d(), 10, 6).values != sample(standard_normal_1d(), 10, 5).values);
}

TEST_CASE("mixture validation", "[gmm]") {
  const Matrix I = Matrix::Identity(2, 2);
  CHECK_THROWS_AS(GaussianMixture(Vector::Constant(2, 0.4), {Vector::Zero(2), Vector::Zero(2)}, {I, I}), DataError);
  CHECK_THROWS_AS(GaussianMixture(Vector::Ones(1), {Vector::Zero(2)}, {-I}), std::exception);
  Matrix asym = I;
  asym(0, 1) = 0.5;
  CHECK_THROWS_AS(GaussianMixture(Vector::Ones(1), {Vector::Zero(2)}, {asym}), NumericalError);
  CHECK_THROWS_AS(GaussianMixture(Vector::Ones(1), {Vector::Zero(3)}, {I}), DataError);
  Vector bad = Vector::Zero(2);
  bad(0) = std::nan("");
  CHECK_THROWS_AS(GaussianMixture(Vector::Ones(1), {bad}, {I}), DataError);
}

TEST_CASE("responsibilities sum to one", "[gmm][property]") {
  Rng rng(19);
  for (int t = 0; t < 50; ++t) {
    const auto m = oracle::random_mixture(4, 3, rng);
    Vector x(3);
    for (Eigen::Index j = 0; j < 3; ++j) x(j) = 4 * rng.normal();
    const Vector r = responsibilities(m, x);
    CHECK_THAT(r.sum(), WithinAbs(1.0, 1e-12));
    CHECK(r.minCoeff() >= 0.0);
  }
}

TEST_CASE("covariance constraint checker", "[gmm]") {
  const Matrix I = Matrix::Identity(2, 2);
  const GaussianMixture eii(Vector::Constant(2, 0.5), {Vector::Zero(2), Vector::Ones(2)}, {I, I});
  for (auto m : kAllCovarianceModels) CHECK(satisfies_constraint(eii, m, 1e-8));
  const GaussianMixture vii(Vector::Constant(2, 0.5), {Vector::Zero(2), Vector::Ones(2)}, {I, 2 * I});
  CHECK_FALSE(satisfies_constraint(vii, CovarianceModel::EII, 1e-8));
  CHECK(satisfies_constraint(vii, CovarianceModel::VII, 1e-8));
  Matrix full = I;
  full(0, 1) = full(1, 0) = 0.3;
  const GaussianMixture eee(Vector::Constant(2, 0.5), {Vector::Zero(2), Vector::Ones(2)}, {full, full});
  CHECK_FALSE(satisfies_constraint(eee, CovarianceModel::VVI, 1e-8));
  CHECK(satisfies_constraint(eee, CovarianceModel::EEE, 1e-8));
}
