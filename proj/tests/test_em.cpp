#include <cmath>

#include "catch_amalgamated.hpp"
#include "oracles.hpp"
#include "ppgmm/data.hpp"
#include "ppgmm/em.hpp"

using namespace ppgmm;
using Catch::Matchers::WithinAbs;

namespace {

void check_monotone(const FitReport& fit) {
  for (std::size_t i = 1; i < fit.loglik_trace.size(); ++i) {
    CHECK(fit.loglik_trace[i] >= fit.loglik_trace[i - 1] - 1e-8);
  }
}

Dataset first_two(const Dataset& d) { return Dataset(d.values.leftCols(2), {}, d.labels); }

Dataset gaussian_cloud(Eigen::Index n, Eigen::Index p, std::uint64_t seed, const Matrix& scale) {
  Rng rng(seed);
  Matrix x(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) x(i, j) = rng.normal();
  return Dataset(x * scale, {});
}

}  // namespace

TEST_CASE("BIC arithmetic", "[em]") {
  CHECK_THAT(bic_value(-100.0, 5, 50), WithinAbs(-219.560, 5e-4));
  CHECK(bic_value(-100.0, 5, 50) == -200.0 - 5.0 * std::log(50.0));
}

TEST_CASE("G=1 fits recover the closed-form MLE", "[em][oracle]") {
  Matrix scale(3, 3);
  scale << 2, 0, 0, 0.5, 1, 0, 0.3, -0.2, 0.7;
  const auto data = gaussian_cloud(300, 3, 4, scale);
  const Vector mean = data.values.colwise().mean().transpose();
  const Matrix c = data.values.rowwise() - mean.transpose();
  const Matrix mle = c.transpose() * c / 300.0;
  for (auto model : kAllCovarianceModels) {
    const auto fit = em_fit(data, 1, model, 1);
    check_monotone(fit);
    CHECK((fit.model.mean(0) - mean).cwiseAbs().maxCoeff() <= 1e-10);
    const Matrix& s = fit.model.covariance(0);
    Matrix expected = mle;
    if (model == CovarianceModel::EII || model == CovarianceModel::VII) {
      expected = Matrix::Identity(3, 3) * mle.trace() / 3.0;
    } else if (is_diagonal_model(model)) {
      expected = mle.diagonal().asDiagonal();
    }
    CHECK((s - expected).cwiseAbs().maxCoeff() <= 1e-10);
    // Log-likelihood at the MLE, computed directly.
    double ll = 0.0;
    for (Eigen::Index i = 0; i < 300; ++i) {
      ll += std::log(oracle::gaussian_pdf(data.values.row(i).transpose(), mean, expected));
    }
    CHECK_THAT(fit.loglik, WithinAbs(ll, 1e-8));
    CHECK(fit.bic == bic_value(fit.loglik, n_params(model, 1, 3), 300));
  }
}

TEST_CASE("two separated clusters with VII", "[em]") {
  Rng rng(5);
  Matrix x(400, 2);
  for (Eigen::Index i = 0; i < 400; ++i) {
    const double c = i % 2 ? 5.0 : -5.0;
    x(i, 0) = c + rng.normal();
    x(i, 1) = c + rng.normal();
  }
  const auto fit = em_fit(Dataset(x, {}), 2, CovarianceModel::VII, 3);
  check_monotone(fit);
  CHECK(fit.converged);
  std::vector<double> firsts{fit.model.mean(0)(0), fit.model.mean(1)(0)};
  std::sort(firsts.begin(), firsts.end());
  CHECK_THAT(firsts[0], WithinAbs(-5.0, 0.2));
  CHECK_THAT(firsts[1], WithinAbs(5.0, 0.2));
  CHECK_THAT(fit.model.weights()(0), WithinAbs(0.5, 0.05));
  // The fitted responsibilities agree with those of the generating model on almost every point.
  const GaussianMixture truth(Vector::Constant(2, 0.5), {Vector::Constant(2, -5.0), Vector::Constant(2, 5.0)},
                              {Matrix::Identity(2, 2), Matrix::Identity(2, 2)});
  const Matrix r_fit = responsibilities(fit.model, Dataset(x, {}));
  const Matrix r_true = responsibilities(truth, Dataset(x, {}));
  const Eigen::Index match = fit.model.mean(0)(0) < 0 ? 0 : 1;
  CHECK((r_fit.col(match) - r_true.col(0)).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("triangle EII means sit on the vertices", "[em]") {
  const auto data = first_two(simulate_triangle(500, 2, 21));
  const auto fit = em_fit(data, 3, CovarianceModel::EII, 21);
  check_monotone(fit);
  const double vx[3] = {-1, 0, 1};
  const double vy[3] = {-1, 1, -1};
  std::vector<bool> used(3, false);
  for (Eigen::Index g = 0; g < 3; ++g) {
    int hit = -1;
    for (int k = 0; k < 3; ++k) {
      if (std::hypot(fit.model.mean(g)(0) - vx[k], fit.model.mean(g)(1) - vy[k]) <= 0.15) hit = k;
    }
    REQUIRE(hit >= 0);
    CHECK_FALSE(used[static_cast<std::size_t>(hit)]);
    used[static_cast<std::size_t>(hit)] = true;
  }
}

TEST_CASE("every fit is monotone and respects its constraint", "[em][property]") {
  const auto tri = simulate_triangle(300, 3, 8);
  const auto wave = simulate_waveform(200, 8);
  for (const auto* data : {&tri, &wave}) {
    for (auto model : kAllCovarianceModels) {
      for (Eigen::Index G = 1; G <= 3; ++G) {
        try {
          const auto fit = em_fit(*data, G, model, 17);
          check_monotone(fit);
          CHECK(satisfies_constraint(fit.model, model, 1e-8));
          CHECK(fit.model.model() == model);
          CHECK(fit.n_params == n_params(model, G, data->p()));
          CHECK(fit.iterations == static_cast<int>(fit.loglik_trace.size()));
        } catch (const FitFailure&) {
          // A degenerate fit is an allowed outcome; the test cares about the ones that succeed.
        }
      }
    }
  }
}

TEST_CASE("em_fit determinism and preconditions", "[em]") {
  const auto data = first_two(simulate_triangle(200, 2, 2));
  const auto a = em_fit(data, 3, CovarianceModel::VVV, 5);
  const auto b = em_fit(data, 3, CovarianceModel::VVV, 5);
  CHECK(a.loglik == b.loglik);
  CHECK(a.loglik_trace == b.loglik_trace);
  CHECK_THROWS_AS(em_fit(data, 200, CovarianceModel::EII, 1), UsageError);
  EmOptions bad;
  bad.tol = 0.0;
  CHECK_THROWS_AS(em_fit(data, 2, CovarianceModel::EII, 1, bad), UsageError);
}

TEST_CASE("BIC picks three components on triangle data", "[em][simulate]") {
  int hits = 0;
  const std::vector<CovarianceModel> all(kAllCovarianceModels.begin(), kAllCovarianceModels.end());
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto data = first_two(simulate_triangle(500, 2, seed));
    const auto sel = select_model(data, 1, 5, all, seed);
    check_monotone(sel.best);
    hits += sel.best.model.components() == 3;
    CHECK(sel.table.size() == 30);
    for (const auto& e : sel.table) {
      if (e.bic) CHECK(*e.bic == bic_value(*e.loglik, e.n_params, 500));
      if (e.bic) CHECK(*e.bic <= sel.best.bic);
    }
  }
  CHECK(hits >= 9);
}

TEST_CASE("BIC picks one component on Gaussian data", "[em][simulate]") {
  int hits = 0;
  const std::vector<CovarianceModel> all(kAllCovarianceModels.begin(), kAllCovarianceModels.end());
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto data = gaussian_cloud(1000, 2, 100 + seed, Matrix::Identity(2, 2));
    hits += select_model(data, 1, 4, all, seed).best.model.components() == 1;
  }
  CHECK(hits >= 9);
}

TEST_CASE("ties go to the earlier model", "[em]") {
  const auto data = gaussian_cloud(100, 2, 3, Matrix::Identity(2, 2));
  // At G=1, EII/VII and EEE/VVV are the same model with the same parameter count.
  CHECK(select_model(data, 1, 1, {CovarianceModel::VII, CovarianceModel::EII}, 1).best.model.model() ==
        CovarianceModel::EII);
  const auto full = select_model(data, 1, 1, {CovarianceModel::VVV, CovarianceModel::EEE}, 1);
  REQUIRE(full.table[0].bic == full.table[1].bic);
  CHECK(full.best.model.model() == CovarianceModel::EEE);
}

TEST_CASE("select_model reports every failure", "[em]") {
  const auto data = gaussian_cloud(6, 2, 3, Matrix::Identity(2, 2));
  try {
    select_model(data, 6, 7, {CovarianceModel::EII, CovarianceModel::VVV}, 1);
    FAIL("expected a failure");
  } catch (const FitFailure& e) {
    const std::string what = e.what();
    CHECK(what.find("EII G=6") != std::string::npos);
    CHECK(what.find("VVV G=7") != std::string::npos);
  }
  CHECK_THROWS_AS(select_model(data, 2, 1, {CovarianceModel::EII}, 1), UsageError);
  CHECK_THROWS_AS(select_model(data, 1, 2, {}, 1), UsageError);
}

TEST_CASE("select_model is independent of the thread count", "[em]") {
  const auto data = first_two(simulate_triangle(300, 2, 4));
  const std::vector<CovarianceModel> all(kAllCovarianceModels.begin(), kAllCovarianceModels.end());
  const auto one = select_model(data, 1, 4, all, 9, SelectOptions{{}, 1});
  const auto four = select_model(data, 1, 4, all, 9, SelectOptions{{}, 4});
  CHECK(one.best.loglik == four.best.loglik);
  REQUIRE(one.table.size() == four.table.size());
  for (std::size_t i = 0; i < one.table.size(); ++i) CHECK(one.table[i].bic == four.table[i].bic);
}
