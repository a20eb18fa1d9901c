#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "ppgmm/data.hpp"
#include "ppgmm/ga.hpp"
#include "ppgmm/gmm.hpp"
#include "ppgmm/negentropy.hpp"
#include "ppgmm/projection.hpp"

namespace ppgmm {

/// Monte Carlo negentropy of the mixture projected onto `basis`.
inline NegentropyEstimate mc_negentropy_of_basis(const GaussianMixture& model, const Basis& basis,
                                                 long long samples, std::uint64_t seed, unsigned threads = 1) {
  if (samples < 2) throw UsageError("mc_negentropy_of_basis: need at least 2 samples");
  return negentropy(project_mixture(model, basis), EstimatorKind{Estimator::MC, samples, seed}, threads);
}

/// J_a / J_MC; above 1 the approximation overestimates.
inline double relative_accuracy(double approx, double mc) {
  if (mc == 0.0) throw NumericalError("relative_accuracy: MC negentropy is zero, ratio undefined");
  return approx / mc;
}

struct SubspaceDistance {
  double delta = 0.0;    // spectral norm of P1 - P2, in [0, 1]
  double degrees = 0.0;  // asin(delta) in degrees
};

inline Matrix projection_matrix(const Basis& basis) {
  const Matrix& b = basis.matrix;
  if (basis.has_orthonormal_columns()) return b * b.transpose();
  const Matrix gram = b.transpose() * b;
  const Eigen::LDLT<Matrix> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 1e-12 * gram.diagonal().maxCoeff())) {
    throw NumericalError("subspace_distance: basis is rank deficient");
  }
  return b * ldlt.solve(b.transpose());
}

inline SubspaceDistance subspace_distance(const Basis& b1, const Basis& b2) {
  if (b1.p() != b2.p() || b1.d() != b2.d()) throw DataError("subspace_distance: bases have different shapes");
  const Matrix diff = projection_matrix(b1) - projection_matrix(b2);
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(diff), Eigen::EigenvaluesOnly);
  const double delta = std::clamp(eig.eigenvalues().cwiseAbs().maxCoeff(), 0.0, 1.0);
  return {delta, std::asin(delta) * 180.0 / std::numbers::pi};
}

struct FeatureScreen {
  Vector signal;   // mu_j1 - mu_j2
  Vector abs_snr;  // |mu_j1 - mu_j2| / (sigma_j1 + sigma_j2)
};

/// Volcano-style per-feature screening of a two-component diagonal mixture.
inline FeatureScreen screen_features(const GaussianMixture& model) {
  if (model.components() != 2) throw UsageError("screen_features: the mixture must have exactly 2 components");
  for (Eigen::Index g = 0; g < 2; ++g) {
    const Matrix& s = model.covariance(g);
    if ((s - Matrix(s.diagonal().asDiagonal())).cwiseAbs().maxCoeff() > 0.0) {
      throw UsageError("screen_features: component covariances must be diagonal");
    }
  }
  FeatureScreen out;
  out.signal = model.mean(0) - model.mean(1);
  const Vector noise = model.covariance(0).diagonal().cwiseSqrt() + model.covariance(1).diagonal().cwiseSqrt();
  out.abs_snr = out.signal.cwiseAbs().cwiseQuotient(noise);
  return out;
}

/// One estimator column of the comparison table. PCA has no approximated
/// negentropy, so `negentropy` and `relative` stay empty for it.
struct EstimatorColumn {
  std::string label;
  std::optional<Basis> basis;
  std::optional<double> negentropy;
  std::optional<double> mc_negentropy;
  std::optional<double> mc_std_error;
  std::optional<double> relative;
  std::string error;  // empty on success
};

struct ComparisonReport {
  std::vector<EstimatorColumn> columns;  // UT, VAR, SOTE, PCA
  Matrix angles;                         // degrees; NaN where a basis is missing
  int d = 0;
};

struct CompareOptions {
  GAConfig ga{};
  long long mc_samples = 100000;
  std::uint64_t mc_seed = 1;
  unsigned threads = 1;
};

/// Runs the GA once per closed-form estimator, evaluates every basis by MC with
/// one shared seed, and adds a PCA column computed from `data`.
inline ComparisonReport compare_estimators(const GaussianMixture& model, const Dataset& data, int d,
                                           const CompareOptions& opt) {
  if (data.p() != model.dimension()) throw DataError("compare_estimators: data and model dimensions differ");
  ComparisonReport report;
  report.d = d;
  const std::vector<Estimator> kinds = {Estimator::UT, Estimator::VAR, Estimator::SOTE};
  for (std::size_t k = 0; k < kinds.size(); ++k) {
    EstimatorColumn col;
    col.label = to_string(kinds[k]);
    try {
      GAConfig ga = opt.ga;
      ga.seed = opt.ga.seed + 1000 * (k + 1);
      ga.threads = opt.threads;
      const auto res = run_ppgmmga(model, d, EstimatorKind{kinds[k]}, ga);
      col.basis = res.best_basis;
      col.negentropy = res.best_fitness;
    } catch (const std::exception& e) {
      col.error = e.what();
    }
    report.columns.push_back(std::move(col));
  }
  {
    EstimatorColumn col;
    col.label = "PCA";
    try {
      col.basis = pca_basis(data, d);
    } catch (const std::exception& e) {
      col.error = e.what();
    }
    report.columns.push_back(std::move(col));
  }
  for (auto& col : report.columns) {
    if (!col.basis) continue;
    try {
      const auto mc = mc_negentropy_of_basis(model, *col.basis, opt.mc_samples, opt.mc_seed, opt.threads);
      col.mc_negentropy = mc.negentropy;
      col.mc_std_error = mc.mc_std_error;
      // A ratio against a zero MC negentropy is undefined; mark not applicable.
      if (col.negentropy && mc.negentropy != 0.0 && std::abs(mc.negentropy) > 3.0 * mc.mc_std_error.value_or(0.0)) {
        col.relative = relative_accuracy(*col.negentropy, mc.negentropy);
      }
    } catch (const std::exception& e) {
      if (col.error.empty()) col.error = e.what();
    }
  }
  const auto m = static_cast<Eigen::Index>(report.columns.size());
  report.angles = Matrix::Constant(m, m, std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& bi = report.columns[static_cast<std::size_t>(i)].basis;
    if (!bi) continue;
    report.angles(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const auto& bj = report.columns[static_cast<std::size_t>(j)].basis;
      if (!bj) continue;
      const double deg = subspace_distance(*bi, *bj).degrees;
      report.angles(i, j) = deg;
      report.angles(j, i) = deg;
    }
  }
  return report;
}

}  // namespace ppgmm
