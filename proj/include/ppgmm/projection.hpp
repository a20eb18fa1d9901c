#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "ppgmm/data.hpp"
#include "ppgmm/gmm.hpp"
#include "ppgmm/linalg.hpp"

namespace ppgmm {

/// Box constraints for a real-coded genome.
struct Bounds {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t size() const { return lower.size(); }
  bool contains(const std::vector<double>& x) const {
    if (x.size() != lower.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!(x[i] >= lower[i] && x[i] <= upper[i])) return false;
    }
    return true;
  }
};

/// Spherical-coordinate encoding of a p x d basis: d blocks of p-1 angles,
/// each laid out as (phi_j, theta_1j, ..., theta_(p-2)j) with phi in
/// [0, 2 pi] and theta in [0, pi].
struct AngleGenome {
  std::vector<double> angles;
  int p = 0;
  int d = 0;

  AngleGenome() = default;
  AngleGenome(std::vector<double> a, int p_, int d_) : angles(std::move(a)), p(p_), d(d_) {
    if (p < 2) throw UsageError("genome: p must be at least 2");
    if (d < 1 || d >= p) throw UsageError("genome: need 1 <= d < p");
    if (angles.size() != static_cast<std::size_t>(d) * static_cast<std::size_t>(p - 1)) {
      throw UsageError("genome: expected d(p-1) = " + std::to_string(d * (p - 1)) + " angles, got " +
                       std::to_string(angles.size()));
    }
  }

  static std::size_t length(int p, int d) { return static_cast<std::size_t>(d) * static_cast<std::size_t>(p - 1); }
};

/// Genome bounds: 2 pi for the leading phi of each block, pi for thetas.
inline Bounds angle_bounds(int p, int d) {
  Bounds b;
  const std::size_t block = static_cast<std::size_t>(p - 1);
  for (int j = 0; j < d; ++j) {
    for (std::size_t k = 0; k < block; ++k) {
      b.lower.push_back(0.0);
      b.upper.push_back(k == 0 ? 2.0 * std::numbers::pi : std::numbers::pi);
    }
  }
  return b;
}

enum class BasisOrigin { decoded, orthonormalized, pca, external };

inline std::string to_string(BasisOrigin origin) {
  switch (origin) {
    case BasisOrigin::decoded: return "decoded";
    case BasisOrigin::orthonormalized: return "orthonormalized";
    case BasisOrigin::pca: return "pca";
    case BasisOrigin::external: return "external";
  }
  return "?";
}

struct Basis {
  Matrix matrix;  // p x d
  BasisOrigin origin = BasisOrigin::external;

  Eigen::Index p() const { return matrix.rows(); }
  Eigen::Index d() const { return matrix.cols(); }
  bool has_orthonormal_columns() const {
    return origin == BasisOrigin::orthonormalized || origin == BasisOrigin::pca;
  }
};

/// Max-abs deviation of B^T B from the identity.
inline double orthonormality_error(const Matrix& b) {
  return (b.transpose() * b - Matrix::Identity(b.cols(), b.cols())).cwiseAbs().maxCoeff();
}

/// Unit vector from one block of p-1 angles (phi first, then thetas).
inline Vector decode_column(const double* block, int p) {
  Vector v(p);
  const double phi = block[0];
  if (p == 2) {
    v << std::sin(phi), std::cos(phi);
    return v;
  }
  const double* theta = block + 1;  // theta[0] is theta_1, ..., theta[p-3] is theta_(p-2)
  // prefix[k] = sin(theta_1) ... sin(theta_k)
  std::vector<double> prefix(static_cast<std::size_t>(p - 1), 1.0);
  for (int k = 1; k <= p - 2; ++k) prefix[static_cast<std::size_t>(k)] = prefix[static_cast<std::size_t>(k - 1)] * std::sin(theta[k - 1]);
  const double full = prefix[static_cast<std::size_t>(p - 2)];
  v(0) = full * std::sin(phi);
  v(1) = full * std::cos(phi);
  // Entry k (1-based, k >= 3): sin(theta_1) ... sin(theta_(p-k)) cos(theta_(p-k+1)).
  for (int k = 3; k <= p; ++k) {
    v(k - 1) = prefix[static_cast<std::size_t>(p - k)] * std::cos(theta[p - k]);
  }
  return v;
}

inline Basis decode(const AngleGenome& genome) {
  Matrix b(genome.p, genome.d);
  const std::size_t block = static_cast<std::size_t>(genome.p - 1);
  for (int j = 0; j < genome.d; ++j) {
    b.col(j) = decode_column(genome.angles.data() + static_cast<std::size_t>(j) * block, genome.p);
  }
  return {std::move(b), BasisOrigin::decoded};
}

/// Thin QR with the sign of each column fixed so diag(R) >= 0. The span is
/// unchanged.
inline Basis orthonormalize(const Basis& basis) {
  const auto p = basis.p();
  const auto d = basis.d();
  if (d < 1 || d > p) throw UsageError("orthonormalize: need 1 <= d <= p");
  const Eigen::HouseholderQR<Matrix> qr(basis.matrix);
  const Matrix r = qr.matrixQR().topRows(d).triangularView<Eigen::Upper>();
  const double scale = std::max(basis.matrix.cwiseAbs().maxCoeff(), 1e-300);
  Matrix q = qr.householderQ() * Matrix::Identity(p, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    if (std::abs(r(j, j)) <= 1e-10 * scale * std::sqrt(static_cast<double>(p))) {
      throw NumericalError("orthonormalize: basis columns are linearly dependent");
    }
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return {std::move(q), BasisOrigin::orthonormalized};
}

inline void require_orthonormal(const Matrix& b, const char* who) {
  if (orthonormality_error(b) > 1e-8) {
    throw NumericalError(std::string(who) + ": basis columns are not orthonormal");
  }
}

/// Distribution of B^T x for x following `model`: same weights, means B^T mu_g,
/// covariances B^T Sigma_g B.
inline GaussianMixture project_mixture(const GaussianMixture& model, const Basis& basis) {
  if (basis.p() != model.dimension()) {
    throw DataError("project_mixture: basis has " + std::to_string(basis.p()) +
                    " rows, mixture dimension is " + std::to_string(model.dimension()));
  }
  require_orthonormal(basis.matrix, "project_mixture");
  const Matrix& b = basis.matrix;
  std::vector<Vector> means;
  std::vector<Matrix> covs;
  means.reserve(static_cast<std::size_t>(model.components()));
  covs.reserve(static_cast<std::size_t>(model.components()));
  for (Eigen::Index g = 0; g < model.components(); ++g) {
    means.emplace_back(b.transpose() * model.mean(g));
    covs.emplace_back(symmetrize(b.transpose() * model.covariance(g) * b));
  }
  CovarianceModel code = CovarianceModel::VVV;
  switch (model.model()) {
    case CovarianceModel::EII:
    case CovarianceModel::VII:
    case CovarianceModel::EEE: code = model.model(); break;
    case CovarianceModel::EEI: code = CovarianceModel::EEE; break;
    default: break;
  }
  return GaussianMixture(model.weights(), std::move(means), std::move(covs), code);
}

/// Z = X B, labels carried through.
inline Dataset project_data(const Dataset& data, const Basis& basis) {
  if (basis.p() != data.p()) {
    throw DataError("project_data: basis has " + std::to_string(basis.p()) + " rows, data has " +
                    std::to_string(data.p()) + " columns");
  }
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < basis.d(); ++j) names.push_back("z" + std::to_string(j + 1));
  return Dataset(data.values * basis.matrix, std::move(names), data.labels);
}

inline Matrix sample_covariance(const Matrix& x) {
  const Matrix centered = x.rowwise() - x.colwise().mean();
  return symmetrize(centered.transpose() * centered / static_cast<double>(x.rows() - 1));
}

/// Leading d eigenvectors of the sample covariance, eigenvalue-descending,
/// each with its largest-magnitude entry made positive. A near-tie at the
/// d-th eigenvalue is reported through `warnings`.
inline Basis pca_basis(const Dataset& data, Eigen::Index d, std::vector<std::string>* warnings = nullptr) {
  const auto p = data.p();
  if (d < 1 || d >= p) throw UsageError("pca_basis: need 1 <= d < p");
  if (data.n() < 2) throw DataError("pca_basis: need at least 2 rows");
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(sample_covariance(data.values));
  if (eig.info() != Eigen::Success) throw NumericalError("pca_basis: eigen-decomposition failed");
  // Eigen sorts ascending; walk from the top.
  const Vector& values = eig.eigenvalues();
  Matrix b(p, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    Vector v = eig.eigenvectors().col(p - 1 - j);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    b.col(j) = v;
  }
  const double cut = values(p - d);
  const double next = values(p - d - 1);
  if (warnings && std::abs(cut - next) <= 1e-10 * std::max(1.0, std::abs(cut))) {
    warnings->push_back("pca_basis: eigenvalues " + std::to_string(d) + " and " + std::to_string(d + 1) +
                        " are tied; the leading subspace is not unique");
  }
  if (!(values(p - d) > 0.0)) throw NumericalError("pca_basis: covariance is rank deficient in the leading subspace");
  return {std::move(b), BasisOrigin::pca};
}

}  // namespace ppgmm
