#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>

#include "ppgmm/error.hpp"

namespace ppgmm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

/// log(sum(exp(values))) without overflow; -inf for an empty or all -inf input.
inline double log_sum_exp(std::span<const double> values) {
  double top = -std::numeric_limits<double>::infinity();
  for (double v : values) top = std::max(top, v);
  if (!std::isfinite(top)) return top;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - top);
  return top + std::log(sum);
}

inline double log_sum_exp(const Vector& values) {
  return log_sum_exp(std::span<const double>(values.data(), static_cast<std::size_t>(values.size())));
}

inline bool is_symmetric(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

/// Cholesky factor of a symmetric positive-definite matrix; throws
/// NumericalError naming `what` when the matrix is not PD.
inline Eigen::LLT<Matrix> checked_llt(const Matrix& m, const std::string& what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw NumericalError(what + ": matrix must be square and non-empty");
  }
  if (!m.allFinite()) throw NumericalError(what + ": matrix has non-finite entries");
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(what + ": matrix is not positive definite");
  }
  const auto diag = llt.matrixL().toDenseMatrix().diagonal();
  if ((diag.array() <= 0.0).any() || !diag.allFinite()) {
    throw NumericalError(what + ": matrix is not positive definite");
  }
  return llt;
}

/// log|A| from a Cholesky factor.
inline double log_det(const Eigen::LLT<Matrix>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

/// Symmetric part of a nearly symmetric matrix.
inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

}  // namespace ppgmm
