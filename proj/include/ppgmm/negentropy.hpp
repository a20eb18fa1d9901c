#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ppgmm/gmm.hpp"
#include "ppgmm/linalg.hpp"
#include "ppgmm/parallel.hpp"

namespace ppgmm {

// All entropies are in nats.

enum class Estimator { MC, UT, VAR, SOTE };

inline std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::MC: return "MC";
    case Estimator::UT: return "UT";
    case Estimator::VAR: return "VAR";
    case Estimator::SOTE: return "SOTE";
  }
  return "?";
}

inline Estimator parse_estimator(std::string_view text) {
  for (auto e : {Estimator::MC, Estimator::UT, Estimator::VAR, Estimator::SOTE}) {
    if (to_string(e) == text) return e;
  }
  throw UsageError("unknown estimator '" + std::string(text) + "' (expected MC, UT, VAR or SOTE)");
}

/// Which entropy approximation to use; the sample settings matter for MC only.
struct EstimatorKind {
  Estimator kind = Estimator::UT;
  long long mc_samples = 100000;
  std::uint64_t mc_seed = 0;
};

struct NegentropyEstimate {
  EstimatorKind kind;
  double entropy = 0.0;
  double gaussian_entropy = 0.0;
  double negentropy = 0.0;  // gaussian_entropy - entropy
  std::optional<double> mc_std_error;
};

/// 0.5 log((2 pi e)^d |Sigma|).
inline double gaussian_entropy(const Matrix& covariance) {
  const auto llt = checked_llt(covariance, "gaussian_entropy");
  const double d = static_cast<double>(covariance.rows());
  return 0.5 * (d * (kLog2Pi + 1.0) + log_det(llt));
}

struct McEntropy {
  double entropy = 0.0;
  double std_error = 0.0;
};

/// -(1/S) sum log f(z_i) over S draws from the mixture. Draws come from one
/// seeded stream and the sum runs in index order, so the value does not depend
/// on `threads`.
inline McEntropy entropy_mc(const GaussianMixture& model, long long samples, std::uint64_t seed,
                            unsigned threads = 1) {
  if (samples < 2) throw UsageError("entropy_mc: need at least 2 samples");
  const Matrix z = sample_points(model, static_cast<Eigen::Index>(samples), seed);
  std::vector<double> neg_log(static_cast<std::size_t>(samples));
  parallel_for(neg_log.size(), threads, [&](std::size_t i) {
    neg_log[i] = -log_density(model, Vector(z.row(static_cast<Eigen::Index>(i)).transpose()));
  });
  double sum = 0.0;
  for (double v : neg_log) sum += v;
  const double mean = sum / static_cast<double>(samples);
  double ss = 0.0;
  for (double v : neg_log) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(samples - 1));
  return {mean, sd / std::sqrt(static_cast<double>(samples))};
}

/// The 2d unscented-transform points mu +/- sqrt(d lambda_k) u_k, returned as
/// the columns of a d x 2d matrix (plus-points first).
inline Matrix sigma_points(const Vector& mean, const Matrix& covariance) {
  const auto d = mean.size();
  if (covariance.rows() != d || covariance.cols() != d) throw DataError("sigma_points: dimension mismatch");
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(covariance));
  if (eig.info() != Eigen::Success || !(eig.eigenvalues().minCoeff() > 0.0)) {
    throw NumericalError("sigma_points: covariance is not positive definite");
  }
  Matrix points(d, 2 * d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const Vector step = std::sqrt(static_cast<double>(d) * eig.eigenvalues()(k)) * eig.eigenvectors().col(k);
    points.col(k) = mean + step;
    points.col(d + k) = mean - step;
  }
  return points;
}

/// Unscented-transform entropy: each component's expectation of log f is
/// replaced by the average over its sigma points.
inline double entropy_ut(const GaussianMixture& model) {
  const auto d = model.dimension();
  double total = 0.0;
  for (Eigen::Index g = 0; g < model.components(); ++g) {
    const Matrix points = sigma_points(model.mean(g), model.covariance(g));
    double component = 0.0;
    for (Eigen::Index k = 0; k < 2 * d; ++k) component += log_density(model, points.col(k));
    total += model.weights()(g) * component;
  }
  return -total / (2.0 * static_cast<double>(d));
}

/// KL(N(mean0, cov0) || N(mean1, cov1)).
inline double kl_gaussian(const Vector& mean0, const Matrix& cov0, const Vector& mean1, const Matrix& cov1) {
  const auto d = mean0.size();
  if (mean1.size() != d || cov0.rows() != d || cov1.rows() != d) throw DataError("kl_gaussian: dimension mismatch");
  const auto llt0 = checked_llt(cov0, "kl_gaussian");
  const auto llt1 = checked_llt(cov1, "kl_gaussian");
  const Vector diff = mean1 - mean0;
  const double trace = llt1.solve(cov0).trace();
  const double maha = diff.dot(llt1.solve(diff));
  return 0.5 * (trace + maha - static_cast<double>(d) + log_det(llt1) - log_det(llt0));
}

/// Variational upper bound on the mixture entropy:
/// sum_g pi_g h(phi_g) - sum_g pi_g log sum_l pi_l exp(-KL(phi_g || phi_l)).
inline double entropy_var(const GaussianMixture& model) {
  const auto G = model.components();
  const double d = static_cast<double>(model.dimension());
  double total = 0.0;
  Vector terms(G);
  for (Eigen::Index g = 0; g < G; ++g) {
    const double component_entropy = 0.5 * (d * (kLog2Pi + 1.0) + model.log_det_covariance(g));
    for (Eigen::Index l = 0; l < G; ++l) {
      const double kl = (l == g) ? 0.0
                                 : kl_gaussian(model.mean(g), model.covariance(g), model.mean(l), model.covariance(l));
      terms(l) = std::log(model.weights()(l)) - kl;
    }
    total += model.weights()(g) * (component_entropy - log_sum_exp(terms));
  }
  return total;
}

/// Hessian of log f at x, computed from the posterior weights so that it stays
/// finite far from the components. Throws when f(x) underflows entirely.
inline Matrix hessian_logf(const GaussianMixture& model, const Vector& x) {
  const Vector logs = model.log_weighted_densities(x);
  const double log_f = log_sum_exp(logs);
  if (!std::isfinite(log_f)) {
    throw NumericalError("hessian_logf: mixture density underflows at the requested point");
  }
  const auto d = model.dimension();
  Matrix h = Matrix::Zero(d, d);
  Vector grad = Vector::Zero(d);  // gradient of log f
  for (Eigen::Index g = 0; g < model.components(); ++g) {
    const double w = std::exp(logs(g) - log_f);
    if (w == 0.0) continue;
    const auto& llt = model.factor(g);
    const Vector a = llt.solve(model.mean(g) - x);
    const Matrix precision = llt.solve(Matrix::Identity(d, d));
    h += w * (a * a.transpose() - precision);
    grad += w * a;
  }
  h -= grad * grad.transpose();
  return symmetrize(h);
}

/// Second-order Taylor expansion of E[log f] around each component mean:
/// -sum_g pi_g log f(mu_g) - sum_g (pi_g / 2) <H(mu_g), Sigma_g>.
inline double entropy_sote(const GaussianMixture& model) {
  double zeroth = 0.0;
  double correction = 0.0;
  for (Eigen::Index g = 0; g < model.components(); ++g) {
    const double w = model.weights()(g);
    zeroth -= w * log_density(model, model.mean(g));
    const Matrix h = hessian_logf(model, model.mean(g));
    correction += 0.5 * w * h.cwiseProduct(model.covariance(g)).sum();
  }
  return zeroth - correction;
}

/// Negentropy of the mixture: entropy of the moment-matched Gaussian minus
/// the chosen approximation of the mixture entropy.
inline NegentropyEstimate negentropy(const GaussianMixture& model, const EstimatorKind& kind,
                                     unsigned threads = 1) {
  NegentropyEstimate out;
  out.kind = kind;
  out.gaussian_entropy = gaussian_entropy(mixture_moments(model).covariance);
  switch (kind.kind) {
    case Estimator::MC: {
      const auto mc = entropy_mc(model, kind.mc_samples, kind.mc_seed, threads);
      out.entropy = mc.entropy;
      out.mc_std_error = mc.std_error;
      break;
    }
    case Estimator::UT: out.entropy = entropy_ut(model); break;
    case Estimator::VAR: out.entropy = entropy_var(model); break;
    case Estimator::SOTE: out.entropy = entropy_sote(model); break;
  }
  out.negentropy = out.gaussian_entropy - out.entropy;
  return out;
}

}  // namespace ppgmm
