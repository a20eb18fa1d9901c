#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ppgmm/data.hpp"
#include "ppgmm/error.hpp"
#include "ppgmm/linalg.hpp"
#include "ppgmm/rng.hpp"

namespace ppgmm {

/// Covariance parameterizations: spherical, diagonal or full, each either
/// shared across components (E..) or varying (V..).
enum class CovarianceModel { EII, VII, EEI, VVI, EEE, VVV };

inline constexpr std::array<CovarianceModel, 6> kAllCovarianceModels = {
    CovarianceModel::EII, CovarianceModel::VII, CovarianceModel::EEI,
    CovarianceModel::VVI, CovarianceModel::EEE, CovarianceModel::VVV};

inline std::string to_string(CovarianceModel model) {
  switch (model) {
    case CovarianceModel::EII: return "EII";
    case CovarianceModel::VII: return "VII";
    case CovarianceModel::EEI: return "EEI";
    case CovarianceModel::VVI: return "VVI";
    case CovarianceModel::EEE: return "EEE";
    case CovarianceModel::VVV: return "VVV";
  }
  return "?";
}

inline CovarianceModel parse_covariance_model(std::string_view code) {
  for (auto model : kAllCovarianceModels) {
    if (to_string(model) == code) return model;
  }
  throw UsageError("unknown covariance model '" + std::string(code) + "'");
}

inline bool is_diagonal_model(CovarianceModel m) {
  return m == CovarianceModel::EII || m == CovarianceModel::VII || m == CovarianceModel::EEI ||
         m == CovarianceModel::VVI;
}

/// Free parameter count: G-1 weights, G*p means, plus the covariance terms.
inline long long n_params(CovarianceModel model, long long G, long long p) {
  long long cov = 0;
  switch (model) {
    case CovarianceModel::EII: cov = 1; break;
    case CovarianceModel::VII: cov = G; break;
    case CovarianceModel::EEI: cov = p; break;
    case CovarianceModel::VVI: cov = G * p; break;
    case CovarianceModel::EEE: cov = p * (p + 1) / 2; break;
    case CovarianceModel::VVV: cov = G * p * (p + 1) / 2; break;
  }
  return (G - 1) + G * p + cov;
}

struct Moments {
  Vector mean;
  Matrix covariance;
};

/// Finite mixture of multivariate Gaussians. Immutable once built; the
/// Cholesky factors of every component covariance are cached.
class GaussianMixture {
 public:
  GaussianMixture(Vector weights, std::vector<Vector> means, std::vector<Matrix> covariances,
                  CovarianceModel model = CovarianceModel::VVV)
      : weights_(std::move(weights)),
        means_(std::move(means)),
        covariances_(std::move(covariances)),
        model_(model) {
    const auto G = weights_.size();
    if (G < 1) throw DataError("mixture needs at least one component");
    if (static_cast<Eigen::Index>(means_.size()) != G ||
        static_cast<Eigen::Index>(covariances_.size()) != G) {
      throw DataError("mixture weights, means and covariances disagree on the component count");
    }
    if (!weights_.allFinite() || (weights_.array() < 0.0).any()) {
      throw DataError("mixture weights must be finite and nonnegative");
    }
    if (std::abs(weights_.sum() - 1.0) > 1e-9) {
      throw DataError("mixture weights must sum to 1");
    }
    const auto p = means_.front().size();
    if (p < 1) throw DataError("mixture dimension must be positive");
    log_weights_.resize(G);
    factors_.reserve(static_cast<std::size_t>(G));
    log_dets_.resize(G);
    for (Eigen::Index g = 0; g < G; ++g) {
      const auto k = static_cast<std::size_t>(g);
      if (means_[k].size() != p || covariances_[k].rows() != p || covariances_[k].cols() != p) {
        throw DataError("component " + std::to_string(g + 1) + " has inconsistent dimensions");
      }
      if (!means_[k].allFinite()) throw DataError("component means must be finite");
      if (!is_symmetric(covariances_[k], 1e-8)) {
        throw NumericalError("component " + std::to_string(g + 1) + " covariance is not symmetric");
      }
      covariances_[k] = symmetrize(covariances_[k]);
      factors_.push_back(checked_llt(covariances_[k], "component " + std::to_string(g + 1) + " covariance"));
      log_dets_(g) = log_det(factors_.back());
      log_weights_(g) = std::log(weights_(g));
    }
  }

  Eigen::Index components() const { return weights_.size(); }
  Eigen::Index dimension() const { return means_.front().size(); }
  const Vector& weights() const { return weights_; }
  const std::vector<Vector>& means() const { return means_; }
  const std::vector<Matrix>& covariances() const { return covariances_; }
  const Vector& mean(Eigen::Index g) const { return means_[static_cast<std::size_t>(g)]; }
  const Matrix& covariance(Eigen::Index g) const { return covariances_[static_cast<std::size_t>(g)]; }
  const Eigen::LLT<Matrix>& factor(Eigen::Index g) const { return factors_[static_cast<std::size_t>(g)]; }
  double log_det_covariance(Eigen::Index g) const { return log_dets_(g); }
  CovarianceModel model() const { return model_; }

  /// log phi(x; mu_g, Sigma_g).
  double log_component_density(Eigen::Index g, const Vector& x) const {
    const Vector z = factor(g).matrixL().solve(x - mean(g));
    return -0.5 * (static_cast<double>(dimension()) * kLog2Pi + log_dets_(g) + z.squaredNorm());
  }

  /// log(pi_g) + log phi(x; mu_g, Sigma_g) for every component.
  Vector log_weighted_densities(const Vector& x) const {
    check_point(x);
    Vector out(components());
    for (Eigen::Index g = 0; g < components(); ++g) {
      out(g) = log_weights_(g) + log_component_density(g, x);
    }
    return out;
  }

  void check_point(const Vector& x) const {
    if (x.size() != dimension()) {
      throw DataError("point has length " + std::to_string(x.size()) + ", mixture dimension is " +
                      std::to_string(dimension()));
    }
  }

 private:
  Vector weights_;
  std::vector<Vector> means_;
  std::vector<Matrix> covariances_;
  CovarianceModel model_;
  Vector log_weights_;
  std::vector<Eigen::LLT<Matrix>> factors_;
  Vector log_dets_;
};

/// log f(x) via log-sum-exp over the weighted component log densities.
inline double log_density(const GaussianMixture& model, const Vector& x) {
  return log_sum_exp(model.log_weighted_densities(x));
}

/// Gradient of the mixture density f (not of log f):
/// sum_g pi_g Sigma_g^{-1} (mu_g - x) phi(x; mu_g, Sigma_g).
inline Vector gradient_density(const GaussianMixture& model, const Vector& x) {
  const Vector logs = model.log_weighted_densities(x);
  Vector grad = Vector::Zero(model.dimension());
  for (Eigen::Index g = 0; g < model.components(); ++g) {
    grad += std::exp(logs(g)) * model.factor(g).solve(model.mean(g) - x);
  }
  return grad;
}

/// Posterior component probabilities at x; they sum to one.
inline Vector responsibilities(const GaussianMixture& model, const Vector& x) {
  const Vector logs = model.log_weighted_densities(x);
  const double total = log_sum_exp(logs);
  return (logs.array() - total).exp().matrix();
}

/// Overall mean and covariance (law of total covariance).
inline Moments mixture_moments(const GaussianMixture& model) {
  const auto p = model.dimension();
  Vector mean = Vector::Zero(p);
  for (Eigen::Index g = 0; g < model.components(); ++g) mean += model.weights()(g) * model.mean(g);
  Matrix cov = Matrix::Zero(p, p);
  for (Eigen::Index g = 0; g < model.components(); ++g) {
    const Vector diff = model.mean(g) - mean;
    cov += model.weights()(g) * (model.covariance(g) + diff * diff.transpose());
  }
  return {std::move(mean), symmetrize(cov)};
}

/// Draws n points (rows). When `components` is given it receives the 0-based
/// component of origin of every row.
inline Matrix sample_points(const GaussianMixture& model, Eigen::Index n, std::uint64_t seed,
                            std::vector<Eigen::Index>* components = nullptr) {
  if (n < 1) throw UsageError("sample: n must be at least 1");
  const auto p = model.dimension();
  const auto G = model.components();
  std::vector<Matrix> lowers;
  lowers.reserve(static_cast<std::size_t>(G));
  for (Eigen::Index g = 0; g < G; ++g) lowers.push_back(model.factor(g).matrixL());
  Rng rng(seed);
  Matrix x(n, p);
  if (components) components->assign(static_cast<std::size_t>(n), 0);
  Vector z(p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = rng.uniform();
    Eigen::Index g = 0;
    double cumulative = model.weights()(0);
    while (g + 1 < G && (u >= cumulative || model.weights()(g) == 0.0)) {
      ++g;
      cumulative += model.weights()(g);
    }
    for (Eigen::Index j = 0; j < p; ++j) z(j) = rng.normal();
    x.row(i) = (model.mean(g) + lowers[static_cast<std::size_t>(g)] * z).transpose();
    if (components) (*components)[static_cast<std::size_t>(i)] = g;
  }
  return x;
}

/// Draws n observations; labels record the component of origin (1-based).
inline Dataset sample(const GaussianMixture& model, Eigen::Index n, std::uint64_t seed) {
  std::vector<Eigen::Index> origin;
  Matrix x = sample_points(model, n, seed, &origin);
  std::vector<std::string> labels;
  labels.reserve(origin.size());
  for (auto g : origin) labels.push_back(std::to_string(g + 1));
  return Dataset(std::move(x), Dataset::default_names(model.dimension()), std::move(labels));
}

/// Whether every component covariance obeys the structure of `model`
/// (spherical, diagonal, shared) to within `tol` relative to its scale.
inline bool satisfies_constraint(const GaussianMixture& mix, CovarianceModel model, double tol) {
  const auto G = mix.components();
  const auto p = mix.dimension();
  auto close = [tol](const Matrix& a, const Matrix& b) {
    const double scale = std::max(1.0, std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()));
    return (a - b).cwiseAbs().maxCoeff() <= tol * scale;
  };
  for (Eigen::Index g = 0; g < G; ++g) {
    const Matrix& s = mix.covariance(g);
    const Matrix diag = s.diagonal().asDiagonal();
    const bool spherical = model == CovarianceModel::EII || model == CovarianceModel::VII;
    if (is_diagonal_model(model) && !close(s, diag)) return false;
    if (spherical && !close(diag, Matrix::Identity(p, p) * s(0, 0))) return false;
    const bool shared = model == CovarianceModel::EII || model == CovarianceModel::EEI ||
                        model == CovarianceModel::EEE;
    if (shared && !close(s, mix.covariance(0))) return false;
  }
  return true;
}

}  // namespace ppgmm
