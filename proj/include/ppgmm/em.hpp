#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ppgmm/data.hpp"
#include "ppgmm/gmm.hpp"
#include "ppgmm/parallel.hpp"
#include "ppgmm/rng.hpp"

namespace ppgmm {

/// Starting partitions: the first centre is a random observation, the rest are
/// picked farthest-point, refined by a few Lloyd iterations. The fit is
/// repeated from `restarts` seeds and the best final log-likelihood kept.
struct InitStrategy {
  int restarts = 5;
  int kmeans_iterations = 10;
};

struct EmOptions {
  InitStrategy init{};
  int max_iter = 1000;
  double tol = 1e-8;
};

struct FitReport {
  GaussianMixture model;
  double loglik = 0.0;
  long long n_params = 0;
  double bic = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> loglik_trace;
};

/// Thrown when a (G, model) fit degenerates beyond what the covariance floor
/// can repair.
class FitFailure : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

inline double bic_value(double loglik, long long n_params, Eigen::Index n) {
  return 2.0 * loglik - static_cast<double>(n_params) * std::log(static_cast<double>(n));
}

namespace detail {

/// Working parameters during EM. Diagonal and spherical models keep only the
/// variances (p x G); full models keep G dense matrices.
struct EmState {
  Vector weights;
  Matrix means;      // p x G
  Matrix variances;  // p x G, diagonal models
  std::vector<Matrix> covariances;
};

inline bool full_model(CovarianceModel m) { return !is_diagonal_model(m); }

/// n x G matrix of log(pi_g) + log phi(x_i; mu_g, Sigma_g).
inline Matrix log_weighted_matrix(const Matrix& x, const EmState& s, CovarianceModel model) {
  const auto n = x.rows();
  const auto p = x.cols();
  const auto G = s.weights.size();
  Matrix out(n, G);
  for (Eigen::Index g = 0; g < G; ++g) {
    const double log_pi = std::log(s.weights(g));
    if (full_model(model)) {
      const Eigen::LLT<Matrix> llt(s.covariances[static_cast<std::size_t>(g)]);
      if (llt.info() != Eigen::Success) throw FitFailure("component covariance lost positive definiteness");
      const double ld = log_det(llt);
      Matrix centered = (x.rowwise() - s.means.col(g).transpose()).transpose();
      llt.matrixL().solveInPlace(centered);
      const Vector maha = centered.colwise().squaredNorm().transpose();
      out.col(g) = (log_pi - 0.5 * (static_cast<double>(p) * kLog2Pi + ld) - 0.5 * maha.array()).matrix();
    } else {
      const Vector var = s.variances.col(g);
      const double ld = var.array().log().sum();
      const Matrix centered = x.rowwise() - s.means.col(g).transpose();
      const Vector maha = (centered.array().square().rowwise() / var.transpose().array()).rowwise().sum();
      out.col(g) = (log_pi - 0.5 * (static_cast<double>(p) * kLog2Pi + ld) - 0.5 * maha.array()).matrix();
    }
  }
  return out;
}

/// Normalizes rows of the log matrix in place into responsibilities; returns
/// the log-likelihood.
inline double e_step(Matrix& logs) {
  double loglik = 0.0;
  for (Eigen::Index i = 0; i < logs.rows(); ++i) {
    const double top = logs.row(i).maxCoeff();
    if (!std::isfinite(top)) throw FitFailure("an observation has zero density under every component");
    const double lse = top + std::log((logs.row(i).array() - top).exp().sum());
    logs.row(i) = (logs.row(i).array() - lse).exp();
    loglik += lse;
  }
  return loglik;
}

inline Matrix clamp_eigenvalues(const Matrix& s, double floor) {
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(s));
  if (eig.eigenvalues().minCoeff() >= floor) return symmetrize(s);
  const Vector clamped = eig.eigenvalues().cwiseMax(floor);
  return symmetrize(eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose());
}

/// Constrained maximization given responsibilities r (n x G).
inline EmState m_step(const Matrix& x, const Matrix& r, CovarianceModel model, double floor) {
  const auto n = x.rows();
  const auto p = x.cols();
  const auto G = r.cols();
  EmState s;
  const Vector counts = r.colwise().sum().transpose();
  const double min_weight = 1.0 / (10.0 * static_cast<double>(n));
  s.weights = counts / static_cast<double>(n);
  for (Eigen::Index g = 0; g < G; ++g) {
    if (!(s.weights(g) >= min_weight)) {
      throw FitFailure("component " + std::to_string(g + 1) + " weight fell below 1/(10n)");
    }
  }
  s.weights /= s.weights.sum();
  s.means = (x.transpose() * r).array().rowwise() / counts.transpose().array();

  if (is_diagonal_model(model)) {
    Matrix diag_scatter(p, G);  // per-coordinate weighted sums of squares
    for (Eigen::Index g = 0; g < G; ++g) {
      const Matrix centered = x.rowwise() - s.means.col(g).transpose();
      diag_scatter.col(g) = (centered.array().square().colwise() * r.col(g).array()).colwise().sum().transpose();
    }
    s.variances.resize(p, G);
    const double nd = static_cast<double>(n);
    const double pd = static_cast<double>(p);
    switch (model) {
      case CovarianceModel::EII:
        s.variances.setConstant(diag_scatter.sum() / (nd * pd));
        break;
      case CovarianceModel::VII:
        for (Eigen::Index g = 0; g < G; ++g) {
          s.variances.col(g).setConstant(diag_scatter.col(g).sum() / (counts(g) * pd));
        }
        break;
      case CovarianceModel::EEI: {
        const Vector shared = diag_scatter.rowwise().sum() / nd;
        for (Eigen::Index g = 0; g < G; ++g) s.variances.col(g) = shared;
        break;
      }
      case CovarianceModel::VVI:
        for (Eigen::Index g = 0; g < G; ++g) s.variances.col(g) = diag_scatter.col(g) / counts(g);
        break;
      default: break;
    }
    s.variances = s.variances.cwiseMax(floor);
    return s;
  }

  std::vector<Matrix> scatter(static_cast<std::size_t>(G));
  for (Eigen::Index g = 0; g < G; ++g) {
    const Matrix centered = x.rowwise() - s.means.col(g).transpose();
    scatter[static_cast<std::size_t>(g)] =
        centered.transpose() * (centered.array().colwise() * r.col(g).array()).matrix();
  }
  s.covariances.resize(static_cast<std::size_t>(G));
  if (model == CovarianceModel::EEE) {
    Matrix pooled = Matrix::Zero(p, p);
    for (const auto& w : scatter) pooled += w;
    const Matrix shared = clamp_eigenvalues(pooled / static_cast<double>(n), floor);
    for (auto& c : s.covariances) c = shared;
  } else {
    for (Eigen::Index g = 0; g < G; ++g) {
      const auto k = static_cast<std::size_t>(g);
      s.covariances[k] = clamp_eigenvalues(scatter[k] / counts(g), floor);
    }
  }
  return s;
}

/// Initial hard partition by farthest-point seeding plus Lloyd refinement.
inline std::vector<Eigen::Index> initial_partition(const Matrix& x, Eigen::Index G, Rng& rng,
                                                   int kmeans_iterations) {
  const auto n = x.rows();
  Matrix centers(G, x.cols());
  centers.row(0) = x.row(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n))));
  Vector nearest = (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (Eigen::Index k = 1; k < G; ++k) {
    Eigen::Index far = 0;
    const double dist = nearest.maxCoeff(&far);
    if (!(dist > 0.0)) throw FitFailure("fewer distinct observations than components");
    centers.row(k) = x.row(far);
    nearest = nearest.cwiseMin((x.rowwise() - centers.row(k)).rowwise().squaredNorm());
  }
  std::vector<Eigen::Index> assign(static_cast<std::size_t>(n), 0);
  for (int iter = 0; iter <= kmeans_iterations; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      (centers.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&best);
      if (assign[static_cast<std::size_t>(i)] != best) changed = true;
      assign[static_cast<std::size_t>(i)] = best;
    }
    if (iter == kmeans_iterations || (!changed && iter > 0)) break;
    Matrix sums = Matrix::Zero(G, x.cols());
    Vector counts = Vector::Zero(G);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[static_cast<std::size_t>(i)]) += x.row(i);
      counts(assign[static_cast<std::size_t>(i)]) += 1.0;
    }
    for (Eigen::Index k = 0; k < G; ++k) {
      if (counts(k) > 0.0) centers.row(k) = sums.row(k) / counts(k);
    }
  }
  return assign;
}

inline GaussianMixture to_mixture(const EmState& s, CovarianceModel model) {
  const auto G = s.weights.size();
  std::vector<Vector> means;
  std::vector<Matrix> covs;
  for (Eigen::Index g = 0; g < G; ++g) {
    means.emplace_back(s.means.col(g));
    if (is_diagonal_model(model)) {
      covs.emplace_back(s.variances.col(g).asDiagonal());
    } else {
      covs.push_back(s.covariances[static_cast<std::size_t>(g)]);
    }
  }
  return GaussianMixture(s.weights, std::move(means), std::move(covs), model);
}

struct RunOutcome {
  EmState state;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;
};

inline RunOutcome run_em(const Matrix& x, Eigen::Index G, CovarianceModel model, Rng& rng,
                         const EmOptions& opt, double floor) {
  const auto n = x.rows();
  const auto assign = initial_partition(x, G, rng, opt.init.kmeans_iterations);
  Matrix r = Matrix::Zero(n, G);
  for (Eigen::Index i = 0; i < n; ++i) r(i, assign[static_cast<std::size_t>(i)]) = 1.0;
  // Empty initial clusters get a uniform share so the first M-step is defined.
  for (Eigen::Index g = 0; g < G; ++g) {
    if (r.col(g).sum() < 1.0) {
      r.col(g).setConstant(1.0 / static_cast<double>(n));
      for (Eigen::Index i = 0; i < n; ++i) r.row(i) /= r.row(i).sum();
    }
  }
  RunOutcome out;
  out.state = m_step(x, r, model, floor);
  double previous = -std::numeric_limits<double>::infinity();
  for (int iter = 1; iter <= opt.max_iter; ++iter) {
    Matrix logs = log_weighted_matrix(x, out.state, model);
    const double loglik = e_step(logs);
    if (!std::isfinite(loglik)) throw FitFailure("log-likelihood is not finite");
    out.trace.push_back(loglik);
    out.loglik = loglik;
    out.iterations = iter;
    if (std::isfinite(previous) &&
        std::abs(loglik - previous) / (1.0 + std::abs(loglik)) < opt.tol) {
      out.converged = true;
      break;
    }
    if (iter == opt.max_iter) break;
    previous = loglik;
    out.state = m_step(x, logs, model, floor);
  }
  return out;
}

}  // namespace detail

/// Fits a G-component mixture with the given covariance structure by EM.
/// The returned loglik belongs to the returned parameters.
inline FitReport em_fit(const Dataset& data, Eigen::Index G, CovarianceModel model,
                        std::uint64_t seed, const EmOptions& opt = {}) {
  const auto n = data.n();
  if (G < 1) throw UsageError("em_fit: G must be at least 1");
  if (n <= G) throw UsageError("em_fit: need more observations than components");
  if (!(opt.tol > 0.0)) throw UsageError("em_fit: tol must be positive");
  if (opt.max_iter < 1 || opt.init.restarts < 1) throw UsageError("em_fit: max_iter and restarts must be positive");

  const Matrix& x = data.values;
  const Matrix centered = x.rowwise() - x.colwise().mean();
  const double mean_var = centered.array().square().sum() / static_cast<double>(n * x.cols());
  const double floor = std::max(1e-8 * mean_var, std::numeric_limits<double>::min());

  std::optional<detail::RunOutcome> best;
  std::string last_error;
  for (int restart = 0; restart < opt.init.restarts; ++restart) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(restart)));
    try {
      auto run = detail::run_em(x, G, model, rng, opt, floor);
      if (!best || run.loglik > best->loglik) best = std::move(run);
    } catch (const FitFailure& e) {
      last_error = e.what();
    }
    if (G == 1 && best) break;  // every restart gives the same answer
  }
  if (!best) {
    throw FitFailure(to_string(model) + " with G=" + std::to_string(G) + " failed: " + last_error);
  }
  const auto k = n_params(model, G, x.cols());
  return FitReport{detail::to_mixture(best->state, model),
                   best->loglik,
                   k,
                   bic_value(best->loglik, k, n),
                   best->iterations,
                   best->converged,
                   std::move(best->trace)};
}

/// n x G posterior membership probabilities of every observation.
inline Matrix responsibilities(const GaussianMixture& model, const Dataset& data) {
  Matrix r(data.n(), model.components());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    r.row(i) = responsibilities(model, Vector(data.values.row(i).transpose())).transpose();
  }
  return r;
}

struct SelectionEntry {
  Eigen::Index G = 0;
  CovarianceModel model = CovarianceModel::EII;
  std::optional<double> loglik;
  std::optional<double> bic;
  long long n_params = 0;
  std::string error;  // empty when the fit succeeded
};

struct ModelSelection {
  FitReport best;
  std::vector<SelectionEntry> table;
};

struct SelectOptions {
  EmOptions em{};
  unsigned threads = 1;
};

/// Fits every (G, model) pair and keeps the largest BIC. Exact ties go to
/// fewer parameters, then smaller G, then the enum order of the model.
inline ModelSelection select_model(const Dataset& data, Eigen::Index g_min, Eigen::Index g_max,
                                   const std::vector<CovarianceModel>& models, std::uint64_t seed,
                                   const SelectOptions& opt = {}) {
  if (g_min < 1 || g_max < g_min) throw UsageError("select_model: invalid G range");
  if (models.empty()) throw UsageError("select_model: no covariance models given");
  struct Job {
    Eigen::Index G;
    CovarianceModel model;
  };
  std::vector<Job> jobs;
  for (Eigen::Index G = g_min; G <= g_max; ++G) {
    for (auto m : models) jobs.push_back({G, m});
  }
  std::vector<std::optional<FitReport>> fits(jobs.size());
  std::vector<SelectionEntry> table(jobs.size());
  parallel_for(jobs.size(), opt.threads, [&](std::size_t j) {
    auto& entry = table[j];
    entry.G = jobs[j].G;
    entry.model = jobs[j].model;
    entry.n_params = n_params(jobs[j].model, jobs[j].G, data.p());
    try {
      fits[j] = em_fit(data, jobs[j].G, jobs[j].model, seed, opt.em);
      entry.loglik = fits[j]->loglik;
      entry.bic = fits[j]->bic;
    } catch (const std::exception& e) {
      entry.error = e.what();
    }
  });

  std::optional<std::size_t> winner;
  auto order = [&](std::size_t a, std::size_t b) {  // true if a beats b
    if (*table[a].bic != *table[b].bic) return *table[a].bic > *table[b].bic;
    if (table[a].n_params != table[b].n_params) return table[a].n_params < table[b].n_params;
    if (table[a].G != table[b].G) return table[a].G < table[b].G;
    return static_cast<int>(table[a].model) < static_cast<int>(table[b].model);
  };
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    if (!fits[j]) continue;
    if (!winner || order(j, *winner)) winner = j;
  }
  if (!winner) {
    std::string report = "every model fit failed:";
    for (const auto& e : table) {
      report += "\n  " + to_string(e.model) + " G=" + std::to_string(e.G) + ": " + e.error;
    }
    throw FitFailure(report);
  }
  return ModelSelection{std::move(*fits[*winner]), std::move(table)};
}

}  // namespace ppgmm
