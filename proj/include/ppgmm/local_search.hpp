#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ppgmm/projection.hpp"

namespace ppgmm {

struct LocalSearchOptions {
  int max_iter = 100;
  double fd_step = 1e-6;      // relative finite-difference step
  double grad_tol = 1e-8;     // projected-gradient sup norm
  double rel_tol = 1e-12;     // relative objective change
  int memory = 5;             // stored curvature pairs
};

struct LocalSearchResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  std::optional<std::string> warning;
};

namespace detail {

inline std::vector<double> clamp_to(const std::vector<double>& x, const Bounds& b) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::clamp(x[i], b.lower[i], b.upper[i]);
  return out;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace detail

/// Box-constrained limited-memory BFGS ascent with finite-difference
/// gradients. Steps are projected onto the box and accepted under an Armijo
/// condition, so the returned value never falls below the starting value.
template <typename Objective>
LocalSearchResult maximize_bounded(Objective&& objective, const std::vector<double>& start,
                                   const Bounds& bounds, const LocalSearchOptions& opt = {}) {
  const std::size_t n = start.size();
  if (bounds.size() != n) throw UsageError("maximize_bounded: bounds do not match the start point");
  LocalSearchResult res;
  auto eval = [&](const std::vector<double>& x) {
    ++res.evaluations;
    double v = -std::numeric_limits<double>::infinity();
    try {
      v = objective(x);
    } catch (const std::exception&) {
    }
    return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
  };

  res.x = detail::clamp_to(start, bounds);
  res.value = eval(res.x);
  if (!std::isfinite(res.value)) {
    res.warning = "local search: objective is not finite at the start point";
    return res;
  }

  auto gradient = [&](const std::vector<double>& x, double fx) {
    std::vector<double> g(n, 0.0);
    std::vector<double> probe = x;
    for (std::size_t i = 0; i < n; ++i) {
      const double h = opt.fd_step * std::max(1.0, std::abs(x[i]));
      const bool up_ok = x[i] + h <= bounds.upper[i];
      const bool down_ok = x[i] - h >= bounds.lower[i];
      if (up_ok && down_ok) {
        probe[i] = x[i] + h;
        const double fp = eval(probe);
        probe[i] = x[i] - h;
        const double fm = eval(probe);
        g[i] = (fp - fm) / (2.0 * h);
      } else if (up_ok) {
        probe[i] = x[i] + h;
        g[i] = (eval(probe) - fx) / h;
      } else if (down_ok) {
        probe[i] = x[i] - h;
        g[i] = (fx - eval(probe)) / h;
      }
      probe[i] = x[i];
      if (!std::isfinite(g[i])) g[i] = 0.0;
    }
    return g;
  };

  std::deque<std::pair<std::vector<double>, std::vector<double>>> pairs;  // (s, y) for -f
  std::vector<double> g = gradient(res.x, res.value);

  for (int iter = 1; iter <= opt.max_iter; ++iter) {
    res.iterations = iter;
    // Coordinates pinned at a bound with the gradient pointing outward are frozen.
    std::vector<bool> free(n, true);
    std::vector<double> pg = g;
    double pg_norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if ((res.x[i] <= bounds.lower[i] && g[i] < 0.0) || (res.x[i] >= bounds.upper[i] && g[i] > 0.0)) {
        free[i] = false;
        pg[i] = 0.0;
      }
      pg_norm = std::max(pg_norm, std::abs(pg[i]));
    }
    if (pg_norm < opt.grad_tol) break;

    // Two-loop recursion on the free coordinates.
    std::vector<double> q = pg;
    std::vector<double> alphas(pairs.size());
    for (std::size_t k = pairs.size(); k-- > 0;) {
      const auto& [s, y] = pairs[k];
      alphas[k] = detail::dot(s, q) / detail::dot(s, y);
      for (std::size_t i = 0; i < n; ++i) q[i] -= alphas[k] * y[i];
    }
    if (!pairs.empty()) {
      const auto& [s, y] = pairs.back();
      const double gamma = detail::dot(s, y) / detail::dot(y, y);
      for (auto& v : q) v *= gamma;
    }
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const auto& [s, y] = pairs[k];
      const double beta = detail::dot(y, q) / detail::dot(s, y);
      for (std::size_t i = 0; i < n; ++i) q[i] += (alphas[k] - beta) * s[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!free[i]) q[i] = 0.0;
    }
    if (!(detail::dot(q, pg) > 0.0)) {
      q = pg;
      pairs.clear();
    }
    double step = 1.0;
    if (pairs.empty()) {
      double qmax = 0.0;
      for (double v : q) qmax = std::max(qmax, std::abs(v));
      step = std::min(1.0, 0.1 / qmax);
    }

    std::vector<double> candidate;
    double value = -std::numeric_limits<double>::infinity();
    bool accepted = false;
    while (step > 1e-14) {
      candidate.assign(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) candidate[i] = res.x[i] + step * q[i];
      candidate = detail::clamp_to(candidate, bounds);
      std::vector<double> moved(n);
      for (std::size_t i = 0; i < n; ++i) moved[i] = candidate[i] - res.x[i];
      value = eval(candidate);
      if (value >= res.value + 1e-4 * detail::dot(g, moved) && value > res.value) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    const double previous = res.value;
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = candidate[i] - res.x[i];
    res.x = std::move(candidate);
    res.value = value;
    std::vector<double> g_new = gradient(res.x, res.value);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = g[i] - g_new[i];
    g = std::move(g_new);
    if (detail::dot(s, y) > 1e-12 * std::sqrt(detail::dot(s, s) * detail::dot(y, y))) {
      pairs.emplace_back(std::move(s), std::move(y));
      if (static_cast<int>(pairs.size()) > opt.memory) pairs.pop_front();
    }
    if (res.value - previous <= opt.rel_tol * std::max(1.0, std::abs(res.value))) break;
  }
  return res;
}

}  // namespace ppgmm
