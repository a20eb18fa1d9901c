#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ppgmm/gmm.hpp"
#include "ppgmm/local_search.hpp"
#include "ppgmm/negentropy.hpp"
#include "ppgmm/parallel.hpp"
#include "ppgmm/projection.hpp"
#include "ppgmm/rng.hpp"

namespace ppgmm {

struct GAConfig {
  int pop_size = 100;
  double p_crossover = 0.8;
  double p_mutation = 0.1;
  double p_local_search = 0.05;
  int elitism = 1;
  int max_iter = 1000;
  int run_stall = 100;
  std::uint64_t seed = 1;
  double scaling_factor = 2.0;
  unsigned threads = 1;
  LocalSearchOptions local_search{};
  /// Genomes placed at the front of the initial population (e.g. a PCA start).
  std::vector<std::vector<double>> initial_genomes;

  void validate() const {
    auto prob = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!prob(p_crossover) || !prob(p_mutation) || !prob(p_local_search)) {
      throw UsageError("GA probabilities must lie in [0, 1]");
    }
    if (pop_size < 2) throw UsageError("GA population size must be at least 2");
    if (elitism < 0 || elitism >= pop_size) throw UsageError("GA elitism must be in [0, pop_size)");
    if (max_iter < 1 || run_stall < 1) throw UsageError("GA max_iter and run_stall must be positive");
  }
};

struct TraceRow {
  int generation = 0;
  double best = 0.0;
  double mean = 0.0;
};

struct PPResult {
  AngleGenome best_genome;
  Basis best_basis;  // orthonormalized
  double best_fitness = 0.0;
  std::vector<TraceRow> fitness_trace;
  int generations_run = 0;
  EstimatorKind estimator;
  std::vector<std::string> warnings;
};

/// The projection index of a genome: decode, orthonormalize, project the
/// mixture, and take the approximated negentropy.
inline double fitness(const AngleGenome& genome, const GaussianMixture& model, const EstimatorKind& kind) {
  if (genome.p != model.dimension()) throw DataError("fitness: genome p does not match the mixture dimension");
  const Basis basis = orthonormalize(decode(genome));
  return negentropy(project_mixture(model, basis), kind).negentropy;
}

/// Angles that decode to the unit vector v (inverse spherical coordinates).
inline std::vector<double> encode_column(const Vector& v) {
  const auto p = v.size();
  std::vector<double> block(static_cast<std::size_t>(p - 1));
  double phi = std::atan2(v(0), v(1));
  if (phi < 0.0) phi += 2.0 * std::numbers::pi;
  block[0] = phi;
  for (Eigen::Index i = 1; i <= p - 2; ++i) {
    // theta_i = atan2(|v_1..v_(p-i)|, v_(p-i+1))
    block[static_cast<std::size_t>(i)] = std::atan2(v.head(p - i).norm(), v(p - i));
  }
  return block;
}

inline AngleGenome encode(const Basis& basis) {
  std::vector<double> angles;
  for (Eigen::Index j = 0; j < basis.d(); ++j) {
    const auto block = encode_column(basis.matrix.col(j).normalized());
    angles.insert(angles.end(), block.begin(), block.end());
  }
  return AngleGenome(std::move(angles), static_cast<int>(basis.p()), static_cast<int>(basis.d()));
}

/// Selection probabilities after linear fitness scaling f' = a f + b, chosen
/// so that mean(f') = mean(f) and max(f') = scaling_factor * mean(f), with
/// negative scaled values clamped to zero. Non-finite fitnesses get zero
/// probability; a degenerate population is selected uniformly.
inline std::vector<double> selection_probabilities(std::span<const double> fitness, double scaling_factor,
                                                   bool apply_scaling = true) {
  const std::size_t n = fitness.size();
  std::vector<double> f(n, 0.0);
  std::vector<bool> ok(n, false);
  double lo = std::numeric_limits<double>::infinity();
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isfinite(fitness[i])) {
      ok[i] = true;
      f[i] = fitness[i];
      lo = std::min(lo, f[i]);
      ++count;
    }
  }
  if (count == 0) throw NumericalError("selection: no finite fitness values");
  auto uniform_over_ok = [&] {
    std::vector<double> prob(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) prob[i] = ok[i] ? 1.0 / static_cast<double>(count) : 0.0;
    return prob;
  };
  // Shift into the nonnegative range when needed; proportional selection
  // requires it and the scaling is defined around a positive mean.
  if (lo < 0.0) {
    for (std::size_t i = 0; i < n; ++i) if (ok[i]) f[i] -= lo;
  }
  double mean = 0.0;
  double top = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!ok[i]) continue;
    mean += f[i];
    top = std::max(top, f[i]);
  }
  mean /= static_cast<double>(count);
  if (apply_scaling && top > mean && mean > 0.0) {
    const double a = (scaling_factor - 1.0) * mean / (top - mean);
    const double b = mean * (top - scaling_factor * mean) / (top - mean);
    for (std::size_t i = 0; i < n; ++i) if (ok[i]) f[i] = std::max(0.0, a * f[i] + b);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) if (ok[i]) total += f[i];
  if (!(total > 0.0)) return uniform_over_ok();
  std::vector<double> prob(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) prob[i] = ok[i] ? f[i] / total : 0.0;
  return prob;
}

/// Roulette draw from a probability vector.
inline std::size_t roulette(std::span<const double> prob, Rng& rng) {
  const double u = rng.uniform();
  double cumulative = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    if (prob[i] <= 0.0) continue;
    last = i;
    cumulative += prob[i];
    if (u < cumulative) return i;
  }
  return last;
}

/// Draws `count` parents (count must be even) with replacement, proportionally
/// to the scaled fitness, and pairs them up in draw order.
inline std::vector<std::pair<std::size_t, std::size_t>> select_parents(std::span<const double> fitness,
                                                                       std::size_t count, double scaling_factor,
                                                                       Rng& rng) {
  if (count % 2 != 0) throw UsageError("select_parents: count must be even");
  const auto prob = selection_probabilities(fitness, scaling_factor);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(count / 2);
  for (std::size_t k = 0; k < count / 2; ++k) {
    const std::size_t a = roulette(prob, rng);
    const std::size_t b = roulette(prob, rng);
    pairs.emplace_back(a, b);
  }
  return pairs;
}

/// Per-gene convex combination with the given mixing coefficients.
inline std::pair<std::vector<double>, std::vector<double>> crossover_local_arithmetic(
    const std::vector<double>& parent1, const std::vector<double>& parent2, std::span<const double> mixing) {
  if (parent1.size() != parent2.size() || mixing.size() != parent1.size()) {
    throw UsageError("crossover: parents and mixing coefficients must have equal lengths");
  }
  std::vector<double> c1(parent1.size());
  std::vector<double> c2(parent1.size());
  for (std::size_t i = 0; i < parent1.size(); ++i) {
    const double a = mixing[i];
    c1[i] = a * parent1[i] + (1.0 - a) * parent2[i];
    c2[i] = (1.0 - a) * parent1[i] + a * parent2[i];
  }
  return {std::move(c1), std::move(c2)};
}

inline std::pair<std::vector<double>, std::vector<double>> crossover_local_arithmetic(
    const std::vector<double>& parent1, const std::vector<double>& parent2, Rng& rng) {
  std::vector<double> mixing(parent1.size());
  for (auto& a : mixing) a = rng.uniform();
  return crossover_local_arithmetic(parent1, parent2, mixing);
}

/// Each gene is redrawn uniformly within its bounds with probability p_mutation.
inline std::vector<double> mutate_uniform(std::vector<double> genome, double p_mutation, const Bounds& bounds,
                                          Rng& rng) {
  if (genome.size() != bounds.size()) throw UsageError("mutate_uniform: bounds do not match the genome");
  for (std::size_t i = 0; i < genome.size(); ++i) {
    if (rng.uniform() < p_mutation) genome[i] = rng.uniform(bounds.lower[i], bounds.upper[i]);
  }
  return genome;
}

/// Bounded quasi-Newton refinement of one genome on the projection index.
inline LocalSearchResult local_search(const AngleGenome& genome, const GaussianMixture& model,
                                      const EstimatorKind& kind, const Bounds& bounds,
                                      const LocalSearchOptions& opt = {}) {
  auto objective = [&](const std::vector<double>& angles) {
    return fitness(AngleGenome(angles, genome.p, genome.d), model, kind);
  };
  return maximize_bounded(objective, genome.angles, bounds, opt);
}

namespace detail {

inline double safe_fitness(const std::vector<double>& angles, int p, int d, const GaussianMixture& model,
                           const EstimatorKind& kind) {
  try {
    const double v = fitness(AngleGenome(angles, p, d), model, kind);
    return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
  } catch (const std::exception&) {
    return -std::numeric_limits<double>::infinity();
  }
}

inline std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace detail

/// Hybrid GA search for the d-dimensional basis maximizing the approximated
/// negentropy of the projected mixture. All random draws happen on the calling
/// thread, so results do not depend on config.threads.
inline PPResult run_ppgmmga(const GaussianMixture& model, int d, const EstimatorKind& kind, const GAConfig& config) {
  config.validate();
  const int p = static_cast<int>(model.dimension());
  if (d < 1 || d >= p) throw UsageError("run_ppgmmga: need 1 <= d < p");
  const Bounds bounds = angle_bounds(p, d);
  const std::size_t pop_size = static_cast<std::size_t>(config.pop_size);
  Rng rng(config.seed);

  std::vector<std::vector<double>> pop(pop_size);
  for (std::size_t i = 0; i < pop_size; ++i) {
    if (i < config.initial_genomes.size()) {
      if (!bounds.contains(config.initial_genomes[i])) throw UsageError("initial genome is out of bounds");
      pop[i] = config.initial_genomes[i];
    } else {
      pop[i].resize(bounds.size());
      for (std::size_t k = 0; k < bounds.size(); ++k) pop[i][k] = rng.uniform(bounds.lower[k], bounds.upper[k]);
    }
  }
  std::vector<double> fit(pop_size);
  auto evaluate = [&](std::size_t from) {
    parallel_for(pop_size - from, config.threads,
                 [&](std::size_t k) { fit[from + k] = detail::safe_fitness(pop[from + k], p, d, model, kind); });
    if (std::none_of(fit.begin(), fit.end(), [](double v) { return std::isfinite(v); })) {
      throw NumericalError("run_ppgmmga: every fitness evaluation in the generation failed");
    }
  };
  evaluate(0);

  PPResult result;
  result.estimator = kind;
  double best_so_far = -std::numeric_limits<double>::infinity();
  int stall = 0;
  for (int gen = 1; gen <= config.max_iter; ++gen) {
    if (rng.uniform() < config.p_local_search) {
      const std::size_t b = detail::argmax(fit);
      const auto refined = local_search(AngleGenome(pop[b], p, d), model, kind, bounds, config.local_search);
      if (refined.warning) result.warnings.push_back(*refined.warning);
      if (refined.value > fit[b]) {
        const std::size_t w = static_cast<std::size_t>(std::min_element(fit.begin(), fit.end()) - fit.begin());
        pop[w] = refined.x;
        fit[w] = refined.value;
      }
    }
    const std::size_t b = detail::argmax(fit);
    double mean = 0.0;
    std::size_t finite = 0;
    for (double v : fit) {
      if (std::isfinite(v)) {
        mean += v;
        ++finite;
      }
    }
    result.fitness_trace.push_back({gen, fit[b], mean / static_cast<double>(finite)});
    result.generations_run = gen;
    if (fit[b] > best_so_far + 1e-10) {
      stall = 0;
    } else {
      ++stall;
    }
    best_so_far = std::max(best_so_far, fit[b]);
    if (stall >= config.run_stall || gen == config.max_iter) break;

    // Next generation: elites, then offspring of selected pairs.
    std::vector<std::size_t> order(pop_size);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) { return fit[a] > fit[c]; });
    const std::size_t elites = static_cast<std::size_t>(config.elitism);
    std::vector<std::vector<double>> next;
    std::vector<double> next_fit;
    next.reserve(pop_size);
    for (std::size_t k = 0; k < elites; ++k) {
      next.push_back(pop[order[k]]);
      next_fit.push_back(fit[order[k]]);
    }
    const std::size_t needed = pop_size - elites;
    const auto pairs = select_parents(fit, 2 * ((needed + 1) / 2), config.scaling_factor, rng);
    for (const auto& [i, j] : pairs) {
      std::vector<double> c1 = pop[i];
      std::vector<double> c2 = pop[j];
      if (rng.uniform() < config.p_crossover) std::tie(c1, c2) = crossover_local_arithmetic(pop[i], pop[j], rng);
      c1 = detail::clamp_to(mutate_uniform(std::move(c1), config.p_mutation, bounds, rng), bounds);
      c2 = detail::clamp_to(mutate_uniform(std::move(c2), config.p_mutation, bounds, rng), bounds);
      if (next.size() < pop_size) next.push_back(std::move(c1));
      if (next.size() < pop_size) next.push_back(std::move(c2));
    }
    pop = std::move(next);
    std::copy(next_fit.begin(), next_fit.end(), fit.begin());
    evaluate(elites);
  }

  const std::size_t b = detail::argmax(fit);
  result.best_genome = AngleGenome(pop[b], p, d);
  result.best_basis = orthonormalize(decode(result.best_genome));
  result.best_fitness = fit[b];
  return result;
}

}  // namespace ppgmm
