#pragma once

#include <functional>

#include "ahip/nas/run_log.hpp"
#include "ahip/nas/search_config.hpp"
#include "ahip/sampling/sampler.hpp"

namespace ahip {

struct Candidate {
  PathSpec path;
  double fitness = -1.0;
  int age = 0;
  Index params = 0;
};

using FitnessFn = std::function<double(const PathSpec&)>;
using CostFn = std::function<Index(const PathSpec&)>;

/// Higher fitness first, then fewer added parameters, then lower age,
/// then path key.
bool candidate_before(const Candidate& a, const Candidate& b);

/// `count` paths, each drawn uniformly with probability eps2 and
/// hierarchically otherwise. A duplicate is redrawn up to 10 times, then
/// accepted.
std::vector<PathSpec> initial_population(const SearchSpace& space, const SimilarityTable& table,
                                         int count, double eps2, int task, Rng& rng);

/// Each block flips with probability `prob` to a different candidate of
/// that block, chosen uniformly.
PathSpec mutate(const PathSpec& parent, const SearchSpace& space, double prob, Rng& rng);

/// Each block's op comes from `a` or `b` with probability 1/2.
PathSpec crossover(const PathSpec& a, const PathSpec& b, Rng& rng);

struct EvolutionResult {
  Candidate best;
  std::vector<double> best_history;  // best-ever fitness after each generation (index 0: initial)
  std::vector<double> mean_history;  // mean fitness of the retained population
  std::vector<Candidate> population;
  int evaluations = 0;  // distinct paths evaluated
};

/// Elitist search: every generation adds n_mutants mutants and n_crossover
/// crossovers of parents drawn from the top `crossover_pool`, removes
/// duplicate paths (keeping the older candidate) and retains the top
/// `keep`. Fitness is evaluated once per distinct path.
EvolutionResult evolve(const SearchSpace& space, const std::vector<PathSpec>& initial,
                       const FitnessFn& fitness, const CostFn& cost, const SearchConfig& cfg,
                       Rng& rng, RunLog* log = nullptr, int task = 0);

}  // namespace ahip
