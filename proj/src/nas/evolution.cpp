#include "ahip/nas/evolution.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "ahip/numerics/errors.hpp"

namespace ahip {

bool candidate_before(const Candidate& a, const Candidate& b) {
  if (a.fitness != b.fitness) return a.fitness > b.fitness;
  if (a.params != b.params) return a.params < b.params;
  if (a.age != b.age) return a.age < b.age;
  return a.path.key() < b.path.key();
}

std::vector<PathSpec> initial_population(const SearchSpace& space, const SimilarityTable& table,
                                         int count, double eps2, int task, Rng& rng) {
  std::vector<PathSpec> out;
  std::set<std::string> seen;
  for (int i = 0; i < count; ++i) {
    PathSpec p;
    for (int attempt = 0; attempt <= 10; ++attempt) {
      const SamplingMode mode = rng.bernoulli(eps2) ? SamplingMode::kUniform : SamplingMode::kHierarchical;
      p = sample_path(mode, space, table, task, rng);
      if (!seen.count(p.key())) break;
    }
    seen.insert(p.key());
    out.push_back(std::move(p));
  }
  return out;
}

PathSpec mutate(const PathSpec& parent, const SearchSpace& space, double prob, Rng& rng) {
  if (parent.depth() != static_cast<int>(space.size())) throw IntegrityError("mutate: path depth != space depth");
  PathSpec child = parent;
  for (std::size_t l = 0; l < space.size(); ++l) {
    if (!rng.bernoulli(prob)) continue;
    std::vector<GrowOp> others;
    for (const auto& op : space[l]) {
      if (!op.same_choice(parent.ops[l])) others.push_back(op);
    }
    if (!others.empty()) child.ops[l] = others[rng.uniform_int(others.size())];
  }
  return child;
}

PathSpec crossover(const PathSpec& a, const PathSpec& b, Rng& rng) {
  if (a.depth() != b.depth()) throw IntegrityError("crossover: parents differ in depth");
  PathSpec child = a;
  for (std::size_t l = 0; l < a.ops.size(); ++l) {
    if (rng.bernoulli(0.5)) child.ops[l] = b.ops[l];
  }
  return child;
}

EvolutionResult evolve(const SearchSpace& space, const std::vector<PathSpec>& initial,
                       const FitnessFn& fitness, const CostFn& cost, const SearchConfig& cfg,
                       Rng& rng, RunLog* log, int task) {
  if (initial.empty()) throw InputError("evolve: empty initial population");
  std::map<std::string, double> memo;
  auto make = [&](const PathSpec& p, int age) {
    Candidate c{p, 0.0, age, cost ? cost(p) : 0};
    auto it = memo.find(p.key());
    if (it == memo.end()) it = memo.emplace(p.key(), fitness(p)).first;
    c.fitness = it->second;
    return c;
  };
  auto retain = [&](std::vector<Candidate> pop) {
    std::stable_sort(pop.begin(), pop.end(), [](const Candidate& a, const Candidate& b) {
      if (a.path.key() != b.path.key()) return a.path.key() < b.path.key();
      return a.age < b.age;
    });
    pop.erase(std::unique(pop.begin(), pop.end(),
                          [](const Candidate& a, const Candidate& b) { return a.path.key() == b.path.key(); }),
              pop.end());
    std::sort(pop.begin(), pop.end(), candidate_before);
    if (static_cast<int>(pop.size()) > cfg.keep) pop.resize(static_cast<std::size_t>(cfg.keep));
    return pop;
  };
  auto mean_fitness = [](const std::vector<Candidate>& pop) {
    double s = 0.0;
    for (const auto& c : pop) s += c.fitness;
    return s / static_cast<double>(pop.size());
  };

  EvolutionResult res;
  std::vector<Candidate> pop;
  for (const auto& p : initial) pop.push_back(make(p, 0));
  pop = retain(std::move(pop));
  res.best = pop.front();
  auto record = [&](int gen) {
    res.best_history.push_back(res.best.fitness);
    res.mean_history.push_back(mean_fitness(pop));
    if (log) {
      RunRecord r;
      r.task = task;
      r.phase = "evolution";
      r.epoch_or_gen = gen;
      r.fitness_best = res.best.fitness;
      r.fitness_mean = res.mean_history.back();
      r.params_added = res.best.params;
      log->write(r);
    }
  };
  record(0);

  for (int gen = 1; gen <= cfg.evo_generations; ++gen) {
    const std::size_t pool = std::min(pop.size(), static_cast<std::size_t>(cfg.crossover_pool));
    std::vector<Candidate> next = pop;
    for (int i = 0; i < cfg.n_mutants; ++i) {
      const auto& parent = pop[rng.uniform_int(pool)];
      next.push_back(make(mutate(parent.path, space, cfg.mutation_prob, rng), gen));
    }
    for (int i = 0; i < cfg.n_crossover; ++i) {
      const std::size_t a = rng.uniform_int(pool);
      std::size_t b = rng.uniform_int(pool);
      if (pool > 1) {
        while (b == a) b = rng.uniform_int(pool);
      }
      next.push_back(make(crossover(pop[a].path, pop[b].path, rng), gen));
    }
    pop = retain(std::move(next));
    if (candidate_before(pop.front(), res.best)) res.best = pop.front();
    record(gen);
  }
  res.population = pop;
  res.evaluations = static_cast<int>(memo.size());
  return res;
}

}  // namespace ahip
