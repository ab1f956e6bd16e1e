#pragma once

#include <algorithm>

#include "ahip/nas/evolution.hpp"

namespace ahip::oracle {

/// D-block space with Skip, New, Reuse(0), Adapt(0) per block.
inline SearchSpace four_op_space(int depth) {
  return SearchSpace(static_cast<std::size_t>(depth),
                     {GrowOp::skip(), GrowOp::fresh(), GrowOp::reuse(0), GrowOp::adapt(0)});
}

inline PathSpec random_path(const SearchSpace& space, Rng& rng) {
  PathSpec p{2, {}};
  for (const auto& c : space) p.ops.push_back(c[rng.uniform_int(c.size())]);
  return p;
}

/// Number of blocks whose op matches `target`.
inline double matching_ops(const PathSpec& p, const PathSpec& target) {
  double n = 0;
  for (std::size_t i = 0; i < p.ops.size(); ++i) n += p.ops[i].same_choice(target.ops[i]);
  return n;
}

/// Every path of the space, in odometer order.
inline std::vector<PathSpec> enumerate(const SearchSpace& space) {
  std::vector<PathSpec> out;
  std::vector<std::size_t> idx(space.size(), 0);
  while (true) {
    PathSpec p{2, {}};
    for (std::size_t l = 0; l < space.size(); ++l) p.ops.push_back(space[l][idx[l]]);
    out.push_back(p);
    std::size_t l = 0;
    while (l < space.size() && ++idx[l] == space[l].size()) idx[l++] = 0;
    if (l == space.size()) return out;
  }
}

struct EvolveTrial {
  bool found_optimum = false;
  bool monotone = false;
  int evaluations = 0;
};

/// One seeded search against a hidden target; the optimum comes from
/// brute-force enumeration of the space.
inline EvolveTrial evolve_trial(std::uint64_t seed, const SearchConfig& cfg) {
  const SearchSpace space = four_op_space(4);
  Rng rng = Rng::stream(seed, "evolve.trial");
  const PathSpec target = random_path(space, rng);
  const FitnessFn fitness = [&](const PathSpec& p) { return matching_ops(p, target); };
  double optimum = -1.0;
  for (const auto& p : enumerate(space)) optimum = std::max(optimum, fitness(p));

  const SimilarityTable table = build_similarity_table({{0.5}, {0.5}, {0.5}, {0.5}});
  const auto initial = initial_population(space, table, cfg.population, 0.5, 2, rng);
  const auto res = evolve(space, initial, fitness, {}, cfg, rng);
  EvolveTrial t;
  t.found_optimum = res.best.fitness == optimum && res.best.path.key() == target.key();
  t.monotone = std::is_sorted(res.best_history.begin(), res.best_history.end());
  t.evaluations = res.evaluations;
  return t;
}

}  // namespace ahip::oracle
