#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "ahip/sampling/sampler.hpp"

namespace ahip::oracle {

/// Random raw-cosine table: 1..max_blocks blocks of 1..max_entries entries.
inline std::vector<std::vector<double>> random_raw_table(Rng& rng, int max_blocks = 4, int max_entries = 5) {
  std::vector<std::vector<double>> raw(1 + rng.uniform_int(static_cast<std::uint64_t>(max_blocks)));
  for (auto& b : raw) {
    b.resize(1 + rng.uniform_int(static_cast<std::uint64_t>(max_entries)));
    for (auto& c : b) c = 2.0 * rng.uniform() - 1.0;
  }
  return raw;
}

/// Op law of one block computed from the raw cosines of the whole table:
/// min/max normalisation, softmax over the block, sigmoid retention.
/// Keys: 2e for Reuse(e), 2e+1 for Adapt(e), -1 Skip, -2 New.
inline std::map<int, double> reference_law(const std::vector<std::vector<double>>& raw, std::size_t block) {
  double lo = raw[0][0], hi = raw[0][0];
  for (const auto& b : raw) {
    for (double c : b) {
      lo = std::min(lo, c);
      hi = std::max(hi, c);
    }
  }
  std::vector<double> s;
  for (double c : raw[block]) s.push_back(hi > lo ? 2.0 * (c - lo) / (hi - lo) - 1.0 : 0.0);
  double z = 0.0;
  for (double v : s) z += std::exp(v);
  std::map<int, double> law{{-1, 0.0}, {-2, 0.0}};
  for (std::size_t e = 0; e < s.size(); ++e) {
    const double psi = std::exp(s[e]) / z;
    const double rho = 1.0 / (1.0 + std::exp(-s[e]));
    law[2 * static_cast<int>(e)] = psi * rho * rho;
    law[2 * static_cast<int>(e) + 1] = psi * rho * (1.0 - rho);
    law[-1] += 0.5 * psi * (1.0 - rho);
    law[-2] += 0.5 * psi * (1.0 - rho);
  }
  return law;
}

inline int op_key(const GrowOp& op) {
  switch (op.kind) {
    case OpKind::kReuse: return 2 * op.target;
    case OpKind::kAdapt: return 2 * op.target + 1;
    case OpKind::kSkip: return -1;
    case OpKind::kNew: return -2;
  }
  return -3;
}

/// Total variation between `draws` samples of sample_op_hierarchical at
/// `block` and the reference law.
inline double sampler_tv(const std::vector<std::vector<double>>& raw, std::size_t block, long draws, Rng& rng) {
  const SimilarityTable table = build_similarity_table(raw);
  std::map<int, long> counts;
  for (long i = 0; i < draws; ++i) ++counts[op_key(sample_op_hierarchical(table.blocks[block], rng))];
  const auto law = reference_law(raw, block);
  double tv = 0.0;
  for (const auto& [k, p] : law) {
    const auto it = counts.find(k);
    tv += std::abs((it == counts.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(draws)) - p);
  }
  for (const auto& [k, n] : counts) {
    if (!law.count(k)) tv += static_cast<double>(n) / static_cast<double>(draws);
  }
  return 0.5 * tv;
}

}  // namespace ahip::oracle
