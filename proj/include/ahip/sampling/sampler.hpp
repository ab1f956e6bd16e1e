#pragma once

#include <span>
#include <string>
#include <vector>

#include "ahip/experts/grow_op.hpp"
#include "ahip/numerics/rng.hpp"

namespace ahip {

/// Similarity of one bank entry to the current task.
struct SimilarityEntry {
  int target = 0;
  double raw = 0.0;    // cosine(mu_hat, mu)
  double score = 0.0;  // normalised to [-1, 1] over all blocks
  double psi = 0.0;    // probability of sampling this entry at its block
  double rho = 0.0;    // retention probability
};

/// blocks[l][e] for every entry e of block l.
struct SimilarityTable {
  std::vector<std::vector<SimilarityEntry>> blocks;
};

double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// S = 2 (c - min) / (max - min) - 1, with min and max taken over every
/// entry of every block. All zero when max == min.
std::vector<std::vector<double>> norm_cosine(const std::vector<std::vector<double>>& raw);

/// Softmax of the block's scores.
std::vector<double> expert_sampling_dist(std::span<const double> scores);

/// Sigmoid of the score.
double retention_prob(double score);

/// Normalises raw cosines and fills in psi and rho.
SimilarityTable build_similarity_table(const std::vector<std::vector<double>>& raw);

/// Entry e ~ psi; retained with prob rho_e, in which case Reuse(e) with
/// prob rho_e else Adapt(e); if not retained, Skip or New with prob 1/2.
GrowOp sample_op_hierarchical(const std::vector<SimilarityEntry>& block, Rng& rng);

/// Analytic law of sample_op_hierarchical:
///   P(Reuse e) = psi rho^2, P(Adapt e) = psi rho (1 - rho),
///   P(Skip) = P(New) = 1/2 sum psi (1 - rho).
struct OpLaw {
  std::vector<double> reuse;
  std::vector<double> adapt;
  double skip = 0.0;
  double fresh = 0.0;

  double total() const;
};
OpLaw compound_law(const std::vector<SimilarityEntry>& block);

enum class SamplingMode { kUniform, kHierarchical };

const char* to_string(SamplingMode mode);

/// One op per block, blocks independent. Uniform mode picks each block's
/// op uniformly from `space`; hierarchical mode uses `table`.
PathSpec sample_path(SamplingMode mode, const SearchSpace& space, const SimilarityTable& table,
                     int task, Rng& rng);

/// Uniform with probability `eps1`, hierarchical otherwise.
SamplingMode choose_epoch_strategy(double eps1, Rng& rng);

struct SamplerConfig {
  double eps1 = 0.3;  // per supernet epoch
  double eps2 = 0.5;  // per initial evolution candidate
  std::string stream = "sampler";

  /// Throws UsageError unless 0 <= eps1 <= eps2 <= 1.
  void validate() const;
};

/// Structured text dump of raw / S / psi / rho per block.
std::string similarity_dump(const SimilarityTable& table, int task);

}  // namespace ahip
