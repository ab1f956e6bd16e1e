#include "ahip/sampling/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "ahip/numerics/errors.hpp"

namespace ahip {

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("cosine_similarity: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<std::vector<double>> norm_cosine(const std::vector<std::vector<double>>& raw) {
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& block : raw) {
    for (double c : block) {
      lo = std::min(lo, c);
      hi = std::max(hi, c);
    }
  }
  if (!(hi >= lo)) throw InputError("norm_cosine: no entries");
  std::vector<std::vector<double>> out = raw;
  for (auto& block : out) {
    for (double& c : block) c = hi > lo ? 2.0 * (c - lo) / (hi - lo) - 1.0 : 0.0;
  }
  return out;
}

std::vector<double> expert_sampling_dist(std::span<const double> scores) {
  if (scores.empty()) throw InputError("expert_sampling_dist: empty block");
  const double m = *std::max_element(scores.begin(), scores.end());
  std::vector<double> p(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) total += p[i] = std::exp(scores[i] - m);
  for (double& v : p) v /= total;
  return p;
}

double retention_prob(double score) { return 1.0 / (1.0 + std::exp(-score)); }

SimilarityTable build_similarity_table(const std::vector<std::vector<double>>& raw) {
  const auto scores = norm_cosine(raw);
  SimilarityTable table;
  for (std::size_t l = 0; l < raw.size(); ++l) {
    const auto psi = expert_sampling_dist(scores[l]);
    std::vector<SimilarityEntry> row;
    for (std::size_t e = 0; e < raw[l].size(); ++e) {
      row.push_back({static_cast<int>(e), raw[l][e], scores[l][e], psi[e],
                     retention_prob(scores[l][e])});
    }
    table.blocks.push_back(std::move(row));
  }
  return table;
}

GrowOp sample_op_hierarchical(const std::vector<SimilarityEntry>& block, Rng& rng) {
  std::vector<double> psi;
  for (const auto& e : block) psi.push_back(e.psi);
  const SimilarityEntry& chosen = block[rng.categorical(psi)];
  if (rng.bernoulli(chosen.rho)) {
    return rng.bernoulli(chosen.rho) ? GrowOp::reuse(chosen.target) : GrowOp::adapt(chosen.target);
  }
  return rng.bernoulli(0.5) ? GrowOp::skip() : GrowOp::fresh();
}

double OpLaw::total() const {
  double t = skip + fresh;
  for (double v : reuse) t += v;
  for (double v : adapt) t += v;
  return t;
}

OpLaw compound_law(const std::vector<SimilarityEntry>& block) {
  OpLaw law;
  double ignored = 0.0;
  for (const auto& e : block) {
    law.reuse.push_back(e.psi * e.rho * e.rho);
    law.adapt.push_back(e.psi * e.rho * (1.0 - e.rho));
    ignored += e.psi * (1.0 - e.rho);
  }
  law.skip = law.fresh = 0.5 * ignored;
  return law;
}

const char* to_string(SamplingMode mode) {
  return mode == SamplingMode::kUniform ? "uniform" : "hierarchical";
}

PathSpec sample_path(SamplingMode mode, const SearchSpace& space, const SimilarityTable& table,
                     int task, Rng& rng) {
  PathSpec path;
  path.task = task;
  for (std::size_t l = 0; l < space.size(); ++l) {
    if (mode == SamplingMode::kUniform) {
      path.ops.push_back(space[l][rng.uniform_int(space[l].size())]);
    } else {
      if (l >= table.blocks.size()) throw IntegrityError("sample_path: table has too few blocks");
      path.ops.push_back(sample_op_hierarchical(table.blocks[l], rng));
    }
  }
  return path;
}

SamplingMode choose_epoch_strategy(double eps1, Rng& rng) {
  return rng.bernoulli(eps1) ? SamplingMode::kUniform : SamplingMode::kHierarchical;
}

void SamplerConfig::validate() const {
  if (!(0.0 <= eps1 && eps1 <= eps2 && eps2 <= 1.0)) {
    throw UsageError("sampler: require 0 <= eps1 <= eps2 <= 1");
  }
}

std::string similarity_dump(const SimilarityTable& table, int task) {
  std::string out;
  for (std::size_t l = 0; l < table.blocks.size(); ++l) {
    for (const auto& e : table.blocks[l]) {
      nlohmann::ordered_json rec;
      rec["task"] = task;
      rec["block"] = l;
      rec["target"] = e.target;
      rec["cosine"] = e.raw;
      rec["score"] = e.score;
      rec["psi"] = e.psi;
      rec["rho"] = e.rho;
      out += rec.dump() + "\n";
    }
  }
  return out;
}

}  // namespace ahip
