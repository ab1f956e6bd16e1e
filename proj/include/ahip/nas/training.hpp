#pragma once

#include <functional>
#include <optional>

#include "ahip/experts/supernet.hpp"
#include "ahip/numerics/optim.hpp"
#include "ahip/nas/run_log.hpp"
#include "ahip/nas/search_config.hpp"
#include "ahip/sampling/sampler.hpp"
#include "ahip/taskdata/dataset.hpp"

namespace ahip {

/// Frozen state a task is searched against.
template <typename Scalar>
struct SearchContext {
  const VisionTransformer<Scalar>* vit = nullptr;
  const ExpertBank<Scalar>* bank = nullptr;
  int task = 0;
  std::uint64_t seed = 0;
  RunLog* log = nullptr;
};

/// head(features of `images` along `path`).
template <typename Scalar>
Var<Scalar> path_logits(const SearchContext<Scalar>& ctx, const GrowthParams<Scalar>* growth,
                        const PathSpec& path, const Linear<Scalar>& head,
                        const Tensor<Scalar>& images, const Var<Scalar>* token = nullptr,
                        const DropPath& drop = {});

/// Logits [n, C] over a whole split, without recording a graph.
template <typename Scalar>
Tensor<Scalar> predict_logits(const SearchContext<Scalar>& ctx, const GrowthParams<Scalar>* growth,
                              const PathSpec& path, const Linear<Scalar>& head, const Dataset& data,
                              const Var<Scalar>* token = nullptr, Index batch_size = 128);

/// Top-1 accuracy; ties in a row go to the lowest class.
template <typename Scalar>
double top1_accuracy(const Tensor<Scalar>& logits, const std::vector<int>& labels);

struct SupernetOptions {
  /// Replaces the sampler (tests force specific paths with it).
  std::function<PathSpec(Rng&)> path_override;
  /// Called after backward, before the optimizer step.
  std::function<void(const PathSpec&)> after_backward;
};

struct SupernetReport {
  std::vector<double> epoch_loss;
  std::vector<SamplingMode> strategies;
  long steps = 0;
};

/// Single-path one-shot training. Every epoch draws a strategy; every
/// minibatch draws one path and updates only its parameters, the head and
/// (when given and trainable) the task token. Adapters run in plain mode.
/// Throws NumericError on a non-finite loss.
template <typename Scalar>
SupernetReport train_supernet(const SearchContext<Scalar>& ctx, Supernet<Scalar>& supernet,
                              const Linear<Scalar>& head, const TaskDataset& data,
                              const SimilarityTable& table, const SamplerConfig& sampler,
                              const SearchConfig& cfg, const Parameter<Scalar>* token = nullptr,
                              const SupernetOptions& options = {});

/// Validation accuracy of `path` with supernet weights; no updates.
template <typename Scalar>
double evaluate_candidate(const SearchContext<Scalar>& ctx, const Supernet<Scalar>& supernet,
                          const Linear<Scalar>& head, const PathSpec& path, const Dataset& val,
                          const Var<Scalar>* token = nullptr, Index batch_size = 128);

template <typename Scalar>
struct FinetuneResult {
  GrowthParams<Scalar> growth;  // adapters in residual mode
  Linear<Scalar> head;
  std::optional<Parameter<Scalar>> token;
  std::vector<double> epoch_loss;
};

/// Retrains the selected path from scratch: New/Adapt parameters and the
/// head are drawn afresh from their own streams, adapters switch to
/// residual mode, drop path and label smoothing regularise. The token,
/// when given, is copied and trained alongside.
template <typename Scalar>
FinetuneResult<Scalar> finetune_target(const SearchContext<Scalar>& ctx, const PathSpec& path,
                                       const TaskDataset& data, const SearchConfig& cfg,
                                       const Parameter<Scalar>* token = nullptr);

/// Shared minibatch loop of every training phase.
struct TrainLoopSpec {
  int epochs = 1;
  int min_batches = 1;
  int batch_size = 32;
  double smoothing = 0.1;
  double drop_path = 0.0;
  std::string stream = "train";  // names the batch / augmentation / drop streams
};

template <typename Scalar>
struct TrainLoopHooks {
  /// Logits of a batch.
  std::function<Var<Scalar>(const Tensor<Scalar>& images, const DropPath& drop)> logits;
  std::function<void(int epoch)> on_epoch;   // optional, before the epoch's first batch
  std::function<void()> after_backward;      // optional
};

/// Number of minibatches per epoch for n samples.
Index batches_per_epoch(Index n, Index batch_size, Index min_batches);

/// Runs the loop with `opt` (whose schedule the caller sized with
/// batches_per_epoch) and returns the mean loss per epoch.
template <typename Scalar>
std::vector<double> run_train_loop(const TrainLoopSpec& spec, const TrainLoopHooks<Scalar>& hooks,
                                   const TaskDataset& data, Adam<Scalar>& opt, std::uint64_t seed);

}  // namespace ahip
