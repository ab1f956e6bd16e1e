#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ahip/experts/mean_tokens.hpp"
#include "ahip/lifelong/metrics.hpp"
#include "ahip/nas/evolution.hpp"
#include "ahip/nas/training.hpp"

namespace ahip {

struct LifelongConfig {
  ViTConfig vit = ViTConfig::tiny();
  SearchConfig search;
  SamplerConfig sampler;
  int base_epochs = 20;
  int base_batches_min = 15;
  double base_lr = 1e-3;
  bool task_token = false;
  int probe_size = 256;
  int mean_token_batch = 128;
  std::uint64_t seed = 0;

  Index adapter_hidden() const { return vit.embed_dim / 4; }
  void validate() const;
};

/// Everything needed to replay a learned task.
template <typename Scalar>
struct TaskRecord {
  int task = 0;
  std::string name;
  int num_classes = 0;
  PathSpec path;  // consolidated
  Linear<Scalar> head;
  std::optional<Tensor<Scalar>> token;
  ParamAccount added;
  double test_accuracy = 0.0;
  double val_fitness = 0.0;  // search fitness of the selected path (NaN for task 1)
  std::uint64_t probe_hash = 0;
};

enum class CIMode { kMax, kMinEntropy };
const char* to_string(CIMode mode);
CIMode ci_mode_from_string(const std::string& name);

struct CIPrediction {
  int task = 0;
  int label = 0;
};

/// The growing model: frozen task-1 backbone, the expert bank and one
/// record per learned task.
template <typename Scalar>
class LifelongModel {
 public:
  LifelongModel() = default;
  explicit LifelongModel(LifelongConfig config);

  const LifelongConfig& config() const { return config_; }
  const VisionTransformer<Scalar>& backbone() const { return vit_; }
  const ExpertBank<Scalar>& bank() const { return bank_; }
  const std::vector<TaskRecord<Scalar>>& records() const { return records_; }
  const TaskRecord<Scalar>& record(int task) const;
  int num_tasks() const { return static_cast<int>(records_.size()); }
  void set_log(RunLog* log) { log_ = log; }

  /// Ordinary training of the whole ViT (with one projection per block)
  /// on task 1; the projections become the first expert of each bank
  /// block and the backbone is frozen.
  const TaskRecord<Scalar>& learn_first_task(const TaskDataset& data);

  /// similarity -> supernet -> evolution -> finetune -> consolidate.
  /// `data` must carry a validation split.
  const TaskRecord<Scalar>& learn_task(const TaskDataset& data);

  /// A class token for `task` trained with a temporary head on the frozen
  /// task-1 path (nothing else changes).
  Parameter<Scalar> learn_task_token(const TaskDataset& data, int task) const;

  /// Normalised similarities of every bank entry to `data`.
  SimilarityTable similarity_table(const TaskDataset& data, const Var<Scalar>* token = nullptr) const;

  Tensor<Scalar> task_logits(int task, const Dataset& data) const;
  double evaluate(int task, const Dataset& data) const;
  /// Hash of the task's logits on the first `probe_size` samples of `data`.
  std::uint64_t probe_hash(int task, const Dataset& data) const;

  /// Per-block unnormalised cosine between each task's mean tokens and the
  /// sample's slot-output class token, [n, depth] per task (NaN at Skip).
  std::vector<Tensor<double>> block_similarities(const Dataset& data) const;
  /// Task id by the Max indicator or by minimum head entropy (ties to the
  /// lowest task), then the class from that task's head.
  std::vector<CIPrediction> predict_class_incremental(const Dataset& data, CIMode mode) const;

  void save(Checkpoint& ck) const;
  /// Geometry comes from the checkpoint; everything else from `config`
  /// when given.
  static LifelongModel load(const Checkpoint& ck, const LifelongConfig* config = nullptr);

 private:
  std::uint64_t task_seed(int task) const;
  SearchContext<Scalar> context(int task) const;
  const Var<Scalar>* token_var(int task, std::optional<Var<Scalar>>& holder) const;
  void finish_record(TaskRecord<Scalar>& rec, const TaskDataset& data);

  LifelongConfig config_;
  VisionTransformer<Scalar> vit_;
  ExpertBank<Scalar> bank_;
  std::vector<TaskRecord<Scalar>> records_;
  RunLog* log_ = nullptr;
};

/// Accuracy of every learned task on its own test split after the last
/// task (the final matrix row), computed by replay.
template <typename Scalar>
std::vector<double> replay_accuracies(const LifelongModel<Scalar>& model,
                                      const std::vector<TaskDataset>& tasks);

struct CIReport {
  double task_id_accuracy = 0.0;
  double accuracy = 0.0;  // task and class both right
};

/// Class-incremental evaluation over the union of the tasks' test splits.
template <typename Scalar>
CIReport evaluate_class_incremental(const LifelongModel<Scalar>& model,
                                    const std::vector<TaskDataset>& tasks, CIMode mode);

}  // namespace ahip
