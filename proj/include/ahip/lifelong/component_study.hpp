#pragma once

#include <string>
#include <vector>

#include "ahip/lifelong/lifelong_model.hpp"

namespace ahip {

/// Trainable part of the task-1 model in the study protocol.
enum class Component { kLn1, kLn2, kQuery, kKey, kValue, kProj, kMlpUp, kMlpDown, kMhsaLn1, kHeadOnly };

const char* to_string(Component c);
/// ln1, ln2, q, k, v, proj, ffn_up, ffn_down, mhsa_ln1, head.
Component component_from_string(const std::string& name);

/// Plain task-1 network: backbone, one projection per block and a head.
template <typename Scalar>
struct StudyModel {
  VisionTransformer<Scalar> vit;
  std::vector<Linear<Scalar>> proj;
  Linear<Scalar> head;

  /// Deep copy with every parameter frozen.
  StudyModel clone() const;
  /// Trainable parameters of `c` (the head is never included).
  std::vector<Parameter<Scalar>> parameters(Component c) const;
  Tensor<Scalar> logits(const Linear<Scalar>& head, const Dataset& data, Index batch_size = 128) const;
};

/// The task-1 network inside a learned model.
template <typename Scalar>
StudyModel<Scalar> study_base(const LifelongModel<Scalar>& model);

struct StudyConfig {
  int epochs = 10;
  int min_batches = 15;
  int batch_size = 32;
  double lr = 1e-3;
  double smoothing = 0.1;
  std::uint64_t seed = 0;
};

struct StudyResult {
  Component component = Component::kHeadOnly;
  double transfer = 0.0;    // mean over tasks 2..N of task-1 -> task-n accuracy
  double forgetting = 0.0;  // after sequential finetuning through all tasks
  double final_average = 0.0;
  std::vector<double> transfer_per_task;
  AccuracyMatrix matrix;
};

/// Finetunes `c` plus a fresh head on `target` starting from `from`;
/// returns the head (the model's parameters are updated in place).
template <typename Scalar>
Linear<Scalar> finetune_component(StudyModel<Scalar>& from, Component c, const TaskDataset& target,
                                  const StudyConfig& cfg, int task);

/// Pairwise transfer: for n = 2..N, a fresh copy of `base` finetunes `c`
/// and a new head on task n; returns each test accuracy.
template <typename Scalar>
std::vector<double> transfer_accuracy(const StudyModel<Scalar>& base, const std::vector<TaskDataset>& tasks,
                                      Component c, const StudyConfig& cfg);

/// Transfer (pairwise) and forgetting (one copy of `base` finetuned on
/// tasks 2..N in order; old heads kept; the matrix is filled after every
/// task). tasks[0] is the task `base` was trained on.
template <typename Scalar>
StudyResult component_study(const StudyModel<Scalar>& base, const Linear<Scalar>& base_head,
                            const std::vector<TaskDataset>& tasks, Component c, const StudyConfig& cfg);

}  // namespace ahip
