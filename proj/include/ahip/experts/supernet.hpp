#pragma once

#include <map>
#include <optional>

#include "ahip/experts/expert_bank.hpp"
#include "ahip/experts/grow_op.hpp"
#include "ahip/vit/vision_transformer.hpp"

namespace ahip {

/// Trainable parameters a task introduces on top of the bank: one fresh
/// projection per block (New) and one fresh adapter per existing entry
/// (Adapt). The supernet holds all of them; a target network only the ones
/// on its path.
template <typename Scalar>
class GrowthParams {
 public:
  GrowthParams() = default;

  static GrowthParams for_supernet(const ExpertBank<Scalar>& bank, int task, Rng& rng);
  static GrowthParams for_path(const ExpertBank<Scalar>& bank, const PathSpec& path, Rng& rng);

  const Linear<Scalar>* new_projection(int block) const;
  const Adapter<Scalar>* adapter(int block, int target) const;

  void set_adapter_mode(AdapterMode mode);
  std::vector<Parameter<Scalar>> parameters() const;
  /// Parameters touched by `path` (unconsolidated ops only).
  std::vector<Parameter<Scalar>> parameters(const PathSpec& path) const;

 private:
  void ensure_depth(int depth);
  void add_new(int task, int block, Index dim, Rng& rng);
  void add_adapter(int task, int block, int target, Index dim, Index hidden, Rng& rng);

  std::vector<std::optional<Linear<Scalar>>> new_;
  std::vector<std::map<int, Adapter<Scalar>>> adapters_;
};

/// Candidate set per block: {Skip, New} plus Reuse(e) and Adapt(e) for
/// every bank entry e, in that order.
template <typename Scalar>
SearchSpace supernet_space(const ExpertBank<Scalar>& bank);

template <typename Scalar>
struct Supernet {
  int task = 0;
  SearchSpace space;
  GrowthParams<Scalar> growth;
};

/// Fresh New/Adapt parameters (adapters in plain mode) over a frozen bank.
template <typename Scalar>
Supernet<Scalar> construct_supernet(const ExpertBank<Scalar>& bank, int task, Rng& rng);

/// Slot output for `op` at `block`. Consolidated ops read the bank;
/// otherwise New/Adapt read `growth`. Skip contributes an all-zero branch.
/// Throws IntegrityError when the op points at nothing.
template <typename Scalar>
Var<Scalar> apply_op(const ExpertBank<Scalar>& bank, const GrowthParams<Scalar>* growth,
                     int block, const GrowOp& op, const Var<Scalar>& u);

/// Slot function for the ViT (empty for Skip).
template <typename Scalar>
SlotFn<Scalar> resolve_slot(const ExpertBank<Scalar>& bank, const GrowthParams<Scalar>* growth,
                            int block, const GrowOp& op);

template <typename Scalar>
std::vector<SlotFn<Scalar>> resolve_path(const ExpertBank<Scalar>& bank,
                                         const GrowthParams<Scalar>* growth, const PathSpec& path);

/// Parameters added by a task, by kind.
struct ParamAccount {
  Index projection = 0;
  Index adapter = 0;
  Index head = 0;
  Index token = 0;

  Index backbone() const { return projection + adapter; }
  Index total() const { return projection + adapter + head + token; }
};

/// Closed form: New adds d^2 + d, Adapt adds 2 d d_a + d_a + d, Skip and
/// Reuse add nothing.
ParamAccount path_parameter_cost(const PathSpec& path, Index dim, Index adapter_hidden);

struct Consolidation {
  PathSpec path;  // with `created` ids filled in
  ParamAccount added;
};

/// Appends the New/Adapt parameters on `path` to the bank (frozen, with
/// the given per-block mean tokens) and returns the consolidated path.
/// `mean_tokens[l]` is ignored for Skip/Reuse blocks.
template <typename Scalar>
Consolidation consolidate(ExpertBank<Scalar>& bank, const PathSpec& path,
                          const GrowthParams<Scalar>& finetuned,
                          const std::vector<Tensor<Scalar>>& mean_tokens, int task);

}  // namespace ahip
