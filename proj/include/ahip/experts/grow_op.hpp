#pragma once

#include <string>
#include <vector>

namespace ahip {

enum class OpKind : std::uint8_t { kSkip = 0, kReuse = 1, kAdapt = 2, kNew = 3 };

/// One growing operation at one block.
///
/// `target` is the bank entry a Reuse/Adapt builds on. `created` is the
/// bank entry a New/Adapt produced once the task was consolidated; before
/// consolidation it is -1 and the op refers to the current task's fresh
/// parameters.
struct GrowOp {
  OpKind kind = OpKind::kSkip;
  int target = -1;
  int created = -1;

  static GrowOp skip() { return {OpKind::kSkip, -1, -1}; }
  static GrowOp reuse(int target) { return {OpKind::kReuse, target, -1}; }
  static GrowOp adapt(int target) { return {OpKind::kAdapt, target, -1}; }
  static GrowOp fresh() { return {OpKind::kNew, -1, -1}; }

  bool consolidated() const { return created >= 0; }
  /// Bank entry applied at inference time, or -1 for Skip/unconsolidated ops.
  int resolved_entry() const;

  /// Same choice in the search space (ignores `created`).
  bool same_choice(const GrowOp& o) const { return kind == o.kind && target == o.target; }
  friend bool operator==(const GrowOp&, const GrowOp&) = default;
};

/// Grid cell text: S, R(k), A(k) or N.
std::string cell_label(const GrowOp& op);

/// One op per block; the task it was selected for.
struct PathSpec {
  int task = 0;
  std::vector<GrowOp> ops;

  int depth() const { return static_cast<int>(ops.size()); }
  int count(OpKind kind) const;
  /// Compact identity of the choice sequence, e.g. "S|R0|A1|N".
  std::string key() const;
  friend bool operator==(const PathSpec&, const PathSpec&) = default;
};

/// Candidate ops per block in the supernet for the current task.
using SearchSpace = std::vector<std::vector<GrowOp>>;

/// Number of distinct single paths.
double search_space_size(const SearchSpace& space);

}  // namespace ahip
