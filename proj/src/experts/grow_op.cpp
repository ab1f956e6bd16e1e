#include "ahip/experts/grow_op.hpp"

namespace ahip {

int GrowOp::resolved_entry() const {
  switch (kind) {
    case OpKind::kSkip: return -1;
    case OpKind::kReuse: return target;
    case OpKind::kAdapt:
    case OpKind::kNew: return created;
  }
  return -1;
}

std::string cell_label(const GrowOp& op) {
  switch (op.kind) {
    case OpKind::kSkip: return "S";
    case OpKind::kReuse: return "R(" + std::to_string(op.target) + ")";
    case OpKind::kAdapt: return "A(" + std::to_string(op.target) + ")";
    case OpKind::kNew: return "N";
  }
  return "?";
}

int PathSpec::count(OpKind kind) const {
  int n = 0;
  for (const auto& op : ops) n += op.kind == kind;
  return n;
}

std::string PathSpec::key() const {
  std::string k;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    if (i) k += '|';
    switch (ops[i].kind) {
      case OpKind::kSkip: k += 'S'; break;
      case OpKind::kReuse: k += 'R' + std::to_string(ops[i].target); break;
      case OpKind::kAdapt: k += 'A' + std::to_string(ops[i].target); break;
      case OpKind::kNew: k += 'N'; break;
    }
  }
  return k;
}

double search_space_size(const SearchSpace& space) {
  double n = 1.0;
  for (const auto& block : space) n *= static_cast<double>(block.size());
  return n;
}

}  // namespace ahip
