#include "ahip/experts/supernet.hpp"

namespace ahip {

namespace {

std::string growth_name(int task, int block) {
  return "task" + std::to_string(task) + ".b" + std::to_string(block);
}

}  // namespace

template <typename Scalar>
void GrowthParams<Scalar>::ensure_depth(int depth) {
  new_.resize(static_cast<std::size_t>(depth));
  adapters_.resize(static_cast<std::size_t>(depth));
}

template <typename Scalar>
void GrowthParams<Scalar>::add_new(int task, int block, Index dim, Rng& rng) {
  Rng r = rng.split(growth_name(task, block) + ".new");
  new_[static_cast<std::size_t>(block)] =
      Linear<Scalar>::create(growth_name(task, block) + ".new", dim, dim, r);
}

template <typename Scalar>
void GrowthParams<Scalar>::add_adapter(int task, int block, int target, Index dim, Index hidden,
                                       Rng& rng) {
  const std::string name = growth_name(task, block) + ".adapt" + std::to_string(target);
  Rng r = rng.split(name);
  adapters_[static_cast<std::size_t>(block)][target] =
      Adapter<Scalar>::create(name, dim, hidden, r, AdapterMode::kPlain);
}

template <typename Scalar>
GrowthParams<Scalar> GrowthParams<Scalar>::for_supernet(const ExpertBank<Scalar>& bank, int task,
                                                        Rng& rng) {
  GrowthParams g;
  g.ensure_depth(bank.depth());
  for (int l = 0; l < bank.depth(); ++l) {
    g.add_new(task, l, bank.dim(), rng);
    for (int e = 0; e < bank.size(l); ++e) {
      g.add_adapter(task, l, e, bank.dim(), bank.adapter_hidden(), rng);
    }
  }
  return g;
}

template <typename Scalar>
GrowthParams<Scalar> GrowthParams<Scalar>::for_path(const ExpertBank<Scalar>& bank,
                                                    const PathSpec& path, Rng& rng) {
  if (path.depth() != bank.depth()) throw IntegrityError("path depth does not match bank");
  GrowthParams g;
  g.ensure_depth(bank.depth());
  for (int l = 0; l < bank.depth(); ++l) {
    const GrowOp& op = path.ops[static_cast<std::size_t>(l)];
    if (op.consolidated()) continue;
    if (op.kind == OpKind::kNew) g.add_new(path.task, l, bank.dim(), rng);
    if (op.kind == OpKind::kAdapt) {
      bank.entry(l, op.target);
      g.add_adapter(path.task, l, op.target, bank.dim(), bank.adapter_hidden(), rng);
    }
  }
  return g;
}

template <typename Scalar>
const Linear<Scalar>* GrowthParams<Scalar>::new_projection(int block) const {
  if (block < 0 || block >= static_cast<int>(new_.size())) return nullptr;
  const auto& p = new_[static_cast<std::size_t>(block)];
  return p ? &*p : nullptr;
}

template <typename Scalar>
const Adapter<Scalar>* GrowthParams<Scalar>::adapter(int block, int target) const {
  if (block < 0 || block >= static_cast<int>(adapters_.size())) return nullptr;
  const auto& m = adapters_[static_cast<std::size_t>(block)];
  auto it = m.find(target);
  return it == m.end() ? nullptr : &it->second;
}

template <typename Scalar>
void GrowthParams<Scalar>::set_adapter_mode(AdapterMode mode) {
  for (auto& m : adapters_) {
    for (auto& [_, a] : m) a.mode = mode;
  }
}

template <typename Scalar>
std::vector<Parameter<Scalar>> GrowthParams<Scalar>::parameters() const {
  std::vector<Parameter<Scalar>> out;
  for (std::size_t l = 0; l < new_.size(); ++l) {
    if (new_[l]) {
      out.push_back(new_[l]->weight);
      out.push_back(new_[l]->bias);
    }
    for (const auto& [_, a] : adapters_[l]) {
      for (const auto* lin : {&a.down, &a.up}) {
        out.push_back(lin->weight);
        out.push_back(lin->bias);
      }
    }
  }
  return out;
}

template <typename Scalar>
std::vector<Parameter<Scalar>> GrowthParams<Scalar>::parameters(const PathSpec& path) const {
  std::vector<Parameter<Scalar>> out;
  for (int l = 0; l < path.depth(); ++l) {
    const GrowOp& op = path.ops[static_cast<std::size_t>(l)];
    if (op.consolidated()) continue;
    if (op.kind == OpKind::kNew) {
      if (const auto* p = new_projection(l)) {
        out.push_back(p->weight);
        out.push_back(p->bias);
      }
    } else if (op.kind == OpKind::kAdapt) {
      if (const auto* a = adapter(l, op.target)) {
        for (const auto* lin : {&a->down, &a->up}) {
          out.push_back(lin->weight);
          out.push_back(lin->bias);
        }
      }
    }
  }
  return out;
}

template <typename Scalar>
SearchSpace supernet_space(const ExpertBank<Scalar>& bank) {
  SearchSpace space(static_cast<std::size_t>(bank.depth()));
  for (int l = 0; l < bank.depth(); ++l) {
    auto& c = space[static_cast<std::size_t>(l)];
    c.push_back(GrowOp::skip());
    c.push_back(GrowOp::fresh());
    for (int e = 0; e < bank.size(l); ++e) c.push_back(GrowOp::reuse(e));
    for (int e = 0; e < bank.size(l); ++e) c.push_back(GrowOp::adapt(e));
  }
  return space;
}

template <typename Scalar>
Supernet<Scalar> construct_supernet(const ExpertBank<Scalar>& bank, int task, Rng& rng) {
  return {task, supernet_space(bank), GrowthParams<Scalar>::for_supernet(bank, task, rng)};
}

template <typename Scalar>
Var<Scalar> apply_op(const ExpertBank<Scalar>& bank, const GrowthParams<Scalar>* growth, int block,
                     const GrowOp& op, const Var<Scalar>& u) {
  if (op.kind == OpKind::kSkip) return constant(Tensor<Scalar>(u.shape()));
  if (op.kind == OpKind::kReuse) return bank.apply(block, op.target, u);
  if (op.consolidated()) return bank.apply(block, op.created, u);
  if (op.kind == OpKind::kNew) {
    const auto* p = growth ? growth->new_projection(block) : nullptr;
    if (!p) throw IntegrityError("New op at block " + std::to_string(block) + " has no weights");
    return (*p)(u);
  }
  const auto* a = growth ? growth->adapter(block, op.target) : nullptr;
  if (!a) {
    throw IntegrityError("Adapt op at block " + std::to_string(block) + " on entry " +
                         std::to_string(op.target) + " has no weights");
  }
  return (*a)(bank.apply(block, op.target, u));
}

template <typename Scalar>
SlotFn<Scalar> resolve_slot(const ExpertBank<Scalar>& bank, const GrowthParams<Scalar>* growth,
                            int block, const GrowOp& op) {
  if (op.kind == OpKind::kSkip) return {};
  // Validate eagerly so a dangling id fails before any compute.
  if (op.kind == OpKind::kReuse || op.kind == OpKind::kAdapt) bank.entry(block, op.target);
  if (op.consolidated()) bank.entry(block, op.created);
  return [&bank, growth, block, op](const Var<Scalar>& u) {
    return apply_op(bank, growth, block, op, u);
  };
}

template <typename Scalar>
std::vector<SlotFn<Scalar>> resolve_path(const ExpertBank<Scalar>& bank,
                                         const GrowthParams<Scalar>* growth,
                                         const PathSpec& path) {
  if (path.depth() != bank.depth()) throw IntegrityError("path depth does not match bank");
  std::vector<SlotFn<Scalar>> slots;
  for (int l = 0; l < path.depth(); ++l) {
    slots.push_back(resolve_slot(bank, growth, l, path.ops[static_cast<std::size_t>(l)]));
  }
  return slots;
}

ParamAccount path_parameter_cost(const PathSpec& path, Index dim, Index adapter_hidden) {
  ParamAccount a;
  for (const auto& op : path.ops) {
    if (op.kind == OpKind::kNew) a.projection += new_op_parameters(dim);
    if (op.kind == OpKind::kAdapt) a.adapter += adapt_op_parameters(dim, adapter_hidden);
  }
  return a;
}

template <typename Scalar>
Consolidation consolidate(ExpertBank<Scalar>& bank, const PathSpec& path,
                          const GrowthParams<Scalar>& finetuned,
                          const std::vector<Tensor<Scalar>>& mean_tokens, int task) {
  if (path.depth() != bank.depth() || static_cast<int>(mean_tokens.size()) != bank.depth()) {
    throw IntegrityError("consolidate: path/mean-token depth does not match bank");
  }
  Consolidation out{path, {}};
  out.path.task = task;
  for (int l = 0; l < path.depth(); ++l) {
    GrowOp& op = out.path.ops[static_cast<std::size_t>(l)];
    if (op.consolidated() || op.kind == OpKind::kSkip || op.kind == OpKind::kReuse) continue;
    const Tensor<Scalar>& mean = mean_tokens[static_cast<std::size_t>(l)];
    if (!mean.all_finite()) throw NumericError("consolidate: non-finite mean token");
    if (op.kind == OpKind::kNew) {
      const auto* p = finetuned.new_projection(l);
      if (!p) throw IntegrityError("consolidate: missing New weights");
      op.created = bank.add_expert(l, *p, mean, task);
      out.added.projection += p->parameter_count();
    } else {
      const auto* a = finetuned.adapter(l, op.target);
      if (!a) throw IntegrityError("consolidate: missing Adapt weights");
      Adapter<Scalar> sealed = *a;
      sealed.mode = AdapterMode::kResidual;
      op.created = bank.add_adapter(l, op.target, sealed, mean, task);
      out.added.adapter += a->parameter_count();
    }
  }
  return out;
}

#define AHIP_INSTANTIATE_SUPERNET(S)                                                          \
  template class GrowthParams<S>;                                                             \
  template SearchSpace supernet_space<S>(const ExpertBank<S>&);                               \
  template Supernet<S> construct_supernet<S>(const ExpertBank<S>&, int, Rng&);                \
  template Var<S> apply_op<S>(const ExpertBank<S>&, const GrowthParams<S>*, int,              \
                              const GrowOp&, const Var<S>&);                                  \
  template SlotFn<S> resolve_slot<S>(const ExpertBank<S>&, const GrowthParams<S>*, int,       \
                                     const GrowOp&);                                          \
  template std::vector<SlotFn<S>> resolve_path<S>(const ExpertBank<S>&,                       \
                                                  const GrowthParams<S>*, const PathSpec&);   \
  template Consolidation consolidate<S>(ExpertBank<S>&, const PathSpec&,                      \
                                        const GrowthParams<S>&, const std::vector<Tensor<S>>&, \
                                        int);

AHIP_INSTANTIATE_SUPERNET(float)
AHIP_INSTANTIATE_SUPERNET(double)

}  // namespace ahip
