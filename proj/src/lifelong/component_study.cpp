#include "ahip/lifelong/component_study.hpp"

#include "ahip/numerics/errors.hpp"

namespace ahip {

namespace {

constexpr Component kAll[] = {Component::kLn1,   Component::kLn2,   Component::kQuery,   Component::kKey,
                              Component::kValue, Component::kProj,  Component::kMlpUp,   Component::kMlpDown,
                              Component::kMhsaLn1, Component::kHeadOnly};

template <typename Scalar>
void append(std::vector<Parameter<Scalar>>& out, const std::vector<Parameter<Scalar>>& more) {
  out.insert(out.end(), more.begin(), more.end());
}

}  // namespace

const char* to_string(Component c) {
  switch (c) {
    case Component::kLn1: return "ln1";
    case Component::kLn2: return "ln2";
    case Component::kQuery: return "q";
    case Component::kKey: return "k";
    case Component::kValue: return "v";
    case Component::kProj: return "proj";
    case Component::kMlpUp: return "ffn_up";
    case Component::kMlpDown: return "ffn_down";
    case Component::kMhsaLn1: return "mhsa_ln1";
    case Component::kHeadOnly: return "head";
  }
  return "?";
}

Component component_from_string(const std::string& name) {
  for (Component c : kAll) {
    if (name == to_string(c)) return c;
  }
  throw UsageError("unknown component '" + name + "'");
}

template <typename Scalar>
StudyModel<Scalar> StudyModel<Scalar>::clone() const {
  StudyModel out;
  out.vit = vit.clone();
  out.vit.set_trainable(false);
  for (const auto& p : proj) {
    out.proj.push_back(p.clone(p.weight.name().substr(0, p.weight.name().size() - 7)));
    out.proj.back().set_trainable(false);
  }
  out.head = head.clone(head.weight.name().substr(0, head.weight.name().size() - 7));
  out.head.set_trainable(false);
  return out;
}

template <typename Scalar>
std::vector<Parameter<Scalar>> StudyModel<Scalar>::parameters(Component c) const {
  std::vector<Parameter<Scalar>> out;
  for (int l = 0; l < vit.depth(); ++l) {
    const auto& b = vit.block(l);
    const auto& pr = proj[static_cast<std::size_t>(l)];
    switch (c) {
      case Component::kLn1: append(out, b.parameters(BlockPart::kLn1)); break;
      case Component::kLn2: append(out, b.parameters(BlockPart::kLn2)); break;
      case Component::kQuery: append(out, b.parameters(BlockPart::kQuery)); break;
      case Component::kKey: append(out, b.parameters(BlockPart::kKey)); break;
      case Component::kValue: append(out, b.parameters(BlockPart::kValue)); break;
      case Component::kMlpUp: append(out, b.parameters(BlockPart::kMlpUp)); break;
      case Component::kMlpDown: append(out, b.parameters(BlockPart::kMlpDown)); break;
      case Component::kProj:
        out.push_back(pr.weight);
        out.push_back(pr.bias);
        break;
      case Component::kMhsaLn1:
        for (auto part : {BlockPart::kLn1, BlockPart::kQuery, BlockPart::kKey, BlockPart::kValue}) {
          append(out, b.parameters(part));
        }
        out.push_back(pr.weight);
        out.push_back(pr.bias);
        break;
      case Component::kHeadOnly: break;
    }
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> StudyModel<Scalar>::logits(const Linear<Scalar>& h, const Dataset& data, Index batch_size) const {
  NoGradGuard guard;
  std::vector<SlotFn<Scalar>> slots;
  for (const auto& p : proj) slots.push_back([p](const Var<Scalar>& u) { return p(u); });
  Tensor<Scalar> out(Shape{data.size(), h.out_features()});
  for (const auto& idx : sequential_batches(data.size(), batch_size)) {
    const auto y = h(vit.forward(gather_images<Scalar>(data, idx), slots));
    out.matrix().middleRows(idx.front(), static_cast<Index>(idx.size())) = y.value().matrix();
  }
  return out;
}

template <typename Scalar>
StudyModel<Scalar> study_base(const LifelongModel<Scalar>& model) {
  if (model.num_tasks() == 0) throw UsageError("study: no base model");
  StudyModel<Scalar> s;
  s.vit = model.backbone();
  const auto& path = model.record(1).path;
  for (int l = 0; l < model.bank().depth(); ++l) s.proj.push_back(model.bank().entry(l, path.ops[l].resolved_entry()).proj);
  s.head = model.record(1).head;
  return s.clone();
}

template <typename Scalar>
Linear<Scalar> finetune_component(StudyModel<Scalar>& from, Component c, const TaskDataset& target,
                                  const StudyConfig& cfg, int task) {
  const std::string stream = "study." + std::string(to_string(c)) + ".task" + std::to_string(task);
  Rng init = Rng::stream(cfg.seed, stream + ".init");
  Linear<Scalar> head = Linear<Scalar>::create(stream + ".head", from.vit.config().embed_dim, target.num_classes, init);
  const auto params = from.parameters(c);
  for (const auto& p : params) p.set_trainable(true);
  const Index per_epoch = batches_per_epoch(target.train.size(), cfg.batch_size, cfg.min_batches);
  Adam<Scalar> opt({cfg.lr, 0.9, 0.999, 1e-8, per_epoch * cfg.epochs});
  for (const auto& p : params) opt.add(p);
  opt.add(head.weight);
  opt.add(head.bias);
  std::vector<SlotFn<Scalar>> slots;
  for (const auto& p : from.proj) slots.push_back([p](const Var<Scalar>& u) { return p(u); });
  TrainLoopSpec spec;
  spec.epochs = cfg.epochs;
  spec.min_batches = cfg.min_batches;
  spec.batch_size = cfg.batch_size;
  spec.smoothing = cfg.smoothing;
  spec.stream = stream;
  TrainLoopHooks<Scalar> hooks;
  hooks.logits = [&](const Tensor<Scalar>& images, const DropPath& drop) {
    return head(from.vit.forward(images, slots, nullptr, drop));
  };
  run_train_loop(spec, hooks, target, opt, cfg.seed);
  for (const auto& p : params) p.set_trainable(false);
  head.set_trainable(false);
  return head;
}

template <typename Scalar>
std::vector<double> transfer_accuracy(const StudyModel<Scalar>& base, const std::vector<TaskDataset>& tasks,
                                      Component c, const StudyConfig& cfg) {
  if (tasks.size() < 2) throw InputError("transfer_accuracy: need at least two tasks");
  std::vector<double> out;
  for (std::size_t n = 1; n < tasks.size(); ++n) {
    StudyModel<Scalar> m = base.clone();
    const auto head = finetune_component(m, c, tasks[n], cfg, static_cast<int>(n + 1));
    out.push_back(top1_accuracy(m.logits(head, tasks[n].test), tasks[n].test.labels));
  }
  return out;
}

template <typename Scalar>
StudyResult component_study(const StudyModel<Scalar>& base, const Linear<Scalar>& base_head,
                            const std::vector<TaskDataset>& tasks, Component c, const StudyConfig& cfg) {
  StudyResult res;
  res.component = c;
  res.transfer_per_task = transfer_accuracy(base, tasks, c, cfg);
  res.transfer = mean_transfer_accuracy(res.transfer_per_task);
  const int n_tasks = static_cast<int>(tasks.size());
  res.matrix = AccuracyMatrix(n_tasks);
  StudyModel<Scalar> m = base.clone();
  std::vector<Linear<Scalar>> heads{base_head};
  res.matrix.set(1, 1, top1_accuracy(m.logits(base_head, tasks[0].test), tasks[0].test.labels));
  for (int n = 2; n <= n_tasks; ++n) {
    heads.push_back(finetune_component(m, c, tasks[static_cast<std::size_t>(n - 1)], cfg, n));
    for (int i = 1; i <= n; ++i) {
      const auto& test = tasks[static_cast<std::size_t>(i - 1)].test;
      res.matrix.set(n, i, top1_accuracy(m.logits(heads[static_cast<std::size_t>(i - 1)], test), test.labels));
    }
  }
  res.forgetting = average_forgetting(res.matrix, n_tasks);
  res.final_average = average_accuracy(res.matrix, n_tasks);
  return res;
}

#define AHIP_INSTANTIATE_STUDY(S)                                                                             \
  template struct StudyModel<S>;                                                                              \
  template StudyModel<S> study_base<S>(const LifelongModel<S>&);                                              \
  template Linear<S> finetune_component<S>(StudyModel<S>&, Component, const TaskDataset&, const StudyConfig&, \
                                           int);                                                              \
  template std::vector<double> transfer_accuracy<S>(const StudyModel<S>&, const std::vector<TaskDataset>&,    \
                                                    Component, const StudyConfig&);                           \
  template StudyResult component_study<S>(const StudyModel<S>&, const Linear<S>&,                             \
                                          const std::vector<TaskDataset>&, Component, const StudyConfig&);

AHIP_INSTANTIATE_STUDY(float)
AHIP_INSTANTIATE_STUDY(double)

}  // namespace ahip
