#include "ahip/nas/training.hpp"

#include <cmath>

#include "ahip/numerics/errors.hpp"
#include "ahip/taskdata/augment.hpp"

namespace ahip {

Index batches_per_epoch(Index n, Index batch_size, Index min_batches) {
  Rng probe(0);
  return static_cast<Index>(epoch_batches(n, batch_size, min_batches, probe).size());
}

template <typename Scalar>
Var<Scalar> path_logits(const SearchContext<Scalar>& ctx, const GrowthParams<Scalar>* growth,
                        const PathSpec& path, const Linear<Scalar>& head,
                        const Tensor<Scalar>& images, const Var<Scalar>* token,
                        const DropPath& drop) {
  const auto slots = resolve_path(*ctx.bank, growth, path);
  return head(ctx.vit->forward(images, slots, token, drop));
}

template <typename Scalar>
Tensor<Scalar> predict_logits(const SearchContext<Scalar>& ctx, const GrowthParams<Scalar>* growth,
                              const PathSpec& path, const Linear<Scalar>& head, const Dataset& data,
                              const Var<Scalar>* token, Index batch_size) {
  NoGradGuard guard;
  Tensor<Scalar> out(Shape{data.size(), head.out_features()});
  for (const auto& idx : sequential_batches(data.size(), batch_size)) {
    const Var<Scalar> logits = path_logits(ctx, growth, path, head, gather_images<Scalar>(data, idx), token);
    out.matrix().middleRows(idx.front(), static_cast<Index>(idx.size())) = logits.value().matrix();
  }
  return out;
}

template <typename Scalar>
double top1_accuracy(const Tensor<Scalar>& logits, const std::vector<int>& labels) {
  const auto m = logits.matrix();
  if (m.rows() != static_cast<Index>(labels.size())) throw DimensionError("top1_accuracy: row/label mismatch");
  if (labels.empty()) return 0.0;
  Index hits = 0;
  for (Index i = 0; i < m.rows(); ++i) {
    Index best = 0;
    for (Index j = 1; j < m.cols(); ++j) {
      if (m(i, j) > m(i, best)) best = j;
    }
    hits += best == labels[static_cast<std::size_t>(i)];
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

template <typename Scalar>
std::vector<double> run_train_loop(const TrainLoopSpec& spec, const TrainLoopHooks<Scalar>& hooks,
                                   const TaskDataset& data, Adam<Scalar>& opt, std::uint64_t seed) {
  if (data.train.empty()) throw InputError("training: empty training split");
  Rng batch_rng = Rng::stream(seed, spec.stream + ".batches");
  Rng augment_rng = Rng::stream(seed, spec.stream + ".augment");
  Rng drop_rng = Rng::stream(seed, spec.stream + ".drop_path");
  const DropPath drop{spec.drop_path, &drop_rng};
  std::vector<double> losses;
  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    if (hooks.on_epoch) hooks.on_epoch(epoch);
    double total = 0.0;
    const auto batches = epoch_batches(data.train.size(), spec.batch_size, spec.min_batches, batch_rng);
    for (const auto& idx : batches) {
      Tensor<float> raw = gather_images<float>(data.train, idx);
      if (data.augment.enabled()) raw = augment_batch(raw, data.augment, augment_rng);
      const Tensor<Scalar> images = raw.template cast<Scalar>();
      const auto labels = gather_labels(data.train, idx);
      Var<Scalar> loss = cross_entropy_smoothed<Scalar>(hooks.logits(images, drop), labels, static_cast<Scalar>(spec.smoothing));
      backward(loss);
      if (hooks.after_backward) hooks.after_backward();
      opt.step();
      opt.zero_grad();
      total += static_cast<double>(loss.value()[0]);
    }
    losses.push_back(total / static_cast<double>(batches.size()));
  }
  return losses;
}

template <typename Scalar>
SupernetReport train_supernet(const SearchContext<Scalar>& ctx, Supernet<Scalar>& supernet,
                              const Linear<Scalar>& head, const TaskDataset& data,
                              const SimilarityTable& table, const SamplerConfig& sampler,
                              const SearchConfig& cfg, const Parameter<Scalar>* token,
                              const SupernetOptions& options) {
  sampler.validate();
  supernet.growth.set_adapter_mode(AdapterMode::kPlain);
  const bool with_token = token != nullptr && token->trainable();
  const double lr = with_token ? cfg.token_supernet_lr : cfg.supernet_lr;
  const Index per_epoch = batches_per_epoch(data.train.size(), cfg.batch_size, cfg.batches_per_epoch_min);
  Adam<Scalar> opt({lr, 0.9, 0.999, 1e-8, per_epoch * cfg.supernet_epochs});
  for (const auto& p : supernet.growth.parameters()) opt.add(p);
  opt.add(head.weight);
  opt.add(head.bias);
  if (with_token) opt.add(*token, cfg.token_lr / lr);

  Rng strategy_rng = Rng::stream(ctx.seed, sampler.stream + ".strategy");
  Rng path_rng = Rng::stream(ctx.seed, sampler.stream + ".path");
  SupernetReport report;
  SamplingMode mode = SamplingMode::kUniform;
  PathSpec current;

  TrainLoopSpec spec;
  spec.epochs = cfg.supernet_epochs;
  spec.min_batches = cfg.batches_per_epoch_min;
  spec.batch_size = cfg.batch_size;
  spec.smoothing = cfg.label_smoothing;
  spec.stream = "supernet";
  TrainLoopHooks<Scalar> hooks;
  hooks.on_epoch = [&](int) {
    mode = choose_epoch_strategy(sampler.eps1, strategy_rng);
    report.strategies.push_back(mode);
  };
  hooks.logits = [&](const Tensor<Scalar>& images, const DropPath& drop) {
    current = options.path_override ? options.path_override(path_rng)
                                    : sample_path(mode, supernet.space, table, ctx.task, path_rng);
    ++report.steps;
    return path_logits(ctx, &supernet.growth, current, head, images, token ? &token->var() : nullptr, drop);
  };
  if (options.after_backward) hooks.after_backward = [&] { options.after_backward(current); };
  report.epoch_loss = run_train_loop(spec, hooks, data, opt, ctx.seed);
  if (ctx.log) {
    for (std::size_t e = 0; e < report.epoch_loss.size(); ++e) {
      RunRecord r;
      r.task = ctx.task;
      r.phase = "supernet";
      r.epoch_or_gen = static_cast<int>(e);
      r.strategy = options.path_override ? "forced" : to_string(report.strategies[e]);
      r.loss = report.epoch_loss[e];
      ctx.log->write(r);
    }
  }
  return report;
}

template <typename Scalar>
double evaluate_candidate(const SearchContext<Scalar>& ctx, const Supernet<Scalar>& supernet,
                          const Linear<Scalar>& head, const PathSpec& path, const Dataset& val,
                          const Var<Scalar>* token, Index batch_size) {
  if (val.empty()) throw InputError("evaluate_candidate: empty validation split");
  return top1_accuracy(predict_logits(ctx, &supernet.growth, path, head, val, token, batch_size), val.labels);
}

template <typename Scalar>
FinetuneResult<Scalar> finetune_target(const SearchContext<Scalar>& ctx, const PathSpec& path,
                                       const TaskDataset& data, const SearchConfig& cfg,
                                       const Parameter<Scalar>* token) {
  const std::string prefix = "task" + std::to_string(ctx.task);
  Rng init_rng = Rng::stream(ctx.seed, "finetune.init");
  FinetuneResult<Scalar> res;
  res.growth = GrowthParams<Scalar>::for_path(*ctx.bank, path, init_rng);
  res.growth.set_adapter_mode(AdapterMode::kResidual);
  res.head = Linear<Scalar>::create(prefix + ".head", ctx.bank->dim(), data.num_classes, init_rng);
  if (token) {
    res.token = token->clone(prefix + ".token");
    res.token->set_trainable(true);
  }

  const Index per_epoch = batches_per_epoch(data.train.size(), cfg.batch_size, cfg.finetune_batches_min);
  Adam<Scalar> opt({cfg.finetune_lr, 0.9, 0.999, 1e-8, per_epoch * cfg.finetune_epochs});
  for (const auto& p : res.growth.parameters()) opt.add(p);
  opt.add(res.head.weight);
  opt.add(res.head.bias);
  if (res.token) opt.add(*res.token, cfg.token_finetune_lr / cfg.finetune_lr);

  TrainLoopSpec spec;
  spec.epochs = cfg.finetune_epochs;
  spec.min_batches = cfg.finetune_batches_min;
  spec.batch_size = cfg.batch_size;
  spec.smoothing = cfg.label_smoothing;
  spec.drop_path = cfg.finetune_drop_path;
  spec.stream = "finetune";
  TrainLoopHooks<Scalar> hooks;
  hooks.logits = [&](const Tensor<Scalar>& images, const DropPath& drop) {
    return path_logits(ctx, &res.growth, path, res.head, images, res.token ? &res.token->var() : nullptr, drop);
  };
  res.epoch_loss = run_train_loop(spec, hooks, data, opt, ctx.seed);
  if (ctx.log) {
    for (std::size_t e = 0; e < res.epoch_loss.size(); ++e) {
      RunRecord r;
      r.task = ctx.task;
      r.phase = "finetune";
      r.epoch_or_gen = static_cast<int>(e);
      r.loss = res.epoch_loss[e];
      ctx.log->write(r);
    }
  }
  return res;
}

#define AHIP_INSTANTIATE_NAS(S)                                                                        \
  template Var<S> path_logits<S>(const SearchContext<S>&, const GrowthParams<S>*, const PathSpec&,     \
                                 const Linear<S>&, const Tensor<S>&, const Var<S>*, const DropPath&);  \
  template Tensor<S> predict_logits<S>(const SearchContext<S>&, const GrowthParams<S>*,                \
                                       const PathSpec&, const Linear<S>&, const Dataset&,              \
                                       const Var<S>*, Index);                                          \
  template double top1_accuracy<S>(const Tensor<S>&, const std::vector<int>&);                         \
  template std::vector<double> run_train_loop<S>(const TrainLoopSpec&, const TrainLoopHooks<S>&,       \
                                                 const TaskDataset&, Adam<S>&, std::uint64_t);         \
  template SupernetReport train_supernet<S>(const SearchContext<S>&, Supernet<S>&, const Linear<S>&,   \
                                            const TaskDataset&, const SimilarityTable&,                \
                                            const SamplerConfig&, const SearchConfig&,                 \
                                            const Parameter<S>*, const SupernetOptions&);              \
  template double evaluate_candidate<S>(const SearchContext<S>&, const Supernet<S>&, const Linear<S>&, \
                                        const PathSpec&, const Dataset&, const Var<S>*, Index);        \
  template FinetuneResult<S> finetune_target<S>(const SearchContext<S>&, const PathSpec&,              \
                                                const TaskDataset&, const SearchConfig&,               \
                                                const Parameter<S>*);

AHIP_INSTANTIATE_NAS(float)
AHIP_INSTANTIATE_NAS(double)

}  // namespace ahip
