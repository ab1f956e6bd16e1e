#include "ahip/lifelong/lifelong_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "ahip/experts/arch_export.hpp"
#include "ahip/numerics/errors.hpp"

namespace ahip {

namespace {

using json = nlohmann::ordered_json;

json vit_to_json(const ViTConfig& c) {
  return {{"image_size", c.image_size}, {"patch_size", c.patch_size}, {"channels", c.channels},
          {"depth", c.depth},           {"embed_dim", c.embed_dim},   {"num_heads", c.num_heads},
          {"mlp_ratio", c.mlp_ratio},   {"drop_path_rate", c.drop_path_rate}, {"ln_eps", c.ln_eps}};
}

ViTConfig vit_from_json(const json& j) {
  ViTConfig c;
  c.image_size = j.at("image_size");
  c.patch_size = j.at("patch_size");
  c.channels = j.at("channels");
  c.depth = j.at("depth");
  c.embed_dim = j.at("embed_dim");
  c.num_heads = j.at("num_heads");
  c.mlp_ratio = j.at("mlp_ratio");
  c.drop_path_rate = j.at("drop_path_rate");
  c.ln_eps = j.at("ln_eps");
  return c;
}

std::string task_prefix(int task) { return "task" + std::to_string(task); }

template <typename Scalar>
Tensor<Scalar> all_images(const Dataset& d) {
  std::vector<Index> idx(static_cast<std::size_t>(d.size()));
  for (Index i = 0; i < d.size(); ++i) idx[static_cast<std::size_t>(i)] = i;
  return gather_images<Scalar>(d, idx);
}

template <typename Scalar>
double row_entropy(const Eigen::Ref<const RowMatrix<Scalar>>& row) {
  const double m = static_cast<double>(row.maxCoeff());
  double z = 0.0;
  for (Index j = 0; j < row.cols(); ++j) z += std::exp(static_cast<double>(row(0, j)) - m);
  double h = 0.0;
  for (Index j = 0; j < row.cols(); ++j) {
    const double p = std::exp(static_cast<double>(row(0, j)) - m) / z;
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

template <typename Scalar>
int row_argmax(const Eigen::Ref<const RowMatrix<Scalar>>& row) {
  Index best = 0;
  for (Index j = 1; j < row.cols(); ++j) {
    if (row(0, j) > row(0, best)) best = j;
  }
  return static_cast<int>(best);
}

void check_geometry(const ViTConfig& vit, const TaskDataset& data) {
  data.validate();
  if (data.channels != vit.channels || data.height != vit.image_size || data.width != vit.image_size) {
    throw InputError("task " + data.name + ": images must be " + std::to_string(vit.channels) + "x" +
                     std::to_string(vit.image_size) + "x" + std::to_string(vit.image_size));
  }
}

}  // namespace

const char* to_string(CIMode mode) { return mode == CIMode::kMax ? "max" : "min_entropy"; }

CIMode ci_mode_from_string(const std::string& name) {
  if (name == "max") return CIMode::kMax;
  if (name == "min_entropy" || name == "min-entropy") return CIMode::kMinEntropy;
  throw UsageError("unknown class-incremental mode '" + name + "'");
}

void LifelongConfig::validate() const {
  vit.validate();
  search.validate();
  sampler.validate();
  if (base_epochs <= 0 || base_batches_min <= 0 || !(base_lr > 0.0)) {
    throw UsageError("base training settings must be positive");
  }
  if (probe_size <= 0 || mean_token_batch <= 0) throw UsageError("probe_size and mean_token_batch must be positive");
  if (adapter_hidden() <= 0) throw UsageError("embed_dim too small for an adapter");
}

template <typename Scalar>
LifelongModel<Scalar>::LifelongModel(LifelongConfig config) : config_(std::move(config)) {
  config_.validate();
}

template <typename Scalar>
const TaskRecord<Scalar>& LifelongModel<Scalar>::record(int task) const {
  if (task < 1 || task > num_tasks()) throw InputError("no learned task " + std::to_string(task));
  return records_[static_cast<std::size_t>(task - 1)];
}

template <typename Scalar>
std::uint64_t LifelongModel<Scalar>::task_seed(int task) const {
  return Rng::stream(config_.seed, task_prefix(task)).key();
}

template <typename Scalar>
SearchContext<Scalar> LifelongModel<Scalar>::context(int task) const {
  return {&vit_, &bank_, task, task_seed(task), log_};
}

template <typename Scalar>
const Var<Scalar>* LifelongModel<Scalar>::token_var(int task, std::optional<Var<Scalar>>& holder) const {
  const auto& rec = record(task);
  if (!rec.token) return nullptr;
  holder.emplace(*rec.token, false);
  return &*holder;
}

template <typename Scalar>
void LifelongModel<Scalar>::finish_record(TaskRecord<Scalar>& rec, const TaskDataset& data) {
  records_.push_back(rec);
  auto& stored = records_.back();
  stored.test_accuracy = evaluate(rec.task, data.test);
  stored.probe_hash = probe_hash(rec.task, data.test);
  if (log_) {
    RunRecord r;
    r.task = rec.task;
    r.phase = "consolidate";
    r.fitness_best = std::isnan(rec.val_fitness) ? NAN : rec.val_fitness;
    r.params_added = rec.added.total();
    log_->write(r);
  }
}

template <typename Scalar>
const TaskRecord<Scalar>& LifelongModel<Scalar>::learn_first_task(const TaskDataset& data) {
  if (num_tasks() != 0) throw UsageError("learn_first_task: model already has tasks");
  check_geometry(config_.vit, data);
  const Index d = config_.vit.embed_dim;
  Rng init = Rng::stream(config_.seed, "task1.init");
  vit_ = VisionTransformer<Scalar>::create(config_.vit, init);
  std::vector<Linear<Scalar>> proj;
  for (int l = 0; l < config_.vit.depth; ++l) {
    proj.push_back(Linear<Scalar>::create("task1.b" + std::to_string(l) + ".new", d, d, init));
  }
  TaskRecord<Scalar> rec;
  rec.task = 1;
  rec.name = data.name;
  rec.num_classes = data.num_classes;
  rec.head = Linear<Scalar>::create("task1.head", d, data.num_classes, init);
  rec.val_fitness = NAN;

  const Index per_epoch = batches_per_epoch(data.train.size(), config_.search.batch_size, config_.base_batches_min);
  Adam<Scalar> opt({config_.base_lr, 0.9, 0.999, 1e-8, per_epoch * config_.base_epochs});
  for (const auto& p : vit_.parameters()) opt.add(p);
  for (const auto& lin : proj) {
    opt.add(lin.weight);
    opt.add(lin.bias);
  }
  opt.add(rec.head.weight);
  opt.add(rec.head.bias);

  std::vector<SlotFn<Scalar>> slots;
  for (const auto& lin : proj) slots.push_back([lin](const Var<Scalar>& u) { return lin(u); });
  TrainLoopSpec spec;
  spec.epochs = config_.base_epochs;
  spec.min_batches = config_.base_batches_min;
  spec.batch_size = config_.search.batch_size;
  spec.smoothing = config_.search.label_smoothing;
  spec.stream = "base";
  TrainLoopHooks<Scalar> hooks;
  hooks.logits = [&](const Tensor<Scalar>& images, const DropPath& drop) {
    return rec.head(vit_.forward(images, slots, nullptr, drop));
  };
  const auto losses = run_train_loop(spec, hooks, data, opt, task_seed(1));
  if (log_) {
    for (std::size_t e = 0; e < losses.size(); ++e) {
      RunRecord r;
      r.task = 1;
      r.phase = "base";
      r.epoch_or_gen = static_cast<int>(e);
      r.loss = losses[e];
      log_->write(r);
    }
  }

  vit_.set_trainable(false);
  rec.head.set_trainable(false);
  const auto means = slot_mean_tokens<Scalar>(vit_, slots, all_images<Scalar>(data.train), nullptr,
                                      config_.mean_token_batch);
  bank_ = ExpertBank<Scalar>(config_.vit.depth, d, config_.adapter_hidden());
  rec.path.task = 1;
  for (int l = 0; l < config_.vit.depth; ++l) {
    const int id = bank_.add_expert(l, proj[static_cast<std::size_t>(l)], means[static_cast<std::size_t>(l)], 1);
    rec.path.ops.push_back({OpKind::kNew, -1, id});
    rec.added.projection += new_op_parameters(d);
  }
  rec.added.head = rec.head.parameter_count();
  finish_record(rec, data);
  return records_.back();
}

template <typename Scalar>
Parameter<Scalar> LifelongModel<Scalar>::learn_task_token(const TaskDataset& data, int task) const {
  if (num_tasks() == 0) throw UsageError("learn_task_token: no base model");
  check_geometry(config_.vit, data);
  const std::string prefix = task_prefix(task);
  Parameter<Scalar> token(prefix + ".token", vit_.class_token().value(), true);
  Rng init = Rng::stream(task_seed(task), "token.init");
  Linear<Scalar> head = Linear<Scalar>::create(prefix + ".token_head", bank_.dim(), data.num_classes, init);
  if (config_.search.token_epochs == 0) return token;
  const auto ctx = context(task);
  const PathSpec& base = record(1).path;
  const Index per_epoch = batches_per_epoch(data.train.size(), config_.search.batch_size,
                                            config_.search.batches_per_epoch_min);
  Adam<Scalar> opt({config_.search.token_lr, 0.9, 0.999, 1e-8, per_epoch * config_.search.token_epochs});
  opt.add(token);
  opt.add(head.weight);
  opt.add(head.bias);
  TrainLoopSpec spec;
  spec.epochs = config_.search.token_epochs;
  spec.min_batches = config_.search.batches_per_epoch_min;
  spec.batch_size = config_.search.batch_size;
  spec.smoothing = config_.search.label_smoothing;
  spec.stream = "token";
  TrainLoopHooks<Scalar> hooks;
  hooks.logits = [&](const Tensor<Scalar>& images, const DropPath& drop) {
    return path_logits<Scalar>(ctx, nullptr, base, head, images, &token.var(), drop);
  };
  const auto losses = run_train_loop(spec, hooks, data, opt, ctx.seed);
  if (log_) {
    for (std::size_t e = 0; e < losses.size(); ++e) {
      RunRecord r;
      r.task = task;
      r.phase = "token";
      r.epoch_or_gen = static_cast<int>(e);
      r.loss = losses[e];
      log_->write(r);
    }
  }
  return token;
}

template <typename Scalar>
SimilarityTable LifelongModel<Scalar>::similarity_table(const TaskDataset& data, const Var<Scalar>* token) const {
  const auto probed = compute_mean_tokens(vit_, bank_, all_images<Scalar>(data.train), token, config_.mean_token_batch);
  std::vector<std::vector<double>> raw(static_cast<std::size_t>(bank_.depth()));
  for (int l = 0; l < bank_.depth(); ++l) {
    for (int e = 0; e < bank_.size(l); ++e) {
      const Tensor<double> mu_hat = probed[l][e].template cast<double>();
      const Tensor<double> mu = bank_.entry(l, e).mean_token.template cast<double>();
      raw[l].push_back(cosine_similarity({mu_hat.data(), static_cast<std::size_t>(mu_hat.numel())},
                                         {mu.data(), static_cast<std::size_t>(mu.numel())}));
    }
  }
  return build_similarity_table(raw);
}

template <typename Scalar>
const TaskRecord<Scalar>& LifelongModel<Scalar>::learn_task(const TaskDataset& data) {
  if (num_tasks() == 0) throw UsageError("learn_task: learn the first task first");
  check_geometry(config_.vit, data);
  if (data.val.empty()) throw InputError("task " + data.name + ": a validation split is required");
  const int t = num_tasks() + 1;
  const std::string prefix = task_prefix(t);
  const auto ctx = context(t);
  const Index d = bank_.dim(), hidden = bank_.adapter_hidden();

  std::optional<Parameter<Scalar>> token, pre_search_token;
  if (config_.task_token) {
    token = learn_task_token(data, t);
    pre_search_token = token->clone();
  }
  const Var<Scalar>* tv = token ? &token->var() : nullptr;
  const SimilarityTable table = similarity_table(data, tv);

  Rng init = Rng::stream(ctx.seed, "supernet.init");
  Supernet<Scalar> supernet = construct_supernet(bank_, t, init);
  Linear<Scalar> search_head = Linear<Scalar>::create(prefix + ".search_head", d, data.num_classes, init);
  train_supernet(ctx, supernet, search_head, data, table, config_.sampler, config_.search,
                 token ? &*token : nullptr);

  const FitnessFn fitness = [&](const PathSpec& p) {
    return evaluate_candidate(ctx, supernet, search_head, p, data.val, tv, config_.search.eval_batch_size);
  };
  const CostFn cost = [&](const PathSpec& p) { return path_parameter_cost(p, d, hidden).backbone(); };
  Rng evo_rng = Rng::stream(ctx.seed, "evolution");
  const auto initial = initial_population(supernet.space, table, config_.search.population,
                                          config_.sampler.eps2, t, evo_rng);
  const EvolutionResult evo = evolve(supernet.space, initial, fitness, cost, config_.search, evo_rng, log_, t);

  auto ft = finetune_target(ctx, evo.best.path, data, config_.search,
                            pre_search_token ? &*pre_search_token : nullptr);
  ft.head.set_trainable(false);
  if (ft.token) ft.token->set_trainable(false);
  const auto means = path_mean_tokens(vit_, bank_, &ft.growth, evo.best.path, all_images<Scalar>(data.train),
                                      ft.token ? &ft.token->var() : nullptr, config_.mean_token_batch);
  const Consolidation cons = consolidate(bank_, evo.best.path, ft.growth, means, t);

  TaskRecord<Scalar> rec;
  rec.task = t;
  rec.name = data.name;
  rec.num_classes = data.num_classes;
  rec.path = cons.path;
  rec.head = ft.head.clone(prefix + ".head");
  rec.head.set_trainable(false);
  if (ft.token) rec.token = ft.token->value();
  rec.added = cons.added;
  rec.added.head = rec.head.parameter_count();
  rec.added.token = rec.token ? rec.token->numel() : 0;
  rec.val_fitness = evo.best.fitness;
  finish_record(rec, data);
  return records_.back();
}

template <typename Scalar>
Tensor<Scalar> LifelongModel<Scalar>::task_logits(int task, const Dataset& data) const {
  const auto& rec = record(task);
  std::optional<Var<Scalar>> holder;
  const Var<Scalar>* tv = token_var(task, holder);
  return predict_logits<Scalar>(context(task), nullptr, rec.path, rec.head, data, tv, config_.search.eval_batch_size);
}

template <typename Scalar>
double LifelongModel<Scalar>::evaluate(int task, const Dataset& data) const {
  return top1_accuracy(task_logits(task, data), data.labels);
}

template <typename Scalar>
std::uint64_t LifelongModel<Scalar>::probe_hash(int task, const Dataset& data) const {
  return task_logits(task, head_samples(data, config_.probe_size)).content_hash();
}

template <typename Scalar>
std::vector<Tensor<double>> LifelongModel<Scalar>::block_similarities(const Dataset& data) const {
  NoGradGuard guard;
  const int depth = bank_.depth();
  std::vector<Tensor<double>> out;
  for (int t = 1; t <= num_tasks(); ++t) {
    const auto& rec = record(t);
    std::optional<Var<Scalar>> holder;
    const Var<Scalar>* tv = token_var(t, holder);
    const auto slots = resolve_path<Scalar>(bank_, nullptr, rec.path);
    Tensor<double> sim = Tensor<double>::filled(Shape{data.size(), depth}, NAN);
    for (const auto& idx : sequential_batches(data.size(), config_.search.eval_batch_size)) {
      const Index count = static_cast<Index>(idx.size());
      Var<Scalar> x = vit_.patch_embed(gather_images<Scalar>(data, idx), tv);
      for (int l = 0; l < depth; ++l) {
        SlotFn<Scalar> tapped;
        if (slots[l]) {
          const Tensor<double> mu = bank_.entry(l, rec.path.ops[l].resolved_entry()).mean_token.template cast<double>();
          tapped = [&, l, mu](const Var<Scalar>& u) {
            Var<Scalar> o = slots[l](u);
            const auto m = o.value().matrix();
            const Index len = m.rows() / count;
            for (Index b = 0; b < count; ++b) {
              const VectorX<double> x0 = m.row(b * len).transpose().template cast<double>();
              sim.matrix()(idx.front() + b, l) =
                  cosine_similarity({x0.data(), static_cast<std::size_t>(x0.size())},
                                    {mu.data(), static_cast<std::size_t>(mu.numel())});
            }
            return o;
          };
        }
        x = vit_.block_forward(l, x, count, tapped);
      }
    }
    out.push_back(std::move(sim));
  }
  return out;
}

template <typename Scalar>
std::vector<CIPrediction> LifelongModel<Scalar>::predict_class_incremental(const Dataset& data, CIMode mode) const {
  if (num_tasks() == 0) throw UsageError("predict_class_incremental: no learned tasks");
  std::vector<Tensor<Scalar>> logits;
  for (int t = 1; t <= num_tasks(); ++t) logits.push_back(task_logits(t, data));
  std::vector<Tensor<double>> sims;
  if (mode == CIMode::kMax) sims = block_similarities(data);
  std::vector<CIPrediction> out;
  for (Index i = 0; i < data.size(); ++i) {
    int best = 0;
    double best_score = 0.0;
    for (int t = 0; t < num_tasks(); ++t) {
      double score;
      if (mode == CIMode::kMax) {
        score = -std::numeric_limits<double>::infinity();
        const auto row = sims[static_cast<std::size_t>(t)].matrix().row(i);
        for (Index l = 0; l < row.size(); ++l) {
          if (!std::isnan(row(l))) score = std::max(score, row(l));
        }
      } else {
        score = -row_entropy<Scalar>(logits[static_cast<std::size_t>(t)].matrix().row(i));
      }
      if (t == 0 || score > best_score) {
        best = t;
        best_score = score;
      }
    }
    out.push_back({best + 1, row_argmax<Scalar>(logits[static_cast<std::size_t>(best)].matrix().row(i))});
  }
  return out;
}

template <typename Scalar>
void LifelongModel<Scalar>::save(Checkpoint& ck) const {
  json meta;
  meta["vit"] = vit_to_json(config_.vit);
  meta["tasks"] = num_tasks();
  ck.put_text("model.meta", meta.dump());
  if (num_tasks() == 0) return;
  vit_.save(ck);
  bank_.save(ck);
  for (const auto& rec : records_) {
    const std::string prefix = task_prefix(rec.task);
    json j;
    j["task"] = rec.task;
    j["name"] = rec.name;
    j["num_classes"] = rec.num_classes;
    j["path"] = json::parse(arch_to_machine({rec.path}));
    j["added"] = {{"projection", rec.added.projection}, {"adapter", rec.added.adapter},
                  {"head", rec.added.head}, {"token", rec.added.token}};
    j["test_accuracy"] = rec.test_accuracy;
    j["val_fitness"] = std::isnan(rec.val_fitness) ? json(nullptr) : json(rec.val_fitness);
    j["probe_hash"] = std::to_string(rec.probe_hash);
    ck.put_text(prefix + ".record", j.dump());
    ck.put(prefix + ".head.weight", rec.head.weight.value());
    ck.put(prefix + ".head.bias", rec.head.bias.value());
    if (rec.token) ck.put(prefix + ".token", *rec.token);
  }
}

template <typename Scalar>
LifelongModel<Scalar> LifelongModel<Scalar>::load(const Checkpoint& ck, const LifelongConfig* config) {
  json meta;
  try {
    meta = json::parse(ck.get_text("model.meta"));
  } catch (const json::exception& e) {
    throw FormatError(std::string("model.meta: ") + e.what());
  }
  LifelongConfig cfg = config ? *config : LifelongConfig{};
  try {
    cfg.vit = vit_from_json(meta.at("vit"));
  } catch (const json::exception& e) {
    throw FormatError(std::string("model.meta: ") + e.what());
  }
  LifelongModel model(cfg);
  const int tasks = meta.value("tasks", 0);
  if (tasks == 0) return model;
  model.vit_ = VisionTransformer<Scalar>::load(ck, cfg.vit);
  model.vit_.set_trainable(false);
  model.bank_ = ExpertBank<Scalar>::load(ck);
  for (int t = 1; t <= tasks; ++t) {
    const std::string prefix = task_prefix(t);
    TaskRecord<Scalar> rec;
    try {
      const json j = json::parse(ck.get_text(prefix + ".record"));
      rec.task = j.at("task");
      rec.name = j.at("name");
      rec.num_classes = j.at("num_classes");
      const auto paths = arch_from_machine(j.at("path").dump());
      if (paths.size() != 1) throw FormatError(prefix + ": expected one path");
      rec.path = paths.front();
      const json& a = j.at("added");
      rec.added = {a.at("projection"), a.at("adapter"), a.at("head"), a.at("token")};
      rec.test_accuracy = j.at("test_accuracy");
      rec.val_fitness = j.at("val_fitness").is_null() ? NAN : j.at("val_fitness").get<double>();
      rec.probe_hash = std::stoull(j.at("probe_hash").get<std::string>());
    } catch (const json::exception& e) {
      throw FormatError(prefix + ".record: " + e.what());
    }
    rec.head = {Parameter<Scalar>(prefix + ".head.weight", ck.get<Scalar>(prefix + ".head.weight"), false),
                Parameter<Scalar>(prefix + ".head.bias", ck.get<Scalar>(prefix + ".head.bias"), false)};
    if (ck.contains(prefix + ".token")) rec.token = ck.get<Scalar>(prefix + ".token");
    if (rec.path.depth() != model.bank_.depth()) throw IntegrityError(prefix + ": path depth mismatch");
    for (const auto& op : rec.path.ops) {
      if (op.kind != OpKind::kSkip) model.bank_.entry(static_cast<int>(&op - rec.path.ops.data()), op.resolved_entry());
    }
    model.records_.push_back(std::move(rec));
  }
  return model;
}

template <typename Scalar>
std::vector<double> replay_accuracies(const LifelongModel<Scalar>& model, const std::vector<TaskDataset>& tasks) {
  if (static_cast<int>(tasks.size()) < model.num_tasks()) throw InputError("replay: fewer datasets than tasks");
  std::vector<double> out;
  for (int t = 1; t <= model.num_tasks(); ++t) out.push_back(model.evaluate(t, tasks[static_cast<std::size_t>(t - 1)].test));
  return out;
}

template <typename Scalar>
CIReport evaluate_class_incremental(const LifelongModel<Scalar>& model, const std::vector<TaskDataset>& tasks,
                                    CIMode mode) {
  Index total = 0, task_hits = 0, hits = 0;
  for (int t = 1; t <= model.num_tasks(); ++t) {
    const Dataset& test = tasks.at(static_cast<std::size_t>(t - 1)).test;
    const auto preds = model.predict_class_incremental(test, mode);
    for (std::size_t i = 0; i < preds.size(); ++i) {
      ++total;
      if (preds[i].task == t) {
        ++task_hits;
        hits += preds[i].label == test.labels[i];
      }
    }
  }
  if (total == 0) throw InputError("evaluate_class_incremental: no test samples");
  return {static_cast<double>(task_hits) / static_cast<double>(total),
          static_cast<double>(hits) / static_cast<double>(total)};
}

template class LifelongModel<float>;
template class LifelongModel<double>;
template std::vector<double> replay_accuracies<float>(const LifelongModel<float>&, const std::vector<TaskDataset>&);
template std::vector<double> replay_accuracies<double>(const LifelongModel<double>&, const std::vector<TaskDataset>&);
template CIReport evaluate_class_incremental<float>(const LifelongModel<float>&, const std::vector<TaskDataset>&, CIMode);
template CIReport evaluate_class_incremental<double>(const LifelongModel<double>&, const std::vector<TaskDataset>&, CIMode);

}  // namespace ahip
