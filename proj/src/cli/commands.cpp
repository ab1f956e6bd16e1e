#include "ahip/cli/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "ahip/experts/arch_export.hpp"
#include "ahip/numerics/errors.hpp"
#include "ahip/taskdata/splits.hpp"

namespace ahip {

namespace fs = std::filesystem;

namespace {

void write_file(const std::string& path, const std::string& text) {
  fs::create_directories(fs::path(path).parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

TaskDataset load_stream_task(const RunConfig& cfg, const std::vector<TaskSource>& sources, int task) {
  if (task < 1 || task > static_cast<int>(sources.size())) {
    throw UsageError("task " + std::to_string(task) + " is not in the stream (" + std::to_string(sources.size()) + " tasks)");
  }
  const TaskDataset raw = load_task(sources[static_cast<std::size_t>(task - 1)]);
  return make_splits(raw, cfg.val_fraction, Rng::stream(cfg.seed, "split.task" + std::to_string(task)).key());
}

std::vector<TaskDataset> load_stream_prefix(const RunConfig& cfg, int tasks) {
  const auto sources = cfg.task_sources();
  std::vector<TaskDataset> out;
  for (int t = 1; t <= tasks; ++t) out.push_back(load_stream_task(cfg, sources, t));
  return out;
}

AccuracyMatrix matrix_from_checkpoint(const Checkpoint& ck) {
  AccuracyMatrix m;
  if (!ck.contains("metrics.matrix")) return m;
  const auto j = nlohmann::json::parse(ck.get_text("metrics.matrix"));
  for (std::size_t n = 0; n < j.size(); ++n) {
    for (std::size_t i = 0; i < j[n].size(); ++i) m.set(static_cast<int>(n + 1), static_cast<int>(i + 1), j[n][i].get<double>());
  }
  return m;
}

void matrix_to_checkpoint(Checkpoint& ck, const AccuracyMatrix& m) {
  nlohmann::json j = nlohmann::json::array();
  for (int n = 1; n <= m.size(); ++n) j.push_back(m.row(n));
  ck.put_text("metrics.matrix", j.dump());
}

template <typename Scalar>
std::vector<PathSpec> paths_of(const LifelongModel<Scalar>& model) {
  std::vector<PathSpec> out;
  for (const auto& r : model.records()) out.push_back(r.path);
  return out;
}

template <typename Scalar>
std::string params_table(const LifelongModel<Scalar>& model) {
  std::string out = "task\tname\tprojection\tadapter\thead\ttoken\tbackbone\ttotal\n";
  for (const auto& r : model.records()) {
    out += std::to_string(r.task) + "\t" + r.name + "\t" + std::to_string(r.added.projection) + "\t" +
           std::to_string(r.added.adapter) + "\t" + std::to_string(r.added.head) + "\t" +
           std::to_string(r.added.token) + "\t" + std::to_string(r.added.backbone()) + "\t" +
           std::to_string(r.added.total()) + "\n";
  }
  return out;
}

std::string curves_table(const std::string& jsonl) {
  std::string out = "task\tphase\tepoch_or_gen\tloss\tfitness_best\tfitness_mean\n";
  std::istringstream in(jsonl);
  std::string line;
  auto num = [](const nlohmann::json& v) { return v.is_null() ? std::string("-") : fixed(v.get<double>(), 6); };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    out += std::to_string(j["task"].get<int>()) + "\t" + j["phase"].get<std::string>() + "\t" +
           std::to_string(j["epoch_or_gen"].get<int>()) + "\t" + num(j["loss"]) + "\t" + num(j["fitness_best"]) +
           "\t" + num(j["fitness_mean"]) + "\n";
  }
  return out;
}

template <typename Scalar>
LifelongModel<Scalar> load_model(const RunConfig& cfg, const Checkpoint& ck) {
  if (ck.precision_bits() != cfg.precision) {
    throw UsageError("checkpoint precision " + std::to_string(ck.precision_bits()) + " differs from config precision " +
                     std::to_string(cfg.precision));
  }
  LifelongModel<Scalar> model = LifelongModel<Scalar>::load(ck, &cfg.model);
  const ViTConfig& a = model.config().vit;
  const ViTConfig& b = cfg.model.vit;
  if (a.image_size != b.image_size || a.patch_size != b.patch_size || a.channels != b.channels || a.depth != b.depth ||
      a.embed_dim != b.embed_dim || a.num_heads != b.num_heads || a.mlp_ratio != b.mlp_ratio) {
    throw UsageError("checkpoint model geometry differs from the config");
  }
  return model;
}

template <typename Scalar>
void write_exports(const RunPaths& paths, const LifelongModel<Scalar>& model) {
  const auto p = paths_of(model);
  write_file(paths.file("arch.jsonl"), arch_to_machine(p));
  write_file(paths.file("arch.txt"), arch_to_grid(p));
  write_file(paths.file("params.tsv"), params_table(model));
  std::string log;
  for (int t = 1; t <= model.num_tasks(); ++t) {
    if (fs::exists(paths.task_log(t))) log += read_file(paths.task_log(t));
  }
  write_file(paths.file("run.log"), log);
  write_file(paths.file("curves.tsv"), curves_table(log));
}

template <typename Scalar>
void save_state(const RunPaths& paths, const LifelongModel<Scalar>& model, const AccuracyMatrix& matrix) {
  Checkpoint ck(static_cast<int>(sizeof(Scalar) * 8));
  model.save(ck);
  matrix_to_checkpoint(ck, matrix);
  fs::create_directories(fs::path(paths.task_checkpoint(model.num_tasks())).parent_path());
  ck.save(paths.task_checkpoint(model.num_tasks()));
  ck.save(paths.checkpoint());
  write_exports(paths, model);
}

template <typename Scalar>
void pretrain_impl(const RunConfig& cfg, std::ostream& msg) {
  const RunPaths paths{cfg.out};
  const auto sources = cfg.task_sources();
  const TaskDataset data = load_stream_task(cfg, sources, 1);
  write_file(paths.file("config.txt"), cfg.to_text());
  std::ostringstream log_text;
  RunLog log(&log_text);
  LifelongModel<Scalar> model(cfg.model);
  model.set_log(&log);
  const auto& rec = model.learn_first_task(data);
  write_file(paths.task_log(1), log_text.str());
  AccuracyMatrix matrix;
  matrix.set(1, 1, rec.test_accuracy);
  save_state(paths, model, matrix);
  msg << "task 1 (" << rec.name << "): test accuracy " << fixed(rec.test_accuracy) << "\n";
}

template <typename Scalar>
void learn_impl(const RunConfig& cfg, int task, std::ostream& msg) {
  const RunPaths paths{cfg.out};
  int previous = task - 1;
  if (task == 0) {
    if (!fs::exists(paths.checkpoint())) throw UsageError("no checkpoint in " + cfg.out + " (run pretrain first)");
    previous = LifelongModel<Scalar>::load(Checkpoint::load(paths.checkpoint())).num_tasks();
    task = previous + 1;
  }
  if (task < 2) throw UsageError("learn: task must be at least 2 (task 1 is learned by pretrain)");
  if (!fs::exists(paths.task_checkpoint(previous))) {
    throw UsageError("learn: missing " + paths.task_checkpoint(previous) + " (learn task " + std::to_string(previous) + " first)");
  }
  const Checkpoint ck = Checkpoint::load(paths.task_checkpoint(previous));
  LifelongModel<Scalar> model = load_model<Scalar>(cfg, ck);
  if (model.num_tasks() != previous) throw IntegrityError("checkpoint task count mismatch");
  AccuracyMatrix matrix = matrix_from_checkpoint(ck);
  const auto sources = cfg.task_sources();
  std::vector<TaskDataset> data;
  for (int t = 1; t <= task; ++t) data.push_back(load_stream_task(cfg, sources, t));
  std::ostringstream log_text;
  RunLog log(&log_text);
  model.set_log(&log);
  const auto& rec = model.learn_task(data.back());
  write_file(paths.task_log(task), log_text.str());
  const auto row = replay_accuracies(model, data);
  for (int i = 1; i <= task; ++i) matrix.set(task, i, row[static_cast<std::size_t>(i - 1)]);
  save_state(paths, model, matrix);
  msg << "task " << task << " (" << rec.name << "): test accuracy " << fixed(rec.test_accuracy) << ", added "
      << rec.added.total() << " parameters, path " << arch_to_grid({rec.path});
}

template <typename Scalar>
std::string eval_impl(const RunConfig& cfg, const std::string& scope) {
  if (scope != "task" && scope != "class") throw UsageError("eval --mode must be task or class");
  const RunPaths paths{cfg.out};
  if (!fs::exists(paths.checkpoint())) throw UsageError("no checkpoint in " + cfg.out);
  const Checkpoint ck = Checkpoint::load(paths.checkpoint());
  const LifelongModel<Scalar> model = load_model<Scalar>(cfg, ck);
  const AccuracyMatrix matrix = matrix_from_checkpoint(ck);
  const int n = model.num_tasks();
  const auto data = load_stream_prefix(cfg, n);
  const auto row = replay_accuracies(model, data);
  for (int i = 1; i <= n; ++i) {
    if (row[static_cast<std::size_t>(i - 1)] != matrix.at(n, i)) {
      throw IntegrityError("replayed accuracy of task " + std::to_string(i) + " differs from the stored matrix");
    }
  }
  for (int i = 1; i <= n; ++i) {
    if (model.probe_hash(i, data[static_cast<std::size_t>(i - 1)].test) != model.record(i).probe_hash) {
      throw IntegrityError("probe logits of task " + std::to_string(i) + " changed since it was learned");
    }
  }
  std::string out = "# metrics\n";
  out += "tasks\t" + std::to_string(n) + "\n";
  out += "precision\t" + std::to_string(cfg.precision) + "\n";
  out += "\n## accuracy_matrix\n" + matrix.to_text();
  out += "\n## summary\n";
  out += "average_accuracy\t" + fixed(average_accuracy(matrix, n)) + "\n";
  out += "average_forgetting\t" + fixed(average_forgetting(matrix, n)) + "\n";
  if (n >= 2) {
    std::vector<double> transfer;
    for (int i = 2; i <= n; ++i) transfer.push_back(matrix.at(i, i));
    out += "transfer_accuracy\t" + fixed(mean_transfer_accuracy(transfer)) + "\n";
  } else {
    out += "transfer_accuracy\t-\n";
  }
  out += "\n## parameters\n" + params_table(model);
  out += "\n## architecture\n" + arch_to_grid(paths_of(model));
  if (scope == "class" || cfg.class_incremental) {
    out += "\n## class_incremental\nmode\ttask_id_accuracy\taccuracy\n";
    for (CIMode mode : {CIMode::kMax, CIMode::kMinEntropy}) {
      const CIReport r = evaluate_class_incremental(model, data, mode);
      out += std::string(to_string(mode)) + "\t" + fixed(r.task_id_accuracy) + "\t" + fixed(r.accuracy) + "\n";
    }
  }
  write_file(paths.file("metrics.txt"), out);
  return out;
}

template <typename Scalar>
std::string study_impl(const RunConfig& cfg, int tasks) {
  const RunPaths paths{cfg.out};
  if (!fs::exists(paths.task_checkpoint(1))) throw UsageError("study: missing " + paths.task_checkpoint(1) + " (run pretrain first)");
  const LifelongModel<Scalar> model = load_model<Scalar>(cfg, Checkpoint::load(paths.task_checkpoint(1)));
  if (tasks == 0) tasks = static_cast<int>(cfg.task_sources().size());
  if (tasks < 2) throw UsageError("study: need at least two tasks");
  const auto data = load_stream_prefix(cfg, tasks);
  const StudyModel<Scalar> base = study_base(model);
  std::string out = "# component study\ntasks\t" + std::to_string(tasks) + "\nepochs\t" + std::to_string(cfg.study.epochs) +
                    "\n\ncomponent\ttransfer_accuracy\taverage_forgetting\tfinal_average_accuracy\n";
  for (Component c : cfg.study_components) {
    const StudyResult r = component_study(base, model.record(1).head, data, c, cfg.study);
    out += std::string(to_string(c)) + "\t" + fixed(r.transfer) + "\t" + fixed(r.forgetting) + "\t" +
           fixed(r.final_average) + "\n";
  }
  write_file(paths.file("study.txt"), out);
  return out;
}

template <typename Scalar>
std::string infer_ci_impl(const RunConfig& cfg, const std::string& mode_name) {
  const CIMode mode = ci_mode_from_string(mode_name.empty() ? "min_entropy" : mode_name);
  const RunPaths paths{cfg.out};
  if (!fs::exists(paths.checkpoint())) throw UsageError("no checkpoint in " + cfg.out);
  const LifelongModel<Scalar> model = load_model<Scalar>(cfg, Checkpoint::load(paths.checkpoint()));
  const auto data = load_stream_prefix(cfg, model.num_tasks());
  std::string out = "# class-incremental inference\nmode\t" + std::string(to_string(mode)) + "\n";
  out += "task\tsamples\ttask_id_accuracy\taccuracy\n";
  for (int t = 1; t <= model.num_tasks(); ++t) {
    const Dataset& test = data[static_cast<std::size_t>(t - 1)].test;
    const auto preds = model.predict_class_incremental(test, mode);
    Index task_hits = 0, hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      task_hits += preds[i].task == t;
      hits += preds[i].task == t && preds[i].label == test.labels[i];
    }
    const double n = static_cast<double>(preds.size());
    out += std::to_string(t) + "\t" + std::to_string(preds.size()) + "\t" + fixed(task_hits / n) + "\t" + fixed(hits / n) + "\n";
  }
  const CIReport all = evaluate_class_incremental(model, data, mode);
  out += "all\t-\t" + fixed(all.task_id_accuracy) + "\t" + fixed(all.accuracy) + "\n";
  write_file(paths.file("ci_" + std::string(to_string(mode)) + ".txt"), out);
  return out;
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e)) return kExitUsage;
  if (dynamic_cast<const NumericError*>(&e)) return kExitNumeric;
  return kExitData;
}

RunConfig resolve_config(const CommandOptions& opts) {
  std::map<std::string, std::string> kv;
  if (!opts.config_path.empty()) {
    if (!fs::exists(opts.config_path)) throw UsageError("no such config file " + opts.config_path);
    try {
      kv = read_key_values(opts.config_path);
    } catch (const FormatError& e) {
      throw UsageError(std::string("config: ") + e.what());
    }
  }
  if (opts.seed) kv["seed"] = std::to_string(*opts.seed);
  if (opts.out) kv["out"] = *opts.out;
  RunConfig cfg = RunConfig::from_key_values(kv);
  if (!cfg.data_manifest.empty() && fs::path(cfg.data_manifest).is_relative() && !opts.config_path.empty()) {
    cfg.data_manifest = (fs::path(opts.config_path).parent_path() / cfg.data_manifest).string();
  }
  return cfg;
}

std::string RunPaths::checkpoint() const { return file("checkpoint.ahip"); }
std::string RunPaths::task_checkpoint(int task) const { return file("ckpt/task" + std::to_string(task) + ".ahip"); }
std::string RunPaths::task_log(int task) const { return file("logs/task" + std::to_string(task) + ".jsonl"); }
std::string RunPaths::file(const std::string& name) const { return (fs::path(root) / name).string(); }

void cmd_pretrain(const RunConfig& cfg, std::ostream& msg) {
  cfg.precision == 64 ? pretrain_impl<double>(cfg, msg) : pretrain_impl<float>(cfg, msg);
}

void cmd_learn(const RunConfig& cfg, int task, std::ostream& msg) {
  cfg.precision == 64 ? learn_impl<double>(cfg, task, msg) : learn_impl<float>(cfg, task, msg);
}

std::string cmd_eval(const RunConfig& cfg, const std::string& scope) {
  return cfg.precision == 64 ? eval_impl<double>(cfg, scope) : eval_impl<float>(cfg, scope);
}

std::string cmd_study(const RunConfig& cfg, int tasks) {
  return cfg.precision == 64 ? study_impl<double>(cfg, tasks) : study_impl<float>(cfg, tasks);
}

std::string cmd_infer_ci(const RunConfig& cfg, const std::string& mode) {
  return cfg.precision == 64 ? infer_ci_impl<double>(cfg, mode) : infer_ci_impl<float>(cfg, mode);
}

void cmd_export_arch(const std::string& run_dir) {
  const RunPaths paths{run_dir};
  if (!fs::exists(paths.checkpoint())) throw UsageError("no checkpoint in " + run_dir);
  const Checkpoint ck = Checkpoint::load(paths.checkpoint());
  if (ck.precision_bits() == 64) {
    write_exports(paths, LifelongModel<double>::load(ck));
  } else {
    write_exports(paths, LifelongModel<float>::load(ck));
  }
}

}  // namespace ahip
