// One pass/fail line per acceptance criterion; --criterion N runs one.
#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "ahip/lifelong/lifelong_model.hpp"
#include "ahip/taskdata/splits.hpp"
#include "ahip/taskdata/synth.hpp"
#include "evolution_oracle.hpp"
#include "op_suite.hpp"
#include "sampling_oracle.hpp"

using namespace ahip;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

std::vector<TaskDataset> toy_stream(std::uint64_t split_seed, const std::vector<SynthTaskSpec>& specs) {
  std::vector<TaskDataset> out;
  for (std::size_t t = 0; t < specs.size(); ++t) {
    out.push_back(make_splits(synth_task(specs[t]), 0.1, Rng::stream(split_seed, "split.task" + std::to_string(t + 1)).key()));
  }
  return out;
}

std::vector<TaskDataset> toy_stream(std::uint64_t split_seed, int tasks) {
  auto specs = toy_vdd_stream();
  specs.resize(static_cast<std::size_t>(tasks));
  return toy_stream(split_seed, specs);
}

LifelongConfig tiny_config(std::uint64_t seed) {
  LifelongConfig c;
  c.seed = seed;
  return c;
}

int count_ops(const PathSpec& p, OpKind kind) {
  return static_cast<int>(std::count_if(p.ops.begin(), p.ops.end(), [&](const GrowOp& op) { return op.kind == kind; }));
}

// 1: every differentiable op and a full block against central differences
Outcome gradient_oracle() {
  double worst = 0.0;
  std::string worst_name;
  int checks = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (const auto& c : oracle::differentiable_ops()) {
      const auto r = oracle::check_op(c, seed);
      ++checks;
      if (r.max_relative_error > worst) worst = r.max_relative_error, worst_name = c.name;
    }
    const double block = oracle::vit_block_gradient_error(seed);
    ++checks;
    if (block > worst) worst = block, worst_name = "vit_block";
  }
  return {worst < 1e-4, std::to_string(checks) + " checks over 20 seeds, max relative error " + fmt(worst, 3) + " (" + worst_name + ")"};
}

// 2: hierarchical sampler frequencies against the compound law
Outcome sampling_law() {
  Rng tables(2024), draws(7);
  double worst = 0.0;
  int blocks = 0;
  for (int t = 0; t < 10; ++t) {
    const auto raw = oracle::random_raw_table(tables);
    for (std::size_t b = 0; b < raw.size(); ++b, ++blocks) worst = std::max(worst, oracle::sampler_tv(raw, b, 1'000'000, draws));
  }
  return {worst < 0.005, "10 tables, " + std::to_string(blocks) + " blocks, 1e6 draws each, max TV " + fmt(worst, 3)};
}

// 3: five tasks, exact zero forgetting and bit-identical probe logits
Outcome zero_forgetting() {
  const auto tasks = toy_stream(1, 5);
  LifelongModel<float> model(tiny_config(1));
  std::vector<Tensor<float>> snapshots;
  AccuracyMatrix m;
  int compared = 0;
  bool identical = true;
  for (int t = 1; t <= 5; ++t) {
    const auto& data = tasks[static_cast<std::size_t>(t - 1)];
    if (t == 1) {
      model.learn_first_task(data);
    } else {
      model.learn_task(data);
    }
    snapshots.push_back(model.task_logits(t, data.test));
    for (int i = 1; i <= t; ++i) {
      const auto& test = tasks[static_cast<std::size_t>(i - 1)].test;
      if (i < t) {
        identical = identical && model.task_logits(i, test) == snapshots[static_cast<std::size_t>(i - 1)] &&
                    model.probe_hash(i, test) == model.record(i).probe_hash;
        ++compared;
      }
      m.set(t, i, model.evaluate(i, test));
    }
  }
  const double f = average_forgetting(m, 5);
  return {f == 0.0 && identical, "forgetting " + fmt(f) + ", " + std::to_string(compared) + " replays " +
                                     (identical ? "bit-identical" : "DIFFER") + ", average accuracy " + fmt(average_accuracy(m, 5))};
}

// 4: evolution on an enumerable 256-path space
Outcome evolution_optimality() {
  int found = 0, evaluations = 0;
  bool monotone = true;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto t = oracle::evolve_trial(1000 + s, SearchConfig{});
    found += t.found_optimum;
    monotone = monotone && t.monotone;
    evaluations += t.evaluations;
  }
  return {found >= 95 && monotone, std::to_string(found) + "/100 runs reach the optimum, best fitness " +
                                       (monotone ? "non-decreasing" : "DECREASED") + " in every run, " +
                                       fmt(evaluations / 100.0) + " distinct paths evaluated per run"};
}

// 5: residual adapter identity and zero-up Adapt == Reuse
Outcome adapter_identity() {
  Rng rng(55);
  int residual_ok = 0, zero_up_ok = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Index d = 8 + 8 * (trial % 3), h = d / 4;
    auto plain = Adapter<double>::create("a", d, h, rng, AdapterMode::kPlain);
    for (auto* lin : {&plain.down, &plain.up}) {
      for (Index i = 0; i < lin->weight.numel(); ++i) lin->weight.value()[i] = 0.5 * rng.normal();
      for (Index i = 0; i < lin->bias.numel(); ++i) lin->bias.value()[i] = 0.1 * rng.normal();
    }
    Adapter<double> residual = plain;
    residual.mode = AdapterMode::kResidual;
    const auto v = constant(oracle::random_tensor({7, d}, rng));
    residual_ok += residual(v).value() == add(v, plain(v)).value();
  }
  for (int trial = 0; trial < 10; ++trial) {
    ViTConfig cfg = oracle::gradcheck_vit();
    cfg.depth = 3;
    auto vit = VisionTransformer<double>::create(cfg, rng);
    ExpertBank<double> bank(cfg.depth, cfg.embed_dim, cfg.embed_dim / 4);
    for (int l = 0; l < cfg.depth; ++l) {
      auto p = Linear<double>::create("p", cfg.embed_dim, cfg.embed_dim, rng);
      for (Index i = 0; i < p.weight.numel(); ++i) p.weight.value()[i] = 0.3 * rng.normal();
      bank.add_expert(l, p, Tensor<double>(Shape{cfg.embed_dim}), 1);
    }
    PathSpec adapt{2, {}}, reuse{2, {}};
    for (int l = 0; l < cfg.depth; ++l) {
      adapt.ops.push_back(rng.bernoulli(0.5) || l == trial % cfg.depth ? GrowOp::adapt(0) : GrowOp::reuse(0));
      reuse.ops.push_back(GrowOp::reuse(0));
    }
    auto growth = GrowthParams<double>::for_path(bank, adapt, rng);
    growth.set_adapter_mode(AdapterMode::kResidual);
    for (int l = 0; l < cfg.depth; ++l) {
      if (auto* a = const_cast<Adapter<double>*>(growth.adapter(l, 0))) {
        a->up.weight.value().values().setZero();
        a->up.bias.value().values().setZero();
      }
    }
    SearchContext<double> ctx{&vit, &bank, 2, 3, nullptr};
    const auto head = Linear<double>::create("head", cfg.embed_dim, 5, rng);
    const auto images = oracle::random_tensor({4, 1, 8, 8}, rng);
    zero_up_ok += path_logits(ctx, &growth, adapt, head, images).value() ==
                  path_logits<double>(ctx, nullptr, reuse, head, images).value();
  }
  return {residual_ok == 20 && zero_up_ok == 10, std::to_string(residual_ok) + "/20 residual == input + plain, " +
                                                     std::to_string(zero_up_ok) + "/10 zero-up Adapt == Reuse (bitwise, 64-bit)"};
}

// 6: consolidate's counts against the closed form
Outcome parameter_accounting() {
  auto closed_form = [](const PathSpec& p, Index d, Index h) {
    Index n = 0;
    for (const auto& op : p.ops) {
      if (op.kind == OpKind::kNew) n += d * d + d;
      if (op.kind == OpKind::kAdapt) n += d * h + h + h * d + d;
    }
    return n;
  };
  auto bank_size = [](const ExpertBank<float>& bank) {
    Index n = 0;
    for (const auto& p : bank.parameters()) n += p.numel();
    return n;
  };
  Rng rng(66);
  int matched = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Index d = 16 * (1 + trial % 4), h = d / 4;
    const int depth = 2 + trial % 5;
    ExpertBank<float> bank(depth, d, h);
    for (int l = 0; l < depth; ++l) {
      for (int e = 0; e <= trial % 2; ++e) bank.add_expert(l, Linear<float>::create("p", d, d, rng), Tensor<float>(Shape{d}), 1);
    }
    PathSpec p{2, {}};
    for (const auto& c : supernet_space(bank)) p.ops.push_back(c[rng.uniform_int(c.size())]);
    const Index before = bank_size(bank);
    const auto g = GrowthParams<float>::for_path(bank, p, rng);
    const auto c = consolidate<float>(bank, p, g, std::vector<Tensor<float>>(static_cast<std::size_t>(depth), Tensor<float>(Shape{d})), 2);
    const Index expect = closed_form(p, d, h);
    matched += c.added.backbone() == expect && bank_size(bank) - before == expect;
  }
  const Index d = 768, h = d / 4;
  ExpertBank<float> bank(12, d, h);
  for (int l = 0; l < 12; ++l) bank.add_expert(l, Linear<float>::create("p", d, d, rng), Tensor<float>(Shape{d}), 1);
  PathSpec p{2, {}};
  for (int l = 0; l < 12; ++l) p.ops.push_back(l < 3 ? GrowOp::fresh() : l < 7 ? GrowOp::adapt(0) : GrowOp::reuse(0));
  const auto g = GrowthParams<float>::for_path(bank, p, rng);
  const Index big = consolidate<float>(bank, p, g, std::vector<Tensor<float>>(12, Tensor<float>(Shape{d})), 2).added.backbone();
  const bool in_range = big >= 2'900'000 && big <= 3'100'000 && big == closed_form(p, d, h);
  return {matched == 20 && in_range, std::to_string(matched) + "/20 random paths match the closed form; d=768 3 New + 4 Adapt adds " +
                                         std::to_string(big) + " (published 2.96M)"};
}

// 7: hierarchical vs uniform sampling on the 5-task stream
Outcome ee_benefit() {
  double acc[2] = {0, 0}, params[2] = {0, 0};
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto tasks = toy_stream(seed, 5);
    for (int uniform = 0; uniform < 2; ++uniform) {
      LifelongConfig cfg = tiny_config(seed);
      if (uniform) cfg.sampler.eps1 = cfg.sampler.eps2 = 1.0;
      LifelongModel<float> model(cfg);
      model.learn_first_task(tasks[0]);
      for (int t = 2; t <= 5; ++t) model.learn_task(tasks[static_cast<std::size_t>(t - 1)]);
      const auto row = replay_accuracies(model, tasks);
      double a = 0.0, p = 0.0;
      for (double v : row) a += v / static_cast<double>(row.size());
      for (int t = 2; t <= 5; ++t) p += static_cast<double>(model.record(t).added.backbone());
      acc[uniform] += a / 3.0;
      params[uniform] += p / 3.0;
      per_seed += (uniform ? " uni " : " | seed " + std::to_string(seed) + ": ee ") + fmt(a) + "/" + fmt(p, 6);
    }
  }
  return {acc[0] >= acc[1] - 0.01 && params[0] <= params[1],
          "mean accuracy ee " + fmt(acc[0]) + " vs uniform " + fmt(acc[1]) + ", mean added parameters ee " + fmt(params[0], 7) +
              " vs uniform " + fmt(params[1], 7) + per_seed};
}

// 8: near-duplicate task mostly reuses; fully permuted pixels grow
Outcome similarity_sanity() {
  const auto specs = toy_vdd_stream();
  SynthTaskSpec copy = specs[0];
  copy.name = "digits-copy";
  copy.transform = SynthTransform::kPixelPermutation;
  copy.theta = 0.0;
  copy.sample_seed = 111;
  int reuse_hits = 0, new_hits = 0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto tasks = toy_stream(seed, {specs[0], copy, specs[1]});
    const LifelongConfig cfg = tiny_config(seed);
    LifelongModel<float> base(cfg);
    base.learn_first_task(tasks[0]);
    Checkpoint ck(32);
    base.save(ck);
    LifelongModel<float> dup = LifelongModel<float>::load(ck, &cfg), perm = LifelongModel<float>::load(ck, &cfg);
    const PathSpec a = dup.learn_task(tasks[1]).path;
    const PathSpec b = perm.learn_task(tasks[2]).path;
    const int reuse = count_ops(a, OpKind::kReuse), fresh = count_ops(b, OpKind::kNew);
    reuse_hits += 2 * reuse >= cfg.vit.depth;
    new_hits += fresh >= 1;
    per_seed += " | seed " + std::to_string(seed) + ": copy " + a.key() + ", permuted " + b.key();
  }
  return {reuse_hits >= 4 && new_hits >= 4, "copy task reuses >= D/2 in " + std::to_string(reuse_hits) +
                                                "/5 seeds, permuted task adds New in " + std::to_string(new_hits) + "/5" + per_seed};
}

// 9: task-id accuracy of the two class-incremental indicators
Outcome class_incremental_ordering() {
  double max_mode = 0.0, min_entropy = 0.0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto tasks = toy_stream(seed, 3);
    LifelongModel<float> model(tiny_config(seed));
    model.learn_first_task(tasks[0]);
    for (int t = 2; t <= 3; ++t) model.learn_task(tasks[static_cast<std::size_t>(t - 1)]);
    const double a = evaluate_class_incremental(model, tasks, CIMode::kMax).task_id_accuracy;
    const double b = evaluate_class_incremental(model, tasks, CIMode::kMinEntropy).task_id_accuracy;
    max_mode += a / 3.0;
    min_entropy += b / 3.0;
    per_seed += " | seed " + std::to_string(seed) + ": max " + fmt(a) + ", min_entropy " + fmt(b);
  }
  return {min_entropy > max_mode, "mean task-id accuracy min_entropy " + fmt(min_entropy) + " vs max " + fmt(max_mode) + per_seed};
}

// 10: two end-to-end CLI runs are byte-identical
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "ahip_acceptance_determinism";
  fs::remove_all(dir);
  bool ran = true;
  for (const char* copy : {"a", "b"}) {
    const fs::path cwd = dir / copy;
    fs::create_directories(cwd);
    std::ofstream(cwd / "run.cfg") << "seed=5\nout=run\nclass_incremental=true\nsearch.supernet_epochs=20\n";
    for (const std::string step : {"pretrain", "learn", "learn", "eval", "export-arch", "infer-ci"}) {
      const std::string args = step == "export-arch" ? " --out run" : " --config run.cfg";
      const std::string cmd = "cd '" + cwd.string() + "' && '" + AHIP_CLI_PATH + "' " + step + args + " >> cli.log 2>&1";
      const int status = std::system(cmd.c_str());
      ran = ran && WIFEXITED(status) && WEXITSTATUS(status) == 0;
    }
  }
  if (!ran) return {false, "a CLI step failed, see cli.log under " + dir.string()};
  int same = 0, total = 0;
  std::string differ;
  for (const auto& entry : fs::recursive_directory_iterator(dir / "a" / "run")) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), dir / "a" / "run");
    ++total;
    if (slurp(entry.path()) == slurp(dir / "b" / "run" / rel)) {
      ++same;
    } else {
      differ += " " + rel.string();
    }
  }
  const bool ok = same == total && total >= 10;
  if (ok) fs::remove_all(dir);
  return {ok, std::to_string(same) + "/" + std::to_string(total) + " run files byte-identical" + (differ.empty() ? "" : ", differ:" + differ)};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  int only = 0;
  app.add_option("--criterion", only, "run a single criterion (1-10)")->check(CLI::Range(0, 10));
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> all = {
      {1, "gradient oracle", gradient_oracle},
      {2, "sampling law", sampling_law},
      {3, "zero forgetting", zero_forgetting},
      {4, "evolutionary search optimality", evolution_optimality},
      {5, "hybrid adapter identity", adapter_identity},
      {6, "parameter accounting", parameter_accounting},
      {7, "hierarchical vs uniform sampling", ee_benefit},
      {8, "similarity sanity", similarity_sanity},
      {9, "class-incremental ordering", class_incremental_ordering},
      {10, "determinism", determinism},
  };
  bool ok = true;
  for (const auto& c : all) {
    if (only != 0 && c.id != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "criterion " << c.id << " (" << c.name << "): " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << "  ["
              << fmt(secs, 3) << " s]" << std::endl;
    ok = ok && o.pass;
  }
  return ok ? 0 : 1;
}
