#include <iostream>

#include <CLI11.hpp>

#include "ahip/cli/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"ahip: lifelong vision transformer with a growing expert bank"};
  app.require_subcommand(1);
  ahip::CommandOptions opts;

  auto common = [&](CLI::App* cmd, bool config_required = true) {
    cmd->add_option("--config", opts.config_path, "key=value run configuration")->required(config_required);
    cmd->add_option("--seed", opts.seed, "override the config seed");
    cmd->add_option("--out", opts.out, "override the run directory");
  };
  auto* pretrain = app.add_subcommand("pretrain", "learn task 1 and write the first checkpoint");
  common(pretrain);
  auto* learn = app.add_subcommand("learn", "learn the next task (or --task K) on top of the run");
  common(learn);
  learn->add_option("--task", opts.task, "task id, 2 or more");
  auto* eval = app.add_subcommand("eval", "write metrics.txt for the run");
  common(eval);
  eval->add_option("--mode", opts.mode, "task or class")->check(CLI::IsMember({"task", "class"}));
  auto* study = app.add_subcommand("study", "component study from the task-1 checkpoint");
  common(study);
  study->add_option("--task", opts.task, "number of stream tasks to use (default: all)");
  auto* export_arch = app.add_subcommand("export-arch", "write arch.jsonl and arch.txt");
  common(export_arch, false);
  auto* infer_ci = app.add_subcommand("infer-ci", "class-incremental inference over all learned tasks");
  common(infer_ci);
  infer_ci->add_option("--mode", opts.mode, "max or min_entropy")->check(CLI::IsMember({"max", "min_entropy"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ahip::kExitOk : ahip::kExitUsage;
  }

  try {
    const ahip::RunConfig cfg = ahip::resolve_config(opts);
    if (*pretrain) {
      ahip::cmd_pretrain(cfg, std::cout);
    } else if (*learn) {
      ahip::cmd_learn(cfg, opts.task.value_or(0), std::cout);
    } else if (*eval) {
      std::cout << ahip::cmd_eval(cfg, opts.mode.empty() ? (cfg.class_incremental ? "class" : "task") : opts.mode);
    } else if (*study) {
      std::cout << ahip::cmd_study(cfg, opts.task.value_or(0));
    } else if (*export_arch) {
      ahip::cmd_export_arch(cfg.out);
    } else if (*infer_ci) {
      std::cout << ahip::cmd_infer_ci(cfg, opts.mode);
    }
  } catch (const std::exception& e) {
    std::cerr << "ahip: " << e.what() << "\n";
    return ahip::exit_code_for(e);
  }
  return ahip::kExitOk;
}
