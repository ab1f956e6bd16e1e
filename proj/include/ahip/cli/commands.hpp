#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

#include "ahip/cli/run_config.hpp"

namespace ahip {

/// Process exit codes.
enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitData = 3, kExitNumeric = 4 };
int exit_code_for(const std::exception& e);

/// Flags shared by every command; set flags override the config file.
struct CommandOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> task;
  std::string mode;
};

RunConfig resolve_config(const CommandOptions& opts);

/// Run directory layout under cfg.out:
///   config.txt, checkpoint.ahip (latest), ckpt/taskK.ahip,
///   logs/taskK.jsonl, run.log, arch.jsonl, arch.txt, params.tsv,
///   curves.tsv, metrics.txt, study.txt, ci_<mode>.txt
struct RunPaths {
  std::string root;
  std::string checkpoint() const;
  std::string task_checkpoint(int task) const;
  std::string task_log(int task) const;
  std::string file(const std::string& name) const;
};

/// Learns task 1 and writes the checkpoint.
void cmd_pretrain(const RunConfig& cfg, std::ostream& msg);
/// Learns task `task` (0: the next one) on top of checkpoint task-1.
void cmd_learn(const RunConfig& cfg, int task, std::ostream& msg);
/// scope: "task" or "class". Writes and returns the metrics report.
std::string cmd_eval(const RunConfig& cfg, const std::string& scope);
/// Component study over the first `tasks` tasks (0: the whole stream).
std::string cmd_study(const RunConfig& cfg, int tasks);
/// Writes arch.jsonl and arch.txt from the run's latest checkpoint.
void cmd_export_arch(const std::string& run_dir);
/// Class-incremental inference over every learned task's test split.
std::string cmd_infer_ci(const RunConfig& cfg, const std::string& mode);

}  // namespace ahip
