#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "ahip/cli/commands.hpp"
#include "ahip/experts/arch_export.hpp"
#include "ahip/numerics/checkpoint.hpp"

using namespace ahip;
namespace fs = std::filesystem;

namespace {

const char* kSmallConfig =
    "seed=3\n"
    "out=run\n"
    "data.train_size=120\n"
    "data.test_size=40\n"
    "model.depth=2\n"
    "model.embed_dim=16\n"
    "model.num_heads=2\n"
    "base.epochs=2\n"
    "base.batches_min=3\n"
    "search.supernet_epochs=1\n"
    "search.batches_per_epoch_min=2\n"
    "search.evo_generations=1\n"
    "search.population=4\n"
    "search.n_mutants=2\n"
    "search.n_crossover=2\n"
    "search.crossover_pool=2\n"
    "search.keep=4\n"
    "search.finetune_epochs=1\n"
    "search.finetune_batches_min=2\n"
    "search.token_epochs=1\n"
    "study.epochs=1\n"
    "study.batches_min=2\n";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(fs::temp_directory_path() / "ahip_cli_test");
    fs::remove_all(*dir_);
    fs::create_directories(*dir_);
    std::ofstream(*dir_ / "small.cfg") << kSmallConfig;
    std::ofstream(*dir_ / "broken.cfg") << "seed=1\nthis line has no equals sign\n";
    std::ofstream(*dir_ / "unknown.cfg") << "seed=1\nsearch.populaton=3\n";
    std::ofstream(*dir_ / "nodata.cfg") << kSmallConfig << "data.manifest=missing/manifest.txt\n";
  }
  static void TearDownTestSuite() {
    fs::remove_all(*dir_);
    delete dir_;
  }

  /// Exit status of the CLI; stdout and stderr go to `log`.
  static int run(const std::string& args, const std::string& log = "last.log") {
    const std::string cmd = "cd '" + dir_->string() + "' && '" + AHIP_CLI_PATH + "' " + args + " > '" + log + "' 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  static std::string output(const std::string& log = "last.log") { return slurp(*dir_ / log); }

  static fs::path* dir_;
};

fs::path* Cli::dir_ = nullptr;

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("fly --config small.cfg"), 2);
  EXPECT_EQ(run("pretrain"), 2);
  EXPECT_EQ(run("pretrain --config nope.cfg"), 2);
  EXPECT_EQ(run("pretrain --config broken.cfg"), 2);
  EXPECT_EQ(run("pretrain --config unknown.cfg"), 2);
  EXPECT_EQ(run("pretrain --config nodata.cfg --out nodata"), 2);
  EXPECT_EQ(run("eval --config small.cfg --out never-trained"), 2);
  EXPECT_EQ(run("eval --config small.cfg --mode sideways"), 2);
  EXPECT_EQ(run("--help"), 0);
}

TEST_F(Cli, CorruptCheckpointExitsThree) {
  fs::create_directories(*dir_ / "corrupt");
  std::ofstream(*dir_ / "corrupt" / "checkpoint.ahip") << "AHIPgarbage";
  EXPECT_EQ(run("export-arch --out corrupt"), 3);
}

TEST_F(Cli, OneTaskRun) {
  ASSERT_EQ(run("pretrain --config small.cfg --out one"), 0) << output();
  const fs::path root = *dir_ / "one";
  ASSERT_TRUE(fs::exists(root / "checkpoint.ahip"));
  EXPECT_EQ(slurp(root / "checkpoint.ahip").substr(0, 4), "AHIP");
  const Checkpoint ck = Checkpoint::load(root / "checkpoint.ahip");
  EXPECT_TRUE(ck.contains("model.meta"));

  ASSERT_EQ(run("eval --config small.cfg --out one --mode class", "eval.log"), 0) << output("eval.log");
  const std::string report = output("eval.log");
  EXPECT_NE(report.find("average_forgetting\t0.0000"), std::string::npos) << report;
  EXPECT_NE(report.find("\nmax\t"), std::string::npos);
  EXPECT_NE(report.find("\nmin_entropy\t"), std::string::npos);

  // A_1 is the single task's accuracy
  const auto rec = nlohmann::json::parse(ck.get_text("task1.record"));
  std::ostringstream acc;
  acc << std::fixed << std::setprecision(4) << rec.at("test_accuracy").get<double>();
  EXPECT_NE(report.find("average_accuracy\t" + acc.str()), std::string::npos) << report;
  EXPECT_NE(report.find("## accuracy_matrix\n" + acc.str() + "\n"), std::string::npos) << report;

  ASSERT_EQ(run("export-arch --out one"), 0) << output();
  const auto paths = arch_from_machine(slurp(root / "arch.jsonl"));
  ASSERT_EQ(paths.size(), 1u);
  for (const auto& op : paths[0].ops) EXPECT_EQ(op.kind, OpKind::kNew);
  const std::string grid = slurp(root / "arch.txt");
  EXPECT_NE(grid.find("   1 | N    N"), std::string::npos) << grid;
  EXPECT_EQ(grid.find("   2 |"), std::string::npos);
}

TEST_F(Cli, LearnEvalStudyAndIdempotence) {
  ASSERT_EQ(run("pretrain --config small.cfg --out two"), 0) << output();
  EXPECT_EQ(run("learn --config small.cfg --out two --task 3"), 2);
  ASSERT_EQ(run("learn --config small.cfg --out two"), 0) << output();
  const fs::path root = *dir_ / "two";
  EXPECT_TRUE(fs::exists(root / "ckpt" / "task2.ahip"));
  EXPECT_TRUE(fs::exists(root / "logs" / "task2.jsonl"));
  const auto paths = arch_from_machine(slurp(root / "arch.jsonl"));
  ASSERT_EQ(paths.size(), 2u);
  EXPECT_EQ(arch_from_machine(arch_to_machine(paths)), paths);

  ASSERT_EQ(run("eval --config small.cfg --out two --mode task", "eval.log"), 0);
  const std::string report = output("eval.log");
  EXPECT_NE(report.find("average_forgetting\t0.0000"), std::string::npos) << report;
  EXPECT_EQ(report.find("## class_incremental"), std::string::npos);

  // re-running task 2 from the same state reproduces every byte
  const std::string ck = slurp(root / "checkpoint.ahip"), arch = slurp(root / "arch.txt");
  ASSERT_EQ(run("learn --config small.cfg --out two --task 2"), 0) << output();
  EXPECT_EQ(slurp(root / "checkpoint.ahip"), ck);
  EXPECT_EQ(slurp(root / "arch.txt"), arch);
  ASSERT_EQ(run("eval --config small.cfg --out two --mode task", "eval2.log"), 0);
  EXPECT_EQ(output("eval2.log"), report);

  ASSERT_EQ(run("study --config small.cfg --out two --task 2", "study.log"), 0) << output("study.log");
  const std::string study = output("study.log");
  EXPECT_NE(study.find("component\ttransfer_accuracy\taverage_forgetting"), std::string::npos) << study;
  for (const char* row : {"\nhead\t", "\nproj\t", "\nmhsa_ln1\t"}) EXPECT_NE(study.find(row), std::string::npos) << row;

  ASSERT_EQ(run("infer-ci --config small.cfg --out two --mode max", "ci.log"), 0) << output("ci.log");
  EXPECT_NE(output("ci.log").find("mode\tmax"), std::string::npos);
}

TEST_F(Cli, SeedOverrideChangesCheckpoint) {
  ASSERT_EQ(run("pretrain --config small.cfg --out s3"), 0);
  ASSERT_EQ(run("pretrain --config small.cfg --out s3b"), 0);
  ASSERT_EQ(run("pretrain --config small.cfg --out s4 --seed 4"), 0);
  const std::string a = slurp(*dir_ / "s3" / "checkpoint.ahip");
  EXPECT_EQ(slurp(*dir_ / "s3b" / "checkpoint.ahip"), a);
  EXPECT_NE(slurp(*dir_ / "s4" / "checkpoint.ahip"), a);
  EXPECT_NE(slurp(*dir_ / "s4" / "config.txt").find("seed=4"), std::string::npos);
}

TEST(RunConfig, TextRoundTrip) {
  RunConfig cfg;
  cfg.seed = 17;
  cfg.precision = 64;
  cfg.task_token = true;
  cfg.model.search.population = 10;
  cfg.model.search.n_mutants = 5;
  cfg.model.search.n_crossover = 5;
  cfg.model.sampler.eps1 = 0.2;
  cfg.study_components = {Component::kLn1, Component::kValue};
  const std::string text = cfg.to_text();
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  EXPECT_EQ(RunConfig::from_key_values(kv).to_text(), text);
  kv["search.population"] = "11";
  EXPECT_THROW(RunConfig::from_key_values(kv), UsageError);
  kv["search.population"] = "10";
  kv["precision"] = "16";
  EXPECT_THROW(RunConfig::from_key_values(kv), UsageError);
}

TEST(ExitCodes, Mapping) {
  EXPECT_EQ(exit_code_for(UsageError("x")), kExitUsage);
  EXPECT_EQ(exit_code_for(FormatError("x")), kExitData);
  EXPECT_EQ(exit_code_for(IoError("x")), kExitData);
  EXPECT_EQ(exit_code_for(NumericError("x")), kExitNumeric);
}

}  // namespace
