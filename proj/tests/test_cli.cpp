#include <gtest/gtest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "frwkv/cli.hpp"
#include "frwkv/config.hpp"

using namespace frwkv;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

const char* kModel = R"([model]
variant = FRWKVPlus
input_len = 16
horizon = 4
embed = 4
hidden = 8
heads = 2
layers = 1
ffn_dim = 8
mix_rank = 4
period = 8
routers = 2
)";

class CliDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("frwkv_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    data_ = (dir_ / "synth.csv").string();
    ASSERT_EQ(invoke({"synth", "--out", data_, "--vars", "2", "--len", "400", "--period", "8", "--seed", "3"}).code, 0);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream((dir_ / name)) << text;
    return (dir_ / name).string();
  }

  std::string run_config(const std::string& out_name, std::size_t seed = 2024) const {
    std::ostringstream s;
    s << "[data]\npath = " << data_ << "\nkind = custom\n\n"
      << kModel << "\n[optim]\nlr = 0.003\nepochs = 3\npatience = 2\nbatch_size = 16\n\n"
      << "[run]\nseed = " << seed << "\noutput_dir = " << (dir_ / out_name).string() << "\n";
    return write(out_name + ".ini", s.str());
  }

  fs::path dir_;
  std::string data_;
};

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string l; std::getline(in, l);) ++n;
  return n;
}

}  // namespace

TEST_F(CliDir, TrainWritesRunArtifacts) {
  const auto start = std::chrono::steady_clock::now();
  const Result r = invoke({"train", "--config", run_config("run")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 60.0);
  for (const char* f : {"config.ini", "epochs.csv", "checkpoint.bin", "metrics.json"})
    EXPECT_TRUE(fs::exists(dir_ / "run" / f)) << f;
  const auto m = read_json(dir_ / "run" / "metrics.json");
  EXPECT_EQ(m["variant"], "FRWKVPlus");
  EXPECT_TRUE(m["split"]["context_prepended"].get<bool>());
  EXPECT_EQ(count_lines(dir_ / "run" / "epochs.csv"), 1 + m["epochs_run"].get<std::size_t>());

  // The saved config replays as the same run.
  const auto replay = config::load_run_config((dir_ / "run" / "config.ini").string());
  EXPECT_EQ(replay.model.n_vars, 2u);
  EXPECT_EQ(replay.model.input_len, 16u);
  EXPECT_EQ(replay.data_path, data_);
  EXPECT_EQ(model::config_hash(replay.model), m["config_hash"].get<std::string>());
}

TEST_F(CliDir, TrainingIsDeterministic) {
  ASSERT_EQ(invoke({"train", "--config", run_config("a")}).code, 0);
  ASSERT_EQ(invoke({"train", "--config", run_config("b")}).code, 0);
  EXPECT_EQ(read_json(dir_ / "a" / "metrics.json")["test"], read_json(dir_ / "b" / "metrics.json")["test"]);
  ASSERT_EQ(invoke({"train", "--config", run_config("c", 7)}).code, 0);
  EXPECT_NE(read_json(dir_ / "a" / "metrics.json")["test"], read_json(dir_ / "c" / "metrics.json")["test"]);
}

TEST_F(CliDir, EvalReproducesTestMetrics) {
  ASSERT_EQ(invoke({"train", "--config", run_config("run")}).code, 0);
  const auto m = read_json(dir_ / "run" / "metrics.json");
  const std::string preds = (dir_ / "preds.csv").string();
  const Result r = invoke({"eval", "--ckpt", (dir_ / "run" / "checkpoint.bin").string(), "--data", data_, "--kind",
                        "custom", "--split", "test", "--batch-size", "16", "--export-preds", preds});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto e = nlohmann::json::parse(r.out);
  EXPECT_DOUBLE_EQ(e["mse"].get<double>(), m["test"]["mse"].get<double>());
  EXPECT_DOUBLE_EQ(e["mae"].get<double>(), m["test"]["mae"].get<double>());
  EXPECT_EQ(count_lines(preds), 1 + e["windows"].get<std::size_t>());
}

TEST_F(CliDir, EvalRejectsWrongVariableCount) {
  ASSERT_EQ(invoke({"train", "--config", run_config("run")}).code, 0);
  const std::string other = (dir_ / "three.csv").string();
  ASSERT_EQ(invoke({"synth", "--out", other, "--vars", "3", "--len", "400"}).code, 0);
  const Result r = invoke({"eval", "--ckpt", (dir_ / "run" / "checkpoint.bin").string(), "--data", other});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("variables"), std::string::npos) << r.err;
}

TEST_F(CliDir, UserErrorsExitWithTwo) {
  EXPECT_EQ(invoke({"train", "--config", write("missing.ini", "[data]\npath = /nonexistent/x.csv\n")}).code, 2);
  const Result bad = invoke({"train", "--config", write("bad.ini", "[model]\nwidth = 3\n")});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("width"), std::string::npos) << bad.err;
  EXPECT_EQ(invoke({"train", "--config", write("neg.ini", "[optim]\nepochs = -1\n")}).code, 2);
  EXPECT_EQ(invoke({"train", "--config", (dir_ / "none.ini").string()}).code, 2);
  EXPECT_EQ(invoke({"frobnicate"}).code, 2);
  EXPECT_EQ(invoke({}).code, 2);
}

TEST_F(CliDir, AblateResumesAndReports) {
  std::ostringstream s;
  s << "[grid]\ndatasets = s1\nhorizons = 4, 6\nvariants = CrossBranchGate, FRWKVPlus\nseeds = 2024-2025\n"
    << "store = " << (dir_ / "grid" / "records.jsonl").string() << "\n\n"
    << "[dataset.s1]\npath = " << data_ << "\nkind = custom\n\n"
    << kModel << "\n[optim]\nepochs = 2\nbatch_size = 16\nmax_train_batches = 4\n";
  const std::string grid = write("grid.ini", s.str());

  const Result first = invoke({"ablate", "--grid", grid});
  ASSERT_EQ(first.code, 0) << first.err;
  EXPECT_NE(first.out.find("planned 8, resumed 0, executed 8"), std::string::npos) << first.out;
  EXPECT_EQ(count_lines(dir_ / "grid" / "records.jsonl"), 8u);
  EXPECT_TRUE(fs::exists(dir_ / "grid" / "report" / "summary.csv"));

  const Result second = invoke({"ablate", "--grid", grid});
  ASSERT_EQ(second.code, 0) << second.err;
  EXPECT_NE(second.out.find("resumed 8, executed 0"), std::string::npos) << second.out;

  const Result rep = invoke({"report", "--store", (dir_ / "grid" / "records.jsonl").string(), "--out",
                          (dir_ / "rep").string()});
  ASSERT_EQ(rep.code, 0) << rep.err;
  EXPECT_EQ(count_lines(dir_ / "rep" / "summary.csv"), 3u);
}

TEST(OutputRoot, RelativePathsMoveUnderRoot) {
  ::setenv("FRWKV_OUTPUT_ROOT", "/tmp/frwkv_root", 1);
  EXPECT_EQ(config::resolve_output_path("runs/a"), "/tmp/frwkv_root/runs/a");
  EXPECT_EQ(config::resolve_output_path("/abs/b"), "/abs/b");
  ::unsetenv("FRWKV_OUTPUT_ROOT");
  EXPECT_EQ(config::resolve_output_path("runs/a"), "runs/a");
}

TEST(RunConfig, DumpParsesBackToItself) {
  const auto c = config::parse_run_config(std::string("[data]\npath = x.csv\n") + kModel + "[optim]\nlr = 0.0005\n");
  EXPECT_EQ(c.model.heads, 2u);
  EXPECT_EQ(c.train.optim.lr, 0.0005);
  EXPECT_EQ(config::dump_run_config(config::parse_run_config(config::dump_run_config(c))), config::dump_run_config(c));
}
