#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "cgpdm/datastore.hpp"
#include "cgpdm/eval.hpp"

namespace cgpdm {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("cgpdm_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  CliRun run(const std::string& args) const {
    const fs::path out = dir_ / "stdout.txt";
    const fs::path err = dir_ / "stderr.txt";
    const std::string cmd = std::string("cd '") + dir_.string() + "' && '" CGPDM_CLI "' " + args +
                            " > '" + out.string() + "' 2> '" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_text_file(out);
    r.err = read_text_file(err);
    return r;
  }

  std::string simulate(const std::string& sub, int count, int seed, int steps = 30) const {
    const CliRun r = run("simulate --range 30 --count " + std::to_string(count) + " --seed " +
                         std::to_string(seed) + " --steps " + std::to_string(steps) + " --out " + sub);
    EXPECT_EQ(r.code, 0) << r.err;
    return (dir_ / sub).string();
  }

  static std::string files(const std::string& folder, int first, int last) {
    std::ostringstream s;
    for (int i = first; i < last; ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "/traj_%04d.traj", i);
      s << ' ' << folder << name;
    }
    return s.str();
  }

  fs::path dir_;
};

TEST_F(CliTest, UnknownFlagIsUsageError) {
  const CliRun r = run("simulate --range 30 --seed 1 --bogus");
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(r.err.empty());
}

TEST_F(CliTest, SeedIsMandatoryForSimulate) {
  EXPECT_EQ(run("simulate --range 30 --count 2").code, 2);
  EXPECT_EQ(run("experiment --sizes 5").code, 2);
}

TEST_F(CliTest, HelpExitsZero) { EXPECT_EQ(run("--help").code, 0); }

TEST_F(CliTest, SimulateWritesTrajectoriesAndLog) {
  const std::string out = simulate("data", 5, 1);
  int trajectories = 0;
  for (const auto& e : fs::directory_iterator(out)) trajectories += e.path().extension() == ".traj";
  EXPECT_EQ(trajectories, 5);
  const std::string log = read_text_file(fs::path(out) / "params.csv");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 6);
  const Trajectory t = load_trajectory(fs::path(out) / "traj_0000.traj");
  EXPECT_EQ(t.observations.rows(), 30);
  EXPECT_EQ(t.observations.cols(), 192);
  EXPECT_EQ(t.controls.cols(), 6);
}

TEST_F(CliTest, OutputDirectoryFromEnvironment) {
  const CliRun r = run("simulate --range 30 --count 1 --seed 2 --steps 5");
  EXPECT_EQ(r.code, 0);
  EXPECT_TRUE(fs::exists(dir_ / "traj_0000.traj"));
  const std::string env_dir = (dir_ / "env").string();
  const std::string cmd = "CGPDM_OUT_DIR='" + env_dir + "' '" CGPDM_CLI
                          "' simulate --range 30 --count 1 --seed 2 --steps 5 > /dev/null";
  EXPECT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(fs::path(env_dir) / "traj_0000.traj"));
}

TEST_F(CliTest, TrainEvaluateMatchesLibrary) {
  const std::string data = simulate("data", 5, 3);
  CliRun r = run("train --data" + files(data, 0, 3) +
                 " --max-iters 5 --warmup-iters 10 --out model.cgpdm --log log.csv");
  ASSERT_EQ(r.code, 0) << r.err;
  const LoadedModel loaded = load_model(dir_ / "model.cgpdm");
  EXPECT_EQ(loaded.model.variant(), ModelVariant::kHighly);
  EXPECT_EQ(read_text_file(dir_ / "log.csv").rfind("iteration,loss,grad_norm,step,evaluations,jitter_events\n", 0),
            0u);

  r = run("evaluate --model model.cgpdm --test" + files(data, 3, 5));
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream rows(r.out);
  std::string line;
  std::getline(rows, line);
  EXPECT_EQ(line, "file,error_m,baseline_m");
  int count = 0;
  while (std::getline(rows, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    ASSERT_EQ(cells.size(), 3u) << line;
    const TestScore s = score_trajectory(loaded.model, load_trajectory(cells[0]));
    EXPECT_EQ(std::stod(cells[1]), s.rollout_error);
    EXPECT_EQ(std::stod(cells[2]), s.baseline_error);
    ++count;
  }
  EXPECT_EQ(count, 2);

  r = run("inspect --model model.cgpdm");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("highly"), std::string::npos);

  r = run("rollout --model model.cgpdm --controls " + data + "/traj_0004.traj --out pred.traj");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load_trajectory(dir_ / "pred.traj").observations.rows(), 30);
}

TEST_F(CliTest, DomainErrorIsOneTaggedLine) {
  const std::string data = simulate("data", 1, 4, 10);
  const CliRun r = run("train --data" + files(data, 0, 1) + " --latent-dim 500 --out m.cgpdm");
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error: [trainer] ", 0), 0u) << r.err;
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST_F(CliTest, MissingInputFileFailsBeforeCompute) {
  const CliRun r = run("train --data /nonexistent/a.traj --out m.cgpdm");
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(fs::exists(dir_ / "m.cgpdm"));
}

TEST_F(CliTest, RepeatedRunsAreByteIdentical) {
  const std::string a = simulate("a", 3, 5, 20);
  const std::string b = simulate("b", 3, 5, 20);
  for (const char* name : {"traj_0000.traj", "traj_0002.traj", "params.csv"}) {
    EXPECT_EQ(read_text_file(fs::path(a) / name), read_text_file(fs::path(b) / name)) << name;
  }
  const std::string args = " --max-iters 4 --warmup-iters 4 --seed 3 --data" + files(a, 0, 2);
  ASSERT_EQ(run("train --out m1.cgpdm" + args).code, 0);
  ASSERT_EQ(run("train --out m2.cgpdm" + args).code, 0);
  EXPECT_EQ(read_text_file(dir_ / "m1.cgpdm"), read_text_file(dir_ / "m2.cgpdm"));

  const std::string ex =
      " --sizes 3 --variants highly --repeats 2 --count 6 --test-count 2 --steps 15"
      " --max-iters 3 --warmup-iters 3 --seed 8";
  ASSERT_EQ(run("experiment --out e1" + ex).code, 0);
  ASSERT_EQ(run("experiment --out e2" + ex).code, 0);
  for (const char* name : {"report.csv", "detail.csv", "report.svg"}) {
    EXPECT_EQ(read_text_file(dir_ / "e1" / name), read_text_file(dir_ / "e2" / name)) << name;
  }
}

}  // namespace
}  // namespace cgpdm
