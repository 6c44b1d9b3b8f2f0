// Copyright 2026 The flowfid Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "flowfid/config.hpp"
#include "flowfid/dataset.hpp"
#include "flowfid/image.hpp"
#include "flowfid/parallel.hpp"
#include "gtest/gtest.h"

namespace flowfid {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string output;
};

Result RunCli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + std::string(FLOWFID_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) r.output.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::string> Lines(const std::string& text, bool skip_comments = true) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);) {
    if (line.empty() || (skip_comments && line[0] == '#')) continue;
    out.push_back(line);
  }
  return out;
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "flowfid_cli_test";
    fs::remove_all(root_);
    fs::create_directories(root_);
    RunConfig c = RunConfig::Defaults();
    c.data.synthetic = 12;
    c.data.synthetic_size = 16;
    c.data.scale = 4;
    c.encoder.width = 4;
    c.encoder.blocks = 2;
    c.encoder.taps = {1, 2};
    c.flow.levels = 2;
    c.flow.steps = 1;
    c.flow.hidden_channels = 8;
    c.disc_width = 4;
    c.train.batch = 2;
    c.train.patch = 16;
    c.train.phase1_iters = 4;
    c.train.phase2_iters = 2;
    c.train.eval_every = 3;
    c.train.val_images = 2;
    c.train.seed = 5;
    c.out_dir = (root_ / "run").string();
    c.Sync();
    config_ = (root_ / "tiny.ini").string();
    std::ofstream(config_) << c.ToText();
    trained_ = RunCli("train --log-every 0 --config " + config_);
  }

  static fs::path root_;
  static std::string config_;
  static Result trained_;
};

fs::path CliTest::root_;
std::string CliTest::config_;
Result CliTest::trained_;

TEST_F(CliTest, PrintDefaultsParses) {
  Result r = RunCli("print-defaults");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(RunConfig::Parse(r.output).ToText(), RunConfig::Defaults().ToText());
}

TEST_F(CliTest, MissingDatasetIsAnError) {
  Result r = RunCli("train --out " + (root_ / "nodata").string());
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.output.find("data.manifest"), std::string::npos) << r.output;
  EXPECT_FALSE(fs::exists(root_ / "nodata" / "latest.ckpt"));
}

TEST_F(CliTest, UnknownSubcommandFails) {
  EXPECT_NE(RunCli("frobnicate").code, 0);
  EXPECT_NE(RunCli("train --prior cauchy --config " + config_).code, 0);
}

TEST_F(CliTest, TrainWritesArtifacts) {
  ASSERT_EQ(trained_.code, 0) << trained_.output;
  for (const char* f : {"phase1.ckpt", "phase2.ckpt", "latest.ckpt", "curve.csv"}) {
    EXPECT_TRUE(fs::exists(root_ / "run" / f)) << f;
  }
  const std::string curve = Slurp(root_ / "run" / "curve.csv");
  EXPECT_EQ(curve.rfind("# ", 0), 0u);
  EXPECT_EQ(Lines(curve).size(), 1u + 6u);
}

TEST_F(CliTest, PhaseOneOnly) {
  const fs::path out = root_ / "p1";
  Result r = RunCli("train --log-every 0 --phase1-only --config " + config_ + " --out " +
                 out.string());
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_TRUE(fs::exists(out / "phase1.ckpt"));
  EXPECT_FALSE(fs::exists(out / "phase2.ckpt"));
}

TEST_F(CliTest, OverridesReachTheRun) {
  const fs::path out = root_ / "laplace";
  Result r = RunCli("train --log-every 0 --phase1-only --prior laplace --k 2 --seed 9 "
                 "--config " + config_ + " --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.output;
  const std::string curve = Slurp(out / "curve.csv");
  EXPECT_NE(curve.find("# prior = laplace"), std::string::npos);
  EXPECT_NE(curve.find("# steps = 2"), std::string::npos);
  EXPECT_NE(curve.find("# seed = 9"), std::string::npos);
}

TEST_F(CliTest, RepeatedRunsAreIdentical) {
  ASSERT_EQ(trained_.code, 0);
  const fs::path out = root_ / "again";
  ASSERT_EQ(RunCli("train --log-every 0 --config " + config_ + " --out " + out.string()).code,
            0);
  // The embedded config differs only in the output directory.
  auto strip = [](const std::string& csv) { return Lines(csv); };
  EXPECT_EQ(strip(Slurp(out / "curve.csv")), strip(Slurp(root_ / "run" / "curve.csv")));
}

TEST_F(CliTest, SampleNamesAndTemperatureZero) {
  ASSERT_EQ(trained_.code, 0);
  Dataset d = MakeSyntheticDataset(1, 16, 4, 3);
  const fs::path lr = root_ / "lr.png";
  SavePng(lr.string(), d.pair(0).lr);
  const fs::path out = root_ / "samples";
  Result r = RunCli("sample --checkpoint " + (root_ / "run" / "phase2.ckpt").string() +
                 " --tau 0 --n-samples 3 --seed 4 --out " + out.string() + " " +
                 lr.string());
  ASSERT_EQ(r.code, 0) << r.output;
  std::vector<std::string> bytes;
  for (int i = 0; i < 3; ++i) {
    const fs::path f = out / ("lr_tau0.00_seed4_" + std::to_string(i) + ".png");
    ASSERT_TRUE(fs::exists(f)) << f;
    bytes.push_back(Slurp(f));
    Tensor img = LoadPng(f.string());
    EXPECT_EQ(img.dim(2), 16);
    EXPECT_EQ(img.dim(3), 16);
  }
  EXPECT_EQ(bytes[0], bytes[1]);
  EXPECT_EQ(bytes[0], bytes[2]);
  EXPECT_NE(bytes[0].find("flowfid"), std::string::npos);
  EXPECT_NE(bytes[0].find("phase1_iters"), std::string::npos);
}

TEST_F(CliTest, SampleDefaultTemperatureFollowsPhase) {
  ASSERT_EQ(trained_.code, 0);
  Dataset d = MakeSyntheticDataset(1, 16, 4, 3);
  const fs::path lr = root_ / "lr2.png";
  SavePng(lr.string(), d.pair(0).lr);
  const fs::path out = root_ / "samples_default";
  ASSERT_EQ(RunCli("sample --checkpoint " + (root_ / "run" / "phase1.ckpt").string() +
                " --out " + out.string() + " " + lr.string()).code, 0);
  EXPECT_TRUE(fs::exists(out / "lr2_tau0.90_seed0_0.png"));
  ASSERT_EQ(RunCli("sample --checkpoint " + (root_ / "run" / "phase2.ckpt").string() +
                " --out " + out.string() + " " + lr.string()).code, 0);
  EXPECT_TRUE(fs::exists(out / "lr2_tau1.00_seed0_0.png"));
}

TEST_F(CliTest, MissingCheckpointIsAnError) {
  Result r = RunCli("eval --checkpoint " + (root_ / "nope.ckpt").string());
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.output.find("nope.ckpt"), std::string::npos) << r.output;
}

TEST_F(CliTest, EvalCsvLayout) {
  ASSERT_EQ(trained_.code, 0);
  const fs::path out = root_ / "eval.csv";
  Result r = RunCli("eval --checkpoint " + (root_ / "run" / "phase1.ckpt").string() +
                 " --synthetic 3 --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.output;
  const std::string text = Slurp(out);
  EXPECT_NE(text.find("# tau = 0.9"), std::string::npos);
  auto rows = Lines(text);
  ASSERT_EQ(rows.size(), 1u + 3u + 1u);
  EXPECT_EQ(rows[0], "image_id,psnr_db,lr_psnr_db,nll_npd");
  EXPECT_EQ(rows.back().rfind("mean,", 0), 0u);
}

TEST_F(CliTest, EvalIgnoresThreadCount) {
  ASSERT_EQ(trained_.code, 0);
  const std::string args = "eval --checkpoint " +
                           (root_ / "run" / "phase2.ckpt").string() + " --synthetic 4";
  Result one = RunCli(args, "FLOWFID_THREADS=1");
  Result three = RunCli(args, "FLOWFID_THREADS=3");
  ASSERT_EQ(one.code, 0) << one.output;
  EXPECT_EQ(one.output, three.output);
}

TEST_F(CliTest, EvalHeldOutSplitByDefault) {
  ASSERT_EQ(trained_.code, 0);
  Result r = RunCli("eval --checkpoint " + (root_ / "run" / "phase1.ckpt").string());
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(Lines(r.output).size(), 1u + 2u + 1u);
}

TEST_F(CliTest, BicubicBaseline) {
  ASSERT_EQ(trained_.code, 0);
  Result r = RunCli("eval --bicubic-baseline --checkpoint " +
                 (root_ / "run" / "phase1.ckpt").string() + " --synthetic 2");
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(Lines(r.output).size(), 1u + 2u + 1u);
}

TEST_F(CliTest, TemperatureSweepSorted) {
  ASSERT_EQ(trained_.code, 0);
  Result r = RunCli("sweep-temperature --checkpoint " +
                 (root_ / "run" / "phase2.ckpt").string() +
                 " --synthetic 2 --taus 1.0,0,0.5");
  ASSERT_EQ(r.code, 0) << r.output;
  auto rows = Lines(r.output);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], "tau,lr_psnr_db,psnr_db,nll_npd");
  double prev = -1;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double tau = std::stod(rows[i]);
    EXPECT_GT(tau, prev);
    prev = tau;
  }
}

TEST_F(CliTest, Verify) {
  Result r = RunCli("verify");
  EXPECT_EQ(r.code, 0) << r.output;
  const auto pos = r.output.find(" suites passed");
  ASSERT_NE(pos, std::string::npos);
  const auto line_start = r.output.rfind('\n', pos) + 1;
  const std::string count = r.output.substr(line_start, pos - line_start);
  const int passed = std::stoi(count);
  EXPECT_GE(passed, 6);
  EXPECT_EQ(count, std::to_string(passed) + "/" + std::to_string(passed));
}

TEST(ThreadBudget, HonorsEnvironment) {
  setenv("FLOWFID_THREADS", "2", 1);
  EXPECT_EQ(ThreadBudget(), 2);
  setenv("FLOWFID_THREADS", "0", 1);
  EXPECT_GE(ThreadBudget(), 1);
  setenv("FLOWFID_THREADS", "junk", 1);
  EXPECT_GE(ThreadBudget(), 1);
  unsetenv("FLOWFID_THREADS");
  EXPECT_GE(ThreadBudget(), 1);
}

}  // namespace
}  // namespace flowfid
