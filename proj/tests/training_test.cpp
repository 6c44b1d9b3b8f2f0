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


#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "flowfid/adam.hpp"
#include "flowfid/checkpoint.hpp"
#include "flowfid/config.hpp"
#include "flowfid/dataset.hpp"
#include "flowfid/error.hpp"
#include "flowfid/ops.hpp"
#include "flowfid/parallel.hpp"
#include "flowfid/random.hpp"
#include "flowfid/trainer.hpp"
#include "oracles.hpp"
#include "gtest/gtest.h"

namespace flowfid {
namespace {

namespace fs = std::filesystem;

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string FreshDir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("flowfid_train_" + name);
  fs::remove_all(p);
  return p.string();
}

RunConfig TinyRun(const std::string& out) {
  RunConfig c = RunConfig::Defaults();
  c.data.scale = 4;
  c.data.synthetic = 12;
  c.data.synthetic_size = 16;
  c.encoder.width = 4;
  c.encoder.blocks = 2;
  c.encoder.taps = {1, 2};
  c.flow.levels = 2;
  c.flow.steps = 1;
  c.flow.hidden_channels = 8;
  c.disc_width = 4;
  c.train.batch = 2;
  c.train.patch = 16;
  c.train.phase1_iters = 6;
  c.train.phase2_iters = 4;
  c.train.eval_every = 3;
  c.train.val_images = 2;
  c.train.seed = 17;
  c.out_dir = out;
  c.Sync();
  return c;
}

TEST(Adam, MatchesReferenceImplementation) {
  Rng rng(1);
  std::vector<double> p(7), ref_p;
  for (double& v : p) v = rng.Normal();
  ref_p = p;
  std::vector<double> m(7, 0.0), v(7, 0.0);
  oracle::ReferenceAdam ref;
  ref.lr = 1e-3;
  AdamHyper hyper;
  hyper.lr = 1e-3;
  for (int step = 1; step <= 50; ++step) {
    std::vector<double> g(7);
    for (double& x : g) x = rng.Normal();
    AdamStep(p, g, m, v, step, hyper);
    ref.Step(ref_p, g);
    for (int i = 0; i < 7; ++i) ASSERT_NEAR(p[i], ref_p[i], 1e-15) << step;
  }
}

TEST(Adam, FirstStepWithUnitGradient) {
  std::vector<double> p{0.0}, g{1.0}, m{0.0}, v{0.0};
  AdamHyper hyper;
  hyper.lr = 1e-3;
  AdamStep(p, g, m, v, 1, hyper);
  // m_hat = 1, v_hat = 1: the update is lr / (1 + eps).
  EXPECT_NEAR(p[0], -1e-3 / (1 + 1e-8), 1e-18);
}

TEST(Adam, ZeroGradientKeepsParametersAndDecaysMoments) {
  std::vector<double> p{1.0, -2.0}, g{0.0, 0.0}, m{0.5, -0.5}, v{0.25, 0.25};
  AdamHyper hyper;
  // Bias correction at a late step makes m_hat ~ m, so only moments change
  // when they start at zero.
  std::vector<double> p0 = p, z{0.0, 0.0}, zv{0.0, 0.0};
  AdamStep(p0, g, z, zv, 1, hyper);
  EXPECT_EQ(p0, p);
  AdamStep(p, g, m, v, 5, hyper);
  EXPECT_DOUBLE_EQ(m[0], 0.45);
  EXPECT_DOUBLE_EQ(v[0], 0.25 * 0.999);
}

TEST(Adam, DeterministicAcrossRuns) {
  auto run = [] {
    Rng rng(2);
    Tensor w = Tensor::Parameter({3}, {0.1, 0.2, 0.3});
    Adam opt({{"w", w, true}});
    for (int i = 0; i < 100; ++i) {
      opt.ZeroGrad();
      Sum(Square(w - rng.NormalTensor({3}))).backward();
      opt.Step(1e-2);
    }
    return std::vector<double>(w.values().begin(), w.values().end());
  };
  EXPECT_EQ(run(), run());
}

TEST(Noise, BoundsAndVariance) {
  Rng rng(3);
  Tensor y({1000000}, 0.5);
  EXPECT_EQ(InjectNoise(y, 0.0, rng).node(), y.node());
  Tensor n = InjectNoise(y, 1.0 / 32, rng);
  double max_abs = 0, sum = 0, sq = 0;
  for (double v : n.values()) {
    const double u = v - 0.5;
    max_abs = std::max(max_abs, std::fabs(u));
    sum += u;
    sq += u * u;
  }
  const double count = 1e6;
  const double var = sq / count - std::pow(sum / count, 2);
  EXPECT_LE(max_abs, 1.0 / 64);
  EXPECT_NEAR(var, std::pow(1.0 / 32, 2) / 12, 0.01 * std::pow(1.0 / 32, 2) / 12);
}

TEST(Schedule, HalvesAtHalfAndThreeQuarters) {
  EXPECT_EQ(ScheduledLr(1.0, 0, 100), 1.0);
  EXPECT_EQ(ScheduledLr(1.0, 49, 100), 1.0);
  EXPECT_EQ(ScheduledLr(1.0, 50, 100), 0.5);
  EXPECT_EQ(ScheduledLr(1.0, 74, 100), 0.5);
  EXPECT_EQ(ScheduledLr(1.0, 75, 100), 0.25);
  EXPECT_EQ(DefaultTemperature(1), 0.9);
  EXPECT_EQ(DefaultTemperature(2), 1.0);
}

TEST(Checkpoint, RoundTripIsByteIdentical) {
  Checkpoint c;
  c.config_text = "[model]\nkind = flow\n";
  c.params.push_back({"a.w", {2, 3}, {1, 2, 3, 4, 5, -0.0}});
  c.params.push_back({"b", {}, {3.25}});
  c.optimizer.push_back({"gen.m/a.w", {2, 3}, std::vector<double>(6, 1e-300)});
  c.state.emplace_back("iteration", "12");
  c.state.emplace_back("history", "a,b\n1,2\n");
  const std::string bytes = SerializeCheckpoint(c);
  Checkpoint back = ParseCheckpoint(bytes);
  EXPECT_EQ(SerializeCheckpoint(back), bytes);
  EXPECT_EQ(back.params[0].data, c.params[0].data);
  EXPECT_TRUE(std::signbit(back.params[0].data[5]));
  EXPECT_EQ(back.StateValue("history"), "a,b\n1,2\n");

  const std::string path = (fs::temp_directory_path() / "flowfid_ckpt.bin").string();
  SaveCheckpoint(path, c);
  SaveCheckpoint(path + "2", LoadCheckpoint(path));
  EXPECT_EQ(ReadFile(path), ReadFile(path + "2"));
  fs::remove(path);
  fs::remove(path + "2");
}

TEST(Checkpoint, RejectsTamperingAndMismatches) {
  Checkpoint c;
  c.params.push_back({"w", {2}, {1, 2}});
  std::string bytes = SerializeCheckpoint(c);
  std::string bad = bytes;
  bad[0] = 'g';
  EXPECT_THROW(ParseCheckpoint(bad), FormatError);
  EXPECT_THROW(ParseCheckpoint(bytes + "x"), FormatError);
  EXPECT_THROW(ParseCheckpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
  std::string version = bytes;
  version.replace(version.find("version 1"), 9, "version 9");
  EXPECT_THROW(ParseCheckpoint(version), FormatError);

  Tensor t = Tensor::Parameter({3}, {0, 0, 0});
  try {
    RestoreBlocks(c.params, {{"w", t, true}});
    FAIL() << "shape mismatch accepted";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("'w'"), std::string::npos) << e.what();
  }
  EXPECT_THROW(RestoreBlocks(c.params, {{"v", Tensor::Parameter({2}, {0, 0}), true}}),
               FormatError);
}

TEST(Checkpoint, CaptureRestoreIncludesFixedBlocks) {
  RunConfig c = TinyRun(FreshDir("capture"));
  auto [train, val] = LoadRunData(c);
  TrainerOptions opts;
  opts.write_artifacts = false;
  Trainer a(c, train, val, opts);
  a.Run(3);
  Checkpoint ck = a.Capture();
  bool has_q = false, has_flag = false;
  for (const Block& b : ck.params) {
    has_q = has_q || b.path.find("orthomix.q") != std::string::npos;
    has_flag = has_flag || b.path.find("initialized") != std::string::npos;
  }
  EXPECT_TRUE(has_q);
  EXPECT_TRUE(has_flag);
  Trainer b = Trainer::Resume(ck, train, val, opts);
  EXPECT_EQ(SerializeCheckpoint(b.Capture()), SerializeCheckpoint(ck));
}

TEST(Trainer, FirstStepIsThePlainNllObjective) {
  RunConfig c = TinyRun(FreshDir("objective"));
  auto [train, val] = LoadRunData(c);
  TrainerOptions opts;
  opts.write_artifacts = false;
  Trainer t(c, train, val, opts);
  const LossRecord r = t.Step();

  Rng init(c.train.seed, 1), data(c.train.seed, 2);
  std::unique_ptr<SrModel> model = BuildModel(c, init);
  ImageBatch batch = train.SampleBatch(c.train.batch, c.train.patch, data);
  Tensor hr = InjectNoise(batch.hr, c.train.noise, data);
  EXPECT_EQ(r.nll_npd, Mean(model->NllPerDim(hr, batch.lr)).item());
  EXPECT_GT(r.nll_npd, 0.0);
  EXPECT_LT(r.nll_npd, 10.0);
  EXPECT_TRUE(std::isnan(r.adv_loss));
}

TEST(Trainer, CurveCsvAndArtifacts) {
  const std::string out = FreshDir("artifacts");
  RunConfig c = TinyRun(out);
  auto [train, val] = LoadRunData(c);
  Trainer t(c, train, val);
  t.Run();
  for (const char* f : {"latest.ckpt", "phase1.ckpt", "phase2.ckpt", "phase1_best.ckpt",
                        "curve.csv"}) {
    EXPECT_TRUE(fs::exists(fs::path(out) / f)) << f;
  }
  const std::string csv = ReadFile(out + "/curve.csv");
  EXPECT_NE(csv.find("# [train]"), std::string::npos);
  EXPECT_NE(csv.find("\niteration,nll_nats_per_dim,adv_loss,disc_real_p,disc_fake_p\n"),
            std::string::npos);
  std::istringstream lines(csv);
  std::string line;
  int rows = 0;
  while (std::getline(lines, line)) {
    if (line.empty() || line[0] == '#' || line[0] == 'i') continue;
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 4) << line;
  }
  EXPECT_EQ(rows, 10);
  Checkpoint final_ck = LoadCheckpoint(out + "/phase2.ckpt");
  EXPECT_EQ(final_ck.StateValue("phase"), "2");
  EXPECT_EQ(LoadModel(final_ck).phase, 2);
  EXPECT_EQ(RunConfig::Parse(final_ck.config_text).ToText(), c.ToText());
}

TEST(Trainer, DeterministicAndResumable) {
  RunConfig c = TinyRun(FreshDir("determinism"));
  auto [train, val] = LoadRunData(c);
  TrainerOptions opts;
  opts.write_artifacts = false;
  Trainer a(c, train, val, opts);
  a.Run();
  Trainer b(c, train, val, opts);
  b.Run(5);
  Trainer resumed = Trainer::Resume(b.Capture(), train, val, opts);
  resumed.Run();
  Trainer c2(c, train, val, opts);
  c2.Run();
  EXPECT_EQ(SerializeCheckpoint(a.Capture()), SerializeCheckpoint(c2.Capture()));
  EXPECT_EQ(SerializeCheckpoint(a.Capture()), SerializeCheckpoint(resumed.Capture()));
  EXPECT_EQ(a.CurveCsv(), resumed.CurveCsv());
}

TEST(Trainer, ZeroLambdaPhaseTwoReproducesPhaseOne) {
  RunConfig p1 = TinyRun(FreshDir("lambda_a"));
  p1.train.phase1_iters = 8;
  p1.train.phase2_iters = 0;
  RunConfig p2 = p1;
  p2.train.phase1_iters = 0;
  p2.train.phase2_iters = 8;
  p2.train.lambda_adv = 0.0;
  auto [train, val] = LoadRunData(p1);
  TrainerOptions opts;
  opts.write_artifacts = false;
  Trainer a(p1, train, val, opts), b(p2, train, val, opts);
  a.Run();
  b.Run();
  ASSERT_EQ(a.history().size(), b.history().size());
  for (std::size_t i = 0; i < a.history().size(); ++i) {
    EXPECT_EQ(a.history()[i].nll_npd, b.history()[i].nll_npd) << i;
    EXPECT_EQ(b.history()[i].phase, 2);
  }
}

TEST(Trainer, ThrowsOnMismatchedScale) {
  RunConfig c = TinyRun(FreshDir("scale"));
  Dataset wrong = MakeSyntheticDataset(3, 16, 2, 1);
  EXPECT_THROW(Trainer(c, wrong, Dataset()), ConfigError);
}

TEST(Evaluate, CsvShapeAndThreadIndependence) {
  RunConfig c = TinyRun(FreshDir("eval"));
  auto [train, val] = LoadRunData(c);
  TrainerOptions opts;
  opts.write_artifacts = false;
  Trainer t(c, train, val, opts);
  t.Run(4);
  Dataset test = MakeSyntheticDataset(4, 16, 4, 99);
  auto one = Evaluate(t.model(), test, 0.9, 5, 1);
  auto many = Evaluate(t.model(), test, 0.9, 5, 3);
  ASSERT_EQ(one.size(), 5u);
  EXPECT_EQ(one.back().image_id, "mean");
  for (std::size_t i = 0; i < one.size(); ++i) {
    EXPECT_EQ(one[i].psnr_db, many[i].psnr_db);
    EXPECT_EQ(one[i].lr_psnr_db, many[i].lr_psnr_db);
  }
  const std::string csv = EvalCsv(one, "# x\n");
  EXPECT_NE(csv.find("\nimage_id,psnr_db,lr_psnr_db,nll_npd\n"), std::string::npos);
  EXPECT_EQ(csv.substr(csv.rfind('\n', csv.size() - 2) + 1, 5), "mean,");

  auto sweep = TemperatureSweep(t.model(), test, {1.0, 0.0, 0.5}, 5);
  ASSERT_EQ(sweep.size(), 3u);
  EXPECT_EQ(sweep[0].tau, 0.0);
  EXPECT_EQ(sweep[2].tau, 1.0);

  auto base = EvaluateBicubicBaseline(test);
  EXPECT_TRUE(std::isfinite(base.back().psnr_db));
  EXPECT_GT(base.back().lr_psnr_db, 30.0);
}

TEST(KSweep, OneRowPerKAndL1UsesLaplacePath) {
  RunConfig c = TinyRun(FreshDir("ksweep"));
  c.train.phase1_iters = 2;
  c.train.phase2_iters = 1;
  auto [train, val] = LoadRunData(c);
  Dataset test = MakeSyntheticDataset(2, 16, 4, 5);
  TrainerOptions opts;
  auto rows = KSweep(c, {"1", "2", "L1"}, {0, 1}, train, val, test, opts);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[2].k, "L1");
  EXPECT_EQ(rows[0].lr_psnr_per_seed.size(), 2u);
  Checkpoint l1 = LoadCheckpoint(c.out_dir + "/kL1_seed0/phase2.ckpt");
  EXPECT_EQ(RunConfig::Parse(l1.config_text).model, ModelKind::kL1);
  const std::string csv = KSweepCsv(rows, "");
  EXPECT_NE(csv.find("k,seeds,nll_npd,lr_psnr_db,psnr_db\n"), std::string::npos);
}

TEST(Parallel, BudgetAndExceptions) {
  EXPECT_GE(ThreadBudget(), 1);
  std::vector<int> out(50, 0);
  ParallelFor(out.size(), 4, [&](std::size_t i) { out[i] = static_cast<int>(i) * 2; });
  for (int i = 0; i < 50; ++i) EXPECT_EQ(out[i], 2 * i);
  EXPECT_THROW(ParallelFor(10, 3,
                           [](std::size_t i) {
                             if (i == 7) throw Error("boom");
                           }),
               Error);
}

}  // namespace
}  // namespace flowfid
