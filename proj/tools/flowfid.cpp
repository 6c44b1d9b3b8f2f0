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

// flowfid: train, sample and evaluate conditional-flow super-resolution
// models at desk scale.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "flowfid/checkpoint.hpp"
#include "flowfid/config.hpp"
#include "flowfid/error.hpp"
#include "flowfid/image.hpp"
#include "flowfid/parallel.hpp"
#include "flowfid/trainer.hpp"
#include "flowfid/verify.hpp"

namespace fs = std::filesystem;
using namespace flowfid;

namespace {

// Flags that override the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool phase1_only = false;
  std::optional<int> k;
  std::optional<int> levels;
  std::optional<int> scale;
  std::optional<std::string> prior;
  std::optional<std::string> adv;
  std::optional<double> lambda_adv;

  void Register(CLI::App* cmd, bool training) {
    cmd->add_option("--seed", seed, "Run seed");
    cmd->add_option("--out", out, "Output directory");
    if (!training) return;
    cmd->add_flag("--phase1-only", phase1_only, "Skip the adversarial phase");
    cmd->add_option("--k", k, "Flow steps per level");
    cmd->add_option("--levels", levels, "Pyramid levels");
    cmd->add_option("--scale", scale, "Super-resolution factor");
    cmd->add_option("--prior", prior, "Latent prior")
        ->check(CLI::IsMember({"gaussian", "laplace"}));
    cmd->add_option("--adv", adv, "Adversarial loss form")
        ->check(CLI::IsMember({"plain", "relativistic"}));
    cmd->add_option("--lambda-adv", lambda_adv, "Adversarial loss weight");
  }

  void Apply(RunConfig& c) const {
    if (seed) c.train.seed = *seed;
    if (out) c.out_dir = *out;
    if (phase1_only) c.train.phase2_iters = 0;
    if (k) c.flow.steps = *k;
    if (levels) c.flow.levels = *levels;
    if (scale) c.data.scale = *scale;
    if (prior) c.flow.prior = ParsePrior(*prior);
    if (adv) c.train.adv = ParseAdversarialForm(*adv);
    if (lambda_adv) c.train.lambda_adv = *lambda_adv;
    c.Sync();
  }
};

RunConfig LoadConfig(const std::string& path, const Overrides& o) {
  RunConfig c = path.empty() ? RunConfig::Defaults() : RunConfig::Load(path);
  o.Apply(c);
  c.Validate();
  return c;
}

void WriteFile(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

std::string TauTag(double tau) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << tau;
  return os.str();
}

// Test images for eval/sweeps: an explicit manifest, a fresh synthetic set,
// or the held-out split of the run's own data.
Dataset EvalData(const RunConfig& config, const std::string& manifest, int synthetic,
                 std::uint64_t synthetic_seed) {
  if (!manifest.empty()) {
    DatasetManifest m = LoadManifest(manifest);
    if (m.scale != config.data.scale) {
      throw ConfigError("manifest scale " + std::to_string(m.scale) +
                        " differs from the checkpoint scale " +
                        std::to_string(config.data.scale));
    }
    return LoadDataset(m);
  }
  if (synthetic > 0) {
    return MakeSyntheticDataset(synthetic, config.data.synthetic_size, config.data.scale,
                                synthetic_seed);
  }
  Dataset val = LoadRunData(config).second;
  if (val.size() == 0) throw ConfigError("run has no held-out images; pass --manifest");
  return val;
}

int CmdVerify(const std::vector<std::string>& suites) {
  const auto start = std::chrono::steady_clock::now();
  const auto results = RunVerification(suites, &std::cout);
  int failed = 0;
  for (const auto& r : results) failed += r.passed ? 0 : 1;
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << results.size() - failed << "/" << results.size() << " suites passed in "
            << std::fixed << std::setprecision(1) << secs << "s\n";
  return failed == 0 ? 0 : 1;
}

int CmdTrain(const std::string& config_path, const Overrides& o,
             const std::string& resume, int log_every) {
  TrainerOptions options;
  options.log_every = log_every;
  if (!resume.empty()) {
    Checkpoint ckpt = LoadCheckpoint(resume);
    RunConfig c = RunConfig::Parse(ckpt.config_text);
    auto [train, val] = LoadRunData(c);
    Trainer t = Trainer::Resume(ckpt, std::move(train), std::move(val), options);
    std::cerr << "resuming " << resume << " at iteration " << t.iteration() << "\n";
    t.Run();
    std::cout << "finished; artifacts in " << c.out_dir << "\n";
    return 0;
  }
  RunConfig c = LoadConfig(config_path, o);
  auto [train, val] = LoadRunData(c);
  std::cerr << "training " << ModelKindName(c.model) << " on " << train.size()
            << " images (" << val.size() << " held out), phase 1: "
            << c.train.phase1_iters << " iterations, phase 2: " << c.train.phase2_iters
            << "\n";
  Trainer t(c, std::move(train), std::move(val), options);
  t.Run();
  std::cout << "finished; artifacts in " << c.out_dir << "\n";
  return 0;
}

int CmdSample(const std::string& ckpt_path, const std::vector<std::string>& inputs,
              std::optional<double> tau_flag, std::uint64_t seed, int n,
              const std::string& out_dir) {
  LoadedModel m = LoadModel(LoadCheckpoint(ckpt_path));
  const double tau = tau_flag.value_or(DefaultTemperature(m.phase));
  const int scale = m.config.data.scale;
  const int pyramid = m.config.model == ModelKind::kFlow ? 1 << m.config.flow.levels : 1;
  for (const auto& path : inputs) {
    Tensor lr = LoadPng(path);
    if ((lr.dim(2) * scale) % pyramid != 0 || (lr.dim(3) * scale) % pyramid != 0) {
      throw ShapeError(path + ": " + std::to_string(lr.dim(3)) + "x" +
                       std::to_string(lr.dim(2)) + " times scale " +
                       std::to_string(scale) + " is not divisible by " +
                       std::to_string(pyramid));
    }
    Rng rng(seed, 0);
    for (int i = 0; i < n; ++i) {
      NoGradGuard no_grad;
      Tensor sr = m.model->Generate(lr, tau, rng);
      const fs::path file = fs::path(out_dir) / (fs::path(path).stem().string() + "_tau" +
                                                 TauTag(tau) + "_seed" +
                                                 std::to_string(seed) + "_" +
                                                 std::to_string(i) + ".png");
      fs::create_directories(out_dir);
      SavePng(file.string(), sr, m.config.ToText());
      std::cout << file.string() << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional normalizing flows as a super-resolution fidelity objective"};
  app.require_subcommand(1);

  auto* verify = app.add_subcommand("verify", "Run the numerical property suites");
  std::vector<std::string> suites;
  verify->add_option("--suite", suites, "Run only these suites");

  Overrides train_overrides;
  std::string train_config, resume;
  int log_every = 100;
  auto* train = app.add_subcommand("train", "Train a model (phase 1, then phase 2)");
  train->add_option("--config", train_config, "Config file (INI)");
  train->add_option("--resume", resume, "Continue from a checkpoint");
  train->add_option("--log-every", log_every, "Progress line interval (0 = silent)");
  train_overrides.Register(train, true);

  std::string checkpoint, manifest, out_path;
  std::optional<double> tau;
  std::uint64_t seed = 0;
  int n_samples = 1, synthetic = 0;
  std::uint64_t synthetic_seed = 12345;
  std::vector<std::string> inputs;

  auto* sample = app.add_subcommand("sample", "Draw SR samples for LR PNG images");
  sample->add_option("--checkpoint", checkpoint)->required();
  sample->add_option("inputs", inputs, "LR images")->required();
  sample->add_option("--tau", tau, "Temperature (default by training phase)");
  sample->add_option("--seed", seed);
  sample->add_option("--n-samples", n_samples)->check(CLI::PositiveNumber);
  std::string sample_dir = "samples";
  sample->add_option("--out", sample_dir, "Output directory")->capture_default_str();

  auto add_data_flags = [&](CLI::App* cmd) {
    cmd->add_option("--checkpoint", checkpoint)->required();
    cmd->add_option("--manifest", manifest, "Evaluation dataset manifest");
    cmd->add_option("--synthetic", synthetic, "Evaluate on N fresh synthetic images");
    cmd->add_option("--synthetic-seed", synthetic_seed);
    cmd->add_option("--seed", seed, "Sampling seed");
    cmd->add_option("--out", out_path, "CSV path (stdout when empty)");
  };
  auto* eval = app.add_subcommand("eval", "Per-image PSNR, LR-PSNR and nll");
  add_data_flags(eval);
  eval->add_option("--tau", tau);
  bool bicubic = false;
  eval->add_flag("--bicubic-baseline", bicubic, "Score bicubic upsampling instead");

  auto* sweep = app.add_subcommand("sweep-temperature", "Metrics across temperatures");
  add_data_flags(sweep);
  std::vector<double> taus = kDefaultTemperatures;
  sweep->add_option("--taus", taus)->delimiter(',');

  auto* ksweep = app.add_subcommand("k-sweep", "Train and compare flow depths");
  std::string ksweep_config;
  std::vector<std::string> ks{"1", "2", "4", "L1"};
  std::vector<std::uint64_t> seeds{0, 1, 2};
  int test_images = 20;
  Overrides ksweep_overrides;
  ksweep->add_option("--config", ksweep_config);
  ksweep->add_option("--ks", ks, "Step counts, L1 for the one-layer baseline")
      ->delimiter(',');
  ksweep->add_option("--seeds", seeds)->delimiter(',');
  ksweep->add_option("--test-images", test_images);
  ksweep_overrides.Register(ksweep, true);

  auto* defaults = app.add_subcommand("print-defaults", "Print the default config");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*verify) return CmdVerify(suites);
    if (*train) return CmdTrain(train_config, train_overrides, resume, log_every);
    if (*sample) {
      return CmdSample(checkpoint, inputs, tau, seed, n_samples, sample_dir);
    }
    if (*eval || *sweep) {
      LoadedModel m = LoadModel(LoadCheckpoint(checkpoint));
      Dataset data = EvalData(m.config, manifest, synthetic, synthetic_seed);
      std::string csv;
      if (*eval) {
        const double t = tau.value_or(DefaultTemperature(m.phase));
        const auto rows = bicubic ? EvaluateBicubicBaseline(data)
                                  : Evaluate(*m.model, data, t, seed, ThreadBudget());
        csv = EvalCsv(rows, m.config.ToText() + "\ntau = " + std::to_string(t));
      } else {
        csv = SweepCsv(TemperatureSweep(*m.model, data, taus, seed, ThreadBudget()),
                       m.config.ToText());
      }
      if (out_path.empty()) {
        std::cout << csv;
      } else {
        WriteFile(out_path, csv);
      }
      return 0;
    }
    if (*ksweep) {
      RunConfig c = LoadConfig(ksweep_config, ksweep_overrides);
      auto [train_set, val_set] = LoadRunData(c);
      Dataset test = MakeSyntheticDataset(test_images, c.data.synthetic_size,
                                          c.data.scale, c.data.seed + 7919);
      TrainerOptions options;
      options.log_every = 0;
      const auto rows = KSweep(c, ks, seeds, train_set, val_set, test, options);
      const std::string csv = KSweepCsv(rows, c.ToText());
      WriteFile(fs::path(c.out_dir) / "k_sweep.csv", csv);
      std::cout << csv;
      return 0;
    }
    if (*defaults) {
      std::cout << RunConfig::Defaults().ToText();
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
