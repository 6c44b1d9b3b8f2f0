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

#ifndef FLOWFID_TRAINER_HPP_
#define FLOWFID_TRAINER_HPP_

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "flowfid/adam.hpp"
#include "flowfid/checkpoint.hpp"
#include "flowfid/config.hpp"
#include "flowfid/dataset.hpp"
#include "flowfid/discriminator.hpp"
#include "flowfid/models.hpp"

namespace flowfid {

// y + u with u ~ Uniform(-amplitude/2, amplitude/2) elementwise.
Tensor InjectNoise(const Tensor& y, double amplitude, Rng& rng);

// Learning rate after step-wise halving at 50% and 75% of a phase.
double ScheduledLr(double base, std::int64_t phase_iteration,
                   std::int64_t phase_length);

// One row of the loss curve. Adversarial fields are NaN in phase 1.
struct LossRecord {
  std::int64_t iteration = 0;
  int phase = 1;
  double nll_npd = 0.0;
  double adv_loss = 0.0;
  double disc_real_p = 0.0;
  double disc_fake_p = 0.0;
};

// Default sampling temperature: 0.9 after NLL-only training, 1.0 once the
// adversarial phase has run.
double DefaultTemperature(int phase);

struct TrainerOptions {
  // Write checkpoints and the loss curve into config.out_dir.
  bool write_artifacts = true;
  // Progress lines on stderr every this many iterations (0 = silent).
  int log_every = 0;
};

// Two-phase trainer. Phase 1 minimizes the fidelity NLL; phase 2 alternates a
// generator step on nll + lambda * L_adv with a discriminator step on
// -L_adv. All randomness comes from separate streams of the run seed
// (model init, data, latents, discriminator init), which keeps the NLL path
// identical between phase 1 and a lambda = 0 phase 2.
class Trainer {
 public:
  Trainer(const RunConfig& config, Dataset train, Dataset val,
          TrainerOptions options = {});
  // Rebuilds the model from the checkpoint's config and restores all state.
  static Trainer Resume(const Checkpoint& ckpt, Dataset train, Dataset val,
                        TrainerOptions options = {});

  Trainer(Trainer&&) = default;

  const RunConfig& config() const { return config_; }
  SrModel& model() { return *model_; }
  Discriminator& discriminator() { return disc_; }
  std::int64_t iteration() const { return iteration_; }
  int phase() const;
  bool done() const;
  const std::vector<LossRecord>& history() const { return history_; }

  LossRecord Step();
  // Steps until training is finished or `stop_at` iterations have run
  // (counted over both phases). Returns the records produced by this call.
  std::vector<LossRecord> Run(std::optional<std::int64_t> stop_at = std::nullopt);

  Checkpoint Capture() const;
  // Restores a checkpoint of an identically configured trainer.
  void Restore(const Checkpoint& ckpt);

  // Mean validation nll per dim; used for phase-1 model selection.
  double ValidationNll();
  // nll/dim - 0.01 * LR-PSNR on the validation set; phase-2 selection.
  double ValidationAdversarialProxy();

  std::string CurveCsv() const;

 private:
  LossRecord Phase1Step(std::int64_t local);
  LossRecord Phase2Step(std::int64_t local);
  void AfterStep(const LossRecord& record);
  void CheckFinite(const char* what, double value) const;
  void WriteArtifacts(const std::string& tag) const;

  RunConfig config_;
  Dataset train_;
  Dataset val_;
  TrainerOptions options_;
  std::unique_ptr<SrModel> model_;
  Discriminator disc_;
  Adam gen_opt_;
  Adam disc_opt_;
  Rng data_rng_;
  Rng latent_rng_;
  std::int64_t iteration_ = 0;
  std::vector<LossRecord> history_;
  double best_score_[2] = {0.0, 0.0};
  bool has_best_[2] = {false, false};
};

struct EvalRow {
  std::string image_id;
  double psnr_db = 0.0;
  double lr_psnr_db = 0.0;
  double nll_npd = 0.0;
};

// Per-image metrics at temperature tau followed by a "mean" row. Image i
// samples from its own stream of `seed`, so results do not depend on the
// thread count.
std::vector<EvalRow> Evaluate(SrModel& model, const Dataset& data, double tau,
                              std::uint64_t seed, int threads = 1);
std::string EvalCsv(const std::vector<EvalRow>& rows, const std::string& header);

// Metrics of the bicubic-upsampled LR used as the SR output.
std::vector<EvalRow> EvaluateBicubicBaseline(const Dataset& data);

struct SweepRow {
  double tau = 0.0;
  double lr_psnr_db = 0.0;
  double psnr_db = 0.0;
  double nll_npd = 0.0;
};

inline const std::vector<double> kDefaultTemperatures = {0.0, 0.5, 0.8, 0.9, 1.0};

// Rows sorted by tau ascending.
std::vector<SweepRow> TemperatureSweep(SrModel& model, const Dataset& data,
                                       std::vector<double> taus,
                                       std::uint64_t seed, int threads = 1);
std::string SweepCsv(const std::vector<SweepRow>& rows, const std::string& header);

struct KSweepRow {
  std::string k;  // flow steps, or "L1" for the one-layer baseline
  std::vector<std::uint64_t> seeds;
  std::vector<double> lr_psnr_per_seed;
  std::vector<double> nll_per_seed;
  double lr_psnr_db = 0.0;  // means over seeds
  double psnr_db = 0.0;
  double nll_npd = 0.0;
};

// Trains one model per (K, seed) with identical settings and evaluates it on
// `test` at the phase-appropriate default temperature.
std::vector<KSweepRow> KSweep(const RunConfig& base, const std::vector<std::string>& ks,
                              const std::vector<std::uint64_t>& seeds,
                              const Dataset& train, const Dataset& val,
                              const Dataset& test, TrainerOptions options = {});
std::string KSweepCsv(const std::vector<KSweepRow>& rows, const std::string& header);

// Model and metadata restored from a trainer checkpoint, for inference.
struct LoadedModel {
  RunConfig config;
  std::unique_ptr<SrModel> model;
  int phase = 1;
};
LoadedModel LoadModel(const Checkpoint& ckpt);

// "# "-prefixed copy of the config for CSV provenance.
std::string CommentBlock(const std::string& text);

// Train/validation split as configured: the last val_images pairs validate.
std::pair<Dataset, Dataset> LoadRunData(const RunConfig& config);

}  // namespace flowfid

#endif  // FLOWFID_TRAINER_HPP_
