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

#include "flowfid/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "flowfid/error.hpp"
#include "flowfid/image.hpp"
#include "flowfid/ops.hpp"
#include "flowfid/parallel.hpp"

namespace flowfid {
namespace {

// Stream ids under the run seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kDataStream = 2;
constexpr std::uint64_t kLatentStream = 3;
constexpr std::uint64_t kDiscStream = 4;
constexpr std::uint64_t kValidationStream = 5;

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::string Num(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

double ParseNum(const std::string& s) {
  if (s.empty()) return kNan;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw FormatError("bad number '" + s + "' in checkpoint history");
  }
  return v;
}

Discriminator MakeDiscriminator(const RunConfig& config) {
  Rng rng(config.train.seed, kDiscStream);
  return Discriminator(config.disc(), rng);
}

std::unique_ptr<SrModel> MakeModel(const RunConfig& config) {
  Rng rng(config.train.seed, kInitStream);
  return BuildModel(config, rng);
}

StateList ModelState(const SrModel& model) {
  StateList s;
  model.Collect(s);
  return s;
}

StateList DiscState(const Discriminator& d) {
  StateList s;
  d.Collect("disc", s);
  return s;
}

void CaptureAdam(const Adam& opt, const std::string& tag, Checkpoint& ckpt) {
  const auto& params = opt.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    ckpt.optimizer.push_back({tag + ".m/" + params[i].path, params[i].tensor.shape(),
                              opt.state().m[i]});
    ckpt.optimizer.push_back({tag + ".v/" + params[i].path, params[i].tensor.shape(),
                              opt.state().v[i]});
  }
  ckpt.state.emplace_back(tag + ".step", std::to_string(opt.state().step));
}

void RestoreAdam(Adam& opt, const std::string& tag, const Checkpoint& ckpt) {
  const auto& params = opt.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (const char* which : {".m/", ".v/"}) {
      const Block& b = ckpt.OptimizerBlock(tag + which + params[i].path);
      if (b.shape != params[i].tensor.shape()) {
        throw FormatError("optimizer block '" + b.path + "' has wrong shape");
      }
      auto& dst = which[1] == 'm' ? opt.state().m[i] : opt.state().v[i];
      dst = b.data;
    }
  }
  opt.state().step = std::stoll(ckpt.StateValue(tag + ".step"));
}

double MeanOf(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? kNan : s / static_cast<double>(v.size());
}

}  // namespace

Tensor InjectNoise(const Tensor& y, double amplitude, Rng& rng) {
  if (amplitude == 0.0) return y;
  return y + rng.UniformTensor(y.shape(), -0.5 * amplitude, 0.5 * amplitude);
}

double ScheduledLr(double base, std::int64_t i, std::int64_t length) {
  double lr = base;
  if (2 * i >= length) lr *= 0.5;
  if (4 * i >= 3 * length) lr *= 0.5;
  return lr;
}

double DefaultTemperature(int phase) { return phase >= 2 ? 1.0 : 0.9; }

Trainer::Trainer(const RunConfig& config, Dataset train, Dataset val,
                 TrainerOptions options)
    : config_(config),
      train_(std::move(train)),
      val_(std::move(val)),
      options_(options),
      model_((config_.Sync(), config_.Validate(), MakeModel(config_))),
      disc_(MakeDiscriminator(config_)),
      gen_opt_(ModelState(*model_)),
      disc_opt_(DiscState(disc_)),
      data_rng_(config_.train.seed, kDataStream),
      latent_rng_(config_.train.seed, kLatentStream) {
  if (train_.size() == 0) throw ConfigError("training set is empty");
  if (train_.scale() != config_.data.scale) {
    throw ConfigError("dataset scale " + std::to_string(train_.scale()) +
                      " differs from data.scale " +
                      std::to_string(config_.data.scale));
  }
}

Trainer Trainer::Resume(const Checkpoint& ckpt, Dataset train, Dataset val,
                        TrainerOptions options) {
  Trainer t(RunConfig::Parse(ckpt.config_text), std::move(train), std::move(val),
            options);
  t.Restore(ckpt);
  return t;
}

int Trainer::phase() const {
  return iteration_ < config_.train.phase1_iters || config_.train.phase2_iters == 0
             ? 1
             : 2;
}

bool Trainer::done() const {
  return iteration_ >= config_.train.phase1_iters + config_.train.phase2_iters;
}

void Trainer::CheckFinite(const char* what, double value) const {
  if (!std::isfinite(value)) {
    throw NumericError(std::string(what) + " is not finite at iteration " +
                       std::to_string(iteration_) + " (phase " +
                       std::to_string(phase()) + "); aborting");
  }
}

LossRecord Trainer::Phase1Step(std::int64_t local) {
  const auto& t = config_.train;
  ImageBatch batch = train_.SampleBatch(t.batch, t.patch, data_rng_);
  Tensor hr = InjectNoise(batch.hr, t.noise, data_rng_);
  gen_opt_.ZeroGrad();
  Tensor loss = Mean(model_->NllPerDim(hr, batch.lr));
  CheckFinite("nll", loss.item());
  loss.backward();
  gen_opt_.Step(ScheduledLr(t.lr, local, t.phase1_iters));
  return {iteration_, 1, loss.item(), kNan, kNan, kNan};
}

LossRecord Trainer::Phase2Step(std::int64_t local) {
  const auto& t = config_.train;
  const double lambda = config_.ResolvedLambdaAdv();
  ImageBatch batch = train_.SampleBatch(t.batch, t.patch, data_rng_);
  Tensor hr = InjectNoise(batch.hr, t.noise, data_rng_);

  // Generator: nll + lambda * L_adv with the discriminator held fixed.
  gen_opt_.ZeroGrad();
  disc_opt_.ZeroGrad();
  Tensor nll = Mean(model_->NllPerDim(hr, batch.lr));
  Tensor fake = model_->Generate(batch.lr, t.train_tau, latent_rng_);
  AdversarialLosses adv = ComputeAdversarialLosses(hr, fake, disc_, t.adv);
  Tensor gen_loss = nll + lambda * adv.gen_loss;
  CheckFinite("nll", nll.item());
  CheckFinite("adversarial loss", adv.l_adv.item());
  gen_loss.backward();
  gen_opt_.Step(ScheduledLr(t.lr, local, t.phase2_iters));

  // Discriminator: minimize -L_adv on the same (now frozen) fake.
  disc_opt_.ZeroGrad();
  AdversarialLosses d = ComputeAdversarialLosses(hr, fake.detach(), disc_, t.adv);
  CheckFinite("discriminator objective", d.disc_objective.item());
  d.disc_objective.backward();
  disc_opt_.Step(ScheduledLr(config_.ResolvedDiscLr(), local, t.phase2_iters));

  return {iteration_, 2, nll.item(), adv.l_adv.item(), adv.real_probability,
          adv.fake_probability};
}

LossRecord Trainer::Step() {
  if (done()) throw Error("training already finished");
  const int p = phase();
  const std::int64_t local =
      p == 1 ? iteration_ : iteration_ - config_.train.phase1_iters;
  LossRecord r = p == 1 ? Phase1Step(local) : Phase2Step(local);
  ++iteration_;
  AfterStep(r);
  return r;
}

void Trainer::AfterStep(const LossRecord& r) {
  history_.push_back(r);
  const auto& t = config_.train;
  const std::int64_t length = r.phase == 1 ? t.phase1_iters : t.phase2_iters;
  const std::int64_t local = r.phase == 1 ? iteration_ : iteration_ - t.phase1_iters;
  if (options_.log_every > 0 &&
      (local % options_.log_every == 0 || local == length)) {
    std::cerr << "[phase " << r.phase << "] iter " << local << "/" << length
              << "  nll " << r.nll_npd << " nats/dim";
    if (r.phase == 2) {
      std::cerr << "  adv " << r.adv_loss << "  d(real) " << r.disc_real_p
                << "  d(fake) " << r.disc_fake_p;
    }
    std::cerr << "\n";
  }
  const bool phase_end = local == length;
  if (local % t.eval_every != 0 && !phase_end) return;
  const int slot = r.phase - 1;
  bool improved = false;
  if (val_.size() > 0) {
    const double score = r.phase == 1 ? ValidationNll() : ValidationAdversarialProxy();
    if (!has_best_[slot] || score < best_score_[slot]) {
      best_score_[slot] = score;
      has_best_[slot] = true;
      improved = true;
    }
  }
  if (!options_.write_artifacts) return;
  const std::string tag = "phase" + std::to_string(r.phase);
  if (improved) WriteArtifacts(tag + "_best");
  WriteArtifacts("latest");
  if (phase_end) WriteArtifacts(tag);
}

std::vector<LossRecord> Trainer::Run(std::optional<std::int64_t> stop_at) {
  std::vector<LossRecord> out;
  while (!done() && (!stop_at || iteration_ < *stop_at)) out.push_back(Step());
  return out;
}

double Trainer::ValidationNll() {
  NoGradGuard no_grad;
  std::vector<double> v;
  for (std::size_t i = 0; i < val_.size(); ++i) {
    const auto& p = val_.pair(i);
    v.push_back(model_->NllPerDim(p.hr, p.lr).item());
  }
  return MeanOf(v);
}

double Trainer::ValidationAdversarialProxy() {
  const auto rows = Evaluate(*model_, val_, DefaultTemperature(2),
                             config_.train.seed ^ (kValidationStream << 32));
  const EvalRow& mean = rows.back();
  return mean.nll_npd - 0.01 * mean.lr_psnr_db;
}

Checkpoint Trainer::Capture() const {
  Checkpoint ckpt;
  ckpt.config_text = config_.ToText();
  StateList all = ModelState(*model_);
  const StateList disc = DiscState(disc_);
  all.insert(all.end(), disc.begin(), disc.end());
  ckpt.params = CaptureBlocks(all);
  CaptureAdam(gen_opt_, "gen", ckpt);
  CaptureAdam(disc_opt_, "disc", ckpt);
  ckpt.state.emplace_back("iteration", std::to_string(iteration_));
  ckpt.state.emplace_back("phase", std::to_string(iteration_ > config_.train.phase1_iters ? 2 : 1));
  ckpt.state.emplace_back("rng.data", data_rng_.Serialize());
  ckpt.state.emplace_back("rng.latent", latent_rng_.Serialize());
  for (int s = 0; s < 2; ++s) {
    ckpt.state.emplace_back("best.phase" + std::to_string(s + 1),
                            has_best_[s] ? Num(best_score_[s]) : "none");
  }
  std::string rows;
  for (const auto& r : history_) {
    rows += std::to_string(r.iteration) + "," + std::to_string(r.phase) + "," +
            Num(r.nll_npd) + "," + Num(r.adv_loss) + "," + Num(r.disc_real_p) +
            "," + Num(r.disc_fake_p) + "\n";
  }
  ckpt.state.emplace_back("history", rows);
  return ckpt;
}

void Trainer::Restore(const Checkpoint& ckpt) {
  StateList all = ModelState(*model_);
  const StateList disc = DiscState(disc_);
  all.insert(all.end(), disc.begin(), disc.end());
  RestoreBlocks(ckpt.params, all);
  RestoreAdam(gen_opt_, "gen", ckpt);
  RestoreAdam(disc_opt_, "disc", ckpt);
  iteration_ = std::stoll(ckpt.StateValue("iteration"));
  data_rng_ = Rng::Deserialize(ckpt.StateValue("rng.data"));
  latent_rng_ = Rng::Deserialize(ckpt.StateValue("rng.latent"));
  for (int s = 0; s < 2; ++s) {
    const std::string& v = ckpt.StateValue("best.phase" + std::to_string(s + 1));
    has_best_[s] = v != "none";
    best_score_[s] = has_best_[s] ? ParseNum(v) : 0.0;
  }
  history_.clear();
  std::istringstream is(ckpt.StateValue("history"));
  std::string line;
  while (std::getline(is, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    while (f.size() < 6) f.emplace_back();
    history_.push_back({std::stoll(f[0]), std::stoi(f[1]), ParseNum(f[2]),
                        ParseNum(f[3]), ParseNum(f[4]), ParseNum(f[5])});
  }
}

std::string Trainer::CurveCsv() const {
  std::string out = CommentBlock(config_.ToText());
  out += "iteration,nll_nats_per_dim,adv_loss,disc_real_p,disc_fake_p\n";
  for (const auto& r : history_) {
    out += std::to_string(r.iteration) + "," + Num(r.nll_npd) + "," +
           Num(r.adv_loss) + "," + Num(r.disc_real_p) + "," + Num(r.disc_fake_p) +
           "\n";
  }
  return out;
}

void Trainer::WriteArtifacts(const std::string& tag) const {
  const std::filesystem::path dir(config_.out_dir);
  std::filesystem::create_directories(dir);
  SaveCheckpoint((dir / (tag + ".ckpt")).string(), Capture());
  std::ofstream csv(dir / "curve.csv", std::ios::trunc);
  csv << CurveCsv();
}

std::vector<EvalRow> Evaluate(SrModel& model, const Dataset& data, double tau,
                              std::uint64_t seed, int threads) {
  std::vector<EvalRow> rows(data.size());
  auto one = [&](std::size_t i) {
    NoGradGuard no_grad;
    const ImagePair& p = data.pair(i);
    EvalRow& row = rows[i];
    row.image_id = p.id;
    // nll first: on an untrained flow this performs the ActNorm init.
    row.nll_npd = model.NllPerDim(p.hr, p.lr).item();
    Rng rng(seed, 1000 + i);
    Tensor sr = Clamp(model.Generate(p.lr, tau, rng), 0.0, 1.0);
    row.psnr_db = Psnr(sr, p.hr);
    row.lr_psnr_db = LrPsnr(sr, p.lr, p.scale);
  };
  if (!rows.empty()) one(0);
  if (rows.size() > 1) {
    ParallelFor(rows.size() - 1, threads, [&](std::size_t i) { one(i + 1); });
  }
  EvalRow mean{"mean", 0.0, 0.0, 0.0};
  for (const auto& r : rows) {
    mean.psnr_db += r.psnr_db;
    mean.lr_psnr_db += r.lr_psnr_db;
    mean.nll_npd += r.nll_npd;
  }
  const double n = static_cast<double>(std::max<std::size_t>(rows.size(), 1));
  mean.psnr_db /= n;
  mean.lr_psnr_db /= n;
  mean.nll_npd /= n;
  rows.push_back(mean);
  return rows;
}

std::vector<EvalRow> EvaluateBicubicBaseline(const Dataset& data) {
  std::vector<EvalRow> rows;
  EvalRow mean{"mean", 0.0, 0.0, kNan};
  for (std::size_t i = 0; i < data.size(); ++i) {
    const ImagePair& p = data.pair(i);
    Tensor sr = Clamp(BicubicUpsample(p.lr, p.scale), 0.0, 1.0);
    rows.push_back({p.id, Psnr(sr, p.hr), LrPsnr(sr, p.lr, p.scale), kNan});
    mean.psnr_db += rows.back().psnr_db;
    mean.lr_psnr_db += rows.back().lr_psnr_db;
  }
  const double n = static_cast<double>(std::max<std::size_t>(rows.size(), 1));
  mean.psnr_db /= n;
  mean.lr_psnr_db /= n;
  rows.push_back(mean);
  return rows;
}

std::string EvalCsv(const std::vector<EvalRow>& rows, const std::string& header) {
  std::string out = CommentBlock(header);
  out += "image_id,psnr_db,lr_psnr_db,nll_npd\n";
  for (const auto& r : rows) {
    out += r.image_id + "," + Num(r.psnr_db) + "," + Num(r.lr_psnr_db) + "," +
           Num(r.nll_npd) + "\n";
  }
  return out;
}

std::vector<SweepRow> TemperatureSweep(SrModel& model, const Dataset& data,
                                       std::vector<double> taus,
                                       std::uint64_t seed, int threads) {
  std::sort(taus.begin(), taus.end());
  std::vector<SweepRow> rows;
  for (double tau : taus) {
    const EvalRow mean = Evaluate(model, data, tau, seed, threads).back();
    rows.push_back({tau, mean.lr_psnr_db, mean.psnr_db, mean.nll_npd});
  }
  return rows;
}

std::string SweepCsv(const std::vector<SweepRow>& rows, const std::string& header) {
  std::string out = CommentBlock(header);
  out += "tau,lr_psnr_db,psnr_db,nll_npd\n";
  for (const auto& r : rows) {
    out += Num(r.tau) + "," + Num(r.lr_psnr_db) + "," + Num(r.psnr_db) + "," +
           Num(r.nll_npd) + "\n";
  }
  return out;
}

std::vector<KSweepRow> KSweep(const RunConfig& base, const std::vector<std::string>& ks,
                              const std::vector<std::uint64_t>& seeds,
                              const Dataset& train, const Dataset& val,
                              const Dataset& test, TrainerOptions options) {
  std::vector<KSweepRow> rows;
  for (const std::string& k : ks) {
    KSweepRow row;
    row.k = k;
    row.seeds = seeds;
    std::vector<double> psnr;
    for (std::uint64_t seed : seeds) {
      RunConfig c = base;
      c.train.seed = seed;
      if (k == "L1") {
        c.model = ModelKind::kL1;
      } else {
        c.model = ModelKind::kFlow;
        try {
          c.flow.steps = std::stoi(k);
        } catch (const std::exception&) {
          throw ConfigError("k-sweep entry '" + k + "' is neither an integer nor L1");
        }
      }
      c.out_dir = (std::filesystem::path(base.out_dir) /
                   ("k" + k + "_seed" + std::to_string(seed)))
                      .string();
      Trainer trainer(c, train, val, options);
      trainer.Run();
      const int phase = c.train.phase2_iters > 0 ? 2 : 1;
      const EvalRow mean =
          Evaluate(trainer.model(), test, DefaultTemperature(phase), seed).back();
      row.lr_psnr_per_seed.push_back(mean.lr_psnr_db);
      row.nll_per_seed.push_back(mean.nll_npd);
      psnr.push_back(mean.psnr_db);
    }
    row.lr_psnr_db = MeanOf(row.lr_psnr_per_seed);
    row.nll_npd = MeanOf(row.nll_per_seed);
    row.psnr_db = MeanOf(psnr);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string KSweepCsv(const std::vector<KSweepRow>& rows, const std::string& header) {
  std::string out = CommentBlock(header);
  out += "k,seeds,nll_npd,lr_psnr_db,psnr_db\n";
  for (const auto& r : rows) {
    out += r.k + "," + std::to_string(r.seeds.size()) + "," + Num(r.nll_npd) + "," +
           Num(r.lr_psnr_db) + "," + Num(r.psnr_db) + "\n";
  }
  return out;
}

LoadedModel LoadModel(const Checkpoint& ckpt) {
  LoadedModel out;
  out.config = RunConfig::Parse(ckpt.config_text);
  out.model = MakeModel(out.config);
  const StateList state = ModelState(*out.model);
  if (ckpt.params.size() < state.size()) {
    throw FormatError("checkpoint holds fewer blocks than the model needs");
  }
  RestoreBlocks({ckpt.params.begin(), ckpt.params.begin() + state.size()}, state);
  out.phase = std::stoi(ckpt.StateValue("phase"));
  return out;
}

std::string CommentBlock(const std::string& text) {
  std::string out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) out += line.empty() ? "#\n" : "# " + line + "\n";
  return out;
}

std::pair<Dataset, Dataset> LoadRunData(const RunConfig& config) {
  Dataset all;
  if (config.data.synthetic > 0) {
    all = MakeSyntheticDataset(config.data.synthetic, config.data.synthetic_size,
                               config.data.scale, config.data.seed);
  } else {
    DatasetManifest m = LoadManifest(config.data.manifest);
    if (m.scale != config.data.scale) {
      throw ConfigError("manifest scale " + std::to_string(m.scale) +
                        " differs from data.scale " +
                        std::to_string(config.data.scale));
    }
    all = LoadDataset(m);
  }
  const std::size_t val =
      std::min<std::size_t>(static_cast<std::size_t>(config.train.val_images),
                            all.size() > 0 ? all.size() - 1 : 0);
  return {all.Slice(0, all.size() - val), all.Slice(all.size() - val, all.size())};
}

}  // namespace flowfid
