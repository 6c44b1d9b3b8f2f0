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

#include "flowfid/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "flowfid/error.hpp"

namespace flowfid {
namespace {

namespace pt = boost::property_tree;

// Shortest text that parses back to the same double.
std::string FormatDouble(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::string FormatTaps(const std::vector<int>& taps) {
  std::string s;
  for (std::size_t i = 0; i < taps.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(taps[i]);
  }
  return s;
}

std::vector<int> ParseTaps(const std::string& text) {
  std::vector<int> taps;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) taps.push_back(std::stoi(item));
  return taps;
}

std::string FormatOptional(const std::optional<double>& v) {
  return v ? FormatDouble(*v) : "auto";
}

std::optional<double> ParseOptional(const std::string& text) {
  if (text == "auto") return std::nullopt;
  return std::stod(text);
}

const std::set<std::string>& KnownKeys() {
  static const std::set<std::string> keys = {
      "model.kind",          "flow.levels",         "flow.steps",
      "flow.hidden",         "flow.prior",          "flow.clamp",
      "flow.dequant_bins",   "encoder.width",       "encoder.blocks",
      "encoder.taps",        "discriminator.width", "train.phase1_iters",
      "train.phase2_iters",  "train.lr",            "train.disc_lr",
      "train.lambda_adv",    "train.batch",         "train.patch",
      "train.noise",         "train.seed",          "train.adv",
      "train.train_tau",     "train.eval_every",    "train.val_images",
      "data.manifest",       "data.synthetic",      "data.synthetic_size",
      "data.seed",           "data.scale",          "output.dir"};
  return keys;
}

}  // namespace

std::string ModelKindName(ModelKind kind) {
  switch (kind) {
    case ModelKind::kFlow: return "flow";
    case ModelKind::kL1: return "l1";
    case ModelKind::kLaplace: return "laplace";
  }
  return "?";
}

ModelKind ParseModelKind(const std::string& name) {
  if (name == "flow") return ModelKind::kFlow;
  if (name == "l1") return ModelKind::kL1;
  if (name == "laplace") return ModelKind::kLaplace;
  throw ConfigError("model.kind must be flow, l1 or laplace (got '" + name + "')");
}

RunConfig RunConfig::Defaults() {
  RunConfig c;
  c.flow.hidden_channels = 32;
  c.flow.dequant_bins = 32;
  c.encoder.width = 32;
  c.Sync();
  return c;
}

void RunConfig::Sync() {
  flow.scale_factor = data.scale;
  flow.image_channels = encoder.in_channels;
  flow.cond_channels = encoder.out_channels();
}

std::vector<std::string> RunConfig::Problems() const {
  std::vector<std::string> out;
  auto check = [&](auto&& fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      out.emplace_back(e.what());
    }
  };
  check([&] { flow.Validate(); });
  check([&] { encoder.Validate(); });
  check([&] { disc().Validate(); });
  const auto& t = train;
  if (t.phase1_iters < 0) out.emplace_back("train.phase1_iters must be >= 0");
  if (t.phase2_iters < 0) out.emplace_back("train.phase2_iters must be >= 0");
  if (!(t.lr > 0)) out.emplace_back("train.lr must be positive");
  if (t.disc_lr && !(*t.disc_lr > 0)) out.emplace_back("train.disc_lr must be positive");
  if (t.lambda_adv && !(*t.lambda_adv >= 0)) {
    out.emplace_back("train.lambda_adv must be >= 0");
  }
  if (t.batch < 1) out.emplace_back("train.batch must be >= 1");
  if (t.patch < 1 || t.patch % data.scale != 0) {
    out.emplace_back("train.patch must be a positive multiple of data.scale");
  }
  const int pyramid = 1 << flow.levels;
  if (model == ModelKind::kFlow && data.scale > 0 && t.patch % pyramid != 0) {
    out.emplace_back("train.patch must be divisible by 2^flow.levels");
  }
  if (!(t.noise >= 0)) out.emplace_back("train.noise must be >= 0");
  if (!(t.train_tau >= 0)) out.emplace_back("train.train_tau must be >= 0");
  if (t.eval_every < 1) out.emplace_back("train.eval_every must be >= 1");
  if (t.val_images < 0) out.emplace_back("train.val_images must be >= 0");
  if (data.manifest.empty() && data.synthetic <= 0) {
    out.emplace_back("data.manifest is required (or set data.synthetic > 0)");
  }
  if (data.scale < 1) out.emplace_back("data.scale must be >= 1");
  if (data.synthetic > 0 && data.synthetic_size % data.scale != 0) {
    out.emplace_back("data.synthetic_size must be a multiple of data.scale");
  }
  if (data.synthetic > 0 && data.synthetic_size < t.patch) {
    out.emplace_back("data.synthetic_size must be >= train.patch");
  }
  if (data.synthetic > 0 && t.val_images >= data.synthetic) {
    out.emplace_back("train.val_images must be smaller than data.synthetic");
  }
  if (out_dir.empty()) out.emplace_back("output.dir must not be empty");
  return out;
}

void RunConfig::Validate() const {
  const auto problems = Problems();
  if (problems.empty()) return;
  std::string msg = "invalid configuration:";
  for (const auto& p : problems) msg += "\n  " + p;
  throw ConfigError(msg);
}

double RunConfig::ResolvedDiscLr() const {
  if (train.disc_lr) return *train.disc_lr;
  return data.scale >= 8 ? 1e-4 : 1e-3;
}

double RunConfig::ResolvedLambdaAdv() const {
  if (train.lambda_adv) return *train.lambda_adv;
  return data.scale >= 8 ? 0.1 : 1e-2;
}

DiscriminatorConfig RunConfig::disc() const {
  DiscriminatorConfig d;
  d.in_channels = encoder.in_channels;
  d.width = disc_width;
  d.image_size = train.patch;
  return d;
}

std::string RunConfig::ToText() const {
  std::ostringstream os;
  os << "[model]\nkind = " << ModelKindName(model) << "\n\n";
  os << "[flow]\nlevels = " << flow.levels << "\nsteps = " << flow.steps
     << "\nhidden = " << flow.hidden_channels << "\nprior = " << PriorName(flow.prior)
     << "\nclamp = " << FormatDouble(flow.scale_clamp)
     << "\ndequant_bins = " << flow.dequant_bins << "\n\n";
  os << "[encoder]\nwidth = " << encoder.width << "\nblocks = " << encoder.blocks
     << "\ntaps = " << FormatTaps(encoder.taps) << "\n\n";
  os << "[discriminator]\nwidth = " << disc_width << "\n\n";
  os << "[train]\nphase1_iters = " << train.phase1_iters
     << "\nphase2_iters = " << train.phase2_iters
     << "\nlr = " << FormatDouble(train.lr)
     << "\ndisc_lr = " << FormatOptional(train.disc_lr)
     << "\nlambda_adv = " << FormatOptional(train.lambda_adv)
     << "\nbatch = " << train.batch << "\npatch = " << train.patch
     << "\nnoise = " << FormatDouble(train.noise) << "\nseed = " << train.seed
     << "\nadv = " << AdversarialFormName(train.adv)
     << "\ntrain_tau = " << FormatDouble(train.train_tau)
     << "\neval_every = " << train.eval_every
     << "\nval_images = " << train.val_images << "\n\n";
  os << "[data]\nmanifest = " << data.manifest << "\nsynthetic = " << data.synthetic
     << "\nsynthetic_size = " << data.synthetic_size << "\nseed = " << data.seed
     << "\nscale = " << data.scale << "\n\n";
  os << "[output]\ndir = " << out_dir << "\n";
  return os.str();
}

RunConfig RunConfig::Parse(const std::string& text) {
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }
  std::vector<std::string> problems;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      problems.push_back("key '" + section + "' outside any section");
      continue;
    }
    for (const auto& [key, _] : body) {
      if (!KnownKeys().contains(section + "." + key)) {
        problems.push_back("unknown key " + section + "." + key);
      }
    }
  }

  RunConfig c = Defaults();
  auto get = [&](const std::string& path, auto& dst, auto convert) {
    auto v = tree.get_optional<std::string>(path);
    if (!v) return;
    try {
      dst = convert(*v);
    } catch (const ConfigError& e) {
      problems.push_back(path + ": " + e.what());
    } catch (const std::exception&) {
      problems.push_back(path + ": cannot parse '" + *v + "'");
    }
  };
  auto to_int = [](const std::string& s) {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  };
  auto to_u64 = [](const std::string& s) {
    std::size_t pos = 0;
    const auto v = std::stoull(s, &pos);
    if (pos != s.size() || s.starts_with('-')) throw std::invalid_argument(s);
    return static_cast<std::uint64_t>(v);
  };
  auto to_double = [](const std::string& s) {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  };
  auto to_string = [](const std::string& s) { return s; };

  get("model.kind", c.model, ParseModelKind);
  get("flow.levels", c.flow.levels, to_int);
  get("flow.steps", c.flow.steps, to_int);
  get("flow.hidden", c.flow.hidden_channels, to_int);
  get("flow.prior", c.flow.prior, ParsePrior);
  get("flow.clamp", c.flow.scale_clamp, to_double);
  get("flow.dequant_bins", c.flow.dequant_bins, to_int);
  get("encoder.width", c.encoder.width, to_int);
  get("encoder.blocks", c.encoder.blocks, to_int);
  get("encoder.taps", c.encoder.taps, ParseTaps);
  get("discriminator.width", c.disc_width, to_int);
  get("train.phase1_iters", c.train.phase1_iters, to_int);
  get("train.phase2_iters", c.train.phase2_iters, to_int);
  get("train.lr", c.train.lr, to_double);
  get("train.disc_lr", c.train.disc_lr, ParseOptional);
  get("train.lambda_adv", c.train.lambda_adv, ParseOptional);
  get("train.batch", c.train.batch, to_int);
  get("train.patch", c.train.patch, to_int);
  get("train.noise", c.train.noise, to_double);
  get("train.seed", c.train.seed, to_u64);
  get("train.adv", c.train.adv, ParseAdversarialForm);
  get("train.train_tau", c.train.train_tau, to_double);
  get("train.eval_every", c.train.eval_every, to_int);
  get("train.val_images", c.train.val_images, to_int);
  get("data.manifest", c.data.manifest, to_string);
  get("data.synthetic", c.data.synthetic, to_int);
  get("data.synthetic_size", c.data.synthetic_size, to_int);
  get("data.seed", c.data.seed, to_u64);
  get("data.scale", c.data.scale, to_int);
  get("output.dir", c.out_dir, to_string);
  c.Sync();

  if (!problems.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
  return c;
}

RunConfig RunConfig::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return Parse(ss.str());
}

}  // namespace flowfid
