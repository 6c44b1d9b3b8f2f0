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

#include "flowfid/verify.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "flowfid/config.hpp"
#include "flowfid/discriminator.hpp"
#include "flowfid/error.hpp"
#include "flowfid/gradcheck.hpp"
#include "flowfid/image.hpp"
#include "flowfid/laplace.hpp"
#include "flowfid/models.hpp"
#include "flowfid/ops.hpp"

namespace flowfid {
namespace {

bool EndsWith(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

Tensor Zeros(std::int64_t n) { return Tensor(Shape{n}, 0.0); }

// Autodiff vs central differences for one parameter block, evaluating
// `loss` with the block's values swapped in place.
double BlockGradientError(Tensor param, const StateList& all,
                          const std::function<Tensor()>& loss) {
  ZeroGrad(all);
  loss().backward();
  std::vector<double> analytic(param.numel(), 0.0);
  if (!param.grad().empty()) {
    std::copy(param.grad().begin(), param.grad().end(), analytic.begin());
  }
  const std::vector<double> saved(param.values().begin(), param.values().end());
  Tensor numeric = FiniteDifferenceGradient(
      [&](const Tensor& x) {
        std::copy(x.values().begin(), x.values().end(),
                  param.mutable_values().begin());
        return loss().item();
      },
      Tensor(param.shape(), saved));
  std::copy(saved.begin(), saved.end(), param.mutable_values().begin());
  ZeroGrad(all);
  return MaxRelativeError(analytic, numeric.values());
}

RunConfig TinyRunConfig(ModelKind kind) {
  RunConfig c;
  c.model = kind;
  c.encoder.width = 2;
  c.encoder.blocks = 2;
  c.encoder.taps = {1, 2};
  c.flow.levels = 2;
  c.flow.steps = 1;
  c.flow.hidden_channels = 4;
  c.data.scale = 2;
  c.Sync();
  return c;
}

double LogdetError(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(std::abs(numeric), 1.0);
}

LogdetComparison CompareLayer(const std::string& name, InvertibleLayer& layer,
                              const Tensor& x, const Tensor& cond) {
  NoGradGuard no_grad;
  LogdetComparison c;
  c.layer = name;
  c.analytic = layer.Forward({x, Zeros(1)}, cond).logdet.item();
  const Eigen::MatrixXd jac = FiniteDifferenceJacobian(
      [&](const Tensor& t) { return layer.Forward({t, Zeros(1)}, cond).activation; },
      x);
  c.numeric = LogAbsDeterminant(jac);
  c.error = LogdetError(c.analytic, c.numeric);
  return c;
}

void Randomize(InvertibleLayer& layer, Rng& rng, double scale) {
  StateList s;
  layer.Collect("layer", s);
  RandomizeParameters(s, rng, scale);
}

// Direct six-loop cross-correlation.
std::vector<double> NaiveConv(const Tensor& x, const Tensor& k, const Tensor& b,
                              int stride, int pad, Shape& out_shape) {
  const auto n = x.dim(0), ci = x.dim(1), h = x.dim(2), w = x.dim(3);
  const auto co = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  const auto oh = (h + 2 * pad - kh) / stride + 1;
  const auto ow = (w + 2 * pad - kw) / stride + 1;
  out_shape = {n, co, oh, ow};
  std::vector<double> out(static_cast<std::size_t>(n * co * oh * ow), 0.0);
  for (std::int64_t bn = 0; bn < n; ++bn)
    for (std::int64_t o = 0; o < co; ++o)
      for (std::int64_t y = 0; y < oh; ++y)
        for (std::int64_t xx = 0; xx < ow; ++xx) {
          double acc = b.defined() ? b.at(o) : 0.0;
          for (std::int64_t c = 0; c < ci; ++c)
            for (std::int64_t dy = 0; dy < kh; ++dy)
              for (std::int64_t dx = 0; dx < kw; ++dx) {
                const auto sy = y * stride + dy - pad, sx = xx * stride + dx - pad;
                if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
                acc += x.at(((bn * ci + c) * h + sy) * w + sx) *
                       k.at(((o * ci + c) * kh + dy) * kw + dx);
              }
          out[((bn * co + o) * oh + y) * ow + xx] = acc;
        }
  return out;
}

struct Check {
  bool ok = true;
  std::ostringstream detail;
  void Expect(bool cond, const std::string& what) {
    if (!cond) {
      if (!ok) detail << "; ";
      ok = false;
      detail << what;
    }
  }
};

std::string Sci(double v) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(2) << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// Suites. Each returns (passed, detail).

std::pair<bool, std::string> SuiteAutodiff() {
  using Fn = std::function<Tensor(const Tensor&)>;
  const std::vector<std::pair<std::string, Fn>> unary = {
      {"exp", [](const Tensor& x) { return Exp(x); }},
      {"log", [](const Tensor& x) { return Log(Abs(x) + 0.5); }},
      {"sigmoid", [](const Tensor& x) { return Sigmoid(x); }},
      {"abs", [](const Tensor& x) { return Abs(x); }},
      {"square", [](const Tensor& x) { return Square(x); }},
      {"softplus", [](const Tensor& x) { return Softplus(x); }},
      {"silu", [](const Tensor& x) { return Silu(x); }},
      {"neg", [](const Tensor& x) { return -x; }},
      {"div", [](const Tensor& x) { return 1.0 / (Square(x) + 0.5); }},
      {"mul", [](const Tensor& x) { return x * SliceChannels(x, 0, 1); }},
      {"sub_add", [](const Tensor& x) { return (x - 0.3) + x * 2.0; }},
      {"mean", [](const Tensor& x) { return Mean(x, {1}, true) * x; }},
      {"space_to_depth", [](const Tensor& x) { return Square(SpaceToDepth(x, 2)); }},
      {"avg_pool", [](const Tensor& x) { return Square(AvgPool(x, 2)); }},
      {"upsample", [](const Tensor& x) { return Square(UpsampleNearest(x, 2)); }},
  };
  double worst = 0.0;
  std::string worst_op;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed, 11);
    Tensor x = rng.NormalTensor({2, 3, 4, 4});
    Tensor w = rng.NormalTensor({2, 3, 4, 4});
    Tensor k = rng.NormalTensor({2, 3, 3, 3}, 0.5);
    std::vector<std::pair<std::string, Fn>> ops = unary;
    ops.emplace_back("conv2d", [k](const Tensor& t) {
      return Silu(Conv2d(t, k, Tensor(), 1, 1));
    });
    for (const auto& [name, f] : ops) {
      auto scalar = [&](const Tensor& t) {
        Tensor y = f(t);
        Tensor ww = y.shape() == w.shape() ? w : Tensor(y.shape(), 0.7);
        return Sum(y * ww);
      };
      Tensor leaf = x.Clone().set_requires_grad(true);
      scalar(leaf).backward();
      Tensor numeric = FiniteDifferenceGradient(
          [&](const Tensor& t) { return scalar(t).item(); }, x);
      const double err = MaxRelativeError(leaf.grad(), numeric.values());
      if (err > worst) {
        worst = err;
        worst_op = name;
      }
    }
  }
  Check c;
  c.Expect(worst < 1e-5, "op " + worst_op + " rel err " + Sci(worst));
  // Gradient of sum(sigmoid(W x)) w.r.t. a 4x4 W.
  {
    Rng rng(7, 12);
    Tensor wm = rng.NormalTensor({4, 4});
    Tensor xv = rng.NormalTensor({1, 4});
    Tensor leaf = wm.Clone().set_requires_grad(true);
    Sum(Sigmoid(Linear(xv, leaf, Tensor()))).backward();
    Tensor numeric = FiniteDifferenceGradient(
        [&](const Tensor& t) { return Sum(Sigmoid(Linear(xv, t, Tensor()))).item(); },
        wm);
    const double err = MaxRelativeError(leaf.grad(), numeric.values());
    c.Expect(err < 1e-6, "sigmoid(Wx) rel err " + Sci(err));
    worst = std::max(worst, err);
  }
  return {c.ok, c.ok ? "max rel err " + Sci(worst) : c.detail.str()};
}

std::pair<bool, std::string> SuiteConv() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed, 13);
    const int stride = 1 + static_cast<int>(rng.UniformInt(2));
    const int ksize = 1 + 2 * static_cast<int>(rng.UniformInt(2));
    const int pad = static_cast<int>(rng.UniformInt(2));
    Tensor x = rng.NormalTensor({2, 3, 7, 6});
    Tensor k = rng.NormalTensor({4, 3, ksize, ksize});
    Tensor b = rng.NormalTensor({4});
    Shape shape;
    auto expected = NaiveConv(x, k, b, stride, pad, shape);
    Tensor got = Conv2d(x, k, b, stride, pad);
    if (got.shape() != shape) return {false, "shape mismatch"};
    for (std::size_t i = 0; i < expected.size(); ++i) {
      worst = std::max(worst, std::abs(got.at(i) - expected[i]));
    }
  }
  return {worst < 1e-12, "max abs err " + Sci(worst)};
}

std::pair<bool, std::string> SuiteRoundTrip() {
  double worst = 0.0;
  for (int levels : {1, 2})
    for (int steps = 1; steps <= 4; ++steps)
      for (Prior prior : {Prior::kGaussian, Prior::kLaplace}) {
        FlowConfig c;
        c.levels = levels;
        c.steps = steps;
        c.prior = prior;
        c.cond_channels = 4;
        c.hidden_channels = 8;
        worst = std::max(worst, RoundTripError(c, 100, 31 * levels + steps));
      }
  return {worst < 1e-9, "max |decode(encode(y)) - y| " + Sci(worst)};
}

std::pair<bool, std::string> SuiteLogdet() {
  double worst = 0.0;
  std::string layer;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (const auto& c : LogdetOracle(seed)) {
      if (c.error > worst) {
        worst = c.error;
        layer = c.layer;
      }
    }
  }
  return {worst < 1e-4, "max rel err " + Sci(worst) + (layer.empty() ? "" : " (" + layer + ")")};
}

std::pair<bool, std::string> SuiteGradient() {
  double worst = 0.0;
  std::string block;
  std::size_t count = 0;
  for (const auto& b : GradientSuite(3)) {
    ++count;
    if (b.error > worst) {
      worst = b.error;
      block = b.block;
    }
  }
  return {worst < 1e-5, std::to_string(count) + " blocks, max rel err " + Sci(worst) +
                            " (" + block + ")"};
}

std::pair<bool, std::string> SuiteL1() {
  double flow = 0.0, gap = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto r = L1Equivalence(seed);
    flow = std::max(flow, r.flow_vs_laplace);
    gap = std::max(gap, r.constant_gap);
  }
  return {flow < 1e-12 && gap == 0.0,
          "flow vs laplace " + Sci(flow) + ", constant gap " + Sci(gap)};
}

std::pair<bool, std::string> SuiteActNorm() {
  double mean = 0.0, dev = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = ActNormInitStats(seed);
    mean = std::max(mean, s.max_abs_mean);
    dev = std::max(dev, s.max_abs_std_dev);
  }
  return {mean < 1e-10 && dev < 1e-10, "|mu| " + Sci(mean) + ", |sigma-1| " + Sci(dev)};
}

std::pair<bool, std::string> SuiteOrthoMix() {
  double ortho = 0.0, logdet = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    for (int c : {2, 4, 8, 12}) {
      const auto s = OrthoMixCheck(seed, c);
      ortho = std::max(ortho, s.orthonormality);
      logdet = std::max(logdet, s.max_abs_logdet);
    }
  return {ortho < 1e-12 && logdet == 0.0,
          "||QtQ-I|| " + Sci(ortho) + ", |logdet| " + Sci(logdet)};
}

std::pair<bool, std::string> SuiteKernel() {
  double worst = 0.0;
  for (auto [in, out] : std::vector<std::pair<int, int>>{
           {32, 8}, {24, 4}, {48, 6}, {7, 3}, {8, 32}, {5, 11}, {16, 16}}) {
    const ResampleAxis axis = BicubicAxis(in, out);
    for (const auto& taps : axis.taps) {
      double s = 0.0;
      for (const auto& [idx, weight] : taps) s += weight;
      worst = std::max(worst, std::abs(s - 1.0));
    }
  }
  Check c;
  c.Expect(worst < 1e-12, "weight sum err " + Sci(worst));
  c.Expect(CubicKernel(0.0) == 1.0 && CubicKernel(1.0) == 0.0 && CubicKernel(2.0) == 0.0 &&
               CubicKernel(-1.0) == 0.0 && CubicKernel(-2.0) == 0.0,
           "kernel not interpolating");
  Tensor flat(Shape{1, 3, 16, 16}, 0.37);
  Tensor down = BicubicDownsample(flat, 4);
  double flat_err = 0.0;
  for (double v : down.values()) flat_err = std::max(flat_err, std::abs(v - 0.37));
  c.Expect(flat_err < 1e-15, "constant image changed by " + Sci(flat_err));
  return {c.ok, c.ok ? "weight sum err " + Sci(worst) : c.detail.str()};
}

std::pair<bool, std::string> SuiteMetrics() {
  Check c;
  Tensor a(Shape{1, 3, 8, 8}, 0.1);
  Tensor b(Shape{1, 3, 8, 8}, 0.0);
  const double p20 = Psnr(a, b);
  c.Expect(p20 == 20.0, "psnr(0.1 diff) = " + std::to_string(p20));
  const double cap = Psnr(a, a);
  c.Expect(cap == kPsnrCapDb, "identical images not capped");
  c.Expect(Psnr(a, b) == Psnr(b, a), "psnr not symmetric");
  Rng rng(5, 14);
  Tensor hr = Clamp(rng.UniformTensor({1, 3, 16, 16}, 0.0, 1.0), 0.0, 1.0);
  Tensor lr = BicubicDownsample(hr, 4);
  c.Expect(LrPsnr(hr, lr, 4) == kPsnrCapDb, "consistent pair below cap");
  return {c.ok, c.ok ? "psnr 20.0 dB exact, cap 99 dB" : c.detail.str()};
}

}  // namespace

void RandomizeParameters(const StateList& state, Rng& rng, double scale,
                         bool mark_initialized) {
  for (const auto& s : state) {
    Tensor t = s.tensor;
    auto v = t.mutable_values();
    if (EndsWith(s.path, ".initialized")) {
      std::fill(v.begin(), v.end(), mark_initialized ? 1.0 : 0.0);
      continue;
    }
    if (!s.trainable) continue;
    const bool actnorm_scale = EndsWith(s.path, "actnorm.scale");
    for (double& x : v) {
      x = actnorm_scale ? std::exp(scale * rng.Normal()) : x + scale * rng.Normal();
    }
  }
}

LrEmbedding RandomEmbedding(const FlowNetwork& flow, const Shape& y_shape,
                            int channels, Rng& rng) {
  LrEmbedding e;
  for (auto [h, w] : flow.LevelGrids(y_shape[2], y_shape[3])) {
    e.levels.push_back(rng.NormalTensor({y_shape[0], channels, h, w}));
  }
  return e;
}

double RoundTripError(const FlowConfig& config, int inputs, std::uint64_t seed,
                      int height, int width, double param_scale) {
  NoGradGuard no_grad;
  Rng rng(seed, 21);
  FlowNetwork flow(config, rng);
  StateList state;
  flow.Collect("flow", state);
  // ActNorm layers initialize from the batch, as on a first training step.
  RandomizeParameters(state, rng, param_scale, /*mark_initialized=*/false);
  Tensor y = rng.UniformTensor({inputs, config.image_channels, height, width}, 0.0, 1.0);
  LrEmbedding e = RandomEmbedding(flow, y.shape(), config.cond_channels, rng);
  Tensor back = flow.Decode(flow.Encode(y, e).latent, e);
  double worst = 0.0;
  for (std::int64_t i = 0; i < y.numel(); ++i) {
    worst = std::max(worst, std::abs(back.at(i) - y.at(i)));
  }
  return worst;
}

std::vector<LogdetComparison> LogdetOracle(std::uint64_t seed) {
  Rng rng(seed, 22);
  std::vector<LogdetComparison> out;
  {
    ActNorm layer(4);
    Randomize(layer, rng, 0.5);
    out.push_back(CompareLayer("actnorm", layer, rng.NormalTensor({1, 4, 4, 4}), {}));
  }
  {
    OrthoMix layer(4, rng);
    out.push_back(CompareLayer("orthomix", layer, rng.NormalTensor({1, 4, 4, 4}), {}));
  }
  {
    CondAffineCoupling layer(4, 3, 8, rng);
    Randomize(layer, rng, 0.3);
    Tensor cond = rng.NormalTensor({1, 3, 3, 3});
    out.push_back(CompareLayer("coupling", layer, rng.NormalTensor({1, 4, 3, 3}), cond));
  }
  {
    AffineInjector layer(4, 3, 8, rng);
    Randomize(layer, rng, 0.3);
    Tensor cond = rng.NormalTensor({1, 3, 3, 3});
    out.push_back(CompareLayer("injector", layer, rng.NormalTensor({1, 4, 3, 3}), cond));
  }
  {
    Squeeze layer;
    out.push_back(CompareLayer("squeeze", layer, rng.NormalTensor({1, 2, 4, 4}), {}));
  }
  {
    ConditionalScaleBias layer;
    Tensor cond = rng.NormalTensor({1, 4, 3, 3}, 0.5);
    out.push_back(CompareLayer("scale_bias", layer, rng.NormalTensor({1, 2, 3, 3}), cond));
  }
  {
    // Whole 1-level / 2-step flow on 48 dimensions.
    NoGradGuard no_grad;
    FlowConfig c;
    c.levels = 1;
    c.steps = 2;
    c.image_channels = 3;
    c.cond_channels = 3;
    c.hidden_channels = 8;
    FlowNetwork flow(c, rng);
    StateList state;
    flow.Collect("flow", state);
    RandomizeParameters(state, rng, 0.3);
    Tensor y = rng.NormalTensor({1, 3, 4, 4});
    LrEmbedding e = RandomEmbedding(flow, y.shape(), 3, rng);
    LogdetTrace trace;
    flow.Encode(y, e, &trace);
    LogdetComparison cmp;
    cmp.layer = "flow";
    cmp.analytic = trace.total.at(0);
    cmp.numeric = LogAbsDeterminant(FiniteDifferenceJacobian(
        [&](const Tensor& t) { return flow.Encode(t, e).latent.z.back(); }, y));
    cmp.error = LogdetError(cmp.analytic, cmp.numeric);
    out.push_back(cmp);
  }
  return out;
}

std::vector<BlockGradError> GradientSuite(std::uint64_t seed) {
  std::vector<BlockGradError> out;
  auto run = [&](const std::string& network, const StateList& state,
                 const std::function<Tensor()>& loss) {
    for (const auto& s : TrainableOnly(state)) {
      out.push_back({network + "/" + s.path, BlockGradientError(s.tensor, state, loss),
                     s.tensor.numel()});
    }
  };

  Rng rng(seed, 23);
  Tensor hr = rng.UniformTensor({2, 3, 8, 8}, 0.0, 1.0);
  Tensor lr = rng.UniformTensor({2, 3, 4, 4}, 0.0, 1.0);
  {
    FlowSrModel model(TinyRunConfig(ModelKind::kFlow), rng);
    StateList state;
    model.Collect(state);
    RandomizeParameters(state, rng, 0.1);
    run("flow_nll", state, [&] { return Mean(model.NllPerDim(hr, lr)); });
    // Decode direction, as used by the adversarial phase.
    Tensor probe = rng.NormalTensor({2, 3, 8, 8});
    run("flow_sample", state, [&] {
      Rng z(seed, 99);
      return Mean(model.Generate(lr, 0.7, z) * probe);
    });
  }
  {
    LaplaceSrModel model(TinyRunConfig(ModelKind::kLaplace), true, rng);
    StateList state;
    model.Collect(state);
    RandomizeParameters(state, rng, 0.1);
    run("laplace", state, [&] { return Mean(model.NllPerDim(hr, lr)); });
  }
  {
    DiscriminatorConfig dc;
    dc.width = 2;
    dc.image_size = 16;
    Discriminator d(dc, rng);
    StateList state;
    d.Collect("disc", state);
    RandomizeParameters(state, rng, 0.1);
    Tensor real = rng.UniformTensor({2, 3, 16, 16}, 0.0, 1.0);
    Tensor fake = rng.UniformTensor({2, 3, 16, 16}, 0.0, 1.0);
    for (AdversarialForm form : {AdversarialForm::kPlain, AdversarialForm::kRelativistic}) {
      const std::string tag = "disc_" + AdversarialFormName(form);
      // The relativistic logits are differences, so the head bias cancels
      // and its gradient is identically zero; it is left out.
      StateList checked;
      for (const auto& s : state) {
        if (form == AdversarialForm::kPlain || s.path != "disc.head.bias") {
          checked.push_back(s);
        }
      }
      run(tag, checked, [&] {
        return ComputeAdversarialLosses(real, fake, d, form).disc_objective;
      });
      // Generator side: L_adv w.r.t. the fake pixels.
      Tensor leaf = fake.Clone().set_requires_grad(true);
      ComputeAdversarialLosses(real, leaf, d, form).gen_loss.backward();
      Tensor numeric = FiniteDifferenceGradient(
          [&](const Tensor& t) {
            return ComputeAdversarialLosses(real, t, d, form).gen_loss.item();
          },
          fake);
      out.push_back({tag + "/fake_pixels", MaxRelativeError(leaf.grad(), numeric.values()),
                     fake.numel()});
    }
  }
  return out;
}

L1EquivalenceResult L1Equivalence(std::uint64_t seed) {
  Rng rng(seed, 24);
  const Shape shape{1, 3, 1 + static_cast<std::int64_t>(rng.UniformInt(4)),
                    1 + static_cast<std::int64_t>(rng.UniformInt(4))};
  Tensor y = rng.UniformTensor(shape, 0.0, 1.0);
  Tensor g = rng.UniformTensor(shape, 0.0, 1.0);
  Tensor a = rng.NormalTensor(shape, 0.5);
  LaplaceHead head{g, a};
  L1EquivalenceResult r;
  r.flow_vs_laplace =
      std::abs(OneLayerFlowNll(y, head).item() - LaplaceNll(y, g, head.b()).item());
  const double dims = static_cast<double>(y.numel());
  const double nll1 = LaplaceNll(y, g, Tensor(shape, 1.0)).item();
  const double l1 = L1Loss(y, g).item();
  // Only the final additions round; anything beyond a few ulps of the NLL
  // would mean a term differs between the two paths.
  const double gap = std::abs((nll1 - l1) - dims * std::numbers::ln2);
  r.constant_gap = gap <= 4.0 * std::numeric_limits<double>::epsilon() * nll1 ? 0.0 : gap;
  return r;
}

ActNormStats ActNormInitStats(std::uint64_t seed, int channels) {
  NoGradGuard no_grad;
  Rng rng(seed, 25);
  const std::int64_t n = 4, hw = 25;
  std::vector<double> v(static_cast<std::size_t>(n * channels * hw));
  std::vector<double> offset(channels), spread(channels);
  for (int c = 0; c < channels; ++c) {
    offset[c] = rng.Uniform(-3.0, 3.0);
    spread[c] = rng.Uniform(0.1, 5.0);
  }
  for (std::int64_t b = 0; b < n; ++b)
    for (int c = 0; c < channels; ++c)
      for (std::int64_t p = 0; p < hw; ++p) {
        v[(b * channels + c) * hw + p] = offset[c] + spread[c] * rng.Normal();
      }
  Tensor h({n, channels, 5, 5}, std::move(v));
  ActNorm layer(channels);
  Tensor out = layer.Forward({h, Zeros(n)}, {}).activation;
  ActNormStats s;
  for (int c = 0; c < channels; ++c) {
    double mean = 0.0;
    for (std::int64_t b = 0; b < n; ++b)
      for (std::int64_t p = 0; p < hw; ++p) mean += out.at((b * channels + c) * hw + p);
    mean /= static_cast<double>(n * hw);
    double var = 0.0;
    for (std::int64_t b = 0; b < n; ++b)
      for (std::int64_t p = 0; p < hw; ++p) {
        const double d = out.at((b * channels + c) * hw + p) - mean;
        var += d * d;
      }
    var /= static_cast<double>(n * hw);
    s.max_abs_mean = std::max(s.max_abs_mean, std::abs(mean));
    s.max_abs_std_dev = std::max(s.max_abs_std_dev, std::abs(std::sqrt(var) - 1.0));
  }
  return s;
}

OrthoMixStats OrthoMixCheck(std::uint64_t seed, int channels) {
  NoGradGuard no_grad;
  Rng rng(seed, 26);
  OrthoMix layer(channels, rng);
  const Eigen::MatrixXd q = layer.matrix();
  const Eigen::MatrixXd defect =
      q.transpose() * q - Eigen::MatrixXd::Identity(channels, channels);
  OrthoMixStats s;
  s.orthonormality = defect.cwiseAbs().rowwise().sum().maxCoeff();
  Tensor h = rng.NormalTensor({3, channels, 3, 3});
  Tensor logdet = layer.Forward({h, Zeros(3)}, {}).logdet;
  for (double v : logdet.values()) s.max_abs_logdet = std::max(s.max_abs_logdet, std::abs(v));
  return s;
}

std::vector<std::string> VerifySuiteNames() {
  return {"autodiff",      "conv_oracle", "round_trip", "logdet_oracle",
          "gradient_check", "l1_equivalence", "actnorm", "orthomix",
          "bicubic_kernel", "metrics"};
}

std::vector<SuiteResult> RunVerification(const std::vector<std::string>& only,
                                         std::ostream* log) {
  using Suite = std::function<std::pair<bool, std::string>()>;
  const std::vector<std::pair<std::string, Suite>> suites = {
      {"autodiff", SuiteAutodiff},        {"conv_oracle", SuiteConv},
      {"round_trip", SuiteRoundTrip},     {"logdet_oracle", SuiteLogdet},
      {"gradient_check", SuiteGradient},  {"l1_equivalence", SuiteL1},
      {"actnorm", SuiteActNorm},          {"orthomix", SuiteOrthoMix},
      {"bicubic_kernel", SuiteKernel},    {"metrics", SuiteMetrics},
  };
  for (const auto& name : only) {
    const auto names = VerifySuiteNames();
    if (std::find(names.begin(), names.end(), name) == names.end()) {
      throw ConfigError("unknown verification suite '" + name + "'");
    }
  }
  std::vector<SuiteResult> results;
  for (const auto& [name, fn] : suites) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) {
      continue;
    }
    SuiteResult r;
    r.name = name;
    const auto start = std::chrono::steady_clock::now();
    try {
      std::tie(r.passed, r.detail) = fn();
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (log != nullptr) {
      *log << std::left << std::setw(16) << r.name << (r.passed ? "PASS  " : "FAIL  ")
           << std::right << std::fixed << std::setprecision(2) << std::setw(7)
           << r.seconds << "s  " << r.detail << std::endl;
    }
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace flowfid
