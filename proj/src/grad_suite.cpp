#include "amaa/grad_suite.hpp"

#include <algorithm>
#include <memory>

#include "amaa/attention.hpp"
#include "amaa/fusion.hpp"
#include "amaa/objective.hpp"
#include "amaa/rng.hpp"

namespace amaa {
namespace {

Tensor random_tensor(SplitMix64& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Contracts an output against fixed random weights so every output entry
// contributes a distinct amount to the scalar.
Var project(Tape& t, Var out, std::uint64_t seed) {
  SplitMix64 rng(seed ^ 0x5EEDULL);
  const Var r = t.constant(random_tensor(rng, t.value(out).shape()));
  return ad::sum(t, ad::mul(t, out, r));
}

using Objective = std::function<Var(Tape&, ParamStore&)>;

struct Case {
  ParamStore params;
  Objective f;
};

Case conv_case(std::uint64_t seed, std::size_t k, std::size_t stride) {
  SplitMix64 rng(seed);
  Case c;
  c.params.add("x", random_tensor(rng, {2, 4, 3, 4}));
  c.params.add("w", random_tensor(rng, {3, 2, k, k, k}));
  c.params.add("b", random_tensor(rng, {3}));
  c.f = [seed, stride](Tape& t, ParamStore& p) {
    const Var out = ad::conv3d(t, t.param(p, "x"), t.param(p, "w"), t.param(p, "b"), stride);
    return project(t, out, seed);
  };
  return c;
}

Case se_case(std::uint64_t seed) {
  SplitMix64 rng(seed);
  Case c;
  c.params.add("v", random_tensor(rng, {4, 3, 3, 3}));
  c.params.add("w1", random_tensor(rng, {1, 4}));
  c.params.add("w2", random_tensor(rng, {4, 1}));
  c.f = [seed](Tape& t, ParamStore& p) {
    return project(t, ad::se_block_3d(t, t.param(p, "v"), t.param(p, "w1"), t.param(p, "w2")),
                   seed);
  };
  return c;
}

Case simam_case(std::uint64_t seed, SimamChannelMode mode) {
  SplitMix64 rng(seed);
  Case c;
  c.params.add("v", random_tensor(rng, {3, 3, 4, 4}));
  SimamConfig cfg;
  cfg.mode = mode;
  c.f = [seed, cfg](Tape& t, ParamStore& p) {
    return project(t, ad::simam_3d(t, t.param(p, "v"), cfg).refined, seed);
  };
  return c;
}

Case aggregation_case(std::uint64_t seed) {
  SplitMix64 rng(seed);
  Case c;
  c.params.add("v", random_tensor(rng, {3, 3, 4, 4}));
  c.params.add("w1", random_tensor(rng, {1, 3}));
  c.params.add("w2", random_tensor(rng, {3, 1}));
  c.params.add("gamma", random_tensor(rng, {1}, 0.2, 1.0));
  c.params.add("mix.w", random_tensor(rng, {3, 6, 1, 1, 1}));
  c.params.add("mix.b", random_tensor(rng, {3}));
  c.f = [seed](Tape& t, ParamStore& p) {
    const Var v = t.param(p, "v");
    const Var se = ad::se_block_3d(t, v, t.param(p, "w1"), t.param(p, "w2"));
    const Var sim = ad::simam_3d(t, v, SimamConfig{}).refined;
    return project(t,
                   ad::aggregate_residual(t, v, {se, sim}, t.param(p, "gamma"),
                                          t.param(p, "mix.w"), t.param(p, "mix.b")),
                   seed);
  };
  return c;
}

Case afg_case(std::uint64_t seed, bool projected) {
  SplitMix64 rng(seed);
  const std::size_t cd = 3, ce = projected ? 2 : 3;
  Case c;
  c.params.add("f_dec", random_tensor(rng, {cd, 2, 3, 4}));
  c.params.add("enc", random_tensor(rng, {ce, 2, 3, 4}));
  c.params.add("gate.w", random_tensor(rng, {1, cd + ce, 1, 1, 1}));
  c.params.add("gate.b", random_tensor(rng, {1}));
  if (projected) c.params.add("proj", random_tensor(rng, {cd, ce, 1, 1, 1}));
  c.f = [seed, projected](Tape& t, ParamStore& p) {
    std::optional<Var> proj;
    if (projected) proj = t.param(p, "proj");
    return project(t,
                   ad::afg_fuse(t, t.param(p, "f_dec"), t.param(p, "enc"),
                                t.param(p, "gate.w"), t.param(p, "gate.b"), proj, 0.75),
                   seed);
  };
  return c;
}

Case decoder_case(std::uint64_t seed) {
  SplitMix64 rng(seed);
  Case c;
  c.params.add("prev", random_tensor(rng, {3, 1, 2, 2}));
  c.params.add("enc", random_tensor(rng, {2, 2, 4, 4}));
  c.params.add("conv.w", random_tensor(rng, {2, 3, 3, 3, 3}));
  c.params.add("conv.b", random_tensor(rng, {2}, 0.2, 0.6));
  c.params.add("gate.w", random_tensor(rng, {1, 4, 1, 1, 1}));
  c.params.add("gate.b", random_tensor(rng, {1}));
  c.f = [seed](Tape& t, ParamStore& p) {
    ad::StageVars sv{t.param(p, "conv.w"), t.param(p, "conv.b"), t.param(p, "gate.w"),
                     t.param(p, "gate.b"), std::nullopt};
    return project(t,
                   ad::decoder_stage(t, t.param(p, "prev"), t.param(p, "enc"), sv, 0.75,
                                     DecoderOptions{}),
                   seed);
  };
  return c;
}

Case loss_case(std::uint64_t seed) {
  SplitMix64 rng(seed);
  const CameraGrid grid = micro_grid();
  ModelConfig cfg = micro_model_config();
  cfg.seed = seed;
  auto model = std::make_shared<const Model>(cfg, grid);
  Case c;
  c.params = model->init_params();
  // Keep the fan-in scaled weights, but move gamma and every bias off zero so
  // the residual mix, the gate and the bias paths all carry gradient.
  for (auto& [name, p] : c.params) {
    if (p.decay) continue;
    for (double& v : p.value.values()) v = rng.uniform(-0.5, 0.5);
  }
  auto image = std::make_shared<Tensor>(
      random_tensor(rng, {3, grid.image_rows, grid.image_cols}, 0.0, 1.0));
  auto labels = std::make_shared<LabelVolume>(grid.dims);
  for (auto& id : labels->ids) id = static_cast<std::uint16_t>(rng.below(cfg.classes));
  LossConfig loss = cfg.loss;
  loss.class_weights = {0.7, 1.3};
  c.f = [model, image, labels, loss](Tape& t, ParamStore& p) {
    const ForwardVars fv = model->forward(t, p, *image);
    return ad::loss_total(t, fv.probs, labels, loss).total;
  };
  return c;
}

Case make_case(const std::string& module, std::uint64_t seed) {
  if (module == "conv3d_k1") return conv_case(seed, 1, 1);
  if (module == "conv3d_k3") return conv_case(seed, 3, 1);
  if (module == "conv3d_k3_stride2") return conv_case(seed, 3, 2);
  if (module == "se_block") return se_case(seed);
  if (module == "simam") return simam_case(seed, SimamChannelMode::kChannelMean);
  if (module == "simam_per_channel") return simam_case(seed, SimamChannelMode::kPerChannel);
  if (module == "aggregation") return aggregation_case(seed);
  if (module == "afg") return afg_case(seed, false);
  if (module == "afg_projected") return afg_case(seed, true);
  if (module == "decoder_stage") return decoder_case(seed);
  if (module == "loss_total_micro_model") return loss_case(seed);
  throw ConfigError("unknown gradient module '" + module + "'");
}

}  // namespace

double ModuleGradResult::worst() const {
  double m = 0.0;
  for (double e : max_rel_error) m = std::max(m, e);
  return m;
}

std::vector<std::string> grad_suite_modules() {
  return {"conv3d_k1",     "conv3d_k3",   "conv3d_k3_stride2", "se_block",
          "simam",         "simam_per_channel", "aggregation",  "afg",
          "afg_projected", "decoder_stage", "loss_total_micro_model"};
}

GradCheckReport check_module_gradient(const std::string& module, std::uint64_t seed,
                                      const GradCheckOptions& opts) {
  Case c = make_case(module, seed);
  return grad_check(c.f, c.params, opts);
}

std::vector<ModuleGradResult> run_grad_suite(const std::vector<std::uint64_t>& seeds,
                                             const GradCheckOptions& opts) {
  std::vector<ModuleGradResult> out;
  for (const auto& module : grad_suite_modules()) {
    ModuleGradResult r{module, seeds, {}, opts.tolerance};
    for (auto seed : seeds) {
      r.max_rel_error.push_back(check_module_gradient(module, seed, opts).max_rel_error());
    }
    out.push_back(std::move(r));
  }
  return out;
}

CameraGrid micro_grid() {
  CameraGrid g;
  g.fx = g.fy = 8.0;
  g.cx = g.cy = 3.5;
  g.image_rows = g.image_cols = 8;
  g.voxel_size = 0.16;
  g.dims = {4, 4, 4};
  g.origin = {-0.32, -0.32, 0.5};
  return g;
}

ModelConfig micro_model_config() {
  ModelConfig cfg;
  cfg.classes = 2;
  cfg.widths_2d = {2, 3};
  cfg.scale_levels = {0, 1};
  cfg.loss.class_weights = {1.0, 1.0};
  return cfg;
}

}  // namespace amaa
