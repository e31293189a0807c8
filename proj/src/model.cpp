#include "amaa/model.hpp"

#include <cmath>
#include <string>

#include "amaa/rng.hpp"

namespace amaa {
namespace {

std::string key(const char* group, std::size_t index, const char* field) {
  return std::string(group) + "." + std::to_string(index) + "." + field;
}

std::size_t ceil_div(std::size_t n, std::size_t k) { return (n + k - 1) / k; }

void add_uniform(ParamStore& store, const std::string& name, Shape shape,
                 std::uint64_t seed) {
  std::size_t fan_in = 1;
  for (std::size_t i = 1; i < shape.size(); ++i) fan_in *= shape[i];
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  SplitMix64 rng(seed ^ fnv1a64(name));
  Tensor v(std::move(shape));
  for (double& x : v.values()) x = rng.uniform(-bound, bound);
  store.add(name, std::move(v), true);
}

void add_zeros(ParamStore& store, const std::string& name, Shape shape) {
  store.add(name, Tensor(std::move(shape)), false);
}

}  // namespace

SkipFusion ModelConfig::skip_mode() const {
  if (skip) return *skip;
  return use_afg ? SkipFusion::kGated : SkipFusion::kSum;
}

void ModelConfig::validate(const CameraGrid& grid) const {
  grid.validate();
  if (classes < 2) throw ConfigError("model needs at least 2 classes");
  if (widths_2d.empty()) throw ConfigError("widths_2d must list at least one stage");
  for (auto w : widths_2d) {
    if (w == 0) throw ConfigError("channel widths must be >= 1");
  }
  if (scale_levels.empty()) throw ConfigError("scale_levels must list at least one scale");
  for (auto level : scale_levels) {
    if (level >= widths_2d.size()) {
      throw ConfigError("scale level " + std::to_string(level) + " exceeds the " +
                        std::to_string(widths_2d.size()) + " encoder stages");
    }
  }
  const std::size_t cell = std::size_t{1} << (scale_levels.size() - 1);
  if (grid.dims.depth % cell || grid.dims.height % cell || grid.dims.width % cell) {
    throw ConfigError("grid dims must be divisible by " + std::to_string(cell) + " for " +
                      std::to_string(scale_levels.size()) + " scales");
  }
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
  if (se_ratio == 0) throw ConfigError("se_ratio must be >= 1");
  simam.validate();
  if (skip && *skip == SkipFusion::kGated && !use_afg) {
    throw ConfigError("gated skips require use_afg");
  }
}

ModelConfig with_variant(ModelConfig cfg, char variant) {
  switch (variant) {
    case 'A': cfg.use_se = false; cfg.use_simam = false; cfg.use_afg = false; break;
    case 'B': cfg.use_se = true; cfg.use_simam = false; cfg.use_afg = false; break;
    case 'C': cfg.use_se = true; cfg.use_simam = true; cfg.use_afg = false; break;
    case 'D': cfg.use_se = true; cfg.use_simam = true; cfg.use_afg = true; break;
    default: throw ConfigError(std::string("unknown variant '") + variant + "'");
  }
  cfg.skip.reset();
  return cfg;
}

Model::Model(ModelConfig cfg, CameraGrid grid) : cfg_(std::move(cfg)), grid_(grid) {
  cfg_.validate(grid_);
  for (auto level : cfg_.scale_levels) encoder_stages_ = std::max(encoder_stages_, level + 1);
  scale_map_ = make_scale_map(grid_, cfg_.scale_levels);
  for (const auto& entry : scale_map_) {
    const std::size_t f = std::size_t{1} << (entry.level + 1);
    plans_.push_back(std::make_shared<const LiftPlan>(
        make_lift_plan(grid_, ceil_div(grid_.image_rows, f), ceil_div(grid_.image_cols, f),
                       entry.resolution, cfg_.sampling)));
  }
}

std::size_t Model::scale_width(std::size_t s) const {
  return cfg_.widths_2d.at(cfg_.scale_levels.at(s));
}

ParamStore Model::init_params() const {
  ParamStore p;
  const std::uint64_t seed = cfg_.seed;
  std::size_t in = 3;
  for (std::size_t i = 0; i < encoder_stages_; ++i) {
    const std::size_t out = cfg_.widths_2d[i];
    add_uniform(p, key("enc2d", i, "weight"), {out, in, 3, 3}, seed);
    add_zeros(p, key("enc2d", i, "bias"), {out});
    in = out;
  }
  const std::size_t branches = std::size_t{cfg_.use_se} + std::size_t{cfg_.use_simam};
  for (std::size_t s = 0; s < scales(); ++s) {
    const std::size_t c = scale_width(s);
    if (cfg_.use_se) {
      const std::size_t hidden = se_hidden_width(c, cfg_.se_ratio);
      add_uniform(p, key("att", s, "se.w1"), {hidden, c}, seed);
      add_uniform(p, key("att", s, "se.w2"), {c, hidden}, seed);
    }
    if (branches > 0) {
      add_zeros(p, key("att", s, "gamma"), {1});
      add_uniform(p, key("att", s, "mix.weight"), {c, branches * c, 1, 1, 1}, seed);
      add_zeros(p, key("att", s, "mix.bias"), {c});
    }
    add_uniform(p, key("enc3d", s, "weight"), {c, c, 3, 3, 3}, seed);
    add_zeros(p, key("enc3d", s, "bias"), {c});
  }
  for (std::size_t s = 0; s + 1 < scales(); ++s) {
    const std::size_t c = scale_width(s);
    add_uniform(p, key("dec", s, "weight"), {c, scale_width(s + 1), 3, 3, 3}, seed);
    add_zeros(p, key("dec", s, "bias"), {c});
    if (cfg_.skip_mode() == SkipFusion::kGated) {
      add_uniform(p, key("afg", s, "gate.weight"), {1, 2 * c, 1, 1, 1}, seed);
      add_zeros(p, key("afg", s, "gate.bias"), {1});
    }
  }
  add_uniform(p, "head.weight", {cfg_.classes, scale_width(0), 1, 1, 1}, seed);
  add_zeros(p, "head.bias", {cfg_.classes});
  return p;
}

ForwardVars Model::forward(Tape& t, const ParamBinder& bind, const Tensor& image) const {
  image.require_rank(3);
  if (image.dim(0) != 3 || image.rows() != grid_.image_rows ||
      image.cols() != grid_.image_cols) {
    throw ShapeError("input image " + to_string(image.shape()) + " does not match the " +
                     std::to_string(grid_.image_rows) + "x" +
                     std::to_string(grid_.image_cols) + " camera");
  }
  std::vector<Var> features;
  Var x = t.constant(image);
  for (std::size_t i = 0; i < encoder_stages_; ++i) {
    x = ad::relu(t, ad::conv2d(t, x, bind(key("enc2d", i, "weight")),
                               bind(key("enc2d", i, "bias")), 2));
    features.push_back(x);
  }

  ForwardVars out;
  for (std::size_t s = 0; s < scales(); ++s) {
    const Var v = ad::lift(t, features[cfg_.scale_levels[s]], plans_[s]);
    out.lifted.push_back(v);
    std::vector<Var> branches;
    if (cfg_.use_se) {
      branches.push_back(ad::se_block_3d(t, v, bind(key("att", s, "se.w1")),
                                         bind(key("att", s, "se.w2"))));
    }
    if (cfg_.use_simam) branches.push_back(ad::simam_3d(t, v, cfg_.simam).refined);
    Var attended = v;
    if (!branches.empty()) {
      attended = ad::aggregate_residual(t, v, branches, bind(key("att", s, "gamma")),
                                        bind(key("att", s, "mix.weight")),
                                        bind(key("att", s, "mix.bias")));
    }
    out.attended.push_back(attended);
    out.encoded.push_back(ad::relu(t, ad::conv3d(t, attended, bind(key("enc3d", s, "weight")),
                                                 bind(key("enc3d", s, "bias")), 1)));
  }

  const SkipFusion skip = cfg_.skip_mode();
  std::vector<Var> skips;
  std::vector<ad::StageVars> stages;
  for (std::size_t s = scales() - 1; s-- > 0;) {
    ad::StageVars sv{bind(key("dec", s, "weight")), bind(key("dec", s, "bias")), Var{},
                     Var{}, std::nullopt};
    if (skip == SkipFusion::kGated) {
      sv.gate_weight = bind(key("afg", s, "gate.weight"));
      sv.gate_bias = bind(key("afg", s, "gate.bias"));
    }
    skips.push_back(out.encoded[s]);
    stages.push_back(sv);
  }
  const double alpha = cfg_.use_afg ? cfg_.alpha : 0.0;
  const Var decoded = ad::decode_hierarchy(t, out.encoded.back(), skips, stages, alpha,
                                           {skip, cfg_.upsample});
  out.logits = ad::conv3d(t, decoded, bind("head.weight"), bind("head.bias"), 1);
  out.probs = ad::softmax_channels(t, out.logits);
  return out;
}

ForwardVars Model::forward(Tape& t, ParamStore& params, const Tensor& image) const {
  return forward(t, [&](const std::string& name) { return t.param(params, name); }, image);
}

Tensor Model::predict(const ParamStore& params, const Tensor& image) const {
  Tape t;
  const auto vars = forward(
      t, [&](const std::string& name) { return t.constant(params.value(name)); }, image);
  return t.value(vars.probs);
}

}  // namespace amaa
