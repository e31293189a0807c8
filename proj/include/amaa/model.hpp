#pragma once

// End-to-end network: strided 2-D conv encoder -> per-scale FLoSP lifting ->
// SE / SimAM attention with residual mix -> one 3x3x3 conv per scale ->
// coarse-to-fine decoder with gated (or plain) skips -> 1x1x1 head + softmax.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "amaa/attention.hpp"
#include "amaa/camera.hpp"
#include "amaa/fusion.hpp"
#include "amaa/objective.hpp"
#include "amaa/param_store.hpp"
#include "amaa/tape.hpp"

namespace amaa {

struct ModelConfig {
  std::size_t classes = 5;
  bool use_se = true;
  bool use_simam = true;
  bool use_afg = true;
  double alpha = 0.75;  // only read when use_afg
  std::vector<std::size_t> widths_2d{8, 16, 32};
  /// 2-D encoder level feeding each lifted scale, finest scale first.
  std::vector<std::size_t> scale_levels{0, 1};
  std::size_t se_ratio = 4;
  SimamConfig simam;
  Sampling sampling = Sampling::kBilinear;
  ops::UpsampleMode upsample = ops::UpsampleMode::kTrilinear;
  /// Skip merge override; by default gated with use_afg, plain sum without.
  std::optional<SkipFusion> skip;
  LossConfig loss;
  std::uint64_t seed = 0;

  SkipFusion skip_mode() const;
  /// Throws ConfigError on width / scale inconsistencies.
  void validate(const CameraGrid& grid) const;
};

/// Table-of-ablations variants: A baseline, B +SE, C +SE+SimAM, D +AFG.
ModelConfig with_variant(ModelConfig cfg, char variant);

/// Resolves a parameter name to a tape leaf.
using ParamBinder = std::function<Var(const std::string&)>;

struct ForwardVars {
  std::vector<Var> lifted;    // per scale, finest first
  std::vector<Var> attended;  // V' per scale (== lifted when attention is off)
  std::vector<Var> encoded;   // 3-D encoder output per scale
  Var logits;
  Var probs;
};

class Model {
 public:
  Model(ModelConfig cfg, CameraGrid grid);

  const ModelConfig& config() const { return cfg_; }
  const CameraGrid& grid() const { return grid_; }
  std::size_t scales() const { return cfg_.scale_levels.size(); }
  std::size_t encoder_stages() const { return encoder_stages_; }
  /// Channel width of lifted scale s.
  std::size_t scale_width(std::size_t s) const;

  /// Fan-in scaled uniform weights from SplitMix64(seed ^ fnv1a64(name)),
  /// zero biases and zero gamma.
  ParamStore init_params() const;

  ForwardVars forward(Tape& t, const ParamBinder& bind, const Tensor& image) const;
  /// Trainable forward: parameters become gradient-accumulating leaves.
  ForwardVars forward(Tape& t, ParamStore& params, const Tensor& image) const;
  /// Inference only; returns the (C, D, H, W) probabilities.
  Tensor predict(const ParamStore& params, const Tensor& image) const;

 private:
  ModelConfig cfg_;
  CameraGrid grid_;
  std::size_t encoder_stages_ = 0;
  std::vector<std::shared_ptr<const LiftPlan>> plans_;
  ScaleMap scale_map_;
};

}  // namespace amaa
