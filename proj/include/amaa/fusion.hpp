#pragma once

// Adaptive feature gating (AFG) and the coarse-to-fine decoder that applies it
// at every stage.

#include <cstddef>
#include <optional>
#include <vector>

#include "amaa/ops.hpp"
#include "amaa/tape.hpp"
#include "amaa/tensor.hpp"

namespace amaa {

struct AfgParams {
  Tensor gate_weight;  // (1, C_d + C_e, 1, 1, 1)
  Tensor gate_bias;    // (1)
  /// (C_d, C_e, 1, 1, 1); required only when C_e != C_d.
  std::optional<Tensor> projection;
  double alpha = 0.75;
};

/// M = sigmoid(Conv1x1x1([F_dec; V'])), one channel.
Tensor afg_gate(const Tensor& f_dec, const Tensor& enc, const AfgParams& params);
/// F_fused = F_dec + α (M ⊙ P(V')). α == 0 returns F_dec unchanged.
Tensor afg_fuse(const Tensor& f_dec, const Tensor& enc, const AfgParams& params);

/// How a decoder stage merges its encoder feature.
enum class SkipFusion {
  kGated,  // AFG
  kSum,    // plain additive skip, F_dec + V'
  kNone,   // injection branch removed
};

struct DecoderStage {
  Tensor conv_weight;  // (C_d, C_prev, 3, 3, 3)
  Tensor conv_bias;    // (C_d)
  AfgParams afg;
};

struct DecoderOptions {
  SkipFusion skip = SkipFusion::kGated;
  ops::UpsampleMode upsample = ops::UpsampleMode::kTrilinear;
};

/// Runs the stages coarse to fine: upsample, 3x3x3 conv + ReLU, then merge the
/// matching encoder feature. encoder[i] belongs to stages[i].
Tensor decode_hierarchy(const Tensor& bottleneck, const std::vector<Tensor>& encoder,
                        const std::vector<DecoderStage>& stages,
                        const DecoderOptions& options = {});

namespace ad {

Var afg_gate(Tape& t, Var f_dec, Var enc, Var gate_weight, Var gate_bias);
Var afg_fuse(Tape& t, Var f_dec, Var enc, Var gate_weight, Var gate_bias,
             std::optional<Var> projection, double alpha);

struct StageVars {
  Var conv_weight;
  Var conv_bias;
  Var gate_weight;  // unused unless skip == kGated
  Var gate_bias;
  std::optional<Var> projection;
};

Var decoder_stage(Tape& t, Var previous, Var enc, const StageVars& stage,
                  double alpha, const DecoderOptions& options);
Var decode_hierarchy(Tape& t, Var bottleneck, const std::vector<Var>& encoder,
                     const std::vector<StageVars>& stages, double alpha,
                     const DecoderOptions& options);

}  // namespace ad
}  // namespace amaa
