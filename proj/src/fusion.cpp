#include "amaa/fusion.hpp"

#include <string>

namespace amaa {
namespace ad {
namespace {

void check_spatial(const Tensor& a, const Tensor& b, const char* what) {
  a.require_rank(4);
  b.require_rank(4);
  if (spatial_dims(a) != spatial_dims(b)) {
    throw ShapeError(std::string(what) + ": spatial mismatch " +
                     to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

// Channel-aligned encoder feature: identity or a bias-free 1x1x1 projection.
Var align_channels(Tape& t, Var f_dec, Var enc, std::optional<Var> projection) {
  const std::size_t cd = t.value(f_dec).channels();
  const std::size_t ce = t.value(enc).channels();
  if (!projection) {
    if (cd != ce) {
      throw ConfigError("AFG channel mismatch (decoder " + std::to_string(cd) +
                        ", encoder " + std::to_string(ce) +
                        ") requires a projection kernel");
    }
    return enc;
  }
  const Var zero_bias = t.constant(Tensor({cd}));
  return conv3d(t, enc, *projection, zero_bias, 1);
}

}  // namespace

Var afg_gate(Tape& t, Var f_dec, Var enc, Var gate_weight, Var gate_bias) {
  check_spatial(t.value(f_dec), t.value(enc), "afg_gate");
  if (t.value(gate_weight).dim(0) != 1) {
    throw ShapeError("AFG gate must have exactly one output channel");
  }
  return sigmoid(t, conv3d(t, concat_channels(t, f_dec, enc), gate_weight,
                           gate_bias, 1));
}

Var afg_fuse(Tape& t, Var f_dec, Var enc, Var gate_weight, Var gate_bias,
             std::optional<Var> projection, double alpha) {
  check_spatial(t.value(f_dec), t.value(enc), "afg_fuse");
  if (!(alpha >= 0.0)) throw ConfigError("AFG alpha must be >= 0");
  if (!projection && t.value(f_dec).channels() != t.value(enc).channels()) {
    align_channels(t, f_dec, enc, projection);  // throws the config error
  }
  // alpha == 0 removes the injection branch entirely
  if (alpha == 0.0) return f_dec;
  const Var aligned = align_channels(t, f_dec, enc, projection);
  const Var gate = afg_gate(t, f_dec, enc, gate_weight, gate_bias);
  return add(t, f_dec, scale(t, mul(t, aligned, gate), alpha));
}

Var decoder_stage(Tape& t, Var previous, Var enc, const StageVars& stage,
                  double alpha, const DecoderOptions& options) {
  const Var up = upsample2(t, previous, options.upsample);
  const Var f_dec = relu(t, conv3d(t, up, stage.conv_weight, stage.conv_bias, 1));
  check_spatial(t.value(f_dec), t.value(enc), "decoder stage");
  switch (options.skip) {
    case SkipFusion::kGated:
      return afg_fuse(t, f_dec, enc, stage.gate_weight, stage.gate_bias,
                      stage.projection, alpha);
    case SkipFusion::kSum:
      return add(t, f_dec, align_channels(t, f_dec, enc, stage.projection));
    case SkipFusion::kNone:
      return f_dec;
  }
  return f_dec;
}

Var decode_hierarchy(Tape& t, Var bottleneck, const std::vector<Var>& encoder,
                     const std::vector<StageVars>& stages, double alpha,
                     const DecoderOptions& options) {
  if (encoder.size() != stages.size()) {
    throw ConfigError("decoder has " + std::to_string(stages.size()) +
                      " stages but " + std::to_string(encoder.size()) +
                      " encoder features");
  }
  Var x = bottleneck;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    x = decoder_stage(t, x, encoder[i], stages[i], alpha, options);
  }
  return x;
}

}  // namespace ad

namespace {

struct BoundAfg {
  Var gate_weight, gate_bias;
  std::optional<Var> projection;
};

BoundAfg bind(Tape& t, const AfgParams& p) {
  BoundAfg b{t.constant(p.gate_weight), t.constant(p.gate_bias), std::nullopt};
  if (p.projection) b.projection = t.constant(*p.projection);
  return b;
}

}  // namespace

Tensor afg_gate(const Tensor& f_dec, const Tensor& enc, const AfgParams& params) {
  Tape t;
  const BoundAfg b = bind(t, params);
  return t.value(ad::afg_gate(t, t.constant(f_dec), t.constant(enc), b.gate_weight,
                              b.gate_bias));
}

Tensor afg_fuse(const Tensor& f_dec, const Tensor& enc, const AfgParams& params) {
  Tape t;
  const BoundAfg b = bind(t, params);
  return t.value(ad::afg_fuse(t, t.constant(f_dec), t.constant(enc), b.gate_weight,
                              b.gate_bias, b.projection, params.alpha));
}

Tensor decode_hierarchy(const Tensor& bottleneck, const std::vector<Tensor>& encoder,
                        const std::vector<DecoderStage>& stages,
                        const DecoderOptions& options) {
  if (encoder.size() != stages.size()) {
    throw ConfigError("decoder has " + std::to_string(stages.size()) +
                      " stages but " + std::to_string(encoder.size()) +
                      " encoder features");
  }
  Tape t;
  std::vector<Var> enc;
  std::vector<ad::StageVars> vars;
  double alpha = stages.empty() ? 0.0 : stages.front().afg.alpha;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    enc.push_back(t.constant(encoder[i]));
    const BoundAfg b = bind(t, stages[i].afg);
    vars.push_back({t.constant(stages[i].conv_weight), t.constant(stages[i].conv_bias),
                    b.gate_weight, b.gate_bias, b.projection});
    if (stages[i].afg.alpha != alpha) {
      throw ConfigError("all decoder stages must share one alpha");
    }
  }
  return t.value(ad::decode_hierarchy(t, t.constant(bottleneck), enc, vars, alpha,
                                      options));
}

}  // namespace amaa
