#include "amaa/attention.hpp"

#include <algorithm>
#include <string>

namespace amaa {

std::size_t se_hidden_width(std::size_t channels, std::size_t ratio) {
  if (ratio == 0) throw ConfigError("SE reduction ratio must be >= 1");
  return std::max<std::size_t>(1, channels / ratio);
}

void SimamConfig::validate() const {
  if (!(lambda > 0.0)) throw ConfigError("SimAM lambda must be > 0");
  if (window == 0 || window % 2 == 0) {
    throw ConfigError("SimAM window must be odd, got " + std::to_string(window));
  }
}

namespace ad {

Var se_block_3d(Tape& t, Var v, Var w1, Var w2) {
  const Tensor& vv = t.value(v);
  vv.require_rank(4);
  if (t.value(w1).rank() != 2 || t.value(w1).dim(1) != vv.channels()) {
    throw ShapeError("SE W1 shape " + to_string(t.value(w1).shape()) +
                     " does not match " + std::to_string(vv.channels()) + " channels");
  }
  const Var z = global_avg_pool3d(t, v);
  const Var hidden = relu(t, matvec(t, w1, z));
  const Var s = sigmoid(t, matvec(t, w2, hidden));
  return mul(t, v, s);
}

Var simam_energy(Tape& t, Var x, const SimamConfig& cfg) {
  cfg.validate();
  const Var mu = box_mean(t, x, cfg.window);
  const Var sq_mean = box_mean(t, mul(t, x, x), cfg.window);
  // population variance, cancellation negatives clamped to zero
  const Var var = relu(t, sub(t, sq_mean, mul(t, mu, mu)));
  const Var dev = sub(t, x, mu);
  const Var inv = reciprocal(t, scale(t, add_scalar(t, var, cfg.lambda), 4.0), 0.0);
  return add_scalar(t, mul(t, mul(t, dev, dev), inv), 0.5);
}

SimamVars simam_3d(Tape& t, Var v, const SimamConfig& cfg) {
  t.value(v).require_rank(4);
  Var attention;
  if (cfg.mode == SimamChannelMode::kChannelMean) {
    const Var e = simam_energy(t, channel_mean(t, v), cfg);
    attention = sigmoid(t, reciprocal(t, e, 0.5));
  } else {
    const Var e = simam_energy(t, v, cfg);
    attention = channel_mean(t, sigmoid(t, reciprocal(t, e, 0.5)));
  }
  return {attention, mul(t, v, attention)};
}

Var aggregate_residual(Tape& t, Var v, const std::vector<Var>& branches,
                       Var gamma, Var mix_weight, Var mix_bias) {
  if (branches.empty()) throw ConfigError("aggregate_residual needs a branch");
  for (Var b : branches) {
    if (!t.value(b).same_shape(t.value(v))) {
      throw ShapeError("branch shape " + to_string(t.value(b).shape()) +
                       " differs from input " + to_string(t.value(v).shape()));
    }
  }
  Var stacked = branches.front();
  for (std::size_t i = 1; i < branches.size(); ++i) {
    stacked = concat_channels(t, stacked, branches[i]);
  }
  const Var mixed = conv3d(t, stacked, mix_weight, mix_bias, 1);
  return add(t, v, scale_by(t, mixed, gamma));
}

}  // namespace ad

Tensor se_channel_gate(const Tensor& v, const SEParams& params) {
  Tape t;
  const Var z = ad::global_avg_pool3d(t, t.constant(v));
  const Var hidden = ad::relu(t, ad::matvec(t, t.constant(params.w1), z));
  return t.value(ad::sigmoid(t, ad::matvec(t, t.constant(params.w2), hidden)));
}

Tensor se_block_3d(const Tensor& v, const SEParams& params) {
  Tape t;
  return t.value(ad::se_block_3d(t, t.constant(v), t.constant(params.w1),
                                 t.constant(params.w2)));
}

Tensor simam_energy(const Tensor& v, const SimamConfig& cfg) {
  Tape t;
  return t.value(ad::simam_energy(t, t.constant(v), cfg));
}

SimamResult simam_3d(const Tensor& v, const SimamConfig& cfg) {
  Tape t;
  const auto out = ad::simam_3d(t, t.constant(v), cfg);
  return {t.value(out.attention), t.value(out.refined)};
}

Tensor aggregate_residual(const Tensor& v, const Tensor& v_se,
                          const Tensor& v_sim, const AggParams& params) {
  Tape t;
  const Var out = ad::aggregate_residual(
      t, t.constant(v), {t.constant(v_se), t.constant(v_sim)},
      t.constant(Tensor::scalar(params.gamma)), t.constant(params.mix_weight),
      t.constant(params.mix_bias));
  return t.value(out);
}

}  // namespace amaa
