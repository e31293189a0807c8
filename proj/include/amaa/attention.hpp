#pragma once

// Parallel channel/spatial attention on lifted voxel features:
// squeeze-excitation channel recalibration, parameter-free SimAM spatial
// attention, and the zero-initialised residual mix of both branches.

#include <cstddef>
#include <vector>

#include "amaa/tape.hpp"
#include "amaa/tensor.hpp"

namespace amaa {

/// Bottleneck MLP weights: w1 is (max(1, C / ratio), C), w2 is (C, hidden).
struct SEParams {
  Tensor w1;
  Tensor w2;
  std::size_t ratio = 4;
};

std::size_t se_hidden_width(std::size_t channels, std::size_t ratio);

enum class SimamChannelMode {
  kChannelMean,  // energies of the channel-averaged volume
  kPerChannel,   // per-channel attention, averaged into one map
};

struct SimamConfig {
  double lambda = 1e-4;
  std::size_t window = 3;
  SimamChannelMode mode = SimamChannelMode::kChannelMean;

  void validate() const;
};

/// gamma scales the mix; mix_weight is (C, B*C, 1, 1, 1) for B branches.
struct AggParams {
  double gamma = 0.0;
  Tensor mix_weight;
  Tensor mix_bias;
};

/// V_se = s ⊙ V with s = sigmoid(W2 relu(W1 gap(V))).
Tensor se_block_3d(const Tensor& v, const SEParams& params);
/// The channel gate s alone, shape (C).
Tensor se_channel_gate(const Tensor& v, const SEParams& params);

/// Per-channel energies e = (x - μ)² / (4(σ² + λ)) + 1/2 over clipped windows.
Tensor simam_energy(const Tensor& v, const SimamConfig& cfg);

struct SimamResult {
  Tensor attention;  // (1, D, H, W), values in (0.5, sigmoid(2)]
  Tensor refined;    // V ⊙ A
};
SimamResult simam_3d(const Tensor& v, const SimamConfig& cfg);

/// V' = V + γ · Conv1x1x1([V_se; V_sim]).
Tensor aggregate_residual(const Tensor& v, const Tensor& v_se,
                          const Tensor& v_sim, const AggParams& params);

namespace ad {

Var se_block_3d(Tape& t, Var v, Var w1, Var w2);
Var simam_energy(Tape& t, Var v, const SimamConfig& cfg);

struct SimamVars {
  Var attention;
  Var refined;
};
SimamVars simam_3d(Tape& t, Var v, const SimamConfig& cfg);

/// Residual mix of one or more same-shape branches (concatenated in order).
Var aggregate_residual(Tape& t, Var v, const std::vector<Var>& branches,
                       Var gamma, Var mix_weight, Var mix_bias);

}  // namespace ad
}  // namespace amaa
