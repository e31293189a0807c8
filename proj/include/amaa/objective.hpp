#pragma once

// Training objective: weighted cross-entropy, a scene-level class affinity
// term and the neighbourhood consistency regulariser, plus argmax labelling.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "amaa/tape.hpp"
#include "amaa/tensor.hpp"

namespace amaa {

/// Guard added inside every logarithm.
inline constexpr double kLogEpsilon = 1e-12;

/// Per-voxel class ids (class 0 = empty) with an optional validity mask.
struct LabelVolume {
  GridDims dims;
  std::vector<std::uint16_t> ids;
  std::vector<std::uint8_t> mask;  // empty means every voxel is valid

  LabelVolume() = default;
  explicit LabelVolume(GridDims g, std::uint16_t fill = 0)
      : dims(g), ids(g.count(), fill) {}

  std::size_t size() const { return ids.size(); }
  std::size_t index(std::size_t d, std::size_t h, std::size_t w) const {
    return (d * dims.height + h) * dims.width + w;
  }
  std::uint16_t& at(std::size_t d, std::size_t h, std::size_t w) {
    return ids[index(d, h, w)];
  }
  std::uint16_t at(std::size_t d, std::size_t h, std::size_t w) const {
    return ids[index(d, h, w)];
  }
  bool valid(std::size_t i) const { return mask.empty() || mask[i] != 0; }

  /// Mirrors the volume along w (horizontal image flip).
  LabelVolume flipped_w() const;

  bool operator==(const LabelVolume&) const = default;
};

struct LossConfig {
  std::vector<double> class_weights;  // one per class, > 0
  double lambda_c = 0.1;
  std::size_t consistency_window = 3;
  bool use_affinity = true;

  void validate(std::size_t classes) const;
};

/// Per-voxel argmax; ties go to the lowest class index.
LabelVolume predict_labels(const Tensor& probs);

/// Mean over valid voxels of -w_y log(p_y + ε). Throws ContractError when
/// every voxel is masked.
double loss_weighted_ce(const Tensor& probs, const LabelVolume& truth,
                        const LossConfig& cfg);

/// Scene-wise soft precision / recall / specificity loss over the classes
/// present in the ground truth.
double loss_affinity(const Tensor& probs, const LabelVolume& truth);

/// Mean |o_i - windowed_mean(o)_i| with occupancy o = 1 - p_empty.
double loss_consistency(const Tensor& probs, const LossConfig& cfg);

struct LossBreakdown {
  double ce = 0.0;
  double affinity = 0.0;
  double consistency = 0.0;
  double total = 0.0;
};

/// total = ce + affinity + λ_c · consistency.
LossBreakdown loss_total(const Tensor& probs, const LabelVolume& truth,
                         const LossConfig& cfg);

/// Inverse class frequency, clamped to [0.2, 5] and renormalised to mean 1.
std::vector<double> inverse_frequency_weights(const std::vector<LabelVolume>& labels,
                                              std::size_t classes);

namespace ad {

using LabelsPtr = std::shared_ptr<const LabelVolume>;

Var weighted_ce(Tape& t, Var probs, LabelsPtr truth, const LossConfig& cfg);
Var affinity(Tape& t, Var probs, LabelsPtr truth);
Var consistency(Tape& t, Var probs, const LossConfig& cfg);

struct LossVars {
  Var ce;
  Var affinity;  // invalid when the affinity term is disabled
  Var consistency;
  Var total;
};
LossVars loss_total(Tape& t, Var probs, LabelsPtr truth, const LossConfig& cfg);

}  // namespace ad
}  // namespace amaa
