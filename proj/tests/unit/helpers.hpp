#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "amaa/objective.hpp"
#include "amaa/rng.hpp"
#include "amaa/tensor.hpp"

namespace amaa::testing {

inline Tensor random_tensor(SplitMix64& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Per-voxel softmax of random logits: a valid class-probability volume.
inline Tensor random_probs(SplitMix64& rng, std::size_t c, GridDims d, double spread = 3.0) {
  Tensor p({c, d.depth, d.height, d.width});
  const std::size_t n = d.count();
  for (std::size_t i = 0; i < n; ++i) {
    double z = 0.0;
    for (std::size_t k = 0; k < c; ++k) z += p[k * n + i] = std::exp(rng.uniform(-spread, spread));
    for (std::size_t k = 0; k < c; ++k) p[k * n + i] /= z;
  }
  return p;
}

inline LabelVolume random_labels(SplitMix64& rng, std::size_t c, GridDims d) {
  LabelVolume l(d);
  for (auto& id : l.ids) id = static_cast<std::uint16_t>(rng.below(c));
  return l;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace amaa::testing
