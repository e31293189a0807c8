#pragma once

// Pinhole camera + voxel grid geometry and the FLoSP lifting operator.
//
// Axis convention: the grid frame is metric with x right, y down, z forward.
// Voxel (d, h, w) has its centre at
//     origin + voxel_size * (w + 1/2, h + 1/2, d + 1/2)
// so d indexes depth slabs along the optical axis, h rows (down) and w
// columns (right). A rigid pose maps grid-frame points into the camera frame:
// p_cam = R p_grid + t. Pixel centres sit at integer image coordinates.

#include <array>
#include <cstddef>
#include <memory>
#include <vector>

#include "amaa/tape.hpp"
#include "amaa/tensor.hpp"

namespace amaa {

using Vec3 = std::array<double, 3>;

struct RigidPose {
  std::array<double, 9> rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};  // row-major
  Vec3 translation{0, 0, 0};

  Vec3 apply(const Vec3& p) const;
  Vec3 apply_inverse(const Vec3& p) const;
  bool is_identity() const;
};

struct CameraGrid {
  double fx = 40.0;
  double fy = 40.0;
  double cx = 31.5;
  double cy = 23.5;
  std::size_t image_rows = 48;
  std::size_t image_cols = 64;
  Vec3 origin{-0.64, -0.48, 0.80};
  double voxel_size = 0.08;
  GridDims dims{16, 12, 16};
  RigidPose pose;

  /// Throws ConfigError when an invariant is violated.
  void validate() const;

  /// Centre of voxel (d, h, w) of a grid coarsened by `cell` fine voxels per
  /// axis, in the grid frame.
  Vec3 voxel_center(std::size_t d, std::size_t h, std::size_t w,
                    std::size_t cell = 1) const;
};

struct ProjectedVoxel {
  double u = 0.0;
  double v = 0.0;
  double z = 0.0;      // camera-frame depth
  bool valid = false;  // false when z <= 0
};

/// Projects every voxel centre (d, h, w order) of the full grid.
std::vector<ProjectedVoxel> project_voxel_centers(const CameraGrid& grid);

/// Same for a coarsened resolution (must be ceil(dims / 2^j) for some j), with
/// intrinsics divided by `image_downscale`.
std::vector<ProjectedVoxel> project_voxel_centers(const CameraGrid& grid,
                                                  const GridDims& resolution,
                                                  double image_downscale);

/// Voxel-to-pyramid assignment: scale i lifts 2-D level `level` into
/// `resolution`. Ordered fine to coarse.
struct ScaleEntry {
  std::size_t level = 0;
  GridDims resolution;
};
using ScaleMap = std::vector<ScaleEntry>;

/// Scale i gets level levels[i] and resolution ceil(dims / 2^i).
ScaleMap make_scale_map(const CameraGrid& grid,
                        const std::vector<std::size_t>& levels);

enum class Sampling { kNearest, kBilinear };

/// Precomputed sparse sampling matrix from a feature map to a voxel volume.
/// Invalid voxels (behind the camera or outside the image) have no taps.
struct LiftPlan {
  std::size_t feature_rows = 0;
  std::size_t feature_cols = 0;
  GridDims resolution;
  std::vector<std::size_t> tap_begin;  // voxel i owns taps [begin[i], begin[i+1])
  std::vector<std::size_t> pixel;      // row * cols + col
  std::vector<double> weight;

  Tensor apply(const Tensor& features) const;
  /// Adjoint: scatters voxel gradients back onto the feature map.
  Tensor apply_adjoint(const Tensor& grad_volume, std::size_t channels) const;
};

/// Builds the plan for a (rows, cols) feature map. The image downscale factor
/// is inferred as the power of two with ceil(image / 2^k) == feature size.
LiftPlan make_lift_plan(const CameraGrid& grid, std::size_t feature_rows,
                        std::size_t feature_cols, const GridDims& resolution,
                        Sampling sampling);

/// V = Φ(F): lifts a (C, rows, cols) feature map into (C, D_l, H_l, W_l).
Tensor flosp_lift(const Tensor& features, const CameraGrid& grid,
                  const GridDims& resolution, Sampling sampling);

/// One lifted volume per scale map entry, finest first.
std::vector<Tensor> multi_scale_lift(const std::vector<Tensor>& pyramid,
                                     const CameraGrid& grid,
                                     const ScaleMap& scales, Sampling sampling);

namespace ad {
Var lift(Tape& t, Var features, std::shared_ptr<const LiftPlan> plan);
}

}  // namespace amaa
