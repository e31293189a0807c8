#pragma once

// Procedural indoor scenes on the camera grid and a first-hit ray-cast
// renderer that turns them into the monocular RGB input.

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "amaa/camera.hpp"
#include "amaa/objective.hpp"

namespace amaa {

using Rgb = std::array<double, 3>;

/// Fixed colour per class id; class 0 (empty) is black and every other id
/// gets a distinct colour.
Rgb class_color(std::size_t class_id);
std::vector<Rgb> make_palette(std::size_t classes);

struct SceneSpec {
  std::size_t classes = 5;
  GridDims extents{16, 12, 16};  // must equal the camera grid dims
  std::size_t objects_min = 2;
  std::size_t objects_max = 5;
  std::size_t object_size_min = 2;  // voxels per axis
  std::size_t object_size_max = 5;

  void validate() const;
};

/// Class ids used by the fixed structure of every scene.
std::uint16_t floor_class(const SceneSpec& spec);
std::uint16_t wall_class(const SceneSpec& spec);

/// Floor slab at h = H-1, back wall at d = D-1 and side wall at w = 0, then
/// k boxes resting on the floor. Random draws, in order, from SplitMix64(seed):
///   k = objects_min + below(objects_max - objects_min + 1)
///   per box: class, size_d, size_h, size_w, d0, w0
/// Later boxes overwrite earlier ones.
LabelVolume generate_scene(const SceneSpec& spec, std::uint64_t seed);

struct RayHit {
  bool hit = false;
  double depth = 0.0;  // camera-frame z of the entry point
  std::size_t voxel = 0;
};

/// Exact voxel traversal (Amanatides-Woo) of the camera ray through pixel
/// (row, col); reports the first non-empty voxel.
RayHit cast_ray(const LabelVolume& labels, const CameraGrid& grid, std::size_t row,
                std::size_t col);

/// (3, rows, cols) image: palette[class] / (1 + depth) on hits, black elsewhere.
Tensor render_rgb(const LabelVolume& labels, const CameraGrid& grid,
                  const std::vector<Rgb>& palette);

/// Mirrors a (C, rows, cols) image left-right.
Tensor flip_image(const Tensor& image);

/// Horizontal flip is label-consistent only for a centred principal point, a
/// grid symmetric about the optical axis and an identity pose.
bool flip_is_consistent(const CameraGrid& grid);

}  // namespace amaa
