#include "amaa/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "amaa/rng.hpp"

namespace amaa {
namespace {

constexpr Rgb kBaseColors[] = {
    {0.0, 0.0, 0.0},     // empty
    {0.55, 0.45, 0.35},  // floor
    {0.85, 0.85, 0.8},   // walls
    {0.9, 0.2, 0.2},  {0.2, 0.7, 0.3}, {0.2, 0.3, 0.9},
    {0.9, 0.8, 0.1},  {0.7, 0.2, 0.8}, {0.1, 0.8, 0.8},
};
constexpr std::size_t kBaseCount = std::size(kBaseColors);
// Ids past the base table walk a 4x4x4 lattice whose levels never occur in
// the table, so the palette stays injective.
constexpr double kLattice[] = {0.05, 0.4, 0.65, 1.0};
constexpr std::size_t kMaxClasses = kBaseCount + 64;

}  // namespace

Rgb class_color(std::size_t class_id) {
  if (class_id < kBaseCount) return kBaseColors[class_id];
  if (class_id >= kMaxClasses) {
    throw ConfigError("no palette colour for class " + std::to_string(class_id));
  }
  const std::size_t j = class_id - kBaseCount;
  return {kLattice[j % 4], kLattice[(j / 4) % 4], kLattice[j / 16]};
}

std::vector<Rgb> make_palette(std::size_t classes) {
  std::vector<Rgb> p;
  for (std::size_t c = 0; c < classes; ++c) p.push_back(class_color(c));
  return p;
}

void SceneSpec::validate() const {
  if (classes < 2) throw ConfigError("scene needs at least 2 classes");
  if (classes > kMaxClasses) {
    throw ConfigError("scene supports at most " + std::to_string(kMaxClasses) +
                      " classes");
  }
  if (extents.depth < 2 || extents.height < 2 || extents.width < 2) {
    throw ConfigError("room extents must be >= 2 voxels on every axis to hold the "
                      "floor and walls");
  }
  if (objects_min > objects_max) throw ConfigError("objects_min > objects_max");
  if (object_size_min < 1 || object_size_min > object_size_max) {
    throw ConfigError("object sizes must satisfy 1 <= min <= max");
  }
}

std::uint16_t floor_class(const SceneSpec&) { return 1; }

std::uint16_t wall_class(const SceneSpec& spec) {
  return static_cast<std::uint16_t>(std::min<std::size_t>(2, spec.classes - 1));
}

LabelVolume generate_scene(const SceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  const GridDims g = spec.extents;
  LabelVolume lv(g);
  const std::uint16_t floor_id = floor_class(spec);
  const std::uint16_t wall_id = wall_class(spec);
  for (std::size_t d = 0; d < g.depth; ++d) {
    for (std::size_t w = 0; w < g.width; ++w) lv.at(d, g.height - 1, w) = floor_id;
  }
  for (std::size_t h = 0; h + 1 < g.height; ++h) {
    for (std::size_t w = 0; w < g.width; ++w) lv.at(g.depth - 1, h, w) = wall_id;
    for (std::size_t d = 0; d + 1 < g.depth; ++d) lv.at(d, h, 0) = wall_id;
  }

  SplitMix64 rng(seed);
  const std::size_t k = spec.objects_min + rng.below(spec.objects_max - spec.objects_min + 1);
  const std::size_t span = spec.object_size_max - spec.object_size_min + 1;
  // Interior: d in [0, D-2], h in [0, H-2], w in [1, W-1].
  const std::size_t inner_d = g.depth - 1, inner_h = g.height - 1, inner_w = g.width - 1;
  for (std::size_t i = 0; i < k; ++i) {
    const auto cls = static_cast<std::uint16_t>(
        spec.classes > 3 ? 3 + rng.below(spec.classes - 3) : 1 + rng.below(spec.classes - 1));
    const std::size_t sd = std::min(spec.object_size_min + rng.below(span), inner_d);
    const std::size_t sh = std::min(spec.object_size_min + rng.below(span), inner_h);
    const std::size_t sw = std::min(spec.object_size_min + rng.below(span), inner_w);
    const std::size_t d0 = rng.below(inner_d - sd + 1);
    const std::size_t w0 = 1 + rng.below(inner_w - sw + 1);
    const std::size_t h0 = inner_h - sh;  // resting on the floor
    for (std::size_t d = d0; d < d0 + sd; ++d) {
      for (std::size_t h = h0; h < h0 + sh; ++h) {
        for (std::size_t w = w0; w < w0 + sw; ++w) lv.at(d, h, w) = cls;
      }
    }
  }
  return lv;
}

RayHit cast_ray(const LabelVolume& labels, const CameraGrid& grid, std::size_t row,
                std::size_t col) {
  const GridDims g = grid.dims;
  // Ray parameter t is camera-frame depth because the camera direction has z = 1.
  const Vec3 dir_cam{(static_cast<double>(col) - grid.cx) / grid.fx,
                     (static_cast<double>(row) - grid.cy) / grid.fy, 1.0};
  const Vec3 o = grid.pose.apply_inverse({0.0, 0.0, 0.0});
  const Vec3 shifted = grid.pose.apply_inverse(dir_cam);
  const Vec3 dir{shifted[0] - o[0], shifted[1] - o[1], shifted[2] - o[2]};
  const std::size_t n[3] = {g.width, g.height, g.depth};  // x, y, z extents
  const double s = grid.voxel_size;

  double t_in = 0.0, t_out = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double lo = grid.origin[a];
    const double hi = lo + s * static_cast<double>(n[a]);
    if (dir[a] == 0.0) {
      if (o[a] < lo || o[a] > hi) return {};
      continue;
    }
    double t0 = (lo - o[a]) / dir[a], t1 = (hi - o[a]) / dir[a];
    if (t0 > t1) std::swap(t0, t1);
    t_in = std::max(t_in, t0);
    t_out = std::min(t_out, t1);
  }
  if (t_in > t_out) return {};

  long idx[3];
  int step[3];
  double t_next[3], t_delta[3];
  for (int a = 0; a < 3; ++a) {
    const double p = o[a] + t_in * dir[a];
    const double rel = (p - grid.origin[a]) / s;
    idx[a] = std::clamp(static_cast<long>(std::floor(rel)), 0L, static_cast<long>(n[a]) - 1);
    if (dir[a] > 0.0) {
      step[a] = 1;
      t_next[a] = (grid.origin[a] + s * static_cast<double>(idx[a] + 1) - o[a]) / dir[a];
      t_delta[a] = s / dir[a];
    } else if (dir[a] < 0.0) {
      step[a] = -1;
      t_next[a] = (grid.origin[a] + s * static_cast<double>(idx[a]) - o[a]) / dir[a];
      t_delta[a] = -s / dir[a];
    } else {
      step[a] = 0;
      t_next[a] = std::numeric_limits<double>::infinity();
      t_delta[a] = std::numeric_limits<double>::infinity();
    }
  }

  double t = t_in;
  while (true) {
    const std::size_t voxel = labels.index(static_cast<std::size_t>(idx[2]),
                                           static_cast<std::size_t>(idx[1]),
                                           static_cast<std::size_t>(idx[0]));
    if (labels.ids[voxel] != 0) return {true, t, voxel};
    const int a = t_next[0] <= t_next[1] ? (t_next[0] <= t_next[2] ? 0 : 2)
                                         : (t_next[1] <= t_next[2] ? 1 : 2);
    t = t_next[a];
    if (t > t_out) return {};
    idx[a] += step[a];
    if (idx[a] < 0 || idx[a] >= static_cast<long>(n[a])) return {};
    t_next[a] += t_delta[a];
  }
}

Tensor render_rgb(const LabelVolume& labels, const CameraGrid& grid,
                  const std::vector<Rgb>& palette) {
  grid.validate();
  if (labels.dims != grid.dims) throw ShapeError("label volume does not match the grid");
  Tensor img = Tensor::image(3, grid.image_rows, grid.image_cols);
  for (std::size_t r = 0; r < grid.image_rows; ++r) {
    for (std::size_t c = 0; c < grid.image_cols; ++c) {
      const RayHit hit = cast_ray(labels, grid, r, c);
      if (!hit.hit) continue;
      const std::size_t cls = labels.ids[hit.voxel];
      if (cls >= palette.size()) throw ShapeError("palette has no colour for class");
      const double shade = 1.0 / (1.0 + hit.depth);
      for (std::size_t ch = 0; ch < 3; ++ch) img.px(ch, r, c) = palette[cls][ch] * shade;
    }
  }
  return img;
}

Tensor flip_image(const Tensor& image) {
  image.require_rank(3);
  Tensor out(image.shape());
  const std::size_t cols = image.cols();
  for (std::size_t ch = 0; ch < image.channels(); ++ch) {
    for (std::size_t r = 0; r < image.rows(); ++r) {
      for (std::size_t c = 0; c < cols; ++c) out.px(ch, r, c) = image.px(ch, r, cols - 1 - c);
    }
  }
  return out;
}

bool flip_is_consistent(const CameraGrid& grid) {
  const double half_width = 0.5 * grid.voxel_size * static_cast<double>(grid.dims.width);
  return grid.pose.is_identity() &&
         std::abs(grid.cx - 0.5 * static_cast<double>(grid.image_cols - 1)) < 1e-12 &&
         std::abs(grid.origin[0] + half_width) < 1e-12;
}

}  // namespace amaa
