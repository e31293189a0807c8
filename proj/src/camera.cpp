#include "amaa/camera.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace amaa {

Vec3 RigidPose::apply(const Vec3& p) const {
  const auto& r = rotation;
  return {r[0] * p[0] + r[1] * p[1] + r[2] * p[2] + translation[0],
          r[3] * p[0] + r[4] * p[1] + r[5] * p[2] + translation[1],
          r[6] * p[0] + r[7] * p[1] + r[8] * p[2] + translation[2]};
}

Vec3 RigidPose::apply_inverse(const Vec3& p) const {
  const auto& r = rotation;
  const Vec3 q{p[0] - translation[0], p[1] - translation[1], p[2] - translation[2]};
  return {r[0] * q[0] + r[3] * q[1] + r[6] * q[2],
          r[1] * q[0] + r[4] * q[1] + r[7] * q[2],
          r[2] * q[0] + r[5] * q[1] + r[8] * q[2]};
}

bool RigidPose::is_identity() const {
  return rotation == std::array<double, 9>{1, 0, 0, 0, 1, 0, 0, 0, 1} &&
         translation == Vec3{0, 0, 0};
}

void CameraGrid::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw ConfigError("camera fx and fy must be > 0");
  if (!(voxel_size > 0.0)) throw ConfigError("voxel_size must be > 0");
  if (dims.depth < 1 || dims.height < 1 || dims.width < 1) {
    throw ConfigError("grid dims must all be >= 1");
  }
  if (image_rows < 1 || image_cols < 1) throw ConfigError("image size must be >= 1");
  for (double v : origin) {
    if (!std::isfinite(v)) throw ConfigError("grid origin must be finite");
  }
}

Vec3 CameraGrid::voxel_center(std::size_t d, std::size_t h, std::size_t w,
                              std::size_t cell) const {
  const double s = voxel_size * static_cast<double>(cell);
  return {origin[0] + s * (static_cast<double>(w) + 0.5),
          origin[1] + s * (static_cast<double>(h) + 0.5),
          origin[2] + s * (static_cast<double>(d) + 0.5)};
}

namespace {

std::size_t ceil_div(std::size_t n, std::size_t k) { return (n + k - 1) / k; }

// Fine voxels per coarse voxel for a resolution that coarsens `dims`.
std::size_t coarsening(const GridDims& dims, const GridDims& res) {
  for (std::size_t cell = 1; cell <= 1024; cell *= 2) {
    if (ceil_div(dims.depth, cell) == res.depth &&
        ceil_div(dims.height, cell) == res.height &&
        ceil_div(dims.width, cell) == res.width) {
      return cell;
    }
  }
  throw ShapeError("voxel resolution " + std::to_string(res.depth) + "x" +
                   std::to_string(res.height) + "x" + std::to_string(res.width) +
                   " is not a power-of-two coarsening of the grid");
}

std::size_t image_downscale(const CameraGrid& grid, std::size_t rows,
                            std::size_t cols) {
  for (std::size_t f = 1; f <= 1024; f *= 2) {
    if (ceil_div(grid.image_rows, f) == rows && ceil_div(grid.image_cols, f) == cols) {
      return f;
    }
  }
  throw ShapeError("feature map " + std::to_string(rows) + "x" +
                   std::to_string(cols) +
                   " is not a power-of-two downscale of the camera image");
}

}  // namespace

std::vector<ProjectedVoxel> project_voxel_centers(const CameraGrid& grid) {
  return project_voxel_centers(grid, grid.dims, 1.0);
}

std::vector<ProjectedVoxel> project_voxel_centers(const CameraGrid& grid,
                                                  const GridDims& resolution,
                                                  double downscale) {
  grid.validate();
  const std::size_t cell = coarsening(grid.dims, resolution);
  const double fx = grid.fx / downscale, fy = grid.fy / downscale;
  const double cx = grid.cx / downscale, cy = grid.cy / downscale;
  std::vector<ProjectedVoxel> out;
  out.reserve(resolution.count());
  for (std::size_t d = 0; d < resolution.depth; ++d) {
    for (std::size_t h = 0; h < resolution.height; ++h) {
      for (std::size_t w = 0; w < resolution.width; ++w) {
        const Vec3 p = grid.pose.apply(grid.voxel_center(d, h, w, cell));
        ProjectedVoxel pv;
        pv.z = p[2];
        if (p[2] > 0.0) {
          pv.u = fx * p[0] / p[2] + cx;
          pv.v = fy * p[1] / p[2] + cy;
          pv.valid = true;
        }
        out.push_back(pv);
      }
    }
  }
  return out;
}

ScaleMap make_scale_map(const CameraGrid& grid,
                        const std::vector<std::size_t>& levels) {
  ScaleMap map;
  std::size_t cell = 1;
  for (std::size_t level : levels) {
    map.push_back({level,
                   {ceil_div(grid.dims.depth, cell), ceil_div(grid.dims.height, cell),
                    ceil_div(grid.dims.width, cell)}});
    cell *= 2;
  }
  return map;
}

LiftPlan make_lift_plan(const CameraGrid& grid, std::size_t rows,
                        std::size_t cols, const GridDims& resolution,
                        Sampling sampling) {
  const double downscale = static_cast<double>(image_downscale(grid, rows, cols));
  const auto projected = project_voxel_centers(grid, resolution, downscale);
  LiftPlan plan;
  plan.feature_rows = rows;
  plan.feature_cols = cols;
  plan.resolution = resolution;
  plan.tap_begin.reserve(projected.size() + 1);
  const double max_u = static_cast<double>(cols - 1);
  const double max_v = static_cast<double>(rows - 1);
  for (const auto& pv : projected) {
    plan.tap_begin.push_back(plan.pixel.size());
    if (!pv.valid) continue;
    // A voxel is in view when its nearest pixel lies inside the image.
    const double nu = std::floor(pv.u + 0.5);
    const double nv = std::floor(pv.v + 0.5);
    if (nu < 0.0 || nv < 0.0 || nu > max_u || nv > max_v) continue;
    if (sampling == Sampling::kNearest) {
      plan.pixel.push_back(static_cast<std::size_t>(nv) * cols +
                           static_cast<std::size_t>(nu));
      plan.weight.push_back(1.0);
      continue;
    }
    const double u = std::clamp(pv.u, 0.0, max_u);
    const double v = std::clamp(pv.v, 0.0, max_v);
    const auto c0 = static_cast<std::size_t>(std::floor(u));
    const auto r0 = static_cast<std::size_t>(std::floor(v));
    const std::size_t c1 = std::min(c0 + 1, cols - 1);
    const std::size_t r1 = std::min(r0 + 1, rows - 1);
    const double tu = u - static_cast<double>(c0);
    const double tv = v - static_cast<double>(r0);
    const std::size_t px[4] = {r0 * cols + c0, r0 * cols + c1, r1 * cols + c0,
                               r1 * cols + c1};
    const double wt[4] = {(1 - tv) * (1 - tu), (1 - tv) * tu, tv * (1 - tu),
                          tv * tu};
    for (int k = 0; k < 4; ++k) {
      plan.pixel.push_back(px[k]);
      plan.weight.push_back(wt[k]);
    }
  }
  plan.tap_begin.push_back(plan.pixel.size());
  return plan;
}

Tensor LiftPlan::apply(const Tensor& features) const {
  features.require_rank(3);
  if (features.rows() != feature_rows || features.cols() != feature_cols) {
    throw ShapeError("lift plan built for " + std::to_string(feature_rows) + "x" +
                     std::to_string(feature_cols) + " features, got " +
                     to_string(features.shape()));
  }
  const std::size_t channels = features.channels();
  const std::size_t n = resolution.count();
  const std::size_t npx = feature_rows * feature_cols;
  Tensor out = Tensor::volume(channels, resolution.depth, resolution.height,
                              resolution.width);
  for (std::size_t c = 0; c < channels; ++c) {
    const double* f = features.data() + c * npx;
    double* o = out.data() + c * n;
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t k = tap_begin[i]; k < tap_begin[i + 1]; ++k) {
        acc += weight[k] * f[pixel[k]];
      }
      o[i] = acc;
    }
  }
  return out;
}

Tensor LiftPlan::apply_adjoint(const Tensor& grad_volume, std::size_t channels) const {
  const std::size_t n = resolution.count();
  const std::size_t npx = feature_rows * feature_cols;
  Tensor g = Tensor::image(channels, feature_rows, feature_cols);
  for (std::size_t c = 0; c < channels; ++c) {
    const double* gv = grad_volume.data() + c * n;
    double* gf = g.data() + c * npx;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = tap_begin[i]; k < tap_begin[i + 1]; ++k) {
        gf[pixel[k]] += weight[k] * gv[i];
      }
    }
  }
  return g;
}

Tensor flosp_lift(const Tensor& features, const CameraGrid& grid,
                  const GridDims& resolution, Sampling sampling) {
  features.require_rank(3);
  return make_lift_plan(grid, features.rows(), features.cols(), resolution, sampling)
      .apply(features);
}

std::vector<Tensor> multi_scale_lift(const std::vector<Tensor>& pyramid,
                                     const CameraGrid& grid,
                                     const ScaleMap& scales, Sampling sampling) {
  if (pyramid.size() != scales.size()) {
    throw ConfigError("pyramid has " + std::to_string(pyramid.size()) +
                      " levels but the scale map has " +
                      std::to_string(scales.size()) + " entries");
  }
  std::vector<Tensor> out;
  out.reserve(pyramid.size());
  for (std::size_t i = 0; i < pyramid.size(); ++i) {
    out.push_back(flosp_lift(pyramid[i], grid, scales[i].resolution, sampling));
  }
  return out;
}

namespace ad {

Var lift(Tape& t, Var features, std::shared_ptr<const LiftPlan> plan) {
  return t.record(
      {features},
      [features, plan](const Tape& tp) { return plan->apply(tp.value(features)); },
      [features, plan](Tape& tp, std::size_t self) {
        if (!tp.needs_grad(features)) return;
        const Tensor g = plan->apply_adjoint(tp.grad_slot({self}),
                                             tp.value(features).channels());
        Tensor& slot = tp.grad_slot(features);
        for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i];
      });
}

}  // namespace ad
}  // namespace amaa
