#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace amaa {

// Error categories shared by every module.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UnsupportedKernelError : public ShapeError {
 public:
  using ShapeError::ShapeError;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

/// Dense row-major tensor of doubles, rank <= 5.
///
/// Rank-4 tensors are voxel volumes in channel-first (C, D, H, W) order and
/// rank-3 tensors are images in (C, rows, cols) order. Both share this class;
/// the helpers below check the rank before interpreting the axes.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor volume(std::size_t c, std::size_t d, std::size_t h,
                       std::size_t w, double fill = 0.0) {
    return Tensor({c, d, h, w}, fill);
  }
  static Tensor image(std::size_t c, std::size_t rows, std::size_t cols,
                      double fill = 0.0) {
    return Tensor({c, rows, cols}, fill);
  }
  static Tensor scalar(double v) { return Tensor({1}, v); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Volume accessors (rank 4).
  std::size_t channels() const { return dim(0); }
  std::size_t depth() const { return require_rank(4).dim(1); }
  std::size_t height() const { return require_rank(4).dim(2); }
  std::size_t width() const { return require_rank(4).dim(3); }
  std::size_t voxels() const { return depth() * height() * width(); }
  double& at(std::size_t c, std::size_t d, std::size_t h, std::size_t w) {
    return data_[((c * shape_[1] + d) * shape_[2] + h) * shape_[3] + w];
  }
  double at(std::size_t c, std::size_t d, std::size_t h, std::size_t w) const {
    return data_[((c * shape_[1] + d) * shape_[2] + h) * shape_[3] + w];
  }

  // Image accessors (rank 3).
  std::size_t rows() const { return require_rank(3).dim(1); }
  std::size_t cols() const { return require_rank(3).dim(2); }
  double& px(std::size_t c, std::size_t r, std::size_t col) {
    return data_[(c * shape_[1] + r) * shape_[2] + col];
  }
  double px(std::size_t c, std::size_t r, std::size_t col) const {
    return data_[(c * shape_[1] + r) * shape_[2] + col];
  }

  Tensor reshaped(Shape shape) const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  const Tensor& require_rank(std::size_t r) const;

  /// Bitwise equality (distinguishes +0/-0 and NaN payloads).
  bool bit_equal(const Tensor& other) const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

using VoxelVolume = Tensor;
using Image2D = Tensor;

/// Spatial extent of a rank-4 volume.
struct GridDims {
  std::size_t depth = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t count() const { return depth * height * width; }
  bool operator==(const GridDims&) const = default;
};

GridDims spatial_dims(const Tensor& volume);

}  // namespace amaa
