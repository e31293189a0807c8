#include "amaa/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace amaa {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  if (shape_.empty() || shape_.size() > 5) {
    throw ShapeError("tensor rank must be 1..5, got " +
                     std::to_string(shape_.size()));
  }
  data_.assign(element_count(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_.empty() || shape_.size() > 5) {
    throw ShapeError("tensor rank must be 1..5, got " +
                     std::to_string(shape_.size()));
  }
  if (data_.size() != element_count(shape_)) {
    throw ShapeError("data length " + std::to_string(data_.size()) +
                     " does not match shape " + to_string(shape_));
  }
}

Tensor Tensor::reshaped(Shape shape) const {
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

const Tensor& Tensor::require_rank(std::size_t r) const {
  if (rank() != r) {
    throw ShapeError("expected rank-" + std::to_string(r) + " tensor, got " +
                     to_string(shape_));
  }
  return *this;
}

bool Tensor::bit_equal(const Tensor& other) const {
  if (shape_ != other.shape_) return false;
  if (data_.empty()) return true;
  return std::memcmp(data_.data(), other.data_.data(),
                     data_.size() * sizeof(double)) == 0;
}

GridDims spatial_dims(const Tensor& volume) {
  volume.require_rank(4);
  return {volume.dim(1), volume.dim(2), volume.dim(3)};
}

}  // namespace amaa
