#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "amaa/tensor.hpp"

namespace amaa {

/// A learnable tensor and its gradient accumulator.
struct Param {
  Tensor value;
  Tensor grad;
  bool decay = true;  // subject to decoupled weight decay
};

/// Named parameters, iterated in lexicographic name order.
class ParamStore {
 public:
  /// Registers a parameter; the name must be new.
  Param& add(const std::string& name, Tensor value, bool decay = true);

  bool contains(const std::string& name) const;
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  Tensor& value(const std::string& name) { return at(name).value; }
  const Tensor& value(const std::string& name) const { return at(name).value; }
  Tensor& grad(const std::string& name) { return at(name).grad; }

  void zero_grad();
  void scale_grad(double k);
  double grad_norm() const;
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  std::vector<std::string> names() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  bool bit_equal(const ParamStore& other) const;

  /// Binary snapshot: "AMAAPRM1", u32 count, then per parameter
  /// (u32 name length, name, u8 decay, u32 rank, u32 dims..., f64 data...),
  /// trailing CRC32 of everything before it. Little-endian throughout.
  std::vector<std::uint8_t> serialize() const;
  static ParamStore deserialize(const std::vector<std::uint8_t>& bytes);

  void save(const std::filesystem::path& path) const;
  static ParamStore load(const std::filesystem::path& path);

 private:
  std::map<std::string, Param> params_;
};

}  // namespace amaa
