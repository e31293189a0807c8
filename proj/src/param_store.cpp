#include "amaa/param_store.hpp"

#include <cmath>

#include "amaa/byte_io.hpp"

namespace amaa {
namespace {
constexpr char kMagic[] = "AMAAPRM1";
}

Param& ParamStore::add(const std::string& name, Tensor value, bool decay) {
  if (name.empty()) throw ConfigError("parameter name must be non-empty");
  if (params_.count(name)) throw ConfigError("duplicate parameter '" + name + "'");
  Tensor grad(value.shape());
  auto [it, _] = params_.emplace(name, Param{std::move(value), std::move(grad), decay});
  return it->second;
}

bool ParamStore::contains(const std::string& name) const {
  return params_.count(name) != 0;
}

Param& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->second;
}

const Param& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [_, p] : params_) {
    for (double& g : p.grad.values()) g = 0.0;
  }
}

void ParamStore::scale_grad(double k) {
  for (auto& [_, p] : params_) {
    for (double& g : p.grad.values()) g *= k;
  }
}

double ParamStore::grad_norm() const {
  double acc = 0.0;
  for (const auto& [_, p] : params_) {
    for (double g : p.grad.values()) acc += g * g;
  }
  return std::sqrt(acc);
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += p.value.size();
  return n;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, _] : params_) out.push_back(name);
  return out;
}

bool ParamStore::bit_equal(const ParamStore& other) const {
  if (params_.size() != other.params_.size()) return false;
  auto a = params_.begin();
  auto b = other.params_.begin();
  for (; a != params_.end(); ++a, ++b) {
    if (a->first != b->first || !a->second.value.bit_equal(b->second.value)) {
      return false;
    }
  }
  return true;
}

std::vector<std::uint8_t> ParamStore::serialize() const {
  ByteWriter w;
  w.str(kMagic);
  w.u32(static_cast<std::uint32_t>(params_.size()));
  for (const auto& [name, p] : params_) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.str(name);
    w.u8(p.decay ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(p.value.rank()));
    for (auto d : p.value.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (double v : p.value.values()) w.f64(v);
  }
  const std::uint32_t crc = crc32(w.bytes());
  w.u32(crc);
  return std::move(w.bytes());
}

ParamStore ParamStore::deserialize(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4) throw CorruptFileError("parameter file too short", 0);
  const std::span<const std::uint8_t> body(bytes.data(), bytes.size() - 4);
  ByteReader tail(std::span<const std::uint8_t>(bytes).subspan(bytes.size() - 4));
  if (crc32(body) != tail.u32()) {
    throw CorruptFileError("parameter file CRC mismatch", bytes.size() - 4);
  }
  ByteReader r(body);
  if (r.str(8) != kMagic) throw CorruptFileError("bad parameter file magic", 0);
  ParamStore store;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str(r.u32());
    const bool decay = r.u8() != 0;
    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > 5) {
      throw CorruptFileError("invalid rank for '" + name + "'", r.offset());
    }
    Shape shape(rank);
    for (auto& d : shape) d = r.u32();
    std::vector<double> data(element_count(shape));
    for (double& v : data) v = r.f64();
    store.add(name, Tensor(std::move(shape), std::move(data)), decay);
  }
  if (r.remaining() != 0) {
    throw CorruptFileError("trailing bytes in parameter file", r.offset());
  }
  return store;
}

void ParamStore::save(const std::filesystem::path& path) const {
  write_file_atomic(path, serialize());
}

ParamStore ParamStore::load(const std::filesystem::path& path) {
  return deserialize(read_file(path));
}

}  // namespace amaa
