#include "amaa/volume_file.hpp"

#include <array>
#include <limits>
#include <string>

#include "amaa/byte_io.hpp"

namespace amaa {
namespace {

constexpr char kMagic[] = "VVOX1";
constexpr std::size_t kHeaderSize = 23;

struct Header {
  VolumeDtype dtype;
  std::array<std::uint32_t, 4> dims;  // C, D, H, W
  std::size_t count() const {
    return std::size_t{dims[0]} * dims[1] * dims[2] * dims[3];
  }
};

std::uint32_t checked_u32(std::size_t v) {
  if (v > std::numeric_limits<std::uint32_t>::max()) {
    throw ShapeError("volume extent does not fit in u32");
  }
  return static_cast<std::uint32_t>(v);
}

std::vector<std::uint8_t> assemble(VolumeDtype dtype, const std::array<std::size_t, 4>& dims,
                                   const std::vector<std::uint8_t>& payload) {
  ByteWriter w;
  w.str(kMagic);
  w.u8(kVolumeVersion);
  w.u8(static_cast<std::uint8_t>(dtype));
  for (auto d : dims) w.u32(checked_u32(d));
  w.raw(payload);
  w.u32(crc32(payload));
  return std::move(w.bytes());
}

// Validates framing and CRC; `payload` receives the scalar bytes.
Header parse(const std::vector<std::uint8_t>& bytes, std::span<const std::uint8_t>& payload) {
  ByteReader r(bytes);
  if (r.str(5) != kMagic) throw CorruptFileError("bad volume magic", 0);
  const std::uint8_t version = r.u8();
  if (version != kVolumeVersion) {
    throw CorruptFileError("unsupported volume version " + std::to_string(version), 5);
  }
  const std::uint8_t tag = r.u8();
  if (tag > 1) throw CorruptFileError("unknown volume dtype " + std::to_string(tag), 6);
  Header h{static_cast<VolumeDtype>(tag), {r.u32(), r.u32(), r.u32(), r.u32()}};
  const std::size_t scalar = h.dtype == VolumeDtype::kF64 ? 8 : 2;
  // Hostile extents must not overflow the size computation.
  std::size_t count = 1;
  bool overflow = false;
  for (auto d : h.dims) overflow |= __builtin_mul_overflow(count, std::size_t{d}, &count);
  if (overflow || count > r.remaining() / scalar) {
    throw CorruptFileError("truncated volume payload", bytes.size());
  }
  const std::size_t n = h.count() * scalar;
  if (r.remaining() < n + 4) {
    throw CorruptFileError("truncated volume payload", bytes.size());
  }
  if (r.remaining() > n + 4) {
    throw CorruptFileError("trailing bytes after volume CRC", kHeaderSize + n + 4);
  }
  payload = std::span<const std::uint8_t>(bytes).subspan(kHeaderSize, n);
  ByteReader tail(std::span<const std::uint8_t>(bytes).subspan(kHeaderSize + n));
  if (crc32(payload) != tail.u32()) {
    throw CorruptFileError("volume CRC mismatch", kHeaderSize + n);
  }
  return h;
}

}  // namespace

std::vector<std::uint8_t> encode_volume(const Tensor& volume) {
  volume.require_rank(4);
  ByteWriter p;
  for (double v : volume.values()) p.f64(v);
  return assemble(VolumeDtype::kF64,
                  {volume.dim(0), volume.dim(1), volume.dim(2), volume.dim(3)}, p.bytes());
}

std::vector<std::uint8_t> encode_labels(const LabelVolume& labels) {
  if (labels.ids.size() != labels.dims.count()) {
    throw ShapeError("label volume size does not match its dims");
  }
  ByteWriter p;
  for (auto id : labels.ids) p.u16(id);
  return assemble(VolumeDtype::kU16,
                  {1, labels.dims.depth, labels.dims.height, labels.dims.width},
                  p.bytes());
}

Tensor decode_volume(const std::vector<std::uint8_t>& bytes) {
  std::span<const std::uint8_t> payload;
  const Header h = parse(bytes, payload);
  if (h.dtype != VolumeDtype::kF64) throw CorruptFileError("expected an f64 volume", 6);
  if (h.count() == 0) throw CorruptFileError("volume has a zero extent", 7);
  ByteReader r(payload);
  std::vector<double> data(h.count());
  for (double& v : data) v = r.f64();
  return Tensor({h.dims[0], h.dims[1], h.dims[2], h.dims[3]}, std::move(data));
}

LabelVolume decode_labels(const std::vector<std::uint8_t>& bytes) {
  std::span<const std::uint8_t> payload;
  const Header h = parse(bytes, payload);
  if (h.dtype != VolumeDtype::kU16) throw CorruptFileError("expected a u16 label volume", 6);
  if (h.dims[0] != 1) throw CorruptFileError("label volumes have one channel", 7);
  LabelVolume out(GridDims{h.dims[1], h.dims[2], h.dims[3]});
  ByteReader r(payload);
  for (auto& id : out.ids) id = r.u16();
  return out;
}

void save_volume(const std::filesystem::path& path, const Tensor& volume) {
  write_file_atomic(path, encode_volume(volume));
}

Tensor load_volume(const std::filesystem::path& path) {
  return decode_volume(read_file(path));
}

void save_labels(const std::filesystem::path& path, const LabelVolume& labels) {
  write_file_atomic(path, encode_labels(labels));
}

LabelVolume load_labels(const std::filesystem::path& path) {
  return decode_labels(read_file(path));
}

void save_image(const std::filesystem::path& path, const Tensor& image) {
  image.require_rank(3);
  save_volume(path, image.reshaped({image.dim(0), 1, image.dim(1), image.dim(2)}));
}

Tensor load_image(const std::filesystem::path& path) {
  const Tensor v = load_volume(path);
  if (v.dim(1) != 1) throw CorruptFileError("image volumes must have D = 1", 11);
  return v.reshaped({v.dim(0), v.dim(2), v.dim(3)});
}

}  // namespace amaa
