#pragma once

// VVOX1 binary volume format.
//
//   offset  size  field
//   0       5     magic "VVOX1"
//   5       1     version (1)
//   6       1     dtype: 0 = f64, 1 = u16 labels
//   7       16    C, D, H, W as little-endian u32
//   23      n     payload, little-endian scalars, channel-first row-major
//   23+n    4     CRC32 (zlib polynomial) of the payload, little-endian
//
// Images are stored as (3, 1, rows, cols) f64 volumes.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "amaa/objective.hpp"
#include "amaa/tensor.hpp"

namespace amaa {

inline constexpr std::uint8_t kVolumeVersion = 1;

enum class VolumeDtype : std::uint8_t { kF64 = 0, kU16 = 1 };

std::vector<std::uint8_t> encode_volume(const Tensor& volume);
std::vector<std::uint8_t> encode_labels(const LabelVolume& labels);

/// Throws CorruptFileError (with byte offset) on bad magic, version, dtype,
/// truncation, trailing bytes or CRC mismatch.
Tensor decode_volume(const std::vector<std::uint8_t>& bytes);
LabelVolume decode_labels(const std::vector<std::uint8_t>& bytes);

void save_volume(const std::filesystem::path& path, const Tensor& volume);
Tensor load_volume(const std::filesystem::path& path);

void save_labels(const std::filesystem::path& path, const LabelVolume& labels);
LabelVolume load_labels(const std::filesystem::path& path);

/// (3, rows, cols) image stored with D = 1.
void save_image(const std::filesystem::path& path, const Tensor& image);
Tensor load_image(const std::filesystem::path& path);

}  // namespace amaa
