#pragma once

// OCTV volume files, little-endian:
//   "OCTV" | u32 version=1 | u32 x, y, z | f32 spacing[3] | u8 laterality
//   (0=Right, 1=Left) | u8 region (0=ONH, 1=Macula) | u32 id length | id
//   bytes | f32 voxels, x fastest
// The id string is the scan id, followed by a tab and the patient id when
// the latter is set.

#include <filesystem>

#include "volreg/store/binary.hpp"
#include "volreg/tensor.hpp"

namespace volreg::store {

inline constexpr std::uint32_t kOctvVersion = 1;

Bytes encode_volume(const Volume& vol);
Volume decode_volume(std::span<const std::uint8_t> bytes);

void write_volume(const Volume& vol, const std::filesystem::path& path);
Volume read_volume(const std::filesystem::path& path);

}  // namespace volreg::store
